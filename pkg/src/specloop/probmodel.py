"""Core probabilistic abstractions for photon-counting measurements.

Measurements are Poisson counts: a point x observed for an exposure T with
underlying rate f yields y ~ Poisson(f * T).  A campaign accumulates raw
records (x, y, T) in a Dataset; repeated visits to the same x are aggregated
into a total exposure t and a count rate y_bar = (sum y) / t for reporting
and for the Gaussian-process baseline.

A parametric forward model is described by a ModelSpec: a per-parameter
prior plus a vectorized rate function f(x; theta).
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy.special import gammaln

__all__ = [
    "LOG_ZERO",
    "MeasurementRecord",
    "Dataset",
    "AggregatedPoint",
    "PriorDescriptor",
    "ModelSpec",
    "log_poisson_pmf",
    "log_likelihood",
    "log_likelihood_batch",
    "log_prior",
    "log_prior_batch",
    "sample_prior",
    "aggregate",
]

# Dedicated log-zero sentinel: propagates through sums, exponentiates to 0.
LOG_ZERO = float("-inf")


@dataclass(frozen=True)
class MeasurementRecord:
    """One raw measurement: photon count y at point x over exposure T."""

    x: float
    y: int
    exposure: float

    def __post_init__(self):
        if self.y < 0 or self.y != int(self.y):
            raise ValueError(f"count must be a non-negative integer, got {self.y}")
        if not self.exposure > 0:
            raise ValueError(f"exposure must be > 0, got {self.exposure}")


class Dataset:
    """Append-only ordered collection of MeasurementRecords.

    Caches the column arrays (x, y, t) and log(y!) so that repeated
    likelihood evaluations over a growing dataset stay cheap.
    """

    def __init__(self, records: Sequence[MeasurementRecord] = ()):
        self._records: list[MeasurementRecord] = list(records)
        self._cache_len = -1
        self._cols = None
        self._fast = None

    def append(self, record: MeasurementRecord) -> None:
        self._records.append(record)

    def extend(self, records) -> None:
        self._records.extend(records)

    @property
    def records(self) -> tuple[MeasurementRecord, ...]:
        return tuple(self._records)

    def __len__(self) -> int:
        return len(self._records)

    def __iter__(self):
        return iter(self._records)

    def columns(self):
        """(x, y, log_y_factorial, exposure) as float arrays, cached."""
        if self._cache_len != len(self._records):
            x = np.array([r.x for r in self._records], dtype=float)
            y = np.array([r.y for r in self._records], dtype=float)
            t = np.array([r.exposure for r in self._records], dtype=float)
            self._cols = (x, y, gammaln(y + 1.0), t)
            self._cache_len = len(self._records)
            self._fast = None
        return self._cols

    def _fast_columns(self):
        """Likelihood work set, grouped by unique x.

        Summing the per-record log pmfs and collecting terms gives

            loglike = sum_p Y_p log f(x_p) - sum_p f(x_p) t_p + const,

        where Y_p and t_p are the total count and exposure at unique point
        x_p and const = sum_r (y_r log T_r - log y_r!) does not depend on
        the model, so repeated measurements cost no extra forward
        evaluations.
        """
        self.columns()
        if self._fast is None:
            x, y, log_y_fact, t = self._cols
            ux, inv = np.unique(x, return_inverse=True)
            y_tot = np.zeros(len(ux))
            t_tot = np.zeros(len(ux))
            np.add.at(y_tot, inv, y)
            np.add.at(t_tot, inv, t)
            pos = np.flatnonzero(y_tot > 0)
            const = float((y * np.log(t)).sum() - log_y_fact.sum())
            self._fast = (ux, t_tot, pos, y_tot[pos], const)
        return self._fast

    def total_exposure(self) -> float:
        return float(sum(r.exposure for r in self._records))

    def to_csv(self, path) -> None:
        """Write records as ``x,y,exposure`` rows, x at full double precision."""
        with open(path, "w", encoding="utf-8") as fh:
            fh.write("x,y,exposure\n")
            for r in self._records:
                fh.write(f"{r.x!r},{r.y},{r.exposure!r}\n")

    @classmethod
    def from_csv(cls, path) -> "Dataset":
        ds = cls()
        with open(path, "r", encoding="utf-8") as fh:
            header = fh.readline().strip()
            if header != "x,y,exposure":
                raise ValueError(f"unexpected dataset header: {header!r}")
            for line in fh:
                line = line.strip()
                if not line:
                    continue
                xs, ys, ts = line.split(",")
                ds.append(MeasurementRecord(float(xs), int(ys), float(ts)))
        return ds


@dataclass(frozen=True)
class AggregatedPoint:
    """Total exposure t and count rate y_bar accumulated at one point."""

    x: float
    t: float
    y_bar: float


class PriorDescriptor:
    """One-dimensional prior over a single model parameter.

    Supported kinds:

    - ``gamma(shape, rate)`` on (0, inf)
    - ``uniform(lo, hi)``
    - ``normal(mean, sd)``
    - ``gamma_on_inverse_square(shape, rate)``: the sampled coordinate is
      u = 1/sigma^2 and u ~ Gamma(shape, rate).  The chain moves in u-space
      directly, so no change-of-variable Jacobian ever enters; width-like
      quantities are recovered as sigma = u**-0.5.
    """

    __slots__ = ("kind", "p1", "p2")

    GAMMA = "gamma"
    UNIFORM = "uniform"
    NORMAL = "normal"
    GAMMA_ON_INVERSE_SQUARE = "gamma_on_inverse_square"

    def __init__(self, kind: str, p1: float, p2: float):
        if kind in (self.GAMMA, self.GAMMA_ON_INVERSE_SQUARE):
            if p1 <= 0 or p2 <= 0:
                raise ValueError("gamma shape and rate must be > 0")
        elif kind == self.UNIFORM:
            if not p1 < p2:
                raise ValueError("uniform prior needs lo < hi")
        elif kind == self.NORMAL:
            if p2 <= 0:
                raise ValueError("normal sd must be > 0")
        else:
            raise ValueError(f"unknown prior kind {kind!r}")
        self.kind = kind
        self.p1 = float(p1)
        self.p2 = float(p2)

    @classmethod
    def gamma(cls, shape: float, rate: float) -> "PriorDescriptor":
        return cls(cls.GAMMA, shape, rate)

    @classmethod
    def uniform(cls, lo: float, hi: float) -> "PriorDescriptor":
        return cls(cls.UNIFORM, lo, hi)

    @classmethod
    def normal(cls, mean: float, sd: float) -> "PriorDescriptor":
        return cls(cls.NORMAL, mean, sd)

    @classmethod
    def gamma_on_inverse_square(cls, shape: float, rate: float) -> "PriorDescriptor":
        return cls(cls.GAMMA_ON_INVERSE_SQUARE, shape, rate)

    def __repr__(self):
        return f"PriorDescriptor({self.kind!r}, {self.p1!r}, {self.p2!r})"

    def __eq__(self, other):
        return (
            isinstance(other, PriorDescriptor)
            and (self.kind, self.p1, self.p2) == (other.kind, other.p1, other.p2)
        )

    def log_density(self, value):
        """Log density at ``value`` (scalar or array); LOG_ZERO outside support."""
        v = np.asarray(value, dtype=float)
        if self.kind == self.UNIFORM:
            lo, hi = self.p1, self.p2
            out = np.where((v >= lo) & (v <= hi), -math.log(hi - lo), LOG_ZERO)
        elif self.kind == self.NORMAL:
            mean, sd = self.p1, self.p2
            out = -0.5 * ((v - mean) / sd) ** 2 - math.log(sd) - 0.5 * math.log(2 * math.pi)
        else:  # gamma / gamma_on_inverse_square: Gamma density in the stored coordinate
            shape, rate = self.p1, self.p2
            with np.errstate(divide="ignore", invalid="ignore"):
                body = (shape - 1) * np.log(v) - rate * v
            out = np.where(
                v > 0,
                body + shape * math.log(rate) - gammaln(shape),
                LOG_ZERO,
            )
        return float(out) if np.isscalar(value) else out

    def sample(self, rng: np.random.Generator, size=None):
        if self.kind == self.UNIFORM:
            return rng.uniform(self.p1, self.p2, size=size)
        if self.kind == self.NORMAL:
            return rng.normal(self.p1, self.p2, size=size)
        return rng.gamma(self.p1, 1.0 / self.p2, size=size)

    def mean(self) -> float:
        if self.kind == self.UNIFORM:
            return 0.5 * (self.p1 + self.p2)
        if self.kind == self.NORMAL:
            return self.p1
        return self.p1 / self.p2

    def sd(self) -> float:
        if self.kind == self.UNIFORM:
            return (self.p2 - self.p1) / math.sqrt(12.0)
        if self.kind == self.NORMAL:
            return self.p2
        return math.sqrt(self.p1) / self.p2

    def default_step(self) -> float:
        """Initial random-walk proposal width, later tuned by adaptation."""
        if self.kind == self.UNIFORM:
            return (self.p2 - self.p1) / 10.0
        return self.sd()

    def to_json(self) -> dict:
        return {"kind": self.kind, "p1": self.p1, "p2": self.p2}

    @classmethod
    def from_json(cls, obj: dict) -> "PriorDescriptor":
        return cls(obj["kind"], obj["p1"], obj["p2"])


@dataclass(frozen=True)
class ModelSpec:
    """A parametric forward model: label, prior and rate function.

    ``forward(x, theta)`` must accept ``x`` of shape (P,) and ``theta`` of
    shape (dim,) or (B, dim), broadcasting to a rate array of shape (P,)
    or (B, P).  Rates must be finite and non-negative on the prior support.
    """

    id: str
    dim: int
    prior: tuple[PriorDescriptor, ...]
    forward: Callable[[np.ndarray, np.ndarray], np.ndarray]
    param_names: tuple[str, ...] = ()

    def __post_init__(self):
        if len(self.prior) != self.dim:
            raise ValueError(
                f"model {self.id}: {len(self.prior)} priors for dim {self.dim}"
            )
        if not self.param_names:
            object.__setattr__(
                self, "param_names", tuple(f"p{i}" for i in range(self.dim))
            )
        elif len(self.param_names) != self.dim:
            raise ValueError("param_names length must equal dim")

    def rate(self, x, theta) -> np.ndarray:
        """Evaluate the forward model on arbitrary x (scalar or array)."""
        xv = np.atleast_1d(np.asarray(x, dtype=float))
        out = self.forward(xv, np.asarray(theta, dtype=float))
        return out


def log_poisson_pmf(y, mean) -> float:
    """Log Poisson probability of count y with the given mean (rate x time).

    Edge cases: mean = 0 with y = 0 is certainty (0.0); mean = 0 with y > 0
    is impossible (LOG_ZERO).
    """
    if y < 0 or y != int(y):
        raise ValueError(f"count must be a non-negative integer, got {y}")
    if mean < 0:
        raise ValueError(f"mean must be >= 0, got {mean}")
    if mean == 0:
        return 0.0 if y == 0 else LOG_ZERO
    y = int(y)
    return y * math.log(mean) - mean - math.lgamma(y + 1)


def log_likelihood_batch(model: ModelSpec, thetas: np.ndarray, data: Dataset) -> np.ndarray:
    """Log likelihood of the dataset for a batch of parameter vectors.

    ``thetas`` has shape (B, dim); returns shape (B,).  A zero rate at a
    point with observed counts (or a negative rate anywhere) makes the
    data impossible and yields LOG_ZERO; a non-finite rate is a modeling
    bug and raises, naming the offending point.
    """
    thetas = np.asarray(thetas, dtype=float)
    if len(data) == 0:
        return np.zeros(thetas.shape[:-1])
    x, t, pos, y_pos, const = data._fast_columns()
    f = model.forward(x, thetas)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.log(f[..., pos]) @ y_pos - f @ t + const
    bad = ~np.isfinite(out) | (np.min(f, axis=-1) < 0)
    if np.any(bad):
        f_bad = np.atleast_2d(f[bad])
        finite = np.isfinite(f_bad)
        if not finite.all():
            idx = int(np.argwhere(~finite)[0][-1])
            raise RuntimeError(f"model {model.id}: non-finite rate at x = {x[idx]!r}")
        # Remaining bad rows are impossible rates (zero against counts,
        # negative anywhere) or exposure-sum overflow; all have zero
        # likelihood.  Zero rate at a zero-count point is benign and never
        # lands here: its log term is not gathered and f @ t gains 0.
        if out.ndim == 0:
            out = LOG_ZERO
        else:
            out[bad] = LOG_ZERO
    return out


def log_likelihood(model: ModelSpec, theta, data: Dataset) -> float:
    """Sum of log Poisson pmfs over all records; 0.0 on an empty dataset."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim,):
        raise ValueError(f"theta must have shape ({model.dim},), got {theta.shape}")
    return float(log_likelihood_batch(model, theta[None, :], data)[0])


def log_prior_batch(model: ModelSpec, thetas: np.ndarray) -> np.ndarray:
    """Sum of per-parameter log prior densities for a (B, dim) batch."""
    thetas = np.asarray(thetas, dtype=float)
    out = np.zeros(thetas.shape[:-1])
    for j, prior in enumerate(model.prior):
        out = out + prior.log_density(thetas[..., j])
    return out


def log_prior(model: ModelSpec, theta) -> float:
    """Log prior density of a single parameter vector; LOG_ZERO off-support."""
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (model.dim,):
        raise ValueError(f"theta must have shape ({model.dim},), got {theta.shape}")
    return float(log_prior_batch(model, theta[None, :])[0])


def sample_prior(model: ModelSpec, rng: np.random.Generator) -> np.ndarray:
    """Draw one parameter vector from the product prior."""
    return np.array([p.sample(rng) for p in model.prior], dtype=float)


def aggregate(data: Dataset, grid) -> list[AggregatedPoint]:
    """Fold raw records into per-grid-point totals.

    Returns one AggregatedPoint per grid value that was measured at least
    once, in grid order; x values must match grid entries exactly (records
    are always drawn from the campaign grid).
    """
    grid = np.asarray(grid, dtype=float)
    index = {float(g): i for i, g in enumerate(grid)}
    t_tot = np.zeros(len(grid))
    y_tot = np.zeros(len(grid))
    for r in data:
        i = index.get(float(r.x))
        if i is None:
            raise ValueError(f"record at x = {r.x!r} is not on the candidate grid")
        t_tot[i] += r.exposure
        y_tot[i] += r.y
    return [
        AggregatedPoint(x=float(grid[i]), t=float(t_tot[i]), y_bar=float(y_tot[i] / t_tot[i]))
        for i in range(len(grid))
        if t_tot[i] > 0
    ]
