"""Gaussian-process regression baseline for point selection.

Fits a zero-mean-offset GP with the squared-exponential kernel

    k(x, x') = theta1 * exp(-((x - x') / theta2)^2)

to aggregated count rates (x, y_bar), picks hyperparameters by maximizing
the log marginal likelihood (seeded multi-start quasi-Newton search in
log-parameter space), and selects the next measurement points where the
posterior variance is largest.  The baseline deliberately treats the data
as homoscedastic Gaussian, like the method it benchmarks against.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve
from scipy.optimize import minimize

from .probmodel import AggregatedPoint

__all__ = [
    "GpHyper",
    "GpPosterior",
    "kernel",
    "gp_fit",
    "gp_posterior",
    "gp_select",
]

_JITTER = 1e-8  # relative diagonal jitter, in units of theta1


@dataclass(frozen=True)
class GpHyper:
    """Kernel amplitude, length scale and observation noise sd."""

    theta1: float
    theta2: float
    xi: float
    degenerate: bool = False

    def __post_init__(self):
        if self.theta1 <= 0 or self.theta2 <= 0 or self.xi <= 0:
            raise ValueError("hyperparameters must be > 0")


def kernel(x, x_other, hyper: GpHyper):
    """Squared-exponential covariance; broadcasts over array inputs."""
    x = np.asarray(x, dtype=float)
    x_other = np.asarray(x_other, dtype=float)
    return hyper.theta1 * np.exp(-(((x - x_other) / hyper.theta2) ** 2))


def _as_xy(data) -> tuple[np.ndarray, np.ndarray]:
    data = list(data)
    if not data:
        return np.empty(0), np.empty(0)
    if isinstance(data[0], AggregatedPoint):
        x = np.array([p.x for p in data], dtype=float)
        y = np.array([p.y_bar for p in data], dtype=float)
    else:
        arr = np.asarray(data, dtype=float)
        x, y = arr[:, 0], arr[:, 1]
    return x, y


def _log_marginal(x, y, theta1, theta2, xi):
    n = len(x)
    mu0 = y.mean()
    resid = y - mu0
    k = theta1 * np.exp(-(((x[:, None] - x[None, :]) / theta2) ** 2))
    k[np.diag_indices_from(k)] += xi**2 + _JITTER * theta1
    try:
        factor = cho_factor(k, lower=True)
    except np.linalg.LinAlgError:
        return -np.inf
    alpha = cho_solve(factor, resid)
    logdet = 2.0 * np.log(np.diag(factor[0])).sum()
    return -0.5 * float(resid @ alpha) - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi)


class GpPosterior:
    """Factorized GP posterior over the training data for fast prediction."""

    def __init__(self, data, hyper: GpHyper):
        x, y = _as_xy(data)
        if len(x) < 1:
            raise ValueError("need at least one training point")
        self.hyper = hyper
        self.x_train = x
        self.mu0 = float(y.mean())
        k = hyper.theta1 * np.exp(-(((x[:, None] - x[None, :]) / hyper.theta2) ** 2))
        k[np.diag_indices_from(k)] += hyper.xi**2 + _JITTER * hyper.theta1
        try:
            self._factor = cho_factor(k, lower=True)
        except np.linalg.LinAlgError as exc:
            raise RuntimeError("GP covariance is singular after jitter") from exc
        self._alpha = cho_solve(self._factor, y - self.mu0)

    def predict(self, x):
        """Posterior mean and variance at x; variance clamped at 0."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        k_star = self.hyper.theta1 * np.exp(
            -(((self.x_train[:, None] - x[None, :]) / self.hyper.theta2) ** 2)
        )  # (n, P)
        mu = self.mu0 + k_star.T @ self._alpha
        solved = cho_solve(self._factor, k_star)
        var = self.hyper.theta1 - (k_star * solved).sum(axis=0)
        return mu, np.maximum(var, 0.0)


def gp_fit(data, seed: int = 0, n_starts: int = 8) -> GpHyper:
    """Maximum-marginal-likelihood hyperparameters.

    Deterministic given the seed: one heuristic start plus seeded random
    starts in a bounded log-parameter box, each refined by L-BFGS-B with
    finite-difference gradients; the best final likelihood wins.  Constant
    targets cannot constrain the kernel and return a flagged default.
    """
    x, y = _as_xy(data)
    if len(np.unique(x)) < 2:
        raise ValueError("need at least two distinct x values")
    span = float(x.max() - x.min())
    sd = float(y.std())
    if sd == 0.0:
        return GpHyper(theta1=1e-12, theta2=span / 10.0, xi=1e-6, degenerate=True)

    dx = np.diff(np.sort(np.unique(x)))
    min_dx = float(dx.min())
    lo = np.log([1e-4 * sd**2, max(0.1 * min_dx, 1e-12), 1e-3 * sd])
    hi = np.log([1e3 * sd**2, 10.0 * span, 10.0 * sd])
    bounds = list(zip(lo, hi))

    def objective(z):
        return -_log_marginal(x, y, *np.exp(z))

    starts = [np.log([sd**2, span / 10.0, 0.5 * sd])]
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    for _ in range(n_starts - 1):
        starts.append(lo + rng.random(3) * (hi - lo))

    best_z, best_val = None, np.inf
    for z0 in starts:
        z0 = np.clip(z0, lo, hi)
        res = minimize(objective, z0, method="L-BFGS-B", bounds=bounds)
        if res.fun < best_val:
            best_val, best_z = res.fun, res.x
    if best_z is None or not np.isfinite(best_val):
        return GpHyper(theta1=1e-12, theta2=span / 10.0, xi=max(sd, 1e-6), degenerate=True)
    t1, t2, xi = np.exp(best_z)
    return GpHyper(theta1=float(t1), theta2=float(t2), xi=float(xi))


def gp_posterior(data, hyper: GpHyper, x):
    """Posterior mean and variance at x for the given training data."""
    return GpPosterior(data, hyper).predict(x)


def gp_select(variances, n: int) -> list[int]:
    """Indices of the n largest posterior variances, descending.

    Ties resolve toward the smaller index (hence smaller x on an ascending
    grid); a point is selected at most once.
    """
    variances = np.asarray(variances, dtype=float)
    if n > len(variances):
        raise ValueError(f"cannot select {n} of {len(variances)} points")
    order = np.argsort(-variances, kind="stable")
    return [int(i) for i in order[:n]]
