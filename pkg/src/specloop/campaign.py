"""The closed experimental loop: simulate, infer, score, select, repeat.

A campaign first measures every grid point once, then runs k rounds of:
fit every candidate model with the replica-exchange sampler, rank models
by evidence, score candidate points by posterior-expected KL for the best
and second-best models, measure the n highest-scoring points, and (for
the deconvolution task) slide the candidate peak counts around the
current best.  Static runs spend the whole budget uniformly instead; the
GP strategy swaps the parametric scoring for posterior-variance
selection but keeps the same loop and history schema.

Each round's selected points are issued to the measurement oracle in
ascending x (the instrument sweeps energy upward); this ordering has no
statistical effect because the oracle stream is consumed per point.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from . import anderson, peaks
from .acquisition import AcquisitionScores, select_points, uncertainty_scores
from .gp import GpPosterior, gp_fit, gp_select
from .probmodel import Dataset, MeasurementRecord, ModelSpec, aggregate
from .remc import (
    ModelPosterior,
    SamplerConfig,
    log_evidence,
    map_estimate,
    model_posterior,
    run_remc,
)
from .rng import subseed, substream

__all__ = [
    "GridSpec",
    "TruthSpec",
    "CandidatePolicy",
    "StrategySpec",
    "CampaignConfig",
    "RoundRecord",
    "CampaignHistory",
    "CampaignError",
    "simulate_measurement",
    "update_candidate_set",
    "build_model",
    "run_sequential",
    "run_static",
]


class CampaignError(RuntimeError):
    """Raised when a round fails; carries the partial history."""

    def __init__(self, message, history):
        super().__init__(message)
        self.history = history


@dataclass(frozen=True)
class GridSpec:
    """Equally spaced candidate measurement points."""

    start: float
    step: float
    count: int

    def __post_init__(self):
        if self.count < 2:
            raise ValueError("grid needs at least two points")
        if self.step <= 0:
            raise ValueError("grid step must be > 0")

    def points(self) -> np.ndarray:
        return self.start + self.step * np.arange(self.count)

    def to_json(self) -> dict:
        return {"start": self.start, "step": self.step, "count": self.count}

    @classmethod
    def from_json(cls, obj) -> "GridSpec":
        return cls(start=obj["start"], step=obj["step"], count=obj["count"])


@dataclass(frozen=True)
class TruthSpec:
    """Ground-truth generative model used by the measurement oracle."""

    kind: str  # "peaks" or "hamiltonian"
    peak_params: peaks.PeakParams | None = None
    ham_params: anderson.HamiltonianParams | None = None

    def __post_init__(self):
        if self.kind == "peaks":
            if self.peak_params is None:
                raise ValueError("peaks truth needs peak_params")
        elif self.kind == "hamiltonian":
            if self.ham_params is None:
                raise ValueError("hamiltonian truth needs ham_params")
        else:
            raise ValueError(f"unknown truth kind {self.kind!r}")

    def rate(self, x):
        if self.kind == "peaks":
            return peaks.eval_peaks(self.peak_params, x)
        return anderson.eval_hamiltonian_spectrum(self.ham_params, x)

    def model_id(self) -> str:
        if self.kind == "peaks":
            return f"M{self.peak_params.n_peaks}"
        return "M2" if self.ham_params.which == "h2" else "M3"

    def true_values(self) -> dict[str, float]:
        """Truth in sampler coordinates, keyed by model parameter name."""
        if self.kind == "peaks":
            p = self.peak_params
            out = {}
            for i in range(p.n_peaks):
                out[f"a{i+1}"] = p.a[i]
                out[f"mu{i+1}"] = p.mu[i]
                out[f"u{i+1}"] = 1.0 / p.sigma[i] ** 2
            out["B"] = p.background
            return out
        h = self.ham_params
        out = {"delta": h.delta, "v": h.v, "gamma": h.gamma, "u_fc": h.u_fc,
               "b": h.shift}
        if h.which == "h3":
            out["u_ff"] = h.u_ff
        return out

    def to_json(self) -> dict:
        if self.kind == "peaks":
            p = self.peak_params
            return {
                "kind": "peaks",
                "a": list(p.a),
                "mu": list(p.mu),
                "sigma": list(p.sigma),
                "background": p.background,
            }
        h = self.ham_params
        out = {
            "kind": "hamiltonian",
            "which": h.which,
            "delta": h.delta,
            "v": h.v,
            "u_fc": h.u_fc,
            "gamma": h.gamma,
            "shift": h.shift,
        }
        if h.u_ff is not None:
            out["u_ff"] = h.u_ff
        return out

    @classmethod
    def from_json(cls, obj) -> "TruthSpec":
        if obj["kind"] == "peaks":
            return cls(
                kind="peaks",
                peak_params=peaks.PeakParams(
                    a=tuple(obj["a"]),
                    mu=tuple(obj["mu"]),
                    sigma=tuple(obj["sigma"]),
                    background=obj["background"],
                ),
            )
        return cls(
            kind="hamiltonian",
            ham_params=anderson.HamiltonianParams(
                which=obj["which"],
                delta=obj["delta"],
                v=obj["v"],
                u_fc=obj["u_fc"],
                gamma=obj["gamma"],
                shift=obj.get("shift", 0.0),
                u_ff=obj.get("u_ff"),
            ),
        )


@dataclass(frozen=True)
class CandidatePolicy:
    """How the candidate model set evolves between rounds."""

    kind: str  # "peaks_sliding", "fixed_pair" or "single_model"
    model: str | None = None  # for single_model

    def __post_init__(self):
        if self.kind not in ("peaks_sliding", "fixed_pair", "single_model"):
            raise ValueError(f"unknown candidate policy {self.kind!r}")
        if self.kind == "single_model" and not self.model:
            raise ValueError("single_model policy needs a model id")

    def initial(self) -> list[str]:
        if self.kind == "peaks_sliding":
            return ["M1", "M2"]
        if self.kind == "fixed_pair":
            return ["M2", "M3"]
        return [self.model]

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.model:
            out["model"] = self.model
        return out

    @classmethod
    def from_json(cls, obj) -> "CandidatePolicy":
        return cls(kind=obj["kind"], model=obj.get("model"))


@dataclass(frozen=True)
class StrategySpec:
    """Measurement allocation strategy."""

    kind: str  # "parametric", "gp" or "static"
    t_static: float | None = None

    def __post_init__(self):
        if self.kind not in ("parametric", "gp", "static"):
            raise ValueError(f"unknown strategy {self.kind!r}")
        if self.kind == "static" and not (self.t_static and self.t_static > 0):
            raise ValueError("static strategy needs t_static > 0")

    def to_json(self) -> dict:
        out = {"kind": self.kind}
        if self.t_static is not None:
            out["t_static"] = self.t_static
        return out

    @classmethod
    def from_json(cls, obj) -> "StrategySpec":
        return cls(kind=obj["kind"], t_static=obj.get("t_static"))


@dataclass(frozen=True)
class CampaignConfig:
    grid: GridSpec
    t_unit: float
    points_per_round: int
    rounds: int
    truth: TruthSpec
    candidate_policy: CandidatePolicy
    strategy: StrategySpec
    sampler: SamplerConfig
    eval_models: tuple[str, ...]
    seed: int

    def __post_init__(self):
        if self.points_per_round % 2 != 0 or self.points_per_round <= 0:
            raise ValueError("points per round must be a positive even count")
        if self.rounds < 0:
            raise ValueError("rounds must be >= 0")
        if self.t_unit <= 0:
            raise ValueError("t_unit must be > 0")

    @property
    def t_sum(self) -> float:
        """Total measurement budget implied by the configuration."""
        n = self.grid.count
        if self.strategy.kind == "static":
            return n * self.strategy.t_static
        return n * self.t_unit + self.points_per_round * self.rounds * self.t_unit

    def to_json(self) -> dict:
        return {
            "grid": self.grid.to_json(),
            "t_unit": self.t_unit,
            "points_per_round": self.points_per_round,
            "rounds": self.rounds,
            "truth": self.truth.to_json(),
            "candidate_policy": self.candidate_policy.to_json(),
            "strategy": self.strategy.to_json(),
            "sampler": self.sampler.to_json(),
            "eval_models": list(self.eval_models),
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj) -> "CampaignConfig":
        return cls(
            grid=GridSpec.from_json(obj["grid"]),
            t_unit=obj["t_unit"],
            points_per_round=obj["points_per_round"],
            rounds=obj["rounds"],
            truth=TruthSpec.from_json(obj["truth"]),
            candidate_policy=CandidatePolicy.from_json(obj["candidate_policy"]),
            strategy=StrategySpec.from_json(obj["strategy"]),
            sampler=SamplerConfig.from_json(obj["sampler"]),
            eval_models=tuple(obj["eval_models"]),
            seed=obj["seed"],
        )


@dataclass
class RoundRecord:
    index: int
    candidate_ids: tuple[str, ...]
    selected_x: list[float]
    log_evidences: dict[str, float]
    posterior: dict[str, float]
    best_model: str
    second_model: str
    map_theta: list[float]
    acquisition: AcquisitionScores | None = None


@dataclass
class CampaignHistory:
    config: CampaignConfig
    rounds: list[RoundRecord] = field(default_factory=list)
    dataset: Dataset = field(default_factory=Dataset)
    t_sum: float = 0.0


def simulate_measurement(truth: TruthSpec, x: float, exposure: float, rng) -> int:
    """Poisson photon count at x for the given exposure."""
    if exposure <= 0:
        raise ValueError("exposure must be > 0")
    return int(rng.poisson(truth.rate(float(x)) * exposure))


def update_candidate_set(k_hat: int) -> list[int]:
    """Peak counts to consider next, centered on the current best."""
    if k_hat < 1:
        raise ValueError("peak count must be >= 1")
    if k_hat == 1:
        return [1, 2]
    return [k_hat - 1, k_hat, k_hat + 1]


def build_model(kind: str, model_id: str) -> ModelSpec:
    """Materialize a candidate model of the campaign's family by id."""
    if not model_id.startswith("M"):
        raise ValueError(f"unknown model id {model_id!r}")
    n = int(model_id[1:])
    if kind == "peaks":
        return peaks.make_peak_model(n)
    if kind == "hamiltonian":
        if n == 2:
            return anderson.make_hamiltonian_model("h2")
        if n == 3:
            return anderson.make_hamiltonian_model("h3")
        raise ValueError(f"no hamiltonian model {model_id!r}")
    raise ValueError(f"unknown model family {kind!r}")


def _measure_points(config, xs, exposure, rng, dataset):
    """Measure the given points in ascending x and append the records."""
    out = []
    for x in sorted(float(v) for v in xs):
        y = simulate_measurement(config.truth, x, exposure, rng)
        rec = MeasurementRecord(x=x, y=y, exposure=exposure)
        dataset.append(rec)
        out.append(x)
    return out


def _fit_candidates(config, candidate_ids, dataset, round_index):
    """Run the sampler for every candidate model; returns fits and posterior."""
    fits = {}
    evidences = {}
    for mid in candidate_ids:
        model = build_model(config.truth.kind, mid)
        cfg = replace(
            config.sampler, seed=subseed(config.seed, "remc", round_index, mid)
        )
        samples = run_remc(model, dataset, cfg)
        fits[mid] = (model, samples)
        evidences[mid] = log_evidence(samples, cfg.ladder)
    prior = {mid: 1.0 / len(candidate_ids) for mid in candidate_ids}
    return fits, model_posterior(evidences, prior)


def _parametric_round(config, candidate_ids, dataset, grid, round_index):
    fits, posterior = _fit_candidates(config, candidate_ids, dataset, round_index)
    best = posterior.best()
    second = best if len(candidate_ids) == 1 else posterior.second()
    best_model, best_samples = fits[best]
    map_theta = map_estimate(best_samples, best_model, dataset)
    f_hat = best_model.forward(grid, map_theta)
    g_best = uncertainty_scores(best_samples, f_hat, best_model, grid)
    if second == best:
        g_second = g_best.copy()
    else:
        second_model, second_samples = fits[second]
        g_second = uncertainty_scores(second_samples, f_hat, second_model, grid)
    scores = AcquisitionScores(grid=grid, g_best=g_best, g_second=g_second)
    selected = select_points(scores, config.points_per_round)
    return RoundRecord(
        index=round_index,
        candidate_ids=tuple(candidate_ids),
        selected_x=selected,
        log_evidences=posterior.log_evidence,
        posterior=posterior.posterior,
        best_model=best,
        second_model=second,
        map_theta=[float(v) for v in map_theta],
        acquisition=scores,
    )


def _gp_round(config, dataset, grid, round_index):
    agg = aggregate(dataset, grid)
    hyper = gp_fit(agg, seed=subseed(config.seed, "gp", round_index))
    _, variances = GpPosterior(agg, hyper).predict(grid)
    idx = gp_select(variances, config.points_per_round)
    scores = AcquisitionScores(
        grid=grid, g_best=variances, g_second=np.full_like(variances, np.nan)
    )
    return RoundRecord(
        index=round_index,
        candidate_ids=(),
        selected_x=[float(grid[i]) for i in idx],
        log_evidences={},
        posterior={},
        best_model="",
        second_model="",
        map_theta=[],
        acquisition=scores,
    )


def run_sequential(config: CampaignConfig) -> CampaignHistory:
    """Initial full sweep, then k adaptive rounds (parametric or GP)."""
    if config.strategy.kind not in ("parametric", "gp"):
        raise ValueError("run_sequential needs a parametric or gp strategy")
    grid = config.grid.points()
    oracle = substream(config.seed, "oracle")
    history = CampaignHistory(config=config)
    _measure_points(config, grid, config.t_unit, oracle, history.dataset)
    candidate_ids = config.candidate_policy.initial()
    for i in range(1, config.rounds + 1):
        try:
            if config.strategy.kind == "gp":
                record = _gp_round(config, history.dataset, grid, i)
            else:
                record = _parametric_round(config, candidate_ids, history.dataset, grid, i)
        except Exception as exc:
            history.t_sum = history.dataset.total_exposure()
            raise CampaignError(f"round {i} failed: {exc}", history) from exc
        record.selected_x = _measure_points(
            config, record.selected_x, config.t_unit, oracle, history.dataset
        )
        if (
            config.strategy.kind == "parametric"
            and config.candidate_policy.kind == "peaks_sliding"
        ):
            k_hat = int(record.best_model[1:])
            candidate_ids = [f"M{k}" for k in update_candidate_set(k_hat)]
        history.rounds.append(record)
    history.t_sum = history.dataset.total_exposure()
    return history


def run_static(config: CampaignConfig) -> CampaignHistory:
    """Uniform exposure at every grid point, one inference pass at the end."""
    if config.strategy.kind != "static":
        raise ValueError("run_static needs a static strategy")
    grid = config.grid.points()
    oracle = substream(config.seed, "oracle")
    history = CampaignHistory(config=config)
    _measure_points(config, grid, config.strategy.t_static, oracle, history.dataset)
    # A static run has no rounds to slide a candidate set over; its single
    # inference pass covers the configured evaluation models.
    candidate_ids = list(config.eval_models)
    try:
        fits, posterior = _fit_candidates(config, candidate_ids, history.dataset, 0)
    except Exception as exc:
        history.t_sum = history.dataset.total_exposure()
        raise CampaignError(f"static inference failed: {exc}", history) from exc
    best = posterior.best()
    best_model, best_samples = fits[best]
    history.rounds.append(
        RoundRecord(
            index=0,
            candidate_ids=tuple(candidate_ids),
            selected_x=[],
            log_evidences=posterior.log_evidence,
            posterior=posterior.posterior,
            best_model=best,
            second_model=best if len(candidate_ids) == 1 else posterior.second(),
            map_theta=[float(v) for v in map_estimate(best_samples, best_model, history.dataset)],
        )
    )
    history.t_sum = history.dataset.total_exposure()
    return history
