"""Quantitative evaluation of finished campaigns.

The accuracy metric for a scalar parameter is the credible-interval
deviation W: the larger of the distances from the true value to the 2.5%
and 97.5% posterior quantiles.  Peak widths are scored in the sampled
coordinate u = 1/sigma^2.  Model-selection quality is the posterior
probability table over a fixed evaluation model set, recomputed from the
final dataset with a dedicated sampler pass per model so that every
strategy is judged on identical footing.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .campaign import CampaignHistory, build_model
from .peaks import canonicalize_peak_draws
from .remc import log_evidence, model_posterior, run_remc
from .rng import subseed

__all__ = [
    "ci_deviation",
    "sigma_ci_deviation",
    "RunMetrics",
    "evaluate_history",
    "summarize_trials",
    "TrialSummary",
    "boxplot_stats",
]

_MIN_DRAWS = 100


def ci_deviation(samples, truth: float) -> float:
    """Max deviation of the 2.5%/97.5% posterior quantiles from truth.

    Empirical quantiles with linear interpolation; by monotonicity this
    equals the maximum deviation over every quantile in [0.025, 0.975].
    """
    draws = np.asarray(samples, dtype=float)
    if draws.ndim != 1 or draws.size < _MIN_DRAWS:
        raise ValueError(f"need at least {_MIN_DRAWS} scalar draws, got {draws.size}")
    lo, hi = np.quantile(draws, [0.025, 0.975])
    return float(max(abs(truth - lo), abs(truth - hi)))


def sigma_ci_deviation(sigma_samples, sigma_truth: float) -> float:
    """W for a width parameter, computed in the u = 1/sigma^2 coordinate."""
    draws = np.asarray(sigma_samples, dtype=float)
    if np.any(draws <= 0):
        raise ValueError("width draws must be > 0")
    return ci_deviation(1.0 / draws**2, 1.0 / sigma_truth**2)


@dataclass(frozen=True)
class RunMetrics:
    """Per-run evaluation: W per parameter plus the model probability row."""

    w: dict[str, float]
    model_posterior: dict[str, float]
    log_evidences: dict[str, float]
    best_model: str
    t_sum: float
    seed: int

    def to_json(self) -> dict:
        return {
            "w": dict(self.w),
            "model_posterior": dict(self.model_posterior),
            "log_evidences": dict(self.log_evidences),
            "best_model": self.best_model,
            "t_sum": self.t_sum,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj) -> "RunMetrics":
        return cls(
            w=dict(obj["w"]),
            model_posterior=dict(obj["model_posterior"]),
            log_evidences=dict(obj["log_evidences"]),
            best_model=obj["best_model"],
            t_sum=obj["t_sum"],
            seed=obj["seed"],
        )


def evaluate_history(history: CampaignHistory) -> RunMetrics:
    """Re-fit the evaluation model set on the final dataset and score it.

    Intermediate rounds need not have visited every evaluation model, so a
    dedicated sampler pass runs per model (seeded from the campaign seed).
    W indices are computed under the true model's posterior, with peak
    draws canonicalized by ascending center first.
    """
    config = history.config
    eval_ids = list(config.eval_models)
    true_id = config.truth.model_id()
    if true_id not in eval_ids:
        raise ValueError(f"true model {true_id} not in evaluation set {eval_ids}")
    evidences = {}
    samples_by_id = {}
    for mid in eval_ids:
        model = build_model(config.truth.kind, mid)
        cfg = replace(config.sampler, seed=subseed(config.seed, "eval", mid))
        samples = run_remc(model, history.dataset, cfg)
        samples_by_id[mid] = (model, samples)
        evidences[mid] = log_evidence(samples, cfg.ladder)
    posterior = model_posterior(
        evidences, {mid: 1.0 / len(eval_ids) for mid in eval_ids}
    )

    model, samples = samples_by_id[true_id]
    draws = samples.theta_draws
    if config.truth.kind == "peaks":
        draws = canonicalize_peak_draws(draws, config.truth.peak_params.n_peaks)
    truth_values = config.truth.true_values()
    w = {}
    for j, name in enumerate(model.param_names):
        w[name] = ci_deviation(draws[:, j], truth_values[name])
    return RunMetrics(
        w=w,
        model_posterior=posterior.posterior,
        log_evidences=evidences,
        best_model=posterior.best(),
        t_sum=history.t_sum,
        seed=config.seed,
    )


def boxplot_stats(values) -> dict[str, float]:
    """Median, quartiles and 1.5 IQR whiskers, as plain numbers."""
    v = np.sort(np.asarray(values, dtype=float))
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_limit, hi_limit = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_limit) & (v <= hi_limit)]
    return {
        "median": float(med),
        "q1": float(q1),
        "q3": float(q3),
        "whisker_lo": float(inside[0]) if inside.size else float(q1),
        "whisker_hi": float(inside[-1]) if inside.size else float(q3),
    }


@dataclass(frozen=True)
class TrialSummary:
    """Multi-trial tables: W distributions and model probability rows."""

    w_values: dict[str, list[float]]
    w_stats: dict[str, dict[str, float]]
    model_probs: list[dict[str, float]]
    argmax_counts: dict[str, int]

    def to_json(self) -> dict:
        return {
            "w_values": {k: list(v) for k, v in self.w_values.items()},
            "w_stats": {k: dict(v) for k, v in self.w_stats.items()},
            "model_probs": [dict(row) for row in self.model_probs],
            "argmax_counts": dict(self.argmax_counts),
        }


def summarize_metrics(metrics: list[RunMetrics]) -> TrialSummary:
    """Aggregate already-evaluated runs into trial tables."""
    if not metrics:
        raise ValueError("no runs to summarize")
    names = list(metrics[0].w)
    model_ids = sorted(metrics[0].model_posterior)
    for m in metrics:
        if list(m.w) != names or sorted(m.model_posterior) != model_ids:
            raise ValueError("runs have mismatched parameter or model sets")
    w_values = {name: [m.w[name] for m in metrics] for name in names}
    counts = dict.fromkeys(model_ids, 0)
    for m in metrics:
        counts[m.best_model] += 1
    return TrialSummary(
        w_values=w_values,
        w_stats={name: boxplot_stats(vals) for name, vals in w_values.items()},
        model_probs=[dict(m.model_posterior) for m in metrics],
        argmax_counts=counts,
    )


def summarize_trials(histories: list[CampaignHistory]) -> TrialSummary:
    """Evaluate each campaign and aggregate into trial tables.

    All histories must share the problem schema (truth, grid and
    evaluation model set).
    """
    if not histories:
        raise ValueError("no histories to summarize")
    ref = histories[0].config
    for h in histories[1:]:
        c = h.config
        if (
            c.truth.to_json() != ref.truth.to_json()
            or c.grid != ref.grid
            or tuple(c.eval_models) != tuple(ref.eval_models)
        ):
            raise ValueError("histories have mismatched configurations")
    return summarize_metrics([evaluate_history(h) for h in histories])
