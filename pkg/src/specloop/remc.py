"""Replica-exchange Monte Carlo sampling of tempered posteriors.

A ladder of inverse temperatures beta in [0, 1] tempers the likelihood:
replica l targets p(D|theta)^beta_l p(theta).  The base replica (beta = 0)
draws independently from the prior, anchoring the ladder; the top replica
(beta = 1) yields posterior samples.  Adjacent replicas exchange states
with the standard swap rule, and the per-replica likelihood traces feed a
stepping-stone estimate of the log marginal likelihood.

All randomness is derived from the config seed through named per-replica
substreams, so results are bit-reproducible and independent of any
parallel execution schedule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .probmodel import (
    LOG_ZERO,
    Dataset,
    ModelSpec,
    log_likelihood_batch,
    log_prior_batch,
    sample_prior,
)
from .rng import substream

__all__ = [
    "ReplicaLadder",
    "SamplerConfig",
    "AcceptanceStats",
    "PosteriorSamples",
    "ModelPosterior",
    "beta_ladder",
    "default_sampler_config",
    "mh_sweep",
    "exchange_sweep",
    "run_remc",
    "map_estimate",
    "log_evidence",
    "model_posterior",
]

# Sweeps between proposal-width adjustments during burn-in.
_ADAPT_INTERVAL = 50
# Sweeps of random numbers pre-drawn per replica at a time.
_CHUNK = 128


@dataclass(frozen=True)
class ReplicaLadder:
    """Ascending inverse temperatures with endpoints exactly 0 and 1."""

    betas: tuple[float, ...]

    def __post_init__(self):
        b = self.betas
        if len(b) < 2:
            raise ValueError("ladder needs at least two replicas")
        if b[0] != 0.0 or b[-1] != 1.0:
            raise ValueError("ladder endpoints must be exactly 0 and 1")
        if any(b[i] >= b[i + 1] for i in range(len(b) - 1)):
            raise ValueError("ladder must be strictly increasing")

    def __len__(self):
        return len(self.betas)

    def as_array(self) -> np.ndarray:
        return np.asarray(self.betas, dtype=float)


def beta_ladder(count: int, beta_min: float, schedule: str = "geometric") -> ReplicaLadder:
    """Ladder with beta_1 = 0 and beta_2..beta_L geometric up to 1."""
    if schedule != "geometric":
        raise ValueError(f"unknown schedule {schedule!r}")
    if count < 2:
        raise ValueError("count must be >= 2")
    if not 0.0 < beta_min < 1.0:
        raise ValueError("beta_min must lie strictly between 0 and 1")
    if count == 2:
        return ReplicaLadder((0.0, 1.0))
    nonzero = np.geomspace(beta_min, 1.0, count - 1)
    nonzero[-1] = 1.0
    return ReplicaLadder((0.0, *map(float, nonzero)))


@dataclass
class SamplerConfig:
    """Replica-exchange run settings.

    ``step_scales`` are initial per-parameter random-walk widths (derived
    from the priors when omitted); burn-in adaptation retunes them per
    replica toward a 20-50% acceptance rate and freezes the result.
    """

    ladder: ReplicaLadder
    sweeps_burnin: int
    sweeps_sample: int
    thin: int = 1
    step_scales: tuple[float, ...] | None = None
    seed: int = 0
    adapt: bool = True
    init_states: np.ndarray | None = None  # optional warm start, shape (L, dim)

    def __post_init__(self):
        if self.sweeps_burnin <= 0 or self.sweeps_sample <= 0 or self.thin <= 0:
            raise ValueError("sweep counts and thin must be > 0")
        if self.step_scales is not None and any(s <= 0 for s in self.step_scales):
            raise ValueError("step_scales must be > 0")

    def to_json(self) -> dict:
        return {
            "betas": list(self.ladder.betas),
            "sweeps_burnin": self.sweeps_burnin,
            "sweeps_sample": self.sweeps_sample,
            "thin": self.thin,
            "step_scales": None if self.step_scales is None else list(self.step_scales),
            "seed": self.seed,
            "adapt": self.adapt,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "SamplerConfig":
        return cls(
            ladder=ReplicaLadder(tuple(obj["betas"])),
            sweeps_burnin=obj["sweeps_burnin"],
            sweeps_sample=obj["sweeps_sample"],
            thin=obj.get("thin", 1),
            step_scales=None
            if obj.get("step_scales") is None
            else tuple(obj["step_scales"]),
            seed=obj.get("seed", 0),
            adapt=obj.get("adapt", True),
        )


def default_sampler_config(seed: int = 0) -> SamplerConfig:
    """Full-scale defaults: 32 geometric replicas, 1e4 + 2e4 sweeps."""
    return SamplerConfig(
        ladder=beta_ladder(32, 1e-4),
        sweeps_burnin=10_000,
        sweeps_sample=20_000,
        thin=1,
        seed=seed,
    )


@dataclass(frozen=True)
class AcceptanceStats:
    """Per-replica Metropolis and per-pair exchange acceptance rates."""

    metropolis: np.ndarray  # (L,)
    exchange: np.ndarray  # (L-1,)
    warnings: tuple[str, ...] = ()


@dataclass(frozen=True)
class PosteriorSamples:
    """Retained posterior draws plus the traces needed for evidence/MAP."""

    theta_draws: np.ndarray  # (n_retained, dim), beta = 1
    loglike_traces: np.ndarray  # (L, n_retained)
    logprior_trace: np.ndarray  # (n_retained,), beta = 1
    acc_stats: AcceptanceStats
    betas: tuple[float, ...]

    @property
    def n_draws(self) -> int:
        return self.theta_draws.shape[0]


@dataclass(frozen=True)
class ModelPosterior:
    """Per-model evidence, prior mass and normalized posterior probability."""

    log_evidence: dict[str, float]
    prior: dict[str, float]
    posterior: dict[str, float]

    def best(self) -> str:
        return max(self.posterior, key=lambda m: (self.posterior[m], m))

    def second(self) -> str:
        best = self.best()
        rest = {m: p for m, p in self.posterior.items() if m != best}
        if not rest:
            return best
        return max(rest, key=lambda m: (rest[m], m))


def _default_steps(model: ModelSpec) -> np.ndarray:
    return np.array([p.default_step() for p in model.prior], dtype=float)


def mh_sweep(state, beta, model: ModelSpec, data: Dataset, rng, steps=None):
    """One Metropolis sweep of a single replica: one update per coordinate.

    Returns the updated state and per-coordinate acceptance flags.  At
    beta = 0 the replica is resampled exactly from the prior instead.
    """
    state = np.asarray(state, dtype=float).copy()
    if beta == 0.0:
        return sample_prior(model, rng), np.ones(model.dim, dtype=bool)
    steps = _default_steps(model) if steps is None else np.asarray(steps, dtype=float)
    loglike = float(log_likelihood_batch(model, state[None, :], data)[0])
    accepted = np.zeros(model.dim, dtype=bool)
    for j in range(model.dim):
        prop_j = state[j] + steps[j] * rng.standard_normal()
        lp_new = model.prior[j].log_density(prop_j)
        lp_old = model.prior[j].log_density(state[j])
        u = rng.random()
        if lp_new == LOG_ZERO:
            continue
        prop = state.copy()
        prop[j] = prop_j
        ll_new = float(log_likelihood_batch(model, prop[None, :], data)[0])
        if math.log(u) < beta * (ll_new - loglike) + (lp_new - lp_old):
            state[j] = prop_j
            loglike = ll_new
            accepted[j] = True
    return state, accepted


def exchange_sweep(states, loglikes, ladder: ReplicaLadder, rng, parity: int = 0):
    """Propose swaps between adjacent replicas of the given pairing parity.

    Pairs (l, l+1) for l = parity, parity+2, ... swap with probability
    min(1, exp((beta_{l+1} - beta_l) (loglike_l - loglike_{l+1}))).
    Returns updated (states, loglikes, accepted_pair_indices).
    """
    states = np.asarray(states, dtype=float).copy()
    loglikes = np.asarray(loglikes, dtype=float).copy()
    betas = ladder.as_array()
    pairs = np.arange(parity % 2, len(betas) - 1, 2)
    if len(pairs) == 0:
        return states, loglikes, pairs
    delta = (betas[pairs + 1] - betas[pairs]) * (loglikes[pairs] - loglikes[pairs + 1])
    with np.errstate(divide="ignore"):
        do_swap = np.log(rng.random(len(pairs))) < delta
    swap_lo = pairs[do_swap]
    states[swap_lo], states[swap_lo + 1] = (
        states[swap_lo + 1].copy(),
        states[swap_lo].copy(),
    )
    loglikes[swap_lo], loglikes[swap_lo + 1] = (
        loglikes[swap_lo + 1].copy(),
        loglikes[swap_lo].copy(),
    )
    return states, loglikes, swap_lo


def run_remc(model: ModelSpec, data: Dataset, config: SamplerConfig) -> PosteriorSamples:
    """Sample the tempered posterior family and retain beta = 1 draws.

    Burn-in (with optional step adaptation), then ``sweeps_sample`` sweeps
    retained every ``thin``; per-sweep replica updates are vectorized
    across the ladder while consuming per-replica random substreams, so
    the output depends only on (model, data, config).
    """
    betas = config.ladder.as_array()
    n_rep = len(betas)
    dim = model.dim
    rngs = [substream(config.seed, "replica", l) for l in range(n_rep)]
    ex_rng = substream(config.seed, "exchange")

    base = (
        _default_steps(model)
        if config.step_scales is None
        else np.asarray(config.step_scales, dtype=float)
    )
    if base.shape != (dim,):
        raise ValueError(f"step_scales must have length {dim}")
    steps = np.tile(base, (n_rep, 1))

    # Initial states: warm start if provided, else per-replica prior draws
    # (redrawn in the vanishingly rare case of an impossible dataset).
    if config.init_states is not None:
        states = np.array(config.init_states, dtype=float)
        if states.shape != (n_rep, dim):
            raise ValueError(f"init_states must have shape ({n_rep}, {dim})")
    else:
        states = np.stack([sample_prior(model, rngs[l]) for l in range(n_rep)])
    loglike = log_likelihood_batch(model, states, data)
    for l in range(n_rep):
        tries = 0
        while not np.isfinite(loglike[l]) and tries < 100:
            states[l] = sample_prior(model, rngs[l])
            loglike[l] = log_likelihood_batch(model, states[l][None, :], data)[0]
            tries += 1
        if not np.isfinite(loglike[l]):
            raise RuntimeError(f"model {model.id}: could not initialize replica {l}")
    # per-(replica, coordinate) prior log densities, kept current so each
    # Metropolis update evaluates the prior only at the proposal
    lp_coord = np.stack(
        [p.log_density(states[:, j]) for j, p in enumerate(model.prior)], axis=1
    )
    logprior = lp_coord.sum(axis=1)

    n_total = config.sweeps_burnin + config.sweeps_sample
    n_ret = (config.sweeps_sample + config.thin - 1) // config.thin
    theta_draws = np.empty((n_ret, dim))
    ll_traces = np.empty((n_rep, n_ret))
    lp_trace = np.empty(n_ret)

    mh_acc = np.zeros(n_rep)
    mh_tot = np.zeros(n_rep)
    burn_acc = np.zeros(n_rep)
    win_acc = np.zeros((n_rep, dim))
    win_tot = 0
    ex_acc = np.zeros(n_rep - 1)
    ex_tot = np.zeros(n_rep - 1)

    hot = slice(1, None)  # replicas with beta > 0
    beta_hot = betas[1:]
    ret = 0
    sweep = 0
    while sweep < n_total:
        chunk = min(_CHUNK, n_total - sweep)
        noise = np.stack(
            [rngs[l].standard_normal((chunk, dim)) for l in range(1, n_rep)]
        )  # (n_rep-1, chunk, dim)
        with np.errstate(divide="ignore"):
            log_unif = np.log(
                np.stack([rngs[l].random((chunk, dim)) for l in range(1, n_rep)])
            )
        prior_chunk = np.empty((chunk, dim))
        lp0_coord_chunk = np.empty((chunk, dim))
        for j, p in enumerate(model.prior):
            prior_chunk[:, j] = p.sample(rngs[0], size=chunk)
            lp0_coord_chunk[:, j] = p.log_density(prior_chunk[:, j])
        ll0_chunk = log_likelihood_batch(model, prior_chunk, data)
        lp0_chunk = lp0_coord_chunk.sum(axis=1)
        with np.errstate(divide="ignore"):
            log_ex_unif = np.log(ex_rng.random((chunk, max(n_rep - 1, 1))))

        for s in range(chunk):
            # beta = 0 replica: exact, independent prior draw
            states[0] = prior_chunk[s]
            loglike[0] = ll0_chunk[s]
            logprior[0] = lp0_chunk[s]
            lp_coord[0] = lp0_coord_chunk[s]

            # batched single-site Metropolis across the hot replicas
            with np.errstate(divide="ignore", invalid="ignore"):
                for j in range(dim):
                    cur_j = states[hot, j]
                    prop_j = cur_j + steps[hot, j] * noise[:, s, j]
                    lp_new_j = model.prior[j].log_density(prop_j)
                    lp_old_j = lp_coord[hot, j]
                    ok = lp_new_j > LOG_ZERO
                    prop = states[hot].copy()
                    prop[ok, j] = prop_j[ok]
                    ll_new = log_likelihood_batch(model, prop, data)
                    log_acc = beta_hot * (ll_new - loglike[hot]) + (lp_new_j - lp_old_j)
                    accept = ok & (log_unif[:, s, j] < log_acc)
                    states[hot, j] = np.where(accept, prop_j, cur_j)
                    loglike[hot] = np.where(accept, ll_new, loglike[hot])
                    lp_coord[hot, j] = np.where(accept, lp_new_j, lp_old_j)
                    logprior[hot] += np.where(accept, lp_new_j - lp_old_j, 0.0)
                    win_acc[hot, j] += accept
                    if sweep >= config.sweeps_burnin:
                        mh_acc[hot] += accept
                    else:
                        burn_acc[hot] += accept
            if sweep >= config.sweeps_burnin:
                mh_tot[hot] += dim
            win_tot += 1

            # step-size adaptation, burn-in only, frozen afterwards
            if (
                config.adapt
                and sweep < config.sweeps_burnin
                and win_tot >= _ADAPT_INTERVAL
            ):
                rate = win_acc / win_tot
                steps = np.where(rate < 0.2, steps * 0.7, steps)
                steps = np.where(rate > 0.5, steps * 1.4, steps)
                steps = np.clip(steps, base * 1e-6, base * 1e6)
                win_acc[:] = 0.0
                win_tot = 0

            # exchange between adjacent replicas, alternating pairing
            pairs = np.arange(sweep % 2, n_rep - 1, 2)
            if len(pairs):
                delta = (betas[pairs + 1] - betas[pairs]) * (
                    loglike[pairs] - loglike[pairs + 1]
                )
                do_swap = log_ex_unif[s, : len(pairs)] < delta
                lo = pairs[do_swap]
                if len(lo):
                    hi_idx = lo + 1
                    states[lo], states[hi_idx] = states[hi_idx].copy(), states[lo].copy()
                    loglike[lo], loglike[hi_idx] = (
                        loglike[hi_idx].copy(),
                        loglike[lo].copy(),
                    )
                    logprior[lo], logprior[hi_idx] = (
                        logprior[hi_idx].copy(),
                        logprior[lo].copy(),
                    )
                    lp_coord[lo], lp_coord[hi_idx] = (
                        lp_coord[hi_idx].copy(),
                        lp_coord[lo].copy(),
                    )
                ex_tot[pairs] += 1
                ex_acc[lo] += 1

            if sweep >= config.sweeps_burnin:
                offset = sweep - config.sweeps_burnin
                if offset % config.thin == 0:
                    theta_draws[ret] = states[-1]
                    ll_traces[:, ret] = loglike
                    lp_trace[ret] = logprior[-1]
                    ret += 1
            sweep += 1

    warnings = []
    if np.any(burn_acc[1:] == 0):
        stuck = [int(l) for l in range(1, n_rep) if burn_acc[l] == 0]
        warnings.append(f"replicas {stuck} accepted no proposal during burn-in")
    metropolis = np.ones(n_rep)
    metropolis[1:] = mh_acc[1:] / np.maximum(mh_tot[1:], 1)
    exchange = ex_acc / np.maximum(ex_tot, 1)
    return PosteriorSamples(
        theta_draws=theta_draws[:ret],
        loglike_traces=ll_traces[:, :ret],
        logprior_trace=lp_trace[:ret],
        acc_stats=AcceptanceStats(
            metropolis=metropolis, exchange=exchange, warnings=tuple(warnings)
        ),
        betas=tuple(config.ladder.betas),
    )


def map_estimate(samples: PosteriorSamples, model: ModelSpec = None, data: Dataset = None):
    """Best retained beta = 1 draw by posterior density, first on ties."""
    if samples.n_draws == 0:
        raise RuntimeError("no retained draws")
    logpost = samples.loglike_traces[-1] + samples.logprior_trace
    return samples.theta_draws[int(np.argmax(logpost))].copy()


def log_evidence(samples: PosteriorSamples, ladder: ReplicaLadder) -> float:
    """Stepping-stone estimate of the log marginal likelihood.

    log Z = sum_l log E_{beta_l}[ exp((beta_{l+1} - beta_l) loglike) ],
    each expectation over that replica's retained draws, computed with
    max-subtraction.  The beta = 0 replica draws exactly from the prior,
    so the first stone is unbiased importance sampling from the prior.
    """
    betas = ladder.as_array()
    ll = samples.loglike_traces
    if ll.shape[0] != len(betas):
        raise RuntimeError(
            f"traces for {ll.shape[0]} replicas but ladder has {len(betas)}"
        )
    if ll.shape[1] == 0:
        raise RuntimeError("no retained draws")
    total = 0.0
    for l in range(len(betas) - 1):
        a = (betas[l + 1] - betas[l]) * ll[l]
        m = float(np.max(a))
        if not np.isfinite(m):
            return LOG_ZERO
        total += m + math.log(float(np.mean(np.exp(a - m))))
    return total


def model_posterior(evidences: dict[str, float], priors: dict[str, float]) -> ModelPosterior:
    """Normalize p(M|D) proportional to exp(log Z_M) p(M) via log-sum-exp."""
    if not evidences:
        raise ValueError("empty model set")
    if set(evidences) != set(priors):
        raise ValueError("evidences and priors must cover the same models")
    total_prior = sum(priors.values())
    if abs(total_prior - 1.0) > 1e-9:
        raise ValueError(f"model priors must sum to 1, got {total_prior}")
    ids = sorted(evidences)
    score = np.array([evidences[m] + math.log(priors[m]) for m in ids])
    m = np.max(score)
    w = np.exp(score - m)
    w /= w.sum()
    return ModelPosterior(
        log_evidence=dict(evidences),
        prior=dict(priors),
        posterior={mid: float(p) for mid, p in zip(ids, w)},
    )
