"""Built-in campaign configurations.

Two full-scale profiles reproduce the reference problem settings (400-point
grids, 160 rounds); the desk-scale profiles shrink the grid, round count
and sampler budget so that complete multi-trial comparisons finish on a
laptop-class machine while keeping the same truth and energy span.
"""

from __future__ import annotations

from .anderson import HamiltonianParams
from .campaign import (
    CampaignConfig,
    CandidatePolicy,
    GridSpec,
    StrategySpec,
    TruthSpec,
)
from .peaks import PeakParams
from .remc import SamplerConfig, beta_ladder

__all__ = [
    "DECONVOLUTION_TRUTH",
    "HAMILTONIAN_TRUTH",
    "PRESET_NAMES",
    "preset_config",
    "preset_description",
    "default_static_exposure",
]

# Three-peak ground truth for the deconvolution task.
DECONVOLUTION_TRUTH = TruthSpec(
    kind="peaks",
    peak_params=PeakParams(
        a=(0.587, 1.522, 1.183),
        mu=(161.032, 161.852, 162.677),
        sigma=(0.341, 0.275, 0.260),
        background=0.1,
    ),
)

# Three-configuration ground truth for the Hamiltonian-selection task;
# the spectrum's absolute position is pinned by a zero energy shift.
HAMILTONIAN_TRUTH = TruthSpec(
    kind="hamiltonian",
    ham_params=HamiltonianParams(
        which="h3", delta=7.66, v=0.76, u_fc=12.7, u_ff=10.5, gamma=0.7, shift=0.0
    ),
)


def _full_sampler() -> SamplerConfig:
    return SamplerConfig(
        ladder=beta_ladder(32, 1e-4),
        sweeps_burnin=10_000,
        sweeps_sample=20_000,
        thin=1,
    )


def _desk_sampler() -> SamplerConfig:
    return SamplerConfig(
        ladder=beta_ladder(12, 1e-3),
        sweeps_burnin=500,
        sweeps_sample=1000,
        thin=1,
    )


_PRESETS = {
    "deconv-sec3": dict(
        grid=GridSpec(start=157.0, step=0.025, count=400),
        t_unit=1.0,
        points_per_round=10,
        rounds=160,
        truth=DECONVOLUTION_TRUTH,
        candidate_policy=CandidatePolicy(kind="peaks_sliding"),
        sampler=_full_sampler,
        eval_models=("M2", "M3", "M4"),
        static_exposure=5.0,
        description="Full-scale three-peak deconvolution (400 points, 160 rounds)",
    ),
    "hamiltonian-sec4": dict(
        grid=GridSpec(start=-30.0, step=0.125, count=400),
        t_unit=6.0,
        points_per_round=10,
        rounds=160,
        truth=HAMILTONIAN_TRUTH,
        candidate_policy=CandidatePolicy(kind="fixed_pair"),
        sampler=_full_sampler,
        eval_models=("M2", "M3"),
        static_exposure=30.0,
        description="Full-scale Hamiltonian selection (400 points, 160 rounds)",
    ),
    "deconv-desk": dict(
        grid=GridSpec(start=157.0, step=0.1, count=100),
        t_unit=1.0,
        points_per_round=10,
        rounds=20,
        truth=DECONVOLUTION_TRUTH,
        candidate_policy=CandidatePolicy(kind="peaks_sliding"),
        sampler=_desk_sampler,
        eval_models=("M2", "M3", "M4"),
        static_exposure=3.0,
        description="Desk-scale deconvolution (100 points, 20 rounds, light sampler)",
    ),
    "hamiltonian-desk": dict(
        grid=GridSpec(start=-30.0, step=0.5, count=100),
        t_unit=6.0,
        points_per_round=10,
        rounds=20,
        truth=HAMILTONIAN_TRUTH,
        candidate_policy=CandidatePolicy(kind="fixed_pair"),
        sampler=_desk_sampler,
        eval_models=("M2", "M3"),
        static_exposure=18.0,
        description="Desk-scale Hamiltonian selection (100 points, 20 rounds)",
    ),
}

PRESET_NAMES = tuple(_PRESETS)


def preset_config(name: str, seed: int = 0) -> CampaignConfig:
    """Instantiate a built-in preset as a parametric sequential config."""
    if name not in _PRESETS:
        raise ValueError(f"unknown preset {name!r}; available: {', '.join(PRESET_NAMES)}")
    p = _PRESETS[name]
    return CampaignConfig(
        grid=p["grid"],
        t_unit=p["t_unit"],
        points_per_round=p["points_per_round"],
        rounds=p["rounds"],
        truth=p["truth"],
        candidate_policy=p["candidate_policy"],
        strategy=StrategySpec(kind="parametric"),
        sampler=p["sampler"](),
        eval_models=p["eval_models"],
        seed=seed,
    )


def preset_description(name: str) -> str:
    return _PRESETS[name]["description"]


def default_static_exposure(name: str) -> float:
    """Per-point exposure giving the preset's canonical static budget."""
    return _PRESETS[name]["static_exposure"]
