"""specloop: closed-loop sequential experimental design for spectral measurement.

Bayesian model selection and parameter estimation with a replica-exchange
sampler drive the adaptive allocation of photon-counting measurement time;
a Gaussian-process baseline and uniform-exposure static runs provide the
comparison points.
"""

__version__ = "0.1.0"

from .acquisition import AcquisitionScores, poisson_kl, select_points, uncertainty_scores
from .anderson import (
    HamiltonianParams,
    SpectrumLines,
    build_hamiltonians,
    eig_sym,
    eval_hamiltonian_spectrum,
    make_hamiltonian_model,
    spectrum_lines,
)
from .campaign import (
    CampaignConfig,
    CampaignError,
    CampaignHistory,
    CandidatePolicy,
    GridSpec,
    StrategySpec,
    TruthSpec,
    run_sequential,
    run_static,
    simulate_measurement,
    update_candidate_set,
)
from .evalmetrics import (
    RunMetrics,
    TrialSummary,
    ci_deviation,
    evaluate_history,
    sigma_ci_deviation,
    summarize_trials,
)
from .gp import GpHyper, GpPosterior, gp_fit, gp_posterior, gp_select, kernel
from .peaks import PeakParams, eval_peaks, make_peak_model
from .presets import PRESET_NAMES, preset_config
from .probmodel import (
    AggregatedPoint,
    Dataset,
    MeasurementRecord,
    ModelSpec,
    PriorDescriptor,
    aggregate,
    log_likelihood,
    log_poisson_pmf,
    log_prior,
    sample_prior,
)
from .remc import (
    ModelPosterior,
    PosteriorSamples,
    ReplicaLadder,
    SamplerConfig,
    beta_ladder,
    default_sampler_config,
    exchange_sweep,
    log_evidence,
    map_estimate,
    mh_sweep,
    model_posterior,
    run_remc,
)
