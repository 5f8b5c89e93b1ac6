"""Aggregate-count hospital-trajectory model with likelihood-free inference.

Patients admitted to the general ward decline or recover through ICU and
ventilation stages with explicit per-segment duration distributions; daily
stage censuses are the only observable. Posteriors over the 17 model
parameters are fit by ABC-MCMC against observed counts, and forecasts,
evaluation metrics, baselines, and what-if interventions build on the same
simulator.
"""

from .backends import active_backend, use
from .baselines import (
    LrFeatureMode,
    bayes_lr_fit,
    bayes_lr_forecast,
    bayes_lr_predictive_mean,
    build_features,
    median_forecast,
)
from .dataio import (
    ConfigError,
    DataError,
    Dataset,
    RunConfig,
    load_counts_csv,
    parse_config,
    read_samples_csv,
    smooth_counts,
    smooth_dataset,
    write_samples_csv,
)
from .forecast import (
    DEFAULT_LEVELS,
    ForecastSummary,
    MaeReport,
    coverage,
    forecast_counts,
    mae,
    mae_with_batches,
    summarize_percentiles,
)
from .inference import (
    ChainResult,
    ConvergenceError,
    DistanceWeights,
    EpsilonSchedule,
    SimulationContext,
    distance,
    ensemble,
    run_chain,
    run_chains,
)
from .interventions import (
    AdmissionsSchedule,
    RecoveryDurationPolicy,
    apply_admissions_schedule,
    admissions_schedule_hook,
    recovery_duration_hook,
    stochastic_round,
)
from .model import (
    CensusSeries,
    DurationParams,
    Health,
    ModelParams,
    PARAM_NAMES,
    PatientTrajectory,
    Stage,
    TransitionParams,
    aggregate_counts,
    duration_pmf,
    sample_duration,
    sample_trajectory,
    simulate_census,
)
from .priors import (
    PriorSpec,
    ProposalSpec,
    default_prior_spec,
    default_proposal_spec,
    derive_transition_priors,
    prior_log_density,
    sample_prior,
)
from .synthetic import default_truth_params, synthetic_dataset, wave_admissions

__version__ = "0.1.0"

__all__ = [
    "AdmissionsSchedule",
    "CensusSeries",
    "ChainResult",
    "ConfigError",
    "ConvergenceError",
    "DEFAULT_LEVELS",
    "DataError",
    "Dataset",
    "DistanceWeights",
    "DurationParams",
    "EpsilonSchedule",
    "ForecastSummary",
    "Health",
    "LrFeatureMode",
    "MaeReport",
    "ModelParams",
    "PARAM_NAMES",
    "PatientTrajectory",
    "PriorSpec",
    "ProposalSpec",
    "RecoveryDurationPolicy",
    "RunConfig",
    "SimulationContext",
    "Stage",
    "TransitionParams",
    "active_backend",
    "aggregate_counts",
    "apply_admissions_schedule",
    "admissions_schedule_hook",
    "bayes_lr_fit",
    "bayes_lr_forecast",
    "bayes_lr_predictive_mean",
    "build_features",
    "coverage",
    "default_prior_spec",
    "default_proposal_spec",
    "default_truth_params",
    "derive_transition_priors",
    "distance",
    "duration_pmf",
    "ensemble",
    "forecast_counts",
    "load_counts_csv",
    "mae",
    "mae_with_batches",
    "median_forecast",
    "parse_config",
    "prior_log_density",
    "read_samples_csv",
    "recovery_duration_hook",
    "run_chain",
    "run_chains",
    "sample_duration",
    "sample_prior",
    "sample_trajectory",
    "simulate_census",
    "smooth_counts",
    "smooth_dataset",
    "stochastic_round",
    "summarize_percentiles",
    "synthetic_dataset",
    "use",
    "wave_admissions",
    "write_samples_csv",
]
