"""Event-triggered learning for networked state estimation.

Simulates linear plants whose state is transmitted only when the receiver's
prediction drifts too far, watches the resulting inter-communication times,
and fires statistically safeguarded triggers when they contradict what the
model predicts, prompting relearning.
"""

from .linsys import (
    ContinuousLinearModel,
    DiscreteLinearModel,
    Trajectory,
    discretize,
    model_from_dict,
    step_discrete,
    step_euler_maruyama,
)
from .etse import (
    CommunicationLog,
    EtseState,
    TriggerConfig,
    collect_gaps,
    intercomm_times,
    run_etse,
    state_trigger,
)
from .stopping import (
    EmpiricalCdf,
    StoppingSample,
    empirical_cdf,
    empirical_mean,
    sample_stopping_times,
    sample_stopping_times_continuous,
)
from .triggers import (
    TriggerBuffer,
    TriggerVerdict,
    approx_mean_trigger,
    exact_cdf_trigger,
    exact_mean_trigger,
    kappa_approx_mean,
    kappa_exact_cdf,
    kappa_exact_mean,
    kappa_ks,
    ks_statistic,
    ks_trigger,
)
from .kalman import (
    DareConvergenceError,
    OutputModel,
    SteadyStateFilter,
    collect_gaps_kf,
    innovation_error_model,
    kf_step,
    run_etse_kf,
    sample_stopping_times_kf,
    solve_dare,
)
from .sysid import (
    IdentificationError,
    LearningDataset,
    RankDeficientDataError,
    UnstableEstimateError,
    identify_discrete,
    learning_episode,
)
from .harness import (
    ConfigError,
    EventStream,
    ExperimentConfig,
    reproduce,
    run_experiment,
    sample_tau_summary,
    scenario_config,
)

__version__ = "0.1.0"

__all__ = [
    "ContinuousLinearModel",
    "DiscreteLinearModel",
    "Trajectory",
    "discretize",
    "model_from_dict",
    "step_discrete",
    "step_euler_maruyama",
    "CommunicationLog",
    "EtseState",
    "TriggerConfig",
    "collect_gaps",
    "intercomm_times",
    "run_etse",
    "state_trigger",
    "EmpiricalCdf",
    "StoppingSample",
    "empirical_cdf",
    "empirical_mean",
    "sample_stopping_times",
    "sample_stopping_times_continuous",
    "TriggerBuffer",
    "TriggerVerdict",
    "approx_mean_trigger",
    "exact_cdf_trigger",
    "exact_mean_trigger",
    "kappa_approx_mean",
    "kappa_exact_cdf",
    "kappa_exact_mean",
    "kappa_ks",
    "ks_statistic",
    "ks_trigger",
    "DareConvergenceError",
    "OutputModel",
    "SteadyStateFilter",
    "collect_gaps_kf",
    "innovation_error_model",
    "kf_step",
    "run_etse_kf",
    "sample_stopping_times_kf",
    "solve_dare",
    "IdentificationError",
    "LearningDataset",
    "RankDeficientDataError",
    "UnstableEstimateError",
    "identify_discrete",
    "learning_episode",
    "ConfigError",
    "EventStream",
    "ExperimentConfig",
    "reproduce",
    "run_experiment",
    "sample_tau_summary",
    "scenario_config",
    "__version__",
]
