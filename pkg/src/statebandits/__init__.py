"""Simulation and verification tools for state-dependent bandit problems.

The package covers three kinds of study: regret-minimizing play with an
optimism index, fixed-budget best-arm identification with uniform or
elimination allocation, and closed-form performance guarantees evaluated
against Monte Carlo estimates. A budgeted multi-stage screening pipeline
applies the same machinery to a triage setting with per-evaluation costs.
"""

from .divergence import BOUNDED_UNIT, PsiFamily, psi, psi_star, psi_star_inv
from .env import (
    Environment,
    EnvironmentSpec,
    GapReport,
    gaps,
    instantiate,
    load_environment,
    make_state_sequence,
    pull,
    save_environment,
    sigma_count,
    state_counts,
)
from .errors import (
    ConfigurationError,
    ParseError,
    RecommendationError,
    ReferentialError,
    ScheduleError,
    ValidationError,
)
from .bounds import (
    BoundReport,
    normal_cdf,
    sr_counts,
    thm1_bound,
    thm2_bounds,
    thm3_bounds,
    thm4_bounds,
    write_bound_reports,
)
from .montecarlo import (
    BAIEstimate,
    RegretCurve,
    SweepConfig,
    estimate_bai,
    estimate_pseudoregret,
    random_env,
    sr_compare,
    tightness_sweep,
    write_sr_csv,
    write_sweep_csv,
)
from .rng import substream
from .strategies import (
    PullStats,
    SRResult,
    SRSchedule,
    eba_recommend,
    log_bar,
    run_sb_ucb,
    run_uniform_eba,
    sb_ucb_select,
    sr_schedule,
    successive_rejects,
    uniform_select,
    write_trace_csv,
)
from .triage import (
    BASELINES,
    ENCODINGS,
    STAGE_COSTS_MILLI,
    STAGE_GAINS,
    BaselineResult,
    Counts,
    Individual,
    Metrics,
    PipelineResult,
    Population,
    RiskLabel,
    StageOutcome,
    StageSpec,
    allocation_budgets,
    default_stages,
    dollars,
    encode_risk,
    load_evaluations,
    metrics,
    parse_label,
    run_baseline,
    run_pipeline,
    synth_population,
)

__version__ = "0.1.0"

__all__ = [
    "BOUNDED_UNIT",
    "PsiFamily",
    "psi",
    "psi_star",
    "psi_star_inv",
    "Environment",
    "EnvironmentSpec",
    "GapReport",
    "gaps",
    "instantiate",
    "load_environment",
    "make_state_sequence",
    "pull",
    "save_environment",
    "sigma_count",
    "state_counts",
    "ConfigurationError",
    "ParseError",
    "RecommendationError",
    "ReferentialError",
    "ScheduleError",
    "ValidationError",
    "BoundReport",
    "normal_cdf",
    "sr_counts",
    "thm1_bound",
    "thm2_bounds",
    "thm3_bounds",
    "thm4_bounds",
    "write_bound_reports",
    "BAIEstimate",
    "RegretCurve",
    "SweepConfig",
    "estimate_bai",
    "estimate_pseudoregret",
    "random_env",
    "sr_compare",
    "tightness_sweep",
    "write_sr_csv",
    "write_sweep_csv",
    "substream",
    "PullStats",
    "SRResult",
    "SRSchedule",
    "eba_recommend",
    "log_bar",
    "run_sb_ucb",
    "run_uniform_eba",
    "sb_ucb_select",
    "sr_schedule",
    "successive_rejects",
    "uniform_select",
    "write_trace_csv",
    "BASELINES",
    "ENCODINGS",
    "STAGE_COSTS_MILLI",
    "STAGE_GAINS",
    "BaselineResult",
    "Counts",
    "Individual",
    "Metrics",
    "PipelineResult",
    "Population",
    "RiskLabel",
    "StageOutcome",
    "StageSpec",
    "allocation_budgets",
    "default_stages",
    "dollars",
    "encode_risk",
    "load_evaluations",
    "metrics",
    "parse_label",
    "run_baseline",
    "run_pipeline",
    "synth_population",
]
