"""Differential-privacy composition accounting with generalization bounds,
an exact worst-case oracle, and desk-scale training simulations."""

from .accountants import (
    AccountantReport,
    FedConfig,
    SgldConfig,
    fed_accountant,
    fed_per_step_epsilon,
    free_privacy_threshold,
    loss_tail_threshold,
    sgld_accountant,
    sgld_per_step_epsilon,
)
from .composition import (
    BoundaryAssignment,
    CompositionResult,
    EpsilonBreakdown,
    IterationSpec,
    PrivacyBudget,
    SlackParameter,
    boundary_delta_max,
    compose_baseline,
    compose_delta,
    compose_epsilon,
    compose_homogeneous,
    compose_iterations,
    homogeneous_delta,
    kl_divergence_bound,
    moment_epsilon,
    moment_slack,
)
from .errors import (
    DegenerateBudgetError,
    DivergenceError,
    InvalidArgumentError,
    PreconditionError,
    PrivboundError,
    ResourceLimitError,
)
from .generalization import (
    GeneralizationBound,
    MultiDbBound,
    PacGuarantee,
    baseline_generalization,
    high_probability_bound,
    min_sample_size,
    multi_db_bounds,
    pac_guarantee,
)
from .oracle import (
    AtomicMechanismPair,
    approx_max_divergence,
    exact_composed_delta,
    exact_optimal_epsilon,
    gaussian_loss_tail,
    hockey_stick_product,
    kl_oracle,
    statistical_distance,
    worst_case_pair,
)
from .simulator import (
    GapExperimentResult,
    SyntheticDataset,
    TrainTrace,
    bounded_risk,
    clip_rows,
    clip_to_norm,
    gap_experiment,
    make_synthetic_dataset,
    run_federated,
    run_sgld,
    split_for_clients,
)

__version__ = "0.1.0"
