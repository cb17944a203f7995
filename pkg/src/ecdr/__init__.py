"""Treatment-effect estimation for a primary study augmented with external controls.

The package fits high-dimensional nuisance models by L1-penalized convex
calibration, evaluates three estimators of the average effect of treatment on
the treated (primary-only, pooled, and a variance-optimal combination of the
two), and provides influence-function confidence intervals plus a replicated
simulation harness.
"""

from .dataset import (
    ColumnSchema,
    CombinedDataset,
    DataError,
    EmptyDataset,
    ExternalTreated,
    MissingColumn,
    NonBinaryIndicator,
    NonFiniteValue,
    ObservationRow,
    ScalingInfo,
    load_csv,
    standardize,
    unstandardize,
)
from .estimators import (
    DegenerateDenominator,
    EstimateReport,
    EstimatorError,
    InfluenceVectors,
    OverflowGuard,
    estimate_a,
    infer,
    influence_vectors,
    normal_quantile,
    theta_eff,
    theta_nv,
    theta_safe,
)
from .simulation import (
    MetricsTable,
    ModelSpec,
    gen_model1,
    gen_model2,
    generate,
    oracle_theta,
    run_study,
    table_preset,
)
from .solver import (
    CoefficientVector,
    DivergentObjective,
    FitResult,
    FoldInfeasible,
    LINPRED_CAP,
    NuisanceFitError,
    NuisanceFits,
    PenalizedProblem,
    SolverError,
    alpha_eff_problem,
    alpha_nv_problem,
    beta_problem,
    fit_nuisances,
    gamma_problem,
    minimize_l1,
    select_lambda_cv,
    solve_path,
    stratified_folds,
)

__version__ = "0.1.0"
