"""Robust optimal transport toolkit.

Trimmed-cost transport distances between discrete measures, concentration
thresholds and data-driven trimming-level selection, minimum-distance
location estimation against simulated models, and two outlier-aware
applications (screened regression, domain adaptation).
"""

__version__ = "0.1.0"

from .concentration import (
    ConcentrationInputs,
    MeanRateInputs,
    geometric_median,
    mean_rate_bound,
    sandwich_bounds,
    sigma_hat,
    threshold_clean,
    threshold_contaminated,
)
from .errors import AlgorithmFailureError, InvalidArgumentError, SolverFailureError
from .estimators import EstimationConfig, EstimateResult, fit_merwe, fit_mewe, merwe_objective
from .lambda_select import (
    LambdaSelectionReport,
    absolute_slopes,
    q_ratio,
    select_lambda,
    select_lambda_for_sample,
)
from .measure import (
    DiscreteMeasure,
    GroundMetric,
    TrimmedCostMatrix,
    build_cost_matrix,
    load_measure_csv,
    save_measure_csv,
    trimmed_cost,
)
from .robot import (
    RobotSolution,
    merged_potential,
    recover_tv_modification,
    robot_distance,
    robot_value,
    sensitivity_curve,
    verify_dual,
)
from .sampling import (
    ContaminationSpec,
    GenerativeModelSpec,
    child_rng,
    contaminate,
    derive_seed,
    sample_alpha_stable,
    sample_lognormal_sum,
)
from .solver import DualPotentials, TransportPlan, solve_exact, solve_plan, solve_value, w1_distance

__all__ = [
    "AlgorithmFailureError",
    "ConcentrationInputs",
    "ContaminationSpec",
    "DiscreteMeasure",
    "DualPotentials",
    "EstimateResult",
    "EstimationConfig",
    "GenerativeModelSpec",
    "GroundMetric",
    "InvalidArgumentError",
    "LambdaSelectionReport",
    "MeanRateInputs",
    "RobotSolution",
    "SolverFailureError",
    "TransportPlan",
    "TrimmedCostMatrix",
    "absolute_slopes",
    "build_cost_matrix",
    "child_rng",
    "contaminate",
    "derive_seed",
    "fit_merwe",
    "fit_mewe",
    "geometric_median",
    "load_measure_csv",
    "mean_rate_bound",
    "merged_potential",
    "merwe_objective",
    "q_ratio",
    "recover_tv_modification",
    "robot_distance",
    "robot_value",
    "sample_alpha_stable",
    "sample_lognormal_sum",
    "sandwich_bounds",
    "save_measure_csv",
    "select_lambda",
    "select_lambda_for_sample",
    "sensitivity_curve",
    "sigma_hat",
    "solve_exact",
    "solve_plan",
    "solve_value",
    "threshold_clean",
    "threshold_contaminated",
    "trimmed_cost",
    "verify_dual",
    "w1_distance",
]
