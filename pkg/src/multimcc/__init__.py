"""Multiclass Matthews correlation coefficients with asymptotic inference.

Three estimators over an r*r confusion table (macro average, pooled micro
average, indicator correlation), their delta-method variances, single and
paired-design confidence intervals, and a seeded Monte Carlo harness that
checks interval coverage end to end.
"""

from __future__ import annotations

from .errors import (
    DegenerateMarginalError,
    InvalidAlphaError,
    InvalidProbabilitiesError,
    MccError,
    ParseError,
    ValidationError,
    ZeroTotalError,
)
from .metrics import (
    ClasswiseRates,
    ConfusionCounts2,
    MetricKind,
    ProbTable2,
    binary_mcc,
    classwise_rates,
    degenerate_classes,
    estimate,
    macro_mcc,
    micro_mcc,
    micro_mcc_pooled,
    micro_star_mcc,
    normalize_counts,
    per_class_mcc,
)
from .inference import (
    CIMethod,
    Gradient2,
    IntervalEstimate,
    asymptotic_variance,
    fisher_z_ci,
    grad_macro,
    grad_micro,
    grad_micro_star,
    gradient,
    normal_quantile,
    single_inference,
    variance_quadratic,
    wald_ci,
)
from .paired import (
    Gradient3,
    JointCounts3,
    PairedCovBlock,
    PairedResult,
    ProbTable3,
    diff_g_ci,
    diff_variance,
    diff_wald_ci,
    grad_macro_paired,
    grad_micro_paired,
    grad_micro_star_paired,
    marginalize,
    normalize_joint_counts,
    paired_cov_block,
    paired_gradient,
    paired_inference,
)
from .simulate import (
    CoverageResult,
    DegeneracyPolicy,
    Scenario,
    ScenarioKind,
    builtin_scenarios,
    coverage_report,
    run_coverage,
    run_coverage_grid,
    sample_multinomial,
    scenario_by_name,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "MccError",
    "ValidationError",
    "ZeroTotalError",
    "InvalidAlphaError",
    "InvalidProbabilitiesError",
    "DegenerateMarginalError",
    "ParseError",
    "ConfusionCounts2",
    "ProbTable2",
    "ClasswiseRates",
    "MetricKind",
    "normalize_counts",
    "classwise_rates",
    "binary_mcc",
    "per_class_mcc",
    "degenerate_classes",
    "macro_mcc",
    "micro_mcc",
    "micro_mcc_pooled",
    "micro_star_mcc",
    "estimate",
    "CIMethod",
    "Gradient2",
    "IntervalEstimate",
    "normal_quantile",
    "grad_macro",
    "grad_micro",
    "grad_micro_star",
    "gradient",
    "variance_quadratic",
    "asymptotic_variance",
    "wald_ci",
    "fisher_z_ci",
    "single_inference",
    "JointCounts3",
    "ProbTable3",
    "Gradient3",
    "PairedCovBlock",
    "PairedResult",
    "normalize_joint_counts",
    "marginalize",
    "grad_macro_paired",
    "grad_micro_paired",
    "grad_micro_star_paired",
    "paired_gradient",
    "paired_cov_block",
    "diff_variance",
    "diff_wald_ci",
    "diff_g_ci",
    "paired_inference",
    "ScenarioKind",
    "DegeneracyPolicy",
    "Scenario",
    "CoverageResult",
    "sample_multinomial",
    "builtin_scenarios",
    "scenario_by_name",
    "run_coverage",
    "run_coverage_grid",
    "coverage_report",
]
