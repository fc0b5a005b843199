"""Delta-method variances and confidence intervals for a single table.

The sampling model is multinomial over the r*r cells: with ``phat`` the
vector of observed cell proportions, sqrt(n) * (phat - pi) is asymptotically
normal with covariance diag(pi) - pi pi^T.  A differentiable metric therefore
has asymptotic variance

    sum_ij pi_ij * A_ij**2 - (sum_ij pi_ij * A_ij)**2

where A holds the partial derivatives of the metric with all r*r cells
treated as free coordinates (the covariance absorbs the sum-to-one
constraint).  Two interval constructions are provided per metric: plain Wald
on the raw scale, and Wald on the atanh scale mapped back through tanh, which
keeps the bounds inside (-1, 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateMarginalError, InvalidAlphaError, ValidationError
from .metrics import ConfusionCounts2, MetricKind, ProbTable2, estimate, normalize_counts

__all__ = [
    "CIMethod",
    "Gradient2",
    "IntervalEstimate",
    "normal_quantile",
    "grad_macro",
    "grad_micro",
    "grad_micro_star",
    "gradient",
    "asymptotic_variance",
    "wald_ci",
    "fisher_z_ci",
    "single_inference",
]

# Quadratic forms in exact arithmetic are variances and cannot go negative;
# anything below this is rounding noise, anything beyond it is a bug.
VARIANCE_CLAMP = 1e-12

# atanh blows up at +-1; estimates on the boundary are moved just inside.
ESTIMATE_CLAMP = 1.0 - 1e-10

_BOUND_SLACK = 1e-12

# tanh saturates to exactly 1.0 in floating point once its argument passes
# ~19; mapped-back interval bounds are pulled to the last double inside the
# open interval so that they honor the strict containment invariant.
TANH_INTERIOR = math.nextafter(1.0, 0.0)


class CIMethod(enum.Enum):
    """Interval construction; the value doubles as the CLI token."""

    WALD = "wald"
    FISHER_Z = "fisher-z"
    WALD_DIFF = "wald-diff"
    G_TRANSFORM = "g"


@dataclass(frozen=True, eq=False)
class Gradient2:
    """Partial derivatives of a metric in the r*r table cells."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = np.array(self.values, dtype=float)
        if values.ndim != 2 or values.shape[0] != values.shape[1]:
            raise ValidationError(f"gradient must be square, got shape {values.shape}")
        if not np.all(np.isfinite(values)):
            raise ValidationError("gradient entries must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class IntervalEstimate:
    """A confidence interval together with the variance that produced it.

    ``variance`` is the asymptotic variance of the sqrt(n)-scaled quantity the
    interval is built on; for FISHER_Z and G_TRANSFORM that is the transformed
    scale.  ``flags`` records degeneracy notes such as ``degenerate_estimate``
    (the point estimate sat on the boundary and was nudged inside before
    transforming).
    """

    estimate: float
    variance: float
    n: int
    alpha: float
    lower: float
    upper: float
    method: CIMethod
    flags: tuple[str, ...] = ()

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise InvalidAlphaError(f"alpha must be in (0, 1), got {self.alpha!r}")
        if self.n < 1:
            raise ValidationError(f"sample size must be at least 1, got {self.n}")
        if not self.variance >= 0.0:
            raise ValidationError(f"variance must be non-negative, got {self.variance!r}")
        if not (self.lower - _BOUND_SLACK <= self.estimate <= self.upper + _BOUND_SLACK):
            raise ValidationError("interval does not bracket its estimate")
        if self.method is CIMethod.FISHER_Z and not (-1.0 < self.lower <= self.upper < 1.0):
            raise ValidationError("atanh-scale intervals must stay inside (-1, 1)")
        if self.method is CIMethod.G_TRANSFORM and not (-2.0 < self.lower <= self.upper < 2.0):
            raise ValidationError("difference-scale intervals must stay inside (-2, 2)")

    @property
    def width(self) -> float:
        return self.upper - self.lower


# Rational approximation of the normal inverse CDF (Acklam's coefficients),
# accurate to ~1.1e-9 on its own; one Halley step against erfc takes the
# absolute error to ~1e-13, comfortably past the 1e-9 requirement.
_Q_A = (-3.969683028665376e+01, 2.209460984245205e+02, -2.759285104469687e+02,
        1.383577518672690e+02, -3.066479806614716e+01, 2.506628277459239e+00)
_Q_B = (-5.447609879822406e+01, 1.615858368580409e+02, -1.556989798598866e+02,
        6.680131188771972e+01, -1.328068155288572e+01)
_Q_C = (-7.784894002430293e-03, -3.223964580411365e-01, -2.400758277161838e+00,
        -2.549732539343734e+00, 4.374664141464968e+00, 2.938163982698783e+00)
_Q_D = (7.784695709041462e-03, 3.224671290700398e-01, 2.445134137142996e+00,
        3.754408661907416e+00)
_Q_SPLIT = 0.02425


def _quantile_tail(q: float) -> float:
    t = math.sqrt(-2.0 * math.log(q))
    a, b, c, d, e, f = _Q_C
    num = ((((a * t + b) * t + c) * t + d) * t + e) * t + f
    g, h, i, j = _Q_D
    den = (((g * t + h) * t + i) * t + j) * t + 1.0
    return num / den


def normal_quantile(q: float) -> float:
    """Standard-normal inverse CDF at ``q`` in (0, 1)."""
    if not 0.0 < q < 1.0:
        raise ValidationError(f"quantile argument must be in (0, 1), got {q!r}")
    if q < _Q_SPLIT:
        x = _quantile_tail(q)
    elif q <= 1.0 - _Q_SPLIT:
        u = q - 0.5
        t = u * u
        a, b, c, d, e, f = _Q_A
        num = (((((a * t + b) * t + c) * t + d) * t + e) * t + f) * u
        g, h, i, j, k = _Q_B
        den = ((((g * t + h) * t + i) * t + j) * t + k) * t + 1.0
        x = num / den
    else:
        x = -_quantile_tail(1.0 - q)
    err = 0.5 * math.erfc(-x / math.sqrt(2.0)) - q
    step = err * math.sqrt(2.0 * math.pi) * math.exp(0.5 * x * x)
    return x - step / (1.0 + 0.5 * x * step)


def _require_alpha(alpha: float) -> None:
    if not 0.0 < alpha < 1.0:
        raise InvalidAlphaError(f"alpha must be in (0, 1), got {alpha!r}")


def grad_macro(p: ProbTable2) -> Gradient2:
    """Gradient of the macro average.

    Each per-class term is a quotient N_a / sqrt(Q_a) with
    N_a = pi_aa - u_a v_a and Q_a = u_a v_a (1-u_a)(1-v_a), where u and v are
    the prediction and truth marginals.  Cell (i, j) moves N and Q for class i
    (through u_i) and class j (through v_j), plus N_i directly when i = j.
    """
    u, v = p.row_marginals, p.col_marginals
    if np.any(u <= 0.0) or np.any(u >= 1.0) or np.any(v <= 0.0) or np.any(v >= 1.0):
        raise DegenerateMarginalError(
            "macro gradient requires every marginal strictly inside (0, 1)")
    num = p.pi.diagonal() - u * v
    q = u * v * (1.0 - u) * (1.0 - v)
    scale = 1.0 / np.sqrt(q)
    curv = num / (2.0 * q * np.sqrt(q))
    row_part = -v * scale - curv * v * (1.0 - v) * (1.0 - 2.0 * u)
    col_part = -u * scale - curv * u * (1.0 - u) * (1.0 - 2.0 * v)
    values = row_part[:, None] + col_part[None, :] + np.diag(scale)
    return Gradient2(values / p.r)


def grad_micro(p: ProbTable2) -> Gradient2:
    """Gradient of the pooled micro average: r/(r-1) on the diagonal, else 0."""
    return Gradient2(np.eye(p.r) * (p.r / (p.r - 1.0)))


def grad_micro_star(p: ProbTable2) -> Gradient2:
    """Gradient of the indicator-correlation form."""
    u, v = p.row_marginals, p.col_marginals
    var_pred = 1.0 - float(u @ u)
    var_truth = 1.0 - float(v @ v)
    if var_pred <= 0.0 or var_truth <= 0.0:
        raise DegenerateMarginalError(
            "correlation gradient undefined: all mass in a single row or column")
    cov = float(p.pi.trace() - u @ v)
    denom = math.sqrt(var_pred * var_truth)
    base = (np.eye(p.r) - v[:, None] - u[None, :]) / denom
    bulge = cov * (u[:, None] / (denom * var_pred) + v[None, :] / (denom * var_truth))
    return Gradient2(base + bulge)


def gradient(p: ProbTable2, kind: MetricKind) -> Gradient2:
    """Dispatch to the gradient matching ``kind``."""
    if kind is MetricKind.MACRO:
        return grad_macro(p)
    if kind is MetricKind.MICRO:
        return grad_micro(p)
    if kind is MetricKind.MICRO_STAR:
        return grad_micro_star(p)
    raise ValidationError(f"unknown metric kind: {kind!r}")


def variance_quadratic(values: np.ndarray, pi: np.ndarray) -> float:
    """The multinomial sandwich sum(pi a^2) - (sum(pi a))^2, clamped at 0.

    Shape-agnostic: used for both r*r and r*r*r tables.
    """
    mean = float((pi * values).sum())
    raw = float((pi * values * values).sum()) - mean * mean
    if raw < -VARIANCE_CLAMP:
        raise ValidationError(f"variance quadratic form produced {raw!r}")
    return max(raw, 0.0)


def asymptotic_variance(grad: Gradient2, p: ProbTable2) -> float:
    """Asymptotic variance of the sqrt(n)-scaled metric (no 1/n factor)."""
    if grad.r != p.r:
        raise ValidationError(f"gradient is {grad.r}x{grad.r} but table is {p.r}x{p.r}")
    return variance_quadratic(grad.values, p.pi)


def wald_ci(estimate: float, variance: float, n: int, alpha: float = 0.05) -> IntervalEstimate:
    """Plain Wald interval; bounds are deliberately not clipped to [-1, 1]."""
    _require_alpha(alpha)
    if variance < 0.0:
        raise ValidationError(f"variance must be non-negative, got {variance!r}")
    est = float(estimate)
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * math.sqrt(variance / n)
    return IntervalEstimate(est, float(variance), int(n), float(alpha),
                            est - half, est + half, CIMethod.WALD)


def fisher_z_ci(estimate: float, grad: Gradient2, p: ProbTable2, n: int,
                alpha: float = 0.05) -> IntervalEstimate:
    """Wald interval on the atanh scale, mapped back through tanh."""
    _require_alpha(alpha)
    est = float(estimate)
    flags: tuple[str, ...] = ()
    if abs(est) >= 1.0:
        est = math.copysign(ESTIMATE_CLAMP, est)
        flags = ("degenerate_estimate",)
    base = asymptotic_variance(grad, p)
    var_z = base / (1.0 - est * est) ** 2
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * math.sqrt(var_z / n)
    center = math.atanh(est)
    lower = max(math.tanh(center - half), -TANH_INTERIOR)
    upper = min(math.tanh(center + half), TANH_INTERIOR)
    return IntervalEstimate(est, var_z, int(n), float(alpha),
                            lower, upper, CIMethod.FISHER_Z, flags)


def single_inference(counts: ConfusionCounts2, kind: MetricKind,
                     method: CIMethod = CIMethod.WALD,
                     alpha: float = 0.05) -> IntervalEstimate:
    """Full pipeline: normalize, estimate, gradient, variance, interval.

    Tables on which the selected gradient is undefined (a zero marginal for
    MACRO, a saturated row or column for MICRO_STAR) raise
    :class:`DegenerateMarginalError`.
    """
    p = normalize_counts(counts)
    est = estimate(p, kind)
    grad = gradient(p, kind)
    if method is CIMethod.WALD:
        return wald_ci(est, asymptotic_variance(grad, p), counts.n, alpha)
    if method is CIMethod.FISHER_Z:
        return fisher_z_ci(est, grad, p, counts.n, alpha)
    raise ValidationError(
        f"single-table inference supports WALD or FISHER_Z, got {method!r}")
