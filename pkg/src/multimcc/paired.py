"""Difference inference for two classifiers scored on the same subjects.

The joint outcome of one subject is a triple (method-1 prediction, method-2
prediction, truth), so the data form an r*r*r table with cells
``pi[i, j, k] = P(X1 = i, X2 = j, Y = k)``.  Each method's own confusion
table is a linear marginal of the joint table (sum out the other method's
axis), which has two consequences used throughout:

* a metric of method m is the single-table metric composed with a linear
  map, so its gradient in the joint cells is the single-table gradient of
  the marginal table broadcast over the summed-out axis;
* the two sqrt(n)-scaled metric estimates are jointly normal with a
  covariance ``cov`` that the difference variance must subtract twice.

Intervals for the difference come as plain Wald or as Wald on the
g(x) = 0.5*log((2+x)/(2-x)) scale, the analogue of the atanh transform for a
quantity that lives in (-2, 2).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegenerateMarginalError, ValidationError, ZeroTotalError
from .inference import (
    CIMethod,
    Gradient2,
    IntervalEstimate,
    TANH_INTERIOR,
    _require_alpha,
    grad_macro,
    grad_micro,
    grad_micro_star,
    normal_quantile,
    variance_quadratic,
    wald_ci,
)
from .metrics import MetricKind, ProbTable2, estimate

__all__ = [
    "MAX_JOINT_CLASSES",
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
]

# 8 bytes * 200**3 = 64 MB: the dense r**3 representation stops here.
MAX_JOINT_CLASSES = 200

VARIANCE_CLAMP = 1e-12
CS_SLACK = 1e-10
DIFF_CLAMP = 2.0 - 1e-10

PROB_SUM_TOL = 1e-12


def _checked_cube(cells: np.ndarray, what: str) -> np.ndarray:
    if cells.ndim != 3 or len(set(cells.shape)) != 1:
        raise ValidationError(f"{what} must be an r*r*r array, got shape {cells.shape}")
    r = cells.shape[0]
    if r < 2:
        raise ValidationError(f"{what} needs at least 2 classes, got {r}")
    if r > MAX_JOINT_CLASSES:
        raise ValidationError(
            f"{what} with r={r} exceeds the dense joint-table limit of {MAX_JOINT_CLASSES}")
    return cells


@dataclass(frozen=True, eq=False)
class JointCounts3:
    """Joint counts; axes are (method-1 prediction, method-2 prediction, truth)."""

    cells: np.ndarray
    labels: tuple[str, ...] | None = None

    def __post_init__(self) -> None:
        cells = _checked_cube(np.asarray(self.cells), "a joint counts table")
        if not np.issubdtype(cells.dtype, np.integer):
            as_float = np.asarray(cells, dtype=float)
            if not np.all(np.isfinite(as_float)) or np.any(as_float != np.floor(as_float)):
                raise ValidationError("counts must be whole numbers")
            cells = as_float
        cells = cells.astype(np.int64)
        if np.any(cells < 0):
            raise ValidationError("counts must be non-negative")
        if int(cells.sum()) < 1:
            raise ZeroTotalError("joint counts table is all zeros")
        cells.flags.writeable = False
        object.__setattr__(self, "cells", cells)
        if self.labels is not None:
            labels = tuple(str(x) for x in self.labels)
            if len(labels) != cells.shape[0]:
                raise ValidationError(
                    f"expected {cells.shape[0]} class labels, got {len(labels)}")
            object.__setattr__(self, "labels", labels)

    @property
    def r(self) -> int:
        return int(self.cells.shape[0])

    @property
    def n(self) -> int:
        return int(self.cells.sum())


@dataclass(frozen=True, eq=False)
class ProbTable3:
    """Joint cell probabilities over (method-1 prediction, method-2 prediction, truth)."""

    pi: np.ndarray

    def __post_init__(self) -> None:
        pi = _checked_cube(np.array(self.pi, dtype=float), "a joint probability table")
        if np.any(pi < 0.0) or np.any(pi > 1.0):
            raise ValidationError("cell probabilities must lie in [0, 1]")
        total = float(pi.sum())
        if abs(total - 1.0) > PROB_SUM_TOL:
            raise ValidationError(f"cell probabilities sum to {total!r}, not 1")
        pi.flags.writeable = False
        object.__setattr__(self, "pi", pi)

    @property
    def r(self) -> int:
        return int(self.pi.shape[0])


@dataclass(frozen=True, eq=False)
class Gradient3:
    """Partial derivatives of a scalar in the r*r*r joint cells."""

    values: np.ndarray

    def __post_init__(self) -> None:
        values = _checked_cube(np.array(self.values, dtype=float), "a joint gradient")
        if not np.all(np.isfinite(values)):
            raise ValidationError("gradient entries must be finite")
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def r(self) -> int:
        return int(self.values.shape[0])


@dataclass(frozen=True)
class PairedCovBlock:
    """Asymptotic second moments of the two sqrt(n)-scaled method metrics.

    ``var_1`` and ``var_2`` are the per-method variances, ``cov`` their
    covariance; all exclude the 1/n factor, which interval constructors apply
    last.
    """

    var_1: float
    var_2: float
    cov: float

    def __post_init__(self) -> None:
        if self.var_1 < 0.0 or self.var_2 < 0.0:
            raise ValidationError("variances must be non-negative")
        if abs(self.cov) > math.sqrt(self.var_1 * self.var_2) + CS_SLACK:
            raise ValidationError(
                f"covariance {self.cov!r} violates the Cauchy-Schwarz bound")


@dataclass(frozen=True)
class PairedResult:
    """Per-method estimates, their difference, and the difference interval."""

    estimate_1: float
    estimate_2: float
    difference: float
    interval: IntervalEstimate
    block: PairedCovBlock


def normalize_joint_counts(counts: JointCounts3) -> ProbTable3:
    """Maximum-likelihood joint cell probabilities."""
    if counts.n == 0:
        raise ZeroTotalError("cannot normalize a table with zero total")
    return ProbTable3(counts.cells / counts.n)


def _check_method(method: int) -> None:
    if method not in (1, 2):
        raise ValidationError(f"method must be 1 or 2, got {method!r}")


def marginalize(p3: ProbTable3, method: int) -> ProbTable2:
    """Confusion table of one method: sum the other method's axis out."""
    _check_method(method)
    cells = p3.pi.sum(axis=1) if method == 1 else p3.pi.sum(axis=0)
    return ProbTable2(cells)


def _lift(table_grad: Gradient2, method: int, r: int) -> Gradient3:
    # Marginalization is linear, so the joint-cell partial at (i, j, k) equals
    # the marginal-table partial at (i, k) for method 1, or (j, k) for method 2.
    a = table_grad.values
    if method == 1:
        cube = np.broadcast_to(a[:, None, :], (r, r, r))
    else:
        cube = np.broadcast_to(a[None, :, :], (r, r, r))
    return Gradient3(np.ascontiguousarray(cube))


def grad_macro_paired(p3: ProbTable3, method: int) -> Gradient3:
    """Joint-cell gradient of the chosen method's macro average."""
    _check_method(method)
    return _lift(grad_macro(marginalize(p3, method)), method, p3.r)


def grad_micro_paired(p3: ProbTable3, method: int) -> Gradient3:
    """Joint-cell gradient of the chosen method's micro average.

    Nonzero (= r/(r-1)) exactly on the cells where that method agrees with
    the truth: i = k for method 1, j = k for method 2.
    """
    _check_method(method)
    return _lift(grad_micro(marginalize(p3, method)), method, p3.r)


def grad_micro_star_paired(p3: ProbTable3, method: int) -> Gradient3:
    """Joint-cell gradient of the chosen method's indicator correlation."""
    _check_method(method)
    return _lift(grad_micro_star(marginalize(p3, method)), method, p3.r)


def paired_gradient(p3: ProbTable3, kind: MetricKind, method: int) -> Gradient3:
    """Dispatch over the three paired gradients."""
    if kind is MetricKind.MACRO:
        return grad_macro_paired(p3, method)
    if kind is MetricKind.MICRO:
        return grad_micro_paired(p3, method)
    if kind is MetricKind.MICRO_STAR:
        return grad_micro_star_paired(p3, method)
    raise ValidationError(f"unknown metric kind: {kind!r}")


def paired_cov_block(grad_1: Gradient3, grad_2: Gradient3, p3: ProbTable3) -> PairedCovBlock:
    """Variances and covariance of the two metrics under joint sampling."""
    if not grad_1.r == grad_2.r == p3.r:
        raise ValidationError("gradients and table must share a class count")
    pi = p3.pi
    a = grad_1.values
    b = grad_2.values
    mean_a = float((pi * a).sum())
    mean_b = float((pi * b).sum())
    var_1 = float((pi * a * a).sum()) - mean_a * mean_a
    var_2 = float((pi * b * b).sum()) - mean_b * mean_b
    cov = float((pi * a * b).sum()) - mean_a * mean_b
    if var_1 < -VARIANCE_CLAMP or var_2 < -VARIANCE_CLAMP:
        raise ValidationError("variance quadratic form went negative")
    return PairedCovBlock(max(var_1, 0.0), max(var_2, 0.0), cov)


def diff_variance(block: PairedCovBlock, independent: bool = False) -> float:
    """Asymptotic variance of the sqrt(n)-scaled difference.

    ``independent`` drops the covariance term, for two methods evaluated on
    unrelated samples of the same size.
    """
    v = block.var_1 + block.var_2
    if not independent:
        v -= 2.0 * block.cov
    if v < -VARIANCE_CLAMP:
        raise ValidationError(f"difference variance came out {v!r}")
    return max(v, 0.0)


def diff_wald_ci(diff: float, variance: float, n: int, alpha: float = 0.05) -> IntervalEstimate:
    """Plain Wald interval for the difference."""
    return replace(wald_ci(diff, variance, n, alpha), method=CIMethod.WALD_DIFF)


def _g_interval(diff: float, var_diff: float, n: int, alpha: float,
                flags: tuple[str, ...] = ()) -> IntervalEstimate:
    d = float(diff)
    if abs(d) >= 2.0:
        d = math.copysign(DIFF_CLAMP, d)
        flags = flags + ("degenerate_estimate",)
    var_g = var_diff * (2.0 / (4.0 - d * d)) ** 2
    z = normal_quantile(1.0 - alpha / 2.0)
    half = z * math.sqrt(var_g / n)
    center = 0.5 * math.log((2.0 + d) / (2.0 - d))
    lower = max(2.0 * math.tanh(center - half), -2.0 * TANH_INTERIOR)
    upper = min(2.0 * math.tanh(center + half), 2.0 * TANH_INTERIOR)
    return IntervalEstimate(d, var_g, int(n), float(alpha),
                            lower, upper, CIMethod.G_TRANSFORM, flags)


def diff_g_ci(diff: float, grad_diff: Gradient3, p3: ProbTable3, n: int,
              alpha: float = 0.05) -> IntervalEstimate:
    """Wald interval on the g scale, mapped back through 2*tanh.

    ``grad_diff`` is the joint-cell gradient of the difference (method-1
    gradient minus method-2 gradient), whose quadratic form already carries
    the -2*cov term.
    """
    _require_alpha(alpha)
    if grad_diff.r != p3.r:
        raise ValidationError("gradient and table must share a class count")
    return _g_interval(diff, variance_quadratic(grad_diff.values, p3.pi), n, alpha)


def paired_inference(counts: JointCounts3, kind: MetricKind,
                     method: CIMethod = CIMethod.WALD_DIFF, alpha: float = 0.05,
                     independent: bool = False) -> PairedResult:
    """Full pipeline from joint counts to a difference interval."""
    p3 = normalize_joint_counts(counts)
    table_1 = marginalize(p3, 1)
    table_2 = marginalize(p3, 2)
    est_1 = estimate(table_1, kind)
    est_2 = estimate(table_2, kind)
    diff = est_1 - est_2
    grad_1 = paired_gradient(p3, kind, 1)
    grad_2 = paired_gradient(p3, kind, 2)
    block = paired_cov_block(grad_1, grad_2, p3)
    if method is CIMethod.WALD_DIFF:
        ci = diff_wald_ci(diff, diff_variance(block, independent), counts.n, alpha)
    elif method is CIMethod.G_TRANSFORM:
        if independent:
            ci = _g_interval(diff, diff_variance(block, independent=True), counts.n, alpha)
        else:
            ci = diff_g_ci(diff, Gradient3(grad_1.values - grad_2.values), p3,
                           counts.n, alpha)
    else:
        raise ValidationError(
            f"paired inference supports WALD_DIFF or G_TRANSFORM, got {method!r}")
    return PairedResult(est_1, est_2, diff, ci, block)
