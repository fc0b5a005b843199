"""Monte Carlo coverage harness for the interval constructors.

A scenario fixes a true cell-probability table (single r*r or paired r*r*r)
whose metric values are known analytically.  Each replicate draws one
multinomial table of size n from the truth, runs the full estimation and
interval pipeline, and records whether the interval contains the true value.
Coverage close to the nominal level over many replicates is the end-to-end
check that the estimators, gradients, and interval transforms agree.

Replicates are mutually independent: replicate index ``rep`` always uses the
counter-based stream keyed by ``(seed, rep)``, so any partition of the index
range over any number of worker processes reproduces the serial run bit for
bit.

Sampled tables can be degenerate (an empty class, or an estimate pinned to
the boundary).  Such replicates never abort a run; they are tallied and
handled per ``DegeneracyPolicy``: CountAsMiss treats them as non-covering,
Exclude drops them from the denominator.  Mean interval width is always
taken over the non-degenerate replicates.
"""

from __future__ import annotations

import enum
import math
import multiprocessing
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from itertools import repeat
from typing import Sequence

import numpy as np

from .errors import (
    DegenerateMarginalError,
    InvalidProbabilitiesError,
    ValidationError,
)
from .inference import (
    CIMethod,
    Gradient2,
    _require_alpha,
    asymptotic_variance,
    fisher_z_ci,
    gradient,
    wald_ci,
)
from .metrics import ConfusionCounts2, MetricKind, ProbTable2, estimate, normalize_counts
from .paired import (
    Gradient3,
    JointCounts3,
    ProbTable3,
    diff_g_ci,
    diff_variance,
    diff_wald_ci,
    marginalize,
    normalize_joint_counts,
    paired_cov_block,
    paired_gradient,
)

__all__ = [
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

TRUE_VALUE_TOL = 1e-12

MAX_SEED = 2 ** 64


class ScenarioKind(enum.Enum):
    SINGLE = "single"
    PAIRED = "paired"


class DegeneracyPolicy(enum.Enum):
    COUNT_AS_MISS = "count-as-miss"
    EXCLUDE = "exclude"


@dataclass(frozen=True, eq=False)
class Scenario:
    """A named truth table with its analytically known metric values.

    For a paired scenario the three stored values are the true differences
    (method 1 minus method 2), since those are what the difference intervals
    must cover.
    """

    name: str
    kind: ScenarioKind
    truth: ProbTable2 | ProbTable3
    true_macro: float
    true_micro: float
    true_micro_star: float
    description: str = ""

    def __post_init__(self) -> None:
        if self.kind is ScenarioKind.SINGLE:
            if not isinstance(self.truth, ProbTable2):
                raise ValidationError("a single scenario needs an r*r truth table")
        elif self.kind is ScenarioKind.PAIRED:
            if not isinstance(self.truth, ProbTable3):
                raise ValidationError("a paired scenario needs an r*r*r truth table")
        else:
            raise ValidationError(f"unknown scenario kind: {self.kind!r}")
        for metric in MetricKind:
            stored = self.true_value(metric)
            recomputed = self._recompute(metric)
            if abs(stored - recomputed) > TRUE_VALUE_TOL:
                raise ValidationError(
                    f"scenario {self.name!r}: stored true {metric.value} value "
                    f"{stored!r} disagrees with the truth table ({recomputed!r})")

    def _recompute(self, metric: MetricKind) -> float:
        if self.kind is ScenarioKind.SINGLE:
            return estimate(self.truth, metric)
        table_1 = marginalize(self.truth, 1)
        table_2 = marginalize(self.truth, 2)
        return estimate(table_1, metric) - estimate(table_2, metric)

    def true_value(self, metric: MetricKind) -> float:
        if metric is MetricKind.MACRO:
            return self.true_macro
        if metric is MetricKind.MICRO:
            return self.true_micro
        if metric is MetricKind.MICRO_STAR:
            return self.true_micro_star
        raise ValidationError(f"unknown metric kind: {metric!r}")

    @property
    def r(self) -> int:
        return self.truth.r


@dataclass(frozen=True)
class CoverageResult:
    """Outcome of one (scenario, n, metric, interval method) coverage cell."""

    scenario: str
    n: int
    reps: int
    metric: MetricKind
    ci_method: CIMethod
    alpha: float
    covered: int
    degenerate: int
    coverage: float
    mean_width: float
    seed: int
    policy: DegeneracyPolicy

    def __post_init__(self) -> None:
        if self.reps < 1:
            raise ValidationError("reps must be at least 1")
        if not 0 <= self.covered <= self.reps:
            raise ValidationError("covered count out of range")
        if not 0 <= self.degenerate <= self.reps:
            raise ValidationError("degenerate count out of range")
        denominator = (self.reps if self.policy is DegeneracyPolicy.COUNT_AS_MISS
                       else self.reps - self.degenerate)
        if denominator > 0:
            expected = self.covered / denominator
            if not math.isclose(self.coverage, expected, rel_tol=0.0, abs_tol=1e-12):
                raise ValidationError(
                    f"coverage {self.coverage!r} inconsistent with "
                    f"covered={self.covered}, reps={self.reps}, "
                    f"degenerate={self.degenerate}, policy={self.policy.value}")
            if not 0.0 <= self.coverage <= 1.0:
                raise ValidationError("coverage must lie in [0, 1]")
        elif not math.isnan(self.coverage):
            raise ValidationError("coverage must be NaN when no replicates count")


def sample_multinomial(probabilities: np.ndarray, n: int,
                       rng: np.random.Generator) -> np.ndarray:
    """One Multinomial(n, probabilities) draw as an int64 count vector.

    Sampling walks the cells once, drawing each count from the binomial
    conditional on what earlier cells consumed; this is the exact joint
    distribution, not an approximation, and costs one binomial draw per cell.
    """
    p = np.asarray(probabilities, dtype=float).ravel()
    if p.size < 1:
        raise InvalidProbabilitiesError("need at least one cell probability")
    if not np.all(np.isfinite(p)) or np.any(p < 0.0):
        raise InvalidProbabilitiesError("cell probabilities must be finite and non-negative")
    total = float(p.sum())
    if abs(total - 1.0) > 1e-12:
        raise InvalidProbabilitiesError(f"cell probabilities sum to {total!r}, not 1")
    if n < 1:
        raise ValidationError(f"sample size must be at least 1, got {n}")
    counts = np.zeros(p.size, dtype=np.int64)
    remaining = int(n)
    mass_left = 1.0
    for i in range(p.size - 1):
        if remaining == 0:
            break
        share = p[i] / mass_left if mass_left > 0.0 else 1.0
        # Rounding can push the conditional probability a hair outside [0, 1].
        share = min(max(share, 0.0), 1.0)
        drawn = int(rng.binomial(remaining, share))
        counts[i] = drawn
        remaining -= drawn
        mass_left -= p[i]
    counts[-1] += remaining
    return counts


def _replicate_rng(seed: int, rep: int) -> np.random.Generator:
    # Counter-based keying: stream identity depends only on (seed, rep), so
    # serial and parallel schedules draw identical tables per replicate.
    return np.random.Generator(np.random.Philox(key=np.array([seed, rep], dtype=np.uint64)))


_SINGLE_TRUTH = {
    "single-1": ([[28, 2, 3], [3, 28, 2], [2, 3, 29]], 100,
                 (0.7749665221131418, 0.775, 0.7749774977497751),
                 "balanced classes, strong diagonal"),
    "single-2": ([[11, 11, 11], [11, 11, 11], [11, 11, 12]], 100,
                 (0.009852697297824595, 0.01, 0.009900990099009892),
                 "near-uniform cells, metrics close to zero"),
    "single-3": ([[2, 5, 0], [2, 70, 2], [2, 2, 15]], 100,
                 (0.5882703405033923, 0.805, 0.6717290022503466),
                 "imbalanced truth dominated by the middle class"),
    "single-4": ([[2, 25, 6], [2, 26, 6], [2, 25, 6]], 100,
                 (0.0043402938618542775, 0.01, 0.004728898888290464),
                 "imbalanced truth, nearly uninformative predictions"),
}

# Joint truth blocks listed per true class k; cell [k][i][j] is the count for
# (method-1 prediction i, method-2 prediction j, truth k) over the denominator.
_PAIRED_TRUTH = {
    "paired-1": ([
        [[40, 10, 10], [10, 5, 5], [10, 5, 5]],
        [[5, 10, 5], [10, 40, 10], [5, 10, 5]],
        [[5, 5, 10], [5, 5, 10], [10, 10, 40]],
    ], 300, (0.0, 0.0, 0.0), "equally strong methods, balanced classes"),
    "paired-2": ([
        [[30, 15, 15], [10, 5, 5], [10, 5, 5]],
        [[5, 10, 5], [15, 30, 15], [5, 10, 5]],
        [[5, 5, 10], [5, 5, 10], [15, 15, 30]],
    ], 300, (0.15, 0.15, 0.15), "method 1 stronger, balanced classes"),
    "paired-3": ([
        [[120, 30, 30], [30, 15, 15], [30, 15, 15]],
        [[5, 10, 5], [10, 40, 10], [5, 10, 5]],
        [[5, 5, 10], [5, 5, 10], [10, 10, 40]],
    ], 500, (0.0, 0.0, 0.0), "equally strong methods, imbalanced classes"),
    "paired-4": ([
        [[190, 80, 90], [5, 5, 5], [0, 5, 5]],
        [[5, 5, 0], [5, 10, 5], [5, 5, 5]],
        [[5, 5, 5], [5, 5, 15], [5, 5, 20]],
    ], 500, (0.2848282174513212, 0.465, 0.32855741387298865),
        "method 1 stronger, imbalanced classes"),
}


def builtin_scenarios() -> tuple[Scenario, ...]:
    """The four single and four paired reference scenarios."""
    out = []
    for name, (cells, denom, (mam, mim, mim_star), blurb) in _SINGLE_TRUTH.items():
        truth = ProbTable2(np.array(cells, dtype=float) / denom)
        out.append(Scenario(name, ScenarioKind.SINGLE, truth, mam, mim, mim_star, blurb))
    for name, (blocks, denom, (mam, mim, mim_star), blurb) in _PAIRED_TRUTH.items():
        cube = np.stack([np.array(b, dtype=float) for b in blocks], axis=-1) / denom
        truth = ProbTable3(cube)
        out.append(Scenario(name, ScenarioKind.PAIRED, truth, mam, mim, mim_star, blurb))
    return tuple(out)


def scenario_by_name(name: str) -> Scenario:
    for scenario in builtin_scenarios():
        if scenario.name == name:
            return scenario
    known = ", ".join(sorted(list(_SINGLE_TRUTH) + list(_PAIRED_TRUTH)))
    raise ValidationError(f"unknown scenario {name!r}; builtin scenarios: {known}")


_SINGLE_METHODS = frozenset({CIMethod.WALD, CIMethod.FISHER_Z})
_PAIRED_METHODS = frozenset({CIMethod.WALD_DIFF, CIMethod.G_TRANSFORM})


def _single_replicate(table: np.ndarray, scenario: Scenario,
                      cells: Sequence[tuple[MetricKind, CIMethod]], n: int,
                      alpha: float) -> list[tuple[bool, float, bool]]:
    p = normalize_counts(ConfusionCounts2(table))
    cache: dict[MetricKind, tuple[float, Gradient2, float] | None] = {}
    out = []
    for metric, method in cells:
        if metric not in cache:
            try:
                est = estimate(p, metric)
                grad = gradient(p, metric)
                cache[metric] = (est, grad, asymptotic_variance(grad, p))
            except DegenerateMarginalError:
                cache[metric] = None
        state = cache[metric]
        if state is None:
            out.append((False, math.nan, True))
            continue
        est, grad, var = state
        if method is CIMethod.WALD:
            ci = wald_ci(est, var, n, alpha)
            degenerate = abs(est) >= 1.0
        else:
            ci = fisher_z_ci(est, grad, p, n, alpha)
            degenerate = "degenerate_estimate" in ci.flags
        true = scenario.true_value(metric)
        out.append((ci.lower <= true <= ci.upper, ci.width, degenerate))
    return out


def _paired_replicate(cube: np.ndarray, scenario: Scenario,
                      cells: Sequence[tuple[MetricKind, CIMethod]], n: int,
                      alpha: float) -> list[tuple[bool, float, bool]]:
    p3 = normalize_joint_counts(JointCounts3(cube))
    table_1 = marginalize(p3, 1)
    table_2 = marginalize(p3, 2)
    cache: dict[MetricKind, tuple[float, float, Gradient3] | None] = {}
    out = []
    for metric, method in cells:
        if metric not in cache:
            try:
                diff = estimate(table_1, metric) - estimate(table_2, metric)
                grad_1 = paired_gradient(p3, metric, 1)
                grad_2 = paired_gradient(p3, metric, 2)
                block = paired_cov_block(grad_1, grad_2, p3)
                grad_diff = Gradient3(grad_1.values - grad_2.values)
                cache[metric] = (diff, diff_variance(block), grad_diff)
            except DegenerateMarginalError:
                cache[metric] = None
        state = cache[metric]
        if state is None:
            out.append((False, math.nan, True))
            continue
        diff, var_diff, grad_diff = state
        if method is CIMethod.WALD_DIFF:
            ci = diff_wald_ci(diff, var_diff, n, alpha)
            degenerate = abs(diff) >= 2.0
        else:
            ci = diff_g_ci(diff, grad_diff, p3, n, alpha)
            degenerate = "degenerate_estimate" in ci.flags
        true = scenario.true_value(metric)
        out.append((ci.lower <= true <= ci.upper, ci.width, degenerate))
    return out


def _coverage_block(scenario: Scenario, n: int, start: int, count: int,
                    cells: tuple[tuple[MetricKind, CIMethod], ...],
                    alpha: float, seed: int) -> list[tuple[int, int, list[float]]]:
    """Tally replicates [start, start+count); policy-independent raw counts."""
    flat = scenario.truth.pi.ravel()
    shape = scenario.truth.pi.shape
    replicate = (_single_replicate if scenario.kind is ScenarioKind.SINGLE
                 else _paired_replicate)
    covered = [0] * len(cells)
    degenerate = [0] * len(cells)
    widths: list[list[float]] = [[] for _ in cells]
    for rep in range(start, start + count):
        sample = sample_multinomial(flat, n, _replicate_rng(seed, rep)).reshape(shape)
        for idx, (hit, width, bad) in enumerate(replicate(sample, scenario, cells, n, alpha)):
            if bad:
                degenerate[idx] += 1
            else:
                if hit:
                    covered[idx] += 1
                widths[idx].append(width)
    return [(covered[i], degenerate[i], widths[i]) for i in range(len(cells))]


def run_coverage_grid(scenario: Scenario, n: int, reps: int,
                      cells: Sequence[tuple[MetricKind, CIMethod]],
                      alpha: float = 0.05, seed: int = 0,
                      policy: DegeneracyPolicy = DegeneracyPolicy.COUNT_AS_MISS,
                      workers: int | None = None) -> list[CoverageResult]:
    """Coverage for several (metric, interval method) cells in one sampling pass.

    Every cell sees the same replicate tables, so each entry of the result
    equals what a separate run_coverage call with the same seed returns; the
    grid just avoids drawing the tables once per cell.
    """
    _require_alpha(alpha)
    if reps < 1:
        raise ValidationError(f"reps must be at least 1, got {reps}")
    if n < 1:
        raise ValidationError(f"sample size must be at least 1, got {n}")
    if not 0 <= seed < MAX_SEED:
        raise ValidationError(f"seed must fit an unsigned 64-bit integer, got {seed}")
    if not isinstance(policy, DegeneracyPolicy):
        raise ValidationError(f"unknown degeneracy policy: {policy!r}")
    cells = tuple(cells)
    if not cells:
        raise ValidationError("need at least one (metric, interval method) cell")
    allowed = (_SINGLE_METHODS if scenario.kind is ScenarioKind.SINGLE
               else _PAIRED_METHODS)
    for metric, method in cells:
        if not isinstance(metric, MetricKind):
            raise ValidationError(f"unknown metric kind: {metric!r}")
        if method not in allowed:
            raise ValidationError(
                f"interval method {method.value!r} does not apply to a "
                f"{scenario.kind.value} scenario")

    if workers is None or workers <= 1:
        blocks = [_coverage_block(scenario, n, 0, reps, cells, alpha, seed)]
    else:
        block_size = -(-reps // workers)
        starts = list(range(0, reps, block_size))
        counts = [min(block_size, reps - s) for s in starts]
        try:
            context = multiprocessing.get_context("fork")
        except ValueError:
            context = multiprocessing.get_context()
        with ProcessPoolExecutor(max_workers=workers, mp_context=context) as pool:
            blocks = list(pool.map(_coverage_block, repeat(scenario), repeat(n),
                                   starts, counts, repeat(cells), repeat(alpha),
                                   repeat(seed)))

    results = []
    for idx, (metric, method) in enumerate(cells):
        covered = sum(block[idx][0] for block in blocks)
        bad = sum(block[idx][1] for block in blocks)
        all_widths = [w for block in blocks for w in block[idx][2]]
        denominator = reps if policy is DegeneracyPolicy.COUNT_AS_MISS else reps - bad
        coverage = covered / denominator if denominator > 0 else math.nan
        mean_width = math.fsum(all_widths) / len(all_widths) if all_widths else math.nan
        results.append(CoverageResult(scenario.name, n, reps, metric, method,
                                      alpha, covered, bad, coverage, mean_width,
                                      seed, policy))
    return results


def run_coverage(scenario: Scenario, n: int, reps: int, kind: MetricKind,
                 ci_method: CIMethod, alpha: float = 0.05, seed: int = 0,
                 policy: DegeneracyPolicy = DegeneracyPolicy.COUNT_AS_MISS,
                 workers: int | None = None) -> CoverageResult:
    """Coverage of one interval constructor for one metric on one scenario."""
    return run_coverage_grid(scenario, n, reps, [(kind, ci_method)], alpha,
                             seed, policy, workers)[0]


def _fmt4(x: float) -> str:
    return "nan" if math.isnan(x) else f"{x:.4f}"


_REPORT_HEADERS = ("scenario", "n", "reps", "metric", "ci", "alpha",
                   "coverage", "mean-width", "degenerate", "seed", "policy")


def coverage_report(results: Sequence[CoverageResult]) -> str:
    """Plain-text table, one row per CoverageResult, 4-decimal coverage."""
    rows = [(r.scenario, str(r.n), str(r.reps), r.metric.value, r.ci_method.value,
             f"{r.alpha:g}", _fmt4(r.coverage), _fmt4(r.mean_width),
             str(r.degenerate), str(r.seed), r.policy.value) for r in results]
    widths = [max(len(header), max((len(row[i]) for row in rows), default=0))
              for i, header in enumerate(_REPORT_HEADERS)]
    def line(parts: Sequence[str]) -> str:
        return "  ".join(part.ljust(widths[i]) for i, part in enumerate(parts)).rstrip()
    out = [line(_REPORT_HEADERS), line(tuple("-" * w for w in widths))]
    out.extend(line(row) for row in rows)
    return "\n".join(out)
