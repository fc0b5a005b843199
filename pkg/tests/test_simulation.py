"""Coverage-harness tests: sampling, scenarios, policies, and determinism."""

import math

import numpy as np
import pytest

from multimcc import (
    CIMethod,
    CoverageResult,
    DegeneracyPolicy,
    InvalidProbabilitiesError,
    MetricKind,
    ProbTable2,
    Scenario,
    ScenarioKind,
    ValidationError,
    builtin_scenarios,
    coverage_report,
    run_coverage,
    run_coverage_grid,
    sample_multinomial,
    scenario_by_name,
)

FREQ_SIGMA = 4.0
EXACT_TOL = 1e-12

SINGLE_NAMES = ("single-1", "single-2", "single-3", "single-4")
PAIRED_NAMES = ("paired-1", "paired-2", "paired-3", "paired-4")


def test_multinomial_sums_to_n():
    rng = np.random.default_rng(20260430)
    p = np.array([0.1, 0.2, 0.3, 0.4])
    for n in (1, 7, 100, 12345):
        counts = sample_multinomial(p, n, rng)
        assert counts.sum() == n
        assert counts.dtype == np.int64
        assert np.all(counts >= 0)


def test_multinomial_is_deterministic_for_a_seeded_generator():
    p = np.array([0.25, 0.25, 0.5])
    a = sample_multinomial(p, 1000, np.random.default_rng(99))
    b = sample_multinomial(p, 1000, np.random.default_rng(99))
    assert np.array_equal(a, b)


def test_multinomial_zero_probability_cell_never_drawn():
    rng = np.random.default_rng(20260431)
    p = np.array([0.5, 0.0, 0.5])
    for _ in range(50):
        assert sample_multinomial(p, 200, rng)[1] == 0


def test_multinomial_single_cell_takes_everything():
    counts = sample_multinomial(np.array([1.0]), 17, np.random.default_rng(0))
    assert counts.tolist() == [17]


def test_multinomial_frequencies_match_probabilities():
    rng = np.random.default_rng(20260432)
    p = np.array([0.2, 0.3, 0.5])
    n = 100000
    counts = sample_multinomial(p, n, rng)
    for i in range(3):
        sigma = math.sqrt(p[i] * (1.0 - p[i]) / n)
        assert abs(counts[i] / n - p[i]) < FREQ_SIGMA * sigma


def test_multinomial_validates_inputs():
    rng = np.random.default_rng(0)
    with pytest.raises(InvalidProbabilitiesError):
        sample_multinomial(np.array([0.5, 0.6]), 10, rng)
    with pytest.raises(InvalidProbabilitiesError):
        sample_multinomial(np.array([-0.1, 1.1]), 10, rng)
    with pytest.raises(InvalidProbabilitiesError):
        sample_multinomial(np.array([]), 10, rng)
    with pytest.raises(ValidationError):
        sample_multinomial(np.array([0.5, 0.5]), 0, rng)


def test_builtin_scenarios_inventory():
    scenarios = builtin_scenarios()
    assert len(scenarios) == 8
    by_name = {s.name: s for s in scenarios}
    for name in SINGLE_NAMES:
        assert by_name[name].kind is ScenarioKind.SINGLE
        assert by_name[name].r == 3
        assert by_name[name].description
    for name in PAIRED_NAMES:
        assert by_name[name].kind is ScenarioKind.PAIRED
        assert by_name[name].r == 3
        assert by_name[name].description


def test_builtin_truth_cells_are_exact_fractions():
    truth = scenario_by_name("single-1").truth
    assert np.array_equal(
        truth.pi, np.array([[28, 2, 3], [3, 28, 2], [2, 3, 29]]) / 100.0)
    cube = scenario_by_name("paired-1").truth.pi
    assert math.isclose(float(cube.sum()), 1.0, abs_tol=EXACT_TOL)
    assert math.isclose(float(cube[0, 0, 0]), 40.0 / 300.0, abs_tol=EXACT_TOL)


def test_scenario_rejects_tampered_true_value():
    truth = scenario_by_name("single-1").truth
    with pytest.raises(ValidationError):
        Scenario("tampered", ScenarioKind.SINGLE, truth, 0.5, 0.775,
                 0.7749774977497751)


def test_scenario_rejects_mismatched_table_kind():
    truth = scenario_by_name("single-1").truth
    with pytest.raises(ValidationError):
        Scenario("bad-kind", ScenarioKind.PAIRED, truth, 0.0, 0.0, 0.0)


def test_scenario_by_name_rejects_unknown():
    with pytest.raises(ValidationError):
        scenario_by_name("single-9")


def test_grid_rows_equal_separate_runs():
    scenario = scenario_by_name("single-1")
    cells = [(MetricKind.MACRO, CIMethod.WALD), (MetricKind.MICRO, CIMethod.FISHER_Z)]
    grid = run_coverage_grid(scenario, 50, 300, cells, seed=5)
    for (metric, method), row in zip(cells, grid):
        single = run_coverage(scenario, 50, 300, metric, method, seed=5)
        assert single == row


def test_policies_share_counts_and_differ_only_in_denominator():
    scenario = scenario_by_name("single-3")
    kwargs = dict(n=20, reps=500, kind=MetricKind.MACRO,
                  ci_method=CIMethod.WALD, seed=3)
    miss = run_coverage(scenario, policy=DegeneracyPolicy.COUNT_AS_MISS, **kwargs)
    excl = run_coverage(scenario, policy=DegeneracyPolicy.EXCLUDE, **kwargs)
    assert miss.degenerate > 0
    assert miss.covered == excl.covered
    assert miss.degenerate == excl.degenerate
    assert math.isclose(miss.coverage, miss.covered / 500, abs_tol=EXACT_TOL)
    assert math.isclose(excl.coverage, excl.covered / (500 - excl.degenerate),
                        abs_tol=EXACT_TOL)
    assert miss.mean_width == excl.mean_width


def test_tiny_alpha_covers_everything():
    result = run_coverage(scenario_by_name("single-1"), 400, 200,
                          MetricKind.MICRO_STAR, CIMethod.WALD, alpha=1e-6,
                          seed=2, policy=DegeneracyPolicy.EXCLUDE)
    assert result.coverage == 1.0


def test_worker_partition_does_not_change_results():
    scenario = scenario_by_name("single-1")
    cells = [(m, c) for m in MetricKind
             for c in (CIMethod.WALD, CIMethod.FISHER_Z)]
    serial = run_coverage_grid(scenario, 50, 200, cells, seed=11, workers=1)
    forked = run_coverage_grid(scenario, 50, 200, cells, seed=11, workers=3)
    for a, b in zip(serial, forked):
        assert a == b


def test_all_degenerate_replicates_yield_nan_under_exclude():
    result = run_coverage(scenario_by_name("single-1"), 1, 10,
                          MetricKind.MACRO, CIMethod.WALD, seed=1,
                          policy=DegeneracyPolicy.EXCLUDE)
    assert result.degenerate == 10
    assert math.isnan(result.coverage)
    assert math.isnan(result.mean_width)


def test_small_sample_degeneracy_never_aborts():
    result = run_coverage(scenario_by_name("single-3"), 8, 50,
                          MetricKind.MACRO, CIMethod.FISHER_Z, seed=4)
    assert result.degenerate > 0
    assert result.covered <= result.reps - result.degenerate


def test_grid_validates_arguments():
    single = scenario_by_name("single-1")
    paired = scenario_by_name("paired-1")
    cell = [(MetricKind.MACRO, CIMethod.WALD)]
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 50, 0, cell)
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 0, 10, cell)
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 50, 10, cell, seed=-1)
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 50, 10, cell, policy="exclude")
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 50, 10, [])
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 50, 10, [(MetricKind.MACRO, CIMethod.WALD_DIFF)])
    with pytest.raises(ValidationError):
        run_coverage_grid(paired, 50, 10, [(MetricKind.MACRO, CIMethod.FISHER_Z)])
    with pytest.raises(ValidationError):
        run_coverage_grid(single, 50, 10, [("mam", CIMethod.WALD)])


def test_coverage_result_validates_consistency():
    with pytest.raises(ValidationError):
        CoverageResult("x", 50, 100, MetricKind.MACRO, CIMethod.WALD, 0.05,
                       covered=90, degenerate=0, coverage=0.5, mean_width=0.1,
                       seed=0, policy=DegeneracyPolicy.COUNT_AS_MISS)


def test_coverage_report_layout():
    assert len(coverage_report([]).splitlines()) == 2
    result = run_coverage(scenario_by_name("single-2"), 50, 40,
                          MetricKind.MICRO, CIMethod.WALD, seed=8)
    report = coverage_report([result])
    lines = report.splitlines()
    assert lines[0].split() == ["scenario", "n", "reps", "metric", "ci",
                                "alpha", "coverage", "mean-width",
                                "degenerate", "seed", "policy"]
    row = lines[2].split()
    assert row[0] == "single-2"
    assert row[3] == "mim"
    assert row[6] == f"{result.coverage:.4f}"


def test_paired_coverage_smoke():
    result = run_coverage(scenario_by_name("paired-2"), 60, 80,
                          MetricKind.MICRO, CIMethod.G_TRANSFORM, seed=6)
    assert 0.5 < result.coverage <= 1.0
