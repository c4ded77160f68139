"""End-to-end acceptance checks on the bundled MNIST subset.

Each test covers one criterion and records a PASS/FAIL line that is printed
in the terminal summary.  The full experiments take about a minute each.
"""

import time

import numpy as np
import pytest

from daic.config import build_config
from daic.cycle import run_experiment
from daic.estimator import SamplingPlan, assess
from daic.results import write_records
from helpers import finite_difference_check, monte_carlo_estimates, report, rule_violations, synthetic_population

pytestmark = pytest.mark.slow


def timed(config, **kw):
    start = time.perf_counter()
    records = run_experiment(config, **kw)
    return records, time.perf_counter() - start


def by_cycle(records, cycle):
    return [r for r in records if r.cycle == cycle]


def mean(records, field):
    return float(np.mean([getattr(r, field) for r in records]))


@pytest.fixture(scope="module")
def dnn_os_run(mnist_pool):
    return timed(build_config({}), pool=mnist_pool)


@pytest.fixture(scope="module")
def baseline_run(mnist_pool):
    return timed(build_config({"oracle_mode": "baseline"}), pool=mnist_pool)


def test_nominal_tracking(mnist_pool):
    records, seconds = timed(build_config({"cycles": 3}), pool=mnist_pool)
    quiet_reps = sum(not any(r.triggered for r in records if r.repetition == rep) for rep in range(1, 6))
    gaps = [abs(mean(by_cycle(records, c), "predicted_acc") - mean(by_cycle(records, c), "actual_acc")) for c in (1, 2, 3)]
    ok = quiet_reps >= 4 and max(gaps) <= 0.05 and seconds <= 120
    detail = f"untriggered reps {quiet_reps}/5, max |predicted-actual| {max(gaps):.3f}, {seconds:.0f}s"
    assert report(1, "nominal tracking", ok, detail), detail


def test_shift_detection(dnn_os_run):
    cycle4 = by_cycle(dnn_os_run[0], 4)
    actual = mean(cycle4, "actual_acc")
    fired = [r for r in cycle4 if r.triggered]
    worst = max((abs(r.estimated_acc - r.actual_acc) for r in fired), default=float("inf"))
    ok = abs(actual - 0.70) <= 0.07 and len(fired) >= 4 and worst <= 0.05
    detail = f"actual {actual:.3f}, triggered {len(fired)}/5, max |estimated-actual| {worst:.3f}"
    assert report(2, "shift detection", ok, detail), detail


def test_baseline_blindness(baseline_run):
    records = baseline_run[0]
    post = [r for r in records if r.cycle >= 4]
    n_triggered = sum(r.triggered for r in records)
    low_pred = min(r.predicted_acc for r in post)
    high_actual = max(r.actual_acc for r in post)
    ok = n_triggered == 0 and low_pred >= 0.84 and high_actual <= 0.77
    detail = f"triggers {n_triggered}, post-shift predicted >= {low_pred:.3f}, actual <= {high_actual:.3f}"
    assert report(3, "baseline blindness", ok, detail), detail


def test_recovery(dnn_os_run):
    records, seconds = dnn_os_run
    floor = mean(by_cycle(records, 4), "actual_acc") + 0.10
    late = {c: mean(by_cycle(records, c), "actual_acc") for c in (7, 8)}
    late_triggers = [(r.repetition, r.cycle) for r in records if r.cycle >= 7 and r.triggered]
    ok = min(late.values()) >= floor and not late_triggers and seconds <= 600
    detail = (
        f"actual c7 {late[7]:.3f}, c8 {late[8]:.3f} vs floor {floor:.3f}, "
        f"triggers at (rep, cycle) {late_triggers or 'none'}, full run {seconds:.0f}s"
    )
    assert report(4, "recovery", ok, detail), detail


def test_estimator_unbiasedness():
    preds, truth = synthetic_population(accuracy=0.70)
    estimates = monte_carlo_estimates(preds, truth, replications=500)
    census, _ = assess(np.arange(1000), preds, truth, SamplingPlan(n=1000))
    srs, units = assess(np.arange(1000), preds, truth, SamplingPlan(random_fraction=1.0, seed=1))
    srs_gap = abs(srs.point - np.mean([u.correct for u in units]))
    ok = abs(estimates.mean() - 0.70) <= 0.02 and census.point == np.mean(preds.labels == truth) and srs_gap <= 1e-12
    detail = f"MC mean {estimates.mean():.4f}, census {census.point:.3f}, SRS gap {srs_gap:.1e}"
    assert report(5, "estimator unbiasedness", ok, detail), detail


def test_rule_filter_soundness(mnist_pool):
    results = [rule_violations(seed, mnist_pool) for seed in range(5)]
    n_rules = sum(n for n, _ in results)
    n_bad = sum(bad for _, bad in results)
    ok = n_bad == 0
    detail = f"{n_rules} rules over 5 seeds, {n_bad} fail re-verification"
    assert report(6, "rule-filter soundness", ok, detail), detail


def test_gradient_check():
    worst = max(finite_difference_check(seed, n_coords=12) for seed in range(3))
    ok = worst < 1e-3
    detail = f"max relative error {worst:.1e} over 12 coordinates x 3 seeds"
    assert report(7, "gradient check", ok, detail), detail


def test_determinism(dnn_os_run, mnist_pool, tmp_path):
    again, _ = timed(build_config({}), pool=mnist_pool)
    write_records(dnn_os_run[0], tmp_path / "a.csv")
    write_records(again, tmp_path / "b.csv")
    ok = (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()
    detail = f"{len(again)} records, CSV bodies {'identical' if ok else 'differ'}"
    assert report(8, "determinism", ok, detail), detail


def test_ground_truth_isolation(dnn_os_run, mnist_pool):
    def relabel(labels):
        return (labels + 3) % 10

    perturbed, _ = timed(build_config({}), pool=mnist_pool, perturb_truth=relabel)
    control = ("triggered", "n_labeled", "policy_applied")
    same_control = all(getattr(a, f) == getattr(b, f) for a, b in zip(dnn_os_run[0], perturbed) for f in control)
    actual_moved = all(a.actual_acc != b.actual_acc for a, b in zip(dnn_os_run[0], perturbed))
    ok = same_control and actual_moved and len(perturbed) == len(dnn_os_run[0])
    detail = f"control columns {'unchanged' if same_control else 'changed'}, actual_acc {'moved' if actual_moved else 'static'}"
    assert report(9, "ground-truth isolation", ok, detail), detail
