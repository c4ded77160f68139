"""Shared builders for unit tests and acceptance checks."""

import numpy as np

from daic.dataset import ShiftSpec, apply_shift, make_splits, synth_generate
from daic.estimator import SamplingPlan, assess
from daic.model import Predictions, TrainConfig, init_params, loss_and_grad, predict_batch, train
from daic.oracle import binarize, extract_data_rules


def synthetic_population(n=1000, accuracy=0.70, seed=0):
    """Predictions whose confidence runs high on correct units and lower on wrong ones.

    Returns ``(predictions, truth)`` with exactly ``round(n * accuracy)`` correct units.
    """
    rng = np.random.default_rng(seed)
    labels = rng.integers(0, 10, size=n)
    correct = np.zeros(n, dtype=bool)
    correct[rng.permutation(n)[: round(n * accuracy)]] = True
    conf = np.where(correct, rng.beta(8, 2, size=n), rng.beta(3, 3, size=n))
    conf = np.clip(conf, 0.1, 1.0)
    last = np.tile(((1 - conf) / 9)[:, None], (1, 10))
    last[np.arange(n), labels] = conf
    truth = np.where(correct, labels, (labels + 1) % 10)
    return Predictions(labels, conf, last, None), truth


def monte_carlo_estimates(preds, truth, replications=500, seed=0, **plan_kw):
    seeds = np.random.SeedSequence(seed).generate_state(replications)
    return np.array(
        [assess(np.arange(len(truth)), preds, truth, SamplingPlan(seed=int(s), **plan_kw))[0].point for s in seeds]
    )


def finite_difference_check(seed, n_coords=12, h=1e-4):
    """Central differences on random coordinates of every parameter block."""
    rng = np.random.default_rng(seed)
    data = synth_generate(50, noise=0.3, seed=seed)
    X, y = data.pixels[:5], data.labels[:5]
    weights = init_params(X.shape[1], 16, 10, seed).copy_arrays()
    weights[1] += rng.normal(0, 0.1, weights[1].shape)
    weights[3] += rng.normal(0, 0.1, weights[3].shape)
    _, grads = loss_and_grad(weights, X, y)
    worst = 0.0
    for _ in range(n_coords):
        block = int(rng.integers(len(weights)))
        idx = tuple(int(rng.integers(s)) for s in weights[block].shape)
        orig = weights[block][idx]
        weights[block][idx] = orig + h
        up, _ = loss_and_grad(weights, X, y)
        weights[block][idx] = orig - h
        down, _ = loss_and_grad(weights, X, y)
        weights[block][idx] = orig
        numeric = (up - down) / (2 * h)
        analytic = grads[block][idx]
        denom = max(abs(numeric), abs(analytic), 1e-8)
        worst = max(worst, abs(numeric - analytic) / denom)
    return worst


def rule_violations(seed, mnist_pool):
    """Mine rules where a pre-shift network meets shifted labels; count rules failing a fresh re-check."""
    train_set, _, _ = make_splits(mnist_pool, seed=seed)
    params = train(train_set, TrainConfig(seed=seed))
    extraction = apply_shift(train_set, ShiftSpec())
    rules = extract_data_rules(extraction, params)
    fail = predict_batch(params, extraction.pixels).labels != extraction.labels
    Xbin = binarize(extraction.pixels)
    bad = 0
    for rule in rules:
        conf, supp = rule.evaluate(Xbin, fail)
        bad += not (conf >= 0.99 and supp >= 10)
    return len(rules), bad


# one "criterion N: PASS/FAIL ..." line per acceptance check, printed at session end
ACCEPTANCE_LINES = {}


def report(number, title, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
    return ok
