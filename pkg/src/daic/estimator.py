"""Offline accuracy assessment by two-phase unequal-probability sampling.

Half of the labelling budget is spent on a simple random sample, the other
half on a sequential probability-proportional-to-size draw that favours
low-confidence predictions (likely failures).  A ratio estimator weighted by
inverse inclusion probabilities undoes the over-representation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from .exceptions import ConsistencyError, ParameterError, StateError
from .model import Predictions


INCLUSION_RULES = ("successive", "linear")


@dataclass(frozen=True)
class SamplingPlan:
    n: int = 500
    random_fraction: float = 0.5
    weight_floor: float = 1e-6
    seed: int = 0
    inclusion: str = "successive"

    def __post_init__(self):
        if self.inclusion not in INCLUSION_RULES:
            raise ParameterError(f"inclusion must be one of {INCLUSION_RULES}, got {self.inclusion!r}")
        if self.n < 1:
            raise ParameterError(f"sample budget must be positive, got {self.n}")
        # 1.0 is accepted: the weighted phase is then empty (plain SRS)
        if not 0 < self.random_fraction <= 1:
            raise ParameterError(f"random_fraction must lie in (0, 1], got {self.random_fraction}")
        if not self.weight_floor > 0:
            raise ParameterError("weight_floor must be positive")


@dataclass(frozen=True)
class SampledUnit:
    index: int
    inclusion_prob: float
    predicted_label: int
    phase: int = 1
    true_label: int | None = None
    correct: bool | None = None

    @property
    def labeled(self):
        return self.true_label is not None


@dataclass(frozen=True)
class AccuracyEstimate:
    point: float
    n_labeled: int
    stderr_proxy: float


def compute_weights(preds, weight_floor=1e-6):
    """Sampling weight ``1 - confidence + floor`` per prediction."""
    conf = preds.confidence if isinstance(preds, Predictions) else np.array([p.confidence for p in preds], dtype=float)
    if len(conf) == 0:
        raise ParameterError("no predictions to weight")
    return (1.0 - np.asarray(conf, dtype=np.float64)) + weight_floor


def sequential_pps(weights, k, rng):
    """Draw ``k`` distinct indices one at a time with probability proportional to weight.

    Uses exponential race keys: the ``k`` smallest ``E_i / w_i`` with
    ``E_i ~ Exp(1)`` have the same law as ``k`` successive weighted draws
    without replacement.
    """
    weights = np.asarray(weights, dtype=np.float64)
    if k > len(weights):
        raise ParameterError(f"cannot draw {k} distinct units from {len(weights)}")
    if k == 0:
        return np.empty(0, dtype=np.int64)
    keys = rng.exponential(size=len(weights)) / weights
    return np.argsort(keys, kind="stable")[:k]


def inclusion_probabilities(weights, n1, n2, rule="successive"):
    """Approximate first-order inclusion probabilities of the two-phase design.

    ``linear``: ``min(1, n1/N + n2 * w_i / W)``.  Overstates the chance of
    heavy units once the weighted phase draws a sizeable share of the
    remainder, which biases the ratio estimate upwards.

    ``successive``: ``n1/N + (1 - n1/N) * (1 - exp(-lam * w_i))`` with ``lam``
    chosen so the phase-two probabilities add up to ``n2`` over the expected
    remainder.  This is the usual large-population approximation for
    successive (sequential PPS) sampling.
    """
    w = np.asarray(weights, dtype=np.float64)
    N = len(w)
    p1 = n1 / N
    if rule == "linear":
        return np.minimum(1.0, p1 + n2 * w / w.sum())
    if n2 == 0:
        return np.full(N, p1)
    target = n2 / (1.0 - p1)
    hi = 1.0
    while np.sum(-np.expm1(-hi * w)) < target:
        hi *= 2.0
    lam = brentq(lambda lam: np.sum(-np.expm1(-lam * w)) - target, 0.0, hi, xtol=1e-14, rtol=1e-12)
    return np.minimum(1.0, p1 + (1.0 - p1) * -np.expm1(-lam * w))


def draw_sample(batch, preds, plan: SamplingPlan) -> list[SampledUnit]:
    """Select units to label.

    Phase one draws ``round(n * p)`` units uniformly; phase two draws the
    remaining budget from the rest by sequential PPS.  Units carry the
    inclusion probability given by :func:`inclusion_probabilities`.  A budget
    at or above the population size degenerates to a census with
    probability one.
    """
    N = len(batch)
    if len(preds) != N:
        raise ConsistencyError(f"{N} inputs but {len(preds)} predictions")
    labels = preds.labels if isinstance(preds, Predictions) else np.array([p.label for p in preds])
    if plan.n >= N:
        return [SampledUnit(i, 1.0, int(labels[i])) for i in range(N)]

    rng = np.random.default_rng(plan.seed)
    w = compute_weights(preds, plan.weight_floor)
    n1 = int(round(plan.n * plan.random_fraction))
    n2 = plan.n - n1
    first = rng.choice(N, size=n1, replace=False)
    rest = np.setdiff1d(np.arange(N), first)
    second = rest[sequential_pps(w[rest], n2, rng)]

    pi = inclusion_probabilities(w, n1, n2, plan.inclusion)
    units = [SampledUnit(int(i), float(pi[i]), int(labels[i]), 1) for i in first]
    units += [SampledUnit(int(i), float(pi[i]), int(labels[i]), 2) for i in second]
    return units


def label_units(units: Sequence[SampledUnit], truth) -> list[SampledUnit]:
    """Attach ground truth from ``truth`` (array or mapping indexed by unit index)."""
    out = []
    for u in units:
        try:
            y = truth[u.index]
        except (IndexError, KeyError):
            raise ConsistencyError(f"no ground truth for unit {u.index}") from None
        y = int(y)
        out.append(replace(u, true_label=y, correct=u.predicted_label == y))
    return out


def estimate_accuracy(units: Sequence[SampledUnit]) -> AccuracyEstimate:
    """Ratio (Hajek) estimate ``sum(c/pi) / sum(1/pi)``."""
    if not units:
        raise ParameterError("no sampled units")
    if any(not u.labeled for u in units):
        raise StateError("every sampled unit must be labelled before estimation")
    pi = np.array([u.inclusion_prob for u in units], dtype=np.float64)
    if np.any(pi <= 0):
        raise ParameterError("inclusion probabilities must be positive")
    correct = np.array([u.correct for u in units], dtype=np.float64)
    w = 1.0 / pi
    point = float(np.sum(w * correct) / np.sum(w))
    n = len(units)
    if n > 1:
        resid = (w / w.mean()) * (correct - point)
        stderr = float(np.std(resid, ddof=1) / math.sqrt(n))
    else:
        stderr = 0.0
    return AccuracyEstimate(point, n, stderr)


def assess(batch, preds, truth, plan: SamplingPlan):
    """Draw, label and estimate in one go; returns ``(estimate, labelled units)``."""
    units = label_units(draw_sample(batch, preds, plan), truth)
    return estimate_accuracy(units), units
