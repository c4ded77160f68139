"""Data invariants mined as C4.5-style decision rules over coarse binary pixels.

Pixels are average-pooled 2x2 and thresholded at 0.5, so a 28x28 digit
becomes 196 binary cells.  A gain-ratio tree separates inputs the network
got wrong (``fail``) from the rest; each root-to-leaf path ending in a
high-confidence, well-supported ``fail`` leaf becomes a rule.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from ..exceptions import ParameterError

MIN_CONFIDENCE = 0.99
MIN_SUPPORT = 10


def binarize(X, pool=2, threshold=0.5):
    """Average-pool square images by ``pool`` and threshold into booleans."""
    X = np.asarray(X, dtype=np.float64)
    side = math.isqrt(X.shape[1])
    if side * side != X.shape[1] or side % pool:
        raise ParameterError(f"{X.shape[1]} features do not form a square image divisible by {pool}")
    g = side // pool
    pooled = X.reshape(len(X), g, pool, g, pool).mean(axis=(2, 4))
    return pooled.reshape(len(X), g * g) > threshold


def _entropy(p):
    p = np.clip(p, 0.0, 1.0)
    with np.errstate(divide="ignore", invalid="ignore"):
        h = -(p * np.log2(p) + (1 - p) * np.log2(1 - p))
    return np.nan_to_num(h)


@dataclass(frozen=True)
class DataRule:
    conditions: tuple  # ((cell_index, 0 or 1), ...)
    confidence: float
    support: int
    grid_side: int = 14
    model_id: str | None = None

    def matches(self, Xbin):
        Xbin = np.asarray(Xbin, dtype=bool)
        hit = np.ones(len(Xbin), dtype=bool)
        for feature, value in self.conditions:
            hit &= Xbin[:, feature] == bool(value)
        return hit

    def evaluate(self, Xbin, fail):
        """Re-measure (confidence, support) on a labelled extraction set."""
        hit = self.matches(Xbin)
        support = int(hit.sum())
        confidence = float(np.asarray(fail, dtype=bool)[hit].mean()) if support else 0.0
        return confidence, support

    def to_text(self):
        body = " & ".join(f"px({f // self.grid_side},{f % self.grid_side})={int(v)}" for f, v in self.conditions)
        return f"fail :- {body or 'true'} [conf={self.confidence:.3f}, supp={self.support}]"


def filter_rules(candidates, min_confidence=MIN_CONFIDENCE, min_support=MIN_SUPPORT):
    return [r for r in candidates if r.confidence >= min_confidence and r.support >= min_support]


class GainRatioTree(ClassifierMixin, BaseEstimator):
    """Binary-feature decision tree grown with the C4.5 gain-ratio criterion.

    As in C4.5, only attributes whose information gain reaches the average
    gain of the admissible attributes compete on gain ratio.  Both children
    must hold at least ``min_samples_leaf`` examples.  No pruning.
    """

    def __init__(self, max_depth=12, min_samples_leaf=10):
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf

    def fit(self, X, y):
        X, y = check_X_y(X, y, dtype=None)
        X = X.astype(bool)
        y = np.asarray(y).astype(bool)
        self.classes_ = np.array([False, True])
        self.n_features_in_ = X.shape[1]
        # node table; children index -1 marks a leaf
        self.feature_, self.left_, self.right_, self.n_samples_, self.n_positive_ = [], [], [], [], []
        self._grow(X, y, np.arange(len(y)), depth=0)
        for name in ("feature_", "left_", "right_", "n_samples_", "n_positive_"):
            setattr(self, name, np.asarray(getattr(self, name), dtype=np.int64))
        return self

    def _new_node(self, n, pos):
        self.feature_.append(-1)
        self.left_.append(-1)
        self.right_.append(-1)
        self.n_samples_.append(n)
        self.n_positive_.append(pos)
        return len(self.feature_) - 1

    def _best_split(self, Xs, ys):
        n = len(ys)
        n1 = Xs.sum(axis=0)
        n0 = n - n1
        pos = ys.sum()
        p1 = ys.astype(np.float64) @ Xs
        p0 = pos - p1
        ok = (n0 >= self.min_samples_leaf) & (n1 >= self.min_samples_leaf)
        if not ok.any():
            return None
        with np.errstate(divide="ignore", invalid="ignore"):
            cond = (n0 * _entropy(p0 / np.maximum(n0, 1)) + n1 * _entropy(p1 / np.maximum(n1, 1))) / n
        gain = _entropy(pos / n) - cond
        gain = np.where(ok, gain, -np.inf)
        positive = ok & (gain > 1e-12)
        if not positive.any():
            return None
        eligible = positive & (gain >= gain[positive].mean() - 1e-12)
        ratio = np.where(eligible, gain / np.maximum(_entropy(n1 / n), 1e-12), -np.inf)
        return int(np.argmax(ratio))

    def _grow(self, X, y, idx, depth):
        ys = y[idx]
        node = self._new_node(len(idx), int(ys.sum()))
        if depth >= self.max_depth or ys.all() or not ys.any() or len(idx) < 2 * self.min_samples_leaf:
            return node
        feature = self._best_split(X[idx], ys)
        if feature is None:
            return node
        mask = X[idx, feature]
        self.feature_[node] = feature
        self.left_[node] = self._grow(X, y, idx[~mask], depth + 1)
        self.right_[node] = self._grow(X, y, idx[mask], depth + 1)
        return node

    def apply(self, X):
        check_is_fitted(self, "feature_")
        X = check_array(X, dtype=None).astype(bool)
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            inner = self.feature_[node] >= 0
            if not inner.any():
                return node
            rows = np.flatnonzero(inner)
            go_right = X[rows, self.feature_[node[rows]]]
            node[rows] = np.where(go_right, self.right_[node[rows]], self.left_[node[rows]])

    def predict_proba(self, X):
        leaf = self.apply(X)
        p = self.n_positive_[leaf] / self.n_samples_[leaf]
        return np.column_stack([1 - p, p])

    def predict(self, X):
        return self.predict_proba(X)[:, 1] > 0.5

    def leaf_paths(self):
        """Yield ``(conditions, n_samples, n_positive)`` for every leaf."""
        stack = [(0, ())]
        while stack:
            node, conds = stack.pop()
            if self.feature_[node] < 0:
                yield conds, int(self.n_samples_[node]), int(self.n_positive_[node])
                continue
            f = int(self.feature_[node])
            stack.append((int(self.right_[node]), conds + ((f, 1),)))
            stack.append((int(self.left_[node]), conds + ((f, 0),)))


class DataRuleMiner(BaseEstimator):
    """Learn failure rules from raw pixels and a fail/pass target.

    Attributes
    ----------
    rules_ : list of DataRule
        Retained rules, ordered by decreasing support.
    candidates_ : list of DataRule
        Every fail-majority leaf before confidence/support filtering.
    """

    def __init__(
        self,
        min_confidence=MIN_CONFIDENCE,
        min_support=MIN_SUPPORT,
        max_depth=12,
        min_samples_leaf=10,
        pool=2,
        threshold=0.5,
    ):
        self.min_confidence = min_confidence
        self.min_support = min_support
        self.max_depth = max_depth
        self.min_samples_leaf = min_samples_leaf
        self.pool = pool
        self.threshold = threshold

    def transform(self, X):
        return binarize(X, self.pool, self.threshold)

    def fit(self, X, fail, model_id=None):
        Xbin = self.transform(X)
        fail = np.asarray(fail, dtype=bool)
        grid = math.isqrt(Xbin.shape[1])
        self.model_id_ = model_id
        self.candidates_ = []
        if fail.any():
            tree = GainRatioTree(self.max_depth, self.min_samples_leaf).fit(Xbin, fail)
            self.tree_ = tree
            for conds, n, pos in tree.leaf_paths():
                if 2 * pos > n:
                    self.candidates_.append(DataRule(conds, pos / n, n, grid, model_id))
        self.rules_ = sorted(
            filter_rules(self.candidates_, self.min_confidence, self.min_support), key=lambda r: -r.support
        )
        return self

    def predict(self, X):
        """True where at least one retained rule fires."""
        check_is_fitted(self, "rules_")
        Xbin = self.transform(X)
        fired = np.zeros(len(Xbin), dtype=bool)
        for rule in self.rules_:
            fired |= rule.matches(Xbin)
        return fired

    def to_text(self):
        check_is_fitted(self, "rules_")
        return "\n".join(r.to_text() for r in self.rules_)
