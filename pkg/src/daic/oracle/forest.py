"""Model invariants: a random forest that predicts network failure from its softmax outputs."""

from __future__ import annotations

import math

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

MAX_SEED = 2**31 - 1


class _GiniTree:
    """CART tree on continuous features with per-split feature subsampling."""

    def __init__(self, max_depth, max_features, min_samples_leaf, rng):
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.rng = rng
        self.feature, self.threshold, self.left, self.right, self.value = [], [], [], [], []

    def fit(self, X, y):
        self._grow(X, y, 0)
        self.feature = np.asarray(self.feature, dtype=np.int64)
        self.threshold = np.asarray(self.threshold, dtype=np.float64)
        self.left = np.asarray(self.left, dtype=np.int64)
        self.right = np.asarray(self.right, dtype=np.int64)
        self.value = np.asarray(self.value, dtype=np.float64)
        return self

    def _split(self, X, y):
        n = len(y)
        best = (np.inf, -1, 0.0)
        features = self.rng.choice(X.shape[1], size=self.max_features, replace=False)
        leaf = self.min_samples_leaf
        for f in features:
            order = np.argsort(X[:, f], kind="stable")
            xs = X[order, f]
            pos_left = np.cumsum(y[order])[:-1]
            n_left = np.arange(1, n)
            n_right = n - n_left
            pos_right = pos_left[-1] + y[order][-1] - pos_left
            gini = (
                2 * pos_left * (1 - pos_left / n_left) + 2 * pos_right * (1 - pos_right / n_right)
            ) / n
            valid = (xs[1:] > xs[:-1]) & (n_left >= leaf) & (n_right >= leaf)
            if not valid.any():
                continue
            gini = np.where(valid, gini, np.inf)
            i = int(np.argmin(gini))
            if gini[i] < best[0]:
                best = (gini[i], int(f), 0.5 * (xs[i] + xs[i + 1]))
        return best

    def _grow(self, X, y, depth):
        node = len(self.feature)
        self.feature.append(-1)
        self.threshold.append(0.0)
        self.left.append(-1)
        self.right.append(-1)
        self.value.append(float(y.mean()))
        if depth >= self.max_depth or y.min() == y.max() or len(y) < 2 * self.min_samples_leaf:
            return node
        impurity, f, thr = self._split(X, y)
        if f < 0 or impurity >= _gini(y) - 1e-12:
            return node
        mask = X[:, f] > thr
        self.feature[node] = f
        self.threshold[node] = thr
        self.left[node] = self._grow(X[~mask], y[~mask], depth + 1)
        self.right[node] = self._grow(X[mask], y[mask], depth + 1)
        return node

    def predict_value(self, X):
        node = np.zeros(len(X), dtype=np.int64)
        while True:
            rows = np.flatnonzero(self.feature[node] >= 0)
            if not len(rows):
                return self.value[node]
            cur = node[rows]
            go_right = X[rows, self.feature[cur]] > self.threshold[cur]
            node[rows] = np.where(go_right, self.right[cur], self.left[cur])


def _gini(y):
    p = y.mean()
    return 2 * p * (1 - p)


class FailureForest(ClassifierMixin, BaseEstimator):
    """Bootstrap forest of gini trees; each tree casts one pass/fail vote.

    Trained on a single class, the forest degenerates to a constant
    predictor of that class.
    """

    def __init__(self, n_estimators=100, max_depth=10, max_features="sqrt", min_samples_leaf=1, random_state=0):
        self.n_estimators = n_estimators
        self.max_depth = max_depth
        self.max_features = max_features
        self.min_samples_leaf = min_samples_leaf
        self.random_state = random_state

    def _n_split_features(self, d):
        if self.max_features == "sqrt":
            return math.ceil(math.sqrt(d))
        if self.max_features is None:
            return d
        return max(1, min(d, int(self.max_features)))

    def fit(self, X, y, model_id=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        y = np.asarray(y).astype(bool)
        self.classes_ = np.array([False, True])
        self.n_features_in_ = X.shape[1]
        self.model_id_ = model_id
        self.estimators_ = []
        self.constant_ = None
        if y.all() or not y.any():
            self.constant_ = bool(y[0]) if len(y) else False
            return self
        rng = np.random.default_rng(self.random_state)
        k = self._n_split_features(X.shape[1])
        yf = y.astype(np.float64)
        n = len(y)
        for _ in range(self.n_estimators):
            boot = rng.integers(0, n, n)
            tree = _GiniTree(self.max_depth, k, self.min_samples_leaf, np.random.default_rng(rng.integers(MAX_SEED)))
            self.estimators_.append(tree.fit(X[boot], yf[boot]))
        return self

    def vote_fraction(self, X):
        """Share of trees voting ``fail`` for each row."""
        check_is_fitted(self, "estimators_")
        X = check_array(X, dtype=np.float64)
        if self.constant_ is not None:
            return np.full(len(X), float(self.constant_))
        votes = np.zeros(len(X))
        for tree in self.estimators_:
            votes += tree.predict_value(X) > 0.5
        return votes / len(self.estimators_)

    def predict_proba(self, X):
        p = self.vote_fraction(X)
        return np.column_stack([1 - p, p])

    def predict(self, X):
        """Majority vote; ties count as pass."""
        return self.vote_fraction(X) > 0.5
