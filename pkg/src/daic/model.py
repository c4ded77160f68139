"""One-hidden-layer ReLU network trained with momentum SGD on cross-entropy."""

from __future__ import annotations

import hashlib
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .dataset import Example, LabeledSet
from .exceptions import ConsistencyError, DivergenceError, FormatError, ParameterError

N_CLASSES = 10
HIDDEN = 128


@dataclass(frozen=True, eq=False)
class NetworkParams:
    W1: np.ndarray
    b1: np.ndarray
    W2: np.ndarray
    b2: np.ndarray
    init_seed: int = 0

    def __post_init__(self):
        for name in ("W1", "b1", "W2", "b2"):
            a = np.array(getattr(self, name), dtype=np.float64, copy=True)
            if not np.all(np.isfinite(a)):
                raise ParameterError(f"{name} holds non-finite values")
            a.setflags(write=False)
            object.__setattr__(self, name, a)
        d, h = self.W1.shape
        if self.b1.shape != (h,) or self.W2.shape[0] != h or self.b2.shape != (self.W2.shape[1],):
            raise ConsistencyError("layer shapes do not chain")

    @property
    def architecture(self):
        return (self.W1.shape[0], self.W1.shape[1], self.W2.shape[1])

    @property
    def fingerprint(self):
        """Content hash; invariants built for one network refuse to judge another."""
        h = hashlib.sha1()
        for a in (self.W1, self.b1, self.W2, self.b2):
            h.update(np.ascontiguousarray(a).tobytes())
        return h.hexdigest()[:16]

    def copy_arrays(self):
        return [self.W1.copy(), self.b1.copy(), self.W2.copy(), self.b2.copy()]


def init_params(n_inputs, n_hidden=HIDDEN, n_outputs=N_CLASSES, seed=0) -> NetworkParams:
    """Uniform weights scaled by fan-in, zero biases."""
    rng = np.random.default_rng(seed)
    lim1 = np.sqrt(6.0 / n_inputs)
    lim2 = np.sqrt(6.0 / n_hidden)
    return NetworkParams(
        rng.uniform(-lim1, lim1, (n_inputs, n_hidden)),
        np.zeros(n_hidden),
        rng.uniform(-lim2, lim2, (n_hidden, n_outputs)),
        np.zeros(n_outputs),
        init_seed=seed,
    )


def softmax(z):
    z = z - z.max(axis=1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=1, keepdims=True)


def forward(params, X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != params.W1.shape[0]:
        raise ParameterError(f"input has {X.shape[1]} features, network expects {params.W1.shape[0]}")
    hidden = np.maximum(X @ params.W1 + params.b1, 0.0)
    return softmax(hidden @ params.W2 + params.b2)


def loss_and_grad(weights, X, y):
    """Mean cross-entropy and its gradient for ``weights = [W1, b1, W2, b2]``."""
    W1, b1, W2, b2 = weights
    n = len(X)
    pre = X @ W1 + b1
    hidden = np.maximum(pre, 0.0)
    proba = softmax(hidden @ W2 + b2)
    loss = -np.mean(np.log(np.clip(proba[np.arange(n), y], 1e-300, None)))
    delta = proba.copy()
    delta[np.arange(n), y] -= 1.0
    delta /= n
    gW2 = hidden.T @ delta
    gb2 = delta.sum(axis=0)
    dh = (delta @ W2.T) * (pre > 0)
    gW1 = X.T @ dh
    gb1 = dh.sum(axis=0)
    return loss, [gW1, gb1, gW2, gb2]


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 32
    learning_rate: float = 0.01
    momentum: float = 0.9
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 1:
            raise ParameterError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ParameterError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.learning_rate > 0:
            raise ParameterError(f"learning_rate must be positive, got {self.learning_rate}")
        if not 0 <= self.momentum < 1:
            raise ParameterError(f"momentum must lie in [0, 1), got {self.momentum}")


class MLPClassifier(ClassifierMixin, BaseEstimator):
    """784-128-10 style classifier with a fixed ten-class output.

    ``warm_start=True`` continues from the current weights on the next
    :meth:`fit`; ``fit(..., init=params)`` continues from explicit weights.

    Attributes
    ----------
    params_ : NetworkParams
    loss_curve_ : list of float
        Mean training loss per epoch.
    """

    def __init__(
        self, hidden=HIDDEN, epochs=30, batch_size=32, learning_rate=0.01, momentum=0.9, random_state=0, warm_start=False
    ):
        self.hidden = hidden
        self.epochs = epochs
        self.batch_size = batch_size
        self.learning_rate = learning_rate
        self.momentum = momentum
        self.random_state = random_state
        self.warm_start = warm_start

    def fit(self, X, y, init=None):
        X, y = check_X_y(X, y, dtype=np.float64)
        if len(X) == 0:
            raise ParameterError("cannot train on an empty dataset")
        y = y.astype(np.int64)
        if y.min() < 0 or y.max() >= N_CLASSES:
            raise ParameterError("labels must lie in 0..9")
        TrainConfig(self.epochs, self.batch_size, self.learning_rate, self.momentum, self.random_state)
        if init is None and self.warm_start and hasattr(self, "params_"):
            init = self.params_
        if init is None:
            init = init_params(X.shape[1], self.hidden, N_CLASSES, self.random_state)
        elif init.architecture != (X.shape[1], self.hidden, N_CLASSES):
            raise ParameterError(f"initial weights have architecture {init.architecture}")

        weights = init.copy_arrays()
        velocity = [np.zeros_like(w) for w in weights]
        rng = np.random.default_rng(self.random_state)
        self.loss_curve_ = []
        n = len(X)
        for epoch in range(1, self.epochs + 1):
            order = rng.permutation(n)
            total = 0.0
            for start in range(0, n, self.batch_size):
                idx = order[start : start + self.batch_size]
                loss, grads = loss_and_grad(weights, X[idx], y[idx])
                if not np.isfinite(loss):
                    raise DivergenceError(f"training loss became non-finite in epoch {epoch}")
                total += loss * len(idx)
                for w, v, g in zip(weights, velocity, grads):
                    v *= self.momentum
                    v -= self.learning_rate * g
                    w += v
            self.loss_curve_.append(total / n)
        if not all(np.all(np.isfinite(w)) for w in weights):
            raise DivergenceError(f"weights became non-finite in epoch {self.epochs}")
        self.params_ = NetworkParams(*weights, init_seed=init.init_seed)
        self.classes_ = np.arange(N_CLASSES)
        self.n_features_in_ = X.shape[1]
        return self

    def predict_proba(self, X):
        check_is_fitted(self, "params_")
        X = check_array(X, dtype=np.float64)
        return forward(self.params_, X)

    def predict(self, X):
        return self.predict_proba(X).argmax(axis=1)


@dataclass(frozen=True)
class Prediction:
    label: int
    confidence: float
    last_layer: np.ndarray
    model_id: str | None = None


@dataclass(frozen=True, eq=False)
class Predictions:
    """Predictions for a whole batch, stored column-wise."""

    labels: np.ndarray
    confidence: np.ndarray
    last_layer: np.ndarray
    model_id: str | None = None

    @classmethod
    def from_proba(cls, proba, model_id=None):
        labels = proba.argmax(axis=1)
        return cls(labels, proba[np.arange(len(proba)), labels], proba, model_id)

    def __len__(self):
        return len(self.labels)

    def __getitem__(self, i) -> Prediction:
        return Prediction(int(self.labels[i]), float(self.confidence[i]), self.last_layer[i], self.model_id)

    def __iter__(self):
        return (self[i] for i in range(len(self)))


def train(data: LabeledSet, cfg: TrainConfig = TrainConfig(), init: NetworkParams | None = None) -> NetworkParams:
    if len(data) == 0:
        raise ParameterError("cannot train on an empty dataset")
    clf = MLPClassifier(
        epochs=cfg.epochs,
        batch_size=cfg.batch_size,
        learning_rate=cfg.learning_rate,
        momentum=cfg.momentum,
        random_state=cfg.seed,
    )
    return clf.fit(data.pixels, data.labels, init=init).params_


def predict(params: NetworkParams, x: Example | np.ndarray) -> Prediction:
    pixels = x.pixels if isinstance(x, Example) else x
    pixels = np.asarray(pixels, dtype=np.float64)
    if pixels.ndim != 1:
        raise ParameterError("predict takes a single example; use predict_batch")
    return predict_batch(params, pixels[None, :])[0]


def predict_batch(params: NetworkParams, X) -> Predictions:
    if isinstance(X, LabeledSet):
        X = X.pixels
    return Predictions.from_proba(forward(params, X), params.fingerprint)


def accuracy(params: NetworkParams, data: LabeledSet) -> float:
    if len(data) == 0:
        raise ParameterError("accuracy of an empty set is undefined")
    return float(np.mean(predict_batch(params, data.pixels).labels == data.labels))


def save_params(params: NetworkParams, path):
    """Little-endian int32 header (layers, inputs, hidden, outputs) then float64 weights."""
    d, h, k = params.architecture
    with open(path, "wb") as fh:
        fh.write(struct.pack("<4i", 2, d, h, k))
        for a in (params.W1, params.b1, params.W2, params.b2):
            fh.write(a.astype("<f8").tobytes())


def load_params(path) -> NetworkParams:
    raw = Path(path).read_bytes()
    if len(raw) < 16:
        raise FormatError(f"{path}: missing architecture header")
    layers, d, h, k = struct.unpack("<4i", raw[:16])
    if layers != 2:
        raise FormatError(f"{path}: expected 2 layers, header says {layers}")
    sizes = [d * h, h, h * k, k]
    if len(raw) != 16 + 8 * sum(sizes):
        raise FormatError(f"{path}: payload size does not match header {d}-{h}-{k}")
    flat = np.frombuffer(raw, dtype="<f8", offset=16)
    parts = np.split(flat, np.cumsum(sizes)[:-1])
    return NetworkParams(parts[0].reshape(d, h), parts[1], parts[2].reshape(h, k), parts[3])
