import numpy as np
import pytest

from daic.dataset import synth_generate
from daic.exceptions import DivergenceError, FormatError, ParameterError
from daic.model import (
    MLPClassifier,
    NetworkParams,
    TrainConfig,
    accuracy,
    init_params,
    load_params,
    predict,
    predict_batch,
    save_params,
    train,
)
from helpers import finite_difference_check


@pytest.mark.parametrize("seed", [0, 1, 2])
def test_gradient_matches_finite_differences(seed):
    assert finite_difference_check(seed) < 1e-3


def test_untrained_zero_input_is_uniform():
    params = init_params(784, seed=0)
    pred = predict(params, np.zeros(784))
    np.testing.assert_allclose(pred.last_layer, np.full(10, 0.1))
    assert pred.confidence == pytest.approx(0.1)


def test_prediction_invariants(mnist_network, mnist_splits):
    _, verification, _ = mnist_splits
    preds = predict_batch(mnist_network, verification)
    np.testing.assert_allclose(preds.last_layer.sum(axis=1), 1.0, atol=1e-6)
    np.testing.assert_array_equal(preds.confidence, preds.last_layer.max(axis=1))
    np.testing.assert_array_equal(preds.confidence, preds.last_layer[np.arange(len(preds)), preds.labels])
    single = predict(mnist_network, verification[3])
    assert single.label == preds.labels[3]
    assert single.model_id == mnist_network.fingerprint


def test_mnist_training_reaches_reported_accuracy(mnist_network, mnist_splits):
    train_set, verification, _ = mnist_splits
    assert accuracy(mnist_network, train_set) >= 0.95
    # reported: 0.861, pattern tolerance 0.07
    assert abs(accuracy(mnist_network, verification) - 0.861) <= 0.07


def test_single_example_is_memorised():
    data = synth_generate(10, noise=0.2, seed=0).subset([0])
    params = train(data, TrainConfig(epochs=200, seed=0))
    assert accuracy(params, data) == 1.0


def test_training_is_deterministic():
    data = synth_generate(200, noise=0.3, seed=0)
    a = train(data, TrainConfig(epochs=3, seed=4))
    b = train(data, TrainConfig(epochs=3, seed=4))
    assert a.fingerprint == b.fingerprint
    c = train(data, TrainConfig(epochs=3, seed=5))
    assert a.fingerprint != c.fingerprint


def test_retraining_continues_from_init():
    data = synth_generate(200, noise=0.3, seed=0)
    first = train(data, TrainConfig(epochs=2, seed=1))
    clf = MLPClassifier(epochs=1, random_state=1).fit(data.pixels, data.labels, init=first)
    fresh = MLPClassifier(epochs=1, random_state=1).fit(data.pixels, data.labels)
    assert clf.loss_curve_[0] < fresh.loss_curve_[0]


def test_warm_start_matches_explicit_init():
    data = synth_generate(100, noise=0.3, seed=0)
    warm = MLPClassifier(epochs=1, random_state=2, warm_start=True)
    warm.fit(data.pixels, data.labels)
    first = warm.params_
    warm.fit(data.pixels, data.labels)
    explicit = MLPClassifier(epochs=1, random_state=2).fit(data.pixels, data.labels, init=first)
    assert warm.params_.fingerprint == explicit.params_.fingerprint


def test_loss_decreases_early_on_synthetic():
    data = synth_generate(500, noise=0.45, seed=0)
    non_increasing = 0
    for seed in range(5):
        curve = MLPClassifier(epochs=5, random_state=seed).fit(data.pixels, data.labels).loss_curve_
        non_increasing += all(b <= a for a, b in zip(curve, curve[1:]))
    assert non_increasing >= 4


def test_sklearn_estimator_surface():
    from sklearn.base import clone

    data = synth_generate(300, noise=0.3, seed=0)
    clf = MLPClassifier(epochs=5, random_state=0)
    assert clone(clf).get_params()["epochs"] == 5
    clf.fit(data.pixels, data.labels)
    assert clf.score(data.pixels, data.labels) > 0.9
    assert clf.predict_proba(data.pixels).shape == (300, 10)


def test_errors():
    empty = synth_generate(10, seed=0).subset(np.array([], dtype=int))
    with pytest.raises(ParameterError):
        train(empty)
    with pytest.raises(ParameterError):
        accuracy(init_params(64), empty)
    with pytest.raises(ParameterError):
        predict(init_params(784), np.zeros(64))
    with pytest.raises(ParameterError):
        TrainConfig(momentum=1.0)
    with pytest.raises(ParameterError):
        TrainConfig(epochs=0)


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_names_epoch():
    data = synth_generate(100, noise=0.3, seed=0)
    with pytest.raises(DivergenceError, match="epoch 1"):
        MLPClassifier(epochs=3, learning_rate=1e300, momentum=0.0).fit(data.pixels, data.labels)


def test_params_round_trip(tmp_path, mnist_network):
    path = tmp_path / "net.bin"
    save_params(mnist_network, path)
    raw = path.read_bytes()
    assert np.frombuffer(raw[:16], dtype="<i4").tolist() == [2, 784, 128, 10]
    assert len(raw) == 16 + 8 * (784 * 128 + 128 + 128 * 10 + 10)
    loaded = load_params(path)
    assert loaded.fingerprint == mnist_network.fingerprint
    path.write_bytes(raw[:-8])
    with pytest.raises(FormatError):
        load_params(path)


def test_params_are_frozen(mnist_network):
    with pytest.raises(ValueError):
        mnist_network.W1[0, 0] = 1.0
    with pytest.raises(ParameterError):
        NetworkParams(np.full((2, 2), np.nan), np.zeros(2), np.zeros((2, 10)), np.zeros(10))
