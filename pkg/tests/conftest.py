import numpy as np
import pytest

from daic.dataset import bundled_mnist_paths, load_idx, make_splits, synth_generate
from daic.model import TrainConfig, train


@pytest.fixture(scope="session")
def mnist_pool():
    return load_idx(*bundled_mnist_paths())


@pytest.fixture(scope="session")
def mnist_splits(mnist_pool):
    return make_splits(mnist_pool, seed=1)


@pytest.fixture(scope="session")
def mnist_network(mnist_splits):
    train_set, _, _ = mnist_splits
    return train(train_set, TrainConfig(seed=1))


@pytest.fixture(scope="session")
def synth_pool():
    return synth_generate(2000, n_classes=10, noise=0.45, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE_LINES

    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for number in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[number])
