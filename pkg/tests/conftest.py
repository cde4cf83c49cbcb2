import numpy as np
import pytest

from chanclust.data import WindowBatch, WindowStream


def make_stream(values, lookback, horizon, batch_size=16, seed=None, span=None):
    span = span if span is not None else range(values.shape[1])
    return WindowStream(np.asarray(values, dtype=float), span, lookback, horizon, batch_size, seed)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def small_config():
    """A fast synthetic CSC setup (6 channels, 2 clusters)."""
    return {
        "strategy": "CSC",
        "synthetic": {"n_channels": 6, "n_clusters": 2, "cluster_periods": [12, 40],
                      "noise_std": 0.1, "length": 800, "seed": 3},
        "lookback": 48,
        "horizon": 12,
        "epochs": 4,
        "batch_size": 64,
        "seed": 7,
    }


def random_batch(rng, batch, d, lookback, horizon):
    x = rng.uniform(-2, 2, size=(batch, d, lookback))
    y = rng.uniform(-2, 2, size=(batch, d, horizon))
    return WindowBatch(x, y, np.arange(batch))


ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
