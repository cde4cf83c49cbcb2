import itertools
import re

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from chanclust.core import derive_seeds
from chanclust.data import TimeSeriesDataset, WindowStream, lead_lag_pair, split, standardize
from chanclust.errors import BudgetError, DimensionError, InsufficientDataError, InvalidErrorMatrixError
from chanclust.evaluation import (ChannelGrid, ClusterPartition, ErrorMatrix, adjusted_rand_index,
                                  best_inputs, cluster_stability, cross_channel_grid, evaluate,
                                  gray_for, matrix_svg, normalize_matrix, rand_index, read_matrix_csv,
                                  write_matrix_csv)
from chanclust.strategies import LinearBank, train_epoch

from conftest import make_stream


class Fixed:
    """Model stub returning a constant forecast."""

    def __init__(self, value):
        self.value = value

    def predict(self, x):
        return np.full((x.shape[0], x.shape[1], 2), self.value)


class TestEvaluate:
    def _stream(self, values):
        return make_stream(np.asarray(values, float), 2, 2, 8)

    def test_perfect(self):
        assert evaluate(Fixed(0.0), self._stream(np.zeros((2, 10)))).mse == 0.0

    def test_constant_offset(self):
        r = evaluate(Fixed(1.0), self._stream(np.zeros((2, 10))))
        assert r.mse == 1.0 and r.mae == 1.0

    def test_mixed_errors(self):
        # one window, targets [0, 0], forecast 2 on one channel's both steps
        values = np.zeros((1, 4))
        values[0, 2:] = [-2.0, 2.0]
        r = evaluate(Fixed(0.0), self._stream(values))
        assert r.mse == 4.0 and r.mae == 2.0

    def test_per_channel_means(self):
        values = np.zeros((2, 10))
        values[1] = 3.0
        r = evaluate(Fixed(0.0), self._stream(values))
        np.testing.assert_allclose(r.per_channel_mse, [0.0, 9.0])
        assert r.mse == pytest.approx(r.per_channel_mse.mean())

    def test_empty(self):
        class Empty:
            def __iter__(self):
                return iter(())
        with pytest.raises(InsufficientDataError):
            evaluate(Fixed(0.0), Empty())


class TestErrorMatrixType:
    def test_non_square(self):
        with pytest.raises(InvalidErrorMatrixError):
            ErrorMatrix(np.ones((2, 3)))

    def test_default_names(self):
        assert ErrorMatrix(np.ones((3, 3))).names() == ["ch1", "ch2", "ch3"]


def dataset(values):
    values = np.array(values, float)
    return TimeSeriesDataset(values, [f"c{j}" for j in range(values.shape[0])])


def ci_reference(values, lookback, horizon, epochs, batch, seed):
    """Train a plain CI bank with the same seed derivation as the grid."""
    ds = dataset(values)
    r = split(ds, None, lookback, horizon)
    ds, _, _ = standardize(ds, r.train)
    shuffle_seed, init_seed = derive_seeds(seed)
    bank = LinearBank.init("CI", ds.n_channels, lookback, horizon, np.random.default_rng(init_seed))
    opt = bank.make_optimizer()
    tr = WindowStream(ds.values, r.train, lookback, horizon, batch, shuffle_seed)
    for _ in range(epochs):
        train_epoch(bank, tr, opt)
    te = WindowStream(ds.values, r.test, lookback, horizon, batch)
    return evaluate(bank, te).per_channel_mse


class TestChannelGrid:
    def test_single_channel(self, rng):
        values = rng.normal(size=(1, 300)).cumsum(axis=1)
        out = cross_channel_grid(dataset(values), 16, 4, epochs=2, batch_size=32)
        ci = ci_reference(values, 16, 4, 2, 32, 0)
        assert out["test"].values.shape == (1, 1)
        assert out["test"].values[0, 0] == pytest.approx(ci[0], rel=1e-9)

    def test_diagonal_matches_ci(self, rng):
        values = rng.normal(size=(3, 400)).cumsum(axis=1)
        out = cross_channel_grid(dataset(values), 24, 6, epochs=3, batch_size=32, seed=5)
        ci = ci_reference(values, 24, 6, 3, 32, 5)
        np.testing.assert_allclose(np.diag(out["test"].values), ci, rtol=1e-9)

    def test_pair_errors_oracle(self, rng):
        d, L, T = 2, 8, 3
        g = ChannelGrid.init(d, L, T, rng)
        g.weight += rng.normal(scale=0.1, size=g.weight.shape)
        values = rng.normal(size=(d, 60))
        e = g.pair_errors(make_stream(values, L, T, 16))
        n = 60 - L - T + 1
        for i, j in itertools.product(range(d), repeat=2):
            tot = 0.0
            for s in range(n):
                x = values[i, s:s + L]
                xn = (x - x.mean()) / x.std()
                tgt_win = values[j, s:s + L]
                pred = (g.weight[i, j] @ xn + g.bias[i, j]) * tgt_win.std() + tgt_win.mean()
                tot += ((pred - values[j, s + L:s + L + T]) ** 2).sum()
            assert e[i, j] == pytest.approx(tot / (n * T), rel=1e-12)

    def test_grad_matches_finite_differences(self, rng):
        d, L, T = 2, 6, 2
        g = ChannelGrid.init(d, L, T, rng)
        x = rng.normal(size=(3, d, L))
        y = rng.normal(size=(3, d, T))

        def objective():
            pred, _ = g.forward(x)
            diff = pred - y[:, None]
            return float((diff ** 2).mean(axis=(0, 2, 3)).sum())

        g.loss_and_grad(x, y)
        h = 1e-5
        for idx in [(0, 1, 0, 2), (1, 0, 1, 5), (1, 1, 0, 0)]:
            old = g.weight[idx]
            g.weight[idx] = old + h
            up = objective()
            g.weight[idx] = old - h
            down = objective()
            g.weight[idx] = old
            num = (up - down) / (2 * h)
            assert abs(num - g.grad_weight[idx]) <= 1e-5 * max(abs(num), 1e-6)

    def test_lead_lag(self):
        ds = lead_lag_pair(length=3000, delay=5, noise_std=0.05, seed=0)
        e = cross_channel_grid(ds, 48, 24, epochs=10, seed=0)["test"].values
        assert e[0, 1] < e[1, 1]
        assert best_inputs(ErrorMatrix(e))[1] == 0

    def test_independent_noise_diagonal_wins(self):
        r = np.random.default_rng(3)
        t = np.arange(2000)
        values = np.vstack([np.sin(2 * np.pi * t / 24), np.sin(2 * np.pi * t / 50 + 1.0)])
        values += 0.05 * r.normal(size=values.shape)
        e = cross_channel_grid(dataset(values), 48, 12, epochs=5)["test"].values
        assert e[0, 0] < e[1, 0] and e[1, 1] < e[0, 1]

    def test_budget(self):
        ds = dataset(np.zeros((50, 100)))
        with pytest.raises(BudgetError, match="subset"):
            cross_channel_grid(ds, 336, 96, memory_budget=1024 ** 2)


class TestNormalize:
    def test_columns(self):
        m = normalize_matrix(ErrorMatrix(np.array([[1.0, 5.0], [3.0, 5.0]])))
        np.testing.assert_array_equal(m.values, [[0.0, 0.0], [1.0, 0.0]])

    def test_three_rows(self):
        m = normalize_matrix(ErrorMatrix(np.array([[2.0, 0, 0], [4.0, 0, 0], [6.0, 0, 0]])))
        np.testing.assert_array_equal(m.values[:, 0], [0.0, 0.5, 1.0])

    @settings(max_examples=200, deadline=None)
    @given(st.integers(1, 6).flatmap(
        lambda n: arrays(np.float64, (n, n), elements=st.floats(0, 1e6, allow_nan=False))))
    def test_argmin_and_range(self, v):
        out = normalize_matrix(ErrorMatrix(v)).values
        assert out.min() >= 0.0 and out.max() <= 1.0
        for j in range(v.shape[1]):
            if np.ptp(v[:, j]) > 0:
                assert np.argmin(out[:, j]) == np.argmin(v[:, j])


def rand_oracle(a, b):
    agree = total = 0
    for i, j in itertools.combinations(range(len(a)), 2):
        total += 1
        agree += (a[i] == a[j]) == (b[i] == b[j])
    return agree / total if total else 1.0


class TestRand:
    def test_identical(self):
        assert rand_index([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0
        assert adjusted_rand_index([1, 1, 2, 2], [1, 1, 2, 2]) == 1.0

    def test_worked_example(self):
        # of 6 pairs only 0-3 and 1-2 are split in both partitions
        assert rand_index([1, 1, 2, 2], [1, 2, 1, 2]) == pytest.approx(2 / 6)

    def test_partial(self):
        assert rand_index([1, 1, 1, 2, 2], [1, 1, 2, 2, 2]) == pytest.approx(0.6)

    def test_single_channel(self):
        assert rand_index([1], [1]) == 1.0

    @settings(max_examples=100, deadline=None)
    @given(st.integers(2, 9).flatmap(lambda n: st.tuples(
        st.lists(st.integers(0, 3), min_size=n, max_size=n),
        st.lists(st.integers(0, 3), min_size=n, max_size=n))))
    def test_against_pair_oracle(self, ab):
        a, b = ab
        assert rand_index(a, b) == pytest.approx(rand_oracle(a, b), abs=1e-12)
        assert rand_index(a, b) == rand_index(b, a)

    @settings(max_examples=50, deadline=None)
    @given(st.lists(st.integers(0, 4), min_size=3, max_size=10), st.permutations(list(range(5))))
    def test_label_invariance(self, a, perm):
        relabeled = [perm[x] for x in a]
        assert rand_index(a, relabeled) == 1.0
        assert adjusted_rand_index(a, relabeled) == pytest.approx(1.0)

    def test_ari_brute_force(self):
        a, b = [0, 0, 0, 1, 1, 1], [0, 0, 1, 1, 2, 2]
        # contingency [[2,1,0],[0,1,2]]: index 2, rows 6, cols 3, pairs 15
        expected = (2 - 6 * 3 / 15) / ((6 + 3) / 2 - 6 * 3 / 15)
        assert adjusted_rand_index(a, b) == pytest.approx(expected)

    def test_stability(self):
        parts = [ClusterPartition.from_labels(x) for x in ([1, 1, 2], [1, 1, 2], [1, 2, 2])]
        rep = cluster_stability(parts)
        assert len(rep.pairs) == 3 and rep.pairs[0]["rand"] == 1.0
        with pytest.raises(DimensionError):
            cluster_stability(parts[:1])
        with pytest.raises(DimensionError):
            cluster_stability([parts[0], ClusterPartition.from_labels([1, 2])])

    def test_relabel(self):
        assert ClusterPartition.from_labels([5, 5, 0, 7]).assignment == [1, 1, 2, 3]


class TestExport:
    def test_csv_round_trip(self, tmp_path, rng):
        m = ErrorMatrix(rng.uniform(size=(3, 3)), channel_names=["a", "b,c", "d"])
        write_matrix_csv(m, tmp_path / "m.csv")
        back = read_matrix_csv(tmp_path / "m.csv")
        assert back.values.tobytes() == m.values.tobytes()
        assert back.channel_names == ["a", "b,c", "d"]

    def test_gray_ramp(self):
        assert gray_for(0.0) == "#000000" and gray_for(1.0) == "#ffffff"
        levels = {gray_for(v) for v in np.linspace(0, 1, 101)}
        assert len(levels) == 10

    def test_svg(self):
        m = normalize_matrix(ErrorMatrix(np.array([[1.0, 2.0], [3.0, 0.0]]), channel_names=["x<", "y"]))
        svg = matrix_svg(m, "t")
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert len(re.findall("<rect", svg)) == 4
        assert "x&lt;" in svg and "#000000" in svg and "#ffffff" in svg
