"""Metrics, the input-channel x target-channel grid, and cluster stability."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Sequence

import numpy as np

from .core import Adam, derive_seeds, revin_denormalize, revin_normalize
from .data import TimeSeriesDataset, WindowStream, split, standardize
from .errors import BudgetError, DimensionError, InsufficientDataError, InvalidErrorMatrixError

ROW_SEMANTICS = ("layer", "input-channel")
SPLIT_LABELS = ("train", "val", "test")


@dataclass
class ErrorMatrix:
    """Square matrix of mean losses.

    ``row_semantics`` is "layer" for layer-selection matrices (row = layer,
    column = channel) and "input-channel" for the cross-channel grid (row =
    input channel, column = target channel).
    """

    values: np.ndarray
    row_semantics: str = "layer"
    split_label: str = "val"
    channel_names: list[str] | None = None

    def __post_init__(self):
        self.values = np.asarray(self.values, dtype=np.float64)
        if self.values.ndim != 2 or self.values.shape[0] != self.values.shape[1]:
            raise InvalidErrorMatrixError(f"error matrix must be square, got {self.values.shape}")
        if not np.isfinite(self.values).all():
            raise InvalidErrorMatrixError("error matrix has non-finite entries")
        if self.row_semantics not in ROW_SEMANTICS:
            raise InvalidErrorMatrixError(f"unknown row semantics {self.row_semantics!r}")
        if self.split_label not in SPLIT_LABELS:
            raise InvalidErrorMatrixError(f"unknown split label {self.split_label!r}")

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def names(self) -> list[str]:
        return self.channel_names or [f"ch{k + 1}" for k in range(self.size)]


# ---------------------------------------------------------------------------
# metrics


@dataclass
class EvalResult:
    mse: float
    mae: float
    per_channel_mse: np.ndarray
    per_channel_mae: np.ndarray

    def to_json(self) -> dict:
        return {"mse": self.mse, "mae": self.mae,
                "per_channel_mse": self.per_channel_mse.tolist(),
                "per_channel_mae": self.per_channel_mae.tolist()}


def evaluate(model, stream) -> EvalResult:
    """Mean squared and absolute error over every window and element of ``stream``."""
    sq = None
    ab = None
    count = 0
    for batch in stream:
        err = model.predict(batch.inputs) - batch.targets
        s = (err * err).sum(axis=(0, 2))
        a = np.abs(err).sum(axis=(0, 2))
        sq = s if sq is None else sq + s
        ab = a if ab is None else ab + a
        count += err.shape[0] * err.shape[2]
    if count == 0:
        raise InsufficientDataError("evaluation stream is empty")
    per_mse = sq / count
    per_mae = ab / count
    return EvalResult(float(per_mse.mean()), float(per_mae.mean()), per_mse, per_mae)


# ---------------------------------------------------------------------------
# cross-channel grid


class ChannelGrid:
    """d*d independent L->T layers; layer (i, j) forecasts channel j from channel i.

    Inputs are RevIN-normalized with the input channel's window statistics and
    denormalized with the target channel's. The objective is the sum over input
    rows of a CI-style mean over targets, so every pair gets the same gradient
    scale as a CI layer would.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray, revin_eps: float = 1e-5):
        self.weight = weight  # (d, d, T, L)
        self.bias = bias  # (d, d, T)
        self.grad_weight = np.zeros_like(weight)
        self.grad_bias = np.zeros_like(bias)
        self.revin_eps = revin_eps

    @classmethod
    def init(cls, d: int, lookback: int, horizon: int, rng: np.random.Generator,
             revin_eps: float = 1e-5) -> "ChannelGrid":
        # same draws as a CI bank; every input row starts from the CI layer of
        # its target column, so the diagonal replays CI exactly
        bound = 1.0 / np.sqrt(lookback)
        w = rng.uniform(-bound, bound, size=(d, horizon, lookback))
        b = rng.uniform(-bound, bound, size=(d, horizon))
        return cls(np.array(np.broadcast_to(w, (d, d, horizon, lookback))),
                   np.array(np.broadcast_to(b, (d, d, horizon))), revin_eps)

    @property
    def d(self) -> int:
        return self.weight.shape[0]

    def forward(self, inputs: np.ndarray):
        xn, state = revin_normalize(inputs, self.revin_eps)
        B = inputs.shape[0]
        d, T, L = self.d, self.weight.shape[2], self.weight.shape[3]
        out = np.empty((B, d, d, T))
        for i in range(d):
            y = xn[:, i, :] @ self.weight[i].reshape(d * T, L).T + self.bias[i].reshape(-1)
            out[:, i] = y.reshape(B, d, T)
        # denormalize column j with target channel j's statistics
        pred = out * state.std[:, None, :, None] + state.mean[:, None, :, None]
        return pred, (xn, state)

    def loss_and_grad(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        pred, (xn, state) = self.forward(inputs)
        B, d, _, T = pred.shape
        diff = pred - targets[:, None, :, :]
        g = 2.0 * diff / (B * d * T) * state.std[:, None, :, None]
        L = self.weight.shape[3]
        for i in range(d):
            gi = g[:, i].reshape(B, d * T)
            self.grad_weight[i] += (gi.T @ xn[:, i, :]).reshape(d, T, L)
            self.grad_bias[i] += gi.sum(axis=0).reshape(d, T)
        return float(np.mean(diff * diff))

    def row_masks(self):
        return [None, None]

    def pair_errors(self, stream) -> np.ndarray:
        sums = np.zeros((self.d, self.d))
        count = 0
        for batch in stream:
            pred, _ = self.forward(batch.inputs)
            err = pred - batch.targets[:, None, :, :]
            sums += np.einsum("bijt,bijt->ij", err, err)
            count += err.shape[0] * err.shape[3]
        if count == 0:
            raise InsufficientDataError("evaluation stream is empty")
        return sums / count


def grid_memory_bytes(d: int, lookback: int, horizon: int) -> int:
    # parameters, gradients and two Adam moments
    return 4 * 8 * d * d * horizon * (lookback + 1)


def cross_channel_grid(dataset: TimeSeriesDataset, lookback: int, horizon: int, epochs: int = 10,
                       batch_size: int = 128, lr: float = 1e-3, seed: int = 0,
                       standardize_data: bool = True, revin_eps: float = 1e-5,
                       memory_budget: int = 4 * 1024 ** 3,
                       splits: Sequence[str] = ("train", "test")) -> dict[str, ErrorMatrix]:
    """Train the d*d grid and report per-pair MSE on each requested split."""
    d = dataset.n_channels
    need = grid_memory_bytes(d, lookback, horizon)
    if need > memory_budget:
        raise BudgetError(
            f"a {d}x{d} grid needs ~{need / 1024 ** 2:.0f} MiB (budget {memory_budget / 1024 ** 2:.0f} MiB); "
            "select a subset of channels")
    ranges = split(dataset, None, lookback, horizon)
    if standardize_data:
        dataset, _, _ = standardize(dataset, ranges.train)
    shuffle_seed, init_seed = derive_seeds(seed)
    grid = ChannelGrid.init(d, lookback, horizon, np.random.default_rng(init_seed), revin_eps)
    opt = Adam([grid.weight, grid.bias], [grid.grad_weight, grid.grad_bias], lr=lr)
    train_stream = WindowStream(dataset.values, ranges.train, lookback, horizon, batch_size,
                                shuffle_seed, "train")
    for _ in range(epochs):
        for batch in train_stream:
            grid.loss_and_grad(batch.inputs, batch.targets)
            opt.step()
    out = {}
    for name in splits:
        stream = WindowStream(dataset.values, ranges[name], lookback, horizon, batch_size, None, name)
        out[name] = ErrorMatrix(grid.pair_errors(stream), "input-channel", name,
                                list(dataset.channel_names))
    return out


def best_inputs(matrix: ErrorMatrix) -> list[int]:
    """0-based index of the lowest-loss input row for every target column."""
    return [int(k) for k in np.argmin(matrix.values, axis=0)]


def normalize_matrix(matrix: ErrorMatrix) -> ErrorMatrix:
    """Min-max scale each column to [0, 1]; a constant column becomes zeros."""
    v = matrix.values
    lo = v.min(axis=0)
    span = v.max(axis=0) - lo
    safe = np.where(span > 0, span, 1.0)
    out = np.where(span > 0, (v - lo) / safe, 0.0)
    # a tiny gap over a huge span can underflow to 0 and tie with the minimum
    out = np.where((v > lo) & (out == 0.0), np.nextafter(0.0, 1.0), out)
    return ErrorMatrix(out, matrix.row_semantics, matrix.split_label, matrix.channel_names)


# ---------------------------------------------------------------------------
# clusters


@dataclass
class ClusterPartition:
    assignment: list[int]
    seed: int | None = None

    @classmethod
    def from_labels(cls, labels: Sequence[int], seed: int | None = None) -> "ClusterPartition":
        """Relabel to contiguous ids from 1 in order of first appearance."""
        ids: dict[int, int] = {}
        out = []
        for lab in labels:
            ids.setdefault(int(lab), len(ids) + 1)
            out.append(ids[int(lab)])
        return cls(out, seed)

    def to_json(self) -> dict:
        return {"seed": self.seed, "assignment": list(self.assignment)}

    @classmethod
    def from_json(cls, obj: dict) -> "ClusterPartition":
        return cls.from_labels(obj["assignment"], obj.get("seed"))


def _labels(p) -> np.ndarray:
    return np.asarray(p.assignment if isinstance(p, ClusterPartition) else p)


def _contingency(a, b) -> np.ndarray:
    a, b = _labels(a), _labels(b)
    if a.shape != b.shape:
        raise DimensionError(f"partitions cover {a.size} and {b.size} channels")
    _, ai = np.unique(a, return_inverse=True)
    _, bi = np.unique(b, return_inverse=True)
    table = np.zeros((ai.max() + 1, bi.max() + 1), dtype=np.int64)
    np.add.at(table, (ai, bi), 1)
    return table


def _pairs(x) -> int:
    return int((np.asarray(x) * (np.asarray(x) - 1) // 2).sum())


def rand_index(a, b) -> float:
    table = _contingency(a, b)
    n = int(table.sum())
    total = n * (n - 1) // 2
    if total == 0:
        return 1.0
    same_both = _pairs(table)
    same_a = _pairs(table.sum(axis=1))
    same_b = _pairs(table.sum(axis=0))
    agree = total + 2 * same_both - same_a - same_b
    return agree / total


def adjusted_rand_index(a, b) -> float:
    table = _contingency(a, b)
    n = int(table.sum())
    total = n * (n - 1) // 2
    index = _pairs(table)
    sa = _pairs(table.sum(axis=1))
    sb = _pairs(table.sum(axis=0))
    if total == 0:
        return 1.0
    expected = sa * sb / total
    max_index = (sa + sb) / 2
    if max_index == expected:
        # both partitions trivial (all-singletons or one block)
        return 1.0
    return (index - expected) / (max_index - expected)


@dataclass
class StabilityReport:
    pairs: list[dict] = field(default_factory=list)

    @property
    def mean_rand(self) -> float:
        return float(np.mean([p["rand"] for p in self.pairs]))

    @property
    def mean_ari(self) -> float:
        return float(np.mean([p["ari"] for p in self.pairs]))

    def to_json(self) -> dict:
        return {"pairs": self.pairs, "mean_rand": self.mean_rand, "mean_ari": self.mean_ari}


def cluster_stability(partitions: Sequence[ClusterPartition]) -> StabilityReport:
    if len(partitions) < 2:
        raise DimensionError("cluster stability needs at least two partitions")
    sizes = {len(_labels(p)) for p in partitions}
    if len(sizes) != 1:
        raise DimensionError(f"partitions cover different channel counts: {sorted(sizes)}")
    report = StabilityReport()
    for i, j in combinations(range(len(partitions)), 2):
        report.pairs.append({"a": i, "b": j,
                             "rand": rand_index(partitions[i], partitions[j]),
                             "ari": adjusted_rand_index(partitions[i], partitions[j])})
    return report


def partition_from_mapping(assignment: Sequence[int], seed: int | None = None) -> ClusterPartition:
    """Channels routed through the same layer form one cluster."""
    return ClusterPartition.from_labels(assignment, seed)


# ---------------------------------------------------------------------------
# export


def write_matrix_csv(matrix: ErrorMatrix, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(matrix.names())
        for row in matrix.values:
            w.writerow([repr(float(v)) for v in row])


def read_matrix_csv(path, row_semantics: str = "input-channel", split_label: str = "test") -> ErrorMatrix:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    names = rows[0]
    values = np.array([[float(v) for v in r] for r in rows[1:]])
    return ErrorMatrix(values, row_semantics, split_label, names)


GRAY_LEVELS = 10


def gray_for(value: float) -> str:
    """Hex colour for a normalized value; 0.0 is black, 1.0 is white, 10 steps."""
    k = min(int(math.floor(max(value, 0.0) * GRAY_LEVELS)), GRAY_LEVELS - 1)
    level = round(255 * k / (GRAY_LEVELS - 1))
    return f"#{level:02x}{level:02x}{level:02x}"


def matrix_svg(matrix: ErrorMatrix, title: str = "", cell: int = 22) -> str:
    """Grayscale heatmap of an already-normalized matrix, labels in the margins."""
    n = matrix.size
    names = matrix.names()
    left, top = 70, 70 if title else 50
    width, height = left + n * cell + 10, top + n * cell + 10
    ylabel = "layer" if matrix.row_semantics == "layer" else "input channel"
    xlabel = "channel" if matrix.row_semantics == "layer" else "target channel"
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="monospace" font-size="9">',
    ]
    if title:
        parts.append(f'<text x="{left}" y="14" font-size="12">{_esc(title)}</text>')
    parts.append(f'<text x="{left}" y="{top - 36}">{xlabel}</text>')
    parts.append(f'<text x="4" y="{top - 4}">{ylabel}</text>')
    for j, name in enumerate(names):
        x = left + j * cell + cell // 2
        parts.append(f'<text x="{x}" y="{top - 4}" text-anchor="start" '
                     f'transform="rotate(-60 {x} {top - 4})">{_esc(name)}</text>')
    for i, name in enumerate(names):
        y = top + i * cell + cell // 2 + 3
        parts.append(f'<text x="{left - 4}" y="{y}" text-anchor="end">{_esc(name)}</text>')
        for j in range(n):
            v = float(matrix.values[i, j])
            parts.append(f'<rect x="{left + j * cell}" y="{top + i * cell}" width="{cell}" '
                         f'height="{cell}" fill="{gray_for(v)}"><title>{v:.3f}</title></rect>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def _esc(s: str) -> str:
    return s.replace("&", "&amp;").replace("<", "&lt;").replace(">", "&gt;")


def write_partitions_json(partitions: Sequence[ClusterPartition], path) -> None:
    Path(path).write_text(json.dumps([p.to_json() for p in partitions], indent=2) + "\n")
