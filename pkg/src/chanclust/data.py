"""CSV ingestion, chronological splits, sliding windows and synthetic data."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np

from .errors import ConfigError, DataParseError, InsufficientDataError

SPLIT_NAMES = ("train", "val", "test")

# ETT files split 6:2:2, every other dataset 7:2:1
ETT_RATIOS = (0.6, 0.2, 0.2)
DEFAULT_RATIOS = (0.7, 0.2, 0.1)


@dataclass(frozen=True)
class TimeSeriesDataset:
    values: np.ndarray  # (d, N)
    channel_names: list[str]
    split_ratios: tuple[float, float, float] = DEFAULT_RATIOS
    granularity_label: str = ""
    has_timestamp: bool = False
    name: str = "dataset"

    def __post_init__(self):
        if self.values.ndim != 2:
            raise DataParseError(f"values must be 2-D (channels x time), got {self.values.shape}")
        if len(self.channel_names) != self.values.shape[0]:
            raise DataParseError("channel_names length does not match channel count")
        _check_ratios(self.split_ratios)
        self.values.setflags(write=False)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    @property
    def length(self) -> int:
        return self.values.shape[1]

    def subset(self, channels: Sequence[int]) -> "TimeSeriesDataset":
        idx = list(channels)
        return TimeSeriesDataset(self.values[idx].copy(), [self.channel_names[i] for i in idx],
                                 self.split_ratios, self.granularity_label, self.has_timestamp,
                                 self.name)

    def with_ratios(self, ratios) -> "TimeSeriesDataset":
        return TimeSeriesDataset(self.values.copy(), list(self.channel_names), tuple(ratios),
                                 self.granularity_label, self.has_timestamp, self.name)


def _check_ratios(ratios) -> None:
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise ConfigError(f"split ratios must be three positive fractions, got {ratios}", "split_ratios")
    if abs(sum(ratios) - 1.0) > 1e-9:
        raise ConfigError(f"split ratios must sum to 1, got {sum(ratios)}", "split_ratios")


def load_csv(path, has_header: bool = True, timestamp_column: str | int | None = None,
             split_ratios=DEFAULT_RATIOS, granularity_label: str = "") -> TimeSeriesDataset:
    """Read a one-row-per-timestep CSV into a (channels x time) dataset.

    Row and column numbers in parse errors are 1-based and count data rows
    only (the header is not row 1).
    """
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r]
    if not rows:
        raise DataParseError(f"{path}: empty file")
    header = rows.pop(0) if has_header else None
    if not rows:
        raise DataParseError(f"{path}: no data rows")
    width = len(header) if header is not None else len(rows[0])

    ts_idx = None
    if timestamp_column is not None:
        if isinstance(timestamp_column, int):
            ts_idx = timestamp_column
        elif header is not None and timestamp_column in header:
            ts_idx = header.index(timestamp_column)
        else:
            raise DataParseError(f"{path}: timestamp column {timestamp_column!r} not found")

    keep = [c for c in range(width) if c != ts_idx]
    data = np.empty((len(rows), len(keep)), dtype=np.float64)
    for r, row in enumerate(rows):
        if len(row) != width:
            raise DataParseError(
                f"{path}: ragged row {r + 1}: expected {width} fields, got {len(row)}", r + 1, None)
        for k, c in enumerate(keep):
            cell = row[c].strip()
            try:
                v = float(cell)
            except ValueError:
                raise DataParseError(
                    f"{path}: cannot parse {cell!r} at (row {r + 1}, column {c + 1})", r + 1, c + 1
                ) from None
            if not math.isfinite(v):
                raise DataParseError(
                    f"{path}: non-finite value {cell!r} at (row {r + 1}, column {c + 1})", r + 1, c + 1)
            data[r, k] = v

    if header is not None:
        names = [header[c] for c in keep]
    else:
        names = [f"ch{k + 1}" for k in range(len(keep))]
    return TimeSeriesDataset(np.ascontiguousarray(data.T), names, tuple(split_ratios),
                             granularity_label, ts_idx is not None, path.stem)


def write_csv(dataset: TimeSeriesDataset, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(dataset.channel_names)
        for row in dataset.values.T:
            w.writerow([repr(float(v)) for v in row])


# ---------------------------------------------------------------------------
# splits


@dataclass(frozen=True)
class SplitRanges:
    train: range
    val: range
    test: range

    def __getitem__(self, name: str) -> range:
        if name == "merged":
            return range(self.train.start, self.val.stop)
        return getattr(self, name)


def split(dataset_or_length, ratios=None, lookback: int | None = None,
          horizon: int | None = None) -> SplitRanges:
    """Chronological split with boundaries at floor(N*train) and floor(N*(train+val))."""
    if isinstance(dataset_or_length, TimeSeriesDataset):
        n = dataset_or_length.length
        ratios = ratios or dataset_or_length.split_ratios
    else:
        n = int(dataset_or_length)
        ratios = ratios or DEFAULT_RATIOS
    _check_ratios(ratios)
    b1 = math.floor(n * ratios[0])
    b2 = math.floor(n * (ratios[0] + ratios[1]))
    out = SplitRanges(range(0, b1), range(b1, b2), range(b2, n))
    if lookback is not None and horizon is not None:
        need = lookback + horizon
        for name in SPLIT_NAMES:
            if len(out[name]) < need:
                raise InsufficientDataError(
                    f"{name} split has {len(out[name])} steps, needs at least "
                    f"lookback+horizon = {need} (N={n}, ratios={tuple(ratios)})")
    return out


def standardize(dataset: TimeSeriesDataset, fit_range: range) -> tuple[TimeSeriesDataset, np.ndarray, np.ndarray]:
    """Z-score each channel with statistics from ``fit_range`` only."""
    seg = dataset.values[:, fit_range.start:fit_range.stop]
    mean = seg.mean(axis=1)
    std = seg.std(axis=1)
    std = np.where(std < 1e-12, 1.0, std)
    vals = (dataset.values - mean[:, None]) / std[:, None]
    return (TimeSeriesDataset(vals, list(dataset.channel_names), dataset.split_ratios,
                              dataset.granularity_label, dataset.has_timestamp, dataset.name),
            mean, std)


# ---------------------------------------------------------------------------
# windows


@dataclass
class WindowBatch:
    inputs: np.ndarray  # (batch, d, L)
    targets: np.ndarray  # (batch, d, T)
    source_indices: np.ndarray  # absolute start of each input window

    def __len__(self) -> int:
        return self.inputs.shape[0]


def window_count(split_length: int, lookback: int, horizon: int) -> int:
    return max(0, split_length - lookback - horizon + 1)


class WindowStream:
    """Re-iterable stride-1 window stream over one split.

    Each ``iter()`` is one pass. With ``shuffle_seed`` set, pass ``k`` is
    shuffled by a generator derived from (seed, k) so a stream replays the
    same sequence of epochs. ``passes`` counts started iterations; the
    training loop uses it to prove the test split is read once.
    """

    def __init__(self, values: np.ndarray, span: range, lookback: int, horizon: int,
                 batch_size: int, shuffle_seed: int | None = None, label: str = ""):
        if len(span) < lookback + horizon:
            raise InsufficientDataError(
                f"{label or 'split'} has {len(span)} steps, needs at least {lookback + horizon}")
        self.values = values
        self.span = span
        self.lookback = lookback
        self.horizon = horizon
        self.batch_size = batch_size
        self.shuffle_seed = shuffle_seed
        self.label = label
        self.passes = 0
        n = window_count(len(span), lookback, horizon)
        self.starts = np.arange(span.start, span.start + n)
        # a (N - L + 1, d, L) view; targets come from the same strided view
        self._in_view = np.lib.stride_tricks.sliding_window_view(values, lookback, axis=1)
        self._out_view = np.lib.stride_tricks.sliding_window_view(values, horizon, axis=1)

    @property
    def n_windows(self) -> int:
        return len(self.starts)

    @property
    def n_channels(self) -> int:
        return self.values.shape[0]

    def __len__(self) -> int:
        return -(-self.n_windows // self.batch_size)

    def _order(self, epoch: int) -> np.ndarray:
        if self.shuffle_seed is None:
            return self.starts
        rng = np.random.default_rng([self.shuffle_seed, epoch])
        return self.starts[rng.permutation(self.n_windows)]

    def __iter__(self) -> Iterator[WindowBatch]:
        order = self._order(self.passes)
        self.passes += 1
        L = self.lookback
        for k in range(0, len(order), self.batch_size):
            idx = order[k:k + self.batch_size]
            x = np.ascontiguousarray(self._in_view[:, idx, :].transpose(1, 0, 2))
            y = np.ascontiguousarray(self._out_view[:, idx + L, :].transpose(1, 0, 2))
            yield WindowBatch(x, y, idx)


def windows(dataset: TimeSeriesDataset, span: range, lookback: int, horizon: int,
            batch_size: int, shuffle_seed: int | None = None) -> WindowStream:
    return WindowStream(dataset.values, span, lookback, horizon, batch_size, shuffle_seed)


# ---------------------------------------------------------------------------
# synthetic clustered data


@dataclass
class SyntheticSpec:
    n_channels: int
    n_clusters: int
    cluster_periods: list[float]
    noise_std: list[float] | float = 0.1
    length: int = 4000
    seed: int = 0
    split_ratios: tuple[float, float, float] = field(default=DEFAULT_RATIOS)

    def __post_init__(self):
        if self.n_channels < 1 or self.n_clusters < 1:
            raise ConfigError("n_channels and n_clusters must be positive", "n_clusters")
        if self.n_clusters > self.n_channels:
            raise ConfigError("n_clusters must not exceed n_channels", "n_clusters")
        if len(self.cluster_periods) != self.n_clusters:
            raise ConfigError("cluster_periods needs one entry per cluster", "cluster_periods")
        if len(set(self.cluster_periods)) != self.n_clusters or min(self.cluster_periods) <= 0:
            raise ConfigError("cluster_periods must be distinct and positive", "cluster_periods")
        if self.length < 2:
            raise ConfigError("length must be at least 2", "length")
        noise = self.noise_vector()
        if (noise < 0).any():
            raise ConfigError("noise_std must be nonnegative", "noise_std")

    def noise_vector(self) -> np.ndarray:
        if np.isscalar(self.noise_std):
            return np.full(self.n_channels, float(self.noise_std))
        arr = np.asarray(self.noise_std, dtype=np.float64)
        if arr.shape != (self.n_channels,):
            raise ConfigError("noise_std list must have one entry per channel", "noise_std")
        return arr

    def assignment(self) -> np.ndarray:
        """Ground-truth cluster of each channel: contiguous, balanced blocks (0-based)."""
        return (np.arange(self.n_channels) * self.n_clusters) // self.n_channels

    @classmethod
    def from_dict(cls, obj: dict) -> "SyntheticSpec":
        allowed = {"n_channels", "n_clusters", "cluster_periods", "noise_std", "length", "seed",
                   "split_ratios"}
        unknown = set(obj) - allowed
        if unknown:
            raise ConfigError(f"unknown synthetic spec keys: {sorted(unknown)}", sorted(unknown)[0])
        missing = {"n_channels", "n_clusters", "cluster_periods"} - set(obj)
        if missing:
            raise ConfigError(f"synthetic spec missing keys: {sorted(missing)}", sorted(missing)[0])
        kw = dict(obj)
        if "split_ratios" in kw:
            kw["split_ratios"] = tuple(kw["split_ratios"])
        return cls(**kw)

    def to_dict(self) -> dict:
        noise = self.noise_std if np.isscalar(self.noise_std) else list(self.noise_std)
        return {"n_channels": self.n_channels, "n_clusters": self.n_clusters,
                "cluster_periods": list(self.cluster_periods), "noise_std": noise,
                "length": self.length, "seed": self.seed, "split_ratios": list(self.split_ratios)}

    @classmethod
    def from_json(cls, path) -> "SyntheticSpec":
        return cls.from_dict(json.loads(Path(path).read_text()))


def synthesize(spec: SyntheticSpec) -> tuple[TimeSeriesDataset, np.ndarray]:
    """Noisy sinusoids sharing one period per cluster; returns (dataset, assignment)."""
    rng = np.random.default_rng(spec.seed)
    truth = spec.assignment()
    periods = np.asarray(spec.cluster_periods, dtype=np.float64)[truth]
    phases = rng.uniform(0.0, 2.0 * np.pi, size=spec.n_channels)
    noise = spec.noise_vector()
    t = np.arange(spec.length, dtype=np.float64)
    values = np.sin(2.0 * np.pi * t[None, :] / periods[:, None] + phases[:, None])
    values = values + noise[:, None] * rng.standard_normal((spec.n_channels, spec.length))
    names = [f"ch{j + 1}" for j in range(spec.n_channels)]
    ds = TimeSeriesDataset(values, names, tuple(spec.split_ratios), "synthetic", False, "synthetic")
    return ds, truth


def lead_lag_pair(length: int = 3000, delay: int = 5, noise_std: float = 0.05, seed: int = 0,
                  ar_coef: float = 0.9, split_ratios=DEFAULT_RATIOS) -> TimeSeriesDataset:
    """Two channels; channel 2 repeats channel 1 ``delay`` steps later plus noise.

    Channel 1 is a stationary AR(1) process so its own future is genuinely
    unpredictable beyond what its past explains.
    """
    rng = np.random.default_rng(seed)
    n = length + delay
    shocks = rng.standard_normal(n)
    lead = np.empty(n)
    lead[0] = shocks[0]
    for k in range(1, n):
        lead[k] = ar_coef * lead[k - 1] + shocks[k]
    ch1 = lead[delay:]
    ch2 = lead[:length] + noise_std * rng.standard_normal(length)
    return TimeSeriesDataset(np.vstack([ch1, ch2]), ["lead", "lag"], tuple(split_ratios),
                             "synthetic", False, "lead_lag")
