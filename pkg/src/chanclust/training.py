"""Experiment orchestration: configs, seeded runs, records and run grids."""
from __future__ import annotations

import dataclasses
import json
import logging
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Sequence

import numpy as np

from . import checkpoint
from .core import derive_seeds
from .data import (DEFAULT_RATIOS, ETT_RATIOS, SyntheticSpec, TimeSeriesDataset, WindowStream,
                   load_csv, split, standardize, synthesize)
from .errors import ConfigError, ForecastError
from .evaluation import evaluate
from .parallel import map_ordered
from .strategies import (LinearBank, MappingVector, MlpModel, cr_schedule, csc_schedule,
                         train_epoch)

log = logging.getLogger(__name__)

STRATEGIES = ("CD", "CI", "CSC", "MLP-CI", "MLP-CE", "MLP-CR")
LINEAR = ("CD", "CI", "CSC")


@dataclass
class ExperimentConfig:
    strategy: str = "CI"
    lookback: int = 336
    horizon: int = 96
    dataset: str | None = None
    synthetic: dict | None = None
    name: str | None = None
    has_header: bool = True
    timestamp_column: str | None = None
    channels: list[int] | None = None
    split_ratios: list[float] | None = None
    epochs: int | None = None
    selection_epochs: list[int] | None = None
    pretrain_epochs: int | None = None
    rearrange_epochs: list[int] | None = None
    batch_size: int = 128
    lr: float | None = None
    beta1: float = 0.9
    beta2: float = 0.999
    adam_eps: float = 1e-8
    seed: int = 0
    merged_set: bool = False
    standardize: bool = True
    hidden: int = 512
    embed_dim: int | None = None
    unfreeze_decoder: bool = False
    revin_eps: float = 1e-5

    def __post_init__(self):
        self.validate()

    @property
    def is_linear(self) -> bool:
        return self.strategy in LINEAR

    # resolved defaults ---------------------------------------------------

    @property
    def total_epochs(self) -> int:
        if self.epochs is not None:
            return self.epochs
        return 10 if self.is_linear else 18

    @property
    def learning_rate(self) -> float:
        if self.lr is not None:
            return self.lr
        return 1e-3 if self.is_linear else 5e-4

    @property
    def selections(self) -> list[int]:
        return list(self.selection_epochs) if self.selection_epochs is not None else [1, 2]

    @property
    def pretrain(self) -> int:
        if self.pretrain_epochs is not None:
            return self.pretrain_epochs
        return max(0, self.total_epochs - 3)

    @property
    def rearranges(self) -> list[int]:
        if self.rearrange_epochs is not None:
            return list(self.rearrange_epochs)
        return list(range(self.pretrain + 1, self.total_epochs + 1))

    @property
    def embedding_dim(self) -> int:
        return self.embed_dim if self.embed_dim is not None else 16

    def validate(self) -> None:
        if self.strategy not in STRATEGIES:
            raise ConfigError(f"strategy must be one of {STRATEGIES}, got {self.strategy!r}", "strategy")
        for key in ("lookback", "horizon", "batch_size", "hidden"):
            v = getattr(self, key)
            if not isinstance(v, int) or isinstance(v, bool) or v <= 0:
                raise ConfigError(f"{key} must be a positive integer, got {v!r}", key)
        if self.lookback < 2:
            raise ConfigError("lookback must be at least 2 for instance normalization", "lookback")
        if self.epochs is not None and (not isinstance(self.epochs, int) or self.epochs <= 0):
            raise ConfigError(f"epochs must be a positive integer, got {self.epochs!r}", "epochs")
        if (self.dataset is None) == (self.synthetic is None):
            raise ConfigError("exactly one of 'dataset' and 'synthetic' must be given", "dataset")
        if self.learning_rate <= 0:
            raise ConfigError("lr must be positive", "lr")
        if self.embed_dim is not None and self.strategy != "MLP-CE":
            raise ConfigError("embed_dim only applies to MLP-CE", "embed_dim")
        if self.embed_dim is not None and self.embed_dim <= 0:
            raise ConfigError("embed_dim must be positive", "embed_dim")
        if self.selection_epochs is not None:
            if self.strategy != "CSC":
                raise ConfigError("selection_epochs only applies to CSC", "selection_epochs")
            bad = [e for e in self.selection_epochs if not 1 <= e <= self.total_epochs]
            if bad:
                raise ConfigError(f"selection epochs {bad} outside 1..{self.total_epochs}", "selection_epochs")
        if self.strategy != "MLP-CR":
            for key in ("pretrain_epochs", "rearrange_epochs"):
                if getattr(self, key) is not None:
                    raise ConfigError(f"{key} only applies to MLP-CR", key)
            if self.unfreeze_decoder:
                raise ConfigError("unfreeze_decoder only applies to MLP-CR", "unfreeze_decoder")
        else:
            if not 0 <= self.pretrain <= self.total_epochs:
                raise ConfigError("pretrain_epochs must lie in 0..epochs", "pretrain_epochs")
            bad = [e for e in self.rearranges if not self.pretrain < e <= self.total_epochs]
            if bad:
                raise ConfigError(f"rearrange epochs {bad} outside the post-pretraining range", "rearrange_epochs")
        if self.merged_set and self.strategy in ("CSC", "MLP-CR"):
            raise ConfigError("merged_set is for baselines only; CSC/MLP-CR select on validation data",
                              "merged_set")
        if self.split_ratios is not None:
            if len(self.split_ratios) != 3 or abs(sum(self.split_ratios) - 1) > 1e-9 or min(self.split_ratios) <= 0:
                raise ConfigError("split_ratios must be three positive fractions summing to 1", "split_ratios")
        if self.channels is not None and (not self.channels or min(self.channels) < 1):
            raise ConfigError("channels are 1-based indices", "channels")
        if self.revin_eps <= 0:
            raise ConfigError("revin_eps must be positive", "revin_eps")

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        if not isinstance(obj, dict):
            raise ConfigError("config must be a JSON object")
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(obj) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}", unknown[0])
        try:
            return cls(**obj)
        except TypeError as exc:
            raise ConfigError(str(exc)) from None

    @classmethod
    def from_json(cls, path) -> "ExperimentConfig":
        try:
            obj = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from None
        return cls.from_dict(obj)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def resolved(self) -> dict:
        out = self.to_dict()
        out.update(epochs=self.total_epochs, lr=self.learning_rate)
        if self.strategy == "CSC":
            out["selection_epochs"] = self.selections
        if self.strategy == "MLP-CR":
            out["pretrain_epochs"] = self.pretrain
            out["rearrange_epochs"] = self.rearranges
        if self.strategy == "MLP-CE":
            out["embed_dim"] = self.embedding_dim
        return out

    def replace(self, **changes) -> "ExperimentConfig":
        return dataclasses.replace(self, **changes)


@dataclass
class RunRecord:
    config: dict
    dataset: dict
    train_losses: list[float]
    val_losses: list[float | None]
    mapping_history: list[dict]
    test: dict
    rmp: float
    n_live_layers: int
    params_live: int
    params_allocated: int
    stream_passes: dict
    epoch_seconds: list[float] = field(default_factory=list)

    @property
    def strategy(self) -> str:
        return self.config["strategy"]

    @property
    def test_mse(self) -> float:
        return self.test["mse"]

    @property
    def test_mae(self) -> float:
        return self.test["mae"]

    def to_json(self) -> dict:
        # wall-clock is excluded so identical runs give identical files
        out = dataclasses.asdict(self)
        out.pop("epoch_seconds")
        return out

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_json(cls, obj: dict) -> "RunRecord":
        return cls(**obj)


@dataclass
class RunFailure:
    config: dict
    error: str


def load_dataset(config: ExperimentConfig) -> tuple[TimeSeriesDataset, np.ndarray | None]:
    truth = None
    if config.synthetic is not None:
        ds, truth = synthesize(SyntheticSpec.from_dict(config.synthetic))
    else:
        path = Path(config.dataset)
        if not path.exists():
            raise ConfigError(f"dataset file not found: {path}", "dataset")
        ds = load_csv(path, config.has_header, config.timestamp_column)
        ratios = ETT_RATIOS if path.stem.upper().startswith("ETT") else DEFAULT_RATIOS
        ds = ds.with_ratios(ratios)
    if config.split_ratios is not None:
        ds = ds.with_ratios(config.split_ratios)
    if config.channels is not None:
        if max(config.channels) > ds.n_channels:
            raise ConfigError(f"channel {max(config.channels)} exceeds dataset width {ds.n_channels}", "channels")
        idx = [c - 1 for c in config.channels]
        ds = ds.subset(idx)
        truth = None if truth is None else truth[idx]
    return ds, truth


def build_model(config: ExperimentConfig, d: int, rng: np.random.Generator):
    if config.is_linear:
        return LinearBank.init(config.strategy, d, config.lookback, config.horizon, rng, config.revin_eps)
    tag = {"MLP-CI": "CI", "MLP-CE": "CE", "MLP-CR": "CI"}[config.strategy]
    return MlpModel.init(tag, d, config.lookback, config.horizon, config.hidden, rng,
                         config.embedding_dim, config.revin_eps)


def count_parameters(model, live_only: bool = True) -> int:
    return model.count_parameters(live_only)


def run(config: ExperimentConfig, out_dir: str | Path | None = None) -> RunRecord:
    """Train and test one configuration; deterministic given the config (seed included).

    With ``out_dir`` set, the model is checkpointed to ``out_dir/model.ckpt``
    after every epoch.
    """
    try:
        return _run(config, Path(out_dir) if out_dir is not None else None)
    except ForecastError as exc:
        label = config.name or config.dataset or "synthetic"
        raise type(exc)(f"[{config.strategy} on {label}, L={config.lookback}, T={config.horizon}] {exc}") from exc


def _run(config: ExperimentConfig, out_dir: Path | None) -> RunRecord:
    ds, _ = load_dataset(config)
    L, T = config.lookback, config.horizon
    ranges = split(ds, None, L, T)
    if config.standardize:
        ds, _, _ = standardize(ds, ranges.train)
    shuffle_seed, init_seed = derive_seeds(config.seed)
    rng = np.random.default_rng(init_seed)
    d = ds.n_channels

    train_span = ranges["merged"] if config.merged_set else ranges.train
    train_stream = WindowStream(ds.values, train_span, L, T, config.batch_size, shuffle_seed, "train")
    val_stream = WindowStream(ds.values, ranges.val, L, T, config.batch_size, None, "val")

    model = build_model(config, d, rng)
    adam = dict(beta1=config.beta1, beta2=config.beta2, eps=config.adam_eps)
    val_losses: list[float | None] = []
    epoch_seconds: list[float] = []
    clock = [time.perf_counter()]

    def on_epoch(epoch: int, m, loss: float) -> None:
        epoch_seconds.append(time.perf_counter() - clock[0])
        val_losses.append(None if config.merged_set else evaluate(m, val_stream).mse)
        if out_dir is not None:
            checkpoint.save_model(m, out_dir / "model.ckpt", {"epoch": epoch})
        log.info("epoch %d/%d train %.6f val %s (%.2fs)", epoch, config.total_epochs, loss,
                 "-" if val_losses[-1] is None else f"{val_losses[-1]:.6f}", epoch_seconds[-1])
        clock[0] = time.perf_counter()

    if config.strategy == "CSC":
        result = csc_schedule(model, train_stream, val_stream, config.total_epochs, config.selections,
                              model.make_optimizer(config.learning_rate, **adam), on_epoch)
        model, history, losses = result.model, result.history, result.train_losses
    elif config.strategy == "MLP-CR":
        result = cr_schedule(model, train_stream, val_stream, config.pretrain, config.total_epochs,
                             config.rearranges, config.learning_rate, adam, config.unfreeze_decoder,
                             on_epoch)
        model, history, losses = result.model, result.history, result.train_losses
    else:
        opt = model.make_optimizer(config.learning_rate, **adam)
        history = [MappingVector(model.mapping.assignment, 0)]
        losses = []
        for epoch in range(1, config.total_epochs + 1):
            losses.append(train_epoch(model, train_stream, opt))
            on_epoch(epoch, model, losses[-1])

    # the test split is opened only now, once
    test_stream = WindowStream(ds.values, ranges.test, L, T, config.batch_size, None, "test")
    test = evaluate(model, test_stream)

    return RunRecord(
        config=config.resolved(),
        dataset={"name": ds.name, "n_channels": d, "length": ds.length,
                 "split_ratios": list(ds.split_ratios),
                 "splits": {k: [ranges[k].start, ranges[k].stop] for k in ("train", "val", "test")}},
        train_losses=[float(x) for x in losses],
        val_losses=val_losses,
        mapping_history=[m.to_json() for m in history],
        test=test.to_json(),
        rmp=model.mapping.rmp,
        n_live_layers=model.mapping.n_live,
        params_live=model.count_parameters(True),
        params_allocated=model.count_parameters(False),
        stream_passes={"train": train_stream.passes, "val": val_stream.passes, "test": test_stream.passes},
        epoch_seconds=epoch_seconds,
    )


def run_matrix(configs: Sequence[ExperimentConfig], workers: int | None = None) -> list[RunRecord | RunFailure]:
    """Run independent configs (in parallel threads); a failure does not stop the rest."""

    def one(cfg: ExperimentConfig):
        try:
            return run(cfg)
        except ForecastError as exc:
            log.error("run failed: %s", exc)
            return RunFailure(cfg.to_dict(), str(exc))

    return map_ordered(one, list(configs), workers)


def rmp_label(n_live: int, d: int) -> str:
    """Percentage truncated to one decimal plus the live-layer count, e.g. ``42.8% (3)``."""
    tenths = (1000 * n_live) // d
    return f"{tenths // 10}.{tenths % 10}% ({n_live})"


def records_to_json(records: Sequence[Any]) -> list[dict]:
    out = []
    for r in records:
        if isinstance(r, RunRecord):
            out.append(r.to_json())
        else:
            out.append({"config": r.config, "error": r.error})
    return out
