"""Channel strategies for linear banks (CD/CI/CSC) and 2-layer MLPs (CI/CE/CR).

Layer indices are 0-based internally; anything serialized for humans
(mapping JSON) is 1-based.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .core import (Adam, AffineLayer, affine_backward, affine_forward, revin_denormalize,
                   revin_normalize, swish, swish_backward)
from .errors import (ConfigError, CorruptedMappingError, DimensionError, InsufficientDataError,
                     InvalidErrorMatrixError)
from .evaluation import ErrorMatrix
from .parallel import chunks, map_ordered, worker_count

log = logging.getLogger(__name__)

LINEAR_STRATEGIES = ("CD", "CI", "CSC")
MLP_STRATEGIES = ("CI", "CE", "CR")


# ---------------------------------------------------------------------------
# mapping vectors


@dataclass
class MappingVector:
    assignment: np.ndarray  # (d,), 0-based layer index per channel
    epoch: int = 0

    def __post_init__(self):
        self.assignment = np.asarray(self.assignment, dtype=np.int64).copy()

    @property
    def n_channels(self) -> int:
        return len(self.assignment)

    def live_layers(self) -> np.ndarray:
        return np.unique(self.assignment)

    @property
    def n_live(self) -> int:
        return len(self.live_layers())

    @property
    def rmp(self) -> float:
        return self.n_live / self.n_channels

    def to_json(self) -> dict:
        return {"epoch": int(self.epoch), "assignment": [int(a) + 1 for a in self.assignment],
                "rmp": self.rmp}

    @classmethod
    def from_json(cls, obj: dict) -> "MappingVector":
        a = np.asarray(obj["assignment"], dtype=np.int64)
        if a.size and a.min() < 1:
            raise CorruptedMappingError(f"mapping entries must be >= 1, got {a.min()}")
        return cls(a - 1, int(obj.get("epoch", 0)))

    @classmethod
    def identity(cls, d: int, epoch: int = 0) -> "MappingVector":
        return cls(np.arange(d), epoch)

    @classmethod
    def constant(cls, d: int, layer: int = 0, epoch: int = 0) -> "MappingVector":
        return cls(np.full(d, layer), epoch)


def select_layers(error_matrix, epoch: int = 0) -> MappingVector:
    """Per-column argmin of a (layers x channels) error matrix.

    The mean over channels of E[c_j, j] separates per channel, so the
    column-wise minimum is the global minimizer. ``np.argmin`` returns the
    first minimum, i.e. ties go to the smallest layer index.
    """
    values = error_matrix.values if isinstance(error_matrix, ErrorMatrix) else np.asarray(error_matrix, dtype=np.float64)
    if values.ndim != 2 or values.shape[0] != values.shape[1]:
        raise InvalidErrorMatrixError(f"error matrix must be square, got shape {values.shape}")
    if not np.isfinite(values).all():
        raise InvalidErrorMatrixError("error matrix contains NaN or infinite entries")
    return MappingVector(np.argmin(values, axis=0), epoch)


def mapping_objective(values: np.ndarray, assignment: Sequence[int]) -> float:
    d = values.shape[1]
    return float(sum(values[assignment[j], j] for j in range(d)) / d)


def _check_mapping(mapping: MappingVector, n_layers: int, d: int) -> None:
    a = mapping.assignment
    if a.shape != (d,):
        raise CorruptedMappingError(f"mapping has {a.shape[0]} entries for {d} channels")
    if a.size and (a.min() < 0 or a.max() >= n_layers):
        raise CorruptedMappingError(
            f"mapping references layer outside 1..{n_layers}: {sorted(set((a + 1).tolist()))}")


# ---------------------------------------------------------------------------
# linear banks


class LinearBank:
    """A stack of L->T affine layers routed per channel through ``mapping``.

    ``weight`` is (n_layers, T, L). Each channel window is RevIN-normalized,
    passed through its layer and denormalized.
    """

    def __init__(self, weight: np.ndarray, bias: np.ndarray, mapping: MappingVector,
                 strategy: str, revin_eps: float = 1e-5):
        if strategy not in LINEAR_STRATEGIES:
            raise ConfigError(f"unknown linear strategy {strategy!r}", "strategy")
        self.weight = np.ascontiguousarray(weight, dtype=np.float64)
        self.bias = np.ascontiguousarray(bias, dtype=np.float64)
        if self.bias.shape != self.weight.shape[:2]:
            raise DimensionError(f"bias {self.bias.shape} does not fit weight {self.weight.shape}")
        self.grad_weight = np.zeros_like(self.weight)
        self.grad_bias = np.zeros_like(self.bias)
        self.mapping = mapping
        self.strategy = strategy
        self.revin_eps = revin_eps
        if strategy == "CD" and self.n_layers != 1:
            raise ConfigError("a CD bank has exactly one layer", "strategy")

    @classmethod
    def init(cls, strategy: str, n_channels: int, lookback: int, horizon: int,
             rng: np.random.Generator, revin_eps: float = 1e-5) -> "LinearBank":
        n_layers = 1 if strategy == "CD" else n_channels
        bound = 1.0 / np.sqrt(lookback)
        weight = rng.uniform(-bound, bound, size=(n_layers, horizon, lookback))
        bias = rng.uniform(-bound, bound, size=(n_layers, horizon))
        mapping = MappingVector.constant(n_channels) if strategy == "CD" else MappingVector.identity(n_channels)
        return cls(weight, bias, mapping, strategy, revin_eps)

    @property
    def n_layers(self) -> int:
        return self.weight.shape[0]

    @property
    def n_channels(self) -> int:
        return self.mapping.n_channels

    @property
    def horizon(self) -> int:
        return self.weight.shape[1]

    @property
    def lookback(self) -> int:
        return self.weight.shape[2]

    def layer(self, k: int) -> AffineLayer:
        return AffineLayer(self.weight[k], self.bias[k], self.grad_weight[k], self.grad_bias[k])

    def live_mask(self) -> np.ndarray:
        mask = np.zeros(self.n_layers, dtype=bool)
        mask[self.mapping.live_layers()] = True
        return mask

    def set_mapping(self, mapping: MappingVector) -> None:
        _check_mapping(mapping, self.n_layers, self.n_channels)
        self.mapping = mapping

    def _check_inputs(self, x: np.ndarray) -> None:
        if x.ndim != 3 or x.shape[1:] != (self.n_channels, self.lookback):
            raise DimensionError(
                f"inputs of shape {x.shape} do not match bank (d={self.n_channels}, L={self.lookback})")
        _check_mapping(self.mapping, self.n_layers, self.n_channels)

    def _groups(self):
        a = self.mapping.assignment
        for k in self.mapping.live_layers():
            yield int(k), np.flatnonzero(a == k)

    def forward(self, inputs: np.ndarray):
        x = np.asarray(inputs, dtype=np.float64)
        self._check_inputs(x)
        xn, state = revin_normalize(x, self.revin_eps)
        B = x.shape[0]
        out = np.empty((B, self.n_channels, self.horizon))
        for k, chans in self._groups():
            xg = xn[:, chans, :].reshape(-1, self.lookback)
            out[:, chans, :] = affine_forward(self.layer(k), xg).reshape(B, len(chans), self.horizon)
        return revin_denormalize(out, state), (xn, state)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return self.forward(inputs)[0]

    def backward(self, cache, upstream: np.ndarray) -> None:
        xn, state = cache
        g = upstream * state.std[..., None]
        for k, chans in self._groups():
            xg = xn[:, chans, :].reshape(-1, self.lookback)
            affine_backward(self.layer(k), xg, g[:, chans, :].reshape(-1, self.horizon))

    def loss_and_grad(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        pred, cache = self.forward(inputs)
        diff = pred - targets
        self.backward(cache, 2.0 * diff / diff.size)
        return float(np.mean(diff * diff))

    def parameters(self) -> list[np.ndarray]:
        return [self.weight, self.bias]

    def gradients(self) -> list[np.ndarray]:
        return [self.grad_weight, self.grad_bias]

    def row_masks(self) -> list[np.ndarray]:
        m = self.live_mask()
        return [m, m]

    def make_optimizer(self, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8) -> Adam:
        return Adam(self.parameters(), self.gradients(), lr, beta1, beta2, eps)

    def count_parameters(self, live_only: bool = True) -> int:
        per_layer = self.horizon * self.lookback + self.horizon
        n = self.mapping.n_live if live_only else self.n_layers
        return n * per_layer

    def error_matrix(self, stream, split_label: str = "val") -> ErrorMatrix:
        return compute_error_matrix(self, stream, split_label)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {"weight": self.weight, "bias": self.bias}

    def copy(self) -> "LinearBank":
        return LinearBank(self.weight.copy(), self.bias.copy(),
                          MappingVector(self.mapping.assignment, self.mapping.epoch),
                          self.strategy, self.revin_eps)


def forward_linear(bank: LinearBank, batch) -> np.ndarray:
    return bank.predict(batch.inputs)


def _cross_apply_sums(apply_fn, n_layers: int, stream, d: int, eps: float) -> tuple[np.ndarray, int]:
    """Sum of squared error for every (layer, channel) cell over a stream.

    ``apply_fn(k, xn, state)`` returns the denormalized (B, d, T) forecast of
    layer ``k`` applied to every channel. Layers are split into contiguous
    chunks evaluated in parallel; each cell is reduced by exactly one worker in
    batch order, so the result does not depend on the thread count.
    """
    batches = list(stream)
    if not batches:
        raise InsufficientDataError("validation stream is empty")
    count = sum(b.targets.shape[0] * b.targets.shape[2] for b in batches)
    normed = [revin_normalize(b.inputs, eps) for b in batches]

    def work(rows: range) -> np.ndarray:
        sums = np.zeros((len(rows), d))
        for b, (xn, state) in zip(batches, normed):
            for r, k in enumerate(rows):
                err = apply_fn(k, xn, state) - b.targets
                sums[r] += np.einsum("bjt,bjt->j", err, err)
        return sums

    parts = map_ordered(work, chunks(n_layers, worker_count()))
    return np.vstack(parts), count


def compute_error_matrix(bank: LinearBank, stream, split_label: str = "val") -> ErrorMatrix:
    """E[i, j] = mean MSE of layer ``i`` applied to channel ``j`` over ``stream``.

    Every allocated layer is evaluated, including currently unmapped ones.
    """
    if bank.n_layers != bank.n_channels:
        raise DimensionError(f"error matrix needs d layers, bank has {bank.n_layers} for d={bank.n_channels}")
    L, T, d = bank.lookback, bank.horizon, bank.n_channels

    def apply(k, xn, state):
        B = xn.shape[0]
        y = xn.reshape(-1, L) @ bank.weight[k].T + bank.bias[k]
        return revin_denormalize(y.reshape(B, d, T), state)

    sums, count = _cross_apply_sums(apply, bank.n_layers, stream, d, bank.revin_eps)
    return ErrorMatrix(sums / count, "layer", split_label)


def train_epoch(model, stream, optimizer: Adam) -> float:
    """One pass over ``stream``; returns the window-weighted mean training loss."""
    total = 0.0
    n = 0
    masks = model.row_masks()
    for batch in stream:
        loss = model.loss_and_grad(batch.inputs, batch.targets)
        optimizer.step(masks)
        total += loss * len(batch)
        n += len(batch)
    if n == 0:
        raise InsufficientDataError("training stream is empty")
    return total / n


def train_epoch_linear(bank: LinearBank, stream, optimizer: Adam) -> float:
    return train_epoch(bank, stream, optimizer)


@dataclass
class ScheduleResult:
    model: object
    history: list[MappingVector]
    train_losses: list[float]


EpochHook = Callable[[int, object, float], None]


def csc_schedule(bank: LinearBank, train_stream, val_stream, total_epochs: int = 10,
                 selection_epochs: Iterable[int] = (1, 2), optimizer: Adam | None = None,
                 on_epoch: EpochHook | None = None) -> ScheduleResult:
    """Train a bank under CI routing, re-selecting layers after the listed epochs.

    Epoch numbers are 1-based. The first epoch always trains under the
    identity mapping; selection events read only ``val_stream``.
    """
    selection = sorted(set(selection_epochs))
    if any(e < 1 or e > total_epochs for e in selection):
        raise ConfigError(f"selection epochs {selection} must lie in 1..{total_epochs}", "selection_epochs")
    optimizer = optimizer or bank.make_optimizer()
    history = [MappingVector(bank.mapping.assignment, 0)]
    losses = []
    for epoch in range(1, total_epochs + 1):
        losses.append(train_epoch(bank, train_stream, optimizer))
        if epoch in selection:
            errors = compute_error_matrix(bank, val_stream)
            bank.set_mapping(select_layers(errors, epoch))
            history.append(bank.mapping)
            log.info("epoch %d: layer selection kept %d of %d layers", epoch, bank.mapping.n_live, bank.n_layers)
        if on_epoch is not None:
            on_epoch(epoch, bank, losses[-1])
    return ScheduleResult(bank, history, losses)


# ---------------------------------------------------------------------------
# 2-layer MLPs


class MlpModel:
    """Encoder (L->H) -> Swish -> [channel embedding] -> decoder (->T), RevIN-wrapped.

    ``enc_weight`` is (n_encoders, H, L); channel ``j`` uses encoder
    ``mapping[j]``. Before CR replication there is one shared encoder.
    """

    def __init__(self, enc_weight, enc_bias, dec_weight, dec_bias, mapping: MappingVector,
                 strategy: str, embeddings: np.ndarray | None = None, revin_eps: float = 1e-5,
                 freeze_decoder: bool = False):
        if strategy not in MLP_STRATEGIES:
            raise ConfigError(f"unknown MLP strategy {strategy!r}", "strategy")
        self.enc_weight = np.ascontiguousarray(enc_weight, dtype=np.float64)
        self.enc_bias = np.ascontiguousarray(enc_bias, dtype=np.float64)
        self.dec_weight = np.ascontiguousarray(dec_weight, dtype=np.float64)
        self.dec_bias = np.ascontiguousarray(dec_bias, dtype=np.float64)
        self.embeddings = None if embeddings is None else np.ascontiguousarray(embeddings, dtype=np.float64)
        self.mapping = mapping
        self.strategy = strategy
        self.revin_eps = revin_eps
        self.freeze_decoder = freeze_decoder
        self.grad_enc_weight = np.zeros_like(self.enc_weight)
        self.grad_enc_bias = np.zeros_like(self.enc_bias)
        self.grad_dec_weight = np.zeros_like(self.dec_weight)
        self.grad_dec_bias = np.zeros_like(self.dec_bias)
        self.grad_embeddings = None if self.embeddings is None else np.zeros_like(self.embeddings)
        if self.dec_weight.shape[1] != self.hidden + self.embed_dim:
            raise DimensionError(
                f"decoder input width {self.dec_weight.shape[1]} != hidden {self.hidden} + embed {self.embed_dim}")
        _check_mapping(mapping, self.n_encoders, mapping.n_channels)

    @classmethod
    def init(cls, strategy: str, n_channels: int, lookback: int, horizon: int, hidden: int,
             rng: np.random.Generator, embed_dim: int = 16, revin_eps: float = 1e-5) -> "MlpModel":
        enc = AffineLayer.init(lookback, hidden, rng)
        e = embed_dim if strategy == "CE" else 0
        dec = AffineLayer.init(hidden + e, horizon, rng)
        emb = rng.standard_normal((n_channels, e)) if strategy == "CE" else None
        return cls(enc.weight[None], enc.bias[None], dec.weight, dec.bias,
                   MappingVector.constant(n_channels), strategy, emb, revin_eps)

    @property
    def n_encoders(self) -> int:
        return self.enc_weight.shape[0]

    @property
    def n_channels(self) -> int:
        return self.mapping.n_channels

    @property
    def hidden(self) -> int:
        return self.enc_weight.shape[1]

    @property
    def lookback(self) -> int:
        return self.enc_weight.shape[2]

    @property
    def horizon(self) -> int:
        return self.dec_weight.shape[0]

    @property
    def embed_dim(self) -> int:
        return 0 if self.embeddings is None else self.embeddings.shape[1]

    def _check(self, x: np.ndarray) -> None:
        if x.ndim != 3 or x.shape[1:] != (self.n_channels, self.lookback):
            raise DimensionError(
                f"inputs of shape {x.shape} do not match model (d={self.n_channels}, L={self.lookback})")
        if self.strategy == "CE" and self.embeddings is None:
            raise ConfigError("CE model has no channel embedding table", "embed_dim")
        _check_mapping(self.mapping, self.n_encoders, self.n_channels)

    def _encode(self, xn: np.ndarray, enc: int, j: int) -> np.ndarray:
        return xn[:, j, :] @ self.enc_weight[enc].T + self.enc_bias[enc]

    def forward(self, inputs: np.ndarray):
        x = np.asarray(inputs, dtype=np.float64)
        self._check(x)
        xn, state = revin_normalize(x, self.revin_eps)
        B, d = x.shape[0], self.n_channels
        # one product per channel with identical operand shapes whatever the
        # routing, so a replicated encoder reproduces the shared one exactly
        z = np.empty((B, d, self.hidden))
        for j, enc in enumerate(self.mapping.assignment):
            z[:, j, :] = self._encode(xn, enc, j)
        a = swish(z)
        if self.embeddings is not None:
            a = np.concatenate([a, np.broadcast_to(self.embeddings, (B, d, self.embed_dim))], axis=2)
        y = (a.reshape(B * d, -1) @ self.dec_weight.T + self.dec_bias).reshape(B, d, self.horizon)
        return revin_denormalize(y, state), (xn, state, z, a)

    def predict(self, inputs: np.ndarray) -> np.ndarray:
        return self.forward(inputs)[0]

    def backward(self, cache, upstream: np.ndarray) -> None:
        xn, state, z, a = cache
        B, d = z.shape[:2]
        g = (upstream * state.std[..., None]).reshape(B * d, self.horizon)
        a2 = a.reshape(B * d, -1)
        if not self.freeze_decoder:
            self.grad_dec_weight += g.T @ a2
            self.grad_dec_bias += g.sum(axis=0)
        da = (g @ self.dec_weight).reshape(B, d, -1)
        if self.embeddings is not None:
            self.grad_embeddings += da[:, :, self.hidden:].sum(axis=0)
            da = da[:, :, :self.hidden]
        dz = swish_backward(z, da)
        for j, enc in enumerate(self.mapping.assignment):
            self.grad_enc_weight[enc] += dz[:, j, :].T @ xn[:, j, :]
            self.grad_enc_bias[enc] += dz[:, j, :].sum(axis=0)

    def loss_and_grad(self, inputs: np.ndarray, targets: np.ndarray) -> float:
        pred, cache = self.forward(inputs)
        diff = pred - targets
        self.backward(cache, 2.0 * diff / diff.size)
        return float(np.mean(diff * diff))

    def _param_groups(self):
        groups = [(self.enc_weight, self.grad_enc_weight, True), (self.enc_bias, self.grad_enc_bias, True)]
        if not self.freeze_decoder:
            groups += [(self.dec_weight, self.grad_dec_weight, False), (self.dec_bias, self.grad_dec_bias, False)]
        if self.embeddings is not None:
            groups.append((self.embeddings, self.grad_embeddings, False))
        return groups

    def parameters(self) -> list[np.ndarray]:
        return [p for p, _, _ in self._param_groups()]

    def gradients(self) -> list[np.ndarray]:
        return [g for _, g, _ in self._param_groups()]

    def row_masks(self) -> list[np.ndarray | None]:
        live = np.zeros(self.n_encoders, dtype=bool)
        live[self.mapping.live_layers()] = True
        return [live if per_encoder else None for _, _, per_encoder in self._param_groups()]

    def make_optimizer(self, lr=5e-4, beta1=0.9, beta2=0.999, eps=1e-8) -> Adam:
        return Adam(self.parameters(), self.gradients(), lr, beta1, beta2, eps)

    def count_parameters(self, live_only: bool = True) -> int:
        per_enc = self.hidden * self.lookback + self.hidden
        n_enc = self.mapping.n_live if live_only else self.n_encoders
        dec = self.dec_weight.size + self.dec_bias.size
        emb = 0 if self.embeddings is None else self.embeddings.size
        return n_enc * per_enc + dec + emb

    def replicate(self) -> "MlpModel":
        """One copy of the shared encoder per channel, identity mapping, decoder frozen."""
        if self.n_encoders != 1:
            raise ConfigError("replication expects a single shared encoder", "strategy")
        d = self.n_channels
        return MlpModel(np.repeat(self.enc_weight, d, axis=0), np.repeat(self.enc_bias, d, axis=0),
                        self.dec_weight.copy(), self.dec_bias.copy(), MappingVector.identity(d),
                        "CR", None if self.embeddings is None else self.embeddings.copy(),
                        self.revin_eps, freeze_decoder=True)

    def set_mapping(self, mapping: MappingVector) -> None:
        _check_mapping(mapping, self.n_encoders, self.n_channels)
        self.mapping = mapping

    def state_dict(self) -> dict[str, np.ndarray]:
        out = {"enc_weight": self.enc_weight, "enc_bias": self.enc_bias,
               "dec_weight": self.dec_weight, "dec_bias": self.dec_bias}
        if self.embeddings is not None:
            out["embeddings"] = self.embeddings
        return out


def forward_mlp(model: MlpModel, batch) -> np.ndarray:
    return model.predict(batch.inputs)


def compute_encoder_error_matrix(model: MlpModel, stream, split_label: str = "val") -> ErrorMatrix:
    """M[i, j] = validation MSE of encoder ``i`` plus the shared decoder on channel ``j``."""
    d, H, T = model.n_channels, model.hidden, model.horizon
    if model.n_encoders != d:
        raise DimensionError(f"encoder error matrix needs {d} encoders, model has {model.n_encoders}")

    def apply(k, xn, state):
        B = xn.shape[0]
        a = swish(xn.reshape(-1, model.lookback) @ model.enc_weight[k].T + model.enc_bias[k])
        if model.embeddings is not None:
            emb = np.broadcast_to(model.embeddings, (B, d, model.embed_dim)).reshape(B * d, -1)
            a = np.concatenate([a, emb], axis=1)
        y = a @ model.dec_weight.T + model.dec_bias
        return revin_denormalize(y.reshape(B, d, T), state)

    sums, count = _cross_apply_sums(apply, d, stream, d, model.revin_eps)
    return ErrorMatrix(sums / count, "layer", split_label)


def cr_schedule(model: MlpModel, train_stream, val_stream, pretrain_epochs: int = 15,
                total_epochs: int = 18, rearrange_epochs: Iterable[int] = (16, 17, 18),
                lr: float = 5e-4, adam_kwargs: dict | None = None, unfreeze_decoder: bool = False,
                on_epoch: EpochHook | None = None,
                on_replicate: Callable[[MlpModel], None] | None = None) -> ScheduleResult:
    """Pretrain a shared encoder/decoder, replicate the encoder per channel, rearrange.

    After replication only encoders train (unless ``unfreeze_decoder``), and
    after every epoch in ``rearrange_epochs`` each channel moves to the encoder
    with the lowest validation loss on it.
    """
    rearrange = sorted(set(rearrange_epochs))
    if pretrain_epochs < 0 or pretrain_epochs > total_epochs:
        raise ConfigError("pretrain_epochs must lie in 0..total_epochs", "pretrain_epochs")
    if any(e <= pretrain_epochs or e > total_epochs for e in rearrange):
        raise ConfigError(
            f"rearrange epochs {rearrange} must lie in {pretrain_epochs + 1}..{total_epochs}", "rearrange_epochs")
    adam_kwargs = adam_kwargs or {}
    opt = model.make_optimizer(lr, **adam_kwargs)
    losses = []
    for epoch in range(1, pretrain_epochs + 1):
        losses.append(train_epoch(model, train_stream, opt))
        if on_epoch is not None:
            on_epoch(epoch, model, losses[-1])

    model = model.replicate()
    model.freeze_decoder = not unfreeze_decoder
    if on_replicate is not None:
        on_replicate(model)
    history = [MappingVector(model.mapping.assignment, pretrain_epochs)]
    opt = model.make_optimizer(lr, **adam_kwargs)
    for epoch in range(pretrain_epochs + 1, total_epochs + 1):
        losses.append(train_epoch(model, train_stream, opt))
        if epoch in rearrange:
            errors = compute_encoder_error_matrix(model, val_stream)
            model.set_mapping(select_layers(errors, epoch))
            history.append(model.mapping)
            log.info("epoch %d: rearrangement uses %d of %d encoders", epoch, model.mapping.n_live, model.n_encoders)
        if on_epoch is not None:
            on_epoch(epoch, model, losses[-1])
    return ScheduleResult(model, history, losses)


def count_parameters(model, live_only: bool = True) -> int:
    return model.count_parameters(live_only)
