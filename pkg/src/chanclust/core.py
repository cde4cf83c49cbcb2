"""Dense numerical kernel: affine layers, Swish, RevIN, losses and Adam.

Everything operates on float64 numpy arrays. Gradients are derived by hand;
there is no autodiff graph.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, InvalidWindowError

DTYPE = np.float64


def as_matrix(x) -> np.ndarray:
    arr = np.asarray(x, dtype=DTYPE)
    if arr.ndim == 1:
        arr = arr.reshape(1, -1)
    return arr


def _check_shape(name: str, got: tuple, want: tuple) -> None:
    if tuple(got) != tuple(want):
        raise DimensionError(f"{name}: shape {tuple(got)} does not match expected {tuple(want)}")


# ---------------------------------------------------------------------------
# affine layers


@dataclass
class AffineLayer:
    """``y = x @ weight.T + bias``; weight is (out_dim, in_dim).

    The arrays may be views into a larger stacked tensor (see ``LinearBank``),
    in which case gradient accumulation writes through to the stack.
    """

    weight: np.ndarray
    bias: np.ndarray
    grad_weight: np.ndarray = None
    grad_bias: np.ndarray = None

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.shape != (self.weight.shape[0],):
            raise DimensionError(
                f"weight {self.weight.shape} and bias {self.bias.shape} are inconsistent"
            )
        if self.grad_weight is None:
            self.grad_weight = np.zeros_like(self.weight)
        if self.grad_bias is None:
            self.grad_bias = np.zeros_like(self.bias)

    @property
    def in_dim(self) -> int:
        return self.weight.shape[1]

    @property
    def out_dim(self) -> int:
        return self.weight.shape[0]

    @classmethod
    def init(cls, in_dim: int, out_dim: int, rng: np.random.Generator) -> "AffineLayer":
        bound = 1.0 / np.sqrt(in_dim)
        weight = rng.uniform(-bound, bound, size=(out_dim, in_dim))
        bias = rng.uniform(-bound, bound, size=out_dim)
        return cls(weight, bias)

    def zero_grad(self) -> None:
        self.grad_weight[...] = 0.0
        self.grad_bias[...] = 0.0


def affine_forward(layer: AffineLayer, inputs: np.ndarray) -> np.ndarray:
    x = as_matrix(inputs)
    if x.shape[-1] != layer.in_dim:
        raise DimensionError(
            f"input shape {x.shape} incompatible with layer weight shape {layer.weight.shape}"
        )
    return x @ layer.weight.T + layer.bias


def affine_backward(layer: AffineLayer, inputs: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    """Accumulate parameter gradients and return the gradient w.r.t. ``inputs``."""
    x = as_matrix(inputs)
    g = as_matrix(upstream)
    _check_shape("upstream gradient", g.shape, (x.shape[0], layer.out_dim))
    if x.shape[1] != layer.in_dim:
        raise DimensionError(
            f"input shape {x.shape} incompatible with layer weight shape {layer.weight.shape}"
        )
    layer.grad_weight += g.T @ x
    layer.grad_bias += g.sum(axis=0)
    return g @ layer.weight


def matmul_naive(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Triple-loop reference product; used as a test oracle only."""
    n, k = a.shape
    k2, m = b.shape
    if k != k2:
        raise DimensionError(f"cannot multiply {a.shape} by {b.shape}")
    out = np.zeros((n, m), dtype=DTYPE)
    for i in range(n):
        for j in range(m):
            s = 0.0
            for p in range(k):
                s += float(a[i, p]) * float(b[p, j])
            out[i, j] = s
    return out


# ---------------------------------------------------------------------------
# activation


def sigmoid(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    # split by sign so exp never overflows
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


def swish(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=DTYPE)
    return x * sigmoid(x)


def swish_backward(x: np.ndarray, upstream: np.ndarray) -> np.ndarray:
    s = sigmoid(x)
    return upstream * s * (1.0 + x * (1.0 - s))


# ---------------------------------------------------------------------------
# reversible instance normalization (non-affine)


@dataclass
class RevInState:
    mean: np.ndarray
    std: np.ndarray
    eps: float = 1e-5


def revin_normalize(window: np.ndarray, eps: float = 1e-5) -> tuple[np.ndarray, RevInState]:
    """Standardize each channel over the last axis.

    ``window`` is (..., d, L). Population statistics; a channel whose standard
    deviation is below ``eps`` is scaled by ``eps`` instead.
    """
    w = np.asarray(window, dtype=DTYPE)
    if eps <= 0:
        raise InvalidWindowError(f"epsilon must be positive, got {eps}")
    if w.ndim < 1 or w.shape[-1] < 2:
        raise InvalidWindowError(f"window needs at least 2 time steps, got shape {w.shape}")
    mean = w.mean(axis=-1)
    std = w.std(axis=-1)
    std = np.where(std < eps, eps, std)
    normed = (w - mean[..., None]) / std[..., None]
    return normed, RevInState(mean, std, eps)


def revin_denormalize(forecast: np.ndarray, state: RevInState) -> np.ndarray:
    f = np.asarray(forecast, dtype=DTYPE)
    if f.shape[:-1] != state.mean.shape:
        raise DimensionError(
            f"forecast shape {f.shape} does not match normalization state {state.mean.shape}"
        )
    return f * state.std[..., None] + state.mean[..., None]


# ---------------------------------------------------------------------------
# losses


def _check_pair(pred: np.ndarray, target: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=DTYPE)
    t = np.asarray(target, dtype=DTYPE)
    if p.shape != t.shape:
        raise DimensionError(f"prediction shape {p.shape} != target shape {t.shape}")
    return p, t


def mse(pred, target) -> float:
    p, t = _check_pair(pred, target)
    return float(np.mean((p - t) ** 2))


def mae(pred, target) -> float:
    p, t = _check_pair(pred, target)
    return float(np.mean(np.abs(p - t)))


def mse_backward(pred, target) -> np.ndarray:
    p, t = _check_pair(pred, target)
    return 2.0 * (p - t) / p.size


# ---------------------------------------------------------------------------
# optimizer


@dataclass
class AdamState:
    lr: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


class Adam:
    """Bias-corrected Adam over a fixed list of parameter arrays (updated in place).

    ``step`` accepts optional per-parameter row masks; rows whose mask is False
    are left untouched, moments included. That is how frozen layers of a
    stacked bank stay bit-identical.
    """

    def __init__(self, params: list[np.ndarray], grads: list[np.ndarray], lr=1e-3,
                 beta1=0.9, beta2=0.999, eps=1e-8):
        if len(params) != len(grads):
            raise DimensionError("params and grads must pair up")
        for p, g in zip(params, grads):
            _check_shape("gradient buffer", g.shape, p.shape)
        self.params = params
        self.grads = grads
        self.state = AdamState(lr, beta1, beta2, eps, 0,
                               [np.zeros_like(p) for p in params],
                               [np.zeros_like(p) for p in params])

    def step(self, row_masks: list[np.ndarray | None] | None = None) -> None:
        st = self.state
        st.step += 1
        c1 = 1.0 - st.beta1 ** st.step
        c2 = 1.0 - st.beta2 ** st.step
        masks = row_masks if row_masks is not None else [None] * len(self.params)
        for p, g, m, v, mask in zip(self.params, self.grads, st.m, st.v, masks):
            if mask is None:
                m *= st.beta1
                m += (1.0 - st.beta1) * g
                v *= st.beta2
                v += (1.0 - st.beta2) * g * g
                p -= st.lr * (m / c1) / (np.sqrt(v / c2) + st.eps)
            else:
                rows = np.flatnonzero(mask)
                if rows.size:
                    gr = g[rows]
                    m[rows] = st.beta1 * m[rows] + (1.0 - st.beta1) * gr
                    v[rows] = st.beta2 * v[rows] + (1.0 - st.beta2) * gr * gr
                    p[rows] -= st.lr * (m[rows] / c1) / (np.sqrt(v[rows] / c2) + st.eps)
            g[...] = 0.0


def adam_step(optimizer: Adam, row_masks=None) -> None:
    optimizer.step(row_masks)


def derive_seeds(master_seed: int) -> tuple[int, int]:
    """(shuffle_seed, init_seed) from one master seed.

    Every strategy run under the same master seed sees the same batch order.
    """
    ss = np.random.SeedSequence(int(master_seed))
    shuffle_ss, init_ss = ss.spawn(2)
    return int(shuffle_ss.generate_state(1)[0]), int(init_ss.generate_state(1)[0])
