"""Small float64 neural-network engine: dense layers, ELU, dropout, backprop and Adam.

Everything operates on row-major batches (``batch x features``); a single
vector is treated as a batch of one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numba import njit

ACTIVATIONS = ("elu", "identity")


def elu(x):
    """ELU with alpha = 1."""
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, x, np.expm1(np.minimum(x, 0.0)))


def elu_grad(x):
    x = np.asarray(x, dtype=np.float64)
    return np.where(x > 0, 1.0, np.exp(np.minimum(x, 0.0)))


@dataclass
class DenseLayer:
    weights: np.ndarray  # (out, in)
    bias: np.ndarray  # (out,)

    def __post_init__(self):
        self.weights = np.asarray(self.weights, dtype=np.float64)
        self.bias = np.asarray(self.bias, dtype=np.float64)
        if self.weights.ndim != 2 or self.bias.shape != (self.weights.shape[0],):
            raise ValueError(f"inconsistent layer shapes {self.weights.shape} / {self.bias.shape}")
        if not (np.all(np.isfinite(self.weights)) and np.all(np.isfinite(self.bias))):
            raise ValueError("non-finite layer parameters")

    @classmethod
    def xavier(cls, n_in: int, n_out: int, rng: np.random.Generator) -> "DenseLayer":
        limit = math.sqrt(6.0 / (n_in + n_out))
        return cls(rng.uniform(-limit, limit, size=(n_out, n_in)), np.zeros(n_out))

    @classmethod
    def zeros(cls, n_in: int, n_out: int) -> "DenseLayer":
        return cls(np.zeros((n_out, n_in)), np.zeros(n_out))

    @property
    def n_in(self) -> int:
        return self.weights.shape[1]

    @property
    def n_out(self) -> int:
        return self.weights.shape[0]

    def __call__(self, x: np.ndarray) -> np.ndarray:
        return x @ self.weights.T + self.bias

    def params(self) -> list[np.ndarray]:
        return [self.weights, self.bias]


@dataclass
class Mlp:
    """Stack of dense layers.

    Dropout (inverted) follows every ELU layer; identity layers are never
    dropped, so a trailing linear layer stays deterministic.
    """

    layers: list[DenseLayer]
    activations: list[str]
    dropout_rate: float = 0.0

    def __post_init__(self):
        if len(self.layers) != len(self.activations):
            raise ValueError("one activation per layer required")
        for act in self.activations:
            if act not in ACTIVATIONS:
                raise ValueError(f"unknown activation {act!r}")
        for a, b in zip(self.layers, self.layers[1:]):
            if a.n_out != b.n_in:
                raise ValueError(f"layer shapes do not chain: {a.n_out} -> {b.n_in}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must lie in [0, 1)")

    @classmethod
    def build(cls, sizes: Sequence[int], rng: np.random.Generator, dropout_rate: float = 0.0,
              activation: str = "elu") -> "Mlp":
        """Xavier-initialised MLP with ``activation`` on every layer."""
        layers = [DenseLayer.xavier(a, b, rng) for a, b in zip(sizes, sizes[1:])]
        return cls(layers, [activation] * len(layers), dropout_rate)

    @property
    def n_in(self) -> int:
        return self.layers[0].n_in

    @property
    def n_out(self) -> int:
        return self.layers[-1].n_out

    def params(self) -> list[np.ndarray]:
        return [p for layer in self.layers for p in layer.params()]


@dataclass
class ForwardCache:
    mlp: Mlp
    inputs: list[np.ndarray]  # input to each layer
    preacts: list[np.ndarray]
    masks: list[np.ndarray | None]  # scaled keep-masks, None where no dropout ran
    output: np.ndarray
    squeeze: bool = False

    @property
    def result(self) -> np.ndarray:
        """Output in the caller's shape: a vector for a vector input."""
        return self.output[0] if self.squeeze else self.output

    @property
    def hidden(self) -> list[np.ndarray]:
        """Post-activation (post-dropout) output of every layer."""
        return self.inputs[1:] + [self.output]


def forward(mlp: Mlp, x, train: bool = False, rng: np.random.Generator | None = None) -> ForwardCache:
    x = np.asarray(x, dtype=np.float64)
    squeeze = x.ndim == 1
    if squeeze:
        x = x[None, :]
    if x.shape[1] != mlp.n_in:
        raise ValueError(f"input has {x.shape[1]} features, network expects {mlp.n_in}")
    use_dropout = train and mlp.dropout_rate > 0.0
    if use_dropout and rng is None:
        raise ValueError("train-mode dropout needs a random generator")
    keep = 1.0 - mlp.dropout_rate
    inputs, preacts, masks = [], [], []
    h = x
    for layer, act in zip(mlp.layers, mlp.activations):
        inputs.append(h)
        z = h @ layer.weights.T + layer.bias
        preacts.append(z)
        if act == "elu":
            h = elu(z)
            if use_dropout:
                mask = (rng.random(h.shape) < keep) / keep
                h = h * mask
                masks.append(mask)
            else:
                masks.append(None)
        else:
            h = z
            masks.append(None)
    return ForwardCache(mlp, inputs, preacts, masks, h, squeeze)


def backward(mlp: Mlp, cache: ForwardCache, grad_output) -> tuple[list[np.ndarray], np.ndarray]:
    """Gradients of a scalar objective w.r.t. the parameters and the input.

    Returns ``(param_grads, input_grad)``; ``param_grads`` follows
    ``mlp.params()`` order. Gradients are summed over the batch.
    """
    if cache.mlp is not mlp:
        raise ValueError("forward cache belongs to a different network")
    g = np.asarray(grad_output, dtype=np.float64)
    if g.ndim == 1:
        g = g[None, :]
    if g.shape != cache.output.shape:
        raise ValueError(f"output gradient shape {g.shape} != output shape {cache.output.shape}")
    if any(inp.shape[1] != layer.n_in for inp, layer in zip(cache.inputs, mlp.layers)):
        raise ValueError("stale forward cache: layer shapes changed")
    grads: list[np.ndarray] = [None] * (2 * len(mlp.layers))  # type: ignore[list-item]
    for i in range(len(mlp.layers) - 1, -1, -1):
        layer, act = mlp.layers[i], mlp.activations[i]
        if act == "elu":
            if cache.masks[i] is not None:
                g = g * cache.masks[i]
            g = g * elu_grad(cache.preacts[i])
        grads[2 * i] = g.T @ cache.inputs[i]
        grads[2 * i + 1] = g.sum(axis=0)
        g = g @ layer.weights
    if cache.squeeze:
        g = g[0]
    return grads, g


@dataclass
class AdamState:
    lr: float = 1e-4
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list[np.ndarray] = field(default_factory=list)
    v: list[np.ndarray] = field(default_factory=list)

    @classmethod
    def for_params(cls, params: Sequence[np.ndarray], **hyper) -> "AdamState":
        return cls(m=[np.zeros_like(p) for p in params], v=[np.zeros_like(p) for p in params], **hyper)


@njit(cache=True)
def _all_finite(x):
    for i in range(x.size):
        if not np.isfinite(x[i]):
            return False
    return True


@njit(cache=True)
def _adam_kernel(p, g, m, v, b1, b2, step_size, inv_sqrt_bc2, eps):
    # same operation order as the numpy path, so both give identical bits
    for i in range(p.size):
        gi = g[i]
        mi = m[i] * b1 + gi * (1.0 - b1)
        vi = v[i] * b2 + (gi * gi) * (1.0 - b2)
        m[i] = mi
        v[i] = vi
        p[i] -= (mi / (np.sqrt(vi) * inv_sqrt_bc2 + eps)) * step_size


def _adam_numpy(p, g, m, v, b1, b2, step_size, inv_sqrt_bc2, eps):
    tmp = np.multiply(g, 1.0 - b1)
    m *= b1
    m += tmp
    np.multiply(g, g, out=tmp)
    tmp *= 1.0 - b2
    v *= b2
    v += tmp
    np.sqrt(v, out=tmp)
    tmp *= inv_sqrt_bc2
    tmp += eps
    np.divide(m, tmp, out=tmp)
    tmp *= step_size
    p -= tmp


def adam_step(state: AdamState, params: Sequence[np.ndarray], grads: Sequence[np.ndarray],
              fused: bool = True) -> None:
    """Apply one bias-corrected Adam update, in place on ``params`` and ``state``.

    ``fused`` selects the single-pass compiled kernel; the numpy path is
    kept as a reference and produces the same bits.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ValueError("params, grads and optimizer state differ in length")
    flat_grads = []
    for p, g, m in zip(params, grads, state.m):
        if p.shape != g.shape or p.shape != m.shape:
            raise ValueError(f"shape mismatch {p.shape} / {g.shape} / {m.shape}")
        g = np.ascontiguousarray(g, dtype=np.float64).reshape(-1)
        if not _all_finite(g):
            raise FloatingPointError("non-finite gradient")
        flat_grads.append(g)
    state.step += 1
    b1, b2 = state.beta1, state.beta2
    step_size = state.lr / (1.0 - b1**state.step)
    inv_sqrt_bc2 = 1.0 / math.sqrt(1.0 - b2**state.step)
    for p, g, m, v in zip(params, flat_grads, state.m, state.v):
        if fused and p.flags.c_contiguous:
            _adam_kernel(p.reshape(-1), g, m.reshape(-1), v.reshape(-1), b1, b2, step_size, inv_sqrt_bc2, state.eps)
        else:
            _adam_numpy(p, g.reshape(p.shape), m, v, b1, b2, step_size, inv_sqrt_bc2, state.eps)
