"""Feed-forward Q-function in plain numpy: forward pass, masked TD loss, backprop, SGD.

Hidden layers use ReLU, the output layer is linear with one unit per action.
Weights are stored output-neuron-major, i.e. ``W[l]`` has shape
``(layer_sizes[l+1], layer_sizes[l])``.
"""
from __future__ import annotations

import math
import struct
from pathlib import Path
from typing import Sequence

import numpy as np

from plantnav.dynamics import N_ACTIONS
from plantnav.errors import (
    BadMagicError,
    ConfigError,
    LayoutMismatchError,
    NumericalError,
    ShapeMismatchError,
    TruncatedCheckpointError,
)
from plantnav.features import FEATURE_LAYOUT_HASH, N_FEATURES

DEFAULT_LAYER_SIZES = (N_FEATURES, 64, 64, N_ACTIONS)
MAGIC = b"DQNCKPT1"


class QNetwork:
    def __init__(self, weights: list[np.ndarray], biases: list[np.ndarray],
                 layout_hash: int = FEATURE_LAYOUT_HASH):
        if len(weights) != len(biases) or not weights:
            raise ValueError("need one bias vector per weight matrix")
        for i, (w, b) in enumerate(zip(weights, biases)):
            if w.ndim != 2 or b.shape != (w.shape[0],):
                raise ValueError(f"layer {i}: bias shape {b.shape} does not match weights {w.shape}")
            if i and w.shape[1] != weights[i - 1].shape[0]:
                raise ValueError(f"layer {i}: input width {w.shape[1]} != previous output {weights[i - 1].shape[0]}")
        self.weights = [np.asarray(w, dtype=np.float64) for w in weights]
        self.biases = [np.asarray(b, dtype=np.float64) for b in biases]
        self.layout_hash = layout_hash

    @property
    def layer_sizes(self) -> tuple[int, ...]:
        return (self.weights[0].shape[1],) + tuple(w.shape[0] for w in self.weights)

    def params(self) -> list[np.ndarray]:
        """Parameter arrays in storage order: W0, b0, W1, b1, ..."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out += [w, b]
        return out

    def n_params(self) -> int:
        return sum(p.size for p in self.params())

    def copy(self) -> "QNetwork":
        return QNetwork([w.copy() for w in self.weights], [b.copy() for b in self.biases], self.layout_hash)

    def to_bytes(self) -> bytes:
        return b"".join(p.astype("<f8").tobytes() for p in self.params())

    def param_norms(self) -> list[float]:
        return [float(np.linalg.norm(p)) for p in self.params()]

    def __call__(self, x) -> np.ndarray:
        return forward(self, x)


def init(layer_sizes: Sequence[int] = DEFAULT_LAYER_SIZES, rng: np.random.Generator | None = None,
         layout_hash: int = FEATURE_LAYOUT_HASH) -> QNetwork:
    """Glorot-uniform weights, zero biases."""
    sizes = tuple(int(n) for n in layer_sizes)
    if len(sizes) < 2 or min(sizes) < 1:
        raise ConfigError(f"invalid layer sizes {sizes}")
    if sizes[-1] != N_ACTIONS:
        raise ConfigError(f"output layer must have {N_ACTIONS} units, got {sizes[-1]}")
    if rng is None:
        rng = np.random.default_rng()
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        limit = math.sqrt(6.0 / (fan_in + fan_out))
        weights.append(rng.uniform(-limit, limit, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out))
    return QNetwork(weights, biases, layout_hash)


def forward(net: QNetwork, x) -> np.ndarray:
    """Action values for one input vector (shape ``(6,)``) or a batch (``(B, 6)``)."""
    h = np.asarray(x, dtype=np.float64)
    if h.shape[-1] != net.weights[0].shape[1]:
        raise ValueError(f"input width {h.shape[-1]} != network input {net.weights[0].shape[1]}")
    last = len(net.weights) - 1
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
    return h


def loss_and_grad(net: QNetwork, phis, actions, targets) -> tuple[float, list[np.ndarray]]:
    """Mean squared TD error over the batch and its gradient.

    Only the output unit of each sample's chosen action enters the loss.
    The gradient list is parallel to ``net.params()``.
    """
    x = np.asarray(phis, dtype=np.float64)
    if x.ndim != 2 or len(x) == 0:
        raise ValueError("phis must be a nonempty 2-D batch")
    a = np.asarray(actions, dtype=np.intp)
    y = np.asarray(targets, dtype=np.float64)
    n = len(x)
    if a.shape != (n,) or y.shape != (n,):
        raise ValueError("actions and targets must have one entry per batch row")

    acts = [x]
    last = len(net.weights) - 1
    h = x
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        h = h @ w.T + b
        if i < last:
            h = np.maximum(h, 0.0)
            acts.append(h)
    rows = np.arange(n)
    residual = y - h[rows, a]
    loss = float(np.mean(residual * residual))

    delta = np.zeros_like(h)
    delta[rows, a] = -2.0 * residual / n
    grads: list[np.ndarray] = [None] * (2 * len(net.weights))  # type: ignore[list-item]
    for i in range(last, -1, -1):
        grads[2 * i] = delta.T @ acts[i]
        grads[2 * i + 1] = delta.sum(axis=0)
        if i:
            # ReLU derivative taken as 0 at exactly 0
            delta = (delta @ net.weights[i]) * (acts[i] > 0.0)
    return loss, grads


def sgd_step(net: QNetwork, grads: list[np.ndarray], lr: float) -> QNetwork:
    """In-place ``theta <- theta - lr * grad``; returns ``net``.

    Raises:
        NumericalError: a gradient entry is NaN or infinite.
    """
    params = net.params()
    if len(grads) != len(params):
        raise ValueError("gradient list does not match network parameters")
    for p, g in zip(params, grads):
        if g.shape != p.shape:
            raise ValueError(f"gradient shape {g.shape} != parameter shape {p.shape}")
        if not np.all(np.isfinite(g)):
            raise NumericalError("non-finite gradient")
    for p, g in zip(params, grads):
        p -= lr * g
    return net


def sync_target(net: QNetwork) -> QNetwork:
    return net.copy()


# --- checkpoints -----------------------------------------------------------

def checkpoint_bytes(net: QNetwork) -> bytes:
    sizes = net.layer_sizes
    header = MAGIC + struct.pack("<I", len(sizes)) + struct.pack(f"<{len(sizes)}I", *sizes)
    header += struct.pack("<Q", net.layout_hash)
    return header + net.to_bytes()


def save_checkpoint(net: QNetwork, path: str | Path) -> None:
    Path(path).write_bytes(checkpoint_bytes(net))


def parse_checkpoint(data: bytes, expected_layout: int | None = None) -> QNetwork:
    if len(data) < len(MAGIC):
        raise TruncatedCheckpointError("file shorter than the magic header")
    if data[: len(MAGIC)] != MAGIC:
        raise BadMagicError("not a checkpoint (bad magic bytes)")
    off = len(MAGIC)
    if len(data) < off + 4:
        raise TruncatedCheckpointError("truncated before layer count")
    (count,) = struct.unpack_from("<I", data, off)
    off += 4
    if count < 2 or count > 64:
        raise ShapeMismatchError(f"implausible layer count {count}")
    if len(data) < off + 4 * count + 8:
        raise TruncatedCheckpointError("truncated inside header")
    sizes = struct.unpack_from(f"<{count}I", data, off)
    off += 4 * count
    (layout,) = struct.unpack_from("<Q", data, off)
    off += 8
    if min(sizes) < 1 or sizes[-1] != N_ACTIONS:
        raise ShapeMismatchError(f"invalid layer sizes {sizes}")
    n_values = sum(o * i + o for i, o in zip(sizes[:-1], sizes[1:]))
    body = data[off:]
    if len(body) < 8 * n_values:
        raise TruncatedCheckpointError(f"expected {8 * n_values} parameter bytes, found {len(body)}")
    if len(body) > 8 * n_values:
        raise ShapeMismatchError("trailing bytes after parameters")
    if expected_layout is not None and layout != expected_layout:
        raise LayoutMismatchError(
            f"checkpoint feature layout {layout:#018x} does not match expected {expected_layout:#018x}"
        )
    values = np.frombuffer(body, dtype="<f8").astype(np.float64)
    weights, biases, k = [], [], 0
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        weights.append(values[k : k + fan_in * fan_out].reshape(fan_out, fan_in).copy())
        k += fan_in * fan_out
        biases.append(values[k : k + fan_out].copy())
        k += fan_out
    return QNetwork(weights, biases, layout)


def load_checkpoint(path: str | Path, expected_layout: int | None = None) -> QNetwork:
    return parse_checkpoint(Path(path).read_bytes(), expected_layout)
