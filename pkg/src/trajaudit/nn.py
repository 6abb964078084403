"""Minimal dense-network stack: forward, manual backprop, SGD.

All math is float64. The hot per-layer loops live in the kernel backend
(compiled extension or numpy fallback, see :mod:`trajaudit.kernels`); this
module owns parameter containers, initialization, checkpoints, and the
update rule.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

from trajaudit import kernels
from trajaudit.errors import NumericError, ShapeError

ACTIVATIONS = {
    "identity": kernels.ACT_IDENTITY,
    "relu": kernels.ACT_RELU,
    "tanh": kernels.ACT_TANH,
    "sigmoid": kernels.ACT_SIGMOID,
}


@dataclasses.dataclass
class Mlp:
    """Fully-connected net: weights[i] is (out, in), biases[i] is (out,)."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]
    activations: list[str]

    def __post_init__(self):
        if not (len(self.weights) == len(self.biases) == len(self.activations)):
            raise ShapeError("weights, biases, activations must have equal length")
        for i, (w, b, act) in enumerate(
            zip(self.weights, self.biases, self.activations)
        ):
            if act not in ACTIVATIONS:
                raise ShapeError(f"layer {i}: unknown activation {act!r}")
            if w.ndim != 2 or b.ndim != 1 or w.shape[0] != b.shape[0]:
                raise ShapeError(f"layer {i}: weight {w.shape} / bias {b.shape}")
            if i > 0 and w.shape[1] != self.weights[i - 1].shape[0]:
                raise ShapeError(
                    f"layer {i} expects in-dim {w.shape[1]}, "
                    f"previous layer emits {self.weights[i - 1].shape[0]}"
                )

    @property
    def in_dim(self) -> int:
        return self.weights[0].shape[1]

    @property
    def out_dim(self) -> int:
        return self.weights[-1].shape[0]

    @property
    def act_codes(self) -> list[int]:
        return [ACTIVATIONS[a] for a in self.activations]

    def copy(self) -> "Mlp":
        return Mlp(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            list(self.activations),
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(w)) for w in self.weights) and all(
            np.all(np.isfinite(b)) for b in self.biases
        )


@dataclasses.dataclass
class GradientSet:
    """Per-parameter gradients, shape-congruent with an Mlp."""

    d_weights: list[np.ndarray]
    d_biases: list[np.ndarray]

    def global_norm(self) -> float:
        sq = sum(float(np.sum(g * g)) for g in self.d_weights)
        sq += sum(float(np.sum(g * g)) for g in self.d_biases)
        return float(np.sqrt(sq))

    def scaled(self, factor: float) -> "GradientSet":
        return GradientSet(
            [g * factor for g in self.d_weights],
            [g * factor for g in self.d_biases],
        )

    def add_(self, other: "GradientSet") -> "GradientSet":
        for a, b in zip(self.d_weights, other.d_weights):
            a += b
        for a, b in zip(self.d_biases, other.d_biases):
            a += b
        return self

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(g)) for g in self.d_weights) and all(
            np.all(np.isfinite(g)) for g in self.d_biases
        )

    @classmethod
    def zeros_like(cls, net: Mlp) -> "GradientSet":
        return cls(
            [np.zeros_like(w) for w in net.weights],
            [np.zeros_like(b) for b in net.biases],
        )


def init_mlp(dims: list[int], activations: list[str], rng: np.random.Generator) -> Mlp:
    """Glorot-uniform weights in [-sqrt(6/(in+out)), +sqrt(6/(in+out))], zero biases."""
    if len(dims) < 2 or len(activations) != len(dims) - 1:
        raise ShapeError("need len(dims) >= 2 and one activation per layer")
    weights, biases = [], []
    for d_in, d_out in zip(dims[:-1], dims[1:]):
        limit = np.sqrt(6.0 / (d_in + d_out))
        weights.append(rng.uniform(-limit, limit, size=(d_out, d_in)))
        biases.append(np.zeros(d_out))
    return Mlp(weights, biases, list(activations))


def forward_batch(net: Mlp, x: np.ndarray, want_cache: bool = False):
    """Evaluate the net on a (batch, in_dim) matrix."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] != net.in_dim:
        raise ShapeError(f"input shape {x.shape}, expected (*, {net.in_dim})")
    out, cache = kernels.forward_batch(net.weights, net.biases, net.act_codes, x)
    return (out, cache) if want_cache else out


def forward(net: Mlp, x: np.ndarray) -> np.ndarray:
    """Evaluate the net on a single input vector."""
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != net.in_dim:
        raise ShapeError(f"input shape {x.shape}, expected ({net.in_dim},)")
    return forward_batch(net, x[None, :])[0]


def backward_batch(net: Mlp, cache, d_out: np.ndarray):
    """Gradients of a scalar loss given d(loss)/d(output) for a batch.

    Returns (GradientSet summed over the batch, d(loss)/d(input)).
    """
    d_out = np.asarray(d_out, dtype=np.float64)
    d_weights, d_biases, d_x = kernels.backward_batch(
        net.weights, net.act_codes, cache, d_out
    )
    return GradientSet(d_weights, d_biases), d_x


def backward(net: Mlp, x: np.ndarray, upstream: np.ndarray) -> GradientSet:
    """Exact analytic parameter gradients for one input vector."""
    x = np.asarray(x, dtype=np.float64)
    upstream = np.asarray(upstream, dtype=np.float64)
    if upstream.shape != (net.out_dim,):
        raise ShapeError(f"upstream shape {upstream.shape}, expected ({net.out_dim},)")
    _, cache = forward_batch(net, x[None, :], want_cache=True)
    grads, _ = backward_batch(net, cache, upstream[None, :])
    return grads


def sgd_step(net: Mlp, grads: GradientSet, lr: float) -> Mlp:
    """In-place update: parameter -= lr * gradient. Returns the same net."""
    if lr <= 0:
        raise ValueError(f"lr must be positive, got {lr}")
    if len(grads.d_weights) != len(net.weights):
        raise ShapeError("gradient layer count does not match net")
    for w, dw in zip(net.weights, grads.d_weights):
        if w.shape != dw.shape:
            raise ShapeError(f"gradient shape {dw.shape} vs weight {w.shape}")
        w -= lr * dw
    for b, db in zip(net.biases, grads.d_biases):
        if b.shape != db.shape:
            raise ShapeError(f"gradient shape {db.shape} vs bias {b.shape}")
        b -= lr * db
    if not net.all_finite():
        raise NumericError("non-finite parameters after SGD step")
    return net


def save_mlp(net: Mlp, path) -> None:
    """Checkpoint to .npz; float64 bits are preserved exactly."""
    arrays = {}
    for i, (w, b) in enumerate(zip(net.weights, net.biases)):
        arrays[f"w{i}"] = w
        arrays[f"b{i}"] = b
    arrays["meta"] = np.frombuffer(
        json.dumps({"activations": net.activations}).encode(), dtype=np.uint8
    )
    np.savez(path, **arrays)


def load_mlp(path) -> Mlp:
    with np.load(path) as data:
        meta = json.loads(bytes(data["meta"]))
        n = len(meta["activations"])
        weights = [data[f"w{i}"].astype(np.float64, copy=True) for i in range(n)]
        biases = [data[f"b{i}"].astype(np.float64, copy=True) for i in range(n)]
    return Mlp(weights, biases, meta["activations"])
