"""Pure-numpy MLP kernels: the fallback backend.

Shares its signatures with the compiled backend in ``_ckern.pyx``; see
``trajaudit.kernels`` for how one of the two is selected at import time.

Activation codes: 0 identity, 1 relu, 2 tanh, 3 sigmoid. Derivatives are
computed from the stored layer *outputs*, which is exact for all four
activations (relu uses ``a > 0``, which matches ``z > 0`` up to the
measure-zero tie at 0 where the subgradient 0 is used).
"""

import numpy as np

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SIGMOID = 3


def _apply_act(code, z):
    if code == ACT_IDENTITY:
        return z
    if code == ACT_RELU:
        return np.maximum(z, 0.0)
    if code == ACT_TANH:
        return np.tanh(z)
    if code == ACT_SIGMOID:
        # split by sign for overflow safety
        out = np.empty_like(z)
        pos = z >= 0
        out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
        ez = np.exp(z[~pos])
        out[~pos] = ez / (1.0 + ez)
        return out
    raise ValueError(f"unknown activation code {code}")


def _act_deriv_from_output(code, a):
    if code == ACT_IDENTITY:
        return np.ones_like(a)
    if code == ACT_RELU:
        return (a > 0.0).astype(np.float64)
    if code == ACT_TANH:
        return 1.0 - a * a
    if code == ACT_SIGMOID:
        return a * (1.0 - a)
    raise ValueError(f"unknown activation code {code}")


def forward_batch(weights, biases, act_codes, x):
    """Run a dense net on a batch.

    Args:
        weights: list of (out, in) float64 matrices.
        biases: list of (out,) float64 vectors.
        act_codes: list of ints, one per layer.
        x: (batch, in0) float64 input.

    Returns:
        (output, cache) where cache holds per-layer (input, output) pairs
        for the matching backward_batch call.
    """
    a = x
    cache = []
    for w, b, code in zip(weights, biases, act_codes):
        z = a @ w.T + b
        out = _apply_act(code, z)
        cache.append((a, out))
        a = out
    return a, cache


def backward_batch(weights, act_codes, cache, d_out):
    """Backpropagate a batch gradient through the net.

    Gradients are summed over the batch (caller divides by batch size if a
    mean-loss convention is wanted).

    Returns:
        (d_weights, d_biases, d_input)
    """
    d_weights = [None] * len(weights)
    d_biases = [None] * len(weights)
    da = d_out
    for i in range(len(weights) - 1, -1, -1):
        x_in, a = cache[i]
        dz = da * _act_deriv_from_output(act_codes[i], a)
        d_weights[i] = dz.T @ x_in
        d_biases[i] = dz.sum(axis=0)
        da = dz @ weights[i]
    return d_weights, d_biases, da
