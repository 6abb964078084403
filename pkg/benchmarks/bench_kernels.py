"""Benchmark the compiled MLP kernels against the numpy fallback.

Times a forward + backward pass over a batch for several network sizes
and prints a per-case speedup table. Run from the repo root:

    python3 benchmarks/bench_kernels.py [--repeats 50]
"""

import argparse
import time

import numpy as np

from trajaudit import _pykern

try:
    from trajaudit import _ckern
except ImportError:
    _ckern = None

CASES = [
    ("small", [20, 16, 1], 32),
    ("gan-disc", [20, 64, 32, 1], 32),
    ("diffusion", [21, 256, 128, 20], 32),
    ("wide", [64, 512, 512, 64], 64),
]

ACTS = {
    1: _pykern.ACT_RELU,
    "out": _pykern.ACT_IDENTITY,
}


def make_net(dims, seed):
    rng = np.random.default_rng(seed)
    weights = [rng.standard_normal((o, i)) * 0.1 for i, o in zip(dims, dims[1:])]
    biases = [np.zeros(o) for o in dims[1:]]
    codes = np.array(
        [_pykern.ACT_RELU] * (len(weights) - 1) + [_pykern.ACT_IDENTITY],
        dtype=np.int64,
    )
    return weights, biases, codes


def time_backend(backend, dims, batch, repeats):
    weights, biases, codes = make_net(dims, seed=1)
    rng = np.random.default_rng(2)
    x = rng.standard_normal((batch, dims[0]))
    d_out = rng.standard_normal((batch, dims[-1]))
    # warm up once so timings exclude first-call overhead
    out, cache = backend.forward_batch(weights, biases, codes, x)
    backend.backward_batch(weights, codes, cache, d_out)
    start = time.perf_counter()
    for _ in range(repeats):
        out, cache = backend.forward_batch(weights, biases, codes, x)
        backend.backward_batch(weights, codes, cache, d_out)
    return (time.perf_counter() - start) / repeats, out


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--repeats", type=int, default=50)
    args = parser.parse_args()

    if _ckern is None:
        print("compiled extension not available; showing numpy fallback only")

    print(f"{'case':<12} {'dims':<22} {'numpy (ms)':>12} {'compiled (ms)':>14} {'speedup':>9}")
    for name, dims, batch in CASES:
        t_py, out_py = time_backend(_pykern, dims, batch, args.repeats)
        if _ckern is None:
            print(f"{name:<12} {str(dims):<22} {t_py * 1e3:>12.3f} {'-':>14} {'-':>9}")
            continue
        t_c, out_c = time_backend(_ckern, dims, batch, args.repeats)
        agree = np.allclose(out_py, out_c, rtol=1e-12, atol=1e-12)
        line = (
            f"{name:<12} {str(dims):<22} {t_py * 1e3:>12.3f} "
            f"{t_c * 1e3:>14.3f} {t_py / t_c:>8.2f}x"
        )
        if not agree:
            line += "  (OUTPUT MISMATCH)"
        print(line)


if __name__ == "__main__":
    main()
