# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled MLP kernels.

Same contract as the pure-numpy backend in ``_pykern.py``. The matrix
products go through BLAS dgemm directly, and the bias add, activation,
derivative, and bias-gradient reduction are fused into typed loops, so a
layer costs one BLAS call instead of several numpy dispatches.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, tanh
from scipy.linalg.cython_blas cimport dgemm

cnp.import_array()

ACT_IDENTITY = 0
ACT_RELU = 1
ACT_TANH = 2
ACT_SIGMOID = 3


cdef inline double _sigmoid(double z) noexcept nogil:
    cdef double ez
    if z >= 0.0:
        return 1.0 / (1.0 + exp(-z))
    ez = exp(z)
    return ez / (1.0 + ez)


cdef void _bias_act(double[:, ::1] out, double[::1] b, int code) noexcept nogil:
    """In place: out = act(out + b), row-broadcast bias."""
    cdef Py_ssize_t n = out.shape[0], d = out.shape[1]
    cdef Py_ssize_t i, j
    cdef double z
    for i in range(n):
        for j in range(d):
            z = out[i, j] + b[j]
            if code == 1:
                out[i, j] = z if z > 0.0 else 0.0
            elif code == 2:
                out[i, j] = tanh(z)
            elif code == 3:
                out[i, j] = _sigmoid(z)
            else:
                out[i, j] = z


cdef void _matmul_ct(double[:, ::1] x, double[:, ::1] w,
                     double[:, ::1] out) noexcept nogil:
    """out = x @ w.T for C-contiguous float64 arrays, via Fortran dgemm
    on the transposed views (out.T = w @ x.T)."""
    cdef int m = <int> w.shape[0]      # rows of out.T
    cdef int n = <int> x.shape[0]      # cols of out.T
    cdef int k = <int> x.shape[1]
    cdef double one = 1.0, zero = 0.0
    dgemm("T", "N", &m, &n, &k, &one, &w[0, 0], &k, &x[0, 0], &k,
          &zero, &out[0, 0], &m)


def forward_batch(weights, biases, act_codes, x):
    """Compiled counterpart of ``_pykern.forward_batch``."""
    cdef double[:, ::1] a = np.ascontiguousarray(x, dtype=np.float64)
    cache = []
    cdef double[:, ::1] out
    cdef int code
    for w, b, py_code in zip(weights, biases, act_codes):
        code = py_code
        out_arr = np.empty((a.shape[0], w.shape[0]), dtype=np.float64)
        out = out_arr
        _matmul_ct(a, w, out)
        _bias_act(out, b, code)
        cache.append((np.asarray(a), out_arr))
        a = out
    return np.asarray(a), cache


cdef void _act_deriv(double[:, ::1] da, double[:, ::1] a, int code,
                     double[:, ::1] dz, double[::1] db) noexcept nogil:
    """dz = da * act'(a) from layer outputs; db = column sums of dz."""
    cdef Py_ssize_t n = a.shape[0], d = a.shape[1]
    cdef Py_ssize_t i, j
    cdef double av, g
    for j in range(d):
        db[j] = 0.0
    for i in range(n):
        for j in range(d):
            av = a[i, j]
            if code == 1:
                g = da[i, j] if av > 0.0 else 0.0
            elif code == 2:
                g = da[i, j] * (1.0 - av * av)
            elif code == 3:
                g = da[i, j] * av * (1.0 - av)
            else:
                g = da[i, j]
            dz[i, j] = g
            db[j] += g


cdef void _grad_weights(double[:, ::1] dz, double[:, ::1] x_in,
                        double[:, ::1] dw) noexcept nogil:
    """dw = dz.T @ x_in via dgemm (dw.T = x_in.T @ dz)."""
    cdef int m = <int> x_in.shape[1]
    cdef int n = <int> dz.shape[1]
    cdef int k = <int> dz.shape[0]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "T", &m, &n, &k, &one, &x_in[0, 0], &m, &dz[0, 0], &n,
          &zero, &dw[0, 0], &m)


cdef void _grad_input(double[:, ::1] dz, double[:, ::1] w,
                      double[:, ::1] dx) noexcept nogil:
    """dx = dz @ w via dgemm (dx.T = w.T @ dz.T)."""
    cdef int m = <int> w.shape[1]
    cdef int n = <int> dz.shape[0]
    cdef int k = <int> w.shape[0]
    cdef double one = 1.0, zero = 0.0
    dgemm("N", "N", &m, &n, &k, &one, &w[0, 0], &m, &dz[0, 0], &k,
          &zero, &dx[0, 0], &m)


def backward_batch(weights, act_codes, cache, d_out):
    """Compiled counterpart of ``_pykern.backward_batch``."""
    n_layers = len(weights)
    d_weights = [None] * n_layers
    d_biases = [None] * n_layers
    cdef double[:, ::1] da = np.ascontiguousarray(d_out, dtype=np.float64)
    cdef double[:, ::1] a_v, x_v, dz_v, dw_v, dx_v
    cdef double[::1] db_v
    cdef int code
    for i in range(n_layers - 1, -1, -1):
        x_in, a = cache[i]
        w = weights[i]
        code = act_codes[i]
        x_v = np.ascontiguousarray(x_in)
        a_v = a
        dz_arr = np.empty_like(np.asarray(a))
        dz_v = dz_arr
        db = np.empty(w.shape[0], dtype=np.float64)
        db_v = db
        _act_deriv(da, a_v, code, dz_v, db_v)
        dw = np.empty_like(w)
        dw_v = dw
        _grad_weights(dz_v, x_v, dw_v)
        dx = np.empty((dz_arr.shape[0], w.shape[1]), dtype=np.float64)
        dx_v = dx
        _grad_input(dz_v, w, dx_v)
        d_weights[i] = dw
        d_biases[i] = db
        da = dx_v
    return d_weights, d_biases, np.asarray(da)
