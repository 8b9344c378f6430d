# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels for the two-layer multihead network.

Drop-in replacement for `gfucb._twolayer_np`: same entry points and the same
subgradient conventions, including the one-sided clip pass-through of the
squared-loss gradient. Loops are fused per sample, which avoids the
temporaries the numpy path allocates on every call.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


cdef inline void _forward_row(
    const double[:, ::1] w1, const double[::1] b1,
    const double[:, ::1] w2, const double[::1] b2,
    const double[:, ::1] X, Py_ssize_t row, double[::1] a, double[::1] p,
    double* nrm_out, double* s_out,
) noexcept nogil:
    cdef Py_ssize_t h = w1.shape[0], d = w1.shape[1], k = w2.shape[0]
    cdef Py_ssize_t j, c
    cdef double acc, nrm, s
    for j in range(h):
        acc = b1[j]
        for c in range(d):
            acc += w1[j, c] * X[row, c]
        a[j] = acc
    for c in range(h):
        if a[c] < 0.0:
            a[c] = 0.0  # callers read a as the post-relu activation z
        # pre-relu sign is recoverable: relu'(0) = 0 makes a > 0 the active test
    for j in range(k):
        acc = b2[j]
        for c in range(h):
            acc += w2[j, c] * a[c]
        p[j] = acc
    nrm = 0.0
    for j in range(k):
        nrm += p[j] * p[j]
    nrm = sqrt(nrm)
    s = nrm if nrm > 1.0 else 1.0
    nrm_out[0] = nrm
    s_out[0] = s


def features(double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
             object X_obj):
    cdef double[:, ::1] X = np.ascontiguousarray(X_obj, dtype=np.float64)
    cdef Py_ssize_t n = X.shape[0], h = w1.shape[0], k = w2.shape[0]
    out_arr = np.empty((n, k))
    cdef double[:, ::1] out = out_arr
    a_arr = np.empty(h)
    p_arr = np.empty(k)
    cdef double[::1] a = a_arr, p = p_arr
    cdef Py_ssize_t s_i, j
    cdef double nrm, s
    for s_i in range(n):
        _forward_row(w1, b1, w2, b2, X, s_i, a, p, &nrm, &s)
        for j in range(k):
            out[s_i, j] = p[j] / s
    return out_arr


def values(double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
           double[:, ::1] W, object X_obj, object task_obj, double lo, double hi):
    cdef double[:, ::1] X = np.ascontiguousarray(X_obj, dtype=np.float64)
    cdef long[::1] task = np.ascontiguousarray(task_obj, dtype=np.int64)
    cdef Py_ssize_t n = X.shape[0], h = w1.shape[0], k = w2.shape[0]
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    a_arr = np.empty(h)
    p_arr = np.empty(k)
    cdef double[::1] a = a_arr, p = p_arr
    cdef Py_ssize_t s_i, j
    cdef double nrm, s, u
    cdef long ti
    for s_i in range(n):
        _forward_row(w1, b1, w2, b2, X, s_i, a, p, &nrm, &s)
        ti = task[s_i]
        u = 0.0
        for j in range(k):
            u += (p[j] / s) * W[j, ti]
        if u < lo:
            u = lo
        elif u > hi:
            u = hi
        out[s_i] = u
    return out_arr


cdef _fused_grad(
    double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
    double[:, ::1] W, double[:, ::1] X, long[::1] task,
    double[::1] y, bint sq_mode, double lo, double hi,
):
    cdef Py_ssize_t n = X.shape[0], h = w1.shape[0], d = w1.shape[1], k = w2.shape[0]
    gw1_arr = np.zeros((h, d))
    gb1_arr = np.zeros(h)
    gw2_arr = np.zeros((k, h))
    gb2_arr = np.zeros(k)
    gW_arr = np.zeros((W.shape[0], W.shape[1]))
    cdef double[:, ::1] gw1 = gw1_arr, gw2 = gw2_arr, gW = gW_arr
    cdef double[::1] gb1 = gb1_arr, gb2 = gb2_arr
    a_arr = np.empty(h)
    p_arr = np.empty(k)
    phi_arr = np.empty(k)
    dphi_arr = np.empty(k)
    dp_arr = np.empty(k)
    dz_arr = np.empty(h)
    cdef double[::1] a = a_arr, p = p_arr, phi = phi_arr
    cdef double[::1] dphi = dphi_arr, dp = dp_arr, dz = dz_arr
    cdef Py_ssize_t s_i, j, c
    cdef double nrm, s, u, v, coeff, total, dot, corr, resid
    cdef long ti
    total = 0.0
    for s_i in range(n):
        _forward_row(w1, b1, w2, b2, X, s_i, a, p, &nrm, &s)
        ti = task[s_i]
        u = 0.0
        for j in range(k):
            phi[j] = p[j] / s
            u += phi[j] * W[j, ti]
        v = u
        if v < lo:
            v = lo
        elif v > hi:
            v = hi
        if sq_mode:
            resid = v - y[s_i]
            total += resid * resid
            coeff = 2.0 * resid
            if u <= lo or u >= hi:
                # saturated: pass through only if the target de-saturates
                if not ((u >= hi and resid > 0.0) or (u <= lo and resid < 0.0)):
                    continue
        else:
            total += v
            coeff = 1.0
            if u <= lo or u >= hi:
                continue
        # head gradient and representation cotangent
        for j in range(k):
            dphi[j] = coeff * W[j, ti]
            gW[j, ti] += coeff * phi[j]
        # normalization backward
        if nrm > 1.0:
            dot = 0.0
            for j in range(k):
                dot += phi[j] * dphi[j]
            for j in range(k):
                dp[j] = (dphi[j] - dot * phi[j]) / s
        else:
            for j in range(k):
                dp[j] = dphi[j]
        for j in range(k):
            gb2[j] += dp[j]
        for c in range(h):
            dz[c] = 0.0
        for j in range(k):
            for c in range(h):
                dz[c] += dp[j] * w2[j, c]
                gw2[j, c] += dp[j] * a[c]
        for c in range(h):
            if a[c] > 0.0:
                gb1[c] += dz[c]
                for j in range(d):
                    gw1[c, j] += dz[c] * X[s_i, j]
    return total, gw1_arr, gb1_arr, gw2_arr, gb2_arr, gW_arr


def sq_loss_grad(double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
                 double[:, ::1] W, object X_obj, object task_obj, object y_obj,
                 double lo, double hi):
    cdef double[:, ::1] X = np.ascontiguousarray(X_obj, dtype=np.float64)
    cdef long[::1] task = np.ascontiguousarray(task_obj, dtype=np.int64)
    cdef double[::1] y = np.ascontiguousarray(y_obj, dtype=np.float64)
    if X.shape[0] == 0:
        return 0.0, np.zeros_like(w1), np.zeros_like(b1), np.zeros_like(w2), np.zeros_like(b2), np.zeros_like(W)
    return _fused_grad(w1, b1, w2, b2, W, X, task, y, True, lo, hi)


def sum_value_grad(double[:, ::1] w1, double[::1] b1, double[:, ::1] w2, double[::1] b2,
                   double[:, ::1] W, object X_obj, object task_obj, double lo, double hi):
    cdef double[:, ::1] X = np.ascontiguousarray(X_obj, dtype=np.float64)
    cdef long[::1] task = np.ascontiguousarray(task_obj, dtype=np.int64)
    cdef double[::1] y = np.zeros(X.shape[0])
    if X.shape[0] == 0:
        return 0.0, np.zeros_like(w1), np.zeros_like(b1), np.zeros_like(w2), np.zeros_like(b2), np.zeros_like(W)
    return _fused_grad(w1, b1, w2, b2, W, X, task, y, False, lo, hi)
