# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops: relative value iteration sweeps and the view simulator.

Semantics and floating-point operation order match ``_pykernels`` exactly.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def rvi(const cnp.int64_t[::1] row_ptr,
        const cnp.int64_t[:, ::1] nxt,
        const double[:, ::1] prob,
        const double[::1] w,
        double[::1] h,
        double tau,
        double tol,
        long max_iter):
    cdef Py_ssize_t n = row_ptr.shape[0] - 1
    cdef Py_ssize_t s, r
    cdef long it = 0
    cdef double best, q, d, lo = 0.0, hi = 0.0, ref
    cdef double[::1] v = np.empty(n)
    while it < max_iter:
        it += 1
        lo = INFINITY
        hi = -INFINITY
        for s in range(n):
            best = -INFINITY
            for r in range(row_ptr[s], row_ptr[s + 1]):
                q = w[r] + prob[r, 0] * h[nxt[r, 0]] + prob[r, 1] * h[nxt[r, 1]]
                if q > best:
                    best = q
            v[s] = tau * best + (1.0 - tau) * h[s]
            d = v[s] - h[s]
            if d < lo:
                lo = d
            if d > hi:
                hi = d
        ref = v[0]
        for s in range(n):
            h[s] = v[s] - ref
        if hi - lo < tol:
            break
    return lo, hi, it


def simulate(const cnp.int64_t[::1] policy_row,
             const cnp.int64_t[:, ::1] nxt,
             const cnp.int64_t[:, ::1] b_h,
             const cnp.int64_t[:, ::1] c,
             const cnp.int64_t[:, ::1] n_actual,
             const cnp.int64_t[:, ::1] n_bound,
             double alpha,
             const double[::1] leader_u,
             const double[:, ::1] delay_u,
             double delta,
             double amp,
             double bound,
             long start,
             long warmup,
             cnp.int64_t[::1] out_state,
             cnp.int8_t[::1] out_outcome,
             double[::1] out_t):
    cdef Py_ssize_t n_views = leader_u.shape[0]
    cdef Py_ssize_t i, j
    cdef long s = start, r, o
    cdef double t, sum_t = 0.0
    cdef long sum_bh = 0, sum_c = 0
    for i in range(n_views):
        r = policy_row[s]
        o = 0 if leader_u[i] < alpha else 1
        t = 0.0
        for j in range(n_actual[r, o]):
            t += delta + amp * (2.0 * delay_u[i, j] - 1.0)
        for j in range(n_bound[r, o]):
            t += bound
        out_state[i] = s
        out_outcome[i] = o
        out_t[i] = t
        if i >= warmup:
            sum_bh += b_h[r, o]
            sum_c += c[r, o]
            sum_t += t
        s = nxt[r, o]
    return sum_bh, sum_c, sum_t, s
