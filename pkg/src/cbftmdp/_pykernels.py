"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``."""

import numpy as np


def rvi(row_ptr, nxt, prob, w, h, tau, tol, max_iter):
    n = len(row_ptr) - 1
    starts = np.asarray(row_ptr[:-1])
    n0, n1 = nxt[:, 0], nxt[:, 1]
    p0, p1 = prob[:, 0], prob[:, 1]
    lo = hi = 0.0
    it = 0
    while it < max_iter:
        it += 1
        q = w + p0 * h[n0] + p1 * h[n1]
        best = np.maximum.reduceat(q, starts)
        v = tau * best + (1.0 - tau) * h
        d = v - h
        lo, hi = float(d.min()), float(d.max())
        h[:] = v - v[0]
        if hi - lo < tol:
            break
    return lo, hi, it


def simulate(policy_row, nxt, b_h, c, n_actual, n_bound, alpha, leader_u, delay_u,
             delta, amp, bound, start, warmup, out_state, out_outcome, out_t):
    policy_row = policy_row.tolist()
    nxt, b_h, c = nxt.tolist(), b_h.tolist(), c.tolist()
    n_actual, n_bound = n_actual.tolist(), n_bound.tolist()
    lu = leader_u.tolist()
    du = delay_u.tolist()
    states = [0] * len(lu)
    outcomes = [0] * len(lu)
    times = [0.0] * len(lu)
    s = int(start)
    sum_bh = sum_c = 0
    sum_t = 0.0
    for i, u in enumerate(lu):
        r = policy_row[s]
        o = 0 if u < alpha else 1
        t = 0.0
        row_u = du[i]
        for j in range(n_actual[r][o]):
            t += delta + amp * (2.0 * row_u[j] - 1.0)
        for _ in range(n_bound[r][o]):
            t += bound
        states[i] = s
        outcomes[i] = o
        times[i] = t
        if i >= warmup:
            sum_bh += b_h[r][o]
            sum_c += c[r][o]
            sum_t += t
        s = nxt[r][o]
    out_state[:] = states
    out_outcome[:] = outcomes
    out_t[:] = times
    return sum_bh, sum_c, sum_t, s
