"""Compare the compiled kernels with the pure-Python fallback.

    python benchmarks/bench_kernels.py [--views N] [--repeat R]

Times relative value iteration (one inner solve) and the view simulator on
the CHS instance at alpha = 0.3, and checks both backends agree.
"""

import argparse
import importlib
import time

import numpy as np

from cbftmdp.mdp import build_mdp
from cbftmdp.solver import INNER_MAX_ITER, INNER_TOL, APERIODICITY, Metric, _row_rewards, solve_min_metric


def _best(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--protocol", default="chs")
    ap.add_argument("--alpha", type=float, default=0.3)
    ap.add_argument("--views", type=int, default=100_000)
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args()

    backends = {"python": importlib.import_module("cbftmdp._pykernels")}
    try:
        backends["compiled"] = importlib.import_module("cbftmdp._kernels")
    except ImportError:
        print("compiled extension not built; timing the fallback only")

    mdp = build_mdp(args.protocol, args.alpha)
    cm = mdp.compiled
    res = solve_min_metric(mdp, Metric.GROWTH)
    w = np.ascontiguousarray(_row_rewards(mdp, Metric.GROWTH, res.rho_bar))
    rows = res.policy.rows(mdp)
    rng = np.random.Generator(np.random.PCG64(1))
    lu, du = rng.random(args.views), rng.random((args.views, 3))

    results = {}
    for name, k in backends.items():
        def run_rvi():
            h = np.zeros(cm.n_states)
            it = k.rvi(cm.row_ptr, cm.nxt, cm.prob, w, h, APERIODICITY, INNER_TOL * APERIODICITY, INNER_MAX_ITER)
            return it, h

        def run_sim():
            st = np.empty(args.views, np.int64)
            oc = np.empty(args.views, np.int8)
            tt = np.empty(args.views)
            out = k.simulate(rows, cm.nxt, cm.b_h, cm.c, cm.n_actual, cm.n_bound, mdp.alpha, lu, du,
                             1.0, 0.5, 5.0, mdp.initial, 100, st, oc, tt)
            return out, st

        t_rvi, (it, h) = _best(run_rvi, args.repeat)
        t_sim, (sim, st) = _best(run_sim, args.repeat)
        results[name] = (h, sim, st)
        print(f"{name:9s} rvi: {t_rvi * 1e3:8.2f} ms ({it[2]} sweeps)   "
              f"simulate: {t_sim * 1e3:8.2f} ms ({args.views} views, {t_sim / args.views * 1e9:.0f} ns/view)")

    if len(results) == 2:
        (h0, s0, st0), (h1, s1, st1) = results.values()
        print("bias max diff:", float(np.abs(h0 - h1).max()))
        print("simulation identical:", s0 == s1 and bool(np.array_equal(st0, st1)))


if __name__ == "__main__":
    main()
