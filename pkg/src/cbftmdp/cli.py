"""Command-line entry point: solve, sweep, simulate, compare, replay.

Exit codes: 0 success, 1 usage or invalid input, 2 solver failure,
3 replay discrepancy.  ``CBFTMDP_LOG_LEVEL`` sets the log verbosity.
"""

from __future__ import annotations

import argparse
import csv
import io
import logging
import os
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .core import Protocol
from .mdp import DEFAULT_K, build_mdp
from .solver import DEFAULT_EPS, Metric, SolverError, evaluate_policy, solve_min_metric
from .strategies import (
    PolicyFileError,
    StrategyKind,
    no_attack_reference,
    save_policy,
    silent_baseline_policy,
)

log = logging.getLogger("cbftmdp")

EXIT_OK, EXIT_USAGE, EXIT_SOLVER, EXIT_REPLAY = 0, 1, 2, 3
CSV_HEADER = ("protocol", "alpha", "metric", "method", "value", "ci_low", "ci_high", "seed", "k")
DEFAULT_GRID = "0:0.03:0.33"


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass(frozen=True)
class Row:
    protocol: str
    alpha: float
    metric: str
    method: str
    value: float
    ci_low: float
    ci_high: float
    seed: Optional[int]
    k: float

    @classmethod
    def exact(cls, protocol, alpha, metric, method, value, k) -> "Row":
        return cls(Protocol.parse(protocol).value, alpha, Metric.parse(metric).value, method, value, value, value, None, k)

    def cells(self) -> list[str]:
        return [
            self.protocol, repr(float(self.alpha)), self.metric, self.method,
            repr(float(self.value)), repr(float(self.ci_low)), repr(float(self.ci_high)),
            "" if self.seed is None else str(self.seed), repr(float(self.k)),
        ]


def write_csv(rows: Sequence[Row], out: Optional[str]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in rows:
        w.writerow(r.cells())
    text = buf.getvalue()
    if out:
        with open(out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def read_csv(path_or_text: str) -> list[dict]:
    text = path_or_text
    if os.path.exists(path_or_text):
        with open(path_or_text, encoding="utf-8") as fh:
            text = fh.read()
    return list(csv.DictReader(io.StringIO(text)))


def parse_grid(text: str) -> list[float]:
    """``start:step:end`` (inclusive) or a comma-separated list."""
    try:
        if ":" in text:
            start, step, end = (float(x) for x in text.split(":"))
            if step <= 0 or end < start:
                raise ValueError
            n = int(np.floor((end - start) / step + 1e-9)) + 1
            return [round(start + i * step, 10) for i in range(n)]
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise UsageError(f"bad alpha grid {text!r}; use start:step:end or a,b,c") from None


def _parse_protocols(text: str) -> list[Protocol]:
    try:
        return [Protocol.parse(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def _metrics(text: str) -> list[Metric]:
    if text == "both":
        return [Metric.GROWTH, Metric.RATE]
    return [Metric.parse(text)]


def _map(fn, tasks: list, jobs: int) -> list:
    if jobs <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, tasks))


# ---- solve ---------------------------------------------------------------

def cmd_solve(args) -> int:
    mdp = build_mdp(args.protocol, args.alpha, args.k, args.lh_cap)
    res = solve_min_metric(mdp, args.metric, args.eps)
    out = args.out or f"policy-{mdp.protocol.value}-{mdp.alpha:g}-{res.metric.value}.json"
    save_policy(res, out)
    print(
        f"protocol={mdp.protocol.value} alpha={mdp.alpha!r} metric={res.metric.value} k={mdp.k!r} "
        f"rho_bar={res.rho_bar!r} metric_value={res.metric_value!r} "
        f"iterations={res.outer_iterations} residual={res.inner_residual:.3g} policy={out}"
    )
    return EXIT_OK


# ---- sweep ---------------------------------------------------------------

def _sweep_task(task) -> list[Row]:
    protocol, alpha, metrics, k, eps, lh_cap = task
    mdp = build_mdp(protocol, alpha, k, lh_cap if protocol is Protocol.STREAMLET else None)
    return [
        Row.exact(protocol, alpha, m, "theory", solve_min_metric(mdp, m, eps).metric_value, k)
        for m in metrics
    ]


def cmd_sweep(args) -> int:
    protocols = _parse_protocols(args.protocols)
    grid = parse_grid(args.alpha_grid)
    metrics = _metrics(args.metric)
    tasks = [(p, a, metrics, args.k, args.eps, args.lh_cap) for p in protocols for a in grid]
    rows = [r for chunk in _map(_sweep_task, tasks, args.jobs) for r in chunk]
    write_csv(rows, args.out)
    return EXIT_OK


# ---- compare -------------------------------------------------------------

def _compare_task(task) -> list[Row]:
    protocol, alpha, metric, kinds, k, eps, lh_cap = task
    lh_cap = lh_cap if protocol is Protocol.STREAMLET else None
    mdp = build_mdp(protocol, alpha, k, lh_cap)
    rows = []
    for kind in kinds:
        if kind.kind == "optimal":
            value = solve_min_metric(mdp, kind.metric or metric, eps).metric_value
        elif kind.kind == "silent":
            value = evaluate_policy(mdp, silent_baseline_policy(mdp)).of(metric)
        else:
            value = no_attack_reference(protocol, k, lh_cap).of(metric)
        rows.append(Row.exact(protocol, alpha, metric, kind.method, value, k))
    return rows


def dominance_warnings(rows: Sequence[Row], tol: float = DEFAULT_EPS) -> list[str]:
    """Grid points where optimal <= silent <= none fails by more than ``tol``
    (the binary search reports optimal values to within its precision)."""
    by_key: dict = {}
    for r in rows:
        by_key.setdefault((r.protocol, r.alpha, r.metric), {})[r.method] = r.value
    order = ("theory", "baseline-silent", "no-attack")
    out = []
    for (p, a, m), vals in by_key.items():
        seq = [(name, vals[name]) for name in order if name in vals]
        for (n1, v1), (n2, v2) in zip(seq, seq[1:]):
            if v1 > v2 + tol:
                out.append(f"{p} alpha={a} {m}: {n1}={v1:.6g} exceeds {n2}={v2:.6g}")
    return out


def cmd_compare(args) -> int:
    protocols = _parse_protocols(args.protocol)
    grid = parse_grid(args.alpha_grid)
    metric = Metric.parse(args.metric)
    try:
        kinds = [StrategyKind.parse(s, default_metric=metric) for s in args.strategies.split(",") if s.strip()]
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    tasks = [(p, a, metric, kinds, args.k, args.eps, args.lh_cap) for p in protocols for a in grid]
    rows = [r for chunk in _map(_compare_task, tasks, args.jobs) for r in chunk]
    write_csv(rows, args.out)
    for msg in dominance_warnings(rows, tol=args.eps):
        log.warning("ordering optimal <= silent <= none violated: %s", msg)
    return EXIT_OK


# ---- simulate ------------------------------------------------------------

def cmd_simulate(args) -> int:
    from .sim import DelayModel, SimConfig, replay_verify, replicate, resolve_policy

    try:
        delay = DelayModel.parse(args.delay)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.alpha is None and (args.n is None or args.f is None):
        raise UsageError("give --alpha or both --n and --f")
    cfg = SimConfig(
        protocol=args.protocol, alpha=args.alpha, n=args.n, f=args.f, policy=args.policy,
        delay=delay, n_views=args.views, warmup_views=args.warmup, seed=args.seed,
        replications=args.reps, k=args.k, lh_cap=args.lh_cap,
    )
    mdp = cfg.build()
    policy = resolve_policy(cfg.policy, mdp)
    rep, traces = replicate(cfg, policy=policy, mdp=mdp, keep_traces=True)
    if args.trace:
        traces[0].dump(args.trace)
    status = EXIT_OK
    for i, tr in enumerate(traces):
        report = replay_verify(tr, mdp.protocol)
        if not report.ok:
            log.error("replication %d replay failed:\n%s", i, report.summary())
            status = EXIT_REPLAY
        else:
            log.info("replication %d: %s", i, report.summary())
    rows = []
    value = evaluate_policy(mdp, policy)
    method = "baseline-silent" if str(args.policy).lower() == "silent" else "theory"
    for m in (Metric.GROWTH, Metric.RATE):
        st = rep.stat(m)
        if args.with_theory:
            rows.append(Row.exact(mdp.protocol, mdp.alpha, m, method, value.of(m), mdp.k))
        rows.append(Row(mdp.protocol.value, mdp.alpha, m.value, "simulation", st.mean, st.ci_low, st.ci_high, cfg.seed, mdp.k))
        print(
            f"# {m.value}: mean={st.mean:.6g} sd={st.sd:.3g} se={st.se:.3g} "
            f"ci95=[{st.ci_low:.6g}, {st.ci_high:.6g}] reps={cfg.replications} delay={delay.render()}",
            file=sys.stderr,
        )
    write_csv(rows, args.out)
    return status


# ---- replay --------------------------------------------------------------

def cmd_replay(args) -> int:
    from .sim import load_trace, replay_verify, trace_protocol

    protocol = args.protocol or trace_protocol(args.trace)
    if protocol is None:
        raise UsageError("trace has no protocol header; pass --protocol")
    report = replay_verify(load_trace(args.trace), protocol, lh_cap=args.lh_cap)
    print(report.summary())
    return EXIT_OK if report.ok else EXIT_REPLAY


# ---- parser --------------------------------------------------------------

def _add_common(p, eps=True):
    p.add_argument("--k", type=float, default=DEFAULT_K, help="timeout bound over actual delay (default 5)")
    p.add_argument("--lh-cap", type=int, default=None, help="streamlet pending-block cap (default 4)")
    if eps:
        p.add_argument("--eps", type=float, default=DEFAULT_EPS, help="binary-search precision")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="cbftmdp", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("solve", help="solve one instance and write its policy file")
    p.add_argument("--protocol", required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--metric", required=True, choices=["growth", "rate"])
    p.add_argument("--out", help="policy file path")
    _add_common(p)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("sweep", help="theory rows over an alpha grid")
    p.add_argument("--protocols", default="chs,2chs,fhs,streamlet")
    p.add_argument("--alpha-grid", default=DEFAULT_GRID)
    p.add_argument("--metric", default="both", choices=["growth", "rate", "both"])
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("simulate", help="replicated view-level simulation of a policy")
    p.add_argument("--protocol", required=True)
    p.add_argument("--alpha", type=float)
    p.add_argument("--n", type=int, help="node count (with --f instead of --alpha)")
    p.add_argument("--f", type=int, help="adversarial node count")
    p.add_argument("--policy", default="optimal:growth", help="PATH | optimal:growth | optimal:rate | silent")
    p.add_argument("--views", type=int, default=100_000)
    p.add_argument("--warmup", type=int, default=100)
    p.add_argument("--delay", default="fixed:1", help="fixed:D or uniform:D:A")
    p.add_argument("--reps", type=int, default=6)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--trace", help="dump the first replication's trace here")
    p.add_argument("--with-theory", action="store_true", help="also emit the policy's exact value")
    p.add_argument("--out")
    _add_common(p, eps=False)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("compare", help="optimal vs silent baseline vs no attack")
    p.add_argument("--protocol", required=True, help="one protocol or a comma-separated list")
    p.add_argument("--strategies", default="optimal,silent,none")
    p.add_argument("--alpha-grid", default=DEFAULT_GRID)
    p.add_argument("--metric", default="rate", choices=["growth", "rate"])
    p.add_argument("--out")
    p.add_argument("--jobs", type=int, default=1)
    _add_common(p)
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("replay", help="verify a dumped trace against the block-tree replay")
    p.add_argument("trace")
    p.add_argument("--protocol")
    p.add_argument("--lh-cap", type=int, default=None)
    p.set_defaults(func=cmd_replay)
    return parser


def _setup_logging() -> None:
    level = os.environ.get("CBFTMDP_LOG_LEVEL", "WARNING").upper()
    logging.basicConfig(
        level=getattr(logging, level, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )


def main(argv: Optional[Sequence[str]] = None) -> int:
    _setup_logging()
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, PolicyFileError, ValueError) as exc:
        print(f"cbftmdp {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except SolverError as exc:
        print(f"cbftmdp {args.command}: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
