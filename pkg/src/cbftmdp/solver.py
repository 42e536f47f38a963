"""Minimum chain growth / commitment rate via ratio linearization.

For a guess ``rho`` each view earns ``w = (1 - rho) * T - numerator``.  The
optimal long-run average of ``w`` is non-increasing in ``rho``, and its zero
``rho_bar`` gives the adversary's minimum metric ``1 - rho_bar``.  The inner
problem is solved by relative value iteration; fixed policies are evaluated
exactly from their stationary distribution.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from typing import Iterable, Mapping, NamedTuple, Optional, Sequence

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.csgraph import breadth_first_order, connected_components

from . import kernels
from .core import Action, Protocol, parse_state
from .mdp import MdpInstance

log = logging.getLogger(__name__)

INNER_TOL = 1e-9
INNER_MAX_ITER = 100_000
DEFAULT_EPS = 1e-4
APERIODICITY = 0.5
TIE_TOL = 1e-9


class SolverError(RuntimeError):
    pass


class NonConvergence(SolverError):
    def __init__(self, message: str, span: float):
        super().__init__(message)
        self.span = span


class MultichainError(SolverError):
    pass


class Metric(str, Enum):
    GROWTH = "growth"
    RATE = "rate"

    @property
    def numerator(self) -> str:
        return "b_h" if self is Metric.GROWTH else "c"

    @classmethod
    def parse(cls, value: "str | Metric") -> "Metric":
        if isinstance(value, Metric):
            return value
        try:
            return cls(str(value).strip().lower())
        except ValueError:
            raise ValueError(f"unknown metric {value!r}") from None


@dataclass(frozen=True)
class Policy:
    """Deterministic stationary policy: one action per state index."""

    actions: tuple

    def __post_init__(self):
        object.__setattr__(self, "actions", tuple(Action(a) for a in self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    def __getitem__(self, s: int) -> Action:
        return self.actions[s]

    @classmethod
    def uniform(cls, mdp: MdpInstance, action: Action) -> "Policy":
        return cls(tuple(action for _ in range(mdp.n_states)))

    @classmethod
    def from_rendered(cls, mdp: MdpInstance, mapping: Mapping[str, str]) -> "Policy":
        acts: list[Optional[Action]] = [None] * mdp.n_states
        for text, name in mapping.items():
            st = parse_state(text)
            if st not in mdp.index:
                raise ValueError(f"state {text!r} is not part of this instance")
            acts[mdp.index[st]] = Action.parse(name)
        missing = [mdp.states[i].render() for i, a in enumerate(acts) if a is None]
        if missing:
            raise ValueError(f"policy is not total; missing {missing[:3]}")
        pol = cls(tuple(acts))
        pol.check(mdp)
        return pol

    def with_action(self, s: int, action: Action) -> "Policy":
        acts = list(self.actions)
        acts[s] = Action(action)
        return Policy(tuple(acts))

    def check(self, mdp: MdpInstance) -> None:
        if len(self.actions) != mdp.n_states:
            raise ValueError(f"policy covers {len(self.actions)} states, instance has {mdp.n_states}")
        for s, a in enumerate(self.actions):
            if (s, a) not in mdp.table:
                raise ValueError(f"{a.label} is illegal in {mdp.states[s].render()}")

    def rows(self, mdp: MdpInstance) -> np.ndarray:
        self.check(mdp)
        cm = mdp.compiled
        return np.array([cm.row_of(s, a) for s, a in enumerate(self.actions)], dtype=np.int64)

    def render(self, mdp: MdpInstance) -> dict[str, str]:
        return {mdp.states[s].render(): a.label for s, a in enumerate(self.actions)}


class ViResult(NamedTuple):
    gain: float
    bias: np.ndarray
    policy: Policy
    iterations: int
    span: float


@dataclass(frozen=True)
class SolveResult:
    rho_bar: float
    metric_value: float
    policy: Policy
    outer_iterations: int
    inner_residual: float
    metric: Metric
    protocol: Protocol
    alpha: float
    k: float
    gain_at_rho_bar: float = 0.0
    lh_cap: Optional[int] = None


class PolicyValue(NamedTuple):
    growth: float
    rate: float

    def of(self, metric: Metric) -> float:
        return self.growth if Metric.parse(metric) is Metric.GROWTH else self.rate


def _row_rewards(mdp: MdpInstance, metric: Metric, rho: float) -> np.ndarray:
    cm = mdp.compiled
    return (1.0 - rho) * cm.expected("time") - cm.expected(metric.numerator)


def _greedy(mdp: MdpInstance, w: np.ndarray, h: np.ndarray) -> Policy:
    cm = mdp.compiled
    q = w + cm.prob[:, 0] * h[cm.nxt[:, 0]] + cm.prob[:, 1] * h[cm.nxt[:, 1]]
    acts = []
    for s in range(cm.n_states):
        lo, hi = cm.row_ptr[s], cm.row_ptr[s + 1]
        qs = q[lo:hi]
        best = qs.max()
        r = lo + int(np.flatnonzero(qs >= best - TIE_TOL * (1.0 + abs(best)))[0])
        acts.append(Action(int(cm.row_action[r])))
    return Policy(tuple(acts))


def average_reward_vi(
    mdp: MdpInstance,
    metric: "Metric | str",
    rho: float,
    tol: float = INNER_TOL,
    max_iter: int = INNER_MAX_ITER,
    h0: Optional[np.ndarray] = None,
) -> ViResult:
    """Optimal average of ``(1 - rho) * T - numerator`` per view.

    Relative value iteration on the aperiodicity-transformed MDP; stops when
    the span of successive differences drops below ``tol``.
    """
    metric = Metric.parse(metric)
    if not 0.0 <= rho <= 1.0:
        raise ValueError(f"rho must lie in [0, 1], got {rho}")
    if tol <= 0:
        raise ValueError("tol must be positive")
    cm = mdp.compiled
    w = np.ascontiguousarray(_row_rewards(mdp, metric, rho))
    h = np.zeros(cm.n_states) if h0 is None else np.array(h0, dtype=float)
    tau = APERIODICITY
    lo, hi, it = kernels.backend.rvi(cm.row_ptr, cm.nxt, cm.prob, w, h, tau, tol * tau, int(max_iter))
    span = (hi - lo) / tau
    policy = _greedy(mdp, w, h)
    if span >= tol:
        _raise_unconverged(mdp, metric, rho, policy, span, it, tol)
    gain = 0.5 * (hi + lo) / tau
    return ViResult(gain, h, policy, it, span)


def _raise_unconverged(mdp, metric, rho, policy, span, it, tol):
    # with several recurrent classes the span stalls at their gain spread
    classes = recurrent_classes(mdp, policy, start=None)
    if len(classes) > 1:
        num = _per_state(mdp, policy, metric.numerator)
        t = _per_state(mdp, policy, "time")
        gains = []
        for members in classes:
            pi = _class_distribution(mdp, policy, members)
            gains.append(float(pi @ ((1 - rho) * t[members] - num[members])))
        if max(gains) - min(gains) > tol:
            raise MultichainError(
                f"greedy policy has {len(classes)} recurrent classes with gains {gains}"
            )
    raise NonConvergence(f"value iteration did not converge in {it} iterations (span {span:.3g})", span)


def solve_min_metric(
    mdp: MdpInstance,
    metric: "Metric | str",
    eps: float = DEFAULT_EPS,
    tol: float = INNER_TOL,
    max_iter: int = INNER_MAX_ITER,
) -> SolveResult:
    """Binary search for the rho where the optimal linearized gain crosses zero."""
    metric = Metric.parse(metric)
    if not eps > 0:
        raise ValueError("eps must be positive")
    v0 = average_reward_vi(mdp, metric, 0.0, tol, max_iter)
    v1 = average_reward_vi(mdp, metric, 1.0, tol, max_iter, h0=v0.bias)
    if not (v0.gain > 0.0 and v1.gain < 0.0):
        raise SolverError(
            f"expected v*(0) > 0 > v*(1), got v*(0)={v0.gain:.6g}, v*(1)={v1.gain:.6g}"
        )
    lo, hi = 0.0, 1.0
    outer = 0
    h = v0.bias
    while hi - lo >= eps:
        mid = 0.5 * (lo + hi)
        res = average_reward_vi(mdp, metric, mid, tol, max_iter, h0=h)
        h = res.bias
        outer += 1
        if res.gain > 0.0:
            lo = mid
        else:
            hi = mid
    rho_bar = 0.5 * (lo + hi)
    final = average_reward_vi(mdp, metric, rho_bar, tol, max_iter, h0=h)
    log.debug(
        "%s %s alpha=%s: rho_bar=%.6f after %d bisections", mdp.protocol.value, metric.value,
        mdp.alpha, rho_bar, outer,
    )
    return SolveResult(
        rho_bar=rho_bar,
        metric_value=1.0 - rho_bar,
        policy=final.policy,
        outer_iterations=outer,
        inner_residual=final.span,
        metric=metric,
        protocol=mdp.protocol,
        alpha=mdp.alpha,
        k=mdp.k,
        gain_at_rho_bar=final.gain,
        lh_cap=mdp.spec.lh_cap if mdp.protocol is Protocol.STREAMLET else None,
    )


def max_outer_iterations(eps: float) -> int:
    return math.ceil(math.log2(1.0 / eps)) + 1


# --- fixed-policy analysis -------------------------------------------------

def _per_state(mdp: MdpInstance, policy: Policy, what: str) -> np.ndarray:
    rows = policy.rows(mdp)
    return mdp.compiled.expected(what)[rows]


def transition_matrix(mdp: MdpInstance, policy: Policy) -> np.ndarray:
    cm = mdp.compiled
    rows = policy.rows(mdp)
    P = np.zeros((cm.n_states, cm.n_states))
    for s, r in enumerate(rows):
        P[s, cm.nxt[r, 0]] += cm.prob[r, 0]
        P[s, cm.nxt[r, 1]] += cm.prob[r, 1]
    return P


def recurrent_classes(mdp: MdpInstance, policy: Policy, start: Optional[int] = None) -> list[np.ndarray]:
    """Closed communicating classes reachable from ``start`` (all states if None)."""
    P = transition_matrix(mdp, policy)
    graph = csr_matrix(P > 0.0)
    n_comp, labels = connected_components(graph, directed=True, connection="strong")
    if start is None:
        reach = np.ones(mdp.n_states, dtype=bool)
    else:
        order = breadth_first_order(graph, start, directed=True, return_predecessors=False)
        reach = np.zeros(mdp.n_states, dtype=bool)
        reach[order] = True
    classes = []
    for comp in range(n_comp):
        members = np.flatnonzero(labels == comp)
        if not reach[members[0]]:
            continue
        out = P[members][:, labels != comp]
        if not (out > 0.0).any():
            classes.append(members)
    classes.sort(key=lambda m: m[0])
    return classes


def _class_distribution(mdp: MdpInstance, policy: Policy, members: np.ndarray) -> np.ndarray:
    P = transition_matrix(mdp, policy)[np.ix_(members, members)]
    m = len(members)
    A = P.T - np.eye(m)
    A[-1, :] = 1.0
    b = np.zeros(m)
    b[-1] = 1.0
    pi = np.linalg.solve(A, b)
    pi = np.clip(pi, 0.0, None)
    return pi / pi.sum()


def stationary_distribution(mdp: MdpInstance, policy: Policy, start: Optional[int] = None) -> np.ndarray:
    """Stationary law of the policy's chain on the recurrent class reached from ``start``."""
    start = mdp.initial if start is None else int(start)
    classes = recurrent_classes(mdp, policy, start)
    if len(classes) != 1:
        raise MultichainError(f"{len(classes)} recurrent classes reachable from state {start}")
    members = classes[0]
    pi = np.zeros(mdp.n_states)
    pi[members] = _class_distribution(mdp, policy, members)
    return pi


def evaluate_policy(mdp: MdpInstance, policy: Policy, start: Optional[int] = None) -> PolicyValue:
    """Long-run (growth, rate) of a fixed policy."""
    pi = stationary_distribution(mdp, policy, start)
    t = pi @ _per_state(mdp, policy, "time")
    return PolicyValue(
        float(pi @ _per_state(mdp, policy, "b_h") / t),
        float(pi @ _per_state(mdp, policy, "c") / t),
    )


def expected_metric(mdp: MdpInstance, policy: Policy, metric: Metric, start: Optional[int] = None) -> float:
    """Expected long-run ratio, weighting each reachable recurrent class by
    its absorption probability.  Equals ``evaluate_policy`` for unichain policies."""
    start = mdp.initial if start is None else int(start)
    classes = recurrent_classes(mdp, policy, start)
    num = _per_state(mdp, policy, metric.numerator)
    t = _per_state(mdp, policy, "time")
    ratios = []
    for members in classes:
        pi = _class_distribution(mdp, policy, members)
        ratios.append(float(pi @ num[members] / (pi @ t[members])))
    if len(classes) == 1:
        return ratios[0]
    return float(np.dot(absorption_probabilities(mdp, policy, classes, start), ratios))


def absorption_probabilities(mdp, policy, classes, start) -> np.ndarray:
    P = transition_matrix(mdp, policy)
    n = mdp.n_states
    in_class = np.full(n, -1)
    for i, members in enumerate(classes):
        in_class[members] = i
    if in_class[start] >= 0:
        out = np.zeros(len(classes))
        out[in_class[start]] = 1.0
        return out
    transient = np.flatnonzero(in_class < 0)
    pos = {s: i for i, s in enumerate(transient)}
    Q = P[np.ix_(transient, transient)]
    R = np.stack([P[np.ix_(transient, m)].sum(axis=1) for m in classes], axis=1)
    B = np.linalg.solve(np.eye(len(transient)) - Q, R)
    return B[pos[start]]


@dataclass(frozen=True)
class Deviation:
    state: str
    action: str
    value: float
    improvement: float


@dataclass
class Certificate:
    metric: Metric
    value: float
    tol: float
    evaluated: int = 0
    violations: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.violations

    def __bool__(self) -> bool:
        return self.passed

    def summary(self) -> str:
        head = "PASS" if self.passed else "FAIL"
        lines = [f"{head}: {self.metric.value}={self.value:.6f}, {self.evaluated} deviations checked"]
        for d in self.violations:
            lines.append(f"  {d.state} -> {d.action}: {d.value:.6f} (lower by {d.improvement:.3g})")
        return "\n".join(lines)


def deviation_certificate(
    mdp: MdpInstance, policy: Policy, metric: "Metric | str", tol: float = 1e-3
) -> Certificate:
    """Check that no single-state deviation lowers the metric by more than ``tol``."""
    metric = Metric.parse(metric)
    base = expected_metric(mdp, policy, metric)
    cert = Certificate(metric, base, tol)
    for s in range(mdp.n_states):
        for a in mdp.actions(s):
            if a == policy[s]:
                continue
            value = expected_metric(mdp, policy.with_action(s, a), metric)
            cert.evaluated += 1
            if value < base - tol:
                cert.violations.append(Deviation(mdp.states[s].render(), a.label, value, base - value))
    return cert


def solve_grid(
    protocols: Iterable, alphas: Sequence[float], metrics: Iterable, k: float = 5.0, eps: float = DEFAULT_EPS
):
    """Yield (protocol, alpha, metric, SolveResult) in deterministic order."""
    from .mdp import build_mdp

    for p in protocols:
        for a in alphas:
            mdp = build_mdp(p, a, k)
            for m in metrics:
                yield Protocol.parse(p), a, Metric.parse(m), solve_min_metric(mdp, m, eps)
