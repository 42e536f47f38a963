"""Materialized MDP instances for one (protocol, alpha, k)."""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from types import MappingProxyType
from typing import Mapping, Optional

import numpy as np

from .core import Action, ConsecState, Leader, Protocol, State, TransitionEntry
from .rules import ProtocolSpec, legal_actions, protocol_spec, transition

DEFAULT_K = 5.0
ALPHA_MAX = 1.0 / 3.0
INITIAL_STATE = State(ConsecState(0), 0, 0, Leader.H)


@dataclass(frozen=True)
class CompiledMdp:
    """Row-major array form used by the solver and the simulator kernels.

    Rows enumerate (state, legal action) pairs grouped by state, actions in
    tie-break order.  Column 0 of the per-outcome arrays is the adversarial
    next leader, column 1 the honest one.
    """

    n_states: int
    row_ptr: np.ndarray      # int64 [n_states + 1]
    row_state: np.ndarray    # int64 [n_rows]
    row_action: np.ndarray   # int64 [n_rows]
    nxt: np.ndarray          # int64 [n_rows, 2]
    prob: np.ndarray         # float64 [n_rows, 2]
    b_h: np.ndarray          # int64 [n_rows, 2]
    c: np.ndarray            # int64 [n_rows, 2]
    n_actual: np.ndarray     # int64 [n_rows, 2]
    n_bound: np.ndarray      # int64 [n_rows, 2]
    time: np.ndarray         # float64 [n_rows, 2]

    @property
    def n_rows(self) -> int:
        return len(self.row_state)

    def expected(self, what: str) -> np.ndarray:
        arr = {"b_h": self.b_h, "c": self.c, "time": self.time}[what]
        return (self.prob * arr).sum(axis=1)

    def row_of(self, state: int, action: Action) -> int:
        lo, hi = self.row_ptr[state], self.row_ptr[state + 1]
        for r in range(lo, hi):
            if self.row_action[r] == int(action):
                return r
        raise KeyError((state, action))


@dataclass(frozen=True, eq=False)
class MdpInstance:
    protocol: Protocol
    alpha: float
    k: float
    spec: ProtocolSpec
    states: tuple
    table: Mapping
    delta: float = 1.0
    index: Mapping = field(default_factory=dict)

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def initial(self) -> int:
        return self.index[INITIAL_STATE]

    def actions(self, s: int) -> list[Action]:
        return [a for a in self.spec.actions if (s, a) in self.table]

    def entries(self, s: int, a: Action) -> tuple:
        return self.table[(s, Action(a))]

    @cached_property
    def compiled(self) -> CompiledMdp:
        rows = [(s, a) for s in range(self.n_states) for a in self.actions(s)]
        n = len(rows)
        row_ptr = np.zeros(self.n_states + 1, dtype=np.int64)
        for s, _ in rows:
            row_ptr[s + 1] += 1
        row_ptr = np.cumsum(row_ptr)
        shape = (n, 2)
        nxt = np.zeros(shape, np.int64)
        prob = np.zeros(shape)
        b_h = np.zeros(shape, np.int64)
        c = np.zeros(shape, np.int64)
        na = np.zeros(shape, np.int64)
        nb = np.zeros(shape, np.int64)
        for r, (s, a) in enumerate(rows):
            for j, e in enumerate(self.table[(s, a)]):
                nxt[r, j] = self.index[e.next]
                prob[r, j] = e.prob
                b_h[r, j] = e.reward.b_h
                c[r, j] = e.reward.c
                na[r, j] = e.reward.legs.n_actual
                nb[r, j] = e.reward.legs.n_bound
        arrays = dict(
            n_states=self.n_states,
            row_ptr=row_ptr,
            row_state=np.array([s for s, _ in rows], np.int64),
            row_action=np.array([int(a) for _, a in rows], np.int64),
            nxt=nxt, prob=prob, b_h=b_h, c=c, n_actual=na, n_bound=nb,
            time=(na + self.k * nb) * self.delta,
        )
        for v in arrays.values():
            if isinstance(v, np.ndarray):
                v.setflags(write=False)
        return CompiledMdp(**arrays)

    def dump(self) -> str:
        lines = [f"# {self.protocol.value} alpha={self.alpha!r} k={self.k!r}"]
        for s, st in enumerate(self.states):
            for a in self.actions(s):
                for e in self.table[(s, a)]:
                    r = e.reward
                    lines.append(
                        f"{st.render()} {a.label} -> {e.next.render()} p={e.prob!r} "
                        f"b_h={r.b_h} c={r.c} legs=({r.legs.n_actual},{r.legs.n_bound})"
                    )
        return "\n".join(lines)


def check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 <= alpha < ALPHA_MAX:
        raise ValueError(f"alpha must satisfy 0 <= alpha < 1/3, got {alpha}")
    return alpha


def build_mdp(protocol, alpha: float, k: float = DEFAULT_K, lh_cap: Optional[int] = None) -> MdpInstance:
    """Materialize every (state, legal action) of ``protocol`` at ``alpha``."""
    spec = protocol_spec(protocol, lh_cap)
    alpha = check_alpha(alpha)
    k = float(k)
    if not k > 1.0:
        raise ValueError(f"k must be > 1, got {k}")
    states = tuple(spec.states())
    index = {st: i for i, st in enumerate(states)}
    table = {}
    for i, st in enumerate(states):
        for a in legal_actions(spec.id, st, spec):
            table[(i, a)] = tuple(transition(spec.id, st, a, alpha, k, spec))
    return MdpInstance(
        protocol=spec.id,
        alpha=alpha,
        k=k,
        spec=spec,
        states=states,
        table=MappingProxyType(table),
        index=MappingProxyType(index),
    )


@dataclass(frozen=True)
class Violation:
    state: Optional[str]
    action: Optional[str]
    message: str

    def __str__(self) -> str:
        where = " ".join(x for x in (self.state, self.action) if x)
        return f"{where}: {self.message}" if where else self.message


def validate_mdp(mdp: MdpInstance) -> list[Violation]:
    """Every structural or reward-bound violation in ``mdp``; empty means valid."""
    out: list[Violation] = []
    streamlet = mdp.protocol is Protocol.STREAMLET
    for s, st in enumerate(mdp.states):
        name = st.render()
        acts = [a for (i, a) in mdp.table if i == s]
        if not acts:
            out.append(Violation(name, None, "no legal action"))
        for a in acts:
            entries = mdp.table[(s, a)]
            tag = Action(a).label
            if len(entries) != 2:
                out.append(Violation(name, tag, f"expected 2 outcomes, got {len(entries)}"))
            total = sum(e.prob for e in entries)
            if abs(total - 1.0) > 1e-12:
                out.append(Violation(name, tag, f"probabilities sum to {total!r}, not 1"))
            for e in entries:
                out.extend(_check_entry(mdp, name, tag, st, Action(a), e, streamlet))
    return out


def _check_entry(mdp, name, tag, st: State, a: Action, e: TransitionEntry, streamlet: bool):
    bad = []
    if not 0.0 <= e.prob <= 1.0:
        bad.append(f"probability {e.prob!r} outside [0, 1]")
    if e.next not in mdp.index:
        bad.append(f"target {e.next!r} is not a state of this instance")
    r = e.reward
    if not (isinstance(r.b_h, int) and r.b_h >= 0):
        bad.append(f"b_h={r.b_h!r} must be a non-negative integer")
    elif r.b_h > st.lh + 1:
        bad.append(f"b_h={r.b_h} exceeds pre-state l_h + 1 = {st.lh + 1}")
    if not (isinstance(r.c, int) and r.c >= 0):
        bad.append(f"c={r.c!r} must be a non-negative integer")
    elif r.c > 2:
        bad.append(f"c={r.c} violates the bound c <= 2")
    elif r.c == 2 and not (streamlet and st.leader is Leader.H and a is Action.RELEASE):
        bad.append("c=2 is only possible on a streamlet honest-leader Release")
    legs = r.legs
    if min(legs.n_actual, legs.n_bound) < 0 or not 2 <= legs.n_actual + legs.n_bound <= 3:
        bad.append(f"leg profile {tuple(legs)} must have 2 or 3 non-negative legs")
    elif legs.time(mdp.k) <= 0:
        bad.append("view time must be positive")
    return [Violation(name, tag, m) for m in bad]
