"""Per-view simulation records and their line-oriented text format."""

from __future__ import annotations

import os
from typing import Iterable, Iterator, NamedTuple

import numpy as np

from ..core import Action, Leader, State, parse_state

TRACE_HEADER = "# view\tstate\taction\tnext_leader\tlegs\tb_h\tc\tt"


class ViewRecord(NamedTuple):
    view: int
    state: State
    action: Action
    next_leader: Leader
    delta_legs: tuple   # realized duration of each delta-bounded leg
    bound_legs: tuple   # duration of each leg that waits for the timeout
    b_h: int
    c: int
    t: float

    def render(self) -> str:
        legs = ",".join(repr(x) for x in self.delta_legs) + "|" + ",".join(repr(x) for x in self.bound_legs)
        return "\t".join((
            str(self.view), self.state.render(), self.action.label, self.next_leader.name,
            legs, str(self.b_h), str(self.c), repr(self.t),
        ))

    @classmethod
    def parse(cls, line: str) -> "ViewRecord":
        f = line.rstrip("\n").split("\t")
        if len(f) != 8:
            raise ValueError(f"trace line needs 8 tab-separated fields, got {len(f)}")
        d, _, b = f[4].partition("|")
        return cls(
            int(f[0]), parse_state(f[1]), Action.parse(f[2]), Leader[f[3]],
            tuple(float(x) for x in d.split(",") if x),
            tuple(float(x) for x in b.split(",") if x),
            int(f[5]), int(f[6]), float(f[7]),
        )


class Trace:
    """Lazy view of a simulation run; records are built on access."""

    def __init__(self, mdp, policy, states, outcomes, times, delay_u, delay, warmup):
        self.mdp = mdp
        self.policy = policy
        self.states = states
        self.outcomes = outcomes
        self.times = times
        self.delay_u = delay_u
        self.delay = delay
        self.warmup = warmup
        self._rows = policy.rows(mdp)[states]

    @property
    def protocol(self):
        return self.mdp.protocol

    def __len__(self) -> int:
        return len(self.states)

    def __getitem__(self, i: int) -> ViewRecord:
        cm = self.mdp.compiled
        if i < 0:
            i += len(self)
        r, o = int(self._rows[i]), int(self.outcomes[i])
        d = self.delay
        na, nb = int(cm.n_actual[r, o]), int(cm.n_bound[r, o])
        u = self.delay_u[i]
        return ViewRecord(
            view=i,
            state=self.mdp.states[int(self.states[i])],
            action=self.policy.actions[int(self.states[i])],
            next_leader=Leader.A if o == 0 else Leader.H,
            delta_legs=tuple(d.delta_nominal + d.amplitude * (2.0 * float(u[j]) - 1.0) for j in range(na)),
            bound_legs=(d.bound(self.mdp.k),) * nb,
            b_h=int(cm.b_h[r, o]),
            c=int(cm.c[r, o]),
            t=float(self.times[i]),
        )

    def __iter__(self) -> Iterator[ViewRecord]:
        cm = self.mdp.compiled
        d = self.delay
        rows, outs = self._rows, self.outcomes.astype(np.int64)
        na, nb = cm.n_actual[rows, outs].tolist(), cm.n_bound[rows, outs].tolist()
        b_h, c = cm.b_h[rows, outs].tolist(), cm.c[rows, outs].tolist()
        legs = (d.delta_nominal + d.amplitude * (2.0 * self.delay_u - 1.0)).tolist()
        bound = d.bound(self.mdp.k)
        states = self.mdp.states
        acts = self.policy.actions
        leaders = (Leader.A, Leader.H)
        for i, (s, o, t) in enumerate(zip(self.states.tolist(), outs.tolist(), self.times.tolist())):
            yield ViewRecord(
                i, states[s], acts[s], leaders[o], tuple(legs[i][:na[i]]), (bound,) * nb[i], b_h[i], c[i], t,
            )

    def rewards(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-view (b_h, c) arrays."""
        cm = self.mdp.compiled
        o = self.outcomes.astype(np.int64)
        return cm.b_h[self._rows, o], cm.c[self._rows, o]

    def dump(self, path: "str | os.PathLike") -> None:
        dump_trace(self, path, self.protocol)


def dump_trace(records: Iterable[ViewRecord], path: "str | os.PathLike", protocol=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        if protocol is not None:
            fh.write(f"# protocol={protocol.value}\n")
        fh.write(TRACE_HEADER + "\n")
        for rec in records:
            fh.write(rec.render() + "\n")


def load_trace(path: "str | os.PathLike") -> list[ViewRecord]:
    out = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("#") or not line.strip():
                continue
            out.append(ViewRecord.parse(line))
    return out


def trace_protocol(path: "str | os.PathLike"):
    """Protocol recorded in a dumped trace's header, or None."""
    from ..core import Protocol

    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if not line.startswith("#"):
                break
            if line.startswith("# protocol="):
                return Protocol.parse(line.split("=", 1)[1].strip())
    return None
