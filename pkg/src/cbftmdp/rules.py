"""Per-protocol legal actions, state transitions and reward allocation.

Each protocol is described by the four-tuple state (cS, l_a, l_h, L).  The
HotStuff family (CHS, 2CHS, FHS) shares one transition structure and differs
in the consecutive-run cap, the pending-block cap and the view timing.
Streamlet has its own table with an extra ``Withhold`` action.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from .core import (
    Action,
    ConsecState,
    Leader,
    LegProfile,
    Protocol,
    RewardVector,
    State,
    TransitionEntry,
)

DEFAULT_STREAMLET_LH_CAP = 4

_HOTSTUFF_ACTIONS = (Action.ADOPT, Action.WAIT, Action.RELEASE, Action.SILENT)
_STREAMLET_ACTIONS = _HOTSTUFF_ACTIONS + (Action.WITHHOLD,)


class IllegalMove(ValueError):
    """Raised for states outside the protocol's space or illegal actions."""


@dataclass(frozen=True)
class ProtocolSpec:
    id: Protocol
    consec_cap: int
    lh_cap: int
    has_primed: bool
    actions: tuple
    responsive: Optional[bool]

    def consec_values(self) -> list[ConsecState]:
        vals = [ConsecState(v) for v in range(self.consec_cap + 1)]
        if self.has_primed:
            vals.append(ConsecState(self.consec_cap, True))
        return vals

    def states(self) -> list[State]:
        """All tuples satisfying the state invariants, in lexicographic order."""
        out = [
            State(cs, la, lh, leader)
            for cs in self.consec_values()
            for la in (0, 1)
            for lh in range(self.lh_cap + 1)
            for leader in (Leader.H, Leader.A)
        ]
        out.sort(key=State.sort_key)
        return out

    def check_state(self, state: State) -> None:
        cs = state.cs
        if not 0 <= cs.value <= self.consec_cap:
            raise IllegalMove(f"cS {cs.value} outside [0, {self.consec_cap}] for {self.id.value}")
        if cs.primed and not (self.has_primed and cs.value == self.consec_cap):
            raise IllegalMove(f"primed cS only valid at the cap for {self.id.value}")
        if state.la not in (0, 1):
            raise IllegalMove(f"l_a must be 0 or 1, got {state.la}")
        if not 0 <= state.lh <= self.lh_cap:
            raise IllegalMove(f"l_h {state.lh} outside [0, {self.lh_cap}] for {self.id.value}")
        if not isinstance(state.leader, Leader):
            raise IllegalMove(f"bad leader {state.leader!r}")


def protocol_spec(protocol: "Protocol | str", lh_cap: Optional[int] = None) -> ProtocolSpec:
    p = Protocol.parse(protocol)
    if p is Protocol.STREAMLET:
        cap = DEFAULT_STREAMLET_LH_CAP if lh_cap is None else int(lh_cap)
        if cap < 1:
            raise ValueError("streamlet lh_cap must be >= 1")
        return ProtocolSpec(p, 3, cap, False, _STREAMLET_ACTIONS, None)
    if lh_cap is not None:
        raise ValueError("lh_cap is only configurable for streamlet")
    if p is Protocol.CHS:
        return ProtocolSpec(p, 3, 2, True, _HOTSTUFF_ACTIONS, True)
    if p is Protocol.TCHS:
        return ProtocolSpec(p, 2, 1, True, _HOTSTUFF_ACTIONS, False)
    return ProtocolSpec(p, 2, 1, True, _HOTSTUFF_ACTIONS, True)


def _spec(protocol, spec: Optional[ProtocolSpec]) -> ProtocolSpec:
    if spec is not None:
        return spec
    return protocol_spec(protocol)


def legal_actions(protocol, state: State, spec: Optional[ProtocolSpec] = None) -> list[Action]:
    spec = _spec(protocol, spec)
    spec.check_state(state)
    acts = [Action.ADOPT, Action.WAIT]
    if state.la == 1:
        acts.append(Action.RELEASE)
    acts.append(Action.SILENT)
    if spec.id is Protocol.STREAMLET and state.la == 1:
        acts.append(Action.WITHHOLD)
    return acts


def time_legs(protocol, current_leader: Leader, action: Action, next_leader: Leader) -> LegProfile:
    """Leg decomposition (propose, collect votes, view change) of one view."""
    p = Protocol.parse(protocol)
    honest_next = next_leader is Leader.H
    if p is Protocol.STREAMLET:
        return LegProfile(0, 2)
    if p is Protocol.TCHS:
        if current_leader is Leader.H:
            return LegProfile(2, 1) if honest_next else LegProfile(1, 2)
        return LegProfile(0, 2) if action is Action.SILENT else LegProfile(0, 3)
    # CHS and FHS are responsive; FHS skips the view change on the happy path.
    if current_leader is Leader.H:
        if honest_next:
            return LegProfile(2, 0) if p is Protocol.FHS else LegProfile(3, 0)
        return LegProfile(1, 2)
    if action is Action.SILENT:
        return LegProfile(1, 1) if honest_next else LegProfile(0, 2)
    return LegProfile(1, 2) if honest_next else LegProfile(0, 3)


def _advance(spec: ProtocolSpec, cs: ConsecState, n: int) -> ConsecState:
    # A primed run is not continued by its successor: the run restarts.
    base = 0 if cs.primed else cs.value
    return ConsecState(min(base + n, spec.consec_cap))


def _reset_or_prime(spec: ProtocolSpec, cs: ConsecState) -> ConsecState:
    if cs.value == spec.consec_cap:
        return ConsecState(spec.consec_cap, True)
    return ConsecState(0)


def _hotstuff_outcome(spec: ProtocolSpec, s: State, a: Action):
    cap = spec.lh_cap
    full = s.cs.value == spec.consec_cap
    la, lh = s.la, s.lh
    if s.leader is Leader.H:
        if a is Action.ADOPT:
            cs = _advance(spec, s.cs, 1) if la == 0 else ConsecState(1)
            return (cs, 0, 1), lh, int(full and la == 0)
        if a in (Action.WAIT, Action.SILENT):
            cs = _advance(spec, s.cs, 1) if la == 0 else ConsecState(1)
            saturated = int(lh == cap)
            return (cs, 0, min(lh + 1, cap)), saturated, int(full and la == 0)
        # Release of the hidden block at the start of an honest view
        if lh == 0:
            return (_advance(spec, s.cs, 2), 0, 1), 0, int(full)
        return (ConsecState(2), 0, 1), 0, 0
    # adversarial leader
    if a is Action.ADOPT:
        cs = s.cs if la == 0 else _reset_or_prime(spec, s.cs)
        return (cs, 1, 0), lh, 0
    if a is Action.WAIT and la == 0:
        return (_reset_or_prime(spec, s.cs), 1, lh), 0, 0
    if a in (Action.WAIT, Action.RELEASE):
        if lh == 0:
            return (_advance(spec, s.cs, 1), 1, 0), 0, int(full)
        return (ConsecState(1), 1, 0), 0, 0
    # Silent
    drops_last = la == 0 and lh > 0 and s.cs.value != 0 and not s.cs.primed
    return (ConsecState(0), 0, lh - 1 if drops_last else lh), 0, 0


def _streamlet_outcome(spec: ProtocolSpec, s: State, a: Action):
    la, lh = s.la, s.lh
    full = s.cs.value >= 2
    if s.leader is Leader.H:
        if a is Action.ADOPT:
            if la == 0:
                return (_advance(spec, s.cs, 1), 0, 1), lh, int(full)
            return (ConsecState(1), 0, 1), lh, 0
        if a in (Action.WAIT, Action.SILENT):
            if la == 0 and full:
                # The finalized prefix absorbs every pending honest block.
                return (ConsecState(3), 0, 1), lh, 1
            nxt_cs = _advance(spec, s.cs, 1) if la == 0 else ConsecState(1)
            # Overflow past the cap is dropped uncredited.
            return (nxt_cs, 0, min(lh + 1, spec.lh_cap)), 0, 0
        if a is Action.RELEASE:
            c = {0: 0, 1: 1}.get(s.cs.value, 2)
            return (_advance(spec, s.cs, 2), 0, 1), lh, c
        return (ConsecState(0), 0, 0), lh, 0  # Withhold
    if a is Action.ADOPT:
        if la == 0:
            return (s.cs, 1, 0), lh, 0
        return (ConsecState(0), 1, 0), lh, 0
    if a is Action.SILENT:
        return (ConsecState(0), 0, 0), 0, 0
    if a is Action.WAIT and la == 0:
        return (ConsecState(0), 0, lh), 0, 0
    # Wait/Release/Withhold with a held block
    return (_advance(spec, s.cs, 1), 1, 0), lh, int(full)


def _outcome(spec: ProtocolSpec, state: State, action: Action):
    action = Action(action)
    if action not in legal_actions(spec.id, state, spec):
        raise IllegalMove(f"{action.label} is not legal in {state.render()} for {spec.id.value}")
    if spec.id is Protocol.STREAMLET:
        return _streamlet_outcome(spec, state, action)
    return _hotstuff_outcome(spec, state, action)


def reward(protocol, state: State, action: Action, spec: Optional[ProtocolSpec] = None) -> tuple[int, int]:
    """(b_h, c) credited by taking ``action`` in ``state``."""
    _, b_h, c = _outcome(_spec(protocol, spec), state, action)
    return b_h, c


def transition(
    protocol,
    state: State,
    action: Action,
    alpha: float,
    k: float,
    spec: Optional[ProtocolSpec] = None,
) -> list[TransitionEntry]:
    """Both outcomes of one view: next leader adversarial (prob alpha) then honest."""
    spec = _spec(protocol, spec)
    (cs, la, lh), b_h, c = _outcome(spec, state, action)
    entries = []
    for nxt_leader, prob in ((Leader.A, alpha), (Leader.H, 1.0 - alpha)):
        legs = time_legs(spec.id, state.leader, Action(action), nxt_leader)
        entries.append(
            TransitionEntry(State(cs, la, lh, nxt_leader), prob, RewardVector(b_h, c, legs))
        )
    return entries
