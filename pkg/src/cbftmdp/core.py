"""Shared domain types: leaders, actions, states, rewards and transition entries."""

from __future__ import annotations

import re
from enum import Enum, IntEnum
from typing import NamedTuple


class Protocol(str, Enum):
    CHS = "chs"
    TCHS = "2chs"
    FHS = "fhs"
    STREAMLET = "streamlet"

    @classmethod
    def parse(cls, value: "str | Protocol") -> "Protocol":
        if isinstance(value, Protocol):
            return value
        key = str(value).strip().lower()
        aliases = {"tchs": "2chs", "two-chain": "2chs", "hotstuff": "chs"}
        key = aliases.get(key, key)
        for p in cls:
            if p.value == key or p.name.lower() == key:
                return p
        raise ValueError(f"unknown protocol {value!r}")


class Leader(IntEnum):
    H = 0
    A = 1


class Action(IntEnum):
    """Adversary actions. The integer order is the solver's tie-break order."""

    ADOPT = 0
    WAIT = 1
    RELEASE = 2
    SILENT = 3
    WITHHOLD = 4

    @property
    def label(self) -> str:
        return self.name.capitalize()

    @classmethod
    def parse(cls, value: "str | Action") -> "Action":
        if isinstance(value, Action):
            return value
        try:
            return cls[str(value).strip().upper()]
        except KeyError:
            raise ValueError(f"unknown action {value!r}") from None


class ConsecState(NamedTuple):
    """Length of the consecutive certified run; ``primed`` marks a full run
    whose successor will not be consecutive (3' / 2')."""

    value: int
    primed: bool = False

    def render(self) -> str:
        return f"{self.value}p" if self.primed else str(self.value)


class State(NamedTuple):
    cs: ConsecState
    la: int
    lh: int
    leader: Leader

    def render(self) -> str:
        return f"({self.cs.render()},{self.la},{self.lh},{self.leader.name})"

    def sort_key(self) -> tuple:
        return (self.cs.value, self.cs.primed, self.la, self.lh, int(self.leader))


_STATE_RE = re.compile(r"^\(\s*(\d)(p?)\s*,\s*(\d+)\s*,\s*(\d+)\s*,\s*([HA])\s*\)$")


def parse_state(text: str) -> State:
    m = _STATE_RE.match(text.strip())
    if m is None:
        raise ValueError(f"malformed state string {text!r}")
    cs, primed, la, lh, leader = m.groups()
    return State(ConsecState(int(cs), primed == "p"), int(la), int(lh), Leader[leader])


class LegProfile(NamedTuple):
    """Message legs of one view: ``n_actual`` take delta, ``n_bound`` take the bound."""

    n_actual: int
    n_bound: int

    def time(self, k: float, delta: float = 1.0) -> float:
        return self.n_actual * delta + self.n_bound * k * delta


class RewardVector(NamedTuple):
    b_h: int
    c: int
    legs: LegProfile

    def time(self, k: float) -> float:
        return self.legs.time(k)


class TransitionEntry(NamedTuple):
    next: State
    prob: float
    reward: RewardVector
