"""Independent replay of a trace on an explicit block tree.

The replay does not consult the MDP tables.  It keeps the honest blocks that
are still at risk, the adversary's hidden block and the consecutive-run
structure at the attachment point, and re-derives each view's credited honest
blocks and commit events from the leader, the chosen action and the next
leader.  Any difference with the recorded trace is reported with its view.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Optional

from ..core import Action, ConsecState, Leader, Protocol, State
from ..rules import DEFAULT_STREAMLET_LH_CAP, time_legs

_RUN_CAP = {Protocol.CHS: 3, Protocol.TCHS: 2, Protocol.FHS: 2, Protocol.STREAMLET: 3}
_LOCK_DEPTH = {Protocol.CHS: 2, Protocol.TCHS: 1, Protocol.FHS: 1}
_TIME_TOL = 1e-9


@dataclass
class Block:
    owner: Leader
    view: int
    status: str = "pending"   # pending | credited | orphaned | hidden | public


@dataclass(frozen=True)
class Discrepancy:
    view: int
    field: str
    replay: object
    trace: object

    def __str__(self) -> str:
        return f"view {self.view}: {self.field} replay={self.replay!r} trace={self.trace!r}"


@dataclass
class ReplayReport:
    views: int = 0
    discrepancies: list = field(default_factory=list)
    honest_blocks: int = 0
    credited: int = 0
    orphaned: int = 0
    commits: int = 0
    truncated: bool = False

    @property
    def ok(self) -> bool:
        return not self.discrepancies

    def summary(self) -> str:
        head = (
            f"{self.views} views replayed: {self.honest_blocks} honest blocks, "
            f"{self.credited} credited, {self.orphaned} orphaned, {self.commits} commits"
        )
        if self.ok:
            return head + "; no discrepancies"
        lines = [head + f"; {len(self.discrepancies)} discrepancies" + (" (truncated)" if self.truncated else "")]
        lines.extend(str(d) for d in self.discrepancies[:20])
        return "\n".join(lines)


class _Chain:
    """Block-tree bookkeeping for one protocol."""

    def __init__(self, protocol: Protocol, lh_cap: Optional[int]):
        self.protocol = protocol
        self.streamlet = protocol is Protocol.STREAMLET
        self.run_cap = _RUN_CAP[protocol]
        if self.streamlet:
            self.depth = DEFAULT_STREAMLET_LH_CAP if lh_cap is None else lh_cap
        else:
            self.depth = _LOCK_DEPTH[protocol]
        self.pending: list[Block] = []
        self.hidden: Optional[Block] = None
        self.run = 0          # consecutive certified blocks ending at the attachment point
        self.primed = False   # full run whose successor cannot be consecutive
        self.view = 0
        self._credited = 0
        self._events = 0
        self._first_append = True
        self.totals = dict(honest=0, credited=0, orphaned=0)

    # state as seen through the four-tuple
    def observed(self, leader: Leader) -> State:
        return State(ConsecState(self.run, self.primed), int(self.hidden is not None), len(self.pending), leader)

    def resync(self, st: State) -> None:
        self.pending = [Block(Leader.H, self.view) for _ in range(st.lh)]
        self.hidden = Block(Leader.A, self.view, "hidden") if st.la else None
        self.run, self.primed = st.cs.value, st.cs.primed

    def begin(self, view: int) -> None:
        self.view = view
        self._credited = 0
        self._events = 0
        self._first_append = True

    def finish(self) -> tuple[int, int]:
        return self._credited, self._events

    # primitive block-tree events
    def _credit(self, b: Block) -> None:
        b.status = "credited"
        self._credited += 1
        self.totals["credited"] += 1

    def _orphan(self, b: Block) -> None:
        b.status = "orphaned"
        self.totals["orphaned"] += 1

    def credit_pending(self) -> None:
        for b in self.pending:
            self._credit(b)
        self.pending = []

    def orphan_pending(self) -> None:
        for b in self.pending:
            self._orphan(b)
        self.pending = []

    def break_structure(self, keep_full: bool) -> None:
        """The next block will not be consecutive with the attachment point."""
        full = self.run >= self.run_cap
        self.primed = keep_full and full and not self.streamlet
        self.run = self.run_cap if self.primed else 0

    def append(self, block: Block, fork: bool = False) -> None:
        """Attach a block to the public chain and apply the commit rule."""
        if self.streamlet:
            # finalization: the middle of three consecutive blocks is final
            self.run = 1 if fork else min(self.run + 1, self.run_cap)
            if not fork and self.run >= 3:
                self._events += 1
        else:
            # a block extending a full run commits its head; judged once per view
            full = self.run >= self.run_cap or self.primed
            if self._first_append and full and not fork:
                self._events += 1
            self.run = 1 if (fork or self.primed) else min(self.run + 1, self.run_cap)
            self.primed = False
        self._first_append = False

    def new_honest(self) -> Block:
        self.totals["honest"] += 1
        return Block(Leader.H, self.view)

    def push_pending(self, b: Block) -> None:
        self.pending.append(b)
        if len(self.pending) > self.depth:
            oldest = self.pending.pop(0)
            if self.streamlet:
                # beyond the tracked window the block is no longer followed
                self._orphan(oldest)
            else:
                # buried under enough certified descendants: locked in
                self._credit(oldest)

    def hide(self) -> None:
        self.hidden = Block(Leader.A, self.view, "hidden")

    def drop_hidden(self) -> None:
        self.hidden = None

    def publish_hidden(self, fork: bool) -> None:
        b = self.hidden
        self.hidden = None
        b.status = "public"
        self.append(b, fork=fork)


def _hotstuff_view(ch: _Chain, leader: Leader, action: Action) -> None:
    if leader is Leader.H:
        if action is Action.RELEASE:
            # the held block is published first; if it conflicts with pending
            # honest blocks, it overrides them
            fork = bool(ch.pending)
            if fork:
                ch.orphan_pending()
            ch.publish_hidden(fork)
            b = ch.new_honest()
            ch.append(b)
            ch.push_pending(b)
            return
        if action is Action.ADOPT:
            ch.credit_pending()
        if ch.hidden is not None:
            ch.drop_hidden()
            ch.break_structure(keep_full=False)
        b = ch.new_honest()
        ch.append(b)
        ch.push_pending(b)
        return
    # adversarial leader
    if action is Action.ADOPT:
        ch.credit_pending()
        if ch.hidden is not None:
            ch.drop_hidden()
            ch.break_structure(keep_full=True)
        ch.hide()
        return
    if action is Action.SILENT:
        if ch.hidden is None and ch.pending and ch.run > 0 and not ch.primed:
            # the last honest block never gathers its certificate
            ch._orphan(ch.pending.pop())
        ch.drop_hidden()
        ch.run, ch.primed = 0, False
        return
    if ch.hidden is None:
        # Wait without a held block: start a private fork below the pending blocks
        ch.break_structure(keep_full=True)
        ch.hide()
        return
    # Wait or Release with a held block: it goes public, a new one is held
    fork = bool(ch.pending)
    if fork:
        ch.orphan_pending()
    ch.publish_hidden(fork)
    ch.hide()


def _streamlet_view(ch: _Chain, leader: Leader, action: Action) -> None:
    if leader is Leader.H:
        if action is Action.WITHHOLD:
            # the honest proposal loses to the withheld block, which extends
            # the pending blocks; the structure is broken
            ch.credit_pending()
            ch._orphan(ch.new_honest())
            ch.drop_hidden()
            ch.run = 0
            return
        if action is Action.RELEASE:
            ch.credit_pending()
            ch.publish_hidden(fork=False)
            b = ch.new_honest()
            ch.append(b)
            ch.pending = [b]
            return
        if action is Action.ADOPT:
            ch.credit_pending()
        if ch.hidden is not None:
            ch.drop_hidden()
            ch.run = 0
        b = ch.new_honest()
        ch.append(b)
        if ch._events:
            # finalization covers every earlier pending block
            ch.credit_pending()
            ch.pending = [b]
        elif action is Action.ADOPT:
            ch.pending = [b]
        else:
            ch.push_pending(b)
        return
    if action is Action.ADOPT:
        ch.credit_pending()
        if ch.hidden is not None:
            ch.drop_hidden()
            ch.run = 0
        ch.hide()
        return
    if action is Action.SILENT:
        ch.orphan_pending()
        ch.drop_hidden()
        ch.run = 0
        return
    if ch.hidden is None:
        # Wait with nothing held: the view passes without a block
        ch.run = 0
        return
    ch.credit_pending()
    ch.publish_hidden(fork=False)
    ch.hide()


def replay_verify(
    trace: Iterable,
    protocol: "Protocol | str",
    lh_cap: Optional[int] = None,
    max_discrepancies: int = 1000,
    check_time: bool = True,
) -> ReplayReport:
    """Replay ``trace`` (records in view order) and diff it against the record.

    After a state mismatch the replay resynchronizes to the recorded state so
    that one fault yields one report rather than a cascade.
    """
    protocol = Protocol.parse(protocol)
    if lh_cap is None and hasattr(trace, "mdp"):
        lh_cap = trace.mdp.spec.lh_cap if protocol is Protocol.STREAMLET else None
    ch = _Chain(protocol, lh_cap)
    step = _streamlet_view if ch.streamlet else _hotstuff_view
    report = ReplayReport()
    leader = Leader.H
    bad = report.discrepancies

    def flag(view, name, mine, theirs):
        if len(bad) < max_discrepancies:
            bad.append(Discrepancy(view, name, mine, theirs))
        else:
            report.truncated = True

    for expected_view, rec in enumerate(trace):
        if rec.view != expected_view:
            flag(expected_view, "view", expected_view, rec.view)
        ch.begin(rec.view)
        mine = ch.observed(leader)
        if mine != rec.state:
            flag(rec.view, "state", mine.render(), rec.state.render())
            ch.resync(rec.state)
            leader = rec.state.leader
        step(ch, leader, rec.action)
        b_h, c = ch.finish()
        if b_h != rec.b_h:
            flag(rec.view, "b_h", b_h, rec.b_h)
        if c != rec.c:
            flag(rec.view, "c", c, rec.c)
        if check_time:
            legs = time_legs(protocol, leader, rec.action, rec.next_leader)
            if (len(rec.delta_legs), len(rec.bound_legs)) != tuple(legs):
                flag(rec.view, "legs", tuple(legs), (len(rec.delta_legs), len(rec.bound_legs)))
            total = sum(rec.delta_legs) + sum(rec.bound_legs)
            if abs(total - rec.t) > _TIME_TOL * max(1.0, abs(rec.t)):
                flag(rec.view, "t", total, rec.t)
        report.commits += c
        leader = rec.next_leader
        report.views += 1
    report.honest_blocks = ch.totals["honest"]
    report.credited = ch.totals["credited"]
    report.orphaned = ch.totals["orphaned"]
    return report
