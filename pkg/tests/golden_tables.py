"""Row-by-row transcription of the published transition tables.

Each row is (leader, guard, actions, result, t_next_A, t_next_H) where the
guard tests (cs, la, lh) and ``result`` maps (cs, la, lh) to the next
(cs, la, lh).  cS values are strings: "0".."3" and primed "3p"/"2p".  Times
are (n_delta, n_bound) pairs.  Rewards follow the written reward rules and
are computed separately in ``expected_reward``.

Conventions where the tables are silent:
- a primed run is complete but not extendable: incrementing it restarts at 1
  (or 2 for the double increment);
- "0/3'" selects the primed value when the previous cS is at the cap.
"""

from cbftmdp.core import Action

A, W, R, S, X = Action.ADOPT, Action.WAIT, Action.RELEASE, Action.SILENT, Action.WITHHOLD


def _val(cs):
    return int(cs[0])


def _primed(cs):
    return cs.endswith("p")


def inc(cs, n, cap):
    base = 0 if _primed(cs) else _val(cs)
    return str(min(base + n, cap))


def reset_or_prime(cs, cap):
    return f"{cap}p" if _val(cs) == cap else "0"


def hotstuff_rows(cap, lh_cap, t_honest, t_adv, t_silent):
    """Tables for the HotStuff family; t_* are ((legs next A), (legs next H))."""
    lhmax = lh_cap
    rows = [
        ("H", lambda cs, la, lh: la == 0, {A}, lambda cs, la, lh: (inc(cs, 1, cap), 0, 1), *t_honest),
        ("H", lambda cs, la, lh: la == 1, {A}, lambda cs, la, lh: ("1", 0, 1), *t_honest),
        ("A", lambda cs, la, lh: la == 0, {A}, lambda cs, la, lh: (cs, 1, 0), *t_adv),
        ("A", lambda cs, la, lh: la == 1, {A}, lambda cs, la, lh: (reset_or_prime(cs, cap), 1, 0), *t_adv),
        ("H", lambda cs, la, lh: la == 0, {W, S},
         lambda cs, la, lh: (inc(cs, 1, cap), 0, min(lh + 1, lhmax)), *t_honest),
        ("H", lambda cs, la, lh: la == 1, {W, S}, lambda cs, la, lh: ("1", 0, min(lh + 1, lhmax)), *t_honest),
        ("A", lambda cs, la, lh: la == 0, {W}, lambda cs, la, lh: (reset_or_prime(cs, cap), 1, lh), *t_adv),
        ("A", lambda cs, la, lh: la == 1 and lh == 0, {W, R}, lambda cs, la, lh: (inc(cs, 1, cap), 1, 0), *t_adv),
        ("A", lambda cs, la, lh: la == 1 and lh > 0, {W, R}, lambda cs, la, lh: ("1", 1, 0), *t_adv),
        ("H", lambda cs, la, lh: la == 1 and lh == 0, {R}, lambda cs, la, lh: (inc(cs, 2, cap), 0, 1), *t_honest),
        ("H", lambda cs, la, lh: la == 1 and lh > 0, {R}, lambda cs, la, lh: ("2", 0, 1), *t_honest),
        # footnote a: l_a = 0, l_h > 0 and cS not 0 or primed
        ("A", lambda cs, la, lh: la == 0 and lh > 0 and cs not in ("0", f"{cap}p"), {S},
         lambda cs, la, lh: ("0", 0, lh - 1), *t_silent),
        # footnote b: every other adversarial Silent
        ("A", lambda cs, la, lh: not (la == 0 and lh > 0 and cs not in ("0", f"{cap}p")), {S},
         lambda cs, la, lh: ("0", 0, lh), *t_silent),
    ]
    return rows


CHS_ROWS = hotstuff_rows(3, 2, ((1, 2), (3, 0)), ((0, 3), (1, 2)), ((0, 2), (1, 1)))
TCHS_ROWS = hotstuff_rows(2, 1, ((1, 2), (2, 1)), ((0, 3), (0, 3)), ((0, 2), (0, 2)))
FHS_ROWS = hotstuff_rows(2, 1, ((1, 2), (2, 0)), ((0, 3), (1, 2)), ((0, 2), (1, 1)))


def streamlet_rows(lh_cap):
    """Streamlet rows with their (b_h, c) columns; every view takes two bounds."""
    T = ((0, 2), (0, 2))
    full = lambda cs: _val(cs) >= 2  # noqa: E731

    def honest_extend(cs, la, lh):
        # documented deviation: a finalizing honest view absorbs the pending blocks
        if full(cs):
            return ("3", 0, 1), lh, 1
        return (inc(cs, 1, 3), 0, min(lh + 1, lh_cap)), 0, 0

    return [
        ("H", lambda cs, la, lh: la == 0, {A}, lambda cs, la, lh: ((inc(cs, 1, 3), 0, 1), lh, int(full(cs))), *T),
        ("H", lambda cs, la, lh: la == 1, {A}, lambda cs, la, lh: (("1", 0, 1), lh, 0), *T),
        ("A", lambda cs, la, lh: la == 0, {A}, lambda cs, la, lh: ((cs, 1, 0), lh, 0), *T),
        ("A", lambda cs, la, lh: la == 1, {A}, lambda cs, la, lh: (("0", 1, 0), lh, 0), *T),
        ("H", lambda cs, la, lh: la == 0, {W, S}, honest_extend, *T),
        ("H", lambda cs, la, lh: la == 1, {W, S},
         lambda cs, la, lh: (("1", 0, min(lh + 1, lh_cap)), 0, 0), *T),
        ("A", lambda cs, la, lh: la == 0, {W}, lambda cs, la, lh: (("0", 0, lh), 0, 0), *T),
        ("A", lambda cs, la, lh: la == 1, {W, R, X},
         lambda cs, la, lh: ((inc(cs, 1, 3), 1, 0), lh, int(full(cs))), *T),
        ("H", lambda cs, la, lh: la == 1, {R},
         lambda cs, la, lh: ((inc(cs, 2, 3), 0, 1), lh, {"0": 0, "1": 1}.get(cs, 2)), *T),
        ("H", lambda cs, la, lh: la == 1, {X}, lambda cs, la, lh: (("0", 0, 0), lh, 0), *T),
        ("A", lambda cs, la, lh: True, {S}, lambda cs, la, lh: (("0", 0, 0), 0, 0), *T),
    ]


def hotstuff_reward(cap, lh_cap, leader, action, cs, la, lh):
    """(b_h, c) from the written reward rules for the HotStuff family."""
    b_h = 0
    if action is A:
        b_h = lh
    elif leader == "H" and action in (W, S) and lh == lh_cap:
        b_h = 1  # the block falling out of the lock window is locked in
    full = _val(cs) == cap
    if leader == "H":
        clause = (action in (A, W, S) and la == 0) or (action is R and lh == 0)
    else:
        clause = action in (W, R) and la == 1 and lh == 0
    return b_h, int(full and clause)


def lookup(rows, leader, action, cs, la, lh):
    hits = [r for r in rows if r[0] == leader and action in r[2] and r[1](cs, la, lh)]
    return hits
