"""Shared fixtures-by-function for the test modules (cached solves)."""

from functools import lru_cache

from cbftmdp import Protocol, build_mdp, solve_min_metric

PROTOCOLS = tuple(Protocol)
GRID = tuple(round(0.03 * i, 10) for i in range(12))


@lru_cache(maxsize=None)
def mdp_for(protocol, alpha, k=5.0, lh_cap=None):
    return build_mdp(protocol, alpha, k, lh_cap)


@lru_cache(maxsize=None)
def solved(protocol, alpha, metric, k=5.0, lh_cap=None):
    return solve_min_metric(mdp_for(protocol, alpha, k, lh_cap), metric)


def toy_mdp(rows, n_states, k=5.0):
    """A hand-made instance over the first ``n_states`` CHS states.

    ``rows`` maps (state, Action) to [(next, prob, b_h, c, (n_delta, n_bound)), ...].
    """
    from types import MappingProxyType

    from cbftmdp.core import LegProfile, RewardVector, TransitionEntry
    from cbftmdp.mdp import INITIAL_STATE, MdpInstance
    from cbftmdp.rules import protocol_spec

    spec = protocol_spec("chs")
    pool = [INITIAL_STATE] + [s for s in spec.states() if s != INITIAL_STATE]
    states = tuple(pool[:n_states])
    table = {
        (s, a): tuple(
            TransitionEntry(states[t], p, RewardVector(b, c, LegProfile(*legs))) for t, p, b, c, legs in outs
        )
        for (s, a), outs in rows.items()
    }
    return MdpInstance(
        protocol=spec.id, alpha=0.0, k=k, spec=spec, states=states,
        table=MappingProxyType(table), index=MappingProxyType({s: i for i, s in enumerate(states)}),
    )
