"""Worst-case chain growth and commitment rate of chained BFT protocols.

Builds per-protocol MDPs, solves the adversary's ratio objective by binary
search over a linearized reward, and checks the resulting strategies with a
view-level simulator.
"""

from .core import Action, ConsecState, Leader, LegProfile, Protocol, RewardVector, State, TransitionEntry, parse_state
from .mdp import MdpInstance, build_mdp, validate_mdp
from .rules import legal_actions, protocol_spec, reward, time_legs, transition
from .solver import (
    Metric,
    Policy,
    SolveResult,
    average_reward_vi,
    deviation_certificate,
    evaluate_policy,
    solve_min_metric,
    stationary_distribution,
)
from .strategies import load_policy, no_attack_reference, save_policy, silent_baseline_policy

__version__ = "0.1.0"

__all__ = [
    "Action", "ConsecState", "Leader", "LegProfile", "Protocol", "RewardVector", "State",
    "TransitionEntry", "parse_state", "MdpInstance", "build_mdp", "validate_mdp",
    "legal_actions", "protocol_spec", "reward", "time_legs", "transition", "Metric", "Policy",
    "SolveResult", "average_reward_vi", "deviation_certificate", "evaluate_policy",
    "solve_min_metric", "stationary_distribution", "load_policy", "no_attack_reference",
    "save_policy", "silent_baseline_policy",
]
