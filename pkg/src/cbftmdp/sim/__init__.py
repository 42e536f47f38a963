"""Discrete-event simulation of adversarial strategies with replay checking."""

from .engine import (
    DEFAULT_WARMUP,
    DelayModel,
    Replication,
    SimConfig,
    SimSample,
    Stat,
    replicate,
    replication_seed,
    resolve_policy,
    simulate_views,
    splitmix64,
)
from .replay import Discrepancy, ReplayReport, replay_verify
from .trace import Trace, ViewRecord, dump_trace, load_trace, trace_protocol

__all__ = [
    "DEFAULT_WARMUP", "DelayModel", "Replication", "SimConfig", "SimSample", "Stat",
    "replicate", "replication_seed", "resolve_policy", "simulate_views", "splitmix64",
    "Discrepancy", "ReplayReport", "replay_verify",
    "Trace", "ViewRecord", "dump_trace", "load_trace", "trace_protocol",
]
