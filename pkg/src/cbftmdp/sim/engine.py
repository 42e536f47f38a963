"""View-level stochastic simulation of an adversarial policy."""

from __future__ import annotations

import math
import os
from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .. import kernels
from ..core import Protocol
from ..mdp import DEFAULT_K, MdpInstance, build_mdp, check_alpha
from ..solver import Metric, Policy, solve_min_metric
from ..strategies import StrategyKind, load_policy, silent_baseline_policy
from .trace import Trace

DEFAULT_WARMUP = 100
_MASK64 = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    z = x & _MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return z ^ (z >> 31)


def replication_seed(master: int, i: int) -> int:
    """Seed of replication ``i``: the (i+1)-th output of a splitmix64 stream
    started at ``master``."""
    return splitmix64((master + (i + 1) * _GOLDEN) & _MASK64)


@dataclass(frozen=True)
class DelayModel:
    """Actual delay per delta-leg; the timeout bound stays ``k * delta_nominal``."""

    kind: str = "fixed"
    delta_nominal: float = 1.0
    amplitude: float = 0.0

    def __post_init__(self):
        if self.kind not in ("fixed", "uniform"):
            raise ValueError(f"unknown delay model {self.kind!r}")
        if not self.delta_nominal > 0:
            raise ValueError("delta must be positive")
        if self.kind == "fixed" and self.amplitude != 0:
            raise ValueError("fixed delay has no amplitude")
        if not 0 <= self.amplitude < self.delta_nominal:
            raise ValueError("amplitude must satisfy 0 <= amplitude < delta")

    @classmethod
    def parse(cls, text: str) -> "DelayModel":
        parts = text.strip().lower().split(":")
        try:
            if parts[0] == "fixed" and len(parts) == 2:
                return cls("fixed", float(parts[1]))
            if parts[0] == "uniform" and len(parts) == 3:
                return cls("uniform", float(parts[1]), float(parts[2]))
        except ValueError:
            pass
        raise ValueError(f"bad delay model {text!r}; use fixed:D or uniform:D:A")

    def bound(self, k: float) -> float:
        return k * self.delta_nominal

    def render(self) -> str:
        if self.kind == "fixed":
            return f"fixed:{self.delta_nominal:g}"
        return f"uniform:{self.delta_nominal:g}:{self.amplitude:g}"


PolicySource = Union[Policy, str]


@dataclass(frozen=True)
class SimConfig:
    protocol: Protocol
    alpha: Optional[float] = None
    policy: PolicySource = "optimal:growth"
    delay: DelayModel = field(default_factory=DelayModel)
    n_views: int = 100_000
    warmup_views: int = DEFAULT_WARMUP
    seed: int = 0
    replications: int = 6
    k: float = DEFAULT_K
    n: Optional[int] = None
    f: Optional[int] = None
    lh_cap: Optional[int] = None

    def __post_init__(self):
        object.__setattr__(self, "protocol", Protocol.parse(self.protocol))
        if self.n is not None or self.f is not None:
            if self.n is None or self.f is None:
                raise ValueError("give both n and f")
            if self.n < 3 * self.f + 1:
                raise ValueError(f"need n >= 3f + 1, got n={self.n}, f={self.f}")
            derived = self.f / self.n
            if self.alpha is not None and not math.isclose(self.alpha, derived):
                raise ValueError("alpha disagrees with f/n")
            object.__setattr__(self, "alpha", derived)
        if self.alpha is None:
            raise ValueError("alpha (or n and f) is required")
        object.__setattr__(self, "alpha", check_alpha(self.alpha))
        if not self.n_views > self.warmup_views >= 0:
            raise ValueError("need n_views > warmup_views >= 0")
        if not 0 <= self.seed <= _MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")

    def build(self) -> MdpInstance:
        return build_mdp(self.protocol, self.alpha, self.k, self.lh_cap)


def resolve_policy(source: PolicySource, mdp: MdpInstance) -> Policy:
    if isinstance(source, Policy):
        source.check(mdp)
        return source
    text = str(source)
    low = text.lower()
    if low.startswith("optimal") or low in ("silent", "baseline", "baseline-silent"):
        kind = StrategyKind.parse(low)
        if kind.kind == "silent":
            return silent_baseline_policy(mdp)
        return solve_min_metric(mdp, kind.metric).policy
    if os.path.exists(text):
        return load_policy(text, mdp)
    raise ValueError(f"policy source {text!r} is neither a strategy name nor a file")


@dataclass(frozen=True)
class SimSample:
    total_b_h: int
    total_c: int
    total_time: float
    views: int
    seed: int

    @property
    def growth(self) -> float:
        return self.total_b_h / self.total_time

    @property
    def rate(self) -> float:
        return self.total_c / self.total_time

    def of(self, metric: "Metric | str") -> float:
        return self.growth if Metric.parse(metric) is Metric.GROWTH else self.rate


def simulate_views(
    config: SimConfig,
    policy: Optional[Policy] = None,
    mdp: Optional[MdpInstance] = None,
    backend=None,
) -> tuple[SimSample, Trace]:
    """Run ``config.n_views`` views from the initial state with ``config.seed``.

    Rewards are accumulated after the warm-up views; the returned trace covers
    every view.  A pre-resolved ``policy``/``mdp`` may be passed to skip solving.
    """
    mdp = config.build() if mdp is None else mdp
    policy = resolve_policy(config.policy if policy is None else policy, mdp)
    backend = kernels.backend if backend is None else backend
    cm = mdp.compiled
    rows = policy.rows(mdp)
    rng = np.random.Generator(np.random.PCG64(config.seed))
    leader_u = rng.random(config.n_views)
    delay_u = rng.random((config.n_views, 3))
    out_state = np.empty(config.n_views, np.int64)
    out_outcome = np.empty(config.n_views, np.int8)
    out_t = np.empty(config.n_views)
    d = config.delay
    sum_bh, sum_c, sum_t, _ = backend.simulate(
        rows, cm.nxt, cm.b_h, cm.c, cm.n_actual, cm.n_bound,
        float(mdp.alpha), leader_u, delay_u,
        float(d.delta_nominal), float(d.amplitude), float(d.bound(mdp.k)),
        int(mdp.initial), int(config.warmup_views),
        out_state, out_outcome, out_t,
    )
    sample = SimSample(int(sum_bh), int(sum_c), float(sum_t), config.n_views - config.warmup_views, config.seed)
    trace = Trace(mdp, policy, out_state, out_outcome, out_t, delay_u, d, config.warmup_views)
    return sample, trace


@dataclass(frozen=True)
class Stat:
    mean: float
    sd: float
    se: float
    ci_low: float
    ci_high: float

    @classmethod
    def of(cls, values) -> "Stat":
        x = np.asarray(values, dtype=float)
        mean = float(x.mean())
        sd = float(x.std(ddof=1)) if len(x) > 1 else 0.0
        se = sd / math.sqrt(len(x))
        half = 1.959963984540054 * se
        return cls(mean, sd, se, mean - half, mean + half)


@dataclass(frozen=True)
class Replication:
    config: SimConfig
    samples: tuple
    growth: Stat
    rate: Stat

    def stat(self, metric: "Metric | str") -> Stat:
        return self.growth if Metric.parse(metric) is Metric.GROWTH else self.rate


def replicate(
    config: SimConfig,
    policy: Optional[Policy] = None,
    mdp: Optional[MdpInstance] = None,
    backend=None,
    keep_traces: bool = False,
):
    """Independent replications with seeds derived from ``config.seed``.

    Returns a ``Replication``; with ``keep_traces`` a ``(Replication, traces)`` pair.
    """
    if config.replications < 2:
        raise ValueError("need at least 2 replications")
    mdp = config.build() if mdp is None else mdp
    policy = resolve_policy(config.policy if policy is None else policy, mdp)
    samples, traces = [], []
    for i in range(config.replications):
        cfg = replace(config, seed=replication_seed(config.seed, i))
        sample, trace = simulate_views(cfg, policy, mdp, backend)
        samples.append(sample)
        if keep_traces:
            traces.append(trace)
    rep = Replication(
        config,
        tuple(samples),
        Stat.of([s.growth for s in samples]),
        Stat.of([s.rate for s in samples]),
    )
    return (rep, traces) if keep_traces else rep
