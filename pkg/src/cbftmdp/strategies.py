"""Reference strategies and the policy file format."""

from __future__ import annotations

import json
import os
from dataclasses import dataclass
from typing import Optional

from .core import Action, Protocol
from .mdp import DEFAULT_K, MdpInstance, build_mdp
from .solver import Metric, Policy, PolicyValue, SolveResult, evaluate_policy, solve_min_metric

POLICY_FORMAT = "cbftmdp-policy/1"


class PolicyFileError(ValueError):
    pass


@dataclass(frozen=True)
class StrategyKind:
    """``optimal`` (with a target metric), ``silent`` or ``none`` (no attack)."""

    kind: str
    metric: Optional[Metric] = None

    @classmethod
    def parse(cls, text: str, default_metric: "Metric | str | None" = None) -> "StrategyKind":
        head, _, tail = text.strip().lower().partition(":")
        if head == "optimal":
            metric = tail or default_metric
            if metric is None:
                raise ValueError("optimal strategy needs a metric, e.g. optimal:rate")
            return cls("optimal", Metric.parse(metric))
        if head in ("silent", "baseline", "baseline-silent"):
            return cls("silent")
        if head in ("none", "no-attack"):
            return cls("none")
        raise ValueError(f"unknown strategy {text!r}")

    @property
    def method(self) -> str:
        return {"optimal": "theory", "silent": "baseline-silent", "none": "no-attack"}[self.kind]


def silent_baseline_policy(mdp: MdpInstance) -> Policy:
    """Adversarial leaders stay silent; as a non-leader, Silent changes nothing."""
    return Policy.uniform(mdp, Action.SILENT)


def adopt_policy(mdp: MdpInstance) -> Policy:
    return Policy.uniform(mdp, Action.ADOPT)


def no_attack_reference(protocol, k: float = DEFAULT_K, lh_cap: Optional[int] = None) -> PolicyValue:
    """Honest-execution (growth, rate): the alpha = 0 model under any policy."""
    mdp = build_mdp(protocol, 0.0, k, lh_cap)
    return evaluate_policy(mdp, silent_baseline_policy(mdp))


def strategy_value(kind: StrategyKind, mdp: MdpInstance, metric: "Metric | str") -> float:
    metric = Metric.parse(metric)
    if kind.kind == "none":
        lh_cap = mdp.spec.lh_cap if mdp.protocol is Protocol.STREAMLET else None
        return no_attack_reference(mdp.protocol, mdp.k, lh_cap).of(metric)
    if kind.kind == "silent":
        return evaluate_policy(mdp, silent_baseline_policy(mdp)).of(metric)
    return solve_min_metric(mdp, kind.metric or metric).metric_value


def policy_document(result: SolveResult, mdp: Optional[MdpInstance] = None) -> dict:
    from . import __version__

    if mdp is None:
        mdp = build_mdp(result.protocol, result.alpha, result.k, result.lh_cap)
    return {
        "format": POLICY_FORMAT,
        "protocol": result.protocol.value,
        "alpha": result.alpha,
        "k": result.k,
        "lh_cap": result.lh_cap,
        "metric": result.metric.value,
        "rho_bar": result.rho_bar,
        "metric_value": result.metric_value,
        "tool_version": __version__,
        "policy": result.policy.render(mdp),
    }


def save_policy(result: SolveResult, path: "str | os.PathLike") -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(policy_document(result), fh, indent=1)
        fh.write("\n")


def read_policy_header(path: "str | os.PathLike") -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            doc = json.load(fh)
    except json.JSONDecodeError as exc:
        raise PolicyFileError(f"{path}: not a policy file ({exc})") from None
    if doc.get("format") != POLICY_FORMAT:
        raise PolicyFileError(f"{path}: unsupported format {doc.get('format')!r}")
    return doc


def load_policy(path: "str | os.PathLike", mdp: MdpInstance) -> Policy:
    doc = read_policy_header(path)
    expected = {
        "protocol": mdp.protocol.value,
        "alpha": mdp.alpha,
        "k": mdp.k,
        "lh_cap": mdp.spec.lh_cap if mdp.protocol is Protocol.STREAMLET else None,
    }
    for key, want in expected.items():
        if doc.get(key) != want:
            raise PolicyFileError(
                f"{path}: header {key}={doc.get(key)!r} does not match instance {key}={want!r}"
            )
    try:
        return Policy.from_rendered(mdp, doc["policy"])
    except (KeyError, ValueError) as exc:
        raise PolicyFileError(f"{path}: {exc}") from None
