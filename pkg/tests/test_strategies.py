import json

import pytest

from cbftmdp import Action, Metric, Protocol, build_mdp, evaluate_policy
from cbftmdp.strategies import (
    POLICY_FORMAT,
    PolicyFileError,
    StrategyKind,
    load_policy,
    no_attack_reference,
    policy_document,
    read_policy_header,
    save_policy,
    silent_baseline_policy,
    strategy_value,
)

from helpers import GRID, PROTOCOLS, mdp_for, solved


def test_strategy_kind_parse():
    assert StrategyKind.parse("optimal:rate") == StrategyKind("optimal", Metric.RATE)
    assert StrategyKind.parse("optimal", default_metric="growth").metric is Metric.GROWTH
    assert StrategyKind.parse("silent").method == "baseline-silent"
    assert StrategyKind.parse("none").method == "no-attack"
    with pytest.raises(ValueError):
        StrategyKind.parse("optimal")
    with pytest.raises(ValueError):
        StrategyKind.parse("greedy")


def test_silent_baseline_is_all_silent():
    mdp = build_mdp("chs", 0.2)
    assert set(silent_baseline_policy(mdp).actions) == {Action.SILENT}


@pytest.mark.parametrize("protocol,value", [("chs", 1 / 3), ("fhs", 0.5), ("2chs", 1 / 7), ("streamlet", 0.1)])
def test_no_attack_reference(protocol, value):
    assert no_attack_reference(protocol) == pytest.approx((value, value), abs=1e-12)


def test_silent_baseline_chs():
    no_attack = no_attack_reference("chs").rate
    assert evaluate_policy(build_mdp("chs", 0.0), silent_baseline_policy(build_mdp("chs", 0.0))).rate == pytest.approx(1 / 3)
    ratio = evaluate_policy(mdp_for("chs", 0.3), silent_baseline_policy(mdp_for("chs", 0.3))).rate / no_attack
    assert ratio == pytest.approx(0.12, abs=0.02)


@pytest.mark.parametrize("protocol", PROTOCOLS)
@pytest.mark.parametrize("metric", list(Metric))
def test_dominance_on_grid(protocol, metric):
    none = no_attack_reference(protocol).of(metric)
    for a in GRID:
        mdp = mdp_for(protocol, a)
        opt = solved(protocol, a, metric).metric_value
        silent = strategy_value(StrategyKind("silent"), mdp, metric)
        assert opt <= silent + 1e-4 and silent <= none + 1e-12


def test_strategy_value_dispatch():
    mdp = mdp_for("fhs", 0.15)
    assert strategy_value(StrategyKind("none"), mdp, "rate") == pytest.approx(0.5)
    assert strategy_value(StrategyKind("optimal", Metric.RATE), mdp, "rate") == solved("fhs", 0.15, "rate").metric_value


def test_round_trip(tmp_path):
    res = solved("chs", 0.3, "growth")
    path = tmp_path / "chs.json"
    save_policy(res, path)
    mdp = build_mdp("chs", 0.3)
    assert load_policy(path, mdp) == res.policy
    head = read_policy_header(path)
    assert head["format"] == POLICY_FORMAT
    assert head["rho_bar"] == res.rho_bar and head["metric"] == "growth" and head["k"] == 5.0
    # saving the loaded policy reproduces the file byte for byte
    again = tmp_path / "again.json"
    save_policy(res, again)
    assert again.read_bytes() == path.read_bytes()


def test_round_trip_streamlet_cap(tmp_path):
    mdp = build_mdp("streamlet", 0.2, lh_cap=8)
    from cbftmdp import solve_min_metric

    res = solve_min_metric(mdp, "rate")
    path = tmp_path / "s.json"
    save_policy(res, path)
    assert load_policy(path, mdp) == res.policy
    with pytest.raises(PolicyFileError, match="lh_cap"):
        load_policy(path, build_mdp("streamlet", 0.2))


def test_header_mismatch(tmp_path):
    path = tmp_path / "chs.json"
    save_policy(solved("chs", 0.3, "growth"), path)
    with pytest.raises(PolicyFileError, match="protocol"):
        load_policy(path, build_mdp("fhs", 0.3))
    with pytest.raises(PolicyFileError, match="alpha"):
        load_policy(path, build_mdp("chs", 0.27))
    with pytest.raises(PolicyFileError, match="k="):
        load_policy(path, build_mdp("chs", 0.3, k=4))


def test_illegal_action_rejected(tmp_path):
    mdp = build_mdp("chs", 0.3)
    doc = policy_document(solved("chs", 0.3, "growth"), mdp)
    doc["policy"]["(1,0,0,H)"] = "Release"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(PolicyFileError, match="illegal"):
        load_policy(path, mdp)


def test_unknown_state_and_format(tmp_path):
    mdp = build_mdp("chs", 0.3)
    doc = policy_document(solved("chs", 0.3, "growth"), mdp)
    doc["policy"]["(2p,0,0,H)"] = "Adopt"
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(PolicyFileError, match="not part"):
        load_policy(path, mdp)
    doc["format"] = "other/9"
    path.write_text(json.dumps(doc))
    with pytest.raises(PolicyFileError, match="format"):
        load_policy(path, mdp)
    path.write_text("{not json")
    with pytest.raises(PolicyFileError):
        load_policy(path, mdp)
