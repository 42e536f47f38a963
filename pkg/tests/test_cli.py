import csv
import io
import json

import pytest

from cbftmdp.cli import CSV_HEADER, EXIT_REPLAY, dominance_warnings, main, parse_grid, read_csv, Row


def run(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


def rows_of(text):
    return list(csv.DictReader(io.StringIO(text)))


def test_grid_parsing():
    assert parse_grid("0:0.03:0.33") == [round(0.03 * i, 10) for i in range(12)]
    assert parse_grid("0.1,0.2") == [0.1, 0.2]
    assert parse_grid("0.3:0.1:0.3") == [0.3]


def test_solve_writes_policy(capsys, tmp_path):
    out = tmp_path / "p.json"
    code, stdout, _ = run(capsys, "solve", "--protocol", "chs", "--alpha", "0.30", "--metric", "growth", "--out", str(out))
    assert code == 0
    fields = dict(kv.split("=", 1) for kv in stdout.split())
    assert float(fields["metric_value"]) == pytest.approx(0.046, abs=0.005)
    assert int(fields["iterations"]) <= 15
    assert json.loads(out.read_text())["protocol"] == "chs"


def test_solve_fhs_rate(capsys, tmp_path):
    code, stdout, _ = run(capsys, "solve", "--protocol", "fhs", "--alpha", "0", "--metric", "rate",
                          "--out", str(tmp_path / "f.json"))
    assert code == 0 and "metric_value=0.500" in stdout


@pytest.mark.parametrize("argv", [
    ["solve", "--protocol", "chs", "--alpha", "0.4", "--metric", "growth"],
    ["solve", "--protocol", "pbft", "--alpha", "0.1", "--metric", "growth"],
    ["solve", "--protocol", "chs", "--alpha", "0.1"],
    ["sweep", "--alpha-grid", "0:x:1"],
    ["simulate", "--protocol", "chs", "--n", "9", "--f", "3"],
    ["simulate", "--protocol", "chs", "--alpha", "0.1", "--delay", "uniform:1:2"],
    ["compare", "--protocol", "chs", "--strategies", "optimal,bogus"],
    ["frobnicate"],
])
def test_usage_errors_exit_1(capsys, argv):
    code = None
    try:
        code = main(argv)
    except SystemExit as exc:
        code = exc.code
    assert code == 1
    assert "error" in capsys.readouterr().err


def test_sweep_schema_and_order(capsys, tmp_path):
    out = tmp_path / "s.csv"
    code, _, _ = run(capsys, "sweep", "--protocols", "2chs,chs", "--alpha-grid", "0:0.15:0.3",
                     "--metric", "both", "--out", str(out))
    assert code == 0
    text = out.read_text()
    assert text.splitlines()[0] == ",".join(CSV_HEADER)
    rows = read_csv(str(out))
    assert [(r["protocol"], r["alpha"], r["metric"]) for r in rows] == [
        (p, a, m) for p in ("2chs", "chs") for a in ("0.0", "0.15", "0.3") for m in ("growth", "rate")]
    for r in rows:
        assert r["method"] == "theory" and r["value"] == r["ci_low"] == r["ci_high"] and r["k"] == "5.0"
    # full precision: values round-trip exactly
    assert float(rows[0]["value"]) == pytest.approx(1 / 7, abs=1e-4)
    assert len(rows[0]["value"].replace("0.", "", 1)) >= 12


def test_sweep_parallel_matches_serial(capsys):
    _, serial, _ = run(capsys, "sweep", "--protocols", "fhs,streamlet", "--alpha-grid", "0.09,0.21", "--metric", "rate")
    _, par, _ = run(capsys, "sweep", "--protocols", "fhs,streamlet", "--alpha-grid", "0.09,0.21",
                    "--metric", "rate", "--jobs", "3")
    assert serial == par


def test_compare_series(capsys):
    code, stdout, err = run(capsys, "compare", "--protocol", "chs", "--alpha-grid", "0:0.11:0.33")
    assert code == 0 and "violated" not in err
    rows = rows_of(stdout)
    by = {}
    for r in rows:
        by.setdefault(r["method"], []).append(float(r["value"]))
    assert set(by) == {"theory", "baseline-silent", "no-attack"}
    assert len(set(by["no-attack"])) == 1
    assert all(o <= s + 1e-4 <= n + 1e-4 for o, s, n in zip(by["theory"], by["baseline-silent"], by["no-attack"]))
    assert by["theory"][-1] == pytest.approx(0.027, abs=0.005)


def test_dominance_warning_logic():
    rows = [Row("chs", 0.1, "rate", "theory", 0.3, 0.3, 0.3, None, 5.0),
            Row("chs", 0.1, "rate", "baseline-silent", 0.2, 0.2, 0.2, None, 5.0),
            Row("chs", 0.1, "rate", "no-attack", 0.33, 0.33, 0.33, None, 5.0)]
    msgs = dominance_warnings(rows)
    assert len(msgs) == 1 and "theory" in msgs[0]


def test_simulate_rows_and_trace(capsys, tmp_path):
    trace = tmp_path / "t.tsv"
    code, stdout, err = run(capsys, "simulate", "--protocol", "chs", "--alpha", "0.15", "--policy", "optimal:growth",
                            "--views", "20000", "--delay", "fixed:1", "--reps", "3", "--seed", "42",
                            "--trace", str(trace), "--with-theory")
    assert code == 0
    rows = rows_of(stdout)
    sim = [r for r in rows if r["method"] == "simulation"]
    assert [r["metric"] for r in sim] == ["growth", "rate"] and all(r["seed"] == "42" for r in sim)
    for r in sim:
        assert float(r["ci_low"]) <= float(r["value"]) <= float(r["ci_high"])
    assert "se=" in err
    code, stdout, _ = run(capsys, "replay", str(trace))
    assert code == 0 and "no discrepancies" in stdout


def test_simulate_node_counts_and_policy_file(capsys, tmp_path):
    pol = tmp_path / "p.json"
    run(capsys, "solve", "--protocol", "fhs", "--alpha", "0.25", "--metric", "rate", "--out", str(pol))
    code, stdout, _ = run(capsys, "simulate", "--protocol", "fhs", "--n", "4", "--f", "1", "--policy", str(pol),
                          "--views", "5000", "--reps", "2")
    assert code == 0 and rows_of(stdout)[0]["alpha"] == "0.25"


def test_replay_command_flags_tampering(capsys, tmp_path):
    trace = tmp_path / "t.tsv"
    run(capsys, "simulate", "--protocol", "2chs", "--alpha", "0.3", "--views", "3000", "--reps", "2",
        "--trace", str(trace))
    lines = trace.read_text().splitlines()
    f = lines[500].split("\t")
    f[5] = str(int(f[5]) + 1)
    lines[500] = "\t".join(f)
    trace.write_text("\n".join(lines) + "\n")
    code, stdout, _ = run(capsys, "replay", str(trace))
    assert code == EXIT_REPLAY and "view 498: b_h" in stdout


def test_log_level_env(capsys, monkeypatch):
    import logging

    monkeypatch.setenv("CBFTMDP_LOG_LEVEL", "DEBUG")
    logging.getLogger().handlers.clear()
    run(capsys, "sweep", "--protocols", "chs", "--alpha-grid", "0.1", "--metric", "growth")
    assert logging.getLogger().level == logging.DEBUG
    logging.getLogger().setLevel(logging.WARNING)


def test_console_script_module(tmp_path):
    import subprocess
    import sys

    out = subprocess.run([sys.executable, "-m", "cbftmdp", "solve", "--protocol", "2chs", "--alpha", "0.33",
                          "--metric", "rate", "--out", str(tmp_path / "x.json")], capture_output=True, text=True)
    assert out.returncode == 0 and "metric_value=0.0" in out.stdout
