import json
import subprocess
import sys

import pytest

from aoisgd import io
from aoisgd.cli import main

SMALL = """name: small
agents: 8
slots: 300
seed: 5
clocks: {kind: every_slot}
problem: {mc_samples: 32}
"""


@pytest.fixture
def small(tmp_path):
    p = tmp_path / "small.yaml"
    p.write_text(SMALL)
    return str(p)


def files(d):
    return sorted(p.relative_to(d).as_posix() for p in d.rglob("*") if p.is_file())


def test_run_writes_expected_tables(small, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", small, "--out", str(out)]) == 0
    assert files(out) == ["aoi.csv", "metrics.csv", "positions.csv", "summary.json", "targets.csv"]
    metrics = io.read_table(out / "metrics.csv")
    assert len(metrics["slot"]) == 300 and metrics["slot"][0] == 1
    summary = json.loads((out / "summary.json").read_text())
    assert summary["schema_version"] == 1 and summary["seed"] == 5


def test_verbosity_adds_traces(small, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", small, "--out", str(out), "-vv"]) == 0
    assert {"optimizer.csv", "channels.csv", "messages.csv"} <= set(files(out))


def test_missing_scenario_exits_2_without_output(tmp_path, capsys):
    out = tmp_path / "never"
    assert main(["run", "--scenario", "no-such-file", "--out", str(out)]) == 2
    assert not out.exists()
    assert "not found" in capsys.readouterr().err


def test_bad_scenario_reports_line(tmp_path, capsys):
    p = tmp_path / "bad.yaml"
    p.write_text("name: bad\nslots: 10\nchannel:\n  wat: 1\n")
    assert main(["run", "--scenario", str(p), "--out", str(tmp_path / "o")]) == 2
    assert f"{p}:4:" in capsys.readouterr().err


def test_seed_override_changes_trace_not_schema(small, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--scenario", small, "--out", str(a)])
    main(["run", "--scenario", small, "--out", str(b), "--seed", "6"])
    ta, tb = io.read_table(a / "metrics.csv"), io.read_table(b / "metrics.csv")
    assert list(ta) == list(tb)
    assert any(x != y for x, y in zip(ta["objective"], tb["objective"]))


def test_repeat_runs_are_byte_identical(small, tmp_path):
    a, b = tmp_path / "a", tmp_path / "b"
    main(["run", "--scenario", small, "--out", str(a), "-v"])
    main(["run", "--scenario", small, "--out", str(b), "-v"])
    assert files(a) == files(b)
    for f in files(a):
        assert (a / f).read_bytes() == (b / f).read_bytes(), f


def test_json_format(small, tmp_path):
    out = tmp_path / "o"
    assert main(["run", "--scenario", small, "--out", str(out), "--format", "json"]) == 0
    data = json.loads((out / "metrics.json").read_text())
    assert data["schema_version"] == 1 and data["columns"][0] == "slot"
    assert len(data["rows"]) == 300


def test_replicate(small, tmp_path):
    out = tmp_path / "o"
    assert main(["replicate", "--scenario", small, "--out", str(out), "-n", "2"]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert len(summary["replication_seeds"]) == 2
    assert (out / "rep_001" / "metrics.csv").exists() and (out / "aggregate.csv").exists()
    agg = io.read_table(out / "aggregate.csv")
    assert "objective_mean" in agg and "objective_se" in agg


def test_reference_unconstrained(small, tmp_path):
    out = tmp_path / "o"
    assert main(["reference-unconstrained", "--scenario", small, "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["config"]["problem"]["penalty"] is False


def test_verify_table(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["verify", "--scenario", "neg-disconnected", "--out", str(out)]) == 0
    text = capsys.readouterr().out
    assert any(line.split() == ["Def1", "fail"] for line in text.splitlines())
    assert (out / "verify.json").exists() and (out / "verify.csv").exists()


def test_analyze_aoi_from_trace(tmp_path, capsys):
    run_dir, out = tmp_path / "r", tmp_path / "a"
    assert main(["run", "--scenario", "lossless-sanity", "--out", str(run_dir)]) == 0
    assert main(["analyze-aoi", "--scenario", "lossless-sanity", "--trace", str(run_dir),
                 "--out", str(out), "--window", "250"]) == 0
    res = json.loads((out / "analysis.json").read_text())
    assert res["sqrt_check_passed"] and res["window"] == 250
    assert "pass" in capsys.readouterr().out


def test_analyze_aoi_rejects_short_trace(small, tmp_path):
    assert main(["analyze-aoi", "--scenario", small, "--out", str(tmp_path / "o")]) == 2


def test_bounds_on_line(tmp_path, capsys):
    out = tmp_path / "o"
    assert main(["bounds", "--scenario", "line-3node", "--out", str(out), "-n", "2",
                 "--m-max", "60"]) == 0
    text = capsys.readouterr().out
    assert "containment: 1/1 two-hop paths pass" in text
    assert {"edge_bounds.csv", "path_containment.csv", "path_bounds.csv",
            "bounds.json"} <= set(files(out))


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "aoisgd.cli", "--version"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and res.stdout.startswith("aoisgd ")
