import json
import subprocess
import sys

import pytest

from amtha.cli import main
from amtha.topology import topology_to_dict

from .conftest import flat_topology


def _write(path, doc):
    path.write_text(json.dumps(doc))
    return str(path)


@pytest.fixture
def one_task(tmp_path):
    graph = {"tasks": [{"id": "T1", "subtasks": [
        {"id": "T1.s0", "exec_time": {"A": 5.0}},
        {"id": "T1.s1", "exec_time": {"A": 10.0}},
        {"id": "T1.s2", "exec_time": {"A": 5.0}},
    ]}], "edges": []}
    return _write(tmp_path / "g.json", graph), _write(tmp_path / "topo.json", topology_to_dict(flat_topology(1)))


def test_map_fixture(one_task, tmp_path, capsys):
    g, topo = one_task
    out = tmp_path / "sched.json"
    assert main(["map", "--graph", g, "--topo", topo, "--out", str(out)]) == 0
    assert json.loads(out.read_text())["t_est_s"] == 20.0
    assert "t_est_s=20.0" in capsys.readouterr().out


def test_pipeline_round_trip(tmp_path):
    g, s, r = tmp_path / "g.json", tmp_path / "s.json", tmp_path / "r.json"
    assert main(["generate", "--spec", "paper_8core", "--seed", "3", "--out", str(g)]) == 0
    assert main(["map", "--graph", str(g), "--topo", "fig1_8core", "--out", str(s)]) == 0
    assert main(["simulate", "--schedule", str(s), "--graph", str(g), "--topo", "fig1_8core",
                 "--out", str(r)]) == 0
    result = json.loads(r.read_text())
    assert result["dif_rel_pct"] == 0.0
    assert result["t_exec_s"] == json.loads(s.read_text())["t_est_s"]
    assert main(["simulate", "--schedule", str(s), "--graph", str(g), "--topo", "fig1_8core",
                 "--contention", "serialize-per-level", "--out", str(r)]) == 0
    assert json.loads(r.read_text())["dif_rel_pct"] >= 0.0


def test_generate_many(tmp_path):
    assert main(["generate", "--seed", "5", "--count", "3", "--out", str(tmp_path / "many")]) == 0
    assert sorted(p.name for p in (tmp_path / "many").iterdir()) == [
        "graph_seed5.json", "graph_seed6.json", "graph_seed7.json"]


def test_evaluate_report(tmp_path, capsys):
    out = tmp_path / "ev"
    args = ["evaluate", "--spec", "paper_8core.spec", "--runs", "30",
            "--contention", "serialize-per-level", "--out-dir", str(out)]
    assert main(args) == 0
    rows = (out / "report.csv").read_text().splitlines()
    assert rows[0].split(",")[:4] == ["instance_id", "tasks", "cores", "contention_mode"]
    assert "t_est_s" in rows[0] and rows[0].endswith("dif_rel_pct")
    assert len(rows) == 31
    summary = json.loads((out / "summary.json").read_text())
    assert summary["summary"]["n"] == 30
    assert "30 instances" in capsys.readouterr().out


def test_reports_byte_identical(tmp_path):
    for d in ("a", "b"):
        assert main(["evaluate", "--runs", "5", "--seed", "11", "--out-dir", str(tmp_path / d)]) == 0
    for name in ("report.csv", "summary.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()


def test_min_grain_ratio_filter(tmp_path):
    out = tmp_path / "ev"
    assert main(["evaluate", "--runs", "4", "--min-grain-ratio", "10", "--out-dir", str(out)]) == 0
    rows = (out / "report.csv").read_text().splitlines()[1:]
    header = (out / "report.csv").read_text().splitlines()[0].split(",")
    col = header.index("grain_ratio")
    assert len(rows) == 4 and all(float(r.split(",")[col]) > 10 for r in rows)


def test_verify(capsys):
    assert main(["verify", "--max-tasks", "4", "--trials", "50", "--seed", "7"]) == 0
    assert "50/50 AMTHA ≥ optimal" in capsys.readouterr().out


def test_output_dir_env(tmp_path, monkeypatch):
    monkeypatch.setenv("AMTHA_OUTPUT_DIR", str(tmp_path))
    assert main(["generate", "--seed", "2"]) == 0
    assert (tmp_path / "graph_seed2.json").exists()


def test_missing_file_exit_one(tmp_path, capsys):
    rc = main(["map", "--graph", str(tmp_path / "nope.json"), "--topo", "fig1_8core"])
    assert rc == 1
    err = capsys.readouterr().err.strip().splitlines()
    assert len(err) == 1 and err[0].startswith("error: ParseError:")


def test_cycle_exit_one(tmp_path, capsys):
    doc = {"tasks": [{"id": "A", "subtasks": [{"id": "a", "exec_time": {"A": 1}}]},
                     {"id": "B", "subtasks": [{"id": "b", "exec_time": {"A": 1}}]}],
           "edges": [{"src": "a", "dst": "b", "volume_bytes": 1}, {"src": "b", "dst": "a", "volume_bytes": 1}]}
    topo = _write(tmp_path / "t.json", topology_to_dict(flat_topology(1)))
    assert main(["map", "--graph", _write(tmp_path / "g.json", doc), "--topo", topo]) == 1
    assert "CycleError" in capsys.readouterr().err


def test_unknown_preset_exit_one(capsys):
    assert main(["generate", "--spec", "no_such_spec"]) == 1
    assert "SpecError" in capsys.readouterr().err


def test_usage_error_exit_two():
    with pytest.raises(SystemExit) as info:
        main(["map"])
    assert info.value.code == 2


def test_module_entry_point(one_task, tmp_path):
    g, topo = one_task
    proc = subprocess.run(
        [sys.executable, "-m", "amtha", "map", "--graph", g, "--topo", topo, "--out", str(tmp_path / "s.json")],
        capture_output=True, text=True, check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert "t_est_s=20.0" in proc.stdout
