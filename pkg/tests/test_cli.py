import json
import subprocess
import sys


from quantavg.cli import main
from quantavg.graph import Digraph, is_strongly_connected
from quantavg.metrics import k0_bound


def test_bound_json(capsys):
    assert main(["bound", "--y0", "5", "3", "7", "2", "--d-plus-max", "2", "--p0", "0.5"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["y_init"] == 5 and doc["n"] == 4
    assert doc["k0"] == k0_bound(4, 2, 5, 0.5)
    assert doc["walk_bound"] == "1/27"


def test_bound_rejects_p0(capsys):
    assert main(["bound", "--n", "4", "--y-init", "5", "--d-plus-max", "2", "--p0", "1.0"]) == 2
    assert "p0" in capsys.readouterr().err


def test_bound_needs_inputs(capsys):
    assert main(["bound", "--d-plus-max", "2"]) == 2


def test_replay_matches_table(capsys):
    assert main(["replay"]) == 0
    out = capsys.readouterr().out
    assert "k=1 v4: (y, z, y_s, z_s, q_s) = (2, 1, 2, 1, 2)" in out


def test_replay_bad_script(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps([{"k": 0, "node": 0, "piece": 0, "target": 3}]))
    assert main(["replay", "--script", str(p)]) == 1
    assert "not among" in capsys.readouterr().err


def test_replay_wrong_choices_mismatch(tmp_path, capsys):
    p = tmp_path / "s.json"
    p.write_text(json.dumps([{"k": 0, "node": 0, "piece": 0, "target": 2}]))
    assert main(["replay", "--script", str(p)]) == 1
    assert "MISMATCH" in capsys.readouterr().err


def test_gen_graph(tmp_path):
    out = tmp_path / "g.json"
    assert main(["gen-graph", "--n", "12", "--seed", "4", "--out", str(out)]) == 0
    g = Digraph.load(out)
    assert g.n == 12 and is_strongly_connected(g)


def test_run_preset_with_overrides(tmp_path, capsys):
    assert main(["run", "--preset", "sec6-batch", "--trials", "3", "--seed", "9", "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "summary.json").read_text())
    assert summary["trials"] == 3
    assert len((tmp_path / "trials.csv").read_text().splitlines()) == 4


def test_run_exit_code_on_nonconvergence(tmp_path, capsys):
    cfg = {"name": "short", "n": 4, "graph": {"builtin": "four-node"}, "initial_states": {"values": [5, 3, 7, 2]},
           "trials": 2, "max_rounds": 1}
    p = tmp_path / "c.json"
    p.write_text(json.dumps(cfg))
    assert main(["run", str(p)]) == 1
    assert main(["run", str(p), "--allow-nonconverged"]) == 0


def test_run_invalid_config(tmp_path, capsys):
    p = tmp_path / "c.json"
    p.write_text(json.dumps({"name": "x", "n": 4, "graph": {"builtin": "four-node"}, "trials": -1}))
    assert main(["run", str(p)]) == 2
    assert "trials" in capsys.readouterr().err


def test_module_entry_point():
    proc = subprocess.run([sys.executable, "-m", "quantavg", "bound", "--n", "2", "--y-init", "0",
                           "--d-plus-max", "1"], capture_output=True, text=True)
    assert proc.returncode == 0
    assert json.loads(proc.stdout)["n"] == 2
