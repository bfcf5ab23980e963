import json
import subprocess
import sys

import pytest

from fuller.cli import run


def analyze(capsys, *args):
    assert run(["analyze", *args]) == 0
    return json.loads(capsys.readouterr().out)


def test_analyze_fuller_multi_identity(capsys):
    rep = analyze(capsys, "fuller-multi", "--m1", "I", "--m2", "I")
    assert rep["ladder"]["q"] == 2 and rep["ladder"]["k"] == 4
    assert rep["certificate"] == {"verdict": "fuller", "failing": None}
    assert rep["glc"]["verdict"] == "strict"
    assert rep["delta"]["annihilator_exact"] == ["-1", "0", "0"]
    assert rep["B"] == [["1 * x3"]]
    assert len(rep["delta"]["perturbation_ranks"]) == 8
    assert rep["config"]["seed"] == 0 and rep["config"]["params"] == {"m1": "I", "m2": "I"}


def test_analyze_matrix_files(capsys, tmp_path):
    (tmp_path / "m1.json").write_text('[["2", "1"], ["1", "2"]]')
    (tmp_path / "m2.json").write_text('[["1", "0"], ["0", "3"]]')
    rep = analyze(capsys, "fuller-multi", "--m1", str(tmp_path / "m1.json"), "--m2", str(tmp_path / "m2.json"))
    assert rep["problem"]["m"] == 2 and rep["certificate"]["verdict"] == "fuller"


def test_analyze_hamiltonian(capsys):
    rep = analyze(capsys, "hamiltonian", "--t", "I2", "--m", "I", "--q", "x0^4", "--c", "x0^2 + x1^2")
    assert rep["certificate"]["verdict"] == "fuller" and rep["delta"]["rank"] == 4


def test_analyze_time_optimal(capsys):
    rep = analyze(capsys, "time-optimal-di")
    assert rep["certificate"]["verdict"] == "no-singular-arc"
    assert rep["glc"]["verdict"] == "inapplicable"


def test_analyze_is_byte_deterministic(tmp_path, capsys):
    outs = []
    for _ in range(2):
        assert run(["analyze", "fuller-classic", "--seed", "42", "--out", str(tmp_path)]) == 0
        outs.append((tmp_path / "analysis.json").read_bytes())
        (tmp_path / "analysis.json").unlink()
    capsys.readouterr()
    assert outs[0] == outs[1]
    assert json.loads(outs[0])["config"]["seed"] == 42


def test_malformed_problem_is_structured_error(tmp_path, capsys):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps({"n": 2, "m": 1, "f": ["x1"], "g": [["0", "1"]]}))
    assert run(["analyze", str(path)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["error"] == "ProblemError" and err["message"].startswith("f:")


def test_contract_violation_exit_code(capsys):
    assert run(["analyze", "fuller-multi", "--m1", "I2", "--m2", "I3"]) == 2
    assert "ContractError" in capsys.readouterr().err


def test_unknown_problem(capsys):
    assert run(["analyze", "no-such-problem"]) == 2


def test_simulate_feedback_writes_outputs(tmp_path, capsys):
    out = tmp_path / "run"
    assert run(["simulate", "fuller-classic", "--beta", "0.444624", "--horizon", "20", "--out", str(out)]) == 0
    line = capsys.readouterr().out.strip()
    assert "accumulation=true" in line and "terminated_by=zeno-floor" in line
    report = json.loads((out / "report.json").read_text())
    assert report["events"] >= 10 and report["config"]["beta"] == 0.444624
    header = (out / "trajectory.csv").read_text().splitlines()[0]
    assert header == "t,z0,z1,z2,u0"
    assert (out / "events.csv").read_text().startswith("t,input,direction,slope")
    chatter = json.loads((out / "chatter.json").read_text())
    assert chatter["accumulation"] is True


def test_simulate_extremal_short_horizon(tmp_path, capsys):
    out = tmp_path / "x"
    assert run(["simulate", "fuller-classic", "--mode", "extremal", "--p0=-1,-0.5",
                "--horizon", "0.1", "--out", str(out)]) == 0
    assert capsys.readouterr().out.startswith("events=0 ")
    report = json.loads((out / "report.json").read_text())
    assert report["max_abs_H"] <= 1e-7


def test_simulate_time_optimal_no_accumulation(tmp_path, capsys):
    assert run(["simulate", "time-optimal-di", "--out", str(tmp_path)]) == 0
    line = capsys.readouterr().out
    assert "accumulation=false" in line and "terminated_by=target-ball" in line


def test_chatter_from_events_file(tmp_path, capsys):
    path = tmp_path / "events.csv"
    rows = ["t,input,direction,slope"] + [f"{2 - 2 * 0.5**j!r},0,1,1.0" for j in range(10)]
    path.write_text("\n".join(rows) + "\n")
    assert run(["chatter", "--events", str(path)]) == 0
    rep = json.loads(capsys.readouterr().out)
    assert rep["accumulation"] and rep["inputs"][0]["rho"] == pytest.approx(0.5)


def test_bad_tolerance_rejected(capsys):
    assert run(["simulate", "fuller-classic", "--tol-event", "0"]) == 2


def test_entry_point_module():
    res = subprocess.run([sys.executable, "-m", "fuller.cli", "analyze", "time-optimal-di"],
                         capture_output=True, text=True, check=True)
    assert json.loads(res.stdout)["certificate"]["verdict"] == "no-singular-arc"
