# tests/test_cli.py
import json

from auction_lab.cli import main
from tests.conftest import FIXTURES, write_scenario

TWO_BIDDERS = {
    "m": 1,
    "valuations": [{"kind": "additive", "weights": ["1"]}, {"kind": "additive", "weights": ["1/2"]}],
}


def last_json(output: str) -> dict:
    return json.loads(output.strip().splitlines()[-1])


def read_jsonl(path):
    return [json.loads(line) for line in path.read_text().splitlines()]


# run: Szenario aus dem Fixture-Verzeichnis, Trace + CSV landen im tmp-Ordner
def test_run_writes_trace_and_summary(runner, tmp_path):
    trace_path = tmp_path / "out" / "tightness.jsonl"
    result = runner.invoke(args=["auction", "run", "--scenario", "tightness_xos.json", "--trace", str(trace_path)])
    assert result.exit_code == 0, result.output
    payload = last_json(result.output)
    assert payload["steps"] == 3
    assert payload["final_sw"] == "1003/1000"
    assert payload["defaults"]["tie_break"] == [[3, 2, 1]] * 3
    assert payload["summary"] == str(trace_path.with_suffix(".csv"))
    assert read_jsonl(trace_path) == read_jsonl(FIXTURES / "tightness_xos.jsonl")
    assert trace_path.with_suffix(".csv").read_text().startswith("t,bidder,sw,dw,alpha,lazy")


def test_run_rejects_bad_scenario(runner, tmp_path):
    path = write_scenario(tmp_path / "bad.json", {"instance": TWO_BIDDERS, "strategies": {"kind": "xos_update"},
                                                  "stepz": 3})
    result = runner.invoke(args=["auction", "run", "--scenario", str(path)])
    assert result.exit_code == 2
    assert last_json(result.output)["field"] == "stepz"


def test_verify_golden_trace(runner):
    result = runner.invoke(args=["auction", "verify", "--trace", "tightness_xos.jsonl"])
    assert result.exit_code == 0, result.output
    assert "pointwise: PASS" in result.output

    result = runner.invoke(args=["auction", "verify", "--trace", "tightness_xos.jsonl", "--theorem", "lemmas", "--json"])
    assert result.exit_code == 0
    payload = last_json(result.output)
    assert payload["passed"] is True
    assert payload["values"]["validated_steps"] == 3


# Manipulierte Trace: Exit-Code 1 und der Schritt im Fehler-JSON
def test_verify_corrupted_trace(runner, tmp_path):
    lines = (FIXTURES / "tightness_xos.jsonl").read_text().splitlines()
    step = json.loads(lines[2])
    step["dw"] = "7"
    lines[2] = json.dumps(step)
    path = tmp_path / "corrupted.jsonl"
    path.write_text("\n".join(lines) + "\n")
    result = runner.invoke(args=["auction", "verify", "--trace", str(path)])
    assert result.exit_code == 1
    payload = last_json(result.output)
    assert payload["step"] == 1
    assert payload["field"] == "dw"


def test_verify_non_qualifying_trace(runner, tmp_path):
    scenario = write_scenario(tmp_path / "short.json", {"instance": TWO_BIDDERS,
                                                        "strategies": {"kind": "xos_update"}, "steps": 1})
    trace_path = tmp_path / "short.jsonl"
    assert runner.invoke(args=["auction", "run", "--scenario", str(scenario),
                               "--trace", str(trace_path)]).exit_code == 0
    result = runner.invoke(args=["auction", "verify", "--trace", str(trace_path)])
    assert result.exit_code == 1
    assert "steps" in last_json(result.output)["error"]
    # Safety braucht keine Mindestlänge
    assert runner.invoke(args=["auction", "verify", "--trace", str(trace_path), "--theorem", "safety"]).exit_code == 0


def test_reproduce_named_experiment(runner, tmp_path):
    report_path = tmp_path / "tightness.json"
    result = runner.invoke(args=["auction", "reproduce", "--name", "tightness-xos", "--json",
                                 "--report", str(report_path), "--trace", str(tmp_path / "t.jsonl")])
    assert result.exit_code == 0, result.output
    payload = last_json(result.output)
    assert payload["name"] == "tightness-xos"
    assert payload["values"]["ratio"] == "1003/3002"
    assert json.loads(report_path.read_text())["passed"] is True
    assert len(read_jsonl(tmp_path / "t.jsonl")) == 5


def test_reproduce_input_errors(runner):
    result = runner.invoke(args=["auction", "reproduce", "--name", "table-9"])
    assert result.exit_code == 2
    assert last_json(result.output)["name"] == "table-9"
    assert runner.invoke(args=["auction", "reproduce"]).exit_code == 2
    assert runner.invoke(args=["auction", "reproduce", "--name", "tightness-xos", "--param", "eps"]).exit_code == 2
    assert runner.invoke(args=["auction", "reproduce", "--name", "tightness-xos",
                               "--param", "eps=1/10"]).exit_code == 0


def test_list(runner):
    result = runner.invoke(args=["auction", "list"])
    assert result.exit_code == 0
    assert "tightness-xos" in result.output
    assert "hard-instance-k8" in result.output


def test_main_exit_codes(capsys):
    assert main(["list"]) == 0
    assert main(["verify", "--trace", "tightness_xos.jsonl"]) == 0
    assert main(["reproduce", "--name", "table-9"]) == 2
    assert main(["verify"]) == 2
    out = capsys.readouterr().out
    assert "tightness-xos" in out


def test_run_hard_instance_fixture(runner):
    result = runner.invoke(args=["auction", "run", "--scenario", "hard_instance_k2.json"])
    assert result.exit_code == 0, result.output
    payload = last_json(result.output)
    assert payload["steps"] == 12
    assert payload["trace"] is None
    assert (payload["defaults"]["n"], payload["defaults"]["m"]) == (2, 3)
