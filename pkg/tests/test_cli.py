import json

import pytest

from poisres.cli import main
from poisres.runner.catalog import example_document


@pytest.fixture
def problem_file(tmp_path):
    def write(name: str, **params) -> str:
        path = tmp_path / f"{name}.json"
        path.write_text(json.dumps(example_document(name, params)), encoding="utf-8")
        return str(path)

    return write


# ----------------------------
# check
# ----------------------------

def test_check_exit_code_follows_the_obstruction(problem_file, capsys):
    assert main(["check", problem_file("linear")]) == 1
    out = capsys.readouterr().out
    assert "status=NoProperResolution" in out
    assert "cites:" in out

    assert main(["check", problem_file("constant")]) == 0
    assert main(["check", problem_file("so3")]) == 0


def test_check_json_report(problem_file, capsys):
    assert main(["check", problem_file("isolated"), "--format", "json"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["command"] == "check"
    assert report["status"] == "Inconclusive"
    assert report["locus"]["kind"] == "IsolatedPoints"


def test_jacobi_failure_is_an_input_error(problem_file, capsys):
    assert main(["check", problem_file("broken")]) == 3
    assert "target.brackets" in capsys.readouterr().err


def test_events_are_exported_beside_the_report(problem_file, tmp_path, capsys):
    events = tmp_path / "events.jsonl"
    assert main(["check", problem_file("constant"), "--events", str(events)]) == 0
    lines = events.read_text(encoding="utf-8").splitlines()
    types = [json.loads(line)["type"] for line in lines]
    assert types[0] == "run_init"
    assert types[-1] == "verdict"
    assert "timestamp_utc" not in capsys.readouterr().out


# ----------------------------
# verify
# ----------------------------

def test_verify_exit_codes(problem_file, capsys):
    assert main(["verify", problem_file("squares"), "--samples", "2000"]) == 0
    assert main(["verify", problem_file("powers"), "--samples", "2000"]) == 1
    out = capsys.readouterr().out
    assert "status=Refuted" in out


def test_verify_needs_pieces(problem_file, capsys):
    assert main(["verify", problem_file("linear")]) == 3
    assert "pieces" in capsys.readouterr().err


def test_unreadable_problem_file(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("[1, 2", encoding="utf-8")
    assert main(["verify", str(bad)]) == 3
    assert main(["check", str(tmp_path / "missing.json")]) == 3
    assert "error:" in capsys.readouterr().err


def test_command_line_flags_override_file_options(problem_file, capsys):
    args = ["verify", problem_file("union3"), "--grid", "11", "--samples", "500", "--format", "json"]
    assert main(args) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["coverage"]["total"] == 121


# ----------------------------
# ode
# ----------------------------

def test_ode_exit_codes(capsys):
    assert main(["ode", "--f", "x", "--u0", "0", "--span", "0", "1"]) == 0
    assert "state=ok" in capsys.readouterr().out
    assert main(["ode", "--f", "x^2", "--u0", "1", "--span", "0", "2"]) == 1
    assert "state=blow-up" in capsys.readouterr().out


def test_ode_json_output(capsys):
    assert main(["ode", "--f", "x*(1 + y^2)", "--v0", "0", "1", "--u0", "0.1", "--span", "0", "1",
                 "--rows", "5", "--format", "json"]) == 0
    body = json.loads(capsys.readouterr().out)
    assert [t["v0"] for t in body["traces"]] == [0.0, 1.0]
    assert len(body["traces"][0]["table"]) == 5


def test_ode_syntax_error(capsys):
    assert main(["ode", "--f", "x +"]) == 3
    assert "offset 3" in capsys.readouterr().err


# ----------------------------
# examples
# ----------------------------

def test_examples_subset_matches(capsys):
    assert main(["examples", "zero", "constant", "broken"]) == 0
    out = capsys.readouterr().out
    assert "NotDenseSymplectic" in out
    assert "NO" not in out.split()


def test_examples_json_summary(capsys):
    assert main(["examples", "linear", "--g", "2 + y^2", "--format", "json"]) == 0
    summary = json.loads(capsys.readouterr().out)
    assert summary["all_matched"]
    assert summary["examples"][0]["actual"] == "NoProperResolution"


def test_dump_prints_a_loadable_problem(capsys):
    assert main(["examples", "--dump", "squares"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["name"] == "squares"
    assert doc["pieces"][0]["map"]["x"] == "q*sin(p*q)"


def test_unknown_example_is_an_input_error(capsys):
    assert main(["examples", "nosuch"]) == 3


# ----------------------------
# rejected numeric flags
# ----------------------------

def test_negative_seed_is_an_input_error(capsys):
    assert main(["examples", "squares", "--seed", "-1"]) == 3
    err = capsys.readouterr().err
    assert "overrides.seed" in err
    assert "Traceback" not in err


def test_zero_ode_step_is_an_input_error(capsys):
    assert main(["ode", "--f", "x", "--step", "0"]) == 3
    assert "ode_step" in capsys.readouterr().err
    assert main(["ode", "--f", "x", "--blowup", "-5"]) == 3
    assert "blowup" in capsys.readouterr().err


def test_unpaired_ode_initial_values_are_an_input_error(capsys):
    assert main(["ode", "--f", "x", "--v0", "0", "1", "--u0", "0", "1", "2"]) == 3
    assert "--u0" in capsys.readouterr().err
