import csv
import io
import json
import subprocess
import sys

import jsonschema
import pytest

from conftest import CANONICAL, MC_PARAMS
from dividend_control.cli import CSV_COLUMNS, load_schema, main

PARAMS = {"low": dict(zip(("mu", "sigma", "delta", "gamma", "alpha", "beta"), CANONICAL["low"]), M=2.0)}


def param_flags(params):
    return [f for k, v in params.items() for f in (f"--{k}", repr(float(v)))]


def run(argv, capsys):
    code = main(argv)
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.fixture(scope="module")
def schema():
    return load_schema()


@pytest.fixture
def low_config(tmp_path):
    path = tmp_path / "low.json"
    path.write_text(json.dumps({"params": PARAMS["low"]}))
    return str(path)


FAST = {
    "solve": [],
    "verify": ["--n", "200"],
    "simulate": ["--n-paths", "500", "--dt", "1e-2", "--x0", "1.0"],
    "oracle": ["--n", "400"],
    "sweep": ["--steps", "5"],
}


@pytest.mark.parametrize("command", sorted(FAST))
def test_reports_validate_against_schema(command, low_config, schema, capsys):
    code, out, _ = run([command, "--config", low_config, *FAST[command]], capsys)
    assert code == 0
    report = json.loads(out)
    jsonschema.validate(report, schema)
    assert report["command"] == command and report["config"]["params"] == PARAMS["low"]


@pytest.mark.parametrize("command", sorted(FAST))
def test_csv_columns(command, low_config, capsys):
    code, out, _ = run([command, "--config", low_config, "--format", "csv", *FAST[command]], capsys)
    assert code == 0
    rows = list(csv.reader(io.StringIO(out)))
    assert tuple(rows[0]) == tuple(CSV_COLUMNS[command])
    assert len(rows) > 1 and all(len(r) == len(rows[0]) for r in rows)


@pytest.mark.parametrize("command", sorted(FAST))
def test_reruns_are_byte_identical(command, low_config, tmp_path):
    outs = []
    for i in range(2):
        path = tmp_path / f"{command}{i}.json"
        assert main([command, "--config", low_config, "--out", str(path), "--seed", "3", *FAST[command]]) == 0
        outs.append(path.read_bytes())
    assert outs[0] == outs[1]


@pytest.mark.parametrize("name", sorted(CANONICAL))
def test_solve_then_verify(name, tmp_path, capsys):
    params = dict(zip(("mu", "sigma", "delta", "gamma", "alpha", "beta"), CANONICAL[name]), M=2.0)
    solved = tmp_path / "solve.json"
    assert main(["solve", *param_flags(params), "--out", str(solved)]) == 0
    code, out, _ = run(["verify", "--config", str(solved)], capsys)
    assert code == 0 and json.loads(out)["passed"]


def test_perturbed_verify_names_breakpoints(low_config, capsys):
    code, out, err = run(["verify", "--config", low_config, "--perturb", "1e-3", "--perturb-segment", "1"], capsys)
    assert code == 1
    assert "verification failed at breakpoint(s) x=" in err
    assert len(json.loads(out)["failing_breakpoints"]) == 2


def test_usage_errors(tmp_path, low_config, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    assert run(["solve", "--config", str(bad)], capsys)[0] == 2
    assert run(["solve", "--mu", "1"], capsys)[0] == 2                      # missing parameters
    assert run(["solve", "--config", low_config, "--sigma", "-1"], capsys)[0] == 2
    assert run(["simulate", "--config", low_config, "--dt", "0"], capsys)[0] == 2
    assert run(["simulate", "--config", low_config, "--policy", "nonsense"], capsys)[0] == 2
    assert run(["frobnicate"], capsys)[0] == 2


def test_flags_override_config(low_config, capsys):
    code, out, _ = run(["solve", "--config", low_config, "--M", "0.1"], capsys)
    assert code == 0 and json.loads(out)["config"]["params"]["M"] == 0.1


def test_infinite_thresholds_are_strings(low_config, capsys):
    code, out, _ = run(["solve", "--config", low_config, "--M", "0.1"], capsys)
    report = json.loads(out)
    assert report["x_beta"] == "inf" and report["x_alpha"] == "inf"


def test_simulate_reports_z_scores(capsys):
    flags = param_flags(MC_PARAMS.as_dict())
    code, out, _ = run(["simulate", *flags, "--n-paths", "2000", "--antithetic", "--x0", "1.0", "--seed", "1"], capsys)
    res = json.loads(out)["results"][0]
    assert code == 0 and abs(res["z"]) < 10


def test_console_entry_point(low_config):
    proc = subprocess.run([sys.executable, "-m", "dividend_control", "sweep", "--config", low_config, "--steps", "3",
                           "--format", "csv"], capture_output=True, text=True, check=True)
    assert proc.stdout.startswith(",".join(CSV_COLUMNS["sweep"]))
