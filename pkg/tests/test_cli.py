"""Command-line interface: exit codes, file outputs, replay determinism."""

import json
import subprocess

import pytest

from stochgame import cli


def run_cli(argv, tmp_path=None):
    if tmp_path is not None:
        argv = list(argv) + ["--out-dir", str(tmp_path)]
    return cli.main(argv)


# ------------------------------------------------------------------ solve

def test_solve_default_game(capsys):
    assert cli.main(["solve", "--lambda", "0.01"]) == 0
    out = capsys.readouterr().out
    assert "state live: value 0.5" in out
    assert "iterations 1" in out


def test_solve_requires_exactly_one_mode(capsys):
    assert cli.main(["solve"]) == 2
    assert cli.main(["solve", "--lambda", "0.1",
                     "--schedule", "0.1,0.01"]) == 2
    err = capsys.readouterr().err
    assert "exactly one of" in err


def test_solve_schedule_and_csv(tmp_path, capsys):
    csv = tmp_path / "values.csv"
    code = cli.main(["solve", "--schedule", "0.1,0.01,0.001",
                     "--csv", str(csv)])
    assert code == 0
    assert "spread" in capsys.readouterr().out
    lines = csv.read_text().strip().split("\n")
    assert lines[0] == "state,lambda,value"
    assert len(lines) == 4


def test_solve_bad_rate(capsys):
    assert cli.main(["solve", "--lambda", "1.7"]) == 2
    assert "discount rate" in capsys.readouterr().err


def test_solve_iteration_cap_exits_numeric(tmp_path, capsys):
    game = {
        "states": ["left", "right"], "actions1": ["stay"],
        "actions2": ["go"], "initial_state": "left",
        "payoff": [[[1.0]], [[0.0]]],
        "transition": [[[[0.0, 1.0]]], [[[1.0, 0.0]]]],
    }
    path = tmp_path / "cycle.json"
    path.write_text(json.dumps(game))
    code = cli.main(["solve", "--game", str(path), "--lambda", "0.01",
                     "--max-iterations", "3"])
    assert code == 3
    assert "no certificate" in capsys.readouterr().err


# --------------------------------------------------------------- simulate

def test_simulate_writes_stats_and_report(tmp_path, capsys):
    code = run_cli(["simulate", "--horizon", "200", "--replications", "40",
                    "--seed", "5"], tmp_path)
    assert code == 0
    stats = (tmp_path / "stats.csv").read_text()
    assert stats.startswith("n,mean_avg_payoff")
    report = (tmp_path / "memory_report.txt").read_text()
    assert "uniform" in report
    assert "PASS" in capsys.readouterr().out


def test_simulate_deterministic_rerun_and_workers(tmp_path):
    args = ["simulate", "--horizon", "150", "--replications", "60",
            "--seed", "9"]
    d1, d2, d3 = tmp_path / "a", tmp_path / "b", tmp_path / "c"
    assert run_cli(args, d1) == 0
    assert run_cli(args, d2) == 0
    assert run_cli(args + ["--workers", "3"], d3) == 0
    ref = (d1 / "stats.csv").read_bytes()
    assert (d2 / "stats.csv").read_bytes() == ref
    assert (d3 / "stats.csv").read_bytes() == ref


def test_simulate_infeasible_base(tmp_path, capsys):
    code = run_cli(["simulate", "--base", "2.5", "--horizon", "10",
                    "--replications", "2"], tmp_path)
    assert code == 4
    assert "51.75" in capsys.readouterr().err


def test_simulate_stationary_needs_rate(tmp_path, capsys):
    code = run_cli(["simulate", "--sigma", "stationary-lambda",
                    "--horizon", "10", "--replications", "2"], tmp_path)
    assert code == 2
    assert "--lambda" in capsys.readouterr().err


def test_simulate_unknown_adversary(tmp_path, capsys):
    code = run_cli(["simulate", "--adversary", "nemesis",
                    "--horizon", "10", "--replications", "2"], tmp_path)
    assert code == 2
    assert "nemesis" in capsys.readouterr().err


# ------------------------------------------------------------ game files

def test_malformed_game_json(tmp_path, capsys):
    bad = tmp_path / "bad.json"
    bad.write_text('{"states": [}')
    assert cli.main(["solve", "--game", str(bad), "--lambda", "0.1"]) == 2
    assert "line 1" in capsys.readouterr().err


def test_semantically_invalid_game(tmp_path, capsys):
    doc = {
        "states": ["a", "b"], "actions1": ["x"], "actions2": ["y"],
        "initial_state": "a",
        "payoff": [[[1.0]], [[0.0]]],
        "transition": [[[[1.0]]], [[[1.0]]]],  # wrong last axis
    }
    path = tmp_path / "bad_shape.json"
    path.write_text(json.dumps(doc))
    assert cli.main(["solve", "--game", str(path), "--lambda", "0.1"]) == 2
    assert "transition shape" in capsys.readouterr().err


def test_missing_game_file(capsys):
    assert cli.main(["solve", "--game", "/nonexistent/g.json",
                     "--lambda", "0.1"]) == 2


# ------------------------------------------------------ validate-constants

def test_validate_constants_reports_honest_failure(capsys):
    # default base 100 fails the rate-variation margin; that is a numeric
    # failure exit, not a crash
    assert cli.main(["validate-constants", "--depth", "10"]) == cli.EXIT_NUMERIC
    out = capsys.readouterr().out
    assert "rate_variation: FAIL" in out
    assert "value_floor: PASS" in out
    assert "overall: FAIL" in out


def test_validate_constants_passing_base(capsys):
    assert cli.main(["validate-constants", "--base", "1.1e7",
                     "--depth", "5"]) == 0
    out = capsys.readouterr().out
    assert "overall: PASS" in out


# ----------------------------------------------------------- impossibility

def test_impossibility_always_continue(tmp_path, capsys):
    code = run_cli(["impossibility", "--sigma", "always-c",
                    "--delta", "0.1", "--horizon", "2000",
                    "--replications", "400", "--seed", "3"], tmp_path)
    assert code == 0
    doc = json.loads((tmp_path / "adversary.json").read_text())
    assert doc["delta"] == 0.1
    assert doc["horizon"] == 2000
    assert doc["M"] == 1
    assert len(doc["components"]) == 21
    assert doc["components"][0] == []  # the all-zeros component
    report = (tmp_path / "impossibility_report.txt").read_text()
    assert "certification gamma_T <= 3*delta + 3*SE: PASS" in report
    assert "PASS" in capsys.readouterr().out


def test_impossibility_delta_range(tmp_path, capsys):
    assert run_cli(["impossibility", "--sigma", "always-c",
                    "--delta", "0"], tmp_path) == 2
    assert run_cli(["impossibility", "--sigma", "always-c",
                    "--delta", "1.5"], tmp_path) == 2


def test_impossibility_infeasible_horizon(tmp_path, capsys):
    # wrapped capped counter against a 4-stage horizon: the absorb budget
    # cannot clear delta/3, which is a construction failure, not a config
    # one
    code = run_cli(["impossibility", "--wrap-counter-cap", "8",
                    "--delta", "0.001", "--horizon", "4"], tmp_path)
    assert code == 4
    assert "too short" in capsys.readouterr().err


# ------------------------------------------------------------------ trace

def test_trace_writes_csv(tmp_path, capsys):
    code = run_cli(["trace", "--horizon", "25", "--replications", "2",
                    "--seed", "11"], tmp_path)
    assert code == 0
    lines = (tmp_path / "trace.csv").read_text().strip().split("\n")
    assert lines[0] == "replication,t,z,k,i,j,x"
    assert len(lines) == 1 + 2 * 25
    assert "replication 0" in capsys.readouterr().out


# ------------------------------------------------------------- config file

def test_config_file_with_flag_override(tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"horizon": 64, "replications": 8,
                               "seed": 2}))
    out1 = tmp_path / "o1"
    code = cli.main(["--config", str(cfg), "simulate",
                     "--out-dir", str(out1)])
    assert code == 0
    rows = (out1 / "stats.csv").read_text().strip().split("\n")[1:]
    assert rows[-1].split(",")[0] == "64"

    out2 = tmp_path / "o2"
    code = cli.main(["--config", str(cfg), "simulate", "--horizon", "80",
                     "--out-dir", str(out2)])
    assert code == 0
    rows = (out2 / "stats.csv").read_text().strip().split("\n")[1:]
    assert rows[-1].split(",")[0] == "80"


def test_config_file_malformed(tmp_path, capsys):
    cfg = tmp_path / "broken.json"
    cfg.write_text("{oops")
    assert cli.main(["--config", str(cfg), "solve", "--lambda", "0.1"]) == 2


def test_out_dir_env_var(tmp_path, monkeypatch):
    target = tmp_path / "via_env"
    monkeypatch.setenv(cli.OUT_DIR_ENV, str(target))
    code = cli.main(["simulate", "--horizon", "20", "--replications", "2",
                     "--seed", "1"])
    assert code == 0
    assert (target / "stats.csv").exists()


# ------------------------------------------------------------- entry point

def test_argparse_error_exits_two():
    with pytest.raises(SystemExit) as exc:
        cli.main(["simulate", "--bogus-flag"])
    assert exc.value.code == 2


def test_console_script_installed():
    proc = subprocess.run(["stochgame", "--help"], capture_output=True,
                          text=True)
    assert proc.returncode == 0
    assert "solve" in proc.stdout and "impossibility" in proc.stdout
