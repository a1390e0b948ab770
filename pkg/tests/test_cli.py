import os

import ensheat.cli as cli
from ensheat.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, cli_main
from ensheat.stepping import NumericalFailure


def test_converge_writes_tables(tmp_path):
    out = tmp_path / "conv"
    code = cli_main([
        "converge", "--algo", "a2", "--mesh", "2,4", "--T", "0.25",
        "--out", str(out),
    ])
    assert code == EXIT_OK
    for name in ("table_l2.csv", "table_h1.csv", "rates.csv"):
        assert (out / name).exists()


def test_converge_from_config_file(tmp_path):
    cfg = tmp_path / "smooth.cfg"
    out = tmp_path / "run"
    cfg.write_text(f"algo = a1\nmesh = 2,4\nT = 0.25\nout = {out}\n")
    assert cli_main(["converge", "--config", str(cfg)]) == EXIT_OK
    assert (out / "table_l2.csv").exists()


def test_cli_flag_overrides_config(tmp_path):
    cfg = tmp_path / "smooth.cfg"
    out_cfg = tmp_path / "from_config"
    out_cli = tmp_path / "from_cli"
    cfg.write_text(f"algo = a1\nmesh = 2\nT = 0.25\nout = {out_cfg}\n")
    code = cli_main(["converge", "--config", str(cfg), "--out", str(out_cli)])
    assert code == EXIT_OK
    assert out_cli.exists() and not out_cfg.exists()


def test_unknown_flag_exits_one(capsys):
    assert cli_main(["converge", "--frobnicate"]) == EXIT_CONFIG
    assert "usage" in capsys.readouterr().err


def test_unknown_subcommand_exits_one(capsys):
    assert cli_main(["explode"]) == EXIT_CONFIG


def test_unknown_config_key_exits_one(tmp_path, capsys):
    cfg = tmp_path / "bad.cfg"
    cfg.write_text("meshes = 4\n")
    assert cli_main(["converge", "--config", str(cfg)]) == EXIT_CONFIG
    assert "error" in capsys.readouterr().err


def test_bad_algorithm_exits_one(capsys):
    assert cli_main(["run", "--algo", "a9"]) == EXIT_CONFIG


def test_bad_solver_exits_one(capsys):
    assert cli_main(["run", "--solver", "gmres"]) == EXIT_CONFIG


def test_stability_sweep_files(tmp_path):
    out = tmp_path / "stab"
    code = cli_main([
        "stability", "--algo", "a2", "--mesh", "4", "--dt", "0.5,0.25",
        "--T", "1.0", "--J", "2", "--out", str(out),
    ])
    assert code == EXIT_OK
    names = sorted(os.listdir(out))
    series = [n for n in names if n.startswith("energy_")]
    assert len(series) == 2


def test_run_subcommand_diagnostics(tmp_path):
    out = tmp_path / "single"
    code = cli_main([
        "run", "--algo", "a3", "--mesh", "2", "--dt", "0.125", "--T", "0.25",
        "--out", str(out),
    ])
    assert code == EXIT_OK
    assert (out / "diagnostics.csv").exists()


def test_timing_subcommand(tmp_path):
    out = tmp_path / "timing"
    code = cli_main([
        "timing", "--mesh", "2", "--dt", "0.25", "--T", "0.5",
        "--sizes", "1", "--out", str(out),
    ])
    assert code == EXIT_OK
    assert (out / "timing.csv").exists()


def test_inconsistent_step_exits_one():
    # T not an integer multiple of dt is a configuration problem.
    assert cli_main(["run", "--mesh", "2", "--dt", "0.3", "--T", "1.0"]) == EXIT_CONFIG


def test_numerical_failure_exits_two(monkeypatch, capsys):
    def boom(cfg):
        raise NumericalFailure("step 3, subdomain 1, phase solve")

    monkeypatch.setattr(cli, "run_single", boom)
    assert cli_main(["run", "--mesh", "2"]) == EXIT_NUMERICAL
    assert "numerical failure" in capsys.readouterr().err
