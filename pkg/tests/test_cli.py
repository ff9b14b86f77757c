"""Tests for the command line interface."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from pyanomaly import cli
from pyanomaly.const import DEFAULT_TOLERANCE, DEFAULT_WINDOW
from pyanomaly.exceptions import ConfigError

from . import TINY_SIM_CONFIG


def run_cli(capsys: pytest.CaptureFixture[str], *argv: str) -> dict:
    """Run main with argv and return its JSON output."""
    assert cli.main(list(argv)) == 0
    return json.loads(capsys.readouterr().out)


def test_parse_overrides() -> None:
    """Test override strings map channels to numbers."""
    assert cli.parse_overrides("T_aux=1.5, P_RF=-2") == {"T_aux": 1.5, "P_RF": -2.0}
    assert cli.parse_overrides("P_RF=1e-3,,") == {"P_RF": 0.001}
    assert cli.parse_overrides("") == {}


@pytest.mark.parametrize("text", ["P_RF", "=1.0", "P_RF=high"])
def test_parse_overrides_errors(text: str) -> None:
    """Test malformed overrides raise ConfigError."""
    with pytest.raises(ConfigError):
        cli.parse_overrides(text)


def test_parser_defaults() -> None:
    """Test subcommand defaults."""
    parser = cli.build_parser()

    train = parser.parse_args(["train", "--data", "a.csv", "--out", "models"])
    assert train.window == DEFAULT_WINDOW
    assert train.seed == 0

    detect = parser.parse_args(["detect", "--data", "a.csv", "--models", "m", "--out", "r.json"])
    assert detect.weights == "auto"
    assert detect.baseline is None
    assert detect.horizon is None

    evaluate = parser.parse_args(["evaluate", "--report", "r.json", "--truth", "t.json"])
    assert evaluate.tolerance == DEFAULT_TOLERANCE

    assert parser.parse_args(["run", "--out", "out"]).seed == 42


def test_missing_subcommand() -> None:
    """Test the parser exits without a subcommand."""
    with pytest.raises(SystemExit):
        cli.main([])


def test_error_exit_code(tmp_path: Path) -> None:
    """Test library errors become exit code 1."""
    code = cli.main(
        ["evaluate", "--report", str(tmp_path / "missing.json"), "--truth", str(tmp_path / "t.json")],
    )

    assert code == 1


def test_cli_flow(tmp_path: Path, capsys: pytest.CaptureFixture[str]) -> None:
    """Test simulate, train, detect, evaluate and whatif end to end."""
    config = tmp_path / "sim.json"
    config.write_text(json.dumps(TINY_SIM_CONFIG), encoding="utf-8")
    data = tmp_path / "run.csv"
    models = tmp_path / "models"
    report = tmp_path / "report.json"

    simulated = run_cli(capsys, "simulate", "--config", str(config), "--out", str(data), "--seed", "3")
    assert simulated["samples"] == 201
    assert (tmp_path / "run.truth.json").exists()

    trained = run_cli(
        capsys,
        "train",
        "--data", str(data),
        "--window", "4",
        "--epochs", "1",
        "--batch", "16",
        "--out", str(models),
    )
    assert set(trained["losses"]) == {"darnn", "cnnlstm", "vae"}
    assert (models / "pipeline.json").exists()

    detected = run_cli(
        capsys,
        "detect",
        "--data", str(data),
        "--models", str(models),
        "--horizon", "2",
        "--out", str(report),
    )
    assert detected["out"] == str(report)
    assert report.exists()

    weights = tmp_path / "weights.json"
    weights.write_text(json.dumps({"alpha": 1.0}), encoding="utf-8")
    fixed = run_cli(
        capsys,
        "detect",
        "--data", str(data),
        "--models", str(models),
        "--weights", str(weights),
        "--baseline", "1e9",
        "--out", str(tmp_path / "fixed.json"),
    )
    assert fixed["flags"] == []

    evaluated = run_cli(
        capsys,
        "evaluate",
        "--report", str(report),
        "--truth", str(tmp_path / "run.truth.json"),
        "--tolerance", "2",
    )
    assert evaluated["tolerance"] == 2
    assert 0.0 <= evaluated["f1"] <= 1.0

    projected = run_cli(
        capsys,
        "whatif",
        "--models", str(models),
        "--data", str(data),
        "--at", "50",
        "--override", "T_aux=0.0",
        "--horizon", "3",
    )
    assert len(projected["da_preds"]) == 3
    assert isinstance(projected["accepted"], bool)

    assert cli.main(["whatif", "--models", str(models), "--data", str(data), "--at", "1"]) == 1
