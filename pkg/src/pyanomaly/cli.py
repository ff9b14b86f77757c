"""Command line interface for pyanomaly."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from collections.abc import Sequence
from pathlib import Path
from typing import Any

from .const import DEFAULT_BATCH_SIZE, DEFAULT_EPOCHS, DEFAULT_TOLERANCE, DEFAULT_WINDOW
from .exceptions import AnomalyError, ConfigError
from .models import ExperimentConfig, FusionWeights, SimConfig
from .pipeline import (
    RunSeeds,
    TrainedPipeline,
    detect,
    evaluate_report,
    load_config,
    load_csv,
    read_report,
    run_experiment,
    standardize,
    train_pipeline,
    whatif,
    write_report,
)
from .sim import load_truth, simulate, truth_path, write_trajectory

_LOGGER = logging.getLogger(__name__)


def parse_overrides(text: str) -> dict[str, float]:
    """Parse `channel=value,...` into a mapping."""
    overrides: dict[str, float] = {}
    for item in filter(None, (part.strip() for part in text.split(","))):
        name, sep, value = item.partition("=")
        if not sep or not name.strip():
            raise ConfigError(f"Override {item!r} must look like channel=value")  # noqa: EM102
        try:
            overrides[name.strip()] = float(value)
        except ValueError as exc:
            raise ConfigError(f"Override {item!r} has a non-numeric value") from exc  # noqa: EM102
    return overrides


def _emit(data: Any) -> None:
    sys.stdout.write(json.dumps(data, indent=2) + "\n")


def _config_data(path: str | None) -> dict[str, Any]:
    return load_config(path) if path else {}


def cmd_simulate(args: argparse.Namespace) -> None:
    """Simulate a trajectory and write CSV plus truth."""
    data = _config_data(args.config)
    data["seed"] = args.seed
    traj = simulate(SimConfig.from_dict(data))
    write_trajectory(traj, args.out)
    _emit({"samples": len(traj), "events": len(traj.perturbation_log), "out": str(args.out)})


def cmd_train(args: argparse.Namespace) -> None:
    """Train all components on a CSV and store them in a directory."""
    config = ExperimentConfig.from_dict(
        {
            "seed": args.seed,
            "window": args.window,
            "epochs": args.epochs,
            "batch_size": args.batch,
        },
    )
    dataset = standardize(load_csv(args.data, config.split))
    truth = truth_path(args.data)
    events = load_truth(truth) if truth.exists() else None

    trained = train_pipeline(dataset, config, RunSeeds.from_seed(config.seed), events)
    out = trained.save(args.out)
    _emit(
        {
            "out": str(out),
            "losses": {name: h.losses[-1] for name, h in trained.histories.items()},
            "weights": trained.state.weights.as_dict,
            "rule": trained.state.rule.as_dict,
        },
    )


def cmd_detect(args: argparse.Namespace) -> None:
    """Score a CSV with stored models and write the anomaly report."""
    weights = None
    if args.weights != "auto":
        weights = FusionWeights.from_dict(load_config(args.weights))

    report = detect(
        args.data,
        args.models,
        weights=weights,
        baseline=args.baseline,
        delta_c=args.delta_c,
        horizon=args.horizon,
    )
    write_report(report, args.out)
    _emit({"flags": report.flags, "out": str(args.out)})


def cmd_evaluate(args: argparse.Namespace) -> None:
    """Score a report against a truth document."""
    report = evaluate_report(read_report(args.report), load_truth(args.truth), args.tolerance)
    _emit(report.as_dict)


def cmd_whatif(args: argparse.Namespace) -> None:
    """Project the score of a candidate driver override."""
    result = whatif(
        args.models,
        args.data,
        args.at,
        parse_overrides(args.override),
        args.horizon,
    )
    _emit(result.as_dict)


def cmd_run(args: argparse.Namespace) -> None:
    """Run a full seeded experiment."""
    data = _config_data(args.config)
    data["seed"] = args.seed
    result = run_experiment(ExperimentConfig.from_dict(data), args.out)
    _emit({"out": str(result.directory), "metrics": result.metrics})


def build_parser() -> argparse.ArgumentParser:
    """Return the argument parser with one subcommand per operation."""
    parser = argparse.ArgumentParser(prog="pyanomaly", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log debug output")
    commands = parser.add_subparsers(dest="command", required=True)

    sim = commands.add_parser("simulate", help="simulate a trajectory")
    sim.add_argument("--config", help="JSON simulator configuration")
    sim.add_argument("--out", type=Path, required=True)
    sim.add_argument("--seed", type=int, default=0)
    sim.set_defaults(func=cmd_simulate)

    train = commands.add_parser("train", help="train all components")
    train.add_argument("--data", type=Path, required=True)
    train.add_argument("--window", type=int, default=DEFAULT_WINDOW)
    train.add_argument("--epochs", type=int, default=DEFAULT_EPOCHS)
    train.add_argument("--batch", type=int, default=DEFAULT_BATCH_SIZE)
    train.add_argument("--out", type=Path, required=True)
    train.add_argument("--seed", type=int, default=0)
    train.set_defaults(func=cmd_train)

    det = commands.add_parser("detect", help="score data and flag anomalies")
    det.add_argument("--data", type=Path, required=True)
    det.add_argument("--models", type=Path, required=True)
    det.add_argument("--weights", default="auto", help="weights JSON file or 'auto'")
    det.add_argument("--baseline", type=float)
    det.add_argument("--delta-c", dest="delta_c", type=float)
    det.add_argument("--horizon", type=int)
    det.add_argument("--out", type=Path, required=True)
    det.set_defaults(func=cmd_detect)

    ev = commands.add_parser("evaluate", help="score a report against truth")
    ev.add_argument("--report", type=Path, required=True)
    ev.add_argument("--truth", type=Path, required=True)
    ev.add_argument("--tolerance", type=int, default=DEFAULT_TOLERANCE)
    ev.set_defaults(func=cmd_evaluate)

    wi = commands.add_parser("whatif", help="evaluate a driver override")
    wi.add_argument("--models", type=Path, required=True)
    wi.add_argument("--data", type=Path, required=True)
    wi.add_argument("--at", type=int, required=True)
    wi.add_argument("--override", default="", help="channel=value,...")
    wi.add_argument("--horizon", type=int)
    wi.set_defaults(func=cmd_whatif)

    run = commands.add_parser("run", help="run a full experiment")
    run.add_argument("--config", help="JSON experiment configuration")
    run.add_argument("--out", type=Path, required=True)
    run.add_argument("--seed", type=int, default=42)
    run.set_defaults(func=cmd_run)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    """Run the command line; return the process exit code."""
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.INFO,
        format="%(asctime)s %(levelname)s %(name)s: %(message)s",
    )

    try:
        args.func(args)
    except AnomalyError as exc:
        _LOGGER.error("%s", exc)  # noqa: TRY400
        return 1
    return 0
