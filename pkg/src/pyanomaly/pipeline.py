"""Data ingestion, windowing, training orchestration and experiment runs."""
from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterator, Sequence
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import pandas as pd

from .cnnlstm import CnnLstmModel, cnnlstm_train
from .const import (
    BENCHMARK_SEEDS,
    BENCHMARK_SIM_OVERRIDES,
    DEFAULT_SPLIT,
    SCHEMA_VERSION,
)
from .darnn import DarnnModel, darnn_train
from .detection import evaluate_detection
from .enums import Component, Stage
from .exceptions import (
    AnomalyError,
    ConfigError,
    DataError,
    DegenerateDataError,
    ParseError,
    StageError,
)
from .fusion import (
    ComponentTable,
    FusionSearchResult,
    MetaModel,
    WhatIfResult,
    compute_components,
    flag_anomalies,
    fused_scores,
    grid_search_fusion,
    rule_grid,
    score_components,
    threshold_sweep,
    weight_grid,
    whatif_evaluate,
)
from .iforest import IsolationForestModel, fit_standardizer, iforest_fit
from .models import (
    AnomalyReport,
    ChannelStats,
    Dataset,
    DetectionReport,
    ExperimentConfig,
    FlagRule,
    FusionWeights,
    PerturbationEvent,
    SplitRanges,
    WindowedSet,
    merge_defaults,
)
from .parser import check_schema
from .sim import load_truth, simulate, truth_path, write_trajectory
from .trainer import TrainingHistory
from .vae import VaeModel, vae_train

_LOGGER = logging.getLogger(__name__)

MODEL_FILES = {
    "darnn": "darnn.bin",
    "cnnlstm": "cnnlstm.bin",
    "vae": "vae.bin",
    "iforest": "iforest.json",
    "state": "pipeline.json",
}


def _parse_float(value: str) -> float:
    try:
        return float(value)
    except (TypeError, ValueError):
        return math.nan


def load_csv(
    path: str | Path,
    split: tuple[float, float, float] = DEFAULT_SPLIT,
) -> Dataset:
    """Read a `t,<target>,<drivers...>` CSV with a header row.

    Values are parsed with float() so files written by write_trajectory
    round-trip exactly. The split is contiguous in time.
    """
    path = Path(path)
    try:
        frame = pd.read_csv(path, dtype=str, keep_default_na=False, skipinitialspace=True)
    except FileNotFoundError as exc:
        raise ParseError(f"{path} not found") from exc  # noqa: EM102
    except pd.errors.EmptyDataError as exc:
        raise ParseError(f"{path} is empty") from exc  # noqa: EM102
    except pd.errors.ParserError as exc:
        raise ParseError(f"Malformed row in {path}: {exc}") from exc  # noqa: EM102

    if frame.shape[1] < 3:
        raise ParseError(
            f"{path} needs a time column, a target column and at least one driver",  # noqa: EM102
        )
    if frame.empty:
        raise ParseError(f"{path} has no data rows")  # noqa: EM102

    values = frame.apply(lambda column: column.map(_parse_float)).to_numpy(dtype=np.float64)
    bad = ~np.isfinite(values)
    if bad.any():
        row, column = np.argwhere(bad)[0]
        # header is line 1
        raise ParseError(
            f"Malformed value {frame.iat[row, column]!r} for {frame.columns[column]} "  # noqa: EM102
            f"in line {row + 2}",
            {"line": int(row + 2)},
        )

    times = values[:, 0]
    steps = np.diff(times)
    if np.any(steps <= 0):
        row = int(np.flatnonzero(steps <= 0)[0]) + 1
        raise DataError(
            f"Time stamps must increase strictly; line {row + 2} breaks order",  # noqa: EM102
            {"line": row + 2},
        )

    columns = [str(c) for c in frame.columns]
    dataset = Dataset(
        times=times,
        X=values[:, 2:].copy(),
        Y=values[:, 1].copy(),
        splits=SplitRanges.from_fractions(len(values), split),
        driver_names=columns[2:],
        target_name=columns[1],
    )
    _LOGGER.info(
        "Loaded %s samples of %s with drivers %s from %s",
        len(dataset),
        dataset.target_name,
        dataset.driver_names,
        path,
    )
    return dataset


def fit_channel_stats(dataset: Dataset) -> tuple[ChannelStats, ChannelStats]:
    """Return driver and target z-score statistics of the training range.

    A constant driver channel is only centered; a constant target raises
    DegenerateDataError.
    """
    start, stop = dataset.splits.train
    if stop - start < 2:
        raise DataError("Training range needs at least 2 samples")

    X = dataset.X[start:stop]  # noqa: N806
    x_std = X.std(axis=0)
    constant = x_std == 0
    if constant.any():
        names = [n for n, c in zip(dataset.driver_names, constant) if c]
        _LOGGER.warning("Driver channels %s are constant on the training range", names)
        x_std = np.where(constant, 1.0, x_std)

    Y = dataset.Y[start:stop]  # noqa: N806
    y_std = float(Y.std())
    if y_std == 0:
        raise DegenerateDataError(f"Target {dataset.target_name} is constant on the training range")  # noqa: EM102

    return (
        ChannelStats(mean=X.mean(axis=0), std=x_std),
        ChannelStats(mean=np.asarray(Y.mean()), std=np.asarray(y_std)),
    )


def standardize(
    dataset: Dataset,
    stats: tuple[ChannelStats, ChannelStats] | None = None,
) -> Dataset:
    """Return a copy with z-scored channels; stats default to the training range."""
    x_stats, y_stats = stats or fit_channel_stats(dataset)
    return replace(
        dataset,
        X=x_stats.transform(dataset.X),
        Y=y_stats.transform(dataset.Y),
        x_stats=x_stats,
        y_stats=y_stats,
    )


def make_windows(dataset: Dataset, window: int, span: tuple[int, int]) -> WindowedSet:
    """Return every window inside span with its next-step label.

    The window ending at t covers [t - T + 1, t] and is labelled y_{t+1};
    a span of length L yields L - T windows.
    """
    start, stop = span
    if not 0 <= start <= stop <= len(dataset):
        raise ConfigError(f"Range {span} outside the dataset of {len(dataset)} samples")  # noqa: EM102
    if window < 1 or window >= stop - start:
        raise ConfigError(
            f"Window {window} must be >= 1 and shorter than the range length {stop - start}",  # noqa: EM102
        )

    ends = np.arange(start + window - 1, stop - 1)
    # [L - T + 1, D, T] -> drop the last window, which has no label
    drivers = np.lib.stride_tricks.sliding_window_view(dataset.X[start:stop], window, axis=0)
    y_hist = np.lib.stride_tricks.sliding_window_view(dataset.Y[start:stop], window)

    return WindowedSet(
        drivers=np.ascontiguousarray(np.swapaxes(drivers[:-1], 1, 2)),
        y_hist=np.ascontiguousarray(y_hist[:-1]),
        labels=dataset.Y[ends + 1].copy(),
        index=ends,
    )


def events_in_range(
    events: Sequence[PerturbationEvent],
    first: int,
    last: int,
) -> list[PerturbationEvent]:
    """Return the events that overlap [first, last]."""
    return [e for e in events if e.end >= first and e.start <= last]


@dataclass
class PipelineState:
    """Object holding everything scoring needs besides the model files."""

    window: int
    horizon: int
    target_name: str
    driver_names: list[str]
    x_stats: ChannelStats
    y_stats: ChannelStats
    residual_std: float
    weights: FusionWeights
    rule: FlagRule
    splits: SplitRanges

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return PipelineState object as a persistable dictionary."""
        return {
            "schema": SCHEMA_VERSION,
            "window": self.window,
            "horizon": self.horizon,
            "target_name": self.target_name,
            "driver_names": list(self.driver_names),
            "x_stats": self.x_stats.as_dict,
            "y_stats": self.y_stats.as_dict,
            "residual_std": self.residual_std,
            "weights": self.weights.as_dict,
            "rule": self.rule.as_dict,
            "splits": self.splits.as_dict,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> PipelineState:
        """Return PipelineState object from a persisted dictionary."""
        check_schema(str(data.get("schema", "")))
        try:
            return PipelineState(
                window=int(data["window"]),
                horizon=int(data["horizon"]),
                target_name=str(data["target_name"]),
                driver_names=[str(n) for n in data["driver_names"]],
                x_stats=ChannelStats.from_dict(data["x_stats"]),
                y_stats=ChannelStats.from_dict(data["y_stats"]),
                residual_std=float(data["residual_std"]),
                weights=FusionWeights.from_dict(data["weights"]),
                rule=FlagRule.from_dict(data["rule"]),
                splits=SplitRanges.from_dict(data["splits"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise ParseError("Corrupt pipeline state") from exc


@dataclass(frozen=True)
class RunSeeds:
    """Object holding the independent seeds spawned from one master seed."""

    simulate: int
    darnn_init: int
    darnn_train: int
    cnnlstm_init: int
    cnnlstm_train: int
    vae_init: int
    vae_train: int
    forest: int

    @staticmethod
    def from_seed(seed: int) -> RunSeeds:
        """Return child seeds derived with SeedSequence.spawn."""
        children = np.random.SeedSequence(seed).spawn(8)
        return RunSeeds(*(int(child.generate_state(1)[0]) for child in children))


@contextmanager
def stage(name: Stage) -> Iterator[None]:
    """Prefix any failure inside the block with the stage name."""
    _LOGGER.info("Stage %s", name.value)
    try:
        yield
    except StageError:
        raise
    except (AnomalyError, ValueError, OSError) as exc:
        raise StageError(name.value, str(exc)) from exc


@dataclass
class TrainedPipeline:
    """Object holding trained models, scoring state and loss histories."""

    meta: MetaModel
    state: PipelineState
    histories: dict[str, TrainingHistory] = field(default_factory=dict)
    search: FusionSearchResult | None = None

    def save(self, directory: str | Path) -> Path:
        """Write the model files and pipeline.json into directory."""
        directory = Path(directory)
        darnn, cnnlstm, vae, forest = self.meta.require()
        darnn.save(directory / MODEL_FILES["darnn"])
        cnnlstm.save(directory / MODEL_FILES["cnnlstm"])
        vae.save(directory / MODEL_FILES["vae"])
        forest.save(directory / MODEL_FILES["iforest"])
        _write_json(directory / MODEL_FILES["state"], self.state.as_dict)
        return directory

    @staticmethod
    def load(directory: str | Path) -> TrainedPipeline:
        """Read a directory written by save."""
        directory = Path(directory)
        try:
            state = PipelineState.from_dict(_read_json(directory / MODEL_FILES["state"]))
            meta = MetaModel(
                darnn=DarnnModel.load(directory / MODEL_FILES["darnn"]),
                cnnlstm=CnnLstmModel.load(directory / MODEL_FILES["cnnlstm"]),
                vae=VaeModel.load(directory / MODEL_FILES["vae"]),
                forest=IsolationForestModel.load(directory / MODEL_FILES["iforest"]),
                residual_std=state.residual_std,
            )
        except FileNotFoundError as exc:
            raise ParseError(f"Missing model file {exc.filename}") from exc  # noqa: EM102
        meta.require()
        return TrainedPipeline(meta=meta, state=state)


def _write_json(path: Path, data: Any) -> Path:
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(data, indent=2), encoding="utf-8")
    return path


def _read_json(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text(encoding="utf-8"))
    except FileNotFoundError as exc:
        raise ParseError(f"{path} not found") from exc  # noqa: EM102
    except json.JSONDecodeError as exc:
        raise ParseError(f"Invalid JSON in {path}: {exc}") from exc  # noqa: EM102


def load_config(path: str | Path) -> dict[str, Any]:
    """Read a JSON configuration object."""
    data = _read_json(path)
    if not isinstance(data, dict):
        raise ConfigError(f"Configuration in {path} must be a JSON object")  # noqa: EM102
    return data


def train_pipeline(
    dataset: Dataset,
    config: ExperimentConfig,
    seeds: RunSeeds,
    events: Sequence[PerturbationEvent] | None = None,
) -> TrainedPipeline:
    """Train all four components on the training range of a standardized dataset.

    With ground-truth events the fusion weights and rule are grid-searched on
    the validation range; otherwise defaults are stored.
    """
    if dataset.x_stats is None or dataset.y_stats is None:
        raise DataError("train_pipeline expects a standardized dataset")

    with stage(Stage.SPLIT):
        train_set = make_windows(dataset, config.window, dataset.splits.train)
        _LOGGER.info("Training on %s windows", len(train_set))

    histories: dict[str, TrainingHistory] = {}
    with stage(Stage.TRAIN_DARNN):
        darnn, histories["darnn"] = darnn_train(
            train_set,
            config.epochs,
            config.batch_size,
            DarnnModel(
                config.window,
                dataset.n_drivers,
                config.darnn.encoder_hidden,
                config.darnn.decoder_hidden,
                seed=seeds.darnn_init,
            ),
            seed=seeds.darnn_train,
            learning_rate=config.learning_rate,
        )

    with stage(Stage.TRAIN_CNNLSTM):
        cnnlstm, histories["cnnlstm"] = cnnlstm_train(
            train_set,
            config.epochs,
            config.batch_size,
            CnnLstmModel(
                config.window,
                dataset.n_drivers + 1,
                config.cnnlstm.kernel_width,
                config.cnnlstm.filters,
                config.cnnlstm.hidden,
                seed=seeds.cnnlstm_init,
            ),
            seed=seeds.cnnlstm_train,
            learning_rate=config.learning_rate,
        )

    with stage(Stage.TRAIN_VAE):
        vae, histories["vae"] = vae_train(
            train_set.y_hist,
            config.epochs,
            config.batch_size,
            VaeModel(config.window, config.vae.hidden, config.vae.latent, seed=seeds.vae_init),
            seed=seeds.vae_train,
            learning_rate=config.learning_rate,
        )

    with stage(Stage.TRAIN_IFOREST):
        da_train = darnn.predict_batch(train_set.drivers, train_set.y_hist)
        cnn_train = cnnlstm.predict_batch(train_set.drivers, train_set.y_hist)

        residuals = np.abs(train_set.labels - da_train)
        standardizer = fit_standardizer(residuals)
        forest = iforest_fit(
            standardizer.transform(residuals),
            contamination=config.iforest.contamination,
            n_trees=config.iforest.n_trees,
            subsample=config.iforest.subsample,
            seed=seeds.forest,
            standardizer=standardizer,
        )

        residual_std = float(np.std(train_set.labels - 0.5 * (da_train + cnn_train)))
        if residual_std == 0:
            raise DegenerateDataError("Training residuals have zero variance")

    meta = MetaModel(
        darnn=darnn,
        cnnlstm=cnnlstm,
        vae=vae,
        forest=forest,
        residual_std=residual_std,
    )
    state = PipelineState(
        window=config.window,
        horizon=config.fusion.horizon,
        target_name=dataset.target_name,
        driver_names=list(dataset.driver_names),
        x_stats=dataset.x_stats,
        y_stats=dataset.y_stats,
        residual_std=residual_std,
        weights=FusionWeights(),
        rule=FlagRule(),
        splits=dataset.splits,
    )
    trained = TrainedPipeline(meta=meta, state=state, histories=histories)

    if events is not None:
        trained.search = search_fusion(trained, dataset, events, config)
        trained.state.weights = trained.search.weights
        trained.state.rule = trained.search.rule

    return trained


def range_components(
    trained: TrainedPipeline,
    dataset: Dataset,
    span: tuple[int, int],
    horizon: int | None = None,
) -> ComponentTable:
    """Return the component table of every window in span.

    Future truth is only read up to the end of span.
    """
    windows = make_windows(dataset, trained.state.window, span)
    return compute_components(
        trained.meta,
        windows.drivers,
        windows.y_hist,
        windows.index,
        dataset.Y[: span[1]],
        horizon or trained.state.horizon,
    )


def search_fusion(
    trained: TrainedPipeline,
    dataset: Dataset,
    events: Sequence[PerturbationEvent],
    config: ExperimentConfig,
) -> FusionSearchResult:
    """Grid-search weights and rule on the validation range."""
    with stage(Stage.COMPONENTS):
        table = range_components(trained, dataset, dataset.splits.val, config.fusion.horizon)

    with stage(Stage.GRID_SEARCH):
        val_events = events_in_range(events, int(table.index[0]), int(table.index[-1]))
        if not val_events:
            _LOGGER.warning("No perturbation events in the validation range; keeping default weights")
            weights = FusionWeights()
            scores = fused_scores(table.values, weights)
            rule = FlagRule(baseline=float(np.quantile(scores, max(config.fusion.baseline_quantiles))))
            return FusionSearchResult(weights=weights, rule=rule, f1=0.0)

        return grid_search_fusion(
            table.values,
            table.index,
            val_events,
            weight_grid(config.fusion.weight_levels),
            config.fusion.baseline_quantiles,
            config.fusion.delta_scales,
            config.tolerance,
        )


def build_report(
    table: ComponentTable,
    weights: FusionWeights,
    rule: FlagRule,
) -> AnomalyReport:
    """Return the anomaly report of a component table."""
    scores = fused_scores(table.values, weights)
    return AnomalyReport(
        flags=[int(table.index[p]) for p in flag_anomalies(scores, rule)],
        scores=[float(s) for s in scores],
        components=score_components(table, weights),
        weights=weights,
        rule=rule,
    )


def write_report(report: AnomalyReport, path: str | Path) -> Path:
    """Write the anomaly report JSON."""
    path = _write_json(Path(path), report.as_dict)
    _LOGGER.info("Wrote anomaly report with %s flags to %s", len(report.flags), path)
    return path


def read_report(path: str | Path) -> AnomalyReport:
    """Read an anomaly report JSON."""
    try:
        return AnomalyReport.from_dict(_read_json(path))
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(f"Corrupt anomaly report {path}") from exc  # noqa: EM102


def evaluate_report(
    report: AnomalyReport,
    events: Sequence[PerturbationEvent],
    tolerance: int,
) -> DetectionReport:
    """Score report flags against the events inside the report's time range."""
    first, last = report.time_range
    return evaluate_detection(report.flags, events_in_range(events, first, last), tolerance)


def _mean_abs(truth: np.ndarray, predictions: np.ndarray) -> float:
    known = np.isfinite(truth)
    return float(np.mean(np.abs(truth[known] - predictions[known]))) if known.any() else math.nan


def _standalone_metrics(
    trained: TrainedPipeline,
    dataset: Dataset,
    test: ComponentTable,
    events: Sequence[PerturbationEvent],
    config: ExperimentConfig,
) -> dict[str, Any]:
    """Return test F1 of each component alone, thresholds searched on validation."""
    val = range_components(trained, dataset, dataset.splits.val, config.fusion.horizon)
    val_events = events_in_range(events, int(val.index[0]), int(val.index[-1]))
    test_events = events_in_range(events, int(test.index[0]), int(test.index[-1]))

    results: dict[str, Any] = {}
    for component in Component:
        weights = FusionWeights.only(component)
        if val_events:
            rule = grid_search_fusion(
                val.values,
                val.index,
                val_events,
                [weights],
                config.fusion.baseline_quantiles,
                config.fusion.delta_scales,
                config.tolerance,
            ).rule
        else:
            rule = rule_grid(fused_scores(val.values, weights), [max(config.fusion.baseline_quantiles)], [0.0])[0]
        flags = build_report(test, weights, rule).flags
        report = evaluate_detection(flags, test_events, config.tolerance)
        results[component.value] = {
            "rule": rule.as_dict,
            "precision": report.precision,
            "recall": report.recall,
            "f1": report.f1,
        }
    return results


def write_plot_data(  # noqa: PLR0913
    directory: Path,
    raw: Dataset,
    events: Sequence[PerturbationEvent],
    table: ComponentTable,
    report: AnomalyReport,
    sweep: pd.DataFrame,
) -> None:
    """Write the CSV series used to draw the experiment figures."""
    directory.mkdir(parents=True, exist_ok=True)

    perturbed = np.zeros(len(raw), dtype=int)
    for event in events:
        perturbed[event.start : event.end + 1] = 1
    trajectory = pd.DataFrame({"t": raw.times, raw.target_name: raw.Y})
    for position, name in enumerate(raw.driver_names):
        trajectory[name] = raw.X[:, position]
    trajectory["perturbed"] = perturbed
    trajectory.to_csv(directory / "trajectory.csv", index=False)

    step = table.index + 1
    ensemble = 0.5 * (table.da_preds[:, 0] + table.cnn_preds[:, 0])
    pd.DataFrame(
        {
            "t": step,
            "truth": table.truth[:, 0],
            "darnn": table.da_preds[:, 0],
            "cnnlstm": table.cnn_preds[:, 0],
            "ensemble": ensemble,
        },
    ).to_csv(directory / "predictions.csv", index=False)

    pd.DataFrame(
        {
            "t": step,
            "darnn": table.truth[:, 0] - table.da_preds[:, 0],
            "cnnlstm": table.truth[:, 0] - table.cnn_preds[:, 0],
            "ensemble": table.truth[:, 0] - ensemble,
        },
    ).to_csv(directory / "residuals.csv", index=False)

    flagged = set(report.flags)
    scores = pd.DataFrame([c.as_dict for c in report.components])
    scores["flagged"] = [int(t in flagged) for t in scores["t"]]
    scores.to_csv(directory / "scores.csv", index=False)

    input_attention = pd.DataFrame(table.input_attention.mean(axis=1), columns=raw.driver_names)
    input_attention.insert(0, "t", table.index)
    input_attention.to_csv(directory / "input_attention.csv", index=False)

    window = table.temporal_attention.shape[1]
    temporal = pd.DataFrame(
        table.temporal_attention,
        columns=[f"lag_{window - 1 - k}" for k in range(window)],
    )
    temporal.insert(0, "t", table.index)
    temporal.to_csv(directory / "temporal_attention.csv", index=False)

    sweep.to_csv(directory / "threshold_sweep.csv", index=False)
    _LOGGER.info("Wrote plot data to %s", directory)


@dataclass
class ExperimentResult:
    """Object holding the outputs of one experiment run."""

    report: AnomalyReport
    metrics: dict[str, Any]
    directory: Path


def run_experiment(config: ExperimentConfig, directory: str | Path) -> ExperimentResult:
    """Simulate, train, fuse on validation, score the test range, write artifacts."""
    directory = Path(directory)
    seeds = RunSeeds.from_seed(config.seed)

    with stage(Stage.SIMULATE):
        trajectory = simulate(replace(config.sim, seed=seeds.simulate))
        data_path = directory / "trajectory.csv"
        write_trajectory(trajectory, data_path)
        events = load_truth(truth_path(data_path))
        raw = load_csv(data_path, config.split)
        dataset = standardize(raw)

    trained = train_pipeline(dataset, config, seeds, events)

    with stage(Stage.SCORE):
        test = range_components(trained, dataset, dataset.splits.test, config.fusion.horizon)
        report = build_report(test, trained.state.weights, trained.state.rule)
        test_events = events_in_range(events, int(test.index[0]), int(test.index[-1]))
        detection = evaluate_detection(report.flags, test_events, config.tolerance)

        scores = np.asarray(report.scores)
        sweep = threshold_sweep(
            scores,
            test.index,
            test_events,
            [float(np.quantile(scores, q)) for q in np.linspace(0.5, 0.99, 25)],
            trained.state.rule.delta_c,
            config.tolerance,
        )
        metrics = {
            "fused": {
                "precision": detection.precision,
                "recall": detection.recall,
                "f1": detection.f1,
                "n_flags": len(report.flags),
                "n_events": detection.n_events,
            },
            "standalone": _standalone_metrics(trained, dataset, test, events, config),
            "mae": {
                "darnn": _mean_abs(test.truth[:, 0], test.da_preds[:, 0]),
                "cnnlstm": _mean_abs(test.truth[:, 0], test.cnn_preds[:, 0]),
                "ensemble": _mean_abs(
                    test.truth[:, 0],
                    0.5 * (test.da_preds[:, 0] + test.cnn_preds[:, 0]),
                ),
            },
            "validation_f1": trained.search.f1 if trained.search else 0.0,
        }

    with stage(Stage.REPORT):
        trained.save(directory / "models")
        write_report(report, directory / "report.json")
        _write_json(directory / "metrics.json", metrics)
        _write_json(
            directory / "loss_history.json",
            {name: history.as_dict for name, history in trained.histories.items()},
        )
        _write_json(directory / "config.json", config.as_dict)
        write_plot_data(directory / "plots", raw, events, test, report, sweep)

    _LOGGER.info("Experiment finished: test F1 %.3f", detection.f1)
    return ExperimentResult(report=report, metrics=metrics, directory=directory)


def run_benchmark(
    seeds: Sequence[int] = BENCHMARK_SEEDS,
    directory: str | Path = "benchmark",
    overrides: dict[str, Any] | None = None,
) -> pd.DataFrame:
    """Run the seeded benchmark and compare the fused detector to each component.

    One row per seed: fused and best standalone F1, and test mean absolute
    one-step residual of the ensemble against each forecaster.
    """
    rows = []
    for seed in seeds:
        data = {"seed": seed, "sim": dict(BENCHMARK_SIM_OVERRIDES)}
        config = ExperimentConfig.from_dict(merge_defaults(data, overrides or {}))
        result = run_experiment(config, Path(directory) / f"seed_{seed}")

        standalone = {name: values["f1"] for name, values in result.metrics["standalone"].items()}
        mae = result.metrics["mae"]
        rows.append(
            {
                "seed": seed,
                "fused_f1": result.metrics["fused"]["f1"],
                "best_standalone_f1": max(standalone.values()),
                **{f"{name}_f1": f1 for name, f1 in standalone.items()},
                "ensemble_mae": mae["ensemble"],
                "darnn_mae": mae["darnn"],
                "cnnlstm_mae": mae["cnnlstm"],
            },
        )

    frame = pd.DataFrame(rows)
    frame["fused_wins"] = frame["fused_f1"] >= frame["best_standalone_f1"]
    frame["ensemble_wins"] = frame["ensemble_mae"] <= frame[["darnn_mae", "cnnlstm_mae"]].min(axis=1)
    _LOGGER.info("Benchmark:\n%s", frame.to_string(index=False))
    return frame


def detect(  # noqa: PLR0913
    data: str | Path,
    models: str | Path,
    weights: FusionWeights | None = None,
    baseline: float | None = None,
    delta_c: float | None = None,
    horizon: int | None = None,
) -> AnomalyReport:
    """Score every window of a CSV with stored models.

    weights None selects them automatically: grid search on the validation
    range when the CSV has a truth companion, else the stored weights.
    baseline and delta_c override the selected rule.
    """
    trained = TrainedPipeline.load(models)
    state = trained.state
    dataset = standardize(load_csv(data), (state.x_stats, state.y_stats))
    if dataset.driver_names != state.driver_names:
        raise DataError(
            f"Data drivers {dataset.driver_names} do not match trained drivers {state.driver_names}",  # noqa: EM102
        )

    horizon = horizon or state.horizon
    chosen_rule = state.rule
    if weights is None:
        weights = state.weights
        truth = truth_path(data)
        if truth.exists():
            config = ExperimentConfig.from_dict({"window": state.window, "fusion": {"horizon": horizon}})
            search = search_fusion(trained, dataset, load_truth(truth), config)
            weights, chosen_rule = search.weights, search.rule
        else:
            _LOGGER.warning("No truth file %s; using stored weights", truth)

    with stage(Stage.SCORE):
        table = range_components(trained, dataset, (0, len(dataset)), horizon)
        rule = FlagRule(
            baseline=chosen_rule.baseline if baseline is None else baseline,
            delta_c=chosen_rule.delta_c if delta_c is None else delta_c,
        )
        return build_report(table, weights, rule)


def whatif(  # noqa: PLR0913
    models: str | Path,
    data: str | Path,
    at: int,
    overrides: dict[str, float],
    horizon: int | None = None,
) -> WhatIfResult:
    """Evaluate raw driver overrides for the window ending at index at."""
    trained = TrainedPipeline.load(models)
    state = trained.state
    dataset = standardize(load_csv(data), (state.x_stats, state.y_stats))

    window = state.window
    if not window - 1 <= at < len(dataset):
        raise ConfigError(
            f"Index {at} must lie in [{window - 1}, {len(dataset) - 1}]",  # noqa: EM102
        )

    channels: dict[int, float] = {}
    for name, value in overrides.items():
        if name not in state.driver_names:
            raise ConfigError(f"Unknown driver {name}; expected one of {state.driver_names}")  # noqa: EM102
        channel = state.driver_names.index(name)
        channels[channel] = float(
            (value - state.x_stats.mean[channel]) / state.x_stats.std[channel],
        )

    return whatif_evaluate(
        dataset.X[at - window + 1 : at + 1],
        dataset.Y[at - window + 1 : at + 1],
        channels,
        horizon or state.horizon,
        trained.meta,
        state.weights,
        state.rule,
    )
