"""Score components, composite fusion, flag rule and what-if evaluation."""
from __future__ import annotations

import itertools
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from typing import Union

import numpy as np
import pandas as pd

from .cnnlstm import CnnLstmModel
from .const import (
    DEFAULT_BASELINE_QUANTILES,
    DEFAULT_DELTA_SCALES,
    DEFAULT_HORIZON,
    DEFAULT_TOLERANCE,
    DEFAULT_WEIGHT_LEVELS,
)
from .darnn import DarnnModel, attention_sparsity_batch
from .detection import evaluate_detection
from .exceptions import ConfigError, ContractError, DegenerateDataError, ModelStateError, ShapeError
from .iforest import IsolationForestModel
from .models import FlagRule, FusionWeights, MetaFeatureVector, PerturbationEvent, ScoreComponents
from .vae import VaeModel, vae_score_batch

_LOGGER = logging.getLogger(__name__)

Forecaster = Union[DarnnModel, CnnLstmModel]


def composite_score(
    components: ScoreComponents | Sequence[float] | np.ndarray,
    weights: FusionWeights,
) -> float | np.ndarray:
    """Return alpha R + beta S + gamma E + delta_w I.

    components is one ScoreComponents or an array whose last axis holds the
    four components; arrays return one score per leading index.
    """
    if isinstance(components, ScoreComponents):
        values = np.asarray(components.as_tuple, dtype=np.float64)
    else:
        values = np.asarray(components, dtype=np.float64)

    if values.shape[-1:] != (4,):
        raise ShapeError(f"Expected 4 score components, got shape {values.shape}")  # noqa: EM102
    if not np.all(np.isfinite(values)):
        raise ContractError("Score components must be finite")

    fused = values @ weights.as_array
    return float(fused) if fused.ndim == 0 else fused


def normalize_residual(raw: np.ndarray | float, std_train: float) -> np.ndarray | float:
    """Return |raw| / std_train."""
    if not std_train > 0:
        raise DegenerateDataError(f"Training residual std must be positive, got {std_train}")  # noqa: EM102

    normalized = np.abs(np.asarray(raw, dtype=np.float64)) / std_train
    return float(normalized) if normalized.ndim == 0 else normalized


def _apply_overrides(rows: np.ndarray, overrides: Mapping[int, float] | None) -> np.ndarray:
    rows = rows.copy()
    for channel, value in (overrides or {}).items():
        if not 0 <= channel < rows.shape[-1]:
            raise ConfigError(f"Override channel {channel} out of range")  # noqa: EM102
        rows[..., channel] = value
    return rows


def rollout_forecast_batch(
    model: Forecaster,
    drivers: np.ndarray,
    y_hist: np.ndarray,
    horizon: int,
    overrides: Mapping[int, float] | None = None,
) -> np.ndarray:
    """Return recursive forecasts [B, H] for windows [B, T, D] and histories [B, T].

    Each prediction becomes the newest history entry for the next step.
    Drivers beyond the window hold the last observed row; overrides replace
    the given channels at the final window step and every held step.
    """
    if horizon < 1:
        raise ConfigError(f"Horizon must be >= 1, got {horizon}")  # noqa: EM102

    drivers = np.asarray(drivers, dtype=np.float64).copy()
    y_hist = np.asarray(y_hist, dtype=np.float64).copy()
    held = _apply_overrides(drivers[:, -1, :], overrides)
    drivers[:, -1, :] = held

    predictions = np.empty((len(y_hist), horizon))
    for step in range(horizon):
        predictions[:, step] = model.predict_batch(drivers, y_hist)
        y_hist = np.concatenate([y_hist[:, 1:], predictions[:, step : step + 1]], axis=1)
        drivers = np.concatenate([drivers[:, 1:, :], held[:, np.newaxis, :]], axis=1)

    return predictions


def rollout_forecast(
    model: Forecaster,
    window: np.ndarray,
    y_hist: np.ndarray,
    horizon: int,
    overrides: Mapping[int, float] | None = None,
) -> np.ndarray:
    """Return H recursive forecasts from a single [T, D] window."""
    window = np.asarray(window, dtype=np.float64)
    y_hist = np.asarray(y_hist, dtype=np.float64)
    return rollout_forecast_batch(model, window[np.newaxis], y_hist[np.newaxis], horizon, overrides)[0]


@dataclass
class MetaModel:
    """Object bundling the trained component models used for scoring."""

    darnn: DarnnModel | None = None
    cnnlstm: CnnLstmModel | None = None
    vae: VaeModel | None = None
    forest: IsolationForestModel | None = None
    residual_std: float = 1.0

    def require(self) -> tuple[DarnnModel, CnnLstmModel, VaeModel, IsolationForestModel]:
        """Return the component models, raising ModelStateError if any is missing."""
        missing = [
            name
            for name, model in (
                ("darnn", self.darnn),
                ("cnnlstm", self.cnnlstm),
                ("vae", self.vae),
                ("iforest", self.forest),
            )
            if model is None or not model.fitted
        ]
        if missing:
            raise ModelStateError("Component models not available", {"missing": missing})

        assert self.forest is not None  # noqa: S101
        if self.forest.standardizer is None:
            raise ModelStateError("Isolation forest has no residual standardizer")

        return self.darnn, self.cnnlstm, self.vae, self.forest  # type: ignore[return-value]


@dataclass
class WindowContext:
    """Object holding the observed window a score is computed for.

    truth holds the recorded targets y_{t+1..t+H}, NaN where unavailable.
    """

    drivers: np.ndarray
    y_hist: np.ndarray
    truth: np.ndarray | None = None

    def __post_init__(self) -> None:
        """Coerce the arrays to float64."""
        self.drivers = np.asarray(self.drivers, dtype=np.float64)
        self.y_hist = np.asarray(self.y_hist, dtype=np.float64)


def _iso_residuals(
    da_preds: np.ndarray,
    cnn_preds: np.ndarray,
    truth: np.ndarray,
) -> np.ndarray:
    known = np.isfinite(truth)
    return np.where(known, np.abs(np.where(known, truth, 0.0) - da_preds), np.abs(da_preds - cnn_preds))


def _truth_or_missing(truth: np.ndarray | None, shape: tuple[int, ...]) -> np.ndarray:
    if truth is None:
        return np.full(shape, np.nan)
    truth = np.asarray(truth, dtype=np.float64)
    if truth.shape != shape:
        raise ShapeError(f"Truth must have shape {shape}, got {truth.shape}")  # noqa: EM102
    return truth


def build_features(
    context: WindowContext,
    meta: MetaModel,
    horizon: int = DEFAULT_HORIZON,
    overrides: Mapping[int, float] | None = None,
) -> MetaFeatureVector:
    """Return the horizon features of one window: both roll-outs and forest scores."""
    darnn, cnnlstm, _, forest = meta.require()

    da_preds = rollout_forecast(darnn, context.drivers, context.y_hist, horizon, overrides)
    cnn_preds = rollout_forecast(cnnlstm, context.drivers, context.y_hist, horizon, overrides)
    truth = _truth_or_missing(context.truth, (horizon,))

    residuals = _iso_residuals(da_preds, cnn_preds, truth)
    iso_scores = forest.score_samples(forest.standardizer.transform(residuals))  # type: ignore[union-attr]
    return MetaFeatureVector(da_preds=da_preds, cnn_preds=cnn_preds, iso_scores=iso_scores)


def _horizon_components(  # noqa: PLR0913
    da_preds: np.ndarray,
    cnn_preds: np.ndarray,
    iso_scores: np.ndarray,
    truth: np.ndarray,
    s_att: np.ndarray,
    e_rec: np.ndarray,
    residual_std: float,
) -> np.ndarray:
    """Return components [N, H, 4] from per-window arrays."""
    known = np.isfinite(truth)
    ensemble = 0.5 * (da_preds + cnn_preds)
    raw = np.where(known, np.where(known, truth, 0.0) - ensemble, da_preds - cnn_preds)
    r_hat = normalize_residual(raw, residual_std)

    horizon = da_preds.shape[1]
    i_iso = np.mean(iso_scores, axis=1)
    return np.stack(
        [
            r_hat,
            np.repeat(s_att[:, np.newaxis], horizon, axis=1),
            np.repeat(e_rec[:, np.newaxis], horizon, axis=1),
            np.repeat(i_iso[:, np.newaxis], horizon, axis=1),
        ],
        axis=-1,
    )


def meta_components(
    fv: MetaFeatureVector,
    context: WindowContext,
    meta: MetaModel,
) -> np.ndarray:
    """Return per-horizon components [H, 4] of one window.

    R comes from the ensemble-mean residual where truth is known and from the
    forecaster disagreement elsewhere; S from the current temporal attention;
    E from the VAE on the current window; I is the horizon mean of iso_scores.
    """
    darnn, _, vae, _ = meta.require()
    _, _, beta = darnn.infer_batch(context.drivers[np.newaxis], context.y_hist[np.newaxis])

    return _horizon_components(
        fv.da_preds[np.newaxis],
        fv.cnn_preds[np.newaxis],
        fv.iso_scores[np.newaxis],
        _truth_or_missing(context.truth, (fv.horizon,))[np.newaxis],
        attention_sparsity_batch(beta),
        vae_score_batch(context.y_hist[np.newaxis], vae),
        meta.residual_std,
    )[0]


def meta_score(
    fv: MetaFeatureVector,
    context: WindowContext,
    weights: FusionWeights,
    meta: MetaModel,
) -> float:
    """Return the horizon maximum of the composite score of one window."""
    return float(np.max(composite_score(meta_components(fv, context, meta), weights)))


@dataclass
class ComponentTable:
    """Object holding precomputed components for a run of windows.

    values is [N, H, 4]; index holds the window end t of each row.
    """

    index: np.ndarray
    values: np.ndarray
    da_preds: np.ndarray
    cnn_preds: np.ndarray
    iso_scores: np.ndarray
    truth: np.ndarray
    input_attention: np.ndarray
    temporal_attention: np.ndarray

    def __len__(self) -> int:
        """Return the number of windows."""
        return len(self.index)

    @property
    def horizon(self) -> int:
        """Return the horizon H."""
        return int(self.values.shape[1])

    def subset(self, rows: np.ndarray | slice) -> ComponentTable:
        """Return the rows selected by rows."""
        return ComponentTable(
            index=self.index[rows],
            values=self.values[rows],
            da_preds=self.da_preds[rows],
            cnn_preds=self.cnn_preds[rows],
            iso_scores=self.iso_scores[rows],
            truth=self.truth[rows],
            input_attention=self.input_attention[rows],
            temporal_attention=self.temporal_attention[rows],
        )


def compute_components(  # noqa: PLR0913
    meta: MetaModel,
    drivers: np.ndarray,
    y_hist: np.ndarray,
    index: np.ndarray,
    y_series: np.ndarray,
    horizon: int = DEFAULT_HORIZON,
) -> ComponentTable:
    """Return the component table of windows ending at index.

    y_series is the full standardized target; truth for t + h is taken from
    it when t + h lies inside the series.
    """
    darnn, cnnlstm, vae, forest = meta.require()
    index = np.asarray(index, dtype=int)

    da_preds = rollout_forecast_batch(darnn, drivers, y_hist, horizon)
    cnn_preds = rollout_forecast_batch(cnnlstm, drivers, y_hist, horizon)
    _, alpha, beta = darnn.infer_batch(drivers, y_hist)

    targets = index[:, np.newaxis] + np.arange(1, horizon + 1)
    inside = targets < len(y_series)
    truth = np.where(inside, y_series[np.minimum(targets, len(y_series) - 1)], np.nan)

    residuals = _iso_residuals(da_preds, cnn_preds, truth)
    iso_scores = forest.score_samples(
        forest.standardizer.transform(residuals.reshape(-1)),  # type: ignore[union-attr]
    ).reshape(residuals.shape)

    values = _horizon_components(
        da_preds,
        cnn_preds,
        iso_scores,
        truth,
        attention_sparsity_batch(beta),
        vae_score_batch(y_hist, vae),
        meta.residual_std,
    )
    _LOGGER.info("Computed components for %s windows, horizon %s", len(index), horizon)
    return ComponentTable(
        index=index,
        values=values,
        da_preds=da_preds,
        cnn_preds=cnn_preds,
        iso_scores=iso_scores,
        truth=truth,
        input_attention=alpha,
        temporal_attention=beta,
    )


def fused_scores(values: np.ndarray, weights: FusionWeights) -> np.ndarray:
    """Return the horizon-max composite score of every row of [N, H, 4]."""
    return np.asarray(composite_score(values, weights)).max(axis=-1)


def score_components(table: ComponentTable, weights: FusionWeights) -> list[ScoreComponents]:
    """Return the components of the horizon step that sets each fused score."""
    fused = np.asarray(composite_score(table.values, weights))
    best = fused.argmax(axis=1)
    rows = np.arange(len(table))
    chosen = table.values[rows, best]

    return [
        ScoreComponents(
            t=int(t),
            r_hat=float(r),
            s_att=float(s),
            e_rec=float(e),
            i_iso=float(i),
            fused=float(a),
        )
        for t, (r, s, e, i), a in zip(table.index, chosen, fused[rows, best])
    ]


def flag_anomalies(scores: np.ndarray, rule: FlagRule) -> list[int]:
    """Return positions t with score_t > b and score_t - score_{t-1} > delta_c.

    The score before the first position is taken as 0.
    """
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        return []

    previous = np.concatenate([[0.0], scores[:-1]])
    hits = (scores > rule.baseline) & (scores - previous > rule.delta_c)
    return np.flatnonzero(hits).tolist()


def weight_grid(levels: Sequence[float] = DEFAULT_WEIGHT_LEVELS) -> list[FusionWeights]:
    """Return every weight combination of levels except all-zero, in lexicographic order."""
    return [
        FusionWeights(*combo)
        for combo in itertools.product(sorted(levels), repeat=4)
        if any(w > 0 for w in combo)
    ]


def _flag_times(scores: np.ndarray, index: np.ndarray, rule: FlagRule) -> list[int]:
    return [int(index[p]) for p in flag_anomalies(scores, rule)]


def grid_search_weights(  # noqa: PLR0913
    values: np.ndarray,
    index: np.ndarray,
    events: Sequence[PerturbationEvent],
    grid: Sequence[FusionWeights] | None = None,
    rule: FlagRule | None = None,
    tolerance: int = DEFAULT_TOLERANCE,
) -> FusionWeights:
    """Return the weights with the best event F1 under a fixed rule.

    Ties go to the lexicographically smallest weight tuple.
    """
    grid = weight_grid() if grid is None else list(grid)
    if not grid:
        raise ConfigError("Weight grid is empty")
    rule = rule or FlagRule()

    best: FusionWeights | None = None
    best_f1 = -1.0
    for weights in sorted(grid, key=lambda w: w.as_tuple):
        flags = _flag_times(fused_scores(values, weights), index, rule)
        f1 = evaluate_detection(flags, events, tolerance).f1
        if f1 > best_f1:
            best, best_f1 = weights, f1

    _LOGGER.info("Best weights %s with F1 %.3f", best, best_f1)
    return best  # type: ignore[return-value]


def rule_grid(
    scores: np.ndarray,
    baseline_quantiles: Sequence[float] = DEFAULT_BASELINE_QUANTILES,
    delta_scales: Sequence[float] = DEFAULT_DELTA_SCALES,
) -> list[FlagRule]:
    """Return flag rules from score quantiles and multiples of the step-change std."""
    scores = np.asarray(scores, dtype=np.float64)
    if scores.size == 0:
        raise ConfigError("Cannot derive a rule grid from an empty score series")

    spread = float(np.std(np.diff(scores))) if scores.size > 1 else 0.0
    return [
        FlagRule(baseline=float(np.quantile(scores, q)), delta_c=scale * spread)
        for q in baseline_quantiles
        for scale in delta_scales
    ]


@dataclass
class FusionSearchResult:
    """Object holding the outcome of a joint weight and rule search."""

    weights: FusionWeights
    rule: FlagRule
    f1: float


def grid_search_fusion(  # noqa: PLR0913
    values: np.ndarray,
    index: np.ndarray,
    events: Sequence[PerturbationEvent],
    grid: Sequence[FusionWeights] | None = None,
    baseline_quantiles: Sequence[float] = DEFAULT_BASELINE_QUANTILES,
    delta_scales: Sequence[float] = DEFAULT_DELTA_SCALES,
    tolerance: int = DEFAULT_TOLERANCE,
) -> FusionSearchResult:
    """Return the weights and rule with the best event F1.

    Weights are scanned in lexicographic order and rules in grid order; only
    strict improvements replace the incumbent.
    """
    grid = weight_grid() if grid is None else list(grid)
    if not grid:
        raise ConfigError("Weight grid is empty")

    best: FusionSearchResult | None = None
    for weights in sorted(grid, key=lambda w: w.as_tuple):
        scores = fused_scores(values, weights)
        for rule in rule_grid(scores, baseline_quantiles, delta_scales):
            f1 = evaluate_detection(_flag_times(scores, index, rule), events, tolerance).f1
            if best is None or f1 > best.f1:
                best = FusionSearchResult(weights=weights, rule=rule, f1=f1)

    assert best is not None  # noqa: S101
    _LOGGER.info(
        "Fusion search: weights %s, rule %s, F1 %.3f",
        best.weights.as_tuple,
        best.rule.as_dict,
        best.f1,
    )
    return best


def threshold_sweep(  # noqa: PLR0913
    scores: np.ndarray,
    index: np.ndarray,
    events: Sequence[PerturbationEvent],
    baselines: Sequence[float],
    delta_c: float = 0.0,
    tolerance: int = DEFAULT_TOLERANCE,
) -> pd.DataFrame:
    """Return flag count, precision, recall and F1 for every baseline b."""
    rows = []
    for baseline in baselines:
        flags = _flag_times(scores, index, FlagRule(baseline=float(baseline), delta_c=delta_c))
        report = evaluate_detection(flags, events, tolerance)
        rows.append(
            {
                "b": float(baseline),
                "delta_c": delta_c,
                "flags": len(flags),
                "precision": report.precision,
                "recall": report.recall,
                "f1": report.f1,
            },
        )
    return pd.DataFrame(rows, columns=["b", "delta_c", "flags", "precision", "recall", "f1"])


@dataclass
class WhatIfResult:
    """Object holding the projected score of a candidate action."""

    projected_score: float
    baseline_score: float
    accepted: bool
    da_preds: np.ndarray
    cnn_preds: np.ndarray

    @property
    def as_dict(self) -> dict[str, object]:
        """Return WhatIfResult object as dictionary."""
        return {
            "projected_score": self.projected_score,
            "baseline_score": self.baseline_score,
            "accepted": self.accepted,
            "da_preds": self.da_preds.tolist(),
            "cnn_preds": self.cnn_preds.tolist(),
        }


def whatif_evaluate(  # noqa: PLR0913
    drivers: np.ndarray,
    y_hist: np.ndarray,
    overrides: Mapping[int, float],
    horizon: int,
    meta: MetaModel,
    weights: FusionWeights,
    rule: FlagRule | None = None,
) -> WhatIfResult:
    """Project the score of the window under driver overrides.

    No future truth exists for a hypothetical action, so both the residual
    and the forest inputs use the forecaster disagreement. The action is
    rejected when the projected score exceeds the rule baseline.
    """
    rule = rule or FlagRule()
    context = WindowContext(
        drivers=np.asarray(drivers, dtype=np.float64),
        y_hist=np.asarray(y_hist, dtype=np.float64),
    )

    null_fv = build_features(context, meta, horizon)
    baseline_score = meta_score(null_fv, context, weights, meta)

    fv = build_features(context, meta, horizon, overrides) if overrides else null_fv
    projected = meta_score(fv, context, weights, meta) if overrides else baseline_score

    _LOGGER.info(
        "What-if %s: projected %.4f vs null %.4f",
        dict(overrides),
        projected,
        baseline_score,
    )
    return WhatIfResult(
        projected_score=projected,
        baseline_score=baseline_score,
        accepted=not projected > rule.baseline,
        da_preds=fv.da_preds,
        cnn_preds=fv.cnn_preds,
    )
