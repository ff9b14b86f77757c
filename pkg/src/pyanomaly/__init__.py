"""Hybrid forecasting ensemble for time-series anomaly detection."""
from .cnnlstm import CnnLstmModel, cnnlstm_forward, cnnlstm_train
from .darnn import DarnnModel, DarnnOutput, attention_sparsity, darnn_forward, darnn_train
from .detection import evaluate_detection
from .exceptions import (
    AnomalyError,
    ConfigError,
    ContractError,
    DataError,
    DegenerateDataError,
    DivergenceError,
    InvalidStateError,
    ModelStateError,
    ParseError,
    SchemaVersionError,
    ShapeError,
    StageError,
    TrainingError,
)
from .fusion import (
    MetaModel,
    WindowContext,
    composite_score,
    flag_anomalies,
    grid_search_fusion,
    grid_search_weights,
    meta_score,
    normalize_residual,
    rollout_forecast,
    whatif_evaluate,
)
from .iforest import (
    IsolationForestModel,
    Standardizer,
    fit_standardizer,
    iforest_fit,
    iforest_score,
)
from .models import (
    AnomalyReport,
    Dataset,
    DetectionReport,
    ExperimentConfig,
    FlagRule,
    FusionWeights,
    MetaFeatureVector,
    PerturbationEvent,
    ScoreComponents,
    SimConfig,
    Trajectory,
    WindowedSet,
)
from .pipeline import load_csv, make_windows, run_benchmark, run_experiment
from .sim import perturbation_process, simulate
from .tensor import Tensor, backward
from .vae import VaeModel, vae_loss, vae_score, vae_train

__all__ = [
    "AnomalyReport",
    "Dataset",
    "DetectionReport",
    "ExperimentConfig",
    "FlagRule",
    "FusionWeights",
    "MetaFeatureVector",
    "PerturbationEvent",
    "ScoreComponents",
    "SimConfig",
    "Trajectory",
    "WindowedSet",
    "CnnLstmModel",
    "DarnnModel",
    "DarnnOutput",
    "IsolationForestModel",
    "MetaModel",
    "Standardizer",
    "Tensor",
    "VaeModel",
    "WindowContext",
    "attention_sparsity",
    "backward",
    "cnnlstm_forward",
    "cnnlstm_train",
    "composite_score",
    "darnn_forward",
    "darnn_train",
    "evaluate_detection",
    "fit_standardizer",
    "flag_anomalies",
    "grid_search_fusion",
    "grid_search_weights",
    "iforest_fit",
    "iforest_score",
    "load_csv",
    "make_windows",
    "meta_score",
    "normalize_residual",
    "perturbation_process",
    "rollout_forecast",
    "run_benchmark",
    "run_experiment",
    "simulate",
    "vae_loss",
    "vae_score",
    "vae_train",
    "whatif_evaluate",
    "AnomalyError",
    "ConfigError",
    "ContractError",
    "DataError",
    "DegenerateDataError",
    "DivergenceError",
    "InvalidStateError",
    "ModelStateError",
    "ParseError",
    "SchemaVersionError",
    "ShapeError",
    "StageError",
    "TrainingError",
]
