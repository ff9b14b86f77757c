"""Models for pyanomaly."""
from __future__ import annotations

import copy
import math
from dataclasses import asdict, dataclass, field
from typing import Any

import numpy as np
from deepmerge import Merger

from .const import (
    DEFAULT_BASELINE,
    DEFAULT_DELTA_C,
    DEFAULT_EXPERIMENT_CONFIG,
    DEFAULT_SIM_CONFIG,
)
from .enums import Component
from .exceptions import ConfigError, ContractError


# lists in user data replace the default list instead of extending it
config_merger = Merger(
    [(list, ["override"]), (dict, ["merge"]), (set, ["union"])],
    ["override"],
    ["override"],
)


def merge_defaults(defaults: dict[str, Any], data: dict[str, Any]) -> dict[str, Any]:
    """Return user data merged onto a private copy of the defaults."""
    return config_merger.merge(copy.deepcopy(defaults), copy.deepcopy(data))  # type: ignore[no-any-return]


@dataclass
class SimConfig:
    """Object holding the parameters of the growth-relaxation simulator.

    grad_threshold of 0 arms the perturbation process on every idle step, so
    pulse onsets are governed by pert_prob alone. Raise it to restrict onsets
    to steep segments of the trajectory; +inf disables pulses.
    """

    p_coeff: float
    p_sat: float
    t_coeff: float
    v_amp: float
    tau: float
    w_width: float
    alpha_relax: float
    p0: float
    t_ramp: float
    t_end: float
    dt: float
    t_sat: float
    aux_gain: float
    aux_rate: float
    grad_threshold: float
    pert_amp_range: tuple[float, float]
    pert_len_range: tuple[int, int]
    pert_prob: float
    seed: int = 0
    p_init: float | None = None
    aux_init: float = 0.0

    @staticmethod
    def from_dict(data: dict[str, Any]) -> SimConfig:
        """Return SimConfig object from a (partial) configuration mapping."""
        merged = merge_defaults(DEFAULT_SIM_CONFIG, data)
        amp_lo, amp_hi = merged["pert_amp_range"]
        len_lo, len_hi = merged["pert_len_range"]

        return SimConfig(
            p_coeff=float(merged["p_coeff"]),
            p_sat=float(merged["p_sat"]),
            t_coeff=float(merged["t_coeff"]),
            v_amp=float(merged["v_amp"]),
            tau=float(merged["tau"]),
            w_width=float(merged["w_width"]),
            alpha_relax=float(merged["alpha_relax"]),
            p0=float(merged["p0"]),
            t_ramp=float(merged["t_ramp"]),
            t_end=float(merged["t_end"]),
            dt=float(merged["dt"]),
            t_sat=float(merged["t_sat"]),
            aux_gain=float(merged["aux_gain"]),
            aux_rate=float(merged["aux_rate"]),
            grad_threshold=float(merged["grad_threshold"]),
            pert_amp_range=(float(amp_lo), float(amp_hi)),
            pert_len_range=(int(len_lo), int(len_hi)),
            pert_prob=float(merged["pert_prob"]),
            seed=int(merged["seed"]),
            p_init=None if merged["p_init"] is None else float(merged["p_init"]),
            aux_init=float(merged["aux_init"]),
        )

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return SimConfig object as dictionary."""
        data = asdict(self)
        data["pert_amp_range"] = list(self.pert_amp_range)
        data["pert_len_range"] = list(self.pert_len_range)
        return data

    @property
    def forcing(self) -> float:
        """Return the constant excitation forcing term P_RF."""
        return self.t_coeff * self.v_amp / (self.w_width * self.tau)

    @property
    def n_steps(self) -> int:
        """Return the number of samples N of a trajectory."""
        return math.floor(self.t_end / self.dt + 1e-9) + 1

    @property
    def ramp_index(self) -> int:
        """Return the last sample index that belongs to the excitation phase."""
        return math.floor(self.t_ramp / self.dt + 1e-9)

    @property
    def initial_state(self) -> float:
        """Return P(0)."""
        return self.p0 if self.p_init is None else self.p_init

    def validate(self) -> None:  # noqa: C901
        """Raise ConfigError when the configuration is unusable."""
        # grad_threshold may be +inf to disarm the perturbation process
        values = asdict(self)
        values.pop("grad_threshold")
        if not all(
            math.isfinite(v) for v in values.values() if isinstance(v, float)
        ) or math.isnan(self.grad_threshold):
            raise ConfigError("Simulator parameters must be finite")

        if self.dt <= 0:
            raise ConfigError("dt must be positive", {"dt": self.dt})

        if not self.t_end > self.t_ramp > 0:
            raise ConfigError(
                "Expected t_end > t_ramp > 0",
                {"t_end": self.t_end, "t_ramp": self.t_ramp},
            )

        if not self.p_sat > self.p0 > 0:
            raise ConfigError(
                "Expected p_sat > p0 > 0",
                {"p_sat": self.p_sat, "p0": self.p0},
            )

        if self.alpha_relax <= 0:
            raise ConfigError("alpha_relax must be positive")

        if self.w_width == 0 or self.tau == 0:
            raise ConfigError("Forcing width and time constant must be nonzero")

        if self.pert_amp_range[0] > self.pert_amp_range[1]:
            raise ConfigError("pert_amp_range must be an ordered interval")

        if not 1 <= self.pert_len_range[0] <= self.pert_len_range[1]:
            raise ConfigError("pert_len_range must be an ordered interval of steps >= 1")

        if not 0.0 <= self.pert_prob <= 1.0:
            raise ConfigError("pert_prob must lie in [0, 1]")

        if self.t_sat <= 0:
            raise ConfigError("t_sat must be positive")


@dataclass(frozen=True)
class PerturbationEvent:
    """Object holding one injected perturbation pulse."""

    start: int
    end: int
    amplitude: float

    @staticmethod
    def from_dict(data: dict[str, Any]) -> PerturbationEvent:
        """Return PerturbationEvent object from a truth document entry."""
        return PerturbationEvent(
            start=int(data["start"]),
            end=int(data["end"]),
            amplitude=float(data["amplitude"]),
        )

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return PerturbationEvent object as dictionary."""
        return {"start": self.start, "end": self.end, "amplitude": self.amplitude}


@dataclass
class Trajectory:
    """Object holding a simulated trajectory and its ground truth."""

    times: np.ndarray
    primary: np.ndarray
    auxiliary: np.ndarray
    forcing: np.ndarray
    perturbation_log: list[PerturbationEvent]
    eta: np.ndarray

    def __len__(self) -> int:
        """Return the number of samples."""
        return len(self.times)


@dataclass(frozen=True)
class FusionWeights:
    """Object holding the composite score weights (alpha, beta, gamma, delta_w)."""

    alpha: float = 0.25
    beta: float = 0.25
    gamma: float = 0.25
    delta_w: float = 0.25

    def __post_init__(self) -> None:
        """Validate the weights."""
        weights = self.as_tuple
        if not all(math.isfinite(w) and w >= 0 for w in weights):
            raise ConfigError("Fusion weights must be finite and nonnegative")

        if not any(w > 0 for w in weights):
            raise ConfigError("At least one fusion weight must be positive")

    @staticmethod
    def from_dict(data: dict[str, Any]) -> FusionWeights:
        """Return FusionWeights object from a mapping."""
        return FusionWeights(
            alpha=float(data.get("alpha", 0.0)),
            beta=float(data.get("beta", 0.0)),
            gamma=float(data.get("gamma", 0.0)),
            delta_w=float(data.get("delta_w", 0.0)),
        )

    @property
    def as_dict(self) -> dict[str, float]:
        """Return FusionWeights object as dictionary."""
        return asdict(self)

    @property
    def as_tuple(self) -> tuple[float, float, float, float]:
        """Return the weights in component order (R, S, E, I)."""
        return (self.alpha, self.beta, self.gamma, self.delta_w)

    @property
    def as_array(self) -> np.ndarray:
        """Return the weights as a vector in component order."""
        return np.asarray(self.as_tuple, dtype=np.float64)

    def scaled(self, factor: float) -> FusionWeights:
        """Return every weight multiplied by a positive factor."""
        return FusionWeights(*(w * factor for w in self.as_tuple))

    @staticmethod
    def only(component: Component) -> FusionWeights:
        """Return weights selecting a single component."""
        order = list(Component)
        values = [1.0 if c == component else 0.0 for c in order]
        return FusionWeights(*values)


@dataclass(frozen=True)
class FlagRule:
    """Object holding the flag rule baseline b and change threshold delta_c."""

    baseline: float = DEFAULT_BASELINE
    delta_c: float = DEFAULT_DELTA_C

    def __post_init__(self) -> None:
        """Validate the rule."""
        if not self.delta_c >= 0:
            raise ConfigError("delta_c must be nonnegative")

    @staticmethod
    def from_dict(data: dict[str, Any]) -> FlagRule:
        """Return FlagRule object from a report rule entry."""
        return FlagRule(baseline=float(data["b"]), delta_c=float(data["delta_c"]))

    @property
    def as_dict(self) -> dict[str, float]:
        """Return FlagRule object in report notation."""
        return {"b": self.baseline, "delta_c": self.delta_c}

    def scaled(self, factor: float) -> FlagRule:
        """Return both thresholds multiplied by a positive factor."""
        return FlagRule(self.baseline * factor, self.delta_c * factor)


@dataclass
class ScoreComponents:
    """Object holding the per-step score components and the fused score."""

    t: int
    r_hat: float
    s_att: float
    e_rec: float
    i_iso: float
    fused: float = 0.0

    def __post_init__(self) -> None:
        """Validate the components."""
        if not all(math.isfinite(v) for v in self.as_tuple):
            raise ContractError("Score components must be finite", {"t": self.t})

    @property
    def as_tuple(self) -> tuple[float, float, float, float]:
        """Return the components in weight order."""
        return (self.r_hat, self.s_att, self.e_rec, self.i_iso)

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return ScoreComponents object in report notation."""
        return asdict(self)

    @staticmethod
    def from_dict(data: dict[str, Any]) -> ScoreComponents:
        """Return ScoreComponents object from a report entry."""
        return ScoreComponents(
            t=int(data["t"]),
            r_hat=float(data["r_hat"]),
            s_att=float(data["s_att"]),
            e_rec=float(data["e_rec"]),
            i_iso=float(data["i_iso"]),
            fused=float(data["fused"]),
        )


@dataclass
class MetaFeatureVector:
    """Object holding the horizon features collected at one time step."""

    da_preds: np.ndarray
    cnn_preds: np.ndarray
    iso_scores: np.ndarray

    def __post_init__(self) -> None:
        """Validate the feature lengths."""
        lengths = {len(self.da_preds), len(self.cnn_preds), len(self.iso_scores)}
        if len(lengths) != 1 or 0 in lengths:
            raise ContractError("Meta features must share one nonzero horizon length")

    @property
    def horizon(self) -> int:
        """Return the horizon H."""
        return len(self.da_preds)

    @property
    def as_array(self) -> np.ndarray:
        """Return the concatenated feature vector."""
        return np.concatenate([self.da_preds, self.cnn_preds, self.iso_scores])


@dataclass
class DetectionReport:
    """Object holding detection quality against ground truth."""

    flags: list[int]
    matched_events: list[int]
    matched_flags: list[int]
    n_events: int
    precision: float
    recall: float
    f1: float
    tolerance: int

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return DetectionReport object as dictionary."""
        return asdict(self)


@dataclass(frozen=True)
class SplitRanges:
    """Object holding contiguous half-open train/validation/test ranges."""

    train: tuple[int, int]
    val: tuple[int, int]
    test: tuple[int, int]

    @staticmethod
    def from_fractions(n: int, fractions: tuple[float, float, float]) -> SplitRanges:
        """Return contiguous ranges covering n samples in the given proportions."""
        if len(fractions) != 3 or any(f <= 0 for f in fractions):
            raise ConfigError("Split fractions must be three positive numbers")

        total = sum(fractions)
        train_end = int(round(n * fractions[0] / total))
        val_end = int(round(n * (fractions[0] + fractions[1]) / total))
        return SplitRanges(train=(0, train_end), val=(train_end, val_end), test=(val_end, n))

    @property
    def as_dict(self) -> dict[str, list[int]]:
        """Return SplitRanges object as dictionary."""
        return {
            "train": list(self.train),
            "val": list(self.val),
            "test": list(self.test),
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> SplitRanges:
        """Return SplitRanges object from a mapping."""
        return SplitRanges(
            train=(int(data["train"][0]), int(data["train"][1])),
            val=(int(data["val"][0]), int(data["val"][1])),
            test=(int(data["test"][0]), int(data["test"][1])),
        )


@dataclass
class ChannelStats:
    """Object holding per-channel z-score statistics."""

    mean: np.ndarray
    std: np.ndarray

    def transform(self, values: np.ndarray) -> np.ndarray:
        """Return standardized values."""
        return (values - self.mean) / self.std

    def inverse_transform(self, values: np.ndarray) -> np.ndarray:
        """Return values mapped back to raw units."""
        return values * self.std + self.mean

    @property
    def as_dict(self) -> dict[str, list[float]]:
        """Return ChannelStats object as dictionary."""
        return {"mean": self.mean.tolist(), "std": self.std.tolist()}

    @staticmethod
    def from_dict(data: dict[str, Any]) -> ChannelStats:
        """Return ChannelStats object from a mapping."""
        return ChannelStats(
            mean=np.asarray(data["mean"], dtype=np.float64),
            std=np.asarray(data["std"], dtype=np.float64),
        )


@dataclass
class Dataset:
    """Object holding drivers, target, splits and training-range statistics."""

    times: np.ndarray
    X: np.ndarray  # noqa: N815
    Y: np.ndarray  # noqa: N815
    splits: SplitRanges
    driver_names: list[str]
    target_name: str = "P"
    x_stats: ChannelStats | None = None
    y_stats: ChannelStats | None = None

    def __len__(self) -> int:
        """Return the number of samples N."""
        return len(self.Y)

    @property
    def n_drivers(self) -> int:
        """Return the driver dimension D."""
        return int(self.X.shape[1])


@dataclass
class WindowedSet:
    """Object holding sliding windows for one-step forecasting."""

    drivers: np.ndarray
    y_hist: np.ndarray
    labels: np.ndarray
    index: np.ndarray

    def __len__(self) -> int:
        """Return the number of windows."""
        return len(self.labels)

    @property
    def window(self) -> int:
        """Return the window length T."""
        return int(self.y_hist.shape[1])

    def subset(self, rows: np.ndarray | slice) -> WindowedSet:
        """Return the windows selected by rows."""
        return WindowedSet(
            drivers=self.drivers[rows],
            y_hist=self.y_hist[rows],
            labels=self.labels[rows],
            index=self.index[rows],
        )


@dataclass
class ForecasterConfig:
    """Object holding forecaster hyper-parameters."""

    encoder_hidden: int = 32
    decoder_hidden: int = 32
    kernel_width: int = 3
    filters: int = 16
    hidden: int = 32


@dataclass
class VaeConfig:
    """Object holding VAE hyper-parameters."""

    hidden: int = 32
    latent: int = 4


@dataclass
class ForestConfig:
    """Object holding isolation forest hyper-parameters."""

    n_trees: int = 100
    subsample: int = 256
    contamination: float = 0.05


@dataclass
class FusionConfig:
    """Object holding fusion search settings."""

    horizon: int = 5
    weight_levels: list[float] = field(default_factory=list)
    baseline_quantiles: list[float] = field(default_factory=list)
    delta_scales: list[float] = field(default_factory=list)


@dataclass
class ExperimentConfig:
    """Object holding a full experiment configuration."""

    seed: int
    sim: SimConfig
    window: int
    epochs: int
    batch_size: int
    learning_rate: float
    split: tuple[float, float, float]
    tolerance: int
    darnn: ForecasterConfig
    cnnlstm: ForecasterConfig
    vae: VaeConfig
    iforest: ForestConfig
    fusion: FusionConfig

    @staticmethod
    def from_dict(data: dict[str, Any]) -> ExperimentConfig:
        """Return ExperimentConfig object from a (partial) configuration mapping."""
        merged = merge_defaults(DEFAULT_EXPERIMENT_CONFIG, data)
        config = ExperimentConfig(
            seed=int(merged["seed"]),
            sim=SimConfig.from_dict(merged["sim"]),
            window=int(merged["window"]),
            epochs=int(merged["epochs"]),
            batch_size=int(merged["batch_size"]),
            learning_rate=float(merged["learning_rate"]),
            split=tuple(float(f) for f in merged["split"]),  # type: ignore[arg-type]
            tolerance=int(merged["tolerance"]),
            darnn=ForecasterConfig(**merged["darnn"]),
            cnnlstm=ForecasterConfig(**merged["cnnlstm"]),
            vae=VaeConfig(**merged["vae"]),
            iforest=ForestConfig(**merged["iforest"]),
            fusion=FusionConfig(**merged["fusion"]),
        )
        config.validate()
        return config

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return ExperimentConfig object as dictionary."""
        data = asdict(self)
        data["sim"] = self.sim.as_dict
        data["split"] = list(self.split)
        return data

    def validate(self) -> None:
        """Raise ConfigError when the configuration is unusable."""
        self.sim.validate()

        if self.window < 1 or self.epochs < 1 or self.batch_size < 1:
            raise ConfigError("window, epochs and batch_size must be >= 1")

        if self.fusion.horizon < 1:
            raise ConfigError("Fusion horizon must be >= 1")

        if self.tolerance < 0:
            raise ConfigError("Match tolerance must be nonnegative")


@dataclass
class AnomalyReport:
    """Object holding scored components, fused scores and flags of one range."""

    flags: list[int]
    scores: list[float]
    components: list[ScoreComponents]
    weights: FusionWeights
    rule: FlagRule

    @property
    def as_dict(self) -> dict[str, Any]:
        """Return AnomalyReport object in report notation."""
        return {
            "flags": list(self.flags),
            "scores": list(self.scores),
            "components": [c.as_dict for c in self.components],
            "weights": self.weights.as_dict,
            "rule": self.rule.as_dict,
        }

    @staticmethod
    def from_dict(data: dict[str, Any]) -> AnomalyReport:
        """Return AnomalyReport object from a report document."""
        return AnomalyReport(
            flags=[int(f) for f in data["flags"]],
            scores=[float(s) for s in data["scores"]],
            components=[ScoreComponents.from_dict(c) for c in data["components"]],
            weights=FusionWeights.from_dict(data["weights"]),
            rule=FlagRule.from_dict(data["rule"]),
        )

    @property
    def time_range(self) -> tuple[int, int]:
        """Return the first and last scored time index."""
        if not self.components:
            return (0, -1)
        return (self.components[0].t, self.components[-1].t)
