"""Dual-stage attention recurrent forecaster."""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Any

import numpy as np

from . import tensor as tn
from .const import DEFAULT_DECODER_HIDDEN, DEFAULT_ENCODER_HIDDEN, DEFAULT_LEARNING_RATE
from .enums import ModelName
from .exceptions import ContractError, ShapeError
from .layers import AdditiveAttention, Dense, LSTMCell, PersistentModel
from .models import WindowedSet
from .tensor import Tensor
from .trainer import TrainingHistory, train

_LOGGER = logging.getLogger(__name__)


@dataclass
class DarnnOutput:
    """Object holding one forecast and its attention maps."""

    prediction: float
    input_attention: np.ndarray
    temporal_attention: np.ndarray


class DarnnModel(PersistentModel):
    """Encoder with input attention over driving series, decoder with
    temporal attention over encoder hidden states.
    """

    model_name = ModelName.DARNN

    def __init__(  # noqa: PLR0913
        self,
        window: int,
        n_drivers: int,
        encoder_hidden: int = DEFAULT_ENCODER_HIDDEN,
        decoder_hidden: int = DEFAULT_DECODER_HIDDEN,
        seed: int = 0,
    ) -> None:
        """Initialize parameters from seed."""
        super().__init__()
        rng = np.random.default_rng(seed)
        m, p = encoder_hidden, decoder_hidden

        self.window = window
        self.n_drivers = n_drivers
        self.encoder_hidden = m
        self.decoder_hidden = p

        self.input_attention = self.add_module(
            "input_attention",
            AdditiveAttention(2 * m, window, window, rng),
        )
        self.encoder = self.add_module("encoder", LSTMCell(n_drivers, m, rng))
        self.temporal_attention = self.add_module(
            "temporal_attention",
            AdditiveAttention(2 * p, m, m, rng),
        )
        self.decoder_input = self.add_module("decoder_input", Dense(m + 1, 1, rng))
        self.decoder = self.add_module("decoder", LSTMCell(1, p, rng))
        self.output_hidden = self.add_module("output_hidden", Dense(p + m, p, rng))
        self.output = self.add_module("output", Dense(p, 1, rng))

    @property
    def metadata(self) -> dict[str, Any]:
        """Return the hyper-parameters needed to rebuild the model."""
        return {
            "window": self.window,
            "n_drivers": self.n_drivers,
            "encoder_hidden": self.encoder_hidden,
            "decoder_hidden": self.decoder_hidden,
        }

    @classmethod
    def from_metadata(cls, metadata: dict[str, Any]) -> DarnnModel:
        """Return an untrained model built from persisted hyper-parameters."""
        return cls(
            window=int(metadata["window"]),
            n_drivers=int(metadata["n_drivers"]),
            encoder_hidden=int(metadata["encoder_hidden"]),
            decoder_hidden=int(metadata["decoder_hidden"]),
        )

    def _check(self, drivers: np.ndarray, y_hist: np.ndarray) -> None:
        batch = drivers.shape[0]
        if drivers.shape[1:] != (self.window, self.n_drivers) or y_hist.shape != (
            batch,
            self.window,
        ):
            raise ShapeError(
                f"DA-RNN expects drivers [B, {self.window}, {self.n_drivers}] and "  # noqa: EM102
                f"history [B, {self.window}], got {drivers.shape} and {y_hist.shape}",
            )

    def forward_batch(
        self,
        drivers: np.ndarray,
        y_hist: np.ndarray,
    ) -> tuple[Tensor, Tensor, Tensor]:
        """Return predictions [B], input attention [B, T, D], temporal attention [B, T]."""
        drivers = np.asarray(drivers, dtype=np.float64)
        y_hist = np.asarray(y_hist, dtype=np.float64)
        self._check(drivers, y_hist)
        batch = drivers.shape[0]

        # input attention keys: each driving series over the window, [B, D, T]
        series_keys = self.input_attention.project_keys(
            Tensor(np.swapaxes(drivers, 1, 2)),
        )
        h, s = self.encoder.zero_state(batch)
        hidden_states = []
        input_weights = []
        for step in range(self.window):
            alpha = self.input_attention(tn.concat([h, s], axis=-1), series_keys)
            weighted = alpha * Tensor(drivers[:, step, :])
            h, s = self.encoder(weighted, h, s)
            hidden_states.append(h)
            input_weights.append(alpha)

        encoded = tn.stack(hidden_states, axis=1)
        encoded_keys = self.temporal_attention.project_keys(encoded)

        d, sd = self.decoder.zero_state(batch)
        for step in range(self.window):
            context = self._context(d, sd, encoded, encoded_keys)[0]
            y_step = Tensor(y_hist[:, step : step + 1])
            y_tilde = self.decoder_input(tn.concat([y_step, context], axis=-1))
            d, sd = self.decoder(y_tilde, d, sd)

        context, beta = self._context(d, sd, encoded, encoded_keys)
        hidden = self.output_hidden(tn.concat([d, context], axis=-1))
        prediction = tn.reshape(self.output(hidden), (batch,))

        return prediction, tn.stack(input_weights, axis=1), beta

    def _context(
        self,
        d: Tensor,
        sd: Tensor,
        encoded: Tensor,
        encoded_keys: Tensor,
    ) -> tuple[Tensor, Tensor]:
        batch = d.shape[0]
        beta = self.temporal_attention(tn.concat([d, sd], axis=-1), encoded_keys)
        weights = tn.reshape(beta, (batch, 1, self.window))
        context = tn.reshape(tn.matmul(weights, encoded), (batch, self.encoder_hidden))
        return context, beta

    def predict_batch(self, drivers: np.ndarray, y_hist: np.ndarray) -> np.ndarray:
        """Return one-step predictions [B]."""
        return self.forward_batch(drivers, y_hist)[0].numpy()

    def infer_batch(
        self,
        drivers: np.ndarray,
        y_hist: np.ndarray,
    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Return predictions with input and temporal attention maps."""
        prediction, alpha, beta = self.forward_batch(drivers, y_hist)
        return prediction.numpy(), alpha.numpy(), beta.numpy()


def darnn_forward(window: np.ndarray, y_hist: np.ndarray, model: DarnnModel) -> DarnnOutput:
    """Return the one-step forecast for a single [T, D] window."""
    window = np.asarray(window, dtype=np.float64)
    y_hist = np.asarray(y_hist, dtype=np.float64)
    if window.ndim != 2 or y_hist.ndim != 1:
        raise ShapeError(
            f"Expected a [T, D] window and [T] history, got {window.shape} and {y_hist.shape}",  # noqa: EM102
        )

    prediction, alpha, beta = model.infer_batch(window[np.newaxis], y_hist[np.newaxis])
    return DarnnOutput(
        prediction=float(prediction[0]),
        input_attention=alpha[0],
        temporal_attention=beta[0],
    )


def darnn_loss(model: DarnnModel, batch: tuple[np.ndarray, ...]) -> dict[str, Tensor]:
    """Return the mean squared one-step forecast error of a batch."""
    drivers, y_hist, labels = batch
    prediction = model.forward_batch(drivers, y_hist)[0]
    return {"loss": tn.mse(prediction, Tensor(labels))}


def darnn_train(  # noqa: PLR0913
    dataset: WindowedSet,
    epochs: int,
    batch_size: int,
    model: DarnnModel,
    *,
    seed: int = 0,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> tuple[DarnnModel, TrainingHistory]:
    """Fit the model to windowed pairs; return it with its loss history."""
    history = train(
        model,
        (dataset.drivers, dataset.y_hist, dataset.labels),
        lambda batch, _rng: darnn_loss(model, batch),
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
        learning_rate=learning_rate,
        name=ModelName.DARNN.value,
    )
    model.fitted = True
    return model, history


def attention_sparsity(temporal_weights: np.ndarray) -> float:
    """Return 1 - H(w) / ln(T), the normalized-entropy complement of w.

    0 for uniform weights, 1 for one-hot weights; 0 when T == 1.
    """
    weights = np.asarray(temporal_weights, dtype=np.float64).reshape(-1)
    if weights.size == 0:
        raise ContractError("Attention weights must be nonempty")

    if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-6:
        raise ContractError(
            "Attention weights must be a simplex vector",
            {"sum": float(weights.sum()), "min": float(weights.min())},
        )

    if weights.size == 1:
        return 0.0

    nonzero = weights[weights > 0]
    entropy = float(-np.sum(nonzero * np.log(nonzero)))
    return min(1.0, max(0.0, 1.0 - entropy / math.log(weights.size)))


def attention_sparsity_batch(temporal_weights: np.ndarray) -> np.ndarray:
    """Return attention_sparsity for every row of [B, T] weights."""
    return np.asarray([attention_sparsity(row) for row in temporal_weights])
