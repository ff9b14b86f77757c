"""Convolution-then-recurrence forecaster."""
from __future__ import annotations

import logging
from typing import Any

import numpy as np

from . import tensor as tn
from .const import DEFAULT_FILTERS, DEFAULT_KERNEL_WIDTH, DEFAULT_LEARNING_RATE, DEFAULT_LSTM_HIDDEN
from .enums import ModelName
from .exceptions import ShapeError
from .layers import Conv1d, Dense, LSTMCell, PersistentModel
from .models import WindowedSet
from .tensor import Tensor
from .trainer import TrainingHistory, train

_LOGGER = logging.getLogger(__name__)


def stack_inputs(drivers: np.ndarray, y_hist: np.ndarray) -> np.ndarray:
    """Return drivers [B, T, D] with the target history appended as channel D."""
    drivers = np.asarray(drivers, dtype=np.float64)
    y_hist = np.asarray(y_hist, dtype=np.float64)
    return np.concatenate([drivers, y_hist[..., np.newaxis]], axis=-1)


class CnnLstmModel(PersistentModel):
    """Same-padded conv1d feature extractor feeding an LSTM and a dense head."""

    model_name = ModelName.CNNLSTM

    def __init__(  # noqa: PLR0913
        self,
        window: int,
        n_inputs: int,
        kernel_width: int = DEFAULT_KERNEL_WIDTH,
        filters: int = DEFAULT_FILTERS,
        hidden: int = DEFAULT_LSTM_HIDDEN,
        seed: int = 0,
    ) -> None:
        """Initialize parameters from seed."""
        super().__init__()
        rng = np.random.default_rng(seed)

        self.window = window
        self.n_inputs = n_inputs
        self.kernel_width = kernel_width
        self.filters = filters
        self.hidden = hidden

        self.conv = self.add_module("conv", Conv1d(n_inputs, filters, kernel_width, rng))
        self.lstm = self.add_module("lstm", LSTMCell(filters, hidden, rng))
        self.head = self.add_module("head", Dense(hidden, 1, rng))

    @property
    def metadata(self) -> dict[str, Any]:
        """Return the hyper-parameters needed to rebuild the model."""
        return {
            "window": self.window,
            "n_inputs": self.n_inputs,
            "kernel_width": self.kernel_width,
            "filters": self.filters,
            "hidden": self.hidden,
        }

    @classmethod
    def from_metadata(cls, metadata: dict[str, Any]) -> CnnLstmModel:
        """Return an untrained model built from persisted hyper-parameters."""
        return cls(
            window=int(metadata["window"]),
            n_inputs=int(metadata["n_inputs"]),
            kernel_width=int(metadata["kernel_width"]),
            filters=int(metadata["filters"]),
            hidden=int(metadata["hidden"]),
        )

    def features(self, inputs: np.ndarray) -> Tensor:
        """Return the conv feature sequence [B, T, F] before the recurrence."""
        inputs = np.asarray(inputs, dtype=np.float64)
        if inputs.ndim != 3 or inputs.shape[1:] != (self.window, self.n_inputs):
            raise ShapeError(
                f"CNN-LSTM expects inputs [B, {self.window}, {self.n_inputs}], got {inputs.shape}",  # noqa: EM102
            )
        return tn.tanh(self.conv(Tensor(inputs)))

    def forward_batch(self, inputs: np.ndarray) -> Tensor:
        """Return predictions [B] for inputs [B, T, D + 1]."""
        features = self.features(inputs)
        batch = features.shape[0]

        h, c = self.lstm.zero_state(batch)
        for step in range(self.window):
            h, c = self.lstm(features[:, step, :], h, c)

        return tn.reshape(self.head(h), (batch,))

    def predict_batch(self, drivers: np.ndarray, y_hist: np.ndarray) -> np.ndarray:
        """Return one-step predictions [B] from drivers and target history."""
        return self.forward_batch(stack_inputs(drivers, y_hist)).numpy()


def cnnlstm_forward(window: np.ndarray, model: CnnLstmModel) -> float:
    """Return the one-step forecast for a single [T, D + 1] window."""
    window = np.asarray(window, dtype=np.float64)
    if window.ndim != 2:
        raise ShapeError(f"Expected a [T, D + 1] window, got {window.shape}")  # noqa: EM102

    return float(model.forward_batch(window[np.newaxis]).numpy()[0])


def cnnlstm_loss(model: CnnLstmModel, batch: tuple[np.ndarray, ...]) -> dict[str, Tensor]:
    """Return the mean squared one-step forecast error of a batch."""
    drivers, y_hist, labels = batch
    prediction = model.forward_batch(stack_inputs(drivers, y_hist))
    return {"loss": tn.mse(prediction, Tensor(labels))}


def cnnlstm_train(  # noqa: PLR0913
    dataset: WindowedSet,
    epochs: int,
    batch_size: int,
    model: CnnLstmModel,
    *,
    seed: int = 0,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> tuple[CnnLstmModel, TrainingHistory]:
    """Fit the model to windowed pairs; return it with its loss history."""
    history = train(
        model,
        (dataset.drivers, dataset.y_hist, dataset.labels),
        lambda batch, _rng: cnnlstm_loss(model, batch),
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
        learning_rate=learning_rate,
        name=ModelName.CNNLSTM.value,
    )
    model.fitted = True
    return model, history
