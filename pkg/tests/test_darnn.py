"""Tests for the dual-stage attention forecaster."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from pyanomaly.cnnlstm import CnnLstmModel
from pyanomaly.darnn import (
    DarnnModel,
    attention_sparsity,
    attention_sparsity_batch,
    darnn_forward,
    darnn_loss,
    darnn_train,
)
from pyanomaly.exceptions import ContractError, ParseError, ShapeError
from pyanomaly.models import WindowedSet
from pyanomaly.tensor import Tensor

from . import GRADIENT_TOLERANCE, gradient_error, make_windowed


def test_forward_shapes_and_attention() -> None:
    """Test output shapes and that both attention maps are distributions."""
    windows = make_windowed(n_windows=5, window=4, n_drivers=3)
    model = DarnnModel(4, 3, 5, 6, seed=1)

    prediction, alpha, beta = model.infer_batch(windows.drivers, windows.y_hist)

    assert prediction.shape == (5,)
    assert alpha.shape == (5, 4, 3)
    assert beta.shape == (5, 4)
    assert np.all(alpha >= 0)
    assert np.all(beta >= 0)
    assert np.allclose(alpha.sum(axis=-1), 1.0, rtol=0, atol=1e-12)
    assert np.allclose(beta.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_single_driver_input_attention_is_one() -> None:
    """Test one driving series always receives the full input attention."""
    windows = make_windowed(n_windows=3, window=4, n_drivers=1, seed=5)
    model = DarnnModel(4, 1, 3, 3, seed=5)

    _, alpha, beta = model.infer_batch(windows.drivers, windows.y_hist)

    assert np.array_equal(alpha, np.ones((3, 4, 1)))
    assert np.allclose(beta.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_single_step_temporal_attention_is_one() -> None:
    """Test a one-step window always receives the full temporal attention."""
    windows = make_windowed(n_windows=3, window=1, n_drivers=2, seed=6)
    model = DarnnModel(1, 2, 3, 3, seed=6)

    prediction, alpha, beta = model.infer_batch(windows.drivers, windows.y_hist)

    assert prediction.shape == (3,)
    assert np.array_equal(beta, np.ones((3, 1)))
    assert np.allclose(alpha.sum(axis=-1), 1.0, rtol=0, atol=1e-12)


def test_darnn_forward_single_window() -> None:
    """Test the single-window forward matches the batched one."""
    windows = make_windowed(n_windows=3, window=4, n_drivers=2)
    model = DarnnModel(4, 2, 3, 3, seed=2)

    output = darnn_forward(windows.drivers[1], windows.y_hist[1], model)
    batched = model.predict_batch(windows.drivers, windows.y_hist)

    assert output.prediction == pytest.approx(batched[1], rel=1e-12)
    assert output.input_attention.shape == (4, 2)
    assert output.temporal_attention.shape == (4,)


def test_forward_shape_errors() -> None:
    """Test mismatched windows raise ShapeError."""
    model = DarnnModel(4, 2, 3, 3)

    with pytest.raises(ShapeError):
        model.predict_batch(np.zeros((1, 4, 3)), np.zeros((1, 4)))

    with pytest.raises(ShapeError):
        model.predict_batch(np.zeros((1, 4, 2)), np.zeros((1, 5)))

    with pytest.raises(ShapeError):
        darnn_forward(np.zeros(4), np.zeros(4), model)


def test_darnn_gradients() -> None:
    """Test end-to-end gradients against finite differences."""
    windows = make_windowed(n_windows=2, window=3, n_drivers=2, seed=4)
    model = DarnnModel(3, 2, 3, 3, seed=4)
    rng = np.random.default_rng(4)
    for name, param in model.parameters().items():
        if name.endswith("bias") or ".b_" in name:
            param.data = rng.normal(scale=0.3, size=param.shape)

    batch = (windows.drivers, windows.y_hist, windows.labels)

    def loss() -> Tensor:
        return darnn_loss(model, batch)["loss"]

    assert gradient_error(loss, model.parameters(), seed=4) < GRADIENT_TOLERANCE


def test_darnn_train_history() -> None:
    """Test training records one finite loss per epoch and marks the model fitted."""
    windows = make_windowed(n_windows=12, window=3, n_drivers=2)
    model, history = darnn_train(windows, 3, 5, DarnnModel(3, 2, 3, 3), seed=0)

    assert model.fitted
    assert len(history.losses) == 3
    assert all(math.isfinite(loss) for loss in history.losses)


def test_darnn_train_deterministic() -> None:
    """Test identical seeds give identical parameters."""
    windows = make_windowed(n_windows=10, window=3, n_drivers=2)
    first, _ = darnn_train(windows, 2, 4, DarnnModel(3, 2, 3, 3, seed=1), seed=7)
    second, _ = darnn_train(windows, 2, 4, DarnnModel(3, 2, 3, 3, seed=1), seed=7)

    for name, value in first.state_dict().items():
        assert np.array_equal(value, second.state_dict()[name])


def test_save_load(tmp_path: Path) -> None:
    """Test a reloaded model predicts identically."""
    windows = make_windowed(n_windows=4, window=3, n_drivers=2)
    model = DarnnModel(3, 2, 4, 5, seed=3)
    path = model.save(tmp_path / "darnn.bin")

    loaded = DarnnModel.load(path)

    assert loaded.fitted
    assert loaded.metadata == model.metadata
    assert np.array_equal(
        loaded.predict_batch(windows.drivers, windows.y_hist),
        model.predict_batch(windows.drivers, windows.y_hist),
    )


def test_load_wrong_model(tmp_path: Path) -> None:
    """Test loading another model's file raises ParseError."""
    path = CnnLstmModel(3, 3, 3, 2, 2).save(tmp_path / "cnnlstm.bin")

    with pytest.raises(ParseError):
        DarnnModel.load(path)


def test_attention_sparsity_extremes() -> None:
    """Test uniform weights score 0 and one-hot weights score 1."""
    assert attention_sparsity(np.full(8, 1 / 8)) == pytest.approx(0.0, abs=1e-12)
    assert attention_sparsity(np.array([0.0, 1.0, 0.0])) == 1.0
    assert attention_sparsity(np.array([1.0])) == 0.0


def test_attention_sparsity_range() -> None:
    """Test random distributions score within [0, 1]."""
    weights = np.random.default_rng(0).dirichlet(np.full(6, 0.5), size=50)
    scores = attention_sparsity_batch(weights)

    assert scores.shape == (50,)
    assert np.all((scores >= 0) & (scores <= 1))


@pytest.mark.parametrize(
    "weights",
    [
        np.array([]),
        np.array([0.5, 0.6]),
        np.array([1.5, -0.5]),
    ],
)
def test_attention_sparsity_errors(weights: np.ndarray) -> None:
    """Test invalid weight vectors raise ContractError."""
    with pytest.raises(ContractError):
        attention_sparsity(weights)


@pytest.mark.slow
def test_darnn_fits_constant_series() -> None:
    """Test training on a constant target drives the forecast to that constant."""
    level = 0.5
    windows = WindowedSet(
        drivers=np.zeros((32, 5, 2)),
        y_hist=np.full((32, 5), level),
        labels=np.full(32, level),
        index=np.arange(4, 36),
    )
    model = DarnnModel(5, 2, 8, 8, seed=3)

    model, coarse = darnn_train(windows, 200, 32, model, seed=0, learning_rate=0.01)
    model, fine = darnn_train(windows, 200, 32, model, seed=1, learning_rate=0.001)

    predictions = model.predict_batch(windows.drivers, windows.y_hist)

    assert fine.terms["loss"][-1] < coarse.terms["loss"][0]
    assert np.max(np.abs(predictions - level)) < 1e-2
