"""Tests for the convolution-then-recurrence forecaster."""
from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from pyanomaly.cnnlstm import (
    CnnLstmModel,
    cnnlstm_forward,
    cnnlstm_loss,
    cnnlstm_train,
    stack_inputs,
)
from pyanomaly.exceptions import ShapeError
from pyanomaly.models import WindowedSet
from pyanomaly.tensor import Tensor

from . import GRADIENT_TOLERANCE, gradient_error, make_windowed


def test_stack_inputs() -> None:
    """Test the target history becomes the last channel."""
    drivers = np.zeros((2, 3, 2))
    y_hist = np.arange(6.0).reshape(2, 3)

    stacked = stack_inputs(drivers, y_hist)

    assert stacked.shape == (2, 3, 3)
    assert np.array_equal(stacked[..., -1], y_hist)


def test_forward_shapes() -> None:
    """Test feature and prediction shapes."""
    windows = make_windowed(n_windows=5, window=4, n_drivers=2)
    model = CnnLstmModel(4, 3, 3, 6, 5, seed=1)
    inputs = stack_inputs(windows.drivers, windows.y_hist)

    assert model.features(inputs).shape == (5, 4, 6)
    assert model.predict_batch(windows.drivers, windows.y_hist).shape == (5,)
    assert cnnlstm_forward(inputs[2], model) == pytest.approx(
        model.forward_batch(inputs).numpy()[2],
        rel=1e-12,
    )


def test_shape_errors() -> None:
    """Test mismatched inputs raise ShapeError."""
    model = CnnLstmModel(4, 3, 3, 2, 2)

    with pytest.raises(ShapeError):
        model.forward_batch(np.zeros((1, 4, 2)))

    with pytest.raises(ShapeError):
        cnnlstm_forward(np.zeros(4), model)

    with pytest.raises(ShapeError):
        CnnLstmModel(4, 3, 2, 2, 2)


def test_zero_parameters_predict_zero() -> None:
    """Test an all-zero model predicts exactly zero."""
    windows = make_windowed(n_windows=4, window=5, n_drivers=2, seed=3)
    model = CnnLstmModel(5, 3, 3, 4, 3, seed=3)
    model.load_state_dict({name: np.zeros_like(value) for name, value in model.state_dict().items()})

    assert np.array_equal(model.predict_batch(windows.drivers, windows.y_hist), np.zeros(4))


def test_head_bias_passes_through_idle_recurrence() -> None:
    """Test zero weights with a head bias predict exactly that bias."""
    windows = make_windowed(n_windows=4, window=5, n_drivers=2, seed=4)
    model = CnnLstmModel(5, 3, 3, 4, 3, seed=4)
    state = {name: np.zeros_like(value) for name, value in model.state_dict().items()}
    state["head.bias"] = np.array([0.75])
    model.load_state_dict(state)

    assert np.array_equal(model.predict_batch(windows.drivers, windows.y_hist), np.full(4, 0.75))


@pytest.mark.parametrize(("step", "reach"), [(3, [2, 3, 4]), (0, [0, 1]), (6, [5, 6])])
def test_features_are_local(step: int, reach: list[int]) -> None:
    """Test changing one input step only moves features within the kernel radius."""
    model = CnnLstmModel(7, 2, 3, 4, 3, seed=5)
    inputs = np.random.default_rng(5).normal(size=(1, 7, 2))
    moved = inputs.copy()
    moved[0, step, :] += 1.0

    before = model.features(inputs).numpy()[0]
    after = model.features(moved).numpy()[0]

    untouched = [t for t in range(7) if t not in reach]
    assert np.array_equal(before[untouched], after[untouched])
    assert not np.allclose(before[step], after[step])


def test_cnnlstm_gradients() -> None:
    """Test end-to-end gradients against finite differences."""
    windows = make_windowed(n_windows=3, window=4, n_drivers=2, seed=2)
    model = CnnLstmModel(4, 3, 3, 3, 3, seed=2)
    rng = np.random.default_rng(2)
    for name, param in model.parameters().items():
        if name.endswith("bias") or ".b_" in name:
            param.data = rng.normal(scale=0.3, size=param.shape)

    batch = (windows.drivers, windows.y_hist, windows.labels)

    def loss() -> Tensor:
        return cnnlstm_loss(model, batch)["loss"]

    assert gradient_error(loss, model.parameters(), seed=2) < GRADIENT_TOLERANCE


def test_cnnlstm_train() -> None:
    """Test training history and the fitted flag."""
    windows = make_windowed(n_windows=10, window=4, n_drivers=2)
    model, history = cnnlstm_train(windows, 2, 4, CnnLstmModel(4, 3, 3, 3, 3), seed=0)

    assert model.fitted
    assert len(history.losses) == 2
    assert all(math.isfinite(loss) for loss in history.losses)


def test_save_load(tmp_path: Path) -> None:
    """Test a reloaded model predicts identically."""
    windows = make_windowed(n_windows=4, window=5, n_drivers=1)
    model = CnnLstmModel(5, 2, 5, 4, 3, seed=8)

    loaded = CnnLstmModel.load(model.save(tmp_path / "cnnlstm.bin"))

    assert loaded.metadata == model.metadata
    assert np.array_equal(
        loaded.predict_batch(windows.drivers, windows.y_hist),
        model.predict_batch(windows.drivers, windows.y_hist),
    )


def decaying_segments(count: int, seed: int) -> WindowedSet:
    """Return noiseless y_k = y0 * 0.9^k segments with y0 uniform in [-1, 1]."""
    start = np.random.default_rng(seed).uniform(-1.0, 1.0, size=(count, 1))
    series = start * 0.9 ** np.arange(6)
    return WindowedSet(
        drivers=np.zeros((count, 5, 1)),
        y_hist=series[:, :5],
        labels=series[:, 5],
        index=np.arange(count),
    )


@pytest.mark.slow
def test_cnnlstm_learns_decay() -> None:
    """Test the held-out error on a first-order decay falls below 0.05."""
    train_set = decaying_segments(256, seed=20)
    held_out = decaying_segments(64, seed=21)
    model = CnnLstmModel(5, 2, 3, 4, 8, seed=0)

    model, _ = cnnlstm_train(train_set, 150, 32, model, seed=0, learning_rate=0.01)
    model, _ = cnnlstm_train(train_set, 100, 32, model, seed=1, learning_rate=0.002)

    predictions = model.predict_batch(held_out.drivers, held_out.y_hist)
    rmse = math.sqrt(float(np.mean((predictions - held_out.labels) ** 2)))

    assert rmse < 0.05
