"""Tests for the variational autoencoder."""
from __future__ import annotations

from pathlib import Path

import numpy as np
import pytest

from pyanomaly.exceptions import DataError, ModelStateError, ShapeError
from pyanomaly.tensor import Tensor
from pyanomaly.vae import (
    VaeModel,
    kl_divergence,
    vae_loss,
    vae_score,
    vae_score_batch,
    vae_train,
)

from . import GRADIENT_TOLERANCE, gradient_error


def test_kl_divergence_values() -> None:
    """Test KL at the prior and for a shifted mean."""
    assert kl_divergence(Tensor(np.zeros((3, 2))), Tensor(np.zeros((3, 2)))).item() == 0.0
    assert kl_divergence(Tensor(np.ones((1, 1))), Tensor(np.zeros((1, 1)))).item() == 0.5


def test_kl_divergence_nonnegative() -> None:
    """Test KL is nonnegative for random posteriors."""
    rng = np.random.default_rng(0)

    for _ in range(20):
        mu = Tensor(rng.normal(size=(4, 3)))
        logsig = Tensor(rng.normal(size=(4, 3)))
        assert kl_divergence(mu, logsig).item() >= 0.0


def test_vae_loss_terms() -> None:
    """Test the loss is the sum of its reconstruction and KL terms."""
    model = VaeModel(5, 4, 2, seed=0)
    x = np.random.default_rng(1).normal(size=(3, 5))

    loss, recon, kl = vae_loss(x, model, np.random.default_rng(2))

    assert loss.item() == pytest.approx(recon.item() + kl.item(), rel=1e-12)
    assert recon.item() >= 0.0
    assert kl.item() >= 0.0


def test_vae_gradients() -> None:
    """Test gradients with frozen noise against finite differences."""
    rng = np.random.default_rng(3)
    model = VaeModel(4, 3, 2, seed=3)
    for name, param in model.parameters().items():
        if name.endswith("bias"):
            param.data = rng.normal(scale=0.3, size=param.shape)
    x = rng.normal(size=(3, 4))
    eps = rng.standard_normal((3, 2))

    def loss() -> Tensor:
        return vae_loss(x, model, rng, eps=eps)[0]

    assert gradient_error(loss, model.parameters(), seed=3) < GRADIENT_TOLERANCE


def test_vae_train_history() -> None:
    """Test training records loss, recon and kl for every epoch."""
    windows = np.random.default_rng(4).normal(size=(12, 4))
    model, history = vae_train(windows, 2, 5, VaeModel(4, 3, 2), seed=0)

    assert model.fitted
    assert set(history.as_dict) == {"loss", "recon", "kl"}
    assert all(len(values) == 2 for values in history.terms.values())
    assert all(kl >= 0 for kl in history.terms["kl"])


def test_vae_train_empty() -> None:
    """Test training on no windows raises DataError."""
    with pytest.raises(DataError):
        vae_train(np.zeros((0, 4)), 1, 4, VaeModel(4, 3, 2))


def test_vae_score() -> None:
    """Test scoring requires a fitted model and is deterministic."""
    windows = np.random.default_rng(5).normal(size=(6, 4))
    model = VaeModel(4, 3, 2)

    with pytest.raises(ModelStateError):
        vae_score_batch(windows, model)

    model, _ = vae_train(windows, 1, 6, model, seed=0)
    scores = vae_score_batch(windows, model)

    assert scores.shape == (6,)
    assert np.all(scores >= 0)
    assert vae_score(windows[2], model) == pytest.approx(scores[2], rel=1e-12)
    assert np.array_equal(vae_score_batch(windows, model), scores)

    with pytest.raises(ShapeError):
        vae_score(np.zeros(5), model)


def test_save_load(tmp_path: Path) -> None:
    """Test a reloaded model scores identically."""
    windows = np.random.default_rng(6).normal(size=(4, 4))
    model, _ = vae_train(windows, 1, 4, VaeModel(4, 3, 2), seed=1)

    loaded = VaeModel.load(model.save(tmp_path / "vae.bin"))

    assert np.array_equal(vae_score_batch(windows, loaded), vae_score_batch(windows, model))


def sine_windows(count: int, window: int, seed: int) -> np.ndarray:
    """Return count sine windows of period 20 steps with random phases."""
    phases = np.random.default_rng(seed).uniform(0.0, 2.0 * np.pi, size=(count, 1))
    steps = np.arange(window)[np.newaxis]
    return np.sin(2.0 * np.pi * steps / 20.0 + phases)


@pytest.mark.slow
def test_vae_scores_spikes_above_clean_windows() -> None:
    """Test a five sigma spike at any position raises the reconstruction error."""
    train_windows = sine_windows(400, 10, seed=11)
    model, _ = vae_train(
        train_windows, 30, 32, VaeModel(10, 16, 2, seed=0), seed=0, learning_rate=0.01,
    )

    clean = sine_windows(20, 10, seed=12)
    spike = 5.0 * train_windows.std()
    spiked = np.repeat(clean, 10, axis=0)
    spiked[np.arange(len(spiked)), np.tile(np.arange(10), len(clean))] += spike

    clean_scores = np.repeat(vae_score_batch(clean, model), 10)
    spiked_scores = vae_score_batch(spiked, model)

    assert np.mean(spiked_scores > clean_scores) >= 0.95
    assert spiked_scores.mean() > 2.0 * clean_scores.mean()
