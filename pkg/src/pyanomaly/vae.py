"""Variational autoencoder over windows of the primary signal."""
from __future__ import annotations

import logging
from typing import Any

import numpy as np

from . import tensor as tn
from .const import DEFAULT_LATENT_DIM, DEFAULT_LEARNING_RATE, DEFAULT_VAE_HIDDEN
from .enums import ModelName
from .exceptions import DataError, ModelStateError, ShapeError
from .layers import Dense, PersistentModel
from .tensor import Tensor
from .trainer import TrainingHistory, train

_LOGGER = logging.getLogger(__name__)


class VaeModel(PersistentModel):
    """Single-hidden-layer tanh encoder and decoder with a Gaussian latent."""

    model_name = ModelName.VAE

    def __init__(
        self,
        window: int,
        hidden: int = DEFAULT_VAE_HIDDEN,
        latent: int = DEFAULT_LATENT_DIM,
        seed: int = 0,
    ) -> None:
        """Initialize parameters from seed."""
        super().__init__()
        rng = np.random.default_rng(seed)

        self.window = window
        self.hidden = hidden
        self.latent = latent

        self.encoder = self.add_module("encoder", Dense(window, hidden, rng))
        self.mu = self.add_module("mu", Dense(hidden, latent, rng))
        self.logsig = self.add_module("logsig", Dense(hidden, latent, rng))
        self.decoder_hidden = self.add_module("decoder_hidden", Dense(latent, hidden, rng))
        self.decoder_output = self.add_module("decoder_output", Dense(hidden, window, rng))

    @property
    def metadata(self) -> dict[str, Any]:
        """Return the hyper-parameters needed to rebuild the model."""
        return {"window": self.window, "hidden": self.hidden, "latent": self.latent}

    @classmethod
    def from_metadata(cls, metadata: dict[str, Any]) -> VaeModel:
        """Return an untrained model built from persisted hyper-parameters."""
        return cls(
            window=int(metadata["window"]),
            hidden=int(metadata["hidden"]),
            latent=int(metadata["latent"]),
        )

    def encode(self, x: Tensor) -> tuple[Tensor, Tensor]:
        """Return (mu, log sigma), each [B, L]."""
        hidden = tn.tanh(self.encoder(x))
        return self.mu(hidden), self.logsig(hidden)

    def decode(self, z: Tensor) -> Tensor:
        """Return the reconstruction [B, T]."""
        return self.decoder_output(tn.tanh(self.decoder_hidden(z)))


def _as_batch(x: np.ndarray, window: int) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1:
        x = x[np.newaxis]
    if x.ndim != 2 or x.shape[1] != window:
        raise ShapeError(f"VAE expects windows of length {window}, got {x.shape}")  # noqa: EM102
    return x


def kl_divergence(mu: Tensor, logsig: Tensor) -> Tensor:
    """Return KL(N(mu, sigma^2) || N(0, I)) summed over latents, averaged over the batch."""
    variance = tn.exp(tn.scale(logsig, 2.0))
    terms = tn.square(mu) + variance - 1.0 - tn.scale(logsig, 2.0)
    return tn.scale(tn.mean(tn.sum_(terms, axis=-1)), 0.5)


def vae_loss(
    x: np.ndarray,
    model: VaeModel,
    rng: np.random.Generator,
    eps: np.ndarray | None = None,
) -> tuple[Tensor, Tensor, Tensor]:
    """Return (loss, recon_term, kl_term) with one reparameterized sample per window.

    eps fixes the standard-normal noise; otherwise it is drawn from rng.
    """
    x = _as_batch(x, model.window)
    mu, logsig = model.encode(Tensor(x))

    if eps is None:
        eps = rng.standard_normal(mu.shape)
    z = mu + tn.exp(logsig) * Tensor(np.asarray(eps, dtype=np.float64))

    recon = tn.mse(model.decode(z), Tensor(x))
    kl = kl_divergence(mu, logsig)
    return recon + kl, recon, kl


def vae_train(  # noqa: PLR0913
    windows: np.ndarray,
    epochs: int,
    batch_size: int,
    model: VaeModel,
    *,
    seed: int = 0,
    learning_rate: float = DEFAULT_LEARNING_RATE,
) -> tuple[VaeModel, TrainingHistory]:
    """Fit the model to standardized windows; history carries loss, recon and kl."""
    windows = np.asarray(windows, dtype=np.float64)
    if windows.size == 0:
        raise DataError("Cannot train vae on an empty dataset")
    windows = _as_batch(windows, model.window)

    def loss_fn(batch: tuple[np.ndarray, ...], rng: np.random.Generator) -> dict[str, Tensor]:
        loss, recon, kl = vae_loss(batch[0], model, rng)
        return {"loss": loss, "recon": recon, "kl": kl}

    history = train(
        model,
        (windows,),
        loss_fn,
        epochs=epochs,
        batch_size=batch_size,
        seed=seed,
        learning_rate=learning_rate,
        name=ModelName.VAE.value,
    )
    model.fitted = True
    return model, history


def vae_score_batch(windows: np.ndarray, model: VaeModel) -> np.ndarray:
    """Return the mean-latent reconstruction error of every window."""
    if not model.fitted:
        raise ModelStateError("VAE has not been trained")

    x = _as_batch(windows, model.window)
    mu = model.encode(Tensor(x))[0]
    reconstruction = model.decode(mu).numpy()
    return np.mean((reconstruction - x) ** 2, axis=1)


def vae_score(x: np.ndarray, model: VaeModel) -> float:
    """Return E_t, the reconstruction error of one window decoded at z = mu."""
    return float(vae_score_batch(x, model)[0])
