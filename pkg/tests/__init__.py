"""Tests for pyanomaly."""
from __future__ import annotations

import os
from collections.abc import Callable
from typing import Any

import numpy as np

from pyanomaly.cnnlstm import CnnLstmModel, cnnlstm_train
from pyanomaly.darnn import DarnnModel, darnn_train
from pyanomaly.fusion import MetaModel
from pyanomaly.iforest import fit_standardizer, iforest_fit
from pyanomaly.models import Dataset, SplitRanges, WindowedSet
from pyanomaly.tensor import Tensor, backward
from pyanomaly.vae import VaeModel, vae_train

GRADIENT_EPS = 1e-5
GRADIENT_TOLERANCE = 1e-4

TINY_SIM_CONFIG: dict[str, Any] = {
    "t_end": 4.0,
    "t_ramp": 3.6,
    "pert_prob": 0.05,
}

TINY_EXPERIMENT_CONFIG: dict[str, Any] = {
    "seed": 42,
    "sim": TINY_SIM_CONFIG,
    "window": 4,
    "epochs": 2,
    "batch_size": 16,
    "darnn": {"encoder_hidden": 4, "decoder_hidden": 4},
    "cnnlstm": {"kernel_width": 3, "filters": 3, "hidden": 4},
    "vae": {"hidden": 4, "latent": 2},
    "iforest": {"n_trees": 10, "subsample": 32, "contamination": 0.05},
    "fusion": {
        "horizon": 2,
        "weight_levels": [0.0, 1.0],
        "baseline_quantiles": [0.5, 0.9],
        "delta_scales": [0.0, 0.5],
    },
}


def fixture_path(filename: str) -> str:
    """Return the path of a fixture."""
    return os.path.join(  # noqa: PTH118
        os.path.dirname(__file__),  # noqa: PTH120
        "fixtures",
        filename,
    )


def load_fixture(filename: str) -> str:
    """Load a fixture."""
    with open(fixture_path(filename), encoding="utf-8") as fptr:  # noqa: PTH123
        return fptr.read()


def load_fixture_binary(filename: str) -> bytes:
    """Load a binary fixture."""
    with open(fixture_path(filename), "rb") as fptr:  # noqa: PTH123
        return fptr.read()


def gradient_error(
    loss_fn: Callable[[], Tensor],
    params: dict[str, Tensor],
    points: int = 10,
    seed: int = 0,
) -> float:
    """Return the max relative error of backward against central differences.

    Up to points entries of every parameter are perturbed by GRADIENT_EPS;
    loss_fn must rebuild the graph from the current parameter values.
    """
    backward(loss_fn())
    analytic = {name: np.array(param.grad) for name, param in params.items()}

    rng = np.random.default_rng(seed)
    worst = 0.0
    for name, param in params.items():
        picks = rng.choice(param.data.size, size=min(points, param.data.size), replace=False)
        for flat in picks:
            idx = np.unravel_index(flat, param.data.shape)
            original = float(param.data[idx])

            param.data[idx] = original + GRADIENT_EPS
            upper = loss_fn().item()
            param.data[idx] = original - GRADIENT_EPS
            lower = loss_fn().item()
            param.data[idx] = original

            numeric = (upper - lower) / (2.0 * GRADIENT_EPS)
            exact = float(analytic[name][idx])
            scale = max(abs(numeric), abs(exact), 1e-3)
            worst = max(worst, abs(numeric - exact) / scale)

    return worst


def make_dataset(n: int = 120, n_drivers: int = 2, seed: int = 0) -> Dataset:
    """Return a standardized-scale dataset driven by noisy sinusoids."""
    rng = np.random.default_rng(seed)
    times = np.arange(n, dtype=np.float64)
    X = rng.normal(size=(n, n_drivers))
    Y = np.sin(times / 6.0) + 0.3 * X[:, 0] + 0.05 * rng.normal(size=n)

    return Dataset(
        times=times,
        X=X,
        Y=Y,
        splits=SplitRanges.from_fractions(n, (0.7, 0.15, 0.15)),
        driver_names=[f"u{k}" for k in range(n_drivers)],
    )


def make_windowed(
    n_windows: int = 6,
    window: int = 3,
    n_drivers: int = 2,
    seed: int = 0,
) -> WindowedSet:
    """Return random windows with random labels."""
    rng = np.random.default_rng(seed)
    return WindowedSet(
        drivers=rng.normal(size=(n_windows, window, n_drivers)),
        y_hist=rng.normal(size=(n_windows, window)),
        labels=rng.normal(size=n_windows),
        index=np.arange(window - 1, window - 1 + n_windows),
    )


def tiny_meta(windows: WindowedSet, seed: int = 0) -> MetaModel:
    """Return a MetaModel trained for one epoch on windows."""
    window = windows.window
    n_drivers = windows.drivers.shape[2]

    darnn, _ = darnn_train(windows, 1, 16, DarnnModel(window, n_drivers, 4, 4, seed=seed), seed=seed)
    cnnlstm, _ = cnnlstm_train(
        windows,
        1,
        16,
        CnnLstmModel(window, n_drivers + 1, 3, 3, 4, seed=seed),
        seed=seed,
    )
    vae, _ = vae_train(windows.y_hist, 1, 16, VaeModel(window, 4, 2, seed=seed), seed=seed)

    residuals = np.abs(windows.labels - darnn.predict_batch(windows.drivers, windows.y_hist))
    standardizer = fit_standardizer(residuals)
    forest = iforest_fit(
        standardizer.transform(residuals),
        n_trees=10,
        subsample=32,
        seed=seed,
        standardizer=standardizer,
    )
    ensemble = 0.5 * (
        darnn.predict_batch(windows.drivers, windows.y_hist)
        + cnnlstm.predict_batch(windows.drivers, windows.y_hist)
    )
    return MetaModel(
        darnn=darnn,
        cnnlstm=cnnlstm,
        vae=vae,
        forest=forest,
        residual_std=float(np.std(windows.labels - ensemble)),
    )
