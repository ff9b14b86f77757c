"""Mini-batch training loop shared by every neural model."""
from __future__ import annotations

import logging
import math
from collections.abc import Callable, Sequence
from dataclasses import dataclass, field

import numpy as np

from .const import DEFAULT_LEARNING_RATE
from .exceptions import ConfigError, DataError, DivergenceError
from .layers import Module
from .optim import Adam
from .tensor import Tensor, backward

_LOGGER = logging.getLogger(__name__)

LossFn = Callable[[tuple[np.ndarray, ...], np.random.Generator], dict[str, Tensor]]


@dataclass
class TrainingHistory:
    """Object holding per-epoch mean loss terms."""

    terms: dict[str, list[float]] = field(default_factory=dict)

    @property
    def losses(self) -> list[float]:
        """Return the per-epoch mean of the optimized loss."""
        return self.terms.get("loss", [])

    @property
    def as_dict(self) -> dict[str, list[float]]:
        """Return TrainingHistory object as dictionary."""
        return {name: list(values) for name, values in self.terms.items()}


def train(  # noqa: PLR0913
    model: Module,
    arrays: Sequence[np.ndarray],
    loss_fn: LossFn,
    *,
    epochs: int,
    batch_size: int,
    seed: int,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    name: str = "model",
) -> TrainingHistory:
    """Minimize loss_fn over shuffled mini-batches of arrays.

    loss_fn receives the batch arrays and the training generator (for
    sampling noise) and returns named scalar terms; "loss" is optimized.
    The generator seeded by seed drives both the shuffle schedule and the
    noise stream, so training is deterministic given seed.
    """
    if not arrays or len(arrays[0]) == 0:
        raise DataError(f"Cannot train {name} on an empty dataset")  # noqa: EM102

    if epochs < 1 or batch_size < 1:
        raise ConfigError("epochs and batch size must be >= 1")

    n_rows = len(arrays[0])
    if any(len(a) != n_rows for a in arrays):
        raise DataError("Training arrays must share their first dimension")

    rng = np.random.default_rng(seed)
    optimizer = Adam(model.parameters(), learning_rate=learning_rate)
    history = TrainingHistory()

    for epoch in range(1, epochs + 1):
        order = rng.permutation(n_rows)
        sums: dict[str, float] = {}

        for start in range(0, n_rows, batch_size):
            rows = order[start : start + batch_size]
            batch = tuple(a[rows] for a in arrays)

            try:
                terms = loss_fn(batch, rng)
                loss = terms["loss"]
                if not math.isfinite(loss.item()):
                    raise DivergenceError("Non-finite loss")
                optimizer.zero_grad()
                backward(loss)
                optimizer.step()
            except DivergenceError as exc:
                raise DivergenceError(
                    f"Training {name} diverged in epoch {epoch}: {exc}",  # noqa: EM102
                    epoch=epoch,
                ) from exc

            for term, value in terms.items():
                sums[term] = sums.get(term, 0.0) + value.item() * len(rows)

        for term, total in sums.items():
            history.terms.setdefault(term, []).append(total / n_rows)

        _LOGGER.info(
            "%s epoch %s/%s loss %.6f",
            name,
            epoch,
            epochs,
            history.terms["loss"][-1],
        )

    return history
