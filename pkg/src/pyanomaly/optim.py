"""Adaptive moment estimation optimizer."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .const import DEFAULT_BETAS, DEFAULT_EPSILON, DEFAULT_LEARNING_RATE
from .exceptions import ShapeError, TrainingError
from .tensor import Tensor

_LOGGER = logging.getLogger(__name__)


@dataclass
class OptimizerState:
    """Object holding Adam moments and settings."""

    learning_rate: float = DEFAULT_LEARNING_RATE
    beta1: float = DEFAULT_BETAS[0]
    beta2: float = DEFAULT_BETAS[1]
    epsilon: float = DEFAULT_EPSILON
    step: int = 0
    first_moment: dict[str, np.ndarray] = field(default_factory=dict)
    second_moment: dict[str, np.ndarray] = field(default_factory=dict)


def adam_update(
    params: dict[str, Tensor],
    grads: dict[str, np.ndarray],
    state: OptimizerState,
) -> None:
    """Apply one bias-corrected Adam step to params in place of their values."""
    for name, grad in grads.items():
        if not np.all(np.isfinite(grad)):
            raise TrainingError(f"Non-finite gradient for parameter {name}")  # noqa: EM102
        if grad.shape != params[name].shape:
            raise ShapeError(
                f"Gradient for {name} has shape {grad.shape}, "  # noqa: EM102
                f"parameter has {params[name].shape}",
            )

    state.step += 1
    correction1 = 1.0 - state.beta1**state.step
    correction2 = 1.0 - state.beta2**state.step

    for name, param in params.items():
        grad = grads.get(name)
        if grad is None:
            grad = np.zeros_like(param.data)

        m = state.first_moment.get(name)
        v = state.second_moment.get(name)
        if m is None or v is None:
            m = np.zeros_like(param.data)
            v = np.zeros_like(param.data)

        m = state.beta1 * m + (1.0 - state.beta1) * grad
        v = state.beta2 * v + (1.0 - state.beta2) * grad * grad
        state.first_moment[name] = m
        state.second_moment[name] = v

        m_hat = m / correction1
        v_hat = v / correction2
        param.data = param.data - state.learning_rate * m_hat / (np.sqrt(v_hat) + state.epsilon)


class Adam:
    """Adam over a fixed set of named parameters."""

    def __init__(
        self,
        params: dict[str, Tensor],
        learning_rate: float = DEFAULT_LEARNING_RATE,
    ) -> None:
        """Initialize fresh moments."""
        self.params = params
        self.state = OptimizerState(learning_rate=learning_rate)

    def zero_grad(self) -> None:
        """Drop gradients left by a previous backward pass."""
        for param in self.params.values():
            param.grad = None

    def step(self) -> None:
        """Update every parameter from its populated .grad."""
        grads = {
            name: param.grad if param.grad is not None else np.zeros_like(param.data)
            for name, param in self.params.items()
        }
        adam_update(self.params, grads, self.state)
