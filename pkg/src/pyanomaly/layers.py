"""Neural building blocks on top of the autodiff tensors."""
from __future__ import annotations

import logging
import math
from collections.abc import Iterator
from pathlib import Path
from typing import Any, ClassVar, TypeVar

import numpy as np

from . import tensor as tn
from .enums import ModelName
from .exceptions import ParseError, ShapeError
from .parser import load_model_file
from .serializer import save_model
from .tensor import Tensor

_LOGGER = logging.getLogger(__name__)

_ModelT = TypeVar("_ModelT", bound="PersistentModel")


def glorot_uniform(
    rng: np.random.Generator,
    shape: tuple[int, ...],
    fan_in: int,
    fan_out: int,
) -> np.ndarray:
    """Return weights drawn uniformly from +-sqrt(6 / (fan_in + fan_out))."""
    limit = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=shape)


class Module:
    """Container of named parameters and child modules."""

    def __init__(self) -> None:
        """Initialize an empty container."""
        self._params: dict[str, Tensor] = {}
        self._modules: dict[str, Module] = {}

    def add_param(self, name: str, value: np.ndarray) -> Tensor:
        """Register a parameter leaf."""
        param = Tensor(value, name=name)
        self._params[name] = param
        return param

    def add_module(self, name: str, module: Module) -> Module:
        """Register a child module."""
        self._modules[name] = module
        return module

    def named_parameters(self, prefix: str = "") -> Iterator[tuple[str, Tensor]]:
        """Yield (dotted name, parameter) pairs in registration order."""
        for name, param in self._params.items():
            yield f"{prefix}{name}", param
        for name, module in self._modules.items():
            yield from module.named_parameters(f"{prefix}{name}.")

    def parameters(self) -> dict[str, Tensor]:
        """Return all parameters keyed by dotted name."""
        return dict(self.named_parameters())

    def state_dict(self) -> dict[str, np.ndarray]:
        """Return copies of all parameter values."""
        return {name: param.numpy() for name, param in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]) -> None:
        """Replace parameter values, checking names and shapes."""
        params = self.parameters()
        if set(params) != set(state):
            missing = sorted(set(params) ^ set(state))
            raise ParseError("Parameter names do not match the model", {"names": missing})

        for name, param in params.items():
            value = np.asarray(state[name], dtype=np.float64)
            if value.shape != param.shape:
                raise ShapeError(
                    f"Parameter {name} expects {param.shape}, got {value.shape}",  # noqa: EM102
                )
            param.data = value.copy()

    @property
    def n_parameters(self) -> int:
        """Return the number of scalar parameters."""
        return sum(p.data.size for p in self.parameters().values())


class Dense(Module):
    """Affine map x @ W + b."""

    def __init__(self, n_in: int, n_out: int, rng: np.random.Generator) -> None:
        """Initialize weights uniformly and the bias at zero."""
        super().__init__()
        self.weight = self.add_param(
            "weight",
            glorot_uniform(rng, (n_in, n_out), n_in, n_out),
        )
        self.bias = self.add_param("bias", np.zeros(n_out))

    def __call__(self, x: Tensor) -> Tensor:
        """Apply the layer to the last axis of x."""
        return tn.matmul(x, self.weight) + self.bias


class LSTMCell(Module):
    """Single LSTM cell with input, forget, candidate and output gates."""

    GATES = ("input", "forget", "cell", "output")

    def __init__(self, n_in: int, hidden: int, rng: np.random.Generator) -> None:
        """Initialize one weight matrix and bias per gate."""
        super().__init__()
        self.n_in = n_in
        self.hidden = hidden
        for gate in self.GATES:
            self.add_param(
                f"w_{gate}",
                glorot_uniform(rng, (n_in + hidden, hidden), n_in + hidden, hidden),
            )
            self.add_param(f"b_{gate}", np.zeros(hidden))

    def zero_state(self, batch: int) -> tuple[Tensor, Tensor]:
        """Return zero hidden and cell states."""
        return Tensor(np.zeros((batch, self.hidden))), Tensor(np.zeros((batch, self.hidden)))

    def __call__(self, x: Tensor, h: Tensor, c: Tensor) -> tuple[Tensor, Tensor]:
        """Advance the cell by one step."""
        return lstm_step(x, h, c, self)


def lstm_step(x: Tensor, h: Tensor, c: Tensor, params: LSTMCell) -> tuple[Tensor, Tensor]:
    """Return (h', c') after one gated LSTM update."""
    if x.shape[-1] != params.n_in or h.shape[-1] != params.hidden or h.shape != c.shape:
        raise ShapeError(
            f"LSTM step got x {x.shape}, h {h.shape}, c {c.shape} "  # noqa: EM102
            f"for input {params.n_in} and hidden {params.hidden}",
        )

    p = params.parameters()
    joined = tn.concat([x, h], axis=-1)
    gate_in = tn.sigmoid(tn.matmul(joined, p["w_input"]) + p["b_input"])
    gate_forget = tn.sigmoid(tn.matmul(joined, p["w_forget"]) + p["b_forget"])
    candidate = tn.tanh(tn.matmul(joined, p["w_cell"]) + p["b_cell"])
    gate_out = tn.sigmoid(tn.matmul(joined, p["w_output"]) + p["b_output"])

    c_next = gate_forget * c + gate_in * candidate
    h_next = gate_out * tn.tanh(c_next)
    return h_next, c_next


class AdditiveAttention(Module):
    """Score keys against a query: v^T tanh(W q + U k), softmax over keys."""

    def __init__(
        self,
        query_size: int,
        key_size: int,
        attn_size: int,
        rng: np.random.Generator,
    ) -> None:
        """Initialize the query, key and score projections."""
        super().__init__()
        self.w_query = self.add_param(
            "w_query",
            glorot_uniform(rng, (query_size, attn_size), query_size, attn_size),
        )
        self.w_key = self.add_param(
            "w_key",
            glorot_uniform(rng, (key_size, attn_size), key_size, attn_size),
        )
        self.v = self.add_param("v", glorot_uniform(rng, (attn_size, 1), attn_size, 1))

    def project_keys(self, keys: Tensor) -> Tensor:
        """Return U k for keys [B, n, key_size]; reusable across queries."""
        return tn.matmul(keys, self.w_key)

    def __call__(self, query: Tensor, projected_keys: Tensor) -> Tensor:
        """Return attention weights [B, n] for query [B, query_size]."""
        batch, n_keys, attn_size = projected_keys.shape
        projected_query = tn.reshape(tn.matmul(query, self.w_query), (batch, 1, attn_size))
        energy = tn.matmul(tn.tanh(projected_keys + projected_query), self.v)
        return tn.softmax(tn.reshape(energy, (batch, n_keys)), axis=-1)


class Conv1d(Module):
    """Same-padded temporal convolution with one bias per filter."""

    def __init__(
        self,
        n_in: int,
        filters: int,
        width: int,
        rng: np.random.Generator,
    ) -> None:
        """Initialize kernels [filters, width, n_in] and zero biases."""
        super().__init__()
        if width % 2 == 0:
            raise ShapeError(f"Kernel width must be odd, got {width}")  # noqa: EM102
        fan_in = width * n_in
        fan_out = width * filters
        self.kernels = self.add_param(
            "kernels",
            glorot_uniform(rng, (filters, width, n_in), fan_in, fan_out),
        )
        self.bias = self.add_param("bias", np.zeros(filters))

    def __call__(self, x: Tensor) -> Tensor:
        """Return feature sequences [B, T, filters]."""
        return tn.conv1d(x, self.kernels) + self.bias


class PersistentModel(Module):
    """Module that can be written to and read from the parameter format."""

    model_name: ClassVar[ModelName]

    def __init__(self) -> None:
        """Initialize an unfitted model."""
        super().__init__()
        self.fitted = False

    @property
    def metadata(self) -> dict[str, Any]:
        """Return the hyper-parameters needed to rebuild the model."""
        raise NotImplementedError

    @classmethod
    def from_metadata(cls: type[_ModelT], metadata: dict[str, Any]) -> _ModelT:
        """Return an untrained model built from persisted hyper-parameters."""
        raise NotImplementedError

    def save(self, path: str | Path) -> Path:
        """Write the model to path."""
        return save_model(path, self.model_name.value, self.metadata, self.state_dict())

    @classmethod
    def load(cls: type[_ModelT], path: str | Path) -> _ModelT:
        """Read a model of this class from path."""
        parsed = load_model_file(path)
        if parsed["name"] != cls.model_name.value:
            raise ParseError(
                f"Expected model {cls.model_name.value}, found {parsed['name']}",  # noqa: EM102
            )

        model = cls.from_metadata(parsed["metadata"])
        model.load_state_dict(parsed["params"])
        model.fitted = True
        _LOGGER.debug("Loaded %s from %s", cls.model_name.value, path)
        return model
