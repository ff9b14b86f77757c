"""Exceptions for pyanomaly."""
from __future__ import annotations


class AnomalyError(Exception):
    """Generic pyanomaly exception."""


class ConfigError(AnomalyError):
    """Invalid configuration or parameter range."""


class InvalidStateError(AnomalyError):
    """Non-finite value handed to a simulator rate."""


class DivergenceError(AnomalyError):
    """Non-finite state during integration or training."""

    def __init__(
        self,
        message: str,
        *,
        step: int | None = None,
        epoch: int | None = None,
    ) -> None:
        """Record where the divergence was detected."""
        super().__init__(message, {"step": step, "epoch": epoch})
        self.step = step
        self.epoch = epoch


class ShapeError(AnomalyError):
    """Operand shapes do not conform."""


class ContractError(AnomalyError):
    """Operation precondition violated."""


class TrainingError(AnomalyError):
    """Optimizer received an unusable gradient."""


class DataError(AnomalyError):
    """Input data is empty, too small or inconsistent."""


class DegenerateDataError(DataError):  # noqa: N818
    """Input data has zero variance."""


class ModelStateError(AnomalyError):
    """Model is missing or has not been fitted."""


class ParseError(AnomalyError):
    """Input file could not be parsed."""


class SchemaVersionError(ParseError):
    """Persisted schema version not supported."""


class StageError(AnomalyError):
    """A pipeline stage failed."""

    def __init__(self, stage: str, message: str) -> None:
        """Prefix the failure with the stage name."""
        super().__init__(f"{stage}: {message}")
        self.stage = stage
