"""Parameter parser for pyanomaly models."""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np
from awesomeversion import AwesomeVersion

from .const import MODEL_MAGIC, SCHEMA_VERSION
from .exceptions import ParseError, SchemaVersionError

_LOGGER = logging.getLogger(__name__)


def check_schema(version: str, supported: str = SCHEMA_VERSION) -> None:
    """Raise SchemaVersionError unless version shares the supported major."""
    found = AwesomeVersion(version)
    expected = AwesomeVersion(supported)

    if not found.valid or found.major != expected.major:
        raise SchemaVersionError(
            f"Schema {version} not supported",  # noqa: EM102
            {"supported": supported},
        )

    if found > expected:
        _LOGGER.warning("Schema %s is newer than %s; reading anyway", version, supported)


def parse_string(data: bytes, offset: int) -> tuple[str, int]:
    """Parse a length-prefixed UTF-8 string."""
    length = struct.unpack_from(">h", data, offset)[0]
    offset += 2

    value = data[offset : offset + length].decode("utf-8")
    if len(value.encode("utf-8")) != length:
        raise ParseError("Truncated string", {"offset": offset})

    return value, offset + length


def parse_parameter(data: bytes, offset: int) -> tuple[str, np.ndarray, int]:
    """Parse one named parameter."""
    name, offset = parse_string(data, offset)
    _LOGGER.debug("Parsing parameter %s at offset %s", name, offset)

    try:
        ndim = struct.unpack_from(">b", data, offset)[0]
    except struct.error as exc:
        raise ParseError(f"Truncated header for parameter {name}") from exc  # noqa: EM102
    offset += 1

    if ndim < 0:
        raise ParseError(
            f"Negative rank for parameter {name}",  # noqa: EM102
            {"ndim": ndim},
        )

    try:
        shape = struct.unpack_from(f">{ndim}i", data, offset)
    except struct.error as exc:
        raise ParseError(f"Truncated shape for parameter {name}") from exc  # noqa: EM102
    offset += 4 * ndim

    if any(dim < 0 for dim in shape):
        raise ParseError(
            f"Negative dimension for parameter {name}",  # noqa: EM102
            {"shape": shape},
        )

    count = int(np.prod(shape)) if ndim else 1
    end = offset + 8 * count
    if end > len(data):
        raise ParseError(f"Truncated values for parameter {name}")  # noqa: EM102

    values = np.frombuffer(data[offset:end], dtype=">f8").astype(np.float64)
    try:
        return name, values.reshape(shape), end
    except ValueError as exc:
        raise ParseError(
            f"Shape {shape} does not fit parameter {name}",  # noqa: EM102
        ) from exc


def parse_model(raw_data: bytes) -> dict[str, Any]:
    """Parse a model file produced by encode_model."""
    if raw_data[: len(MODEL_MAGIC)] != MODEL_MAGIC:
        raise ParseError("Not a pyanomaly model file")

    offset = len(MODEL_MAGIC)
    data: dict[str, Any] = {}

    try:
        data["version"], offset = parse_string(raw_data, offset)
        check_schema(data["version"])

        data["name"], offset = parse_string(raw_data, offset)

        meta_length = struct.unpack_from(">i", raw_data, offset)[0]
        offset += 4
        data["metadata"] = json.loads(raw_data[offset : offset + meta_length].decode("utf-8"))
        offset += meta_length

        count = struct.unpack_from(">i", raw_data, offset)[0]
        offset += 4

        data["params"] = {}
        for _ in range(count):
            name, value, offset = parse_parameter(raw_data, offset)
            data["params"][name] = value
    except (struct.error, UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ParseError("Corrupt model file") from exc

    if offset != len(raw_data):
        raise ParseError("Trailing bytes after model parameters", {"offset": offset})

    _LOGGER.debug("Parsed model %s with %s parameters", data["name"], len(data["params"]))
    return data


def load_model_file(path: str | Path) -> dict[str, Any]:
    """Read and parse a model file."""
    return parse_model(Path(path).read_bytes())
