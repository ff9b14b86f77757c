"""Parameter serializer for pyanomaly models."""
from __future__ import annotations

import json
import logging
import struct
from pathlib import Path
from typing import Any

import numpy as np

from .const import MODEL_MAGIC, SCHEMA_VERSION

_LOGGER = logging.getLogger(__name__)


def construct_string(value: str) -> bytes:
    """Serialize a length-prefixed UTF-8 string."""
    encoded = value.encode("utf-8")
    return struct.pack(">h", len(encoded)) + encoded


def construct_parameter(name: str, value: np.ndarray) -> bytes:
    """Serialize one named parameter.

    2 byte: Name Length - h
    N bytes: Name
    1 byte: Number of dimensions - b
    4 bytes each: Dimensions - i
    8 bytes each: Values, row-major - d
    """
    array = np.ascontiguousarray(value, dtype=np.float64)

    byte_str = construct_string(name)
    byte_str += struct.pack(">b", array.ndim)
    byte_str += struct.pack(f">{array.ndim}i", *array.shape)
    byte_str += array.astype(">f8").tobytes()

    return byte_str


def encode_model(
    name: str,
    metadata: dict[str, Any],
    params: dict[str, np.ndarray],
    version: str = SCHEMA_VERSION,
) -> bytes:
    """Serialize a model into the versioned parameter format.

    4 bytes: Magic
    N bytes: Schema tag (length-prefixed)
    N bytes: Model name (length-prefixed)
    4 bytes + N: Metadata JSON - i
    4 bytes: Parameter count - i
    N bytes: Parameters
    """
    meta = json.dumps(metadata, sort_keys=True).encode("utf-8")

    encoded = MODEL_MAGIC
    encoded += construct_string(version)
    encoded += construct_string(name)
    encoded += struct.pack(">i", len(meta))
    encoded += meta
    encoded += struct.pack(">i", len(params))

    for param_name, value in params.items():
        _LOGGER.debug("Encoding parameter %s %s", param_name, np.shape(value))
        encoded += construct_parameter(param_name, value)

    return encoded


def save_model(
    path: str | Path,
    name: str,
    metadata: dict[str, Any],
    params: dict[str, np.ndarray],
) -> Path:
    """Write a model file."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_model(name, metadata, params))
    _LOGGER.info("Saved model %s to %s", name, path)
    return path
