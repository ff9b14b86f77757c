"""Tests for Serializer."""
from __future__ import annotations

from pathlib import Path

import numpy as np

from pyanomaly import serializer
from pyanomaly.const import MODEL_MAGIC

from . import load_fixture_binary


def test_construct_string() -> None:
    """Test the construct_string method."""
    assert serializer.construct_string("bias") == b"\x00\x04bias"
    assert serializer.construct_string("") == b"\x00\x00"


def test_construct_parameter() -> None:
    """Test the construct_parameter method."""
    result = serializer.construct_parameter("b", np.array([1.0, -2.0]))

    assert result == (
        b"\x00\x01b"
        b"\x01"
        b"\x00\x00\x00\x02"
        b"\x3f\xf0\x00\x00\x00\x00\x00\x00"
        b"\xc0\x00\x00\x00\x00\x00\x00\x00"
    )


def test_construct_parameter_matrix() -> None:
    """Test matrices are written row-major with every dimension."""
    result = serializer.construct_parameter("w", np.arange(6.0).reshape(2, 3))

    assert result[:4] == b"\x00\x01w\x02"
    assert result[4:12] == b"\x00\x00\x00\x02\x00\x00\x00\x03"
    assert np.array_equal(np.frombuffer(result[12:], dtype=">f8"), np.arange(6.0))


def test_encode_model() -> None:
    """Test the encode_model method."""
    result = serializer.encode_model(
        "dense",
        {"n_in": 2},
        {"bias": np.array([1.0, -2.0])},
    )

    assert result.startswith(MODEL_MAGIC)
    assert result == load_fixture_binary("dense-model.bin")


def test_save_model(tmp_path: Path) -> None:
    """Test the save_model method creates parent directories."""
    path = serializer.save_model(
        tmp_path / "models" / "dense.bin",
        "dense",
        {"n_in": 2},
        {"bias": np.array([1.0, -2.0])},
    )

    assert path.read_bytes() == load_fixture_binary("dense-model.bin")
