"""STRUDNS1 dense matrix files.

Layout: magic ``STRUDNS1``, u64 rows, u64 cols, rows*cols f64, row-major,
everything little-endian.
"""

from __future__ import annotations

from pathlib import Path

import numpy as np

from src.core.constants import MATRIX_FILE_MAGIC
from src.core.errors import FormatError
from src.services.generators import DenseSource

_HEADER = len(MATRIX_FILE_MAGIC) + 16


def encode_matrix(A: np.ndarray) -> bytes:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise FormatError(f"only two-dimensional arrays can be stored, got shape {A.shape}")
    header = np.asarray(A.shape, dtype="<u8").tobytes()
    return MATRIX_FILE_MAGIC + header + np.ascontiguousarray(A, dtype="<f8").tobytes()


def decode_matrix(data: bytes) -> np.ndarray:
    if len(data) < _HEADER or data[: len(MATRIX_FILE_MAGIC)] != MATRIX_FILE_MAGIC:
        raise FormatError("missing STRUDNS1 header")
    rows, cols = (int(v) for v in np.frombuffer(data, dtype="<u8", count=2, offset=len(MATRIX_FILE_MAGIC)))
    expected = _HEADER + rows * cols * 8
    if len(data) != expected:
        raise FormatError(f"expected {expected} bytes for a {rows}x{cols} matrix, found {len(data)}")
    values = np.frombuffer(data, dtype="<f8", count=rows * cols, offset=_HEADER)
    return values.reshape(rows, cols).astype(float)


def save_matrix_file(path: str | Path, A: np.ndarray) -> None:
    Path(path).write_bytes(encode_matrix(A))


def read_matrix_file(path: str | Path) -> np.ndarray:
    try:
        data = Path(path).read_bytes()
    except OSError as e:
        raise FormatError(f"cannot read {path}: {e}") from e
    return decode_matrix(data)


def load_matrix_file(path: str | Path) -> DenseSource:
    A = read_matrix_file(path)
    if A.shape[0] != A.shape[1]:
        raise FormatError(f"{path} holds a {A.shape[0]}x{A.shape[1]} matrix; a square matrix is required")
    return DenseSource(A)
