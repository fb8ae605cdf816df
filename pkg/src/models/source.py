"""Matrix-free operator contract."""

from __future__ import annotations

from typing import Protocol, runtime_checkable

import numpy as np


@runtime_checkable
class MatrixSource(Protocol):
    """Products with A and A^T plus access to selected entries."""

    @property
    def n(self) -> int: ...

    def multiply(self, x: np.ndarray) -> np.ndarray: ...

    def multiply_transpose(self, x: np.ndarray) -> np.ndarray: ...

    def extract(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray: ...
