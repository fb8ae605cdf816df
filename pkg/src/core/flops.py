"""Analytic floating-point operation counter."""

from __future__ import annotations

import threading


class FlopCounter:
    """Thread-safe running total; a multiply-add counts as 2 flops."""

    def __init__(self) -> None:
        self._lock = threading.Lock()
        self._total = 0

    @property
    def total(self) -> int:
        with self._lock:
            return self._total

    def add(self, flops: int | float) -> None:
        with self._lock:
            self._total += int(flops)

    def gemm(self, m: int, n: int, k: int) -> None:
        """Account for an (m x k) @ (k x n) product."""
        self.add(2 * m * n * k)

    def reset(self) -> None:
        with self._lock:
            self._total = 0


flop_counter = FlopCounter()
