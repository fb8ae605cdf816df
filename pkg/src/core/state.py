"""Node-state bookkeeping for adaptive compression."""

from __future__ import annotations

import threading
from enum import Enum


class NodeStatus(str, Enum):
    UNTOUCHED = "untouched"
    PARTIALLY_COMPRESSED = "partially_compressed"
    COMPRESSED = "compressed"


class CompressionState:
    """Thread-safe holder of the per-node restart states."""

    def __init__(self, node_count: int) -> None:
        self._lock = threading.Lock()
        self._status: list[NodeStatus] = [NodeStatus.UNTOUCHED] * node_count

    def status(self, node: int) -> NodeStatus:
        with self._lock:
            return self._status[node]

    def mark(self, node: int, status: NodeStatus) -> None:
        with self._lock:
            self._status[node] = status

    def snapshot(self) -> list[NodeStatus]:
        with self._lock:
            return list(self._status)

    def all_compressed(self) -> bool:
        with self._lock:
            return all(s is NodeStatus.COMPRESSED for s in self._status)

    def check_serial_invariant(self, order: list[int]) -> tuple[bool, str | None]:
        """At a restart boundary: COMPRESSED prefix, one PARTIAL node, UNTOUCHED suffix.

        Returns (is_valid, error_message).
        """
        statuses = self.snapshot()
        partial = [pos for pos, node in enumerate(order) if statuses[node] is NodeStatus.PARTIALLY_COMPRESSED]
        if len(partial) > 1:
            return False, f"{len(partial)} partially compressed nodes"
        if not partial:
            return False, "no partially compressed node at restart"
        pivot = partial[0]
        for pos, node in enumerate(order):
            if pos < pivot and statuses[node] is not NodeStatus.COMPRESSED:
                return False, f"node {node} precedes the failing node but is {statuses[node].value}"
            if pos > pivot and statuses[node] is not NodeStatus.UNTOUCHED:
                return False, f"node {node} follows the failing node but is {statuses[node].value}"
        return True, None
