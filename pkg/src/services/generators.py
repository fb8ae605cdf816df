"""Deterministic test-matrix sources."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from src.core.errors import InvalidArgumentError
from src.core.flops import flop_counter
from src.models.source import MatrixSource
from src.models.tree import ClusterTree
from src.services.cluster_tree import build_comb_tree, postorder


def _as_block(x: np.ndarray) -> tuple[np.ndarray, bool]:
    x = np.asarray(x, dtype=float)
    return (x[:, None], True) if x.ndim == 1 else (x, False)


class DenseSource:
    """Explicit matrix behind the matrix-free contract."""

    def __init__(self, A: np.ndarray) -> None:
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise InvalidArgumentError(f"matrix must be square, got shape {A.shape}")
        self._A = A

    @property
    def n(self) -> int:
        return self._A.shape[0]

    def multiply(self, x: np.ndarray) -> np.ndarray:
        X, vector = _as_block(x)
        flop_counter.gemm(self.n, X.shape[1], self.n)
        out = self._A @ X
        return out[:, 0] if vector else out

    def multiply_transpose(self, x: np.ndarray) -> np.ndarray:
        X, vector = _as_block(x)
        flop_counter.gemm(self.n, X.shape[1], self.n)
        out = self._A.T @ X
        return out[:, 0] if vector else out

    def extract(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        return self._A[np.ix_(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))]

    def dense(self) -> np.ndarray:
        return self._A


class ToeplitzSource:
    """a_ij = column[i - j] for i >= j and row[j - i] otherwise; products by FFT."""

    def __init__(self, column: np.ndarray, row: np.ndarray) -> None:
        column = np.asarray(column, dtype=float)
        row = np.asarray(row, dtype=float)
        if column.shape != row.shape or column.ndim != 1 or column.size == 0:
            raise InvalidArgumentError("column and row must be equal-length non-empty vectors")
        if column[0] != row[0]:
            raise InvalidArgumentError("column and row disagree on the diagonal")
        self._column = column
        self._row = row

    @property
    def n(self) -> int:
        return self._column.size

    def _count(self, columns: int) -> None:
        length = 2 * self.n
        flop_counter.add(columns * 15 * length * max(1, int(math.log2(length))))

    def multiply(self, x: np.ndarray) -> np.ndarray:
        X, vector = _as_block(x)
        self._count(X.shape[1])
        out = scipy.linalg.matmul_toeplitz((self._column, self._row), X)
        return out[:, 0] if vector else out

    def multiply_transpose(self, x: np.ndarray) -> np.ndarray:
        X, vector = _as_block(x)
        self._count(X.shape[1])
        out = scipy.linalg.matmul_toeplitz((self._row, self._column), X)
        return out[:, 0] if vector else out

    def extract(self, rows: np.ndarray, cols: np.ndarray) -> np.ndarray:
        offset = np.subtract.outer(np.asarray(rows, dtype=np.int64), np.asarray(cols, dtype=np.int64))
        return np.where(offset >= 0, self._column[np.abs(offset)], self._row[np.abs(offset)])

    def dense(self) -> np.ndarray:
        return scipy.linalg.toeplitz(self._column, self._row)


def toeplitz_simple(n: int) -> ToeplitzSource:
    """a_ii = n^2, a_ij = i - j: diagonally dominant with very low HSS rank."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    k = np.arange(n, dtype=float)
    column = k.copy()
    row = -k
    column[0] = row[0] = float(n) ** 2
    return ToeplitzSource(column, row)


def toeplitz_qchem(n: int, spacing: float = 1.0) -> ToeplitzSource:
    """Kinetic-energy matrix: a_ii = pi^2/6, a_ij = (-1)^(i-j) / ((i-j)^2 spacing^2)."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if spacing <= 0:
        raise InvalidArgumentError(f"spacing must be positive, got {spacing}")
    k = np.arange(1, n, dtype=float)
    column = np.empty(n)
    column[0] = math.pi**2 / 6.0
    column[1:] = (-1.0) ** k / (k**2 * spacing**2)
    return ToeplitzSource(column, column.copy())


@dataclass
class SyntheticHss:
    """Ground-truth generators with orthonormal nested bases."""

    tree: ClusterTree
    ranks: dict[int, int]
    U: dict[int, np.ndarray]
    V: dict[int, np.ndarray]
    B12: dict[int, np.ndarray]
    B21: dict[int, np.ndarray]
    D: dict[int, np.ndarray]

    @property
    def max_rank(self) -> int:
        return max(self.ranks.values(), default=0)

    def densify(self) -> np.ndarray:
        tree = self.tree
        u_big: dict[int, np.ndarray] = {}
        v_big: dict[int, np.ndarray] = {}
        A = np.zeros((tree.n, tree.n))
        for node in postorder(tree):
            info = tree.node(node)
            if tree.is_leaf(node):
                A[info.lo : info.hi, info.lo : info.hi] = self.D[node]
                if not tree.is_root(node):
                    u_big[node], v_big[node] = self.U[node], self.V[node]
                continue
            left, right = tree.children(node)
            l_info, r_info = tree.node(left), tree.node(right)
            A[l_info.lo : l_info.hi, r_info.lo : r_info.hi] = u_big[left] @ self.B12[node] @ v_big[right].T
            A[r_info.lo : r_info.hi, l_info.lo : l_info.hi] = u_big[right] @ self.B21[node] @ v_big[left].T
            if not tree.is_root(node):
                u_big[node] = scipy.linalg.block_diag(u_big[left], u_big[right]) @ self.U[node]
                v_big[node] = scipy.linalg.block_diag(v_big[left], v_big[right]) @ self.V[node]
        return A


def _orthonormal(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    if cols == 0:
        return np.zeros((rows, 0))
    q, _ = np.linalg.qr(rng.standard_normal((rows, cols)))
    return q


def _coupling(rng: np.random.Generator, rows: int, cols: int) -> np.ndarray:
    """Full-rank block with singular values spread over [0.5, 1]."""
    k = min(rows, cols)
    if k == 0:
        return np.zeros((rows, cols))
    return _orthonormal(rng, rows, k) @ np.diag(np.linspace(1.0, 0.5, k)) @ _orthonormal(rng, cols, k).T


def ranks_by_depth(tree: ClusterTree, level_ranks: list[int]) -> dict[int, int]:
    """Rank level_ranks[depth - 1] at each non-root node; the last entry repeats deeper."""
    if not level_ranks:
        raise InvalidArgumentError("level_ranks must not be empty")
    ranks: dict[int, int] = {}
    for node in tree.nodes:
        if node.parent is None:
            continue
        depth = tree.depth(node.id)
        ranks[node.id] = level_ranks[min(depth, len(level_ranks)) - 1]
    return ranks


def synthetic_hss(
    tree: ClusterTree,
    rank: int | dict[int, int],
    seed: int = 0,
    shift: float | None = None,
) -> tuple[DenseSource, SyntheticHss]:
    """Exact HSS matrix with prescribed per-node rank, plus its generators.

    Ranks are clamped to what the nesting allows (leaf size, sum of child
    ranks). Leaf diagonal blocks are dense and full rank.
    """
    requested = rank if isinstance(rank, dict) else {node.id: rank for node in tree.nodes if node.parent is not None}
    if any(r < 0 for r in requested.values()):
        raise InvalidArgumentError("ranks must be non-negative")
    rng = np.random.default_rng(seed)
    if shift is None:
        shift = 2.0 + tree.height()

    ranks: dict[int, int] = {}
    U: dict[int, np.ndarray] = {}
    V: dict[int, np.ndarray] = {}
    B12: dict[int, np.ndarray] = {}
    B21: dict[int, np.ndarray] = {}
    D: dict[int, np.ndarray] = {}
    for node in postorder(tree):
        info = tree.node(node)
        if tree.is_leaf(node):
            m = info.size
            D[node] = shift * np.eye(m) + 0.5 * rng.standard_normal((m, m)) / math.sqrt(m)
            rows = m
        else:
            left, right = tree.children(node)
            B12[node] = _coupling(rng, ranks[left], ranks[right])
            B21[node] = _coupling(rng, ranks[right], ranks[left])
            rows = ranks[left] + ranks[right]
        if tree.is_root(node):
            continue
        ranks[node] = min(requested.get(node, 0), rows)
        U[node] = _orthonormal(rng, rows, ranks[node])
        V[node] = _orthonormal(rng, rows, ranks[node])

    truth = SyntheticHss(tree=tree, ranks=ranks, U=U, V=V, B12=B12, B21=B21, D=D)
    return DenseSource(truth.densify()), truth


def comb_leaf_sizes(n: int) -> list[int]:
    """Leaf sizes n/8, n/8, n/4, n/2 (the last absorbs any remainder)."""
    if n < 8:
        raise InvalidArgumentError(f"n must be >= 8 for the comb layout, got {n}")
    sizes = [n // 8, n // 8, n // 4]
    return [*sizes, n - sum(sizes)]


def synthetic_comb(
    n: int,
    leaf_sizes: list[int] | None = None,
    level_ranks: list[int] | None = None,
    seed: int = 0,
    mirror: bool = False,
) -> tuple[DenseSource, SyntheticHss]:
    """Comb matrix: dense full-rank diagonal leaves, prescribed rank per comb level."""
    sizes = leaf_sizes if leaf_sizes is not None else comb_leaf_sizes(n)
    tree = build_comb_tree(n, sizes, mirror=mirror)
    return synthetic_hss(tree, ranks_by_depth(tree, level_ranks or [40, 60, 70]), seed=seed)


def check_source(source: MatrixSource, probes: int = 20, seed: int = 0, rtol: float = 1e-12) -> tuple[bool, str | None]:
    """Compare multiply / multiply_transpose against extract on unit-vector probes.

    Returns (is_consistent, error_message).
    """
    n = source.n
    rng = np.random.default_rng(seed)
    everything = np.arange(n)
    for i in rng.choice(n, size=min(probes, n), replace=False):
        e = np.zeros((n, 1))
        e[i] = 1.0
        column = source.extract(everything, [i])
        row = source.extract([i], everything).T
        for label, product, expected in (
            ("column", source.multiply(e), column),
            ("row", source.multiply_transpose(e), row),
        ):
            scale = max(1.0, float(np.linalg.norm(expected)))
            error = float(np.linalg.norm(product - expected))
            if error > rtol * scale:
                return False, f"{label} {i}: product and extract differ by {error:.3e}"
    return True, None
