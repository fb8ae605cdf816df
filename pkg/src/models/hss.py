"""Numeric containers: ID results, structured bases, HSS generators, ULV factors."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from src.core.flops import flop_counter
from src.models.tree import ClusterTree


@dataclass(frozen=True)
class InterpolativeDecomposition:
    """Y ~= Y[:, J] @ X, with X = [I, T] applied in pivot order."""

    X: np.ndarray
    J: np.ndarray
    perm: np.ndarray
    T: np.ndarray

    @property
    def rank(self) -> int:
        return int(self.J.size)


@dataclass(frozen=True)
class PermutedBasis:
    """Generator Pi @ [I; E]: row perm[i] of the expansion is row i of [I; E]."""

    perm: np.ndarray
    E: np.ndarray

    @classmethod
    def from_id(cls, decomposition: InterpolativeDecomposition) -> PermutedBasis:
        return cls(perm=decomposition.perm.copy(), E=decomposition.T.T.copy())

    @property
    def rank(self) -> int:
        return int(self.E.shape[1])

    @property
    def rows(self) -> int:
        return int(self.perm.size)

    def expand(self) -> np.ndarray:
        out = np.zeros((self.rows, self.rank))
        out[self.perm] = np.vstack([np.eye(self.rank), self.E])
        return out

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Return (Pi [I; E]) @ x."""
        out = np.empty((self.rows, x.shape[1]))
        out[self.perm] = np.vstack([x, self.E @ x])
        flop_counter.gemm(self.E.shape[0], x.shape[1], self.rank)
        return out

    def apply_transpose(self, y: np.ndarray) -> np.ndarray:
        """Return (Pi [I; E])^T @ y."""
        yp = y[self.perm]
        k = self.rank
        flop_counter.gemm(k, y.shape[1], self.E.shape[0])
        return yp[:k] + self.E.T @ yp[k:]

    def omega_apply(self, b: np.ndarray) -> np.ndarray:
        """Return Omega @ b with Omega = [-E I; I 0] Pi^T; Omega @ expand() == [0; I]."""
        c = b[self.perm]
        k = self.rank
        flop_counter.gemm(self.E.shape[0], b.shape[1], k)
        return np.vstack([c[k:] - self.E @ c[:k], c[:k]])

    def omega_dense(self) -> np.ndarray:
        m, k = self.rows, self.rank
        core = np.zeros((m, m))
        core[: m - k, :k] = -self.E
        core[: m - k, k:] = np.eye(m - k)
        core[m - k :, :k] = np.eye(k)
        omega = np.zeros((m, m))
        omega[:, self.perm] = core
        return omega


@dataclass(frozen=True)
class LqFactors:
    """W = [L 0] @ Q with Q square orthogonal; ``top`` rows of Q pair with L."""

    L: np.ndarray
    Q: np.ndarray

    @property
    def top(self) -> int:
        return int(self.L.shape[0])

    @property
    def Q_t(self) -> np.ndarray:
        return self.Q[: self.top]

    @property
    def Q_b(self) -> np.ndarray:
        return self.Q[self.top :]


@dataclass(frozen=True)
class PluFactors:
    """A[perm] = L @ U, L unit lower triangular."""

    perm: np.ndarray
    L: np.ndarray
    U: np.ndarray

    @property
    def order(self) -> int:
        return int(self.perm.size)


@dataclass
class HssNode:
    """Generators stored at one tree node."""

    D: np.ndarray | None = None
    U: PermutedBasis | None = None
    V: PermutedBasis | None = None
    B12: np.ndarray | None = None
    B21: np.ndarray | None = None
    row_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    col_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))

    @property
    def row_rank(self) -> int:
        return 0 if self.U is None else self.U.rank

    @property
    def col_rank(self) -> int:
        return 0 if self.V is None else self.V.rank


@dataclass
class HssForm:
    """HSS representation: per-node generators indexed by tree node id."""

    tree: ClusterTree
    nodes: list[HssNode]
    eps: float
    d_used: int

    @property
    def n(self) -> int:
        return self.tree.n


@dataclass
class UlvNode:
    """Per-node ULV factors; W_b is the bottom block of Omega @ D."""

    lq: LqFactors
    W_b: np.ndarray
    V_tilde: np.ndarray
    D_tilde: np.ndarray

    @property
    def top(self) -> int:
        return self.lq.top

    @property
    def V_t(self) -> np.ndarray:
        return self.V_tilde[: self.top]

    @property
    def V_b(self) -> np.ndarray:
        return self.V_tilde[self.top :]


@dataclass
class UlvFactors:
    form: HssForm
    nodes: dict[int, UlvNode]
    root: PluFactors

    @property
    def n(self) -> int:
        return self.form.n
