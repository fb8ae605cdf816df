"""Dense double-precision kernels: truncated pivoted QR / ID, LQ, pivoted LU, products."""

from __future__ import annotations

import numpy as np
import scipy.linalg

from src.core.constants import DEFAULT_SINGULAR_THRESHOLD
from src.core.errors import InvalidArgumentError, SingularMatrixError
from src.core.flops import flop_counter
from src.models.hss import InterpolativeDecomposition, LqFactors, PluFactors

_NORM_GUARD = np.sqrt(np.finfo(float).eps)


def _as_matrix(a: np.ndarray, name: str) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise InvalidArgumentError(f"{name} must be two-dimensional, got shape {a.shape}")
    return a


def _truncated_pivoted_qr(Y: np.ndarray, eps: float, max_rank: int) -> tuple[np.ndarray, np.ndarray, int]:
    """Householder QR with Golub-Businger column pivoting, stopped at |R_kk| <= eps |R_00|.

    Returns (R, perm, rank) where R holds the upper-triangular factor in its
    leading ``rank`` rows and ``perm`` is the column order.
    """
    R = Y.copy()
    m, c = R.shape
    perm = np.arange(c)
    norms = np.linalg.norm(R, axis=0)
    reference = norms.copy()
    r00 = 0.0
    k = 0
    while k < max_rank:
        trailing = norms[k:]
        best = trailing.max()
        ties = np.flatnonzero(trailing == best)
        j = k + int(ties[np.argmin(perm[k:][ties])])
        if j != k:
            R[:, [k, j]] = R[:, [j, k]]
            perm[[k, j]] = perm[[j, k]]
            norms[[k, j]] = norms[[j, k]]
            reference[[k, j]] = reference[[j, k]]

        x = R[k:, k]
        alpha = float(np.linalg.norm(x))
        if k == 0:
            r00 = alpha
            if r00 == 0.0:
                break
        elif alpha <= eps * r00:
            break

        v = x.copy()
        v[0] += alpha if x[0] >= 0 else -alpha
        vnorm2 = float(v @ v)
        if vnorm2 > 0.0:
            R[k:, k:] -= np.outer(v, (2.0 / vnorm2) * (v @ R[k:, k:]))
            flop_counter.add(4 * (m - k) * (c - k))
        R[k + 1 :, k] = 0.0

        if k + 1 < c:
            rest = slice(k + 1, c)
            updated = norms[rest] ** 2 - R[k, rest] ** 2
            norms[rest] = np.sqrt(np.maximum(updated, 0.0))
            stale = np.flatnonzero(norms[rest] <= _NORM_GUARD * reference[rest]) + k + 1
            if stale.size:
                norms[stale] = np.linalg.norm(R[k + 1 :, stale], axis=0)
                reference[stale] = norms[stale]
        k += 1
    return R, perm, k


def id_compress(Y: np.ndarray, eps: float, max_rank: int | None = None) -> InterpolativeDecomposition:
    """Column interpolative decomposition Y ~= Y[:, J] @ X.

    The factorization stops at the first pivot with |R_kk| <= eps * |R_00|, so
    the neglected trailing block satisfies ||R_22||_2 <= sqrt(c - k) * eps * ||Y||_2
    up to the usual pivoted-QR growth; in practice the Frobenius error stays
    within a small multiple of eps * ||Y||_F.
    """
    Y = _as_matrix(Y, "Y")
    if eps < 0:
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    if not np.all(np.isfinite(Y)):
        raise InvalidArgumentError("Y contains non-finite entries")
    m, c = Y.shape
    limit = min(m, c) if max_rank is None else min(m, c, max_rank)

    if limit == 0:
        rank, perm, R = 0, np.arange(c), np.zeros((0, c))
    else:
        R, perm, rank = _truncated_pivoted_qr(Y, eps, limit)

    if rank == 0:
        T = np.zeros((0, c))
    else:
        T = scipy.linalg.solve_triangular(R[:rank, :rank], R[:rank, rank:], lower=False)
        flop_counter.add(rank * rank * (c - rank))

    X = np.empty((rank, c))
    X[:, perm] = np.hstack([np.eye(rank), T])
    return InterpolativeDecomposition(X=X, J=perm[:rank].copy(), perm=perm, T=T)


def lq_factor(W: np.ndarray) -> LqFactors:
    """W = [L 0] @ Q via QR of W^T, with a nonnegative diagonal of L."""
    W = _as_matrix(W, "W")
    r, c = W.shape
    if r == 0 or c == 0 or not W.any():
        return LqFactors(L=np.zeros((r, min(r, c))), Q=np.eye(c))

    Qf, Rf = scipy.linalg.qr(W.T, mode="full")
    flop_counter.add(4 * c * r * r)
    k = min(r, c)
    L = Rf[:k].T.copy()
    Q = Qf.T.copy()
    flip = np.diag(L) < 0
    L[:, flip] *= -1.0
    Q[:k][flip] *= -1.0
    return LqFactors(L=L, Q=Q)


def plu_factor(D: np.ndarray, threshold: float = DEFAULT_SINGULAR_THRESHOLD) -> PluFactors:
    """Row-pivoted LU, D[perm] = L @ U."""
    D = _as_matrix(D, "D")
    if D.shape[0] != D.shape[1]:
        raise InvalidArgumentError(f"D must be square, got shape {D.shape}")
    size = D.shape[0]
    if size == 0:
        return PluFactors(perm=np.zeros(0, dtype=np.int64), L=np.zeros((0, 0)), U=np.zeros((0, 0)))

    P, L, U = scipy.linalg.lu(D)
    flop_counter.add(2 * size**3 // 3)
    scale = float(np.abs(D).sum(axis=1).max())
    pivot = float(np.abs(np.diag(U)).min())
    if scale == 0.0 or pivot <= threshold * scale:
        raise SingularMatrixError(f"pivot {pivot:.3e} below {threshold:g} * ||D||_inf = {threshold * scale:.3e}")
    return PluFactors(perm=np.argmax(P, axis=0), L=L, U=U)


def solve_plu(factors: PluFactors, b: np.ndarray) -> np.ndarray:
    vector = np.ndim(b) == 1
    b = np.asarray(b, dtype=float)
    B = b[:, None] if vector else b
    if B.shape[0] != factors.order:
        raise InvalidArgumentError(f"right-hand side has {B.shape[0]} rows, expected {factors.order}")
    if factors.order == 0:
        x = np.zeros_like(B)
    else:
        y = scipy.linalg.solve_triangular(factors.L, B[factors.perm], lower=True, unit_diagonal=True)
        x = scipy.linalg.solve_triangular(factors.U, y, lower=False)
        flop_counter.add(2 * factors.order**2 * B.shape[1])
    return x[:, 0] if vector else x


def matmul(A: np.ndarray, B: np.ndarray, transpose_a: bool = False, transpose_b: bool = False) -> np.ndarray:
    A = _as_matrix(A, "A")
    B = _as_matrix(B, "B")
    left = A.T if transpose_a else A
    right = B.T if transpose_b else B
    if left.shape[1] != right.shape[0]:
        raise InvalidArgumentError(f"cannot multiply {left.shape} by {right.shape}")
    flop_counter.gemm(left.shape[0], right.shape[1], left.shape[1])
    return left @ right
