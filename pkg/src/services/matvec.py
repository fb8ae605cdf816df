"""HSS matrix products and the power method built on them."""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from src.core.errors import InvalidArgumentError
from src.models.hss import HssForm
from src.models.source import MatrixSource
from src.services.cluster_tree import postorder
from src.services.dense_kernels import matmul

logger = logging.getLogger("hssolve.matvec")


def hss_matvec(h: HssForm, x: np.ndarray) -> np.ndarray:
    """Return A_hss @ x by one upward and one downward sweep over the tree."""
    x = np.asarray(x, dtype=float)
    vector = x.ndim == 1
    X = x[:, None] if vector else x
    if X.ndim != 2 or X.shape[0] != h.n:
        raise InvalidArgumentError(f"operand has shape {x.shape}, expected {h.n} rows")

    tree = h.tree
    order = postorder(tree)
    cols = X.shape[1]

    # upward: y = V^T x
    y: dict[int, np.ndarray] = {}
    for node in order:
        if tree.is_root(node):
            continue
        V = h.nodes[node].V
        if tree.is_leaf(node):
            info = tree.node(node)
            y[node] = V.apply_transpose(X[info.lo : info.hi])
        else:
            left, right = tree.children(node)
            y[node] = V.apply_transpose(np.vstack([y[left], y[right]]))

    # downward: z_children = [B12 y2; B21 y1] + U z
    out = np.empty((h.n, cols))
    z: dict[int, np.ndarray] = {tree.root_id: np.zeros((0, cols))}
    for node in reversed(order):
        gen = h.nodes[node]
        info = tree.node(node)
        if tree.is_leaf(node):
            local = matmul(gen.D, X[info.lo : info.hi])
            if not tree.is_root(node):
                local += gen.U.apply(z[node])
            out[info.lo : info.hi] = local
            continue
        left, right = tree.children(node)
        z_left = matmul(gen.B12, y[right])
        z_right = matmul(gen.B21, y[left])
        if not tree.is_root(node):
            parent_part = gen.U.apply(z[node])
            split = h.nodes[left].row_rank
            z_left = z_left + parent_part[:split]
            z_right = z_right + parent_part[split:]
        z[left], z[right] = z_left, z_right

    return out[:, 0] if vector else out


@dataclass(frozen=True)
class PowerResult:
    eigenvalue: float
    iterations: int
    converged: bool


def power_method(
    operator: HssForm | MatrixSource,
    tol: float = 1e-6,
    max_iters: int = 10000,
    seed: int = 0,
) -> PowerResult:
    """Normalized power iteration with a Rayleigh-quotient estimate.

    Stops when two successive estimates differ by less than ``tol`` relative to
    the newer one; a run that hits ``max_iters`` returns the last estimate
    flagged as not converged.
    """
    if tol <= 0 or max_iters < 1:
        raise InvalidArgumentError("tol must be positive and max_iters >= 1")
    if isinstance(operator, HssForm):
        n = operator.n

        def apply(v: np.ndarray) -> np.ndarray:
            return hss_matvec(operator, v)

    else:
        n = operator.n
        apply = operator.multiply

    x = np.random.default_rng(seed).standard_normal(n)
    y = apply(x / np.linalg.norm(x))
    estimate: float | None = None
    for iteration in range(1, max_iters + 1):
        norm = float(np.linalg.norm(y))
        if norm == 0.0:
            return PowerResult(eigenvalue=0.0, iterations=iteration, converged=True)
        x = y / norm
        y = apply(x)
        current = float(x @ y)
        if estimate is not None and abs(current - estimate) < tol * abs(current):
            return PowerResult(eigenvalue=current, iterations=iteration, converged=True)
        estimate = current
    logger.warning("power method did not converge in %d iterations", max_iters)
    return PowerResult(eigenvalue=float(estimate), iterations=max_iters, converged=False)
