"""ULV-like factorization of an HSS form, the matching solve and iterative refinement."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from src.core.constants import DEFAULT_SINGULAR_THRESHOLD, INDEX_BYTES, REAL_BYTES
from src.core.errors import ContractViolationError, CorruptFormError, InvalidArgumentError, SingularMatrixError
from src.core.flops import flop_counter
from src.models.hss import HssForm, UlvFactors, UlvNode
from src.models.source import MatrixSource
from src.services.cluster_tree import postorder
from src.services.dense_kernels import lq_factor, plu_factor, solve_plu
from src.services.hss_core import check_form

logger = logging.getLogger("hssolve.ulv")


def _assemble(h: HssForm, factors: dict[int, UlvNode], node: int) -> np.ndarray:
    """D at a leaf; [D~1, B12 V~2b^T; B21 V~1b^T, D~2] above."""
    tree = h.tree
    gen = h.nodes[node]
    if tree.is_leaf(node):
        return gen.D
    left, right = tree.children(node)
    f1, f2 = factors[left], factors[right]
    upper_right = gen.B12 @ f2.V_b.T
    lower_left = gen.B21 @ f1.V_b.T
    flop_counter.add(2 * (upper_right.size * gen.B12.shape[1] + lower_left.size * gen.B21.shape[1]))
    return np.block([[f1.D_tilde, upper_right], [lower_left, f2.D_tilde]])


def _v_hat(h: HssForm, factors: dict[int, UlvNode], node: int) -> np.ndarray:
    """V at a leaf; diag(V~1b, V~2b) V above."""
    tree = h.tree
    V = h.nodes[node].V.expand()
    if tree.is_leaf(node):
        return V
    left, right = tree.children(node)
    b1, b2 = factors[left].V_b, factors[right].V_b
    split = b1.shape[1]
    return np.vstack([b1 @ V[:split], b2 @ V[split:]])


def ulv_factor(h: HssForm, singular_threshold: float = DEFAULT_SINGULAR_THRESHOLD) -> UlvFactors:
    """Bottom-up elimination leaving a reduced system D_0 at the root, factored by PLU."""
    ok, message = check_form(h)
    if not ok:
        raise CorruptFormError(message or "corrupt form")
    tree = h.tree
    factors: dict[int, UlvNode] = {}
    root = None
    for node in postorder(tree):
        D = _assemble(h, factors, node)
        if tree.is_root(node):
            root = plu_factor(D, threshold=singular_threshold)
            break
        U = h.nodes[node].U
        if U.rows != D.shape[0]:
            raise ContractViolationError(f"node {node}: U has {U.rows} rows, D has {D.shape[0]}")
        W = U.omega_apply(D)
        top = U.rows - U.rank
        lq = lq_factor(W[:top])
        W_b = W[top:]
        V_tilde = lq.Q @ _v_hat(h, factors, node)
        D_tilde = W_b @ lq.Q_b.T
        flop_counter.add(2 * lq.Q.shape[0] * lq.Q.shape[1] * V_tilde.shape[1])
        flop_counter.add(2 * W_b.shape[0] * lq.Q_b.shape[0] * W_b.shape[1])
        factors[node] = UlvNode(lq=lq, W_b=W_b, V_tilde=V_tilde, D_tilde=D_tilde)
    assert root is not None
    return UlvFactors(form=h, nodes=factors, root=root)


def _forward(L: np.ndarray, rhs: np.ndarray, node: int) -> np.ndarray:
    if L.shape[0] == 0:
        return np.zeros((0, rhs.shape[1]))
    try:
        return scipy.linalg.solve_triangular(L, rhs, lower=True)
    except np.linalg.LinAlgError as e:
        raise SingularMatrixError(f"node {node}: L factor is singular") from e


@dataclass
class _SweepState:
    y: dict[int, np.ndarray] = field(default_factory=dict)
    z: dict[int, np.ndarray] = field(default_factory=dict)
    b_tilde_bottom: dict[int, np.ndarray] = field(default_factory=dict)


def _reduced_rhs(f: UlvFactors, state: _SweepState, node: int, B: np.ndarray) -> np.ndarray:
    h = f.form
    tree = h.tree
    if tree.is_leaf(node):
        info = tree.node(node)
        return B[info.lo : info.hi]
    gen = h.nodes[node]
    left, right = tree.children(node)
    f1, f2 = f.nodes[left], f.nodes[right]
    top = state.b_tilde_bottom[left] - f1.W_b @ (f1.lq.Q_t.T @ state.y[left]) - gen.B12 @ state.z[right]
    bottom = state.b_tilde_bottom[right] - gen.B21 @ state.z[left] - f2.W_b @ (f2.lq.Q_t.T @ state.y[right])
    return np.vstack([top, bottom])


def ulv_solve(f: UlvFactors, b: np.ndarray) -> np.ndarray:
    """Solve A_hss x = b with the ULV factors; b may hold several columns."""
    b = np.asarray(b, dtype=float)
    vector = b.ndim == 1
    B = b[:, None] if vector else b
    if B.ndim != 2 or B.shape[0] != f.n:
        raise InvalidArgumentError(f"right-hand side has shape {b.shape}, expected {f.n} rows")

    h = f.form
    tree = h.tree
    order = postorder(tree)
    state = _SweepState()

    for node in order:
        rhs = _reduced_rhs(f, state, node, B)
        if tree.is_root(node):
            x_root = solve_plu(f.root, rhs)
            break
        gen = h.nodes[node]
        fac = f.nodes[node]
        b_tilde = gen.U.omega_apply(rhs)
        top = fac.top
        y = _forward(fac.lq.L, b_tilde[:top], node)
        flop_counter.add(top * top * B.shape[1])
        z = fac.V_t.T @ y
        if not tree.is_leaf(node):
            left, right = tree.children(node)
            z = z + gen.V.apply_transpose(np.vstack([state.z[left], state.z[right]]))
        state.y[node], state.z[node] = y, z
        state.b_tilde_bottom[node] = b_tilde[top:]

    x = np.empty_like(B)
    # top-down: x_nu = Q_nu^T [y_nu; part of the parent's solution]
    pending: dict[int, np.ndarray] = {tree.root_id: x_root}
    for node in reversed(order):
        local = pending.pop(node)
        if not tree.is_root(node):
            fac = f.nodes[node]
            if local.shape[0] != fac.lq.Q.shape[0] - fac.top:
                raise ContractViolationError(f"node {node}: parent supplies {local.shape[0]} unknowns")
            local = fac.lq.Q.T @ np.vstack([state.y[node], local])
            flop_counter.gemm(fac.lq.Q.shape[0], B.shape[1], fac.lq.Q.shape[0])
        if tree.is_leaf(node):
            info = tree.node(node)
            x[info.lo : info.hi] = local
            continue
        left, right = tree.children(node)
        split = f.nodes[left].lq.Q.shape[0] - f.nodes[left].top
        pending[left], pending[right] = local[:split], local[split:]

    return x[:, 0] if vector else x


def ulv_bytes(f: UlvFactors) -> int:
    reals = sum(node.lq.L.size + node.lq.Q.size + node.W_b.size + node.V_tilde.size for node in f.nodes.values())
    reals += f.root.L.size + f.root.U.size
    return reals * REAL_BYTES + f.root.perm.size * INDEX_BYTES


@dataclass(frozen=True)
class RefinementResult:
    x: np.ndarray
    residuals: list[float]
    converged: bool

    @property
    def iterations(self) -> int:
        return len(self.residuals) - 1


def iterative_refinement(
    source: MatrixSource,
    f: UlvFactors,
    b: np.ndarray,
    tol: float = 1e-10,
    max_iters: int = 25,
    divergence_window: int = 3,
) -> RefinementResult:
    """Correct the ULV solution with true residuals r = b - A x from ``source``.

    Stops once ||r|| / ||b|| <= tol, after ``max_iters`` corrections, or when
    the residual has failed to decrease ``divergence_window`` times in a row;
    the last two cases return the best iterate flagged as not converged.
    """
    b = np.asarray(b, dtype=float)
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return RefinementResult(x=np.zeros_like(b), residuals=[0.0], converged=True)

    x = ulv_solve(f, b)
    best_x, best = x, np.inf
    residuals: list[float] = []
    stalls = 0
    for _ in range(max_iters + 1):
        r = b - source.multiply(x)
        relative = float(np.linalg.norm(r)) / b_norm
        if residuals and relative >= residuals[-1]:
            stalls += 1
        else:
            stalls = 0
        residuals.append(relative)
        if relative < best:
            best_x, best = x, relative
        if relative <= tol:
            return RefinementResult(x=x, residuals=residuals, converged=True)
        if stalls >= divergence_window:
            logger.warning("refinement stalled at residual %.3e after %d steps", best, len(residuals) - 1)
            return RefinementResult(x=best_x, residuals=residuals, converged=False)
        if len(residuals) > max_iters:
            break
        x = x + ulv_solve(f, r)
    logger.warning("refinement did not reach %.1e in %d steps (residual %.3e)", tol, max_iters, best)
    return RefinementResult(x=best_x, residuals=residuals, converged=False)
