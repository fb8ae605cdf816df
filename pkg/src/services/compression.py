"""Randomized HSS compression with adaptive sampling.

Samples S^r = A R^r and S^c = A^T R^c are reduced bottom-up along the tree.
Each node takes an interpolative decomposition of its local samples; when the
detected rank leaves less than ``gap`` spare samples the node is marked
partially compressed, delta_d new random columns are drawn and the postorder
sweep restarts. Nodes that were already compressed only absorb the new
columns, their bases stay fixed.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from src.core.constants import COL_STREAM, ROW_STREAM
from src.core.errors import ContractViolationError, InvalidArgumentError, RankBudgetExhaustedError
from src.core.flops import flop_counter
from src.core.state import CompressionState, NodeStatus
from src.models.hss import HssForm, HssNode, InterpolativeDecomposition, PermutedBasis
from src.models.progress import CompressionProgressEvent
from src.models.reports import CompressionReport, NodeAttempt, NodeRank
from src.models.sampling import SamplingConfig
from src.models.source import MatrixSource
from src.models.tree import ClusterTree
from src.services.cluster_tree import postorder, validate_tree
from src.services.dense_kernels import id_compress
from src.services.generators import check_source
from src.services.hss_core import factor_bytes, node_ranks

logger = logging.getLogger("hssolve.compression")

ProgressCallback = Callable[[CompressionProgressEvent], None]


def _report_progress(event: CompressionProgressEvent, callback: ProgressCallback | None) -> None:
    """Send progress event if callback is set."""
    if callback:
        callback(event)


def generate_random(n: int, d: int, seed: int, offset: int = 0, stream: int = ROW_STREAM) -> np.ndarray:
    """Standard-normal n x d block; global column j depends only on (seed, stream, j)."""
    if n < 0 or d < 0 or offset < 0:
        raise InvalidArgumentError("n, d and offset must be non-negative")
    out = np.empty((n, d))
    for j in range(d):
        out[:, j] = np.random.default_rng([seed, stream, offset + j]).standard_normal(n)
    return out


@dataclass
class _NodeWork:
    d_seen: int = 0
    D: np.ndarray | None = None
    B12: np.ndarray | None = None
    B21: np.ndarray | None = None
    row_id: InterpolativeDecomposition | None = None
    col_id: InterpolativeDecomposition | None = None
    U: PermutedBasis | None = None
    V: PermutedBasis | None = None
    # cached local samples while partially compressed
    S_row_loc: np.ndarray | None = None
    S_col_loc: np.ndarray | None = None
    # reduced samples and random vectors handed to the parent
    S_row: np.ndarray | None = None
    S_col: np.ndarray | None = None
    R_row: np.ndarray | None = None
    R_col: np.ndarray | None = None
    row_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))
    col_index: np.ndarray = field(default_factory=lambda: np.zeros(0, dtype=np.int64))


class _Compressor:
    def __init__(
        self,
        source: MatrixSource,
        tree: ClusterTree,
        eps: float,
        cfg: SamplingConfig,
        progress_callback: ProgressCallback | None,
    ) -> None:
        self.source = source
        self.tree = tree
        self.eps = eps
        self.cfg = cfg
        self.progress_callback = progress_callback
        self.order = postorder(tree)
        self.state = CompressionState(len(tree.nodes))
        self.work = [_NodeWork() for _ in tree.nodes]
        self.trace: list[NodeAttempt] = []
        self.restarts: list[int] = []
        self.sweep = 0
        self.d = 0
        n = tree.n
        self.R_row = np.zeros((n, 0))
        self.R_col = np.zeros((n, 0))
        self.S_row = np.zeros((n, 0))
        self.S_col = np.zeros((n, 0))

    # -- sampling ---------------------------------------------------------

    def _extend(self, new_d: int) -> None:
        n, seed, count = self.tree.n, self.cfg.seed, new_d - self.d
        _report_progress(
            CompressionProgressEvent(stage="sampling", d=new_d, message=f"Sampling {count} random vectors"),
            self.progress_callback,
        )
        R_row = generate_random(n, count, seed, offset=self.d, stream=ROW_STREAM)
        R_col = generate_random(n, count, seed, offset=self.d, stream=COL_STREAM)
        self.R_row = np.hstack([self.R_row, R_row])
        self.R_col = np.hstack([self.R_col, R_col])
        self.S_row = np.hstack([self.S_row, self.source.multiply(R_row)])
        self.S_col = np.hstack([self.S_col, self.source.multiply_transpose(R_col)])
        self.d = new_d

    # -- per-node pieces --------------------------------------------------

    def _extract_generators(self, node: int) -> None:
        w = self.work[node]
        if self.tree.is_leaf(node):
            idx = np.asarray(self.tree.interval(node))
            w.D = self.source.extract(idx, idx)
            return
        left, right = (self.work[c] for c in self.tree.children(node))
        w.B12 = self.source.extract(left.row_index, right.col_index)
        w.B21 = self.source.extract(right.row_index, left.col_index)

    def _local_samples(self, node: int, cols: slice) -> tuple[np.ndarray, np.ndarray]:
        w = self.work[node]
        if self.tree.is_leaf(node):
            info = self.tree.node(node)
            rows = slice(info.lo, info.hi)
            m, k = info.size, cols.stop - cols.start
            flop_counter.add(4 * m * m * k)
            S_row = self.S_row[rows, cols] - w.D @ self.R_row[rows, cols]
            S_col = self.S_col[rows, cols] - w.D.T @ self.R_col[rows, cols]
            return S_row, S_col
        a, b = (self.work[c] for c in self.tree.children(node))
        S_row = np.vstack([
            a.S_row[:, cols] - w.B12 @ b.R_row[:, cols],
            b.S_row[:, cols] - w.B21 @ a.R_row[:, cols],
        ])
        S_col = np.vstack([
            a.S_col[:, cols] - w.B21.T @ b.R_col[:, cols],
            b.S_col[:, cols] - w.B12.T @ a.R_col[:, cols],
        ])
        k = cols.stop - cols.start
        flop_counter.add(2 * k * (w.B12.size + w.B21.size) * 2)
        return S_row, S_col

    def _child_randoms(self, node: int, cols: slice) -> tuple[np.ndarray, np.ndarray]:
        """Random vectors seen by the node's basis: R(I) at a leaf, stacked child R otherwise."""
        if self.tree.is_leaf(node):
            info = self.tree.node(node)
            rows = slice(info.lo, info.hi)
            return self.R_row[rows, cols], self.R_col[rows, cols]
        a, b = (self.work[c] for c in self.tree.children(node))
        return np.vstack([a.R_row[:, cols], b.R_row[:, cols]]), np.vstack([a.R_col[:, cols], b.R_col[:, cols]])

    def _candidate_index(self, node: int) -> tuple[np.ndarray, np.ndarray]:
        if self.tree.is_leaf(node):
            idx = np.asarray(self.tree.interval(node), dtype=np.int64)
            return idx, idx
        a, b = (self.work[c] for c in self.tree.children(node))
        return np.concatenate([a.row_index, b.row_index]), np.concatenate([a.col_index, b.col_index])

    def _passes(self, rank: int, rows: int) -> bool:
        return rank == rows or self.d - rank >= self.cfg.min_gap

    # -- node processing --------------------------------------------------

    def _absorb_new_columns(self, node: int) -> None:
        w = self.work[node]
        if w.d_seen == self.d:
            return
        cols = slice(w.d_seen, self.d)
        S_row, S_col = self._local_samples(node, cols)
        R_row, R_col = self._child_randoms(node, cols)
        w.S_row = np.hstack([w.S_row, S_row[w.row_id.J]])
        w.S_col = np.hstack([w.S_col, S_col[w.col_id.J]])
        w.R_row = np.hstack([w.R_row, w.V.apply_transpose(R_row)])
        w.R_col = np.hstack([w.R_col, w.U.apply_transpose(R_col)])
        w.d_seen = self.d

    def _try_compress(self, node: int) -> bool:
        w = self.work[node]
        status = self.state.status(node)
        if status is NodeStatus.UNTOUCHED:
            self._extract_generators(node)
            S_row, S_col = self._local_samples(node, slice(0, self.d))
        else:
            S_row_new, S_col_new = self._local_samples(node, slice(w.d_seen, self.d))
            S_row = np.hstack([w.S_row_loc, S_row_new])
            S_col = np.hstack([w.S_col_loc, S_col_new])

        row_id = id_compress(S_row.T, self.eps)
        col_id = id_compress(S_col.T, self.eps)
        accepted = self._passes(row_id.rank, S_row.shape[0]) and self._passes(col_id.rank, S_col.shape[0])
        self.trace.append(
            NodeAttempt(
                sweep=self.sweep,
                d=self.d,
                node=node,
                row_rank=row_id.rank,
                col_rank=col_id.rank,
                accepted=accepted,
            )
        )
        logger.debug("node %d d=%d ranks (%d, %d) accepted=%s", node, self.d, row_id.rank, col_id.rank, accepted)

        if not accepted:
            w.S_row_loc, w.S_col_loc = S_row, S_col
            w.d_seen = self.d
            self.state.mark(node, NodeStatus.PARTIALLY_COMPRESSED)
            return False

        w.row_id, w.col_id = row_id, col_id
        w.U, w.V = PermutedBasis.from_id(row_id), PermutedBasis.from_id(col_id)
        w.S_row, w.S_col = S_row[row_id.J], S_col[col_id.J]
        R_row, R_col = self._child_randoms(node, slice(0, self.d))
        w.R_row = w.V.apply_transpose(R_row)
        w.R_col = w.U.apply_transpose(R_col)
        row_candidates, col_candidates = self._candidate_index(node)
        w.row_index = row_candidates[row_id.J]
        w.col_index = col_candidates[col_id.J]
        w.S_row_loc = w.S_col_loc = None
        w.d_seen = self.d
        self.state.mark(node, NodeStatus.COMPRESSED)
        return True

    def _process(self, node: int) -> bool:
        status = self.state.status(node)
        if status is NodeStatus.COMPRESSED:
            if not self.tree.is_root(node):
                self._absorb_new_columns(node)
            return True
        if self.tree.is_root(node):
            self._extract_generators(node)
            self.state.mark(node, NodeStatus.COMPRESSED)
            return True
        return self._try_compress(node)

    def _sweep(self) -> int | None:
        """Run one postorder pass; return the node that failed, if any."""
        total = len(self.order)
        for done, node in enumerate(self.order, start=1):
            if not self._process(node):
                return node
            _report_progress(
                CompressionProgressEvent(
                    stage="compressing",
                    d=self.d,
                    node=node,
                    nodes_done=done,
                    total_nodes=total,
                    message=f"Node {node} compressed",
                ),
                self.progress_callback,
            )
        return None

    # -- driver -----------------------------------------------------------

    def run(self) -> None:
        self._extend(self.cfg.d0)
        while True:
            failed = self._sweep()
            if self.state.all_compressed():
                return
            if failed is None:
                raise ContractViolationError("sweep finished with nodes left uncompressed")
            ok, message = self.state.check_serial_invariant(self.order)
            if not ok:
                raise ContractViolationError(f"restart state broken: {message}")
            if self.d >= self.cfg.max_d:
                raise RankBudgetExhaustedError(
                    f"node {failed} still rank-limited at d = {self.d} (max_d = {self.cfg.max_d})",
                    report=self.report(form=None, flops=0, seconds=None),
                )
            new_d = min(self.d + self.cfg.delta_d, self.cfg.max_d)
            logger.info("node %d failed the gap test at d=%d, restarting with d=%d", failed, self.d, new_d)
            _report_progress(
                CompressionProgressEvent(
                    stage="restarting",
                    d=new_d,
                    node=failed,
                    message=f"Restarting with {new_d} samples",
                ),
                self.progress_callback,
            )
            self.restarts.append(new_d)
            self.sweep += 1
            self._extend(new_d)

    def form(self) -> HssForm:
        nodes = [
            HssNode(
                D=w.D,
                U=w.U,
                V=w.V,
                B12=w.B12,
                B21=w.B21,
                row_index=w.row_index,
                col_index=w.col_index,
            )
            for w in self.work
        ]
        return HssForm(tree=self.tree, nodes=nodes, eps=self.eps, d_used=self.d)

    def report(self, form: HssForm | None, flops: int, seconds: float | None) -> CompressionReport:
        ranks = [
            NodeRank(
                node=node,
                lo=self.tree.node(node).lo,
                hi=self.tree.node(node).hi,
                row_rank=0 if self.work[node].U is None else self.work[node].U.rank,
                col_rank=0 if self.work[node].V is None else self.work[node].V.rank,
            )
            for node in self.order
            if not self.tree.is_root(node)
        ]
        return CompressionReport(
            n=self.tree.n,
            eps=self.eps,
            d0=self.cfg.d0,
            delta_d=self.cfg.delta_d,
            d_final=self.d,
            restarts=list(self.restarts),
            node_ranks=ranks,
            trace=list(self.trace),
            max_rank=max((max(r.row_rank, r.col_rank) for r in ranks), default=0),
            flops=flops,
            bytes=0 if form is None else factor_bytes(form),
            seconds=seconds,
        )


def compress(
    source: MatrixSource,
    tree: ClusterTree,
    eps: float,
    cfg: SamplingConfig,
    progress_callback: ProgressCallback | None = None,
    source_probes: int = 4,
    timings: bool = False,
) -> tuple[HssForm, CompressionReport]:
    """Compress ``source`` into HSS form along ``tree``.

    Args:
        source: Matrix-free operator (products with A and A^T, entry access).
        tree: Cluster tree with ``tree.n == source.n``.
        eps: Relative truncation tolerance of every interpolative decomposition.
        cfg: Initial sample count, restart increment, gap and budget.
        progress_callback: Optional callback for progress events.
        source_probes: Unit-vector probes used to check the source first (0 skips).
        timings: Record wall-clock seconds in the report.

    Returns:
        The HSS form and a CompressionReport with restarts, ranks and the trace.

    Raises:
        RankBudgetExhaustedError: some node still failed the gap test at max_d.
        ContractViolationError: products and extracted entries disagree.
    """
    if source.n != tree.n:
        raise InvalidArgumentError(f"source order {source.n} does not match tree order {tree.n}")
    if eps < 0:
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    ok, message = validate_tree(tree)
    if not ok:
        raise InvalidArgumentError(f"invalid tree: {message}")
    if source_probes > 0:
        ok, message = check_source(source, probes=source_probes, seed=cfg.seed)
        if not ok:
            raise ContractViolationError(f"inconsistent matrix source: {message}")

    start = time.perf_counter()
    flops_before = flop_counter.total
    compressor = _Compressor(source, tree, eps, cfg, progress_callback)
    try:
        compressor.run()
    except RankBudgetExhaustedError:
        _report_progress(
            CompressionProgressEvent(stage="error", d=compressor.d, message="Sample budget exhausted"),
            progress_callback,
        )
        raise

    form = compressor.form()
    seconds = time.perf_counter() - start if timings else None
    report = compressor.report(form, flop_counter.total - flops_before, seconds)
    logger.info(
        "compressed n=%d with d=%d after %d restarts, max rank %d",
        tree.n,
        compressor.d,
        report.restart_count,
        report.max_rank,
    )
    _report_progress(
        CompressionProgressEvent(
            stage="done",
            d=compressor.d,
            nodes_done=len(tree.nodes),
            total_nodes=len(tree.nodes),
            message="Compression complete",
        ),
        progress_callback,
    )
    return form, report


def report_from_form(form: HssForm, cfg: SamplingConfig) -> CompressionReport:
    """Compression summary of a form read back from disk; no trace, no flops."""
    ranks = [
        NodeRank(node=node, lo=form.tree.node(node).lo, hi=form.tree.node(node).hi, row_rank=r, col_rank=c)
        for node, r, c in node_ranks(form)
    ]
    return CompressionReport(
        n=form.n,
        eps=form.eps,
        d0=cfg.d0,
        delta_d=cfg.delta_d,
        d_final=form.d_used,
        node_ranks=ranks,
        max_rank=max((max(r.row_rank, r.col_rank) for r in ranks), default=0),
        bytes=factor_bytes(form),
    )
