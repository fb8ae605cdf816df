"""Compress -> factor -> solve -> refine pipeline with progress reporting."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from src.core.errors import InvalidArgumentError
from src.core.flops import flop_counter
from src.models.hss import HssForm, UlvFactors
from src.models.progress import PipelineProgressEvent
from src.models.reports import MemoryReport, RefinementReport, SolveReport
from src.models.sampling import SamplingConfig
from src.models.source import MatrixSource
from src.models.tree import ClusterTree
from src.services.compression import compress, report_from_form
from src.services.hss_core import (
    dense_bytes,
    factor_bytes,
    memory_overhead,
    memory_overhead_vs_dense,
    sampling_bytes,
)
from src.services.ulv import iterative_refinement, ulv_bytes, ulv_factor

logger = logging.getLogger("hssolve.tasks")

PipelineCallback = Callable[[PipelineProgressEvent], None]


def _report_progress(event: PipelineProgressEvent, callback: PipelineCallback | None) -> None:
    """Send progress event if callback is set."""
    if callback:
        callback(event)


@dataclass
class SolveOutcome:
    form: HssForm
    factors: UlvFactors
    x: np.ndarray
    report: SolveReport


@dataclass(frozen=True)
class SolveSettings:
    eps: float
    sampling: SamplingConfig
    ir_tol: float = 1e-10
    ir_max_iters: int = 25
    divergence_window: int = 3
    singular_threshold: float = 1e-14
    dense_agreement: float = 1e-8
    source_probes: int = 4
    timings: bool = False


def run_solve_pipeline(
    label: str,
    source: MatrixSource,
    tree: ClusterTree,
    b: np.ndarray,
    settings: SolveSettings,
    dense: np.ndarray | None = None,
    progress_callback: PipelineCallback | None = None,
    form: HssForm | None = None,
) -> SolveOutcome:
    """Run the full pipeline on right-hand sides ``b``.

    Args:
        label: Matrix name recorded in the report.
        source: Matrix-free operator used for sampling and true residuals.
        tree: Cluster tree.
        b: n x k right-hand sides.
        settings: Tolerances and sampling schedule.
        dense: Optional explicit matrix; when given, the refined solution is
            compared against a dense LU solve.
        progress_callback: Optional callback for stage transitions.
        form: Previously saved HSS form; when given, compression is skipped.

    Returns:
        SolveOutcome with the form, factors, solution and SolveReport.
    """
    clock: dict[str, float] = {}

    def stage(name: str, message: str) -> None:
        clock[name] = time.perf_counter()
        _report_progress(PipelineProgressEvent(stage=name, message=message), progress_callback)

    if form is None:
        stage("compressing", "Compressing")
        form, compression = compress(
            source,
            tree,
            settings.eps,
            settings.sampling,
            source_probes=settings.source_probes,
            timings=settings.timings,
        )
    else:
        if form.n != source.n:
            raise InvalidArgumentError(f"form has order {form.n} but the matrix has order {source.n}")
        stage("compressing", "Using the saved form")
        compression = report_from_form(form, settings.sampling)

    stage("factoring", "Factoring")
    before = flop_counter.total
    factors = ulv_factor(form, singular_threshold=settings.singular_threshold)
    factor_flops = flop_counter.total - before

    stage("solving", "Solving with refinement")
    before = flop_counter.total
    refinement = iterative_refinement(
        source,
        factors,
        b,
        tol=settings.ir_tol,
        max_iters=settings.ir_max_iters,
        divergence_window=settings.divergence_window,
    )
    solve_flops = flop_counter.total - before

    difference = None
    if dense is not None:
        stage("comparing", "Comparing with dense LU")
        reference = np.linalg.solve(dense, b)
        difference = float(np.linalg.norm(refinement.x - reference) / np.linalg.norm(reference))

    h_bytes = factor_bytes(form)
    u_bytes = ulv_bytes(factors)
    aux = sampling_bytes(tree.n, form.d_used)
    full = dense_bytes(tree.n)
    memory = MemoryReport(
        dense_bytes=full,
        hss_bytes=h_bytes,
        ulv_bytes=u_bytes,
        aux_bytes=aux,
        overhead_vs_total=memory_overhead(h_bytes, u_bytes, aux, full),
        overhead_vs_dense=memory_overhead_vs_dense(h_bytes, u_bytes, aux, full),
    )

    checks = {"ir_converged": refinement.converged}
    if difference is not None:
        checks["dense_agreement"] = difference <= settings.dense_agreement

    seconds = None
    if settings.timings:
        end = time.perf_counter()
        names = list(clock)
        seconds = {
            name: (clock[names[i + 1]] if i + 1 < len(names) else end) - clock[name] for i, name in enumerate(names)
        }

    report = SolveReport(
        matrix=label,
        n=tree.n,
        rhs=1 if b.ndim == 1 else b.shape[1],
        compression=compression,
        root_order=factors.root.order,
        factor_flops=factor_flops,
        solve_flops=solve_flops,
        memory=memory,
        refinement=RefinementReport(
            converged=refinement.converged,
            iterations=refinement.iterations,
            residuals=refinement.residuals,
            final_residual=refinement.residuals[-1],
        ),
        dense_relative_difference=difference,
        checks=checks,
        seconds=seconds,
    )
    _report_progress(PipelineProgressEvent(stage="done", message="Pipeline complete"), progress_callback)
    logger.info(
        "solve n=%d: max rank %d, %d refinement steps, residual %.3e",
        tree.n,
        compression.max_rank,
        refinement.iterations,
        refinement.residuals[-1],
    )
    return SolveOutcome(form=form, factors=factors, x=refinement.x, report=report)
