"""``power``: dominant eigenvalue through HSS products (optionally dense too)."""

from __future__ import annotations

import argparse
from typing import Any

from src.commands.common import (
    add_form_argument,
    add_matrix_arguments,
    add_output_arguments,
    add_sampling_arguments,
    build_problem,
    compressed_form,
    emit,
    exit_code,
    pick,
    sampling_config,
)
from src.models.reports import PowerReport, PowerRun
from src.services.hss_core import hss_max_rank
from src.services.matvec import PowerResult, power_method


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("power", help="power method on the HSS form")
    add_matrix_arguments(parser)
    add_sampling_arguments(parser)
    add_form_argument(parser)
    add_output_arguments(parser)
    parser.add_argument("--tol", type=float)
    parser.add_argument("--max-iters", type=int)
    parser.add_argument("--compare-dense", action="store_true", help="repeat the iteration with the exact operator")
    parser.set_defaults(handler=run)


def _run(result: PowerResult) -> PowerRun:
    return PowerRun(eigenvalue=result.eigenvalue, iterations=result.iterations, converged=result.converged)


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    label, source, tree = build_problem(args, config)
    sampling = sampling_config(args, config)
    tol = pick(args.tol, config["power"]["tol"])
    max_iters = pick(args.max_iters, config["power"]["max_iters"])

    form = compressed_form(args, config, source, tree)
    hss = power_method(form, tol=tol, max_iters=max_iters, seed=sampling.seed)
    checks = {"hss_converged": hss.converged}
    dense = None
    difference = None
    if args.compare_dense:
        dense = power_method(source, tol=tol, max_iters=max_iters, seed=sampling.seed)
        difference = abs(hss.eigenvalue - dense.eigenvalue) / abs(dense.eigenvalue)
        checks["dense_converged"] = dense.converged
        checks["eigenvalue_agreement"] = difference <= tol
        checks["iteration_agreement"] = abs(hss.iterations - dense.iterations) <= 1

    report = PowerReport(
        matrix=label,
        n=source.n,
        eps=form.eps,
        max_rank=hss_max_rank(form),
        hss=_run(hss),
        dense=None if dense is None else _run(dense),
        relative_difference=difference,
        checks=checks,
    )
    emit(report, args)
    return exit_code(checks)
