"""``solve``: compress, factor, solve and refine."""

from __future__ import annotations

import argparse
from typing import Any

import numpy as np

from src.commands.common import (
    add_form_argument,
    add_matrix_arguments,
    add_output_arguments,
    add_sampling_arguments,
    build_problem,
    dense_matrix,
    emit,
    eps_of,
    exit_code,
    pick,
    sampling_config,
)
from src.core.errors import InvalidArgumentError
from src.services.hss_core import load_form
from src.tasks.solve_task import SolveSettings, run_solve_pipeline


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("solve", help="compress -> ULV factor -> solve -> iterative refinement")
    add_matrix_arguments(parser)
    add_sampling_arguments(parser)
    add_form_argument(parser)
    add_output_arguments(parser)
    parser.add_argument("--rhs", type=int, default=1, help="number of right-hand sides")
    parser.add_argument("--ir-tol", type=float)
    parser.add_argument("--ir-max-iters", type=int)
    parser.add_argument("--compare-dense", action="store_true", help="check against a dense LU solve")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    if args.rhs < 1:
        raise InvalidArgumentError(f"--rhs must be >= 1, got {args.rhs}")
    label, source, tree = build_problem(args, config)
    sampling = sampling_config(args, config)
    solve_cfg = config["solve"]
    settings = SolveSettings(
        eps=eps_of(args, config),
        sampling=sampling,
        ir_tol=pick(args.ir_tol, solve_cfg["ir_tol"]),
        ir_max_iters=pick(args.ir_max_iters, solve_cfg["ir_max_iters"]),
        divergence_window=solve_cfg["divergence_window"],
        singular_threshold=config["kernels"]["singular_threshold"],
        dense_agreement=solve_cfg["dense_agreement"],
        source_probes=config["compression"]["source_probes"],
        timings=args.timings,
    )
    b = np.random.default_rng([sampling.seed, 7]).standard_normal((source.n, args.rhs))
    dense = dense_matrix(source) if args.compare_dense else None
    form = load_form(args.form_path) if args.form_path else None
    outcome = run_solve_pipeline(label, source, tree, b, settings, dense=dense, form=form)
    emit(outcome.report, args)
    return exit_code(outcome.report.checks)
