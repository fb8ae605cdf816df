"""``matvec-bench``: HSS product against the dense product."""

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
    compressed_form,
    dense_matrix,
    emit,
    exit_code,
    sampling_config,
)
from src.core.constants import ID_ERROR_MULTIPLIER
from src.core.errors import InvalidArgumentError
from src.core.flops import flop_counter
from src.models.reports import MatvecBenchReport
from src.services.hss_core import hss_max_rank
from src.services.matvec import hss_matvec


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("matvec-bench", help="compare HSS and dense matrix products")
    add_matrix_arguments(parser)
    add_sampling_arguments(parser)
    add_form_argument(parser)
    add_output_arguments(parser)
    parser.add_argument("--rhs", type=int, default=1, help="number of columns in the operand")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    if args.rhs < 1:
        raise InvalidArgumentError(f"--rhs must be >= 1, got {args.rhs}")
    label, source, tree = build_problem(args, config)
    sampling = sampling_config(args, config)
    form = compressed_form(args, config, source, tree)
    eps = form.eps
    A = dense_matrix(source)
    X = np.random.default_rng([sampling.seed, 11]).standard_normal((source.n, args.rhs))

    before = flop_counter.total
    hss_product = hss_matvec(form, X)
    hss_flops = flop_counter.total - before
    dense_product = A @ X
    dense_flops = 2 * source.n * source.n * args.rhs

    error = float(np.linalg.norm(hss_product - dense_product) / (np.linalg.norm(A) * np.linalg.norm(X)))
    report = MatvecBenchReport(
        matrix=label,
        n=source.n,
        rhs=args.rhs,
        max_rank=hss_max_rank(form),
        hss_flops=hss_flops,
        dense_flops=dense_flops,
        relative_error=error,
        checks={"accuracy": error <= ID_ERROR_MULTIPLIER * max(eps, np.finfo(float).eps)},
    )
    emit(report, args)
    return exit_code(report.checks)
