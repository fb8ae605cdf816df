"""``compress``: build the HSS form and report ranks, restarts and storage."""

from __future__ import annotations

import argparse
import sys
from typing import Any

from src.commands.common import (
    add_matrix_arguments,
    add_output_arguments,
    add_sampling_arguments,
    build_problem,
    emit,
    eps_of,
    sampling_config,
)
from src.models.reports import CompressionReport
from src.services.cluster_tree import save_tree
from src.services.compression import compress
from src.services.hss_core import save_form


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("compress", help="randomized HSS compression")
    add_matrix_arguments(parser)
    add_sampling_arguments(parser)
    add_output_arguments(parser)
    parser.add_argument("--trace", action="store_true", help="print per-node rank attempts to stderr")
    parser.add_argument("--save-form", help="write the HSS form to an HSSF0001 file")
    parser.add_argument("--save-tree", help="write the cluster tree to a JSON file")
    parser.set_defaults(handler=run)


def format_trace(report: CompressionReport) -> str:
    """Rank attempts per node and sample count; failed attempts marked with '*'."""
    columns = sorted({attempt.d for attempt in report.trace})
    cells: dict[int, dict[int, str]] = {}
    for attempt in report.trace:
        rank = max(attempt.row_rank, attempt.col_rank)
        cells.setdefault(attempt.node, {})[attempt.d] = f"{rank}" if attempt.accepted else f"{rank}*"
    lines = ["node " + "".join(f"{f'd={d}':>10}" for d in columns)]
    for node in sorted(cells):
        lines.append(f"{node:<5}" + "".join(f"{cells[node].get(d, ''):>10}" for d in columns))
    return "\n".join(lines)


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    _, source, tree = build_problem(args, config)
    form, report = compress(
        source,
        tree,
        eps_of(args, config),
        sampling_config(args, config),
        source_probes=config["compression"]["source_probes"],
        timings=args.timings,
    )
    if args.save_form:
        save_form(form, args.save_form)
    if args.save_tree:
        save_tree(tree, args.save_tree)
    if args.trace:
        print(format_trace(report), file=sys.stderr)
    emit(report, args)
    return 0
