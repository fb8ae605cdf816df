"""``comm-model``: leading-order communication costs."""

from __future__ import annotations

import argparse
from typing import Any

from src.commands.common import add_output_arguments, emit
from src.models.reports import CommModelReport
from src.services.mapping import comm_model, distribution_cost_exact, dominant_word_term, resolve_kind


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("comm-model", help="asymptotic message and word counts")
    parser.add_argument("--kind", default="randomized", help="dense_lu | hss_nonrandomized | hss_randomized")
    parser.add_argument("--n", type=int, required=True)
    parser.add_argument("--p", dest="procs", type=int, required=True)
    parser.add_argument("--r", dest="rank", type=int, default=0)
    add_output_arguments(parser)
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    kind = resolve_kind(args.kind)
    cost = comm_model(kind, args.n, args.procs, args.rank)
    exact = None
    if args.procs & (args.procs - 1) == 0:
        exact = distribution_cost_exact(args.n, args.procs)
    report = CommModelReport(
        kind=kind,
        n=args.n,
        p=args.procs,
        r=args.rank,
        cost=cost,
        dominant_word_term=dominant_word_term(cost),
        distribution_exact=exact,
    )
    emit(report, args)
    return 0
