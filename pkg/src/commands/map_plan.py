"""``map-plan``: proportional mapping of the cluster tree onto p processes."""

from __future__ import annotations

import argparse
from typing import Any

from src.commands.common import (
    add_matrix_arguments,
    add_output_arguments,
    add_sampling_arguments,
    build_problem,
    build_tree,
    emit,
    eps_of,
    pick,
    sampling_config,
)
from src.models.reports import MapPlanReport
from src.services.cluster_tree import save_tree
from src.services.compression import compress
from src.services.hss_core import node_ranks
from src.services.mapping import map_with_weights, process_traversal


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("map-plan", help="proportional process mapping and 2D grids")
    add_matrix_arguments(parser)
    add_sampling_arguments(parser)
    add_output_arguments(parser)
    parser.add_argument("--p", dest="procs", type=int, help="number of processes")
    parser.add_argument("--weights", default="uniform", help="uniform | right:F | ranks")
    parser.add_argument("--traversals", action="store_true", help="include every process's task list")
    parser.add_argument("--save-tree", help="write the cluster tree to a JSON file")
    parser.set_defaults(handler=run)


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    procs = pick(args.procs, config["mapping"]["procs"])
    ranks = None
    if args.weights == "ranks":
        _, source, tree = build_problem(args, config)
        form, _ = compress(
            source,
            tree,
            eps_of(args, config),
            sampling_config(args, config),
            source_probes=config["compression"]["source_probes"],
        )
        ranks = {node: max(r, c) for node, r, c in node_ranks(form)}
    else:
        tree = build_tree(args, config, args.n)
    plan = map_with_weights(tree, procs, args.weights, ranks)
    if args.save_tree:
        save_tree(tree, args.save_tree)
    traversals = {proc: process_traversal(tree, plan, proc) for proc in range(procs)} if args.traversals else {}
    emit(MapPlanReport(weights=args.weights, plan=plan, traversals=traversals), args)
    return 0
