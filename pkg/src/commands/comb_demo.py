"""``comb-demo``: one comb matrix compressed on a binary and a comb tree, plus mappings."""

from __future__ import annotations

import argparse
from typing import Any

from src.commands.common import add_output_arguments, emit, exit_code, parse_sizes, pick
from src.core.errors import InvalidArgumentError
from src.models.hss import HssForm
from src.models.mapping import MappingPlan
from src.models.reports import CombDemoReport, CombRow
from src.models.sampling import SamplingConfig
from src.models.tree import ClusterTree
from src.services.cluster_tree import build_balanced_tree, build_comb_tree
from src.services.compression import compress
from src.services.generators import comb_leaf_sizes, ranks_by_depth, synthetic_hss
from src.services.hss_core import factor_bytes, hss_max_rank, node_ranks
from src.services.mapping import map_with_weights, proportional_map


def register(subparsers: argparse._SubParsersAction) -> None:
    parser = subparsers.add_parser("comb-demo", help="binary vs comb tree on the comb matrix")
    parser.add_argument("--n", type=int, default=4000)
    parser.add_argument("--leaf-sizes", help="comb leaf sizes (default n/8,n/8,n/4,n/2)")
    parser.add_argument("--level-ranks", default="40,60,70", help="off-diagonal rank per comb level")
    parser.add_argument("--p", dest="procs", type=int, help="number of processes")
    parser.add_argument("--weights", default="right:0.75", help="weights of the third row: right:F | ranks")
    parser.add_argument("--eps", type=float)
    parser.add_argument("--d0", type=int, default=128)
    parser.add_argument("--delta-d", type=int, default=128)
    parser.add_argument("--seed", type=int)
    add_output_arguments(parser)
    parser.set_defaults(handler=run)


def _row(label: str, tree_kind: str, tree: ClusterTree, form: HssForm, plan: MappingPlan) -> CombRow:
    left, right = tree.children(tree.root_id)
    return CombRow(
        label=label,
        tree=tree_kind,
        max_rank=hss_max_rank(form),
        hss_bytes=factor_bytes(form),
        root_split=(plan.of(left).procs, plan.of(right).procs),
        plan=plan,
    )


def run(args: argparse.Namespace, config: dict[str, Any]) -> int:
    n = args.n
    sizes = parse_sizes(args.leaf_sizes) if args.leaf_sizes else comb_leaf_sizes(n)
    level_ranks = parse_sizes(args.level_ranks)
    procs = pick(args.procs, config["mapping"]["procs"])
    seed = pick(args.seed, config["sampling"]["seed"])
    eps = float(pick(args.eps, config["compression"]["eps"]))
    if len(sizes) < 2:
        raise InvalidArgumentError("the comb needs at least two leaves")

    comb = build_comb_tree(n, sizes)
    source, _ = synthetic_hss(comb, ranks_by_depth(comb, level_ranks), seed=seed)
    binary = build_balanced_tree(n, min(sizes))
    sampling = SamplingConfig(
        d0=args.d0,
        delta_d=args.delta_d,
        oversampling=config["sampling"]["oversampling"],
        gap=config["sampling"].get("gap"),
        max_d=max(config["sampling"]["max_d"], n),
        seed=seed,
    )
    probes = config["compression"]["source_probes"]

    binary_form, _ = compress(source, binary, eps, sampling, source_probes=probes)
    comb_form, _ = compress(source, comb, eps, sampling, source_probes=probes)
    comb_ranks = {node: max(r, c) for node, r, c in node_ranks(comb_form)}

    rows = [
        _row("binary tree", "binary", binary, binary_form, proportional_map(binary, procs)),
        _row("comb tree", "comb", comb, comb_form, proportional_map(comb, procs)),
        _row(
            f"comb tree, {args.weights} mapping",
            "comb",
            comb,
            comb_form,
            map_with_weights(comb, procs, args.weights, comb_ranks),
        ),
    ]
    top = max(level_ranks)
    checks = {
        "comb_rank_near_prescribed": top <= rows[1].max_rank <= top + 10,
        "binary_rank_at_least_10x": rows[0].max_rank >= 10 * rows[1].max_rank,
    }
    report = CombDemoReport(n=n, p=procs, leaf_sizes=sizes, level_ranks=level_ranks, rows=rows, checks=checks)
    emit(report, args)
    return exit_code(checks)
