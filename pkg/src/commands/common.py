"""Shared CLI arguments and builders."""

from __future__ import annotations

import argparse
import logging
from pathlib import Path
from typing import Any

import numpy as np
from pydantic import BaseModel, ValidationError

from src.core.constants import MATRIX_KINDS, TREE_KINDS
from src.core.errors import InvalidArgumentError
from src.models.hss import HssForm
from src.models.sampling import SamplingConfig
from src.models.source import MatrixSource
from src.models.tree import ClusterTree
from src.services.cluster_tree import build_balanced_tree, build_comb_tree, load_tree
from src.services.compression import compress
from src.services.generators import synthetic_hss, toeplitz_qchem, toeplitz_simple
from src.services.hss_core import load_form
from src.services.matrix_io import load_matrix_file

logger = logging.getLogger("hssolve.cli")


def add_matrix_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("matrix and tree")
    group.add_argument("--matrix", choices=MATRIX_KINDS, default="toeplitz-simple")
    group.add_argument("--n", type=int, default=1024, help="matrix order")
    group.add_argument("--file", help="STRUDNS1 matrix file for --matrix file")
    group.add_argument("--spacing", type=float, help="grid spacing of the QChem Toeplitz matrix")
    group.add_argument("--rank", type=int, help="prescribed off-diagonal rank of the synthetic matrix")
    group.add_argument("--tree", choices=TREE_KINDS, default="binary")
    group.add_argument("--leaf-size", type=int)
    group.add_argument("--leaf-sizes", help="comma-separated comb leaf sizes, e.g. 500,500,1000,2000")
    group.add_argument("--tree-json", help="JSON tree description (overrides --tree)")


def add_sampling_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("compression")
    group.add_argument("--eps", type=float)
    group.add_argument("--d0", type=int)
    group.add_argument("--delta-d", type=int)
    group.add_argument("--oversampling", type=int)
    group.add_argument("--gap", type=int)
    group.add_argument("--max-d", type=int)
    group.add_argument("--seed", type=int)


def add_form_argument(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--form", dest="form_path", help="HSSF0001 file to use instead of compressing")


def add_output_arguments(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("output")
    group.add_argument("--json", dest="json_path", help="also write the report to this file")
    group.add_argument("--timings", action="store_true", help="record wall-clock seconds")


def pick(value: Any, fallback: Any) -> Any:
    return fallback if value is None else value


def parse_sizes(text: str) -> list[int]:
    try:
        return [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise InvalidArgumentError(f"bad size list {text!r}") from e


def sampling_config(args: argparse.Namespace, config: dict[str, Any]) -> SamplingConfig:
    section = config["sampling"]
    data = {
        "d0": pick(args.d0, section["d0"]),
        "delta_d": pick(args.delta_d, section["delta_d"]),
        "oversampling": pick(args.oversampling, section["oversampling"]),
        "gap": pick(args.gap, section.get("gap")),
        "max_d": pick(args.max_d, section["max_d"]),
        "seed": pick(args.seed, section["seed"]),
    }
    try:
        return SamplingConfig(**data)
    except ValidationError as e:
        raise InvalidArgumentError(f"invalid sampling settings: {e.errors()[0]['msg']}") from e


def eps_of(args: argparse.Namespace, config: dict[str, Any]) -> float:
    eps = float(pick(args.eps, config["compression"]["eps"]))
    if eps < 0:
        raise InvalidArgumentError(f"eps must be >= 0, got {eps}")
    return eps


def build_tree(args: argparse.Namespace, config: dict[str, Any], n: int) -> ClusterTree:
    if args.tree_json:
        tree = load_tree(args.tree_json)
        if tree.n != n:
            raise InvalidArgumentError(f"tree covers {tree.n} indices but the matrix has order {n}")
        return tree
    if args.tree == "comb":
        if not args.leaf_sizes:
            raise InvalidArgumentError("--tree comb needs --leaf-sizes")
        return build_comb_tree(n, parse_sizes(args.leaf_sizes))
    return build_balanced_tree(n, pick(args.leaf_size, config["compression"]["leaf_size"]))


def build_problem(args: argparse.Namespace, config: dict[str, Any]) -> tuple[str, MatrixSource, ClusterTree]:
    """Matrix source and cluster tree described by the common flags."""
    kind = args.matrix
    if kind == "file":
        if not args.file:
            raise InvalidArgumentError("--matrix file needs --file")
        source: MatrixSource = load_matrix_file(args.file)
        return f"file:{Path(args.file).name}", source, build_tree(args, config, source.n)
    if args.n < 1:
        raise InvalidArgumentError(f"--n must be >= 1, got {args.n}")
    tree = build_tree(args, config, args.n)
    if kind == "toeplitz-simple":
        return kind, toeplitz_simple(args.n), tree
    if kind == "toeplitz-qchem":
        return kind, toeplitz_qchem(args.n, pick(args.spacing, config["generators"]["qchem_spacing"])), tree
    rank = pick(args.rank, config["generators"]["synthetic_rank"])
    seed = pick(args.seed, config["sampling"]["seed"])
    source, _ = synthetic_hss(tree, rank, seed=seed)
    return kind, source, tree


def compressed_form(
    args: argparse.Namespace, config: dict[str, Any], source: MatrixSource, tree: ClusterTree
) -> HssForm:
    """The form read from --form, or a fresh compression of ``source``."""
    if args.form_path:
        form = load_form(args.form_path)
        if form.n != source.n:
            raise InvalidArgumentError(f"form has order {form.n} but the matrix has order {source.n}")
        logger.info("using the saved form %s", args.form_path)
        return form
    form, _ = compress(
        source,
        tree,
        eps_of(args, config),
        sampling_config(args, config),
        source_probes=config["compression"]["source_probes"],
    )
    return form


def dense_matrix(source: MatrixSource) -> np.ndarray:
    """Explicit matrix of a source (Toeplitz and dense sources know theirs)."""
    dense = getattr(source, "dense", None)
    if callable(dense):
        return np.asarray(dense())
    return source.multiply(np.eye(source.n))


def emit(report: BaseModel, args: argparse.Namespace) -> None:
    """Print the report as JSON and optionally write it to --json."""
    text = report.model_dump_json(indent=2, by_alias=True)
    print(text)
    if getattr(args, "json_path", None):
        Path(args.json_path).write_text(text + "\n", encoding="utf-8")
        logger.info("report written to %s", args.json_path)


def exit_code(checks: dict[str, bool]) -> int:
    return 0 if all(checks.values()) else 1
