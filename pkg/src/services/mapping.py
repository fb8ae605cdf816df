"""Proportional mapping of tree nodes to processes and the communication-cost model.

All costs are asymptotic with leading constants set to 1 and logarithms in
base 2; they are meant for comparing variants, not for predicting runtimes.
"""

from __future__ import annotations

import math
from decimal import ROUND_HALF_UP, Decimal
from typing import Callable, Literal

from src.core.errors import InvalidArgumentError
from src.models.mapping import CommCost, MappingPlan, NodeAssignment
from src.models.tree import ClusterTree
from src.services.cluster_tree import postorder, subtree

WeightFunction = Callable[[int], float]
CommKind = Literal["dense_lu", "hss_nonrandomized", "hss_randomized"]

_KIND_ALIASES: dict[str, CommKind] = {
    "dense_lu": "dense_lu",
    "dense": "dense_lu",
    "scalapack": "dense_lu",
    "hss_nonrandomized": "hss_nonrandomized",
    "nonrandomized": "hss_nonrandomized",
    "hss_randomized": "hss_randomized",
    "randomized": "hss_randomized",
}


def grid_shape(procs: int) -> tuple[int, int, int]:
    """As-square-as-possible grid: (rows, cols, idle) with rows = floor(sqrt(P))."""
    if procs < 1:
        raise InvalidArgumentError(f"process count must be >= 1, got {procs}")
    rows = math.isqrt(procs)
    cols = procs // rows
    return rows, cols, procs - rows * cols


def _round_half_away(value: float) -> int:
    return int(Decimal(repr(value)).to_integral_value(rounding=ROUND_HALF_UP))


def interval_weights(tree: ClusterTree) -> WeightFunction:
    return lambda node: float(tree.node(node).size)


def right_fraction_weights(tree: ClusterTree, fraction: float) -> WeightFunction:
    """Every right child weighs ``fraction``, every left child 1 - fraction."""
    if not 0.0 < fraction < 1.0:
        raise InvalidArgumentError(f"right fraction must lie in (0, 1), got {fraction}")

    def weight(node: int) -> float:
        parent = tree.node(node).parent
        if parent is None:
            return 1.0
        return fraction if tree.children(parent)[1] == node else 1.0 - fraction

    return weight


def rank_weights(tree: ClusterTree, node_ranks: dict[int, int]) -> WeightFunction:
    """Subtree sum of rank^2 * interval length."""
    cost = {node: float(node_ranks.get(node, 0)) ** 2 * tree.node(node).size for node in range(len(tree.nodes))}
    totals: dict[int, float] = {}
    for node in postorder(tree):
        totals[node] = cost[node]
        if not tree.is_leaf(node):
            left, right = tree.children(node)
            totals[node] += totals[left] + totals[right]
    return totals.__getitem__


def parse_weights(choice: str, tree: ClusterTree, node_ranks: dict[int, int] | None = None) -> WeightFunction:
    """``uniform`` | ``right:F`` | ``ranks``."""
    if choice == "uniform":
        return interval_weights(tree)
    if choice.startswith("right:"):
        try:
            fraction = float(choice.split(":", 1)[1])
        except ValueError as e:
            raise InvalidArgumentError(f"bad weight option {choice!r}") from e
        return right_fraction_weights(tree, fraction)
    if choice == "ranks":
        if node_ranks is None:
            raise InvalidArgumentError("rank weights need node ranks from a compression")
        return rank_weights(tree, node_ranks)
    raise InvalidArgumentError(f"unknown weight option {choice!r}")


def proportional_map(tree: ClusterTree, p: int, weights: WeightFunction | None = None) -> MappingPlan:
    """Split each node's processes between its children in proportion to their weights.

    The left child gets round(p_f * W1 / (W1 + W2)), rounded half away from
    zero and clamped to [1, p_f - 1]; the right child takes the rest. Once a
    subtree is down to one process it is mapped entirely to that process.
    """
    if p < 1:
        raise InvalidArgumentError(f"p must be >= 1, got {p}")
    weigh = weights or interval_weights(tree)
    ranges: dict[int, tuple[int, int]] = {tree.root_id: (0, p)}
    for node in reversed(postorder(tree)):
        if tree.is_leaf(node):
            continue
        first, last = ranges[node]
        procs = last - first
        left, right = tree.children(node)
        if procs == 1:
            ranges[left] = ranges[right] = (first, last)
            continue
        w_left, w_right = weigh(left), weigh(right)
        if w_left < 0 or w_right < 0:
            raise InvalidArgumentError(f"negative weight below node {node}")
        total = w_left + w_right
        share = procs / 2 if total == 0 else procs * w_left / total
        count = min(max(_round_half_away(share), 1), procs - 1)
        ranges[left] = (first, first + count)
        ranges[right] = (first + count, last)

    assignments = []
    for node in range(len(tree.nodes)):
        first, last = ranges[node]
        rows, cols, idle = grid_shape(last - first)
        assignments.append(
            NodeAssignment(node=node, first=first, last=last, grid_rows=rows, grid_cols=cols, idle=idle)
        )
    return MappingPlan(p=p, assignments=assignments)


def remap_with_ranks(tree: ClusterTree, plan: MappingPlan, node_ranks: dict[int, int]) -> MappingPlan:
    """Re-run the mapping with rank-informed weights; all-zero ranks keep interval weights."""
    weigh = rank_weights(tree, node_ranks)
    if weigh(tree.root_id) == 0:
        return proportional_map(tree, plan.p)
    return proportional_map(tree, plan.p, weigh)


def map_with_weights(
    tree: ClusterTree, p: int, choice: str, node_ranks: dict[int, int] | None = None
) -> MappingPlan:
    """Plan for a weight option; ``ranks`` remaps the interval plan with the compressed ranks."""
    if choice == "ranks":
        if node_ranks is None:
            raise InvalidArgumentError("rank weights need node ranks from a compression")
        return remap_with_ranks(tree, proportional_map(tree, p), node_ranks)
    return proportional_map(tree, p, parse_weights(choice, tree))


def process_traversal(tree: ClusterTree, plan: MappingPlan, proc: int) -> list[int]:
    """Tasks of one process: postorder of its single-process subtree, then the path to the root.

    A process that never ends up alone on a subtree walks from the deepest
    node it shares up to the root.
    """
    if not 0 <= proc < plan.p:
        raise InvalidArgumentError(f"process {proc} outside [0, {plan.p})")

    def holds(node: int) -> bool:
        a = plan.of(node)
        return a.first <= proc < a.last

    node = tree.root_id
    while not tree.is_leaf(node) and plan.of(node).procs > 1:
        left, right = tree.children(node)
        nxt = left if holds(left) else right if holds(right) else None
        if nxt is None:
            break
        node = nxt

    tasks = subtree(tree, node) if plan.of(node).procs == 1 else [node]
    parent = tree.node(node).parent
    while parent is not None:
        tasks.append(parent)
        parent = tree.node(parent).parent
    return tasks


def _log2(p: int) -> float:
    return math.log2(p) if p > 1 else 0.0


def resolve_kind(kind: str) -> CommKind:
    resolved = _KIND_ALIASES.get(kind)
    if resolved is None:
        raise InvalidArgumentError(f"unknown kind {kind!r}")
    return resolved


def comm_model(kind: str, n: int, p: int, r: int = 0) -> CommCost:
    """Leading-order message and word counts per factorization variant."""
    if n < 1 or p < 1 or r < 0:
        raise InvalidArgumentError("need n >= 1, p >= 1 and r >= 0")
    resolved = resolve_kind(kind)
    lg = _log2(p)
    if resolved == "dense_lu":
        words = n * n * lg / math.sqrt(p)
        return CommCost(messages=n * lg, words=words, terms={"lu": words})
    if resolved == "hss_nonrandomized":
        terms = {"dist": n * n / p, "sampling": float(r * n), "tree": r * r * lg}
        return CommCost(messages=p + r * lg * lg, words=sum(terms.values()), terms=terms)
    terms = {"dist": n * n / p, "gemm": r * n / math.sqrt(p), "tree": float(r * r)}
    return CommCost(messages=p * lg + r * lg + r * lg * lg, words=sum(terms.values()), terms=terms)


def dominant_word_term(cost: CommCost) -> str:
    if not cost.terms:
        return ""
    return max(cost.terms, key=lambda name: cost.terms[name])


def distribution_cost_exact(n: int, p: int) -> CommCost:
    """Per-level sums of the recursive redistribution, p a power of two."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if p < 1 or p & (p - 1):
        raise InvalidArgumentError(f"p must be a power of two, got {p}")
    messages = 0.0
    words = 0.0
    for i in range(1, p.bit_length()):
        share = 2**i
        block = (n / share) ** 2
        messages += p + (share - 1) * p / share
        words += block / (p / share) + (share - 1) * block / p
    return CommCost(messages=messages, words=words)
