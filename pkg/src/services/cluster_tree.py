"""Cluster tree construction, traversal, validation and JSON I/O."""

from __future__ import annotations

from collections import deque
from itertools import accumulate
from pathlib import Path
from typing import Callable

from src.core.errors import FormatError, InvalidArgumentError
from src.models.tree import ClusterTree, TreeDocument, TreeNode, TreeNodeDocument

SplitRule = Callable[[int, int], "int | None"]


def _build(n: int, split: SplitRule) -> ClusterTree:
    """Grow a tree top-down; ids follow breadth-first construction order."""
    los: list[int] = [0]
    his: list[int] = [n]
    parents: list[int | None] = [None]
    children: list[tuple[int, ...]] = [()]
    queue: deque[int] = deque([0])
    while queue:
        node = queue.popleft()
        mid = split(los[node], his[node])
        if mid is None:
            continue
        first = len(los)
        for lo, hi in ((los[node], mid), (mid, his[node])):
            los.append(lo)
            his.append(hi)
            parents.append(node)
            children.append(())
            queue.append(len(los) - 1)
        children[node] = (first, first + 1)
    nodes = [
        TreeNode(id=i, lo=los[i], hi=his[i], children=children[i], parent=parents[i])
        for i in range(len(los))
    ]
    return ClusterTree(n=n, root_id=0, nodes=nodes)


def build_balanced_tree(n: int, leaf_size: int) -> ClusterTree:
    """Split every interval longer than leaf_size at its midpoint."""
    if n < 1:
        raise InvalidArgumentError(f"n must be >= 1, got {n}")
    if leaf_size < 1:
        raise InvalidArgumentError(f"leaf_size must be >= 1, got {leaf_size}")

    def split(lo: int, hi: int) -> int | None:
        return (lo + hi) // 2 if hi - lo > leaf_size else None

    return _build(n, split)


def build_comb_tree(n: int, leaf_sizes: list[int], mirror: bool = False) -> ClusterTree:
    """Comb-shaped tree: one sibling per pair recurses, the other is a leaf.

    Leaves are consumed left to right; the first two sizes form the deepest
    sibling pair and each later size becomes the right leaf one level up.
    With ``mirror`` the picture is reflected so the recursing sibling is the
    right child and the last size sits at the left of the root.
    """
    if not leaf_sizes:
        raise InvalidArgumentError("leaf_sizes must not be empty")
    if any(size < 1 for size in leaf_sizes):
        raise InvalidArgumentError("leaf sizes must be positive")
    if sum(leaf_sizes) != n:
        raise InvalidArgumentError(f"leaf sizes sum to {sum(leaf_sizes)}, expected {n}")

    bounds = list(accumulate(leaf_sizes))
    position = {b: k for k, b in enumerate(bounds)}

    def split(lo: int, hi: int) -> int | None:
        if mirror:
            if hi != n:
                return None
            k = position.get(n - lo)
            return None if k is None or k == 0 else n - bounds[k - 1]
        if lo != 0:
            return None
        k = position.get(hi)
        return None if k is None or k == 0 else bounds[k - 1]

    return _build(n, split)


def postorder(tree: ClusterTree) -> list[int]:
    """Children before parents, left subtree before right."""
    return subtree(tree, tree.root_id)


def subtree(tree: ClusterTree, node: int) -> list[int]:
    """Postorder of the subtree rooted at ``node``."""
    order: list[int] = []
    stack: list[tuple[int, bool]] = [(node, False)]
    while stack:
        current, expanded = stack.pop()
        if expanded or tree.is_leaf(current):
            order.append(current)
            continue
        left, right = tree.children(current)
        stack.extend([(current, True), (right, False), (left, False)])
    return order


def heap_labels(tree: ClusterTree) -> dict[int, int]:
    """Top-down labels (root 0, children 2i+1 and 2i+2) keyed by node id."""
    labels = {tree.root_id: 0}
    queue: deque[int] = deque([tree.root_id])
    while queue:
        node = queue.popleft()
        if tree.is_leaf(node):
            continue
        left, right = tree.children(node)
        labels[left] = 2 * labels[node] + 1
        labels[right] = 2 * labels[node] + 2
        queue.extend([left, right])
    return labels


def validate_tree(tree: ClusterTree) -> tuple[bool, str | None]:
    """Check the cluster-tree invariants. Returns (is_valid, error_message)."""
    if not tree.nodes:
        return False, "tree has no nodes"
    if not 0 <= tree.root_id < len(tree.nodes):
        return False, "root id out of range"
    root = tree.node(tree.root_id)
    if root.lo != 0 or root.hi != tree.n:
        return False, f"root interval [{root.lo}, {root.hi}) is not [0, {tree.n})"

    seen: set[int] = set()
    queue: deque[int] = deque([tree.root_id])
    while queue:
        node_id = queue.popleft()
        if node_id in seen:
            return False, f"node {node_id} reached twice"
        seen.add(node_id)
        node = tree.node(node_id)
        if node.lo >= node.hi:
            return False, f"node {node_id} has an empty interval"
        if node.is_leaf:
            continue
        if len(node.children) != 2:
            return False, f"non-binary node {node_id}"
        if any(not 0 <= c < len(tree.nodes) for c in node.children):
            return False, f"node {node_id} references a missing child"
        left, right = (tree.node(c) for c in node.children)
        if left.parent != node_id or right.parent != node_id:
            return False, f"children of node {node_id} do not point back to it"
        if left.hi > right.lo:
            return False, f"children overlap at node {node_id}"
        if left.hi < right.lo:
            return False, f"children of node {node_id} leave a gap"
        if left.lo != node.lo or right.hi != node.hi:
            return False, f"children do not cover node {node_id}"
        queue.extend(node.children)

    if len(seen) != len(tree.nodes):
        return False, f"{len(tree.nodes) - len(seen)} unreachable nodes"
    return True, None


def tree_to_document(tree: ClusterTree) -> TreeDocument:
    return TreeDocument(
        n=tree.n,
        nodes=[TreeNodeDocument(lo=node.lo, hi=node.hi, children=list(node.children)) for node in tree.nodes],
    )


def tree_from_document(document: TreeDocument) -> ClusterTree:
    parents: list[int | None] = [None] * len(document.nodes)
    for node_id, entry in enumerate(document.nodes):
        for child in entry.children:
            if 0 <= child < len(parents):
                parents[child] = node_id
    nodes = [
        TreeNode(id=i, lo=entry.lo, hi=entry.hi, children=tuple(entry.children), parent=parents[i])
        for i, entry in enumerate(document.nodes)
    ]
    return ClusterTree(n=document.n, root_id=0, nodes=nodes)


def save_tree(tree: ClusterTree, path: str | Path) -> None:
    Path(path).write_text(tree_to_document(tree).model_dump_json(indent=2), encoding="utf-8")


def load_tree(path: str | Path) -> ClusterTree:
    """Read and validate a JSON tree description."""
    try:
        document = TreeDocument.model_validate_json(Path(path).read_text(encoding="utf-8"))
    except (OSError, ValueError) as e:
        raise FormatError(f"cannot read tree {path}: {e}") from e
    tree = tree_from_document(document)
    ok, message = validate_tree(tree)
    if not ok:
        raise FormatError(f"invalid tree {path}: {message}")
    return tree
