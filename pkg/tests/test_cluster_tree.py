"""Cluster tree construction, traversal, validation and JSON I/O."""

from __future__ import annotations

import json

import pytest

from src.core.errors import FormatError, InvalidArgumentError
from src.models.tree import ClusterTree, TreeNode
from src.services.cluster_tree import (
    build_balanced_tree,
    build_comb_tree,
    heap_labels,
    load_tree,
    postorder,
    save_tree,
    subtree,
    validate_tree,
)


def _midpoint_leaves(lo: int, hi: int, leaf_size: int) -> list[tuple[int, int]]:
    if hi - lo <= leaf_size:
        return [(lo, hi)]
    mid = (lo + hi) // 2
    return _midpoint_leaves(lo, mid, leaf_size) + _midpoint_leaves(mid, hi, leaf_size)


def _leaf_intervals(tree: ClusterTree) -> list[tuple[int, int]]:
    return [(tree.node(i).lo, tree.node(i).hi) for i in postorder(tree) if tree.is_leaf(i)]


class TestBalancedTree:
    def test_four_leaves_of_one(self):
        tree = build_balanced_tree(4, 1)
        assert len(tree.nodes) == 7
        assert _leaf_intervals(tree) == [(0, 1), (1, 2), (2, 3), (3, 4)]

    def test_single_leaf(self):
        tree = build_balanced_tree(4, 4)
        assert len(tree.nodes) == 1
        assert tree.is_leaf(tree.root_id)
        assert postorder(tree) == [0]

    def test_matches_recursive_midpoint_split(self):
        tree = build_balanced_tree(1000, 128)
        assert len(tree.nodes) == 15
        assert _leaf_intervals(tree) == _midpoint_leaves(0, 1000, 128)
        assert all(tree.node(i).size <= 128 for i in tree.leaves())

    @pytest.mark.parametrize("n,leaf_size", [(1, 1), (7, 2), (100, 9), (513, 64)])
    def test_invariants_hold(self, n, leaf_size):
        tree = build_balanced_tree(n, leaf_size)
        assert validate_tree(tree) == (True, None)
        covered = [i for lo, hi in _leaf_intervals(tree) for i in range(lo, hi)]
        assert covered == list(range(n))

    @pytest.mark.parametrize("n,leaf_size", [(0, 4), (8, 0)])
    def test_rejects_bad_arguments(self, n, leaf_size):
        with pytest.raises(InvalidArgumentError):
            build_balanced_tree(n, leaf_size)


class TestCombTree:
    def test_four_level_comb(self):
        tree = build_comb_tree(40000, [5000, 5000, 10000, 20000])
        assert len(tree.nodes) == 7
        root_left, root_right = tree.children(tree.root_id)
        assert (tree.node(root_right).lo, tree.node(root_right).hi) == (20000, 40000)
        assert tree.is_leaf(root_right)
        inner_left, inner_right = tree.children(root_left)
        assert (tree.node(inner_right).lo, tree.node(inner_right).hi) == (10000, 20000)
        assert _leaf_intervals(tree) == [(0, 5000), (5000, 10000), (10000, 20000), (20000, 40000)]
        assert tree.height() == 3

    def test_single_size_is_a_leaf(self):
        tree = build_comb_tree(10, [10])
        assert len(tree.nodes) == 1

    def test_small_comb(self):
        tree = build_comb_tree(6, [1, 2, 3])
        assert _leaf_intervals(tree) == [(0, 1), (1, 3), (3, 6)]
        assert validate_tree(tree) == (True, None)

    def test_mirror_recurses_on_the_right(self):
        tree = build_comb_tree(8, [1, 1, 2, 4], mirror=True)
        left, right = tree.children(tree.root_id)
        assert tree.is_leaf(left)
        assert (tree.node(left).lo, tree.node(left).hi) == (0, 4)
        assert not tree.is_leaf(right)
        assert validate_tree(tree) == (True, None)

    @pytest.mark.parametrize("sizes", [[], [3, 0, 7], [4, 4]])
    def test_rejects_bad_sizes(self, sizes):
        with pytest.raises(InvalidArgumentError):
            build_comb_tree(10, sizes)


class TestTraversal:
    def test_postorder_of_complete_tree(self):
        tree = build_balanced_tree(4, 1)
        assert postorder(tree) == [3, 4, 1, 5, 6, 2, 0]

    def test_subtree_postorder(self):
        tree = build_balanced_tree(4, 1)
        assert subtree(tree, 2) == [5, 6, 2]
        assert subtree(tree, 4) == [4]

    def test_heap_labels_match_ids_on_complete_tree(self):
        tree = build_balanced_tree(8, 1)
        assert heap_labels(tree) == {i: i for i in range(15)}

    def test_children_precede_parents(self):
        tree = build_comb_tree(100, [10, 20, 30, 40])
        position = {node: k for k, node in enumerate(postorder(tree))}
        for node in tree.nodes:
            if node.parent is not None:
                assert position[node.id] < position[node.parent]

    def test_sibling_and_depth(self):
        tree = build_balanced_tree(4, 1)
        assert tree.sibling(3) == 4
        assert tree.sibling(0) is None
        assert tree.depth(5) == 2


def _tree(n: int, rows: list[tuple[int, int, tuple[int, ...], int | None]]) -> ClusterTree:
    nodes = [TreeNode(id=i, lo=lo, hi=hi, children=ch, parent=p) for i, (lo, hi, ch, p) in enumerate(rows)]
    return ClusterTree(n=n, root_id=0, nodes=nodes)


class TestValidation:
    def test_overlapping_children(self):
        tree = _tree(4, [(0, 4, (1, 2), None), (0, 3, (), 0), (2, 4, (), 0)])
        ok, message = validate_tree(tree)
        assert not ok
        assert "overlap" in message

    def test_gap_between_children(self):
        tree = _tree(4, [(0, 4, (1, 2), None), (0, 1, (), 0), (2, 4, (), 0)])
        ok, message = validate_tree(tree)
        assert not ok
        assert "gap" in message

    def test_non_binary_node(self):
        tree = _tree(3, [(0, 3, (1, 2, 3), None), (0, 1, (), 0), (1, 2, (), 0), (2, 3, (), 0)])
        ok, message = validate_tree(tree)
        assert not ok
        assert "non-binary" in message

    def test_unreachable_node(self):
        tree = _tree(2, [(0, 2, (1, 2), None), (0, 1, (), 0), (1, 2, (), 0), (0, 1, (), None)])
        ok, message = validate_tree(tree)
        assert not ok
        assert "unreachable" in message


class TestJsonIO:
    def test_save_then_load(self, tmp_path):
        tree = build_comb_tree(100, [10, 20, 30, 40])
        path = tmp_path / "tree.json"
        save_tree(tree, path)
        loaded = load_tree(path)
        assert loaded.n == 100
        assert _leaf_intervals(loaded) == _leaf_intervals(tree)
        assert postorder(loaded) == postorder(tree)

    def test_invalid_document(self, tmp_path):
        path = tmp_path / "tree.json"
        path.write_text(
            json.dumps({"n": 4, "nodes": [{"lo": 0, "hi": 4, "children": [1, 2]}, {"lo": 0, "hi": 3}, {"lo": 2, "hi": 4}]}),
            encoding="utf-8",
        )
        with pytest.raises(FormatError):
            load_tree(path)

    def test_unreadable_file(self, tmp_path):
        path = tmp_path / "tree.json"
        path.write_text("not json", encoding="utf-8")
        with pytest.raises(FormatError):
            load_tree(path)

    def test_document_missing_fields(self, tmp_path):
        path = tmp_path / "tree.json"
        path.write_text(json.dumps({"nodes": [{"lo": 0}]}), encoding="utf-8")
        with pytest.raises(FormatError, match="cannot read tree"):
            load_tree(path)
