"""Cluster tree models."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field


class TreeNode(BaseModel):
    """One node of the cluster tree, owning the half-open interval [lo, hi)."""

    model_config = ConfigDict(frozen=True)

    id: int
    lo: int
    hi: int
    children: tuple[int, ...] = ()
    parent: int | None = None

    @property
    def size(self) -> int:
        return self.hi - self.lo

    @property
    def is_leaf(self) -> bool:
        return not self.children


class ClusterTree(BaseModel):
    """Hierarchical partition of [0, n); node ids are indices into ``nodes``."""

    model_config = ConfigDict(frozen=True)

    n: int
    root_id: int = 0
    nodes: list[TreeNode] = Field(default_factory=list)

    def node(self, node_id: int) -> TreeNode:
        return self.nodes[node_id]

    def is_leaf(self, node_id: int) -> bool:
        return self.nodes[node_id].is_leaf

    def is_root(self, node_id: int) -> bool:
        return node_id == self.root_id

    def children(self, node_id: int) -> tuple[int, int]:
        left, right = self.nodes[node_id].children
        return left, right

    def sibling(self, node_id: int) -> int | None:
        parent = self.nodes[node_id].parent
        if parent is None:
            return None
        left, right = self.children(parent)
        return right if left == node_id else left

    def interval(self, node_id: int) -> range:
        node = self.nodes[node_id]
        return range(node.lo, node.hi)

    def leaves(self) -> list[int]:
        return [node.id for node in self.nodes if node.is_leaf]

    def depth(self, node_id: int) -> int:
        level = 0
        parent = self.nodes[node_id].parent
        while parent is not None:
            level += 1
            parent = self.nodes[parent].parent
        return level

    def height(self) -> int:
        return max(self.depth(leaf) for leaf in self.leaves())


class TreeNodeDocument(BaseModel):
    """Serialized node: {lo, hi, children}."""

    lo: int
    hi: int
    children: list[int] = Field(default_factory=list)


class TreeDocument(BaseModel):
    """JSON tree description: {n, nodes:[{lo, hi, children}]}, root first."""

    n: int
    nodes: list[TreeNodeDocument]
