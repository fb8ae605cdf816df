"""Process-mapping and communication-cost models."""

from __future__ import annotations

from pydantic import BaseModel, Field


class NodeAssignment(BaseModel):
    """Processes [first, last) mapped to one node, arranged as a rows x cols grid."""

    node: int
    first: int
    last: int
    grid_rows: int
    grid_cols: int
    idle: int

    @property
    def procs(self) -> int:
        return self.last - self.first


class MappingPlan(BaseModel):
    p: int
    assignments: list[NodeAssignment] = Field(default_factory=list)

    def of(self, node: int) -> NodeAssignment:
        return self.assignments[node]


class CommCost(BaseModel):
    """(messages, words) pair; ``terms`` breaks the words down when meaningful."""

    messages: float
    words: float
    terms: dict[str, float] = Field(default_factory=dict)
