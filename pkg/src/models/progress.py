"""Progress event models."""

from __future__ import annotations

from typing import Literal

from pydantic import BaseModel


class CompressionProgressEvent(BaseModel):
    """A single progress event emitted during compression."""

    stage: Literal["sampling", "compressing", "restarting", "done", "error"]
    d: int = 0
    node: int | None = None
    nodes_done: int = 0
    total_nodes: int = 0
    message: str


class PipelineProgressEvent(BaseModel):
    """A stage transition of the compress -> factor -> solve -> refine pipeline."""

    stage: Literal["compressing", "factoring", "solving", "comparing", "done", "error"]
    message: str
