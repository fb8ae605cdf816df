"""Machine-readable report models (``schema`` versioned)."""

from __future__ import annotations

from pydantic import BaseModel, ConfigDict, Field

from src.core.constants import REPORT_SCHEMA_VERSION
from src.models.mapping import CommCost, MappingPlan


class NodeRank(BaseModel):
    node: int
    lo: int
    hi: int
    row_rank: int
    col_rank: int


class NodeAttempt(BaseModel):
    """One ID attempt at a node during a sweep with ``d`` samples."""

    sweep: int
    d: int
    node: int
    row_rank: int
    col_rank: int
    accepted: bool


class CompressionReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    n: int
    eps: float
    d0: int
    delta_d: int
    d_final: int
    restarts: list[int] = Field(default_factory=list)
    node_ranks: list[NodeRank] = Field(default_factory=list)
    trace: list[NodeAttempt] = Field(default_factory=list)
    max_rank: int = 0
    flops: int = 0
    bytes: int = 0
    seconds: float | None = None

    model_config = ConfigDict(populate_by_name=True)

    @property
    def restart_count(self) -> int:
        return len(self.restarts)


class MemoryReport(BaseModel):
    dense_bytes: int
    hss_bytes: int
    ulv_bytes: int
    aux_bytes: int
    overhead_vs_total: float
    overhead_vs_dense: float


class RefinementReport(BaseModel):
    converged: bool
    iterations: int
    residuals: list[float]
    final_residual: float


class SolveReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    matrix: str
    n: int
    rhs: int
    compression: CompressionReport
    root_order: int
    factor_flops: int
    solve_flops: int
    memory: MemoryReport
    refinement: RefinementReport
    dense_relative_difference: float | None = None
    checks: dict[str, bool] = Field(default_factory=dict)
    seconds: dict[str, float] | None = None

    model_config = ConfigDict(populate_by_name=True)


class MatvecBenchReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    matrix: str
    n: int
    rhs: int
    max_rank: int
    hss_flops: int
    dense_flops: int
    relative_error: float
    checks: dict[str, bool] = Field(default_factory=dict)

    model_config = ConfigDict(populate_by_name=True)


class PowerRun(BaseModel):
    eigenvalue: float
    iterations: int
    converged: bool


class PowerReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    matrix: str
    n: int
    eps: float
    max_rank: int
    hss: PowerRun
    dense: PowerRun | None = None
    relative_difference: float | None = None
    checks: dict[str, bool] = Field(default_factory=dict)

    model_config = ConfigDict(populate_by_name=True)


class MapPlanReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    weights: str
    plan: MappingPlan
    traversals: dict[int, list[int]] = Field(default_factory=dict)

    model_config = ConfigDict(populate_by_name=True)


class CommModelReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    label: str = "asymptotic, leading constants set to 1"
    kind: str
    n: int
    p: int
    r: int
    cost: CommCost
    dominant_word_term: str
    distribution_exact: CommCost | None = None

    model_config = ConfigDict(populate_by_name=True)


class CombRow(BaseModel):
    label: str
    tree: str
    max_rank: int
    hss_bytes: int
    root_split: tuple[int, int]
    plan: MappingPlan


class CombDemoReport(BaseModel):
    schema_version: int = Field(default=REPORT_SCHEMA_VERSION, alias="schema")
    n: int
    p: int
    leaf_sizes: list[int]
    level_ranks: list[int]
    rows: list[CombRow]
    checks: dict[str, bool] = Field(default_factory=dict)

    model_config = ConfigDict(populate_by_name=True)
