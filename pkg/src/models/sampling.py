"""Sampling configuration for randomized compression."""

from __future__ import annotations

from typing import Any

from pydantic import BaseModel, ConfigDict, Field, model_validator

from src.core.constants import DEFAULT_OVERSAMPLING


class SamplingConfig(BaseModel):
    """Random-vector budget and the adaptive restart schedule."""

    model_config = ConfigDict(frozen=True)

    d0: int = Field(default=64, ge=1)
    delta_d: int = Field(default=64, ge=1)
    oversampling: int = Field(default=DEFAULT_OVERSAMPLING, ge=0)
    gap: int | None = None
    max_d: int = Field(default=2048, ge=1)
    seed: int = Field(default=0, ge=0)

    @model_validator(mode="before")
    @classmethod
    def _default_gap(cls, data: Any) -> Any:
        if isinstance(data, dict) and data.get("gap") is None:
            data = {**data, "gap": data.get("oversampling", DEFAULT_OVERSAMPLING)}
        return data

    @model_validator(mode="after")
    def _check_ranges(self) -> SamplingConfig:
        if self.gap is None or self.gap < 1:
            raise ValueError("gap must be >= 1")
        if self.max_d < self.d0:
            raise ValueError("max_d must be >= d0")
        return self

    @property
    def min_gap(self) -> int:
        assert self.gap is not None
        return self.gap
