"""Exception hierarchy."""

from __future__ import annotations

from typing import TYPE_CHECKING

if TYPE_CHECKING:
    from src.models.reports import CompressionReport


class HssError(Exception):
    """Base class for all hssolve errors."""


class InvalidArgumentError(HssError, ValueError):
    """A caller-supplied argument is out of range or malformed."""


class SingularMatrixError(HssError):
    """A pivot fell below the singularity threshold."""


class CorruptFormError(HssError):
    """An HSS form has inconsistent generator dimensions."""


class ContractViolationError(HssError):
    """A matrix source or factor object broke its contract."""


class FormatError(HssError):
    """A binary file has a bad magic, version or length."""


class OracleRefusedError(HssError):
    """A dense oracle was asked to materialize a too-large block."""


class RankBudgetExhaustedError(HssError):
    """Adaptive sampling reached max_d without every node passing the gap test."""

    def __init__(self, message: str, report: CompressionReport | None = None) -> None:
        super().__init__(message)
        self.report = report
