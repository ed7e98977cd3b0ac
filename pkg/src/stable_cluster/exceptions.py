from __future__ import annotations

import typing

if typing.TYPE_CHECKING:
    from .metric import ValidationVerdict


class StableClusterException(Exception):
    pass


class InvalidInstance(StableClusterException):
    """Raised when a distance matrix cannot be loaded as a clustering instance."""

    def __init__(self, message: str, verdict: ValidationVerdict | None = None) -> None:
        super().__init__(message)
        self.verdict = verdict


class InvalidClustering(StableClusterException):
    """Raised when an assignment or its centers do not describe a k-partition."""


class InvalidGraph(StableClusterException):
    """Raised when a graph or 3DM instance is malformed."""


class ParameterOutOfRange(StableClusterException):
    """Raised when a numeric parameter falls outside its documented range."""


class BudgetExceeded(StableClusterException):
    """Raised when an exact oracle would enumerate more candidates than allowed."""

    def __init__(self, what: str, *, required: int, budget: int) -> None:
        super().__init__(
            f"{what} requires {required} candidates, which exceeds the enumeration "
            f"budget of {budget}.\n"
            "HINT: raise the limit with the STABLE_CLUSTER_BUDGET environment "
            "variable, or shrink the instance."
        )
        self.required = required
        self.budget = budget


class CertificationFailed(StableClusterException):
    """Raised when no planted draw could be certified by the exact oracles."""
