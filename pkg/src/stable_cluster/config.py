"""Enumeration budgets and numeric tolerance.

The exact oracles enumerate exponentially many candidates. Every such oracle
checks the a-priori candidate count against a `Budget` before starting, and
raises `BudgetExceeded` instead of silently truncating.
"""

from __future__ import annotations

import os
from dataclasses import dataclass, replace

from .exceptions import ParameterOutOfRange

BUDGET_ENV_VAR = "STABLE_CLUSTER_BUDGET"

TOLERANCE = 1e-12
"""Absolute tolerance used when comparing costs and distances."""


@dataclass(frozen=True)
class Budget:
    """Upper bounds on the number of candidates an exact oracle may enumerate.

    All arguments are optional.
    """

    kmedian_subsets: int = 2_000_000
    """Maximum number of center subsets scanned by the k-median oracle."""

    minsum_partitions: int = 5_000_000
    """Maximum number of k-block partitions scanned by the min-sum oracle."""

    dominating_subsets: int = 2_000_000
    """Maximum number of vertex subsets scanned by the dominating set oracles."""


_ENV_KEYS = {
    "kmedian": "kmedian_subsets",
    "minsum": "minsum_partitions",
    "domset": "dominating_subsets",
}


def parse_budget(value: str, *, base: Budget | None = None) -> Budget:
    """Parse a budget override.

    Accepts either a single integer, which replaces every limit, or a comma
    separated list of `name=value` pairs where `name` is one of `kmedian`,
    `minsum` or `domset`.

    Raises:
        ParameterOutOfRange: If the value cannot be parsed or is not positive.

    """
    budget = base or Budget()
    value = value.strip()
    if not value:
        return budget

    def _positive(raw: str) -> int:
        try:
            limit = int(raw)
        except ValueError:
            raise ParameterOutOfRange(
                f"Invalid {BUDGET_ENV_VAR} value {raw!r}: expected an integer."
            ) from None
        if limit < 1:
            raise ParameterOutOfRange(f"{BUDGET_ENV_VAR} limits must be positive.")
        return limit

    if "=" not in value:
        limit = _positive(value)
        return Budget(limit, limit, limit)

    changes: dict[str, int] = {}
    for item in value.split(","):
        name, _, raw = item.partition("=")
        field = _ENV_KEYS.get(name.strip())
        if field is None:
            raise ParameterOutOfRange(
                f"Unknown {BUDGET_ENV_VAR} key {name.strip()!r}; "
                f"expected one of {sorted(_ENV_KEYS)}."
            )
        changes[field] = _positive(raw)
    return replace(budget, **changes)


def budget_from_env() -> Budget:
    """Return the default budget, overridden by `STABLE_CLUSTER_BUDGET` if set."""
    return parse_budget(os.environ.get(BUDGET_ENV_VAR, ""))
