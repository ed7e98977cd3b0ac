from __future__ import annotations

import pytest

from stable_cluster.config import Budget, budget_from_env, parse_budget
from stable_cluster.exceptions import ParameterOutOfRange


def test_default_budget() -> None:
    budget = Budget()
    assert budget.kmedian_subsets == 2_000_000
    assert budget.minsum_partitions == 5_000_000
    assert budget.dominating_subsets == 2_000_000


@pytest.mark.parametrize(
    ("value", "expected"),
    [
        ("", Budget()),
        ("  ", Budget()),
        ("10", Budget(10, 10, 10)),
        ("minsum=7", Budget(minsum_partitions=7)),
        (
            "kmedian=1, domset=2",
            Budget(kmedian_subsets=1, dominating_subsets=2),
        ),
    ],
)
def test_parse_budget(value: str, expected: Budget) -> None:
    assert parse_budget(value) == expected


@pytest.mark.parametrize("value", ["ten", "0", "kmedian=-1", "subsets=3", "minsum="])
def test_parse_budget_rejects(value: str) -> None:
    with pytest.raises(ParameterOutOfRange):
        parse_budget(value)


def test_parse_budget_keeps_base() -> None:
    base = Budget(kmedian_subsets=3)
    assert parse_budget("domset=4", base=base) == Budget(3, 5_000_000, 4)


def test_budget_from_env(monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.delenv("STABLE_CLUSTER_BUDGET", raising=False)
    assert budget_from_env() == Budget()
    monkeypatch.setenv("STABLE_CLUSTER_BUDGET", "domset=99")
    assert budget_from_env().dominating_subsets == 99
