from __future__ import annotations

import hashlib
import math
import typing

import pytest

from stable_cluster.utils.misc import (
    file_digest,
    json_number,
    kvformat,
    parse_json_number,
    stirling2,
)

if typing.TYPE_CHECKING:
    from pathlib import Path


def test_kvformat() -> None:
    assert kvformat(n=4, k=2, centers=(0, 2)) == "n=4 k=2 centers=(0, 2)"
    assert kvformat() == ""


@pytest.mark.parametrize(
    ("value", "encoded"),
    [(1.5, 1.5), (0.0, 0.0), (math.inf, "inf")],
)
def test_json_number(value: float, encoded: float | str) -> None:
    assert json_number(value) == encoded
    assert parse_json_number(encoded) == value


@pytest.mark.parametrize(
    ("n", "k", "count"),
    [(0, 0, 1), (4, 2, 7), (5, 3, 25), (10, 3, 9330), (3, 4, 0), (3, 0, 0)],
)
def test_stirling2(n: int, k: int, count: int) -> None:
    assert stirling2(n, k) == count


def test_file_digest(tmp_path: Path) -> None:
    path = tmp_path / "instance.json"
    path.write_bytes(b'{"n": 1, "d": [[0.0]]}\n')
    expected = hashlib.sha256(path.read_bytes()).hexdigest()
    assert file_digest(path) == expected
