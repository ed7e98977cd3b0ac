"""Miscellaneous utilities and helper functions."""

from __future__ import annotations

import hashlib
import math
import typing

if typing.TYPE_CHECKING:
    from pathlib import Path

INFINITY_TOKEN = "inf"


def kvformat(**kwargs: typing.Any) -> str:
    return " ".join(f"{key}={value}" for key, value in kwargs.items())


def json_number(value: float) -> float | str:
    """Return a JSON-safe representation of a possibly infinite real.

    JSON has no infinity literal, so `+inf` is written as the string `"inf"`.
    """
    if math.isinf(value) and value > 0:
        return INFINITY_TOKEN
    return value


def parse_json_number(value: float | str) -> float:
    """Invert `json_number()`."""
    if value == INFINITY_TOKEN:
        return math.inf
    return float(value)


def file_digest(path: Path) -> str:
    """Return the sha256 hex digest of a file, used to fingerprint CLI inputs."""
    ctx = hashlib.sha256()
    with path.open("rb") as fp:
        for chunk in iter(lambda: fp.read(65536), b""):
            ctx.update(chunk)
    return ctx.hexdigest()


def stirling2(n: int, k: int) -> int:
    """Return the number of partitions of `n` labelled points into `k` blocks."""
    if k < 0 or k > n:
        return 0
    row = [1] + [0] * k
    for i in range(1, n + 1):
        for j in range(min(i, k), 0, -1):
            row[j] = j * row[j] + row[j - 1]
        row[0] = 0
    return row[k]
