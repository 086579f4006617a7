"""The order-preserving enumeration of {(0,0)} and {(r,s) : 1 <= s <= r}."""

from __future__ import annotations

import math
from typing import NamedTuple


class ScheduleIndex(NamedTuple):
    r: int
    s: int

    @property
    def valid(self) -> bool:
        return (self.r, self.s) == (0, 0) or 1 <= self.s <= self.r


def sigma(r: int, s: int) -> int:
    """Position of (r, s) in dictionary order; (0, 0) comes first."""
    if (r, s) == (0, 0):
        return 0
    if not 1 <= s <= r:
        raise ValueError(f"({r}, {s}) is not in the index set")
    return 1 + r * (r - 1) // 2 + (s - 1)


def sigma_inverse(i: int) -> ScheduleIndex:
    if i < 0:
        raise ValueError("index must be nonnegative")
    if i == 0:
        return ScheduleIndex(0, 0)
    # largest r with 1 + r(r-1)/2 <= i
    r = (1 + math.isqrt(8 * (i - 1) + 1)) // 2
    while 1 + r * (r - 1) // 2 > i:
        r -= 1
    while 1 + (r + 1) * r // 2 <= i:
        r += 1
    return ScheduleIndex(r, i - 1 - r * (r - 1) // 2 + 1)


def schedule(N: int) -> ScheduleIndex:
    """The pair that decides which dictionary entry feeds stage N."""
    if N < 1:
        raise ValueError("stage numbers start at 1")
    return sigma_inverse(N - 1)


def dictionary_source(N: int) -> tuple[int, int]:
    """(level, j) of the dictionary entry g_{level, j} used at stage N."""
    r, s = schedule(N)
    if r == s:
        return 0, r + 1
    return sigma(s, s), r - s


def checkpoint_levels(max_stage: int) -> list[int]:
    """Dictionary levels consumed by stages 1..max_stage, ascending."""
    return sorted({dictionary_source(N)[0] for N in range(1, max_stage + 1)})
