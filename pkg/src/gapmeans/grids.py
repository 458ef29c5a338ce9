"""Radius handling and certificate grids.

A radius near 1 is stored through delta = 1 - r, never through r itself:
on the dyadic grid r_j = 1 - 2^-j the float r loses all the precision
that matters, while delta is exact.  s = log r is derived via log1p so
that n*s keeps full relative accuracy for exponents up to the 2^40 cap.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import RangeError

NEG_INF = float("-inf")


@dataclass(frozen=True, order=True)
class Radius:
    """A radius in [0, 1) carried as delta = 1 - r."""

    sort_key: float
    delta: float

    def __init__(self, delta: float):
        if not (0.0 < delta <= 1.0):
            raise RangeError(f"delta = 1 - r must be in (0, 1], got {delta}")
        object.__setattr__(self, "delta", float(delta))
        object.__setattr__(self, "sort_key", -float(delta))

    @classmethod
    def from_r(cls, r: float) -> "Radius":
        if isinstance(r, Radius):
            return r
        if not (0.0 <= r < 1.0):
            raise RangeError(f"radius must be in [0, 1), got {r}")
        return cls(1.0 - float(r))

    @classmethod
    def from_s(cls, s: float) -> "Radius":
        """From s = log r (s <= 0; s = -inf is r = 0)."""
        if s == NEG_INF:
            return cls(1.0)
        if s > 0:
            raise RangeError(f"log-radius must be <= 0, got {s}")
        return cls(-math.expm1(s))

    @classmethod
    def dyadic(cls, j: int) -> "Radius":
        return cls(2.0 ** (-j))

    @property
    def r(self) -> float:
        return 1.0 - self.delta

    @property
    def s(self) -> float:
        """log r, exactly -inf at r = 0."""
        if self.delta == 1.0:
            return NEG_INF
        return math.log1p(-self.delta)

    def __repr__(self):
        return f"Radius(r={self.r!r}, delta={self.delta!r})"


def as_radius(r) -> Radius:
    return r if isinstance(r, Radius) else Radius.from_r(r)


def dyadic_grid(j_max: int) -> list[Radius]:
    """r_j = 1 - 2^-j for j = 0..j_max (r_0 = 0)."""
    if j_max < 0:
        raise RangeError("j_max must be >= 0")
    return [Radius.dyadic(j) for j in range(j_max + 1)]


def merge_grids(*grids) -> list[Radius]:
    """Sorted union (by r, duplicates removed by delta)."""
    seen = {}
    for g in grids:
        for rad in g:
            seen[rad.delta] = rad
    return [seen[d] for d in sorted(seen, reverse=True)]


def midpoints_s(s_values) -> list[Radius]:
    """Geometric-mean radii between consecutive log-radii."""
    out = []
    svals = sorted(s_values)
    for a, b in zip(svals, svals[1:]):
        m = 0.5 * (a + b)
        if m < 0:
            out.append(Radius.from_s(m))
    return out
