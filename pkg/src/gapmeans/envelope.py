"""Integer-slope Newton envelope of a log-convex weight.

For convex non-decreasing phi(s) = log w(e^s) the support coefficient at
integer slope n is log c_n = inf_s (phi(s) - n s), the log of
c_n = inf w(r)/r^n.  The family of lines (n, log c_n) is the dual object
the gap construction draws its coefficients from: each line minorizes phi,
and the upper envelope of all integer lines tracks phi to within
additive s (factor r of w).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import RangeError
from .weights import LogWeight

NEG_INF = float("-inf")

#: hard exponent cap; beyond this n*s loses relative accuracy in doubles
EXPONENT_CAP = 2 ** 40

#: right end of the ternary-search domain (log-radius just below 0)
S_HI = -(2.0 ** -60)

_TERNARY_ITERS = 200


@dataclass(frozen=True)
class SupportLine:
    """Affine minorant log c_n + n s of phi with its touching log-radius.

    boundary is True when the minimizer sat on an end of the search
    interval, i.e. the line never genuinely touches phi inside (0, 1).
    """

    slope: int
    log_intercept: float
    touch_s: float
    boundary: bool

    def value_at(self, s: float) -> float:
        if self.slope == 0:
            return self.log_intercept
        return self.log_intercept + self.slope * s


def support_coefficient(w: LogWeight, n: int) -> SupportLine:
    """Support line of phi at integer slope n >= 0.

    Ternary search on the convex objective phi(s) - n s over
    [s_floor, S_HI]; for n = 0 the infimum of a non-decreasing phi is the
    r -> 0 limit.
    """
    n = int(n)
    if n < 0:
        raise RangeError(f"slope must be >= 0, got {n}")
    if n == 0:
        return SupportLine(0, w.phi_delta(1.0), NEG_INF, False)

    pd = w._pd_scalar
    lo = w.s_floor
    hi = S_HI

    def h(s: float) -> float:
        return pd(-math.expm1(s)) - n * s

    for _ in range(_TERNARY_ITERS):
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        if h(m1) <= h(m2):
            hi = m2
        else:
            lo = m1
        if (hi - lo) <= 1e-16 * max(-lo, 1e-6):
            break
    s_star = 0.5 * (lo + hi)
    log_c = pd(-math.expm1(s_star)) - n * s_star
    # the iterate location is fooled by float ties on flat objectives
    # (bounded weights make h nearly linear near 0, stalling the ternary
    # mid-interval); an interior touch exists iff the minimum VALUE beats
    # the corner value by more than evaluation noise
    h_corner = h(S_HI)
    right = log_c >= h_corner - 1e-12 * max(1.0, abs(h_corner))
    boundary = right or (s_star <= w.s_floor * (1.0 - 1e-12))
    return SupportLine(n, log_c, s_star, boundary)


def _support_batch(w: LogWeight, slopes: np.ndarray):
    """Vectorized ternary search across many slopes at once."""
    pa = w._pd_array
    ns = slopes.astype(float)
    lo = np.full(ns.shape, w.s_floor)
    hi = np.full(ns.shape, S_HI)

    def h(s):
        return pa(-np.expm1(s)) - ns * s

    for _ in range(_TERNARY_ITERS):
        third = (hi - lo) / 3.0
        m1 = lo + third
        m2 = hi - third
        left = h(m1) <= h(m2)
        hi = np.where(left, m2, hi)
        lo = np.where(left, lo, m1)
    s_star = 0.5 * (lo + hi)
    vals = pa(-np.expm1(s_star)) - ns * s_star
    # same minimum-beats-corner boundary test as the scalar path
    h_corner = h(np.full(ns.shape, S_HI))
    right = vals >= h_corner - 1e-12 * np.maximum(1.0, np.abs(h_corner))
    boundary = right | (s_star <= w.s_floor * (1.0 - 1e-12))
    return s_star, vals, boundary


@dataclass(frozen=True)
class NewtonEnvelope:
    """Support lines sorted by slope, plus the weight they came from."""

    lines: tuple
    source: LogWeight

    @property
    def slopes(self) -> np.ndarray:
        return np.array([l.slope for l in self.lines], dtype=float)

    @property
    def intercepts(self) -> np.ndarray:
        return np.array([l.log_intercept for l in self.lines])

    @property
    def n_max(self) -> int:
        return max(l.slope for l in self.lines)


def thinned_slope_set(n_max: int) -> list[int]:
    """0..16 densely, then geometrically spaced with ratio 1.1, n_max included."""
    slopes = list(range(0, min(16, n_max) + 1))
    n = 16
    while n < n_max:
        n = max(n + 1, int(n * 1.1))
        slopes.append(min(n, n_max))
    return sorted(set(slopes))


def build_envelope(w: LogWeight, n_max: int, slope_grid: str = "thinned") -> NewtonEnvelope:
    """Envelope on a thinned slope set up to n_max.

    slope_grid "thinned" is the default O(log n_max) set; "dense" computes
    every integer slope (useful only for small n_max).
    """
    if n_max < 1:
        raise RangeError(f"n_max must be >= 1, got {n_max}")
    if n_max > EXPONENT_CAP:
        raise RangeError(f"n_max {n_max} exceeds the exponent cap 2^40")
    if slope_grid == "dense":
        slopes = list(range(0, n_max + 1))
    elif slope_grid == "thinned":
        slopes = thinned_slope_set(n_max)
    else:
        raise RangeError(f"unknown slope_grid '{slope_grid}'")

    positive = np.array([n for n in slopes if n > 0], dtype=np.int64)
    s_star, vals, boundary = _support_batch(w, positive)
    lines = [support_coefficient(w, 0)] if 0 in slopes else []
    for i, n in enumerate(positive):
        lines.append(SupportLine(int(n), float(vals[i]), float(s_star[i]), bool(boundary[i])))
    lines.sort(key=lambda l: l.slope)
    return NewtonEnvelope(lines=tuple(lines), source=w)


def envelope_eval(env: NewtonEnvelope, s: float) -> float:
    """log of the maximal term sup_n c_n r^n at s = log r."""
    src = env.source
    if not (src.s_floor <= s < 0.0):
        raise RangeError(f"s={s} outside [{src.s_floor}, 0)")
    return float(np.max(env.intercepts + env.slopes * s))


def envelope_eval_many(env: NewtonEnvelope, s_values: np.ndarray) -> np.ndarray:
    s_values = np.asarray(s_values, dtype=float)
    vals = env.intercepts[None, :] + env.slopes[None, :] * s_values[:, None]
    return np.max(vals, axis=1)


def envelope_csv_text(env: NewtonEnvelope) -> str:
    rows = ["n,log_c_n,touch_s"]
    for line in env.lines:
        rows.append(f"{line.slope},{line.log_intercept:.17g},{line.touch_s:.17g}")
    return "\n".join(rows) + "\n"


def envelope_to_csv(env: NewtonEnvelope, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(envelope_csv_text(env))
