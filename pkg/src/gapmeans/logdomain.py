"""Log-domain primitives.

Everything downstream carries magnitudes as logs (values like exp(2^40)
never exist as floats), so the few reductions here are the only places
where exponentials are materialized.  Summation order inside logsumexp is
fixed (descending) to make every run bit-reproducible regardless of how
callers assembled their term lists.
"""

from __future__ import annotations

import math

import numpy as np

NEG_INF = float("-inf")


def logsumexp(values) -> float:
    """log(sum(exp(values))) with the shifted exponentials summed in
    descending order.

    Accepts any iterable of floats, empty input or all -inf gives -inf.
    """
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return NEG_INF
    m = float(np.max(v))
    if m == NEG_INF:
        return NEG_INF
    if math.isinf(m):
        return math.inf
    shifted = np.sort(v)[::-1] - m
    return m + math.log(float(np.sum(np.exp(shifted))))


def logsumexp_rows(mat: np.ndarray) -> np.ndarray:
    """Row-wise logsumexp of a 2-d array, same descending-order contract.

    Rows that are entirely -inf produce -inf.
    """
    mat = np.asarray(mat, dtype=float)
    m = np.max(mat, axis=1)
    out = np.full(mat.shape[0], NEG_INF)
    ok = m > NEG_INF
    if np.any(ok):
        shifted = mat[ok] - m[ok, None]
        # sort ascending then reverse: descending summands per row
        shifted = np.sort(shifted, axis=1)[:, ::-1]
        out[ok] = m[ok] + np.log(np.sum(np.exp(shifted), axis=1))
    return out


def log1mexp(x: float) -> float:
    """log(1 - exp(-x)) for x > 0, stable at both ends."""
    if x <= 0:
        raise ValueError("log1mexp needs x > 0")
    if x > math.log(2.0):
        return math.log1p(-math.exp(-x))
    return math.log(-math.expm1(-x))


def logdiffexp(a: float, b: float) -> float:
    """log(exp(a) - exp(b)); -inf when the difference is not positive."""
    if b == NEG_INF:
        return a
    if b >= a:
        return NEG_INF
    return a + log1mexp(a - b)
