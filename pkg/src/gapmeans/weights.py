"""Log-convex weights in log-log coordinates.

A weight w on [0,1) is carried exclusively as phi(s) = log w(e^s) for
s = log r < 0.  phi must be convex and non-decreasing; everything
downstream consumes phi, never w.  Families also expose phi as a function
of delta = 1 - r so that grid radii (stored as exact deltas) are evaluated
without the r -> s -> delta round trip.
"""

from __future__ import annotations

import bisect
import csv
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConvexityError,
    InputError,
    MonotonicityError,
    ParameterError,
)
from .grids import Radius
from .logdomain import logsumexp as _lse
from .logdomain import logsumexp_rows as _lse_rows

NEG_INF = float("-inf")

#: default convexity tolerance for sampled weights, relative to local phi scale
TOL_CONVEX = 1e-6

#: most negative trusted log-radius for analytic families; below this the
#: families differ from their r -> 0 limits by well under 1e-25
S_FLOOR = -60.0


@dataclass(frozen=True)
class LogWeight:
    """Immutable log-convex weight.

    phi evaluation dispatches on input type: python floats go through
    math.* scalar code (the gap-selection search makes millions of scalar
    calls), numpy arrays through vectorized code.
    """

    kind: str
    params: dict
    s_floor: float
    _pd_scalar: object = field(repr=False)   # delta -> phi, scalar
    _pd_array: object = field(repr=False)    # delta ndarray -> phi ndarray

    def phi_delta(self, delta):
        if isinstance(delta, np.ndarray):
            return self._pd_array(delta.astype(float))
        return self._pd_scalar(float(delta))

    def phi(self, s):
        """phi at s = log r.  s = -inf means r = 0."""
        if isinstance(s, np.ndarray):
            return self._pd_array(-np.expm1(s.astype(float)))
        s = float(s)
        if s == NEG_INF:
            return self._pd_scalar(1.0)
        return self._pd_scalar(-math.expm1(s))

    def phi_radius(self, rad: Radius) -> float:
        return self._pd_scalar(rad.delta)

    def phi_radii(self, radii) -> np.ndarray:
        deltas = np.array([r.delta for r in radii], dtype=float)
        return self._pd_array(deltas)

    def spec_string(self) -> str:
        if self.kind in ("power", "exp", "log", "constant"):
            name = "const" if self.kind == "constant" else self.kind
            args = ",".join(f"{k}={v}" for k, v in self.params.items())
            return f"{name}:{args}"
        return self.kind


def make_power_weight(alpha: float) -> LogWeight:
    """w(r) = (1-r)^(-alpha)."""
    if not alpha > 0:
        raise ParameterError(f"power weight needs alpha > 0, got {alpha}")
    a = float(alpha)
    return LogWeight(
        kind="power",
        params={"alpha": a},
        s_floor=S_FLOOR,
        _pd_scalar=lambda d: -a * math.log(d),
        _pd_array=lambda d: -a * np.log(d),
    )


def make_exp_weight(c: float, beta: float) -> LogWeight:
    """w(r) = exp(c (1-r)^(-beta))."""
    if not (c > 0 and beta > 0):
        raise ParameterError(f"exp weight needs c, beta > 0, got c={c}, beta={beta}")
    c = float(c)
    b = float(beta)
    return LogWeight(
        kind="exp",
        params={"c": c, "beta": b},
        s_floor=S_FLOOR,
        _pd_scalar=lambda d: c * d ** (-b),
        _pd_array=lambda d: c * d ** (-b),
    )


def make_log_weight(gamma: float) -> LogWeight:
    """w(r) = (log(e/(1-r)))^gamma."""
    if not gamma > 0:
        raise ParameterError(f"log weight needs gamma > 0, got {gamma}")
    g = float(gamma)
    return LogWeight(
        kind="log",
        params={"gamma": g},
        s_floor=S_FLOOR,
        _pd_scalar=lambda d: g * math.log1p(-math.log(d)),
        _pd_array=lambda d: g * np.log1p(-np.log(d)),
    )


def make_constant_weight(A: float) -> LogWeight:
    if not A > 0:
        raise ParameterError(f"constant weight needs A > 0, got {A}")
    la = math.log(float(A))
    return LogWeight(
        kind="constant",
        params={"A": float(A)},
        s_floor=S_FLOOR,
        _pd_scalar=lambda d: la,
        _pd_array=lambda d: np.full_like(d, la),
    )


def weight_product(w1: LogWeight, w2: LogWeight) -> LogWeight:
    """phi = phi1 + phi2 (pointwise product of weights)."""
    s1, s2 = w1._pd_scalar, w2._pd_scalar
    a1, a2 = w1._pd_array, w2._pd_array
    return LogWeight(
        kind="product",
        params={"of": (w1.kind, w2.kind)},
        s_floor=max(w1.s_floor, w2.s_floor),
        _pd_scalar=lambda d: s1(d) + s2(d),
        _pd_array=lambda d: a1(d) + a2(d),
    )


def weight_power(w: LogWeight, q: float) -> LogWeight:
    """w^q, i.e. phi scaled by q."""
    if not q > 0:
        raise ParameterError(f"weight_power needs q > 0, got {q}")
    q = float(q)
    if q == 1.0:
        return w
    ps, pa = w._pd_scalar, w._pd_array
    return LogWeight(
        kind="power-of",
        params={"q": q, "of": w.kind},
        s_floor=w.s_floor,
        _pd_scalar=lambda d: q * ps(d),
        _pd_array=lambda d: q * pa(d),
    )


def _lower_hull(xs: np.ndarray, ys: np.ndarray):
    """Indices of the lower convex hull of the path (xs increasing)."""
    hull: list[int] = []
    for i in range(len(xs)):
        while len(hull) >= 2:
            a, b = hull[-2], hull[-1]
            # drop b if it lies on or above segment a-i
            if (ys[b] - ys[a]) * (xs[i] - xs[a]) >= (ys[i] - ys[a]) * (xs[b] - xs[a]):
                hull.pop()
            else:
                break
        hull.append(i)
    return hull


def weight_from_samples(samples, tol_convex: float = TOL_CONVEX) -> LogWeight:
    """Piecewise-linear log-convex weight from (r, log w) samples.

    The stored curve is the lower convex hull of the samples in (s, phi);
    exactly convex input round-trips unchanged, concave noise within
    tol_convex (relative to the local phi scale) is projected out, anything
    larger is rejected.  Left of the first sample phi continues as a
    constant, right of the last sample by the final slope.
    """
    pts = [(float(r), float(lw)) for r, lw in samples]
    if len(pts) < 3:
        raise InputError(f"need at least 3 samples, got {len(pts)}")
    rs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if not np.all((rs > 0) & (rs < 1)):
        raise InputError("sample radii must lie in (0, 1)")
    if not np.all(np.diff(rs) > 0):
        raise InputError("sample radii must be strictly increasing")

    scale = np.maximum(1.0, np.abs(ys))
    drops = ys[:-1] - ys[1:]
    bad = drops > tol_convex * np.maximum(scale[:-1], scale[1:])
    if np.any(bad):
        i = int(np.argmax(bad))
        raise MonotonicityError(
            f"log w decreases between r={rs[i]} and r={rs[i + 1]}"
        )

    ss = np.log(rs)
    hull_idx = _lower_hull(ss, ys)
    hull_y = np.interp(ss, ss[hull_idx], ys[hull_idx])
    dev = ys - hull_y
    worst = float(np.max(dev / scale))
    if worst > tol_convex:
        i = int(np.argmax(dev / scale))
        raise ConvexityError(
            f"samples deviate from log-convexity by {worst:.3g} "
            f"(> {tol_convex:.3g}) near r={rs[i]}"
        )
    # projection onto the hull, then monotone repair of sub-tolerance dips
    knot_y = np.maximum.accumulate(hull_y)
    knot_s = ss

    s0, y0 = float(knot_s[0]), float(knot_y[0])
    s_last, y_last = float(knot_s[-1]), float(knot_y[-1])
    last_slope = float(
        (knot_y[-1] - knot_y[-2]) / (knot_s[-1] - knot_s[-2])
    )
    ks = [float(v) for v in knot_s]
    ky = [float(v) for v in knot_y]

    def pd_scalar(delta: float) -> float:
        s = math.log1p(-delta) if delta < 1.0 else NEG_INF
        if s <= s0:
            return y0
        if s >= s_last:
            return y_last + last_slope * (s - s_last)
        i = bisect.bisect_right(ks, s) - 1
        t = (s - ks[i]) / (ks[i + 1] - ks[i])
        return ky[i] + t * (ky[i + 1] - ky[i])

    def pd_array(delta: np.ndarray) -> np.ndarray:
        s = np.log1p(-np.minimum(delta, np.nextafter(1.0, 0.0)))
        s = np.where(delta >= 1.0, -np.inf, s)
        out = np.interp(s, knot_s, knot_y)
        out = np.where(s <= s0, y0, out)
        right = s >= s_last
        if np.any(right):
            out = np.where(right, y_last + last_slope * (s - s_last), out)
        return out

    return LogWeight(
        kind="sampled",
        params={"n_samples": len(pts)},
        s_floor=s0,
        _pd_scalar=pd_scalar,
        _pd_array=pd_array,
    )


def hull_log_deviation(samples):
    """Deviation of a positive curve from its log-convex minorant envelope.

    The envelope is the lower convex hull of (log r, log value), lifted to
    be non-decreasing; the returned deviation max|log curve - log envelope|
    is the log of the multiplicative ratio by which the curve strays from
    the nearest log-convex weight below it.

    Returns (max_log_deviation, worst_r, envelope samples as (r, log) pairs).
    """
    pts = [(float(r), float(lw)) for r, lw in samples]
    if len(pts) < 3:
        raise InputError(f"need at least 3 samples, got {len(pts)}")
    rs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if not np.all((rs > 0) & (rs < 1)):
        raise InputError("sample radii must lie in (0, 1)")
    if not np.all(np.diff(rs) > 0):
        raise InputError("sample radii must be strictly increasing")
    ss = np.log(rs)
    hull_idx = _lower_hull(ss, ys)
    env = np.interp(ss, ss[hull_idx], ys[hull_idx])
    env = np.maximum.accumulate(env)
    dev = np.abs(ys - env)
    i = int(np.argmax(dev))
    return float(dev[i]), float(rs[i]), list(zip(rs.tolist(), env.tolist()))


def weight_from_series(coeffs) -> LogWeight:
    """LogWeight from a finite power series sum_k exp(log_a_k) r^k.

    A logsumexp of affine functions of s = log r is convex and
    non-decreasing automatically, so any nonnegative-coefficient series
    with a constant term is a valid weight.
    """
    pairs = sorted((int(k), float(la)) for k, la in coeffs)
    if not pairs:
        raise ParameterError("series weight needs at least one term")
    ks_list = [k for k, _ in pairs]
    if ks_list[0] < 0:
        raise ParameterError(f"negative exponent {ks_list[0]}")
    if ks_list[0] != 0:
        raise ParameterError("series weight needs a k=0 term (w(0) > 0)")
    if len(set(ks_list)) != len(ks_list):
        raise ParameterError("duplicate exponents in series weight")
    ks = np.array(ks_list, dtype=float)
    las = np.array([la for _, la in pairs])
    if not np.all(np.isfinite(las)):
        raise ParameterError("series weight coefficients must be finite")
    la0 = float(las[0])

    def pd_scalar(delta: float) -> float:
        if delta >= 1.0:
            return la0
        s = math.log1p(-delta)
        return _lse(las + ks * s)

    def pd_array(delta: np.ndarray) -> np.ndarray:
        # clamp keeps s finite so the k=0 row never produces 0 * -inf
        s = np.log1p(-np.minimum(delta, np.nextafter(1.0, 0.0)))
        rows = las[None, :] + ks[None, :] * s[:, None]
        out = _lse_rows(rows)
        return np.where(delta >= 1.0, la0, out)

    return LogWeight(
        kind="series",
        params={"n_terms": len(pairs)},
        s_floor=S_FLOOR,
        _pd_scalar=pd_scalar,
        _pd_array=pd_array,
    )


def weight_from_csv(path, tol_convex: float = TOL_CONVEX) -> LogWeight:
    """Samples from a CSV file with header r,log_w."""
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None or [c.strip() for c in reader.fieldnames[:2]] != ["r", "log_w"]:
            raise InputError(f"{path}: expected CSV header 'r,log_w'")
        try:
            samples = [(float(row["r"]), float(row["log_w"])) for row in reader]
        except (TypeError, KeyError, ValueError) as e:
            raise InputError(f"{path}: malformed sample row ({e})")
    return weight_from_samples(samples, tol_convex=tol_convex)


@dataclass(frozen=True)
class ConvexityReport:
    """Worst convexity defect of a curve in (log r, log value) coordinates.

    defect > 0 means the middle point of some triple sits above the chord,
    i.e. the curve is locally concave there.
    """

    max_defect: float
    worst_r: float
    n_triples: int
    tol: float

    @property
    def passed(self) -> bool:
        return self.max_defect <= self.tol

    def to_dict(self) -> dict:
        return {
            "max_defect": self.max_defect,
            "worst_r": self.worst_r,
            "n_triples": self.n_triples,
            "tol": self.tol,
            "pass": self.passed,
        }


def check_log_convexity(curve, tol: float) -> ConvexityReport:
    """Max convexity defect over consecutive triples of (r, log value)."""
    pts = [(float(r), float(y)) for r, y in curve]
    if len(pts) < 3:
        raise InputError(f"need at least 3 curve points, got {len(pts)}")
    rs = np.array([p[0] for p in pts])
    ys = np.array([p[1] for p in pts])
    if not np.all(rs > 0):
        raise InputError("curve radii must be positive (log r must be finite)")
    if not np.all(np.diff(rs) > 0):
        raise InputError("curve radii must be strictly increasing")
    ss = np.log(rs)
    s1, s2, s3 = ss[:-2], ss[1:-1], ss[2:]
    y1, y2, y3 = ys[:-2], ys[1:-1], ys[2:]
    chord = (y1 * (s3 - s2) + y3 * (s2 - s1)) / (s3 - s1)
    defects = y2 - chord
    i = int(np.argmax(defects))
    return ConvexityReport(
        max_defect=float(defects[i]),
        worst_r=float(rs[i + 1]),
        n_triples=len(defects),
        tol=float(tol),
    )


def parse_weight_spec(spec: str, tol_convex: float = TOL_CONVEX) -> LogWeight:
    """Parse the CLI weight grammar.

    power:alpha=2 | exp:c=1,beta=1 | log:gamma=3 | const:A=1 | samples:<path>
    """
    if ":" not in spec:
        raise ParameterError(f"weight spec '{spec}' has no ':'")
    family, rest = spec.split(":", 1)
    family = family.strip().lower()
    if family == "samples":
        return weight_from_csv(rest.strip(), tol_convex=tol_convex)

    kv = {}
    for part in rest.split(","):
        part = part.strip()
        if not part:
            continue
        if "=" not in part:
            raise ParameterError(f"weight spec '{spec}': expected key=value, got '{part}'")
        k, v = part.split("=", 1)
        try:
            kv[k.strip()] = float(v)
        except ValueError:
            raise ParameterError(f"weight spec '{spec}': bad number '{v}'")

    try:
        if family == "power":
            return make_power_weight(kv.pop("alpha"))
        if family == "exp":
            return make_exp_weight(kv.pop("c"), kv.pop("beta"))
        if family == "log":
            return make_log_weight(kv.pop("gamma"))
        if family == "const":
            return make_constant_weight(kv.pop("A"))
    except KeyError as e:
        raise ParameterError(f"weight spec '{spec}': missing parameter {e}")
    raise ParameterError(f"unknown weight family '{family}'")
