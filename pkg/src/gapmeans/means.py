"""Sphere and volume means of gap series.

Two evaluation regimes per radius.  "sampled": exact coefficient identity
for p=2, and FFT evaluation at N equispaced angles otherwise, with an
enforced convergence check under doubling of N.  "bounds": certified
two-sided intervals from the exact M_2, the triangle-inequality sup bound
and an interpolation inequality; used where the active exponents exceed
the resolution cap.

Volume and radially weighted means reduce to the polar identity
    V_q(f,r)^q = 2d r^{-2d} int_0^r M_q(f,t)^q u(t) t^{2d-1} dt
integrated adaptively in the log domain on a partition refined toward
t = r.  All magnitudes stay in logs throughout; nothing here exponentiates
a weight-sized quantity.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    AccuracyError,
    InconsistentInputsError,
    InputError,
    RangeError,
    ResolutionError,
)
from .grids import Radius, as_radius
from .lacunary import GapSeries, certify_dominance
from .logdomain import NEG_INF, logsumexp

N_CAP = 1 << 23
N_MIN = 512
ACTIVE_WINDOW = 40.0          # nats below the max term still folded in
CONV_TOL = 1e-8               # doubling agreement for sampled means
EXACT_UNCERTAINTY = 4e-13     # logsumexp rounding allowance, coeff path

_GL8 = np.polynomial.legendre.leggauss(8)
_GL16 = np.polynomial.legendre.leggauss(16)


def _next_pow2(x: int) -> int:
    return 1 << max(x - 1, 0).bit_length()


# ---------------------------------------------------------------------------
# circle evaluation


def _fold(gs: GapSeries, rad: Radius, n_angles: int):
    """Half-spectrum |f| at n_angles equispaced angles, log-factored.

    Returns (L, mags) with log|f(r e^{i 2 pi j / N})| = L + log(mags[j]),
    j = 0..N/2 (conjugate symmetry covers the rest).  Exact pointwise for
    any exponent size: exponents fold modulo N before a single real FFT.
    """
    s = rad.s
    half = n_angles // 2 + 1
    if s == NEG_INF or not gs.terms:
        return gs.log_const, np.ones(half)
    y = gs.log_coeffs + gs.exponents.astype(float) * s
    ymax = max(float(np.max(y)), gs.log_const)
    if ymax == NEG_INF:
        return NEG_INF, np.ones(half)
    bins = np.zeros(n_angles)
    mask = y >= ymax - ACTIVE_WINDOW
    np.add.at(bins, gs.exponents[mask] % n_angles, np.exp(y[mask] - ymax))
    if gs.log_const >= ymax - ACTIVE_WINDOW:
        bins[0] += math.exp(gs.log_const - ymax)
    return ymax, np.abs(np.fft.rfft(bins))


def circle_log_abs(gs: GapSeries, r, n_angles: int) -> np.ndarray:
    """log|f| at angles 2*pi*j/n_angles, j = 0..n_angles//2."""
    rad = as_radius(r)
    L, mags = _fold(gs, rad, n_angles)
    if L == NEG_INF:
        return np.full(len(mags), NEG_INF)
    with np.errstate(divide="ignore"):
        return L + np.log(mags)


def _pmean_from_fold(L: float, mags: np.ndarray, n_angles: int, p) -> float:
    if L == NEG_INF:
        return NEG_INF
    if p == math.inf:
        top = float(np.max(mags))
        return NEG_INF if top == 0.0 else L + math.log(top)
    powed = mags ** p
    total = powed[0] + powed[-1] + 2.0 * float(np.sum(powed[1:-1]))
    mean = total / n_angles
    return NEG_INF if mean == 0.0 else L + math.log(mean) / p


def _active_exponent(gs: GapSeries, rad: Radius) -> int:
    if not gs.terms or rad.s == NEG_INF:
        return 0
    y = gs.log_coeffs + gs.exponents.astype(float) * rad.s
    ymax = max(float(np.max(y)), gs.log_const)
    if ymax == NEG_INF:
        return 0
    act = gs.exponents[y >= ymax - ACTIVE_WINDOW]
    return int(act.max()) if len(act) else 0


def required_angles(gs: GapSeries, r) -> int:
    """Smallest admissible power-of-two sample count at this radius."""
    rad = as_radius(r)
    return max(N_MIN, _next_pow2(8 * max(_active_exponent(gs, rad), 1)))


def mp_sampled_info(gs: GapSeries, p, r, n_angles: int | None = None):
    """(log M_p, achieved doubling delta, N used).  See mp_sampled."""
    rad = as_radius(r)
    if not (p == math.inf or p > 0):
        raise InputError(f"p must be positive or inf, got {p}")
    req = required_angles(gs, rad)
    if req > N_CAP:
        raise ResolutionError(
            f"radius r={rad.r} needs {req} angles (cap {N_CAP}); "
            "use bounds mode")
    n = req if n_angles is None else int(n_angles)
    if n < req:
        raise ResolutionError(
            f"{n} angles below resolution requirement {req}; "
            "use bounds mode")
    if n > N_CAP:
        raise ResolutionError(f"{n} angles above cap {N_CAP}")
    n = _next_pow2(n)

    ladder = [n]
    while ladder[-1] * 2 <= N_CAP:
        ladder.append(ladder[-1] * 2)
    if len(ladder) == 1:
        ladder = [n // 2, n]
    prev = _pmean_from_fold(*_fold(gs, rad, ladder[0]), ladder[0], p)
    for nn in ladder[1:]:
        cur = _pmean_from_fold(*_fold(gs, rad, nn), nn, p)
        if prev == cur == NEG_INF:
            return NEG_INF, 0.0, nn
        delta = abs(cur - prev)
        if delta <= CONV_TOL:
            return cur, delta, nn
        prev = cur
    raise AccuracyError(
        f"p-mean did not stabilize under angle doubling up to {N_CAP} "
        f"at r={rad.r}, p={p}")


def mp_sampled(gs: GapSeries, p, r, n_angles: int | None = None) -> float:
    """log M_p(f, r) by equispaced-angle quadrature (max for p=inf).

    The angle count starts at max(512, next_pow2(8 * n_act)) with n_act
    the largest exponent within 40 nats of the maximal term, and doubles
    until two consecutive counts agree to 1e-8 in the log.
    """
    return mp_sampled_info(gs, p, r, n_angles)[0]


# ---------------------------------------------------------------------------
# exact and certified paths


def m2_exact(gs: GapSeries, r) -> float:
    """log M_2 via the coefficient identity; exact at any radius."""
    rad = as_radius(r)
    ys = 2.0 * gs.all_logs(rad)
    return 0.5 * logsumexp(ys)


@dataclass(frozen=True)
class IntervalValue:
    log_lo: float
    log_hi: float

    def __post_init__(self):
        if not self.log_lo <= self.log_hi:
            raise InputError(
                f"interval lower end {self.log_lo} above upper {self.log_hi}")

    @property
    def mid(self) -> float:
        if self.log_lo == NEG_INF:
            return self.log_hi
        return 0.5 * (self.log_lo + self.log_hi)

    @property
    def half_width(self) -> float:
        if self.log_lo == NEG_INF or self.log_hi == math.inf:
            return math.inf
        return 0.5 * (self.log_hi - self.log_lo)


def minf_bounds(gs: GapSeries, r) -> IntervalValue:
    """Two-sided log M_inf interval, sound for any coefficient phases.

    Upper end: triangle inequality (logsumexp of all term magnitudes).
    Lower end: best of reverse triangle around the maximal term, the
    constant term (the circle mean of f), and the exact M_2.
    """
    rad = as_radius(r)
    vals = gs.all_logs(rad)
    hi = logsumexp(vals)
    j = int(np.argmax(vals))
    rest = logsumexp(np.delete(vals, j))
    if rest == NEG_INF:
        lo = float(vals[j])
    elif vals[j] > rest:
        lo = vals[j] + math.log1p(-math.exp(rest - vals[j]))
    else:
        lo = NEG_INF
    lo = max(lo, gs.log_const, m2_exact(gs, rad))
    return IntervalValue(min(lo, hi), hi)


def mp_lower_bound_holder(m2: float, minf_hi: float, p: float) -> float:
    """Lower bound on log M_p for 0<p<2 from M_2^2 <= M_inf^{2-p} M_p^p."""
    if not 0 < p < 2:
        raise InputError(f"p must lie in (0, 2), got {p}")
    if m2 > minf_hi:
        raise InconsistentInputsError(
            f"m2={m2} exceeds the sup-norm upper bound {minf_hi}")
    return (2.0 * m2 - (2.0 - p) * minf_hi) / p


def mp_interval(gs: GapSeries, p, r) -> IntervalValue:
    """Certified interval for log M_p at any radius (bounds mode)."""
    rad = as_radius(r)
    m2 = m2_exact(gs, rad)
    if p == 2:
        return IntervalValue(m2, m2)
    iv = minf_bounds(gs, rad)
    # at magnitudes ~2^k the arithmetic below can land one ulp across the
    # exact ordering M_p <= M_2 <= M_inf (p < 2); clamp with the ordering
    if p == math.inf:
        lo = max(iv.log_lo, m2)
        return IntervalValue(lo, max(iv.log_hi, lo))
    if p < 2:
        hi = max(iv.log_hi, m2)
        return IntervalValue(min(mp_lower_bound_holder(m2, hi, p), m2), m2)
    return IntervalValue(m2, max(iv.log_hi, m2))


def measure_concentration_check(gs: GapSeries, w, r, n_angles: int) -> float:
    """Fraction of the circle where |f(r zeta)| >= w(r)/2."""
    rad = as_radius(r)
    logs = circle_log_abs(gs, rad, n_angles)
    threshold = w.phi_radius(rad) - math.log(2.0)
    hits = (logs >= threshold).astype(float)
    total = hits[0] + hits[-1] + 2.0 * float(np.sum(hits[1:-1]))
    return total / n_angles


def parity_min_log(g1: GapSeries, g2: GapSeries, r,
                   n_angles: int = 4096) -> float:
    """min over sampled angles of log(|g1| + |g2|) at radius r."""
    rad = as_radius(r)
    a = circle_log_abs(g1, rad, n_angles)
    b = circle_log_abs(g2, rad, n_angles)
    return float(np.min(np.logaddexp(a, b)))


def parity_certified_floor(gs: GapSeries, r) -> float:
    """Dominance-certified pointwise floor for |g1| + |g2|.

    The maximal gap term of f beats the rest of its parity class by the
    certificate margin m, so that class's block alone is >=
    a_k r^{n_k} (1 - e^{-m}) at every angle.
    """
    rad = as_radius(r)
    term_y = gs.term_logs(rad)
    if len(term_y) == 0:
        return NEG_INF
    y_best = float(np.max(term_y))
    m = certify_dominance(gs, [rad]).margin_parity[0]
    if m == math.inf:
        return y_best
    if m <= 0.0:
        return NEG_INF
    return y_best + math.log1p(-math.exp(-m))


# ---------------------------------------------------------------------------
# profiles


MODE_SAMPLED = "sampled"
MODE_BOUNDS = "bounds"


@dataclass(frozen=True)
class ProfilePoint:
    r: float
    log_value: float
    mode: str
    log_uncertainty: float
    log_lo: float
    log_hi: float


@dataclass(frozen=True)
class MeansProfile:
    kind: str                 # sphere_p | volume_q | weighted_q
    p_or_q: float
    dim: int
    weighting: str | None
    points: tuple

    def radii(self):
        return [pt.r for pt in self.points]

    def curve(self):
        """(r, log_value) pairs at positive radii with finite values."""
        return [(pt.r, pt.log_value) for pt in self.points
                if pt.r > 0.0 and math.isfinite(pt.log_value)]

    def to_csv_text(self) -> str:
        rows = ["r,log_value,mode,log_uncertainty"]
        for pt in self.points:
            rows.append("%.17g,%.17g,%s,%.17g" % (
                pt.r, pt.log_value, pt.mode, pt.log_uncertainty))
        return "\n".join(rows) + "\n"

    def save_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write(self.to_csv_text())


MODE_POLICIES = ("auto", "sampled-only", "bounds-only")


def _sphere_point(gs: GapSeries, p, rad: Radius,
                  mode_policy: str = "auto") -> ProfilePoint:
    if mode_policy not in MODE_POLICIES:
        raise InputError(f"unknown mode policy '{mode_policy}'")
    if mode_policy != "bounds-only":
        if p == 2:
            v = m2_exact(gs, rad)
            return ProfilePoint(rad.r, v, MODE_SAMPLED, EXACT_UNCERTAINTY,
                                v - EXACT_UNCERTAINTY, v + EXACT_UNCERTAINTY)
        try:
            v, delta, _ = mp_sampled_info(gs, p, rad)
            unc = max(delta, 1e-14)
            return ProfilePoint(rad.r, v, MODE_SAMPLED, unc, v - unc, v + unc)
        except (ResolutionError, AccuracyError):
            # either flavor means the sampler cannot certify this radius:
            # N above cap, or doubling reached the cap without stabilizing
            # (|f|^p with p < 2 is cusped at near-zeros of f)
            if mode_policy == "sampled-only":
                raise
    iv = mp_interval(gs, p, rad)
    return ProfilePoint(rad.r, iv.mid, MODE_BOUNDS, iv.half_width,
                        iv.log_lo, iv.log_hi)


def sphere_profile(gs: GapSeries, p, radii,
                   mode_policy: str = "auto") -> MeansProfile:
    """M_p profile over a radius list with per-point mode selection."""
    rads = sorted((as_radius(r) for r in radii), key=lambda rd: rd.r)
    pts = tuple(_sphere_point(gs, p, rad, mode_policy) for rad in rads)
    return MeansProfile("sphere_p", float(p) if p != math.inf else math.inf,
                        gs.dim, None, pts)


# ---------------------------------------------------------------------------
# radial factors for weighted means


@dataclass(frozen=True)
class RadialFactor:
    """Strictly positive radial factor u(t), handled in the log domain."""
    label: str
    _log_u: object

    def log_u(self, t: float) -> float:
        return self._log_u(t)

    @classmethod
    def one(cls):
        return cls("1", lambda t: 0.0)

    @classmethod
    def from_weight(cls, w):
        return cls(w.spec_string(), lambda t: w.phi_radius(as_radius(t)))

    @classmethod
    def reciprocal(cls, w):
        """u = 1/w for a LogWeight w (log-concave factor, e.g. 1-t)."""
        return cls(f"1/({w.spec_string()})",
                   lambda t: -w.phi_radius(as_radius(t)))

    @classmethod
    def alpha_factor(cls, alpha: float):
        """u(t) = (1 - t^2)^alpha."""
        if alpha <= 0:
            raise InputError(f"alpha must be positive, got {alpha}")

        def f(t):
            delta = as_radius(t).delta
            return alpha * (math.log(delta) + math.log(2.0 - delta))

        return cls(f"(1-t^2)^{alpha:g}", f)


# ---------------------------------------------------------------------------
# volume means: adaptive log-domain polar quadrature


class _SphereEvaluator:
    """Memoized interval-valued q-th sphere means of one series."""

    def __init__(self, gs: GapSeries, q):
        self.gs = gs
        self.q = q
        self.cache: dict = {}
        self.any_bounds = False

    def point(self, t: float):
        rad = as_radius(t)
        got = self.cache.get(rad.delta)
        if got is not None:
            return got
        if self.q == 2:
            v = m2_exact(self.gs, rad)
            out = (v, v)
        else:
            try:
                v, delta, _ = mp_sampled_info(self.gs, self.q, rad)
                # the doubling agreement underestimates the residual of
                # the finer grid; keep a margin on it
                unc = max(4.0 * delta, 1e-13)
                out = (v - unc, v + unc)
            except (ResolutionError, AccuracyError):
                iv = mp_interval(self.gs, self.q, rad)
                out = (iv.log_lo, iv.log_hi)
                self.any_bounds = True
        self.cache[rad.delta] = out
        return out


def _gl_pair(g, a: float, b: float):
    """(GL8, GL16, node noise) log-integral estimates of exp(g) on [a, b].

    node noise is the widest point bracket encountered; the quadrature
    cannot be meaningfully refined below it.
    """
    half = 0.5 * (b - a)
    mid = 0.5 * (a + b)
    outs = []
    noise = 0.0
    for nodes, wts in (_GL8, _GL16):
        ts = mid + half * nodes
        vals = np.array([g(t) for t in ts])   # (n, 2) lo/hi columns
        logwts = np.log(wts * half)
        lo = logsumexp(vals[:, 0] + logwts)
        hi = logsumexp(vals[:, 1] + logwts)
        outs.append((lo, hi))
        finite = np.isfinite(vals[:, 1])
        if np.any(finite):
            noise = max(noise, float(np.max(vals[finite, 1] - vals[finite, 0])))
    return outs[0], outs[1], noise


def _adaptive_segment(g, a: float, b: float, tol: float, depth: int = 0):
    (lo8, hi8), (lo16, hi16), noise = _gl_pair(g, a, b)
    err = 0.0
    if lo16 != NEG_INF:
        err = max(err, abs(lo16 - lo8))
    if hi16 != NEG_INF:
        err = max(err, abs(hi16 - hi8))
    if err <= tol or (hi16 == NEG_INF and hi8 == NEG_INF):
        return lo16, hi16
    if err <= 4.0 * noise:
        # the rule disagreement is dominated by the integrand's own point
        # uncertainty; bisection cannot reduce it, so absorb it into the
        # bracket instead of recursing
        return lo16 - err, hi16 + err
    if depth >= 40:
        raise AccuracyError(
            f"polar quadrature failed to converge on [{a}, {b}]")
    m = 0.5 * (a + b)
    l1, h1 = _adaptive_segment(g, a, m, tol, depth + 1)
    l2, h2 = _adaptive_segment(g, m, b, tol, depth + 1)
    return np.logaddexp(l1, l2), np.logaddexp(h1, h2)


def _log_slice_integral(g, lo: float, hi: float, tol: float):
    """log int_lo^hi exp(g(t)) dt with refinement toward t = hi."""
    width = hi - lo
    if width <= 0.0:
        return NEG_INF, NEG_INF
    acc_lo, acc_hi = NEG_INF, NEG_INF
    g_end_hi = g(hi)[1]
    a = lo
    for i in range(1, 80):
        b = hi - width * 0.5 ** i
        if b <= a or hi - a <= hi * 4e-16:
            break
        sl, sh = _adaptive_segment(g, a, b, tol)
        acc_lo = float(np.logaddexp(acc_lo, sl))
        acc_hi = float(np.logaddexp(acc_hi, sh))
        a = b
        remaining = g_end_hi + math.log(hi - a) if hi > a else NEG_INF
        if i >= 4 and remaining <= acc_hi - 46.0:
            break
    if hi > a:
        sl, sh = _adaptive_segment(g, a, hi, tol)
        acc_lo = float(np.logaddexp(acc_lo, sl))
        acc_hi = float(np.logaddexp(acc_hi, sh))
    return acc_lo, acc_hi


def _volume_sweep(gs: GapSeries, q, radii, d: int,
                  u: RadialFactor | None, rtol: float):
    """Shared engine: cumulative polar integrals over increasing radii."""
    if q == math.inf or not q > 0:
        raise InputError(f"q must be finite positive, got {q}")
    if d < 1:
        raise RangeError(f"dimension must be >= 1, got {d}")
    factor = u or RadialFactor.one()
    ev = _SphereEvaluator(gs, q)
    # q != 2 points come from circle sampling whose own accuracy is the
    # doubling tolerance; demanding more of the segments just recurses
    # into evaluator jitter
    seg_tol = max(rtol / 100.0, 1e-12 if q == 2 else 3.0 * CONV_TOL / 10.0)

    def g(t: float):
        slo, shi = ev.point(t)
        base = (2 * d - 1) * math.log(t) + factor.log_u(t) if t > 0 else NEG_INF
        if base == NEG_INF:
            return NEG_INF, NEG_INF
        return q * slo + base, q * shi + base

    rads = sorted((as_radius(r) for r in radii), key=lambda rd: rd.r)
    out = []
    acc_lo, acc_hi = NEG_INF, NEG_INF
    prev = 0.0
    log2d = math.log(2 * d)
    for rad in rads:
        if rad.r == 0.0:
            v = gs.log_const + factor.log_u(0.0) / q
            out.append(ProfilePoint(0.0, v, MODE_SAMPLED, EXACT_UNCERTAINTY,
                                    v - EXACT_UNCERTAINTY,
                                    v + EXACT_UNCERTAINTY))
            continue
        sl, sh = _log_slice_integral(g, prev, rad.r, seg_tol)
        acc_lo = float(np.logaddexp(acc_lo, sl))
        acc_hi = float(np.logaddexp(acc_hi, sh))
        prev = rad.r
        shift = log2d - 2 * d * math.log(rad.r)
        v_lo = (acc_lo + shift) / q
        v_hi = (acc_hi + shift) / q
        iv = IntervalValue(min(v_lo, v_hi), max(v_lo, v_hi))
        mode = MODE_BOUNDS if ev.any_bounds else MODE_SAMPLED
        unc = max(iv.half_width, rtol)
        out.append(ProfilePoint(rad.r, iv.mid, mode, unc,
                                iv.log_lo, iv.log_hi))
    kind = "weighted_q" if u is not None else "volume_q"
    label = factor.label if u is not None else None
    return MeansProfile(kind, float(q), d, label, tuple(out))


def volume_profile(gs: GapSeries, q, radii, d: int,
                   rtol: float = 1e-8) -> MeansProfile:
    """V_q profile on a radius grid (one cumulative polar sweep)."""
    return _volume_sweep(gs, q, radii, d, None, rtol)


def weighted_volume_profile(gs: GapSeries, q, u: RadialFactor, radii, d: int,
                            rtol: float = 1e-8) -> MeansProfile:
    """M_{q,u} profile on a radius grid."""
    if u is None:
        raise InputError("weighted profile needs a radial factor")
    return _volume_sweep(gs, q, radii, d, u, rtol)


def volume_mean(gs: GapSeries, q, r, d: int, rtol: float = 1e-8) -> float:
    """log V_q(f, r); V_q(f, 0) = |f(0)| by convention."""
    return _volume_sweep(gs, q, [r], d, None, rtol).points[0].log_value


def weighted_volume_mean(gs: GapSeries, q, u: RadialFactor, r, d: int,
                         rtol: float = 1e-8) -> float:
    """log M_{q,u}(f, r); at r=0 this is log|f(0)| + log(u(0))/q."""
    if u is None:
        raise InputError("weighted mean needs a radial factor")
    return _volume_sweep(gs, q, [r], d, u, rtol).points[0].log_value


# ---------------------------------------------------------------------------
# coefficient transforms between sphere and volume expansions


def _check_coeffs(coeffs):
    seen = set()
    for k, _ in coeffs:
        if k < 0:
            raise InputError(f"exponent {k} is negative")
        if k in seen:
            raise InputError(f"duplicate exponent {k}")
        seen.add(k)


def volume_smoothing_transform(coeffs, d: int):
    """[(k, log a_k)] -> [(k, log a_k + log(2d) - log(k+2d))].

    Maps the coefficient sequence of a power-series M_q^q to that of the
    corresponding V_q^q.
    """
    _check_coeffs(coeffs)
    log2d = math.log(2 * d)
    return [(k, la + log2d - math.log(k + 2 * d)) for k, la in coeffs]


def inverse_smoothing_transform(coeffs, d: int):
    """[(k, log a_k)] -> [(k, log a_k + log(k+2d))].

    Round-trips with volume_smoothing_transform up to the constant 2d.
    """
    _check_coeffs(coeffs)
    return [(k, la + math.log(k + 2 * d)) for k, la in coeffs]


def m2_squared_coeffs(gs: GapSeries):
    """Coefficients of M_2(f, r)^2 as [(k, log c_k)]: exact expansion."""
    out = []
    if gs.log_const > NEG_INF:
        out.append((0, 2.0 * gs.log_const))
    out.extend((2 * n, 2.0 * la) for n, la in gs.terms)
    return out
