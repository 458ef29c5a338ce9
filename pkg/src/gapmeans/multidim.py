"""Gap series on the complex ball via random homogeneous polynomials.

The d>=2 branch replaces z^{n_k} by a degree-n_k homogeneous polynomial
W_{n_k} with sup norm ~1 on the sphere and an L2 norm bounded away from
zero.  Here W_k is randomized: every monomial of degree k gets a
unimodular coefficient with a seeded random phase, scaled by the inverse
monomial L2 norm, and the polynomial is divided by a numerical sup-norm
estimate.  The L2/sup ratio delta_k is certified empirically per degree
(a table for d=2, k <= 64 ships with the package); it is reported, never
assumed.
"""

from __future__ import annotations

import itertools
import json
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import minimize
from scipy.special import gammaln
from scipy.stats import qmc

from .envelope import build_envelope
from .errors import InputError, RangeError
from .grids import as_radius
from .lacunary import certificate_grid, m2sq_log, select_gap_terms
from .logdomain import NEG_INF, logsumexp
from .weights import LogWeight

BALL_DEGREE_CAP = 128
DEFAULT_SUP_BUDGET = 100_000
MC_SHARD = 16_384


def _monomials(d: int, k: int):
    """All multi-indices alpha with |alpha| = k, lexicographic order."""
    out = []
    for head in itertools.combinations_with_replacement(range(d), k):
        alpha = [0] * d
        for i in head:
            alpha[i] += 1
        out.append(tuple(alpha))
    return sorted(out)


def _log_monomial_l2sq(alpha, d: int) -> float:
    """log of int_{S_d} |z^alpha|^2 dsigma = (d-1)! alpha! / (d-1+|alpha|)!."""
    k = sum(alpha)
    return float(gammaln(d) + sum(gammaln(a + 1) for a in alpha)
                 - gammaln(d + k))


@dataclass
class HomPoly:
    """Homogeneous polynomial sum_j coeffs[j] * z^{exponents[j]}."""

    dim: int
    degree: int
    exponents: np.ndarray    # (m, dim) int
    coeffs: np.ndarray       # (m,) complex

    def __post_init__(self):
        self.exponents = np.asarray(self.exponents, dtype=np.int64)
        self.coeffs = np.asarray(self.coeffs, dtype=complex)
        if self.exponents.ndim != 2 or self.exponents.shape[1] != self.dim:
            raise InputError("exponent matrix shape mismatch")
        if len(self.coeffs) != len(self.exponents):
            raise InputError("coefficient count mismatch")
        degs = self.exponents.sum(axis=1)
        if len(degs) and not np.all(degs == self.degree):
            raise InputError(
                f"non-homogeneous monomials: degrees {set(degs.tolist())}")

    def eval(self, points: np.ndarray) -> np.ndarray:
        """Values at complex points of shape (M, dim), chunked."""
        pts = np.asarray(points, dtype=complex)
        if pts.ndim != 2 or pts.shape[1] != self.dim:
            raise InputError("points must have shape (M, dim)")
        m = max(len(self.coeffs), 1)
        chunk = max(256, (1 << 22) // m)
        out = np.empty(len(pts), dtype=complex)
        for lo in range(0, len(pts), chunk):
            blk = pts[lo:lo + chunk]
            vals = np.ones((len(blk), m), dtype=complex)
            for i in range(self.dim):
                # per-axis power table, gathered by exponent column
                pw = blk[:, i, None] ** np.arange(self.degree + 1)[None, :]
                vals *= pw[:, self.exponents[:, i]]
            out[lo:lo + chunk] = vals @ self.coeffs
        return out

    def scaled(self, factor: complex) -> "HomPoly":
        return HomPoly(self.dim, self.degree, self.exponents,
                       self.coeffs * factor)

    def to_json_dict(self) -> dict:
        return {
            "degree": self.degree,
            "coeffs": [[list(map(int, a)), float(c.real), float(c.imag)]
                       for a, c in zip(self.exponents.tolist(), self.coeffs)],
        }

    @classmethod
    def from_json_dict(cls, dim: int, d: dict) -> "HomPoly":
        expo = [row[0] for row in d["coeffs"]]
        cf = [complex(row[1], row[2]) for row in d["coeffs"]]
        return cls(dim, int(d["degree"]), np.array(expo), np.array(cf))


def l2_norm_sphere(poly: HomPoly) -> float:
    """Exact L2(S_d) norm via the monomial moment identity."""
    if len(poly.coeffs) == 0:
        return 0.0
    logs = np.array([_log_monomial_l2sq(tuple(a), poly.dim)
                     for a in poly.exponents.tolist()])
    mags = np.abs(poly.coeffs)
    nz = mags > 0
    if not np.any(nz):
        return 0.0
    total = logsumexp(2.0 * np.log(mags[nz]) + logs[nz])
    return math.exp(0.5 * total)


def _sup_search(neg_log_fn, dim: int, budget: int):
    """max of exp(-neg_log_fn) over quasi-random sphere starts + polish.

    neg_log_fn maps a real vector v in R^{2 dim} (interpreted as a complex
    point, scale-free objective) to -log of the target magnitude.
    """
    if budget < 1000:
        raise InputError(f"sup-norm budget must be >= 1000, got {budget}")
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        sob = qmc.Sobol(2 * dim, scramble=False)
        u = sob.random(budget)
    v = 2.0 * u - 1.0
    norms = np.linalg.norm(v, axis=1)
    v = v[norms > 1e-9]
    scores = np.array([neg_log_fn(row) for row in v])
    order = np.argsort(scores)[:8]
    best = float(scores[order[0]]) if len(order) else math.inf
    for i in order:
        res = minimize(neg_log_fn, v[i], method="Nelder-Mead",
                       options={"maxfev": 600, "xatol": 1e-10,
                                "fatol": 1e-12})
        best = min(best, float(res.fun))
    return math.exp(-best) if best < math.inf else 0.0


def sup_norm_sphere(poly: HomPoly, budget: int = DEFAULT_SUP_BUDGET) -> float:
    """Lower-bound estimate of max |poly| over the unit sphere.

    Quasi-random sphere sweep followed by Nelder-Mead ascent from the
    best 8 starts; the objective uses the homogeneity of poly to stay
    scale-free, so no sphere constraint is needed.
    """
    if not np.any(np.abs(poly.coeffs) > 0):
        return 0.0
    d, k = poly.dim, poly.degree

    def neg_log(vec):
        z = vec[:d] + 1j * vec[d:]
        nv = float(np.linalg.norm(z))
        if nv < 1e-12:
            return 1e300
        val = abs(complex(poly.eval(z[None, :])[0]))
        if val == 0.0:
            return 1e300
        return k * math.log(nv) - math.log(val)

    return _sup_search(neg_log, d, budget)


def random_rw_poly(d: int, k: int, seed: int,
                   budget: int = DEFAULT_SUP_BUDGET) -> HomPoly:
    """Random unimodular-phase homogeneous polynomial, sup-normalized.

    Every degree-k monomial appears with coefficient
    exp(i theta_alpha) / ||z^alpha||_{L2}, theta drawn from the generator
    seeded by (seed, d, k); the result is divided by sup_norm_sphere so
    its sup norm is ~1 (the estimate is a lower bound, empirically within
    2% at the default budget).
    """
    if d not in (2, 3):
        raise RangeError(f"dimension must be 2 or 3, got {d}")
    if not 1 <= k <= BALL_DEGREE_CAP:
        raise RangeError(
            f"degree must lie in 1..{BALL_DEGREE_CAP}, got {k}")
    alphas = _monomials(d, k)
    rng = np.random.default_rng([seed, d, k])
    phases = rng.uniform(0.0, 2.0 * math.pi, len(alphas))
    inv_norms = np.array([math.exp(-0.5 * _log_monomial_l2sq(a, d))
                          for a in alphas])
    raw = HomPoly(d, k, np.array(alphas), np.exp(1j * phases) * inv_norms)
    sup = sup_norm_sphere(raw, budget)
    return raw.scaled(1.0 / sup)


def rw_delta(d: int, k: int, seed: int,
             budget: int = DEFAULT_SUP_BUDGET):
    """(sup_estimate_raw, l2_raw, delta) for the degree-k random poly.

    The raw L2 norm is sqrt(#monomials) exactly (unimodular phases over
    L2-normalized monomials); delta = l2/sup is invariant under the final
    normalization.
    """
    alphas = _monomials(d, k)
    rng = np.random.default_rng([seed, d, k])
    phases = rng.uniform(0.0, 2.0 * math.pi, len(alphas))
    inv_norms = np.array([math.exp(-0.5 * _log_monomial_l2sq(a, d))
                          for a in alphas])
    raw = HomPoly(d, k, np.array(alphas), np.exp(1j * phases) * inv_norms)
    sup = sup_norm_sphere(raw, budget)
    l2 = math.sqrt(len(alphas))
    return sup, l2, l2 / sup


@dataclass(frozen=True)
class RWCertificate:
    """Per-degree (k, sup_estimate, l2, delta) rows, delta = l2/sup."""

    entries: tuple

    def min_delta(self) -> float:
        return min((e[3] for e in self.entries), default=math.inf)

    def to_csv_text(self) -> str:
        rows = ["k,sup_estimate,l2,delta"]
        for k, sup, l2, delta in self.entries:
            rows.append("%d,%.17g,%.17g,%.17g" % (k, sup, l2, delta))
        return "\n".join(rows) + "\n"


@dataclass(frozen=True)
class BallSeries:
    """const + sum a_k W_{n_k}(z) on the ball of C^d.

    terms are (n, log_a, log_l2, HomPoly) with log_l2 the exact L2 norm of
    the attached (sup-normalized) polynomial; distinct degrees are
    orthogonal on the sphere, so M_2 has an exact coefficient form.
    """

    dim: int
    log_const: float
    terms: tuple
    r0_certified: float
    certificate: RWCertificate
    meta: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "log_const": self.log_const,
            "terms": [{"n": int(n), "log_a": la, "log_l2": ll,
                       "poly": poly.to_json_dict()}
                      for n, la, ll, poly in self.terms],
            "r0_certified": self.r0_certified,
            "certificate": [list(e) for e in self.certificate.entries],
            "meta": self.meta,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "BallSeries":
        dim = int(d["dim"])
        terms = tuple(
            (int(t["n"]), float(t["log_a"]), float(t["log_l2"]),
             HomPoly.from_json_dict(dim, t["poly"]))
            for t in d["terms"])
        cert = RWCertificate(tuple(tuple(e) for e in d["certificate"]))
        return cls(dim, float(d["log_const"]), terms,
                   float(d["r0_certified"]), cert, d.get("meta", {}))

    @classmethod
    def load(cls, path) -> "BallSeries":
        with open(path) as fh:
            return cls.from_json_dict(json.load(fh))

    def eval_at(self, r: float, zeta: np.ndarray) -> np.ndarray:
        """Complex values of F(r zeta) at sphere points zeta (M, dim)."""
        vals = np.full(len(zeta), math.exp(self.log_const)
                       if self.log_const > NEG_INF else 0.0, dtype=complex)
        logr = math.log(r) if r > 0 else NEG_INF
        for n, la, _, poly in self.terms:
            scale = la + n * logr
            if scale == NEG_INF or scale < -745.0:
                continue
            vals += math.exp(scale) * poly.eval(zeta)
        return vals


def m2_exact_ball(bs: BallSeries, r) -> float:
    """log M_2(F, r) via orthogonality of distinct degrees."""
    rad = as_radius(r)
    s = rad.s
    ys = [2.0 * bs.log_const]
    for n, la, ll, _ in bs.terms:
        ys.append(2.0 * (la + ll) + 2.0 * n * s if s > NEG_INF else NEG_INF)
    return 0.5 * logsumexp(np.array(ys))


def ball_upper_log(bs: BallSeries, r) -> float:
    """Triangle-inequality bound log(const + sum a_k r^{n_k})."""
    rad = as_radius(r)
    s = rad.s
    ys = [bs.log_const]
    for n, la, _, _ in bs.terms:
        ys.append(la + n * s if s > NEG_INF else NEG_INF)
    return logsumexp(np.array(ys))


def theorem1_series_ball(w: LogWeight, d: int, seed: int = 0,
                         n_max: int = BALL_DEGREE_CAP,
                         budget: int = DEFAULT_SUP_BUDGET,
                         lam: float = math.e, theta: float = 0.5,
                         j_max: int = 40) -> BallSeries:
    """Ball analogue of theorem1_series with degree cap n_max <= 128.

    Gap selection reuses the d=1 envelope machinery; each selected
    exponent gets its own random polynomial, and the normalization shift
    uses the exact ball M_2 (L2 factors included).
    """
    if d not in (2, 3):
        raise RangeError(f"dimension must be 2 or 3, got {d}")
    if n_max > BALL_DEGREE_CAP:
        raise RangeError(
            f"degree cap {n_max} exceeds {BALL_DEGREE_CAP}; use the d=1 "
            "synthesizer for higher exponents")
    env = build_envelope(w, n_max, slope_grid="dense")
    gs = select_gap_terms(env, lam=lam, theta=theta, j_max=j_max)

    polys = []
    cert_rows = []
    for n, la in gs.terms:
        poly = random_rw_poly(d, n, seed, budget)
        l2 = l2_norm_sphere(poly)
        polys.append((n, la, math.log(l2), poly))
        cert_rows.append((n, 1.0, l2, l2))

    grid = certificate_grid(gs, j_max)
    touches = gs.meta.get("touches_s", [])
    if touches:
        s_cap = max(touches)
        norm_grid = [rad for rad in grid if rad.s <= s_cap] or [grid[0]]
    else:
        norm_grid = grid
    eff_terms = tuple((n, la + ll) for n, la, ll, _ in polys)
    m2sq = m2sq_log(gs.log_const, eff_terms, norm_grid)
    phis = w.phi_radii(norm_grid)
    shift = -0.5 * float(np.min(m2sq - 2.0 * phis))

    meta = dict(gs.meta)
    meta.update({"seed": seed, "norm_shift": shift, "sup_budget": budget})
    return BallSeries(
        dim=d,
        log_const=gs.log_const + shift,
        terms=tuple((n, la + shift, ll, poly) for n, la, ll, poly in polys),
        r0_certified=gs.r0_certified,
        certificate=RWCertificate(tuple(cert_rows)),
        meta=meta,
    )


def sphere_samples(d: int, count: int, seed: int = 0) -> np.ndarray:
    """Uniform points on the unit sphere of C^d, fixed-shard streams.

    Samples come from 16384-point shards with substream rng
    default_rng([seed, 7771, shard]); the result depends only on (seed,
    count), never on how callers batch it.
    """
    out = np.empty((count, d), dtype=complex)
    pos = 0
    shard = 0
    while pos < count:
        rng = np.random.default_rng([seed, 7771, shard])
        z = rng.standard_normal((MC_SHARD, d)) \
            + 1j * rng.standard_normal((MC_SHARD, d))
        z /= np.linalg.norm(z, axis=1, keepdims=True)
        take = min(MC_SHARD, count - pos)
        out[pos:pos + take] = z[:take]
        pos += take
        shard += 1
    return out


def mp_sphere_sampled(bs: BallSeries, p, r, samples: int,
                      seed: int = 0):
    """(log M_p(F, r), standard error of the log) by Monte Carlo.

    p = inf instead runs the quasi-random sup search on the dilated
    series and reports zero standard error.
    """
    if samples < 10_000:
        raise InputError(f"need >= 1e4 samples, got {samples}")
    rad = as_radius(r)
    if p == math.inf:
        def neg_log(vec):
            z = vec[:bs.dim] + 1j * vec[bs.dim:]
            nv = float(np.linalg.norm(z))
            if nv < 1e-12:
                return 1e300
            val = abs(complex(bs.eval_at(rad.r, (z / nv)[None, :])[0]))
            return 1e300 if val == 0.0 else -math.log(val)
        return math.log(_sup_search(neg_log, bs.dim, max(samples, 1000))), 0.0

    if not p > 0:
        raise InputError(f"p must be positive, got {p}")
    zeta = sphere_samples(bs.dim, samples, seed)
    with np.errstate(divide="ignore"):
        logs = np.log(np.abs(bs.eval_at(rad.r, zeta)))
    top = float(np.max(logs))
    if top == NEG_INF:
        return NEG_INF, 0.0
    scaled = np.exp(p * (logs - top))
    mean = float(np.mean(scaled))
    se = float(np.std(scaled, ddof=1)) / math.sqrt(samples)
    return (top * p + math.log(mean)) / p, se / mean / p


def mc_inner_product(p1: HomPoly, p2: HomPoly, samples: int,
                     seed: int = 0):
    """(Monte Carlo estimate of <p1, p2>_{L2(S)}, standard error)."""
    if p1.dim != p2.dim:
        raise InputError("dimension mismatch")
    zeta = sphere_samples(p1.dim, samples, seed)
    prods = p1.eval(zeta) * np.conj(p2.eval(zeta))
    est = complex(np.mean(prods))
    se = float(np.std(np.abs(prods - est), ddof=1)) / math.sqrt(samples)
    return est, se


def generate_delta_table(d: int = 2, k_max: int = 64, seeds=(0, 1, 2, 3, 4),
                         budget: int = DEFAULT_SUP_BUDGET) -> str:
    """CSV text of raw sup estimates and deltas per (seed, degree)."""
    rows = ["seed,k,sup_estimate,l2,delta"]
    for seed in seeds:
        for k in range(1, k_max + 1):
            sup, l2, delta = rw_delta(d, k, seed, budget)
            rows.append("%d,%d,%.17g,%.17g,%.17g" % (seed, k, sup, l2, delta))
    return "\n".join(rows) + "\n"


def load_delta_table():
    """Rows of the shipped d=2 delta table as dicts."""
    import importlib.resources as res

    text = (res.files("gapmeans") / "data" / "rw_delta_table.csv").read_text()
    lines = [ln for ln in text.strip().splitlines() if ln]
    header = lines[0].split(",")
    out = []
    for ln in lines[1:]:
        vals = ln.split(",")
        row = dict(zip(header, vals))
        out.append({
            "seed": int(row["seed"]),
            "k": int(row["k"]),
            "sup_estimate": float(row["sup_estimate"]),
            "l2": float(row["l2"]),
            "delta": float(row["delta"]),
        })
    return out
