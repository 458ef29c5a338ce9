"""Gap-series selection and its machine-checkable certificates.

The series is a constant term plus touching support lines at a sparse
slope set.  Selection is greedy: from the current slope, take the largest
next integer slope whose crossover with the current line stays within
log(lambda) of phi.  Because the integer-slope envelope is sandwiched
between phi + s and phi, staying within log(lambda) of phi implies the
crossover drop relative to the full envelope is also below log(lambda).

Certificates are grid-based.  Two dominance margins are tracked per
radius: the maximal term against the sum of all other terms (feeds the
sup-norm lower bound), and the maximal term against the rest of its own
parity class (feeds |g1| + |g2| >= C w and the certified radius r0).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from .envelope import (
    EXPONENT_CAP,
    NewtonEnvelope,
    SupportLine,
    build_envelope,
    support_coefficient,
)
from .errors import ConstructionError, DegenerateInputError, InputError
from .grids import Radius, dyadic_grid, merge_grids, midpoints_s
from .logdomain import NEG_INF, logsumexp, logsumexp_rows
from .weights import LogWeight

DEFAULT_LAMBDA = math.e
DEFAULT_THETA = 0.5
DEFAULT_JMAX = 40


@dataclass(frozen=True)
class GapSeries:
    """Sparse series const + sum a_k z^{n_k} with strictly increasing n_k.

    log_const is the log of the constant term (0.0 for the plain "1 +"
    series, -inf for a pure gap block such as a parity half).
    r0_certified is the first grid radius from which the dominance
    certificate holds onward.  meta carries construction provenance
    (selection parameters, crossovers, touch points, normalization shift).
    """

    dim: int
    log_const: float
    terms: tuple          # tuple of (n_k: int, log_a_k: float)
    r0_certified: float
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ns = [n for n, _ in self.terms]
        if any(n2 <= n1 for n1, n2 in zip(ns, ns[1:])):
            raise InputError("exponents must be strictly increasing")
        if any(not n >= 1 for n in ns):
            raise InputError("term exponents must be >= 1 (constant is separate)")
        if any(math.isinf(la) or math.isnan(la) for _, la in self.terms):
            raise InputError("log-coefficients must be finite")

    @property
    def exponents(self) -> np.ndarray:
        return np.array([n for n, _ in self.terms], dtype=np.int64)

    @property
    def log_coeffs(self) -> np.ndarray:
        return np.array([la for _, la in self.terms], dtype=float)

    def term_logs(self, rad: Radius) -> np.ndarray:
        """log(a_k r^{n_k}) per term (constant excluded)."""
        s = rad.s
        if s == NEG_INF:
            return np.full(len(self.terms), NEG_INF)
        return self.log_coeffs + self.exponents.astype(float) * s

    def all_logs(self, rad: Radius) -> np.ndarray:
        """Constant term first, then the gap terms."""
        return np.concatenate([[self.log_const], self.term_logs(rad)])

    def to_json_dict(self) -> dict:
        return {
            "dim": self.dim,
            "log_const": self.log_const,
            "terms": [{"n": int(n), "log_a": la} for n, la in self.terms],
            "r0_certified": self.r0_certified,
            "meta": self.meta,
        }

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json_dict(), fh, indent=1, sort_keys=True)
            fh.write("\n")

    @classmethod
    def from_json_dict(cls, d: dict) -> "GapSeries":
        return cls(
            dim=int(d["dim"]),
            log_const=float(d["log_const"]),
            terms=tuple((int(t["n"]), float(t["log_a"])) for t in d["terms"]),
            r0_certified=float(d["r0_certified"]),
            meta=d.get("meta", {}),
        )

    @classmethod
    def load(cls, path) -> "GapSeries":
        with open(path) as fh:
            try:
                return cls.from_json_dict(json.load(fh))
            except (json.JSONDecodeError, KeyError, TypeError) as e:
                raise InputError(f"{path}: not a series file ({e})")


@dataclass(frozen=True)
class DominanceCert:
    """Per-radius dominance margins of a gap series.

    margin_all:    max term (constant included) minus logsumexp of all
                   other terms; the quantity behind sup-norm lower bounds.
    margin_parity: best gap term minus logsumexp of the other terms in its
                   parity class; the quantity behind |g1|+|g2| >= C w.
    max_is_term:   whether a gap term (not the constant) is maximal.
    theta_min:     worst margin_parity over grid radii >= r0 (the whole
                   grid when the series carries no r0).
    """

    radii: tuple
    margin_all: tuple
    margin_parity: tuple
    max_is_term: tuple
    theta_min: float

    def entries(self):
        return zip(self.radii, self.margin_all, self.margin_parity, self.max_is_term)


def _margins_at(gs: GapSeries, rad: Radius):
    term_y = gs.term_logs(rad)
    const_y = gs.log_const
    if len(term_y) == 0:
        return math.inf, math.inf, False

    k_best = int(np.argmax(term_y))
    y_best = float(term_y[k_best])
    max_is_term = y_best >= const_y

    # all-others margin, from whichever of constant/best term is maximal
    vals = np.concatenate([[const_y], term_y])
    j = int(np.argmax(vals))
    others = np.delete(vals, j)
    rest = logsumexp(others)
    margin_all = math.inf if rest == NEG_INF else float(vals[j]) - rest

    # parity margin of the best gap term within its own class (1-based)
    cls = k_best % 2
    mates = term_y[cls::2]
    mates = np.delete(mates, np.where(np.arange(cls, len(term_y), 2) == k_best)[0])
    rest_p = logsumexp(mates)
    margin_parity = math.inf if rest_p == NEG_INF else y_best - rest_p
    return margin_all, margin_parity, max_is_term


def certify_dominance(gs: GapSeries, grid) -> DominanceCert:
    """Measure dominance margins of gs on a radius grid."""
    radii = [Radius.from_r(r) if not isinstance(r, Radius) else r for r in grid]
    radii = sorted(radii, key=lambda rad: rad.r)
    ma, mp, mt = [], [], []
    for rad in radii:
        a, p, t = _margins_at(gs, rad)
        ma.append(a)
        mp.append(p)
        mt.append(t)
    r0 = gs.r0_certified
    relevant = [m for rad, m in zip(radii, mp) if rad.r >= r0] or mp or [math.inf]
    return DominanceCert(
        radii=tuple(rad.r for rad in radii),
        margin_all=tuple(ma),
        margin_parity=tuple(mp),
        max_is_term=tuple(mt),
        theta_min=float(min(relevant)),
    )


def certificate_grid(gs_or_crossovers, j_max: int = DEFAULT_JMAX) -> list[Radius]:
    """Dyadic radii j=0..j_max plus midpoints of consecutive crossovers."""
    if isinstance(gs_or_crossovers, GapSeries):
        xs = gs_or_crossovers.meta.get("crossovers_s", [])
    else:
        xs = list(gs_or_crossovers)
    return merge_grids(dyadic_grid(j_max), midpoints_s(xs))


def _scan_r0(gs_terms, log_const, grid, theta):
    """First grid radius from which parity dominance holds onward."""
    need = -math.log(theta)
    probe = GapSeries(dim=1, log_const=log_const, terms=gs_terms,
                      r0_certified=0.0)
    ok = []
    for rad in grid:
        _, mp, mt = _margins_at(probe, rad)
        ok.append(mp >= need and mt)
    # longest all-ok suffix
    idx = len(ok)
    while idx > 0 and ok[idx - 1]:
        idx -= 1
    if idx == len(ok):
        bad = grid[-1].r
        raise ConstructionError(
            f"dominance margin below {need:.4f} at the last grid radius "
            f"r={bad}", radius=bad)
    return grid[idx].r


def select_gap_terms(env: NewtonEnvelope, lam: float = DEFAULT_LAMBDA,
                     theta: float = DEFAULT_THETA,
                     j_max: int = DEFAULT_JMAX) -> GapSeries:
    """Greedy Hadamard-gap selection from the envelope's weight.

    From the current slope n the next slope is the largest integer
    m <= n_max with phi(s_x) - crossing_value <= log(lam) at the crossover
    s_x of the two support lines; the gap function is increasing in m, so
    exact integer binary search applies.  theta sets the dominance margin
    (-log theta) that defines r0_certified.
    """
    if not lam > 1:
        raise InputError(f"lambda must be > 1, got {lam}")
    if not 0 < theta < 1:
        raise InputError(f"theta must be in (0,1), got {theta}")
    if not env.lines:
        raise InputError("empty envelope")

    w = env.source
    n_max = env.n_max
    log_lam = math.log(lam)
    pd = w._pd_scalar

    def line_for(n: int) -> SupportLine:
        return support_coefficient(w, n)

    # smallest positive interior-touching slope
    first = None
    n = 1
    prev_boundary_left = False
    while n <= n_max:
        ln = line_for(n)
        if not ln.boundary:
            first = ln
            break
        # left-boundary touches mean the weight initially grows faster
        # than r^n; larger slopes may still touch inside
        if ln.touch_s <= w.s_floor * (1.0 - 1e-12):
            prev_boundary_left = True
            n = min(n * 2, n_max) if n * 2 != n else n + 1
            if n == ln.slope:
                break
        else:
            break  # right-boundary: no positive slope touches inside
    if first is not None and prev_boundary_left and first.slope > 1:
        # binary refine down to the smallest interior slope
        lo, hi = first.slope // 2, first.slope
        while hi - lo > 1:
            mid = (lo + hi) // 2
            if line_for(mid).boundary:
                lo = mid
            else:
                hi = mid
        first = line_for(hi)

    if first is None:
        # degenerate (bounded) weight: constant series
        return GapSeries(dim=1, log_const=0.0, terms=(), r0_certified=0.0,
                         meta={"lambda": lam, "theta": theta, "j_max": j_max,
                               "crossovers_s": [], "touches_s": [],
                               "weight": w.spec_string()})

    selected = [first]
    crossovers: list[float] = []

    def crossing(a: SupportLine, b: SupportLine) -> float:
        return (a.log_intercept - b.log_intercept) / (b.slope - a.slope)

    def gap_of(cur: SupportLine, cand: SupportLine) -> float:
        s_x = crossing(cur, cand)
        s_x = min(s_x, -(2.0 ** -60))
        val = cur.log_intercept + cur.slope * s_x
        return pd(-math.expm1(s_x)) - val

    guard = 0
    while selected[-1].slope < n_max and not selected[-1].boundary:
        guard += 1
        if guard > 200000:
            raise ConstructionError("gap selection did not terminate")
        cur = selected[-1]
        nxt = line_for(cur.slope + 1)
        if gap_of(cur, nxt) > log_lam:
            raise ConstructionError(
                "no admissible next slope: envelope drop exceeds log lambda "
                f"immediately after n={cur.slope}",
                radius=Radius.from_s(min(cur.touch_s, -2.0 ** -60)).r)
        top = line_for(n_max)
        if gap_of(cur, top) <= log_lam:
            chosen = top
        else:
            lo, hi = cur.slope + 1, n_max
            while hi - lo > 1:
                mid = (lo + hi) // 2
                if gap_of(cur, line_for(mid)) <= log_lam:
                    lo = mid
                else:
                    hi = mid
            chosen = line_for(lo)
        crossovers.append(crossing(cur, chosen))
        selected.append(chosen)

    terms = tuple((ln.slope, ln.log_intercept) for ln in selected)
    grid = merge_grids(dyadic_grid(j_max), midpoints_s(crossovers))
    r0 = _scan_r0(terms, 0.0, grid, theta)
    return GapSeries(
        dim=1, log_const=0.0, terms=terms, r0_certified=r0,
        meta={
            "lambda": lam,
            "theta": theta,
            "j_max": j_max,
            "crossovers_s": crossovers,
            "touches_s": [ln.touch_s for ln in selected],
            "weight": w.spec_string(),
        },
    )


def split_even_odd(gs: GapSeries):
    """(g1, g2): odd-indexed terms and even-indexed terms (1-based)."""
    if len(gs.terms) < 2:
        raise DegenerateInputError(
            f"parity split needs >= 2 terms, got {len(gs.terms)}")
    g1 = GapSeries(dim=gs.dim, log_const=NEG_INF, terms=gs.terms[0::2],
                   r0_certified=gs.r0_certified, meta={"parity": "odd"})
    g2 = GapSeries(dim=gs.dim, log_const=NEG_INF, terms=gs.terms[1::2],
                   r0_certified=gs.r0_certified, meta={"parity": "even"})
    return g1, g2


def m2sq_log(log_const: float, terms, radii) -> np.ndarray:
    """log of (const^2 + sum a_k^2 r^{2 n_k}) on a list of radii."""
    if len(terms) == 0:
        return np.full(len(radii), 2.0 * log_const)
    ns = np.array([n for n, _ in terms], dtype=float)
    las = np.array([la for _, la in terms], dtype=float)
    rows = []
    for rad in radii:
        s = rad.s
        if s == NEG_INF:
            ys = np.full(len(terms), NEG_INF)
        else:
            ys = 2.0 * (las + ns * s)
        rows.append(np.concatenate([[2.0 * log_const], ys]))
    return logsumexp_rows(np.array(rows))


def theorem1_series(w: LogWeight, lam: float = DEFAULT_LAMBDA,
                    theta: float = DEFAULT_THETA,
                    n_max: int = EXPONENT_CAP,
                    j_max: int = DEFAULT_JMAX) -> GapSeries:
    """Normalized gap series f with M_p(f, r) equivalent to w(r).

    Runs envelope + selection, then rescales every coefficient (constant
    included) so that min over certification grid radii inside the tracked
    window of M_2(f, r)/w(r) is exactly 1.  The tracked window ends at the
    touch radius of the last selected slope: past it a capped-exponent
    series cannot follow w, so those radii must not drive the
    normalization.  Pre-normalization coefficients are recoverable as
    log_a - log_const.
    """
    env = build_envelope(w, n_max)
    gs = select_gap_terms(env, lam=lam, theta=theta, j_max=j_max)
    grid = certificate_grid(gs, j_max)
    touches = gs.meta.get("touches_s", [])
    if touches:
        s_cap = max(touches)
        norm_grid = [rad for rad in grid if rad.s <= s_cap]
        if not norm_grid:
            norm_grid = [grid[0]]
    else:
        norm_grid = grid
    m2sq = m2sq_log(gs.log_const, gs.terms, norm_grid)
    phis = w.phi_radii(norm_grid)
    d_min = float(np.min(m2sq - 2.0 * phis))
    shift = -0.5 * d_min
    meta = dict(gs.meta)
    meta["norm_shift"] = shift
    meta["s_cap"] = max(touches) if touches else 0.0
    return GapSeries(
        dim=1,
        log_const=gs.log_const + shift,
        terms=tuple((n, la + shift) for n, la in gs.terms),
        r0_certified=gs.r0_certified,
        meta=meta,
    )
