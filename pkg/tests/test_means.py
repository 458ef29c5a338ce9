import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate

from gapmeans.errors import ResolutionError
from gapmeans.grids import Radius, dyadic_grid
from gapmeans.lacunary import GapSeries, split_even_odd
from gapmeans.means import (
    RadialFactor,
    inverse_smoothing_transform,
    m2_exact,
    m2_squared_coeffs,
    measure_concentration_check,
    minf_bounds,
    mp_interval,
    mp_sampled,
    mp_sampled_info,
    parity_certified_floor,
    parity_min_log,
    required_angles,
    sphere_profile,
    volume_mean,
    volume_profile,
    volume_smoothing_transform,
    weighted_volume_mean,
    weighted_volume_profile,
)
from gapmeans.weights import make_power_weight


def poly_series(coeffs, const=1.0):
    """GapSeries for const + sum a_n z^n from {n: a_n} with a_n > 0."""
    terms = tuple((n, math.log(a)) for n, a in sorted(coeffs.items()))
    return GapSeries(dim=1, log_const=math.log(const) if const else -math.inf,
                     terms=terms, r0_certified=0.0)


ONE = GapSeries(dim=1, log_const=0.0, terms=(), r0_certified=0.0)
ONE_PLUS_Z = poly_series({1: 1.0})
ONE_PLUS_2Z3 = poly_series({3: 2.0})


def brute_mp(coeffs_const, terms, p, r, n=1 << 14):
    """Direct angular p-mean of |const + sum a z^n| by trapezoid."""
    th = np.linspace(0.0, 2.0 * math.pi, n, endpoint=False)
    z = r * np.exp(1j * th)
    vals = np.full(n, complex(coeffs_const))
    for k, a in terms:
        vals += a * z ** k
    mags = np.abs(vals)
    if p == math.inf:
        return math.log(np.max(mags))
    return math.log((np.mean(mags ** p)) ** (1.0 / p))


# --- sampled sphere means ----------------------------------------------------

@pytest.mark.parametrize("p", [0.5, 1.0, 2.0, 4.0, math.inf])
def test_mp_sampled_small_polynomial(p):
    r = 0.7
    got = mp_sampled(ONE_PLUS_2Z3, p, r)
    want = brute_mp(1.0, [(3, 2.0)], p, r)
    assert got == pytest.approx(want, abs=1e-7)


def test_mp_sampled_vs_m2_exact(alpha1_series):
    for j in range(0, 15):
        rad = Radius.dyadic(j)
        rel = abs(mp_sampled(alpha1_series, 2.0, rad) - m2_exact(alpha1_series, rad))
        assert rel <= 1e-10


def test_m2_exact_constant_series():
    assert m2_exact(ONE, Radius.from_r(0.5)) == 0.0
    gs = poly_series({2: 3.0})
    r = 0.6
    want = 0.5 * math.log(1.0 + 9.0 * r ** 4)
    assert m2_exact(gs, Radius.from_r(r)) == pytest.approx(want, rel=1e-14)


def test_mp_sampled_monotone_in_p(alpha2_series):
    rad = Radius.dyadic(8)
    vals = [mp_sampled(alpha2_series, p, rad)
            for p in (0.5, 1.0, 2.0, 4.0, math.inf)]
    assert vals == sorted(vals)


def test_mp_sampled_reports_resolution(alpha1_series):
    value, delta, n_used = mp_sampled_info(alpha1_series, 1.0, Radius.dyadic(10))
    assert n_used >= required_angles(alpha1_series, Radius.dyadic(10))
    assert abs(delta) <= 1e-8


def test_required_angles_scales_with_active_exponent(exp_series):
    n_small = required_angles(exp_series, Radius.dyadic(2))
    n_big = required_angles(exp_series, Radius.dyadic(14))
    assert n_big > n_small
    assert n_big & (n_big - 1) == 0  # power of two


def test_resolution_error_beyond_cap(exp_series):
    # near r = 1-2^-30 the active exponent makes N exceed the cap
    with pytest.raises(ResolutionError):
        mp_sampled(exp_series, 1.0, Radius.dyadic(30))


def test_sampled_angles_reach_every_term():
    """A two-term polynomial with a large exponent still folds exactly."""
    gs = poly_series({1: 1.0, (1 << 18) + 3: 0.5})
    r = 0.5
    got = mp_sampled(gs, 2.0, Radius.from_r(r))
    want = 0.5 * math.log(1.0 + r ** 2 + 0.25 * r ** (2 * ((1 << 18) + 3)))
    assert got == pytest.approx(want, abs=1e-10)


# --- intervals ---------------------------------------------------------------

def test_minf_bounds_bracket_sampled(alpha1_series):
    for j in (2, 6, 10, 14):
        rad = Radius.dyadic(j)
        iv = minf_bounds(alpha1_series, rad)
        direct = mp_sampled(alpha1_series, math.inf, rad)
        assert iv.log_lo - 1e-9 <= direct <= iv.log_hi + 1e-9


def test_minf_hi_is_coefficient_sum():
    gs = poly_series({1: 1.0, 4: 2.0})
    r = 0.5
    iv = minf_bounds(gs, Radius.from_r(r))
    assert iv.log_hi == pytest.approx(math.log(1.0 + 0.5 + 2.0 * 0.5 ** 4), rel=1e-12)


def test_mp_interval_p2_exact(alpha1_series):
    rad = Radius.dyadic(6)
    iv = mp_interval(alpha1_series, 2.0, rad)
    assert iv.log_hi - iv.log_lo <= 1e-12
    assert iv.mid == pytest.approx(m2_exact(alpha1_series, rad), abs=1e-12)


@pytest.mark.parametrize("p", [0.5, 1.0, 3.0, math.inf])
def test_mp_interval_brackets_truth(alpha1_series, p):
    for j in (4, 10, 14):
        rad = Radius.dyadic(j)
        iv = mp_interval(alpha1_series, p, rad)
        truth = mp_sampled(alpha1_series, p, rad)
        assert iv.log_lo - 1e-9 <= truth <= iv.log_hi + 1e-9


def test_interval_width_stays_bounded_deep(alpha1_series):
    """Bounds mode keeps a useful width far beyond sampling range."""
    iv = mp_interval(alpha1_series, math.inf, Radius.dyadic(35))
    assert iv.log_hi - iv.log_lo <= math.log(4.0)


# --- profiles ----------------------------------------------------------------

def test_sphere_profile_modes(alpha1_series):
    radii = [Radius.dyadic(j) for j in (1, 5, 20)]
    prof = sphere_profile(alpha1_series, 1.0, radii)
    modes = [pt.mode for pt in prof.points]
    assert modes[0] == "sampled"
    assert modes[-1] == "bounds"
    text = prof.to_csv_text()
    assert text.startswith("r,log_value,mode,log_uncertainty\n")
    assert len(text.strip().split("\n")) == 4


def test_sphere_profile_policies(alpha1_series):
    radii = [Radius.dyadic(5)]
    s = sphere_profile(alpha1_series, 1.0, radii, mode_policy="sampled-only")
    b = sphere_profile(alpha1_series, 1.0, radii, mode_policy="bounds-only")
    assert s.points[0].mode == "sampled"
    assert b.points[0].mode == "bounds"
    assert b.points[0].log_lo - 1e-9 <= s.points[0].log_value <= b.points[0].log_hi + 1e-9
    with pytest.raises(ResolutionError):
        sphere_profile(alpha1_series, 1.0, [Radius.dyadic(30)],
                       mode_policy="sampled-only")


def test_p2_profile_always_exact_mode(alpha1_series):
    prof = sphere_profile(alpha1_series, 2.0, [Radius.dyadic(j) for j in (2, 30)])
    for pt in prof.points:
        assert pt.log_uncertainty <= 1e-12


# --- volume means ------------------------------------------------------------

def test_volume_mean_of_constant():
    for q in (0.5, 1.0, 2.0):
        assert volume_mean(ONE, q, Radius.from_r(0.8), 1) == pytest.approx(0.0, abs=1e-10)


def test_volume_mean_closed_form_1_plus_2z3():
    # V_2^2 = 1 + r^6
    for r in (0.3, 0.7, 0.95):
        got = volume_mean(ONE_PLUS_2Z3, 2.0, Radius.from_r(r), 1)
        assert got == pytest.approx(0.5 * math.log(1.0 + r ** 6), abs=1e-8)


def test_volume_mean_closed_form_1_plus_z():
    # V_2^2 = 1 + r^2/2
    r = 0.9
    got = volume_mean(ONE_PLUS_Z, 2.0, Radius.from_r(r), 1)
    assert got == pytest.approx(0.5 * math.log(1.0 + r * r / 2.0), abs=1e-8)


@pytest.mark.parametrize("gs,terms,q", [
    (ONE, [], 1.0),
    (ONE_PLUS_Z, [(1, 1.0)], 1.0),
    (ONE_PLUS_2Z3, [(3, 2.0)], 1.0),
    (ONE_PLUS_2Z3, [(3, 2.0)], 4.0),
])
def test_volume_mean_vs_disk_quadrature(gs, terms, q):
    """V_q^q(r) = (2/r^2) int_0^r M_q^q(t) t dt, with the angular mean
    computed by brute trapezoid and the radial integral by scipy."""
    r = 0.85

    def integrand(t):
        return math.exp(q * brute_mp(1.0, terms, q, t)) * t

    val, _ = integrate.quad(integrand, 0.0, r, epsabs=1e-13, epsrel=1e-12)
    want = math.log(2.0 * val / r ** 2) / q
    got = volume_mean(gs, q, Radius.from_r(r), 1)
    assert got == pytest.approx(want, abs=1e-6)


def test_volume_mean_dimension_two():
    # d=2: V_q^q = (4/r^4) int_0^r M_q^q(t) t^3 dt; for f=1+2z^3, q=2:
    # integrand (1+4t^6) t^3 -> r^4/4 + 4 r^10/10 => V_2^2 = 1 + 1.6 r^6
    r = 0.8
    got = volume_mean(ONE_PLUS_2Z3, 2.0, Radius.from_r(r), 2)
    assert got == pytest.approx(0.5 * math.log(1.0 + 1.6 * r ** 6), abs=1e-8)


def test_volume_profile_r_zero_is_constant():
    prof = volume_profile(ONE_PLUS_2Z3, 2.0, [Radius.from_r(0.0)], 1)
    assert prof.points[0].log_value == pytest.approx(0.0, abs=1e-12)


def test_volume_profile_monotone_radii(alpha1_series):
    radii = [Radius.dyadic(j) for j in range(1, 10)]
    prof = volume_profile(alpha1_series, 2.0, radii, 1)
    vals = [pt.log_value for pt in prof.points]
    assert vals == sorted(vals)


def test_volume_mean_gap_series_between_bounds(alpha1_series):
    """V_q <= M_q, and V_q beats the mean restricted to [r/2, r]."""
    rad = Radius.dyadic(8)
    v = volume_mean(alpha1_series, 2.0, rad, 1)
    m = m2_exact(alpha1_series, rad)
    assert v <= m + 1e-9
    half = m2_exact(alpha1_series, Radius.from_r(rad.r / 2.0))
    # mass on [r/2, r] alone gives at least (3/4) M_2(r/2)^2
    floor = 0.5 * (2.0 * half + math.log(0.75))
    assert v >= floor - 1e-9


# --- weighted means ----------------------------------------------------------

def test_weighted_mean_alpha_factor_closed_form():
    # u = (1-t^2): M_{1,u}(1, r) = 1 - r^2/2
    u = RadialFactor.alpha_factor(1.0)
    for r in (0.3, 0.8, 0.95):
        got = weighted_volume_mean(ONE, 1.0, u, Radius.from_r(r), 1)
        assert got == pytest.approx(math.log(1.0 - r * r / 2.0), abs=1e-8)


def test_weighted_mean_reciprocal_weight():
    # u = 1/(1-t)^{-1} = (1-t): M_{1,u}(1,r) = (2/r^2) int (1-t) t dt
    u = RadialFactor.reciprocal(make_power_weight(1.0))
    r = 0.6
    want = math.log(1.0 - 2.0 * r / 3.0)
    got = weighted_volume_mean(ONE, 1.0, u, Radius.from_r(r), 1)
    assert got == pytest.approx(want, abs=1e-8)


def test_weighted_profile_unweighted_matches_volume(alpha1_series):
    radii = [Radius.dyadic(j) for j in (2, 6)]
    wv = weighted_volume_profile(alpha1_series, 2.0, RadialFactor.one(),
                                 radii, 1)
    v = volume_profile(alpha1_series, 2.0, radii, 1)
    for a, b in zip(wv.points, v.points):
        assert a.log_value == pytest.approx(b.log_value, abs=1e-9)


# --- smoothing transforms ----------------------------------------------------

def test_smoothing_identity_spec_example():
    # {(0,1),(6,4)} -> {(0,1),(6,1)} at d=1: factor 2/(6+2) = 1/4
    coeffs = [(0, 0.0), (6, math.log(4.0))]
    out = volume_smoothing_transform(coeffs, 1)
    as_dict = dict(out)
    assert as_dict[0] == pytest.approx(0.0, abs=1e-12)
    assert as_dict[6] == pytest.approx(0.0, abs=1e-12)


def test_smoothing_round_trip_is_2d():
    coeffs = [(0, 0.3), (2, -1.0), (17, 4.0)]
    for d in (1, 2, 3):
        fwd = volume_smoothing_transform(coeffs, d)
        back = inverse_smoothing_transform(fwd, d)
        for (k1, a1), (k2, a2) in zip(back, coeffs):
            assert k1 == k2
            assert a1 == pytest.approx(a2 + math.log(2.0 * d), abs=1e-12)


def test_smoothing_matches_volume_integral():
    """The transform reproduces V_2^2 computed by quadrature."""
    gs = poly_series({2: 3.0, 9: 0.5})
    sq = m2_squared_coeffs(gs)
    sm = volume_smoothing_transform(sq, 1)
    r = 0.77
    direct = volume_mean(gs, 2.0, Radius.from_r(r), 1)
    series_val = 0.5 * math.log(sum(math.exp(la) * r ** k for k, la in sm))
    assert series_val == pytest.approx(direct, abs=1e-8)


def test_m2_squared_coeffs(alpha1_series):
    sq = dict(m2_squared_coeffs(alpha1_series))
    assert sq[0] == pytest.approx(2.0 * alpha1_series.log_const, abs=1e-14)
    n0, la0 = alpha1_series.terms[0]
    assert sq[2 * n0] == pytest.approx(2.0 * la0, abs=1e-14)


# --- parity and concentration ------------------------------------------------

def test_parity_floor_certifies_measurement(alpha1_series):
    g1, g2 = split_even_odd(alpha1_series)
    for j in (1, 6, 12):
        rad = Radius.dyadic(j)
        if rad.r < alpha1_series.r0_certified:
            continue
        floor = parity_certified_floor(alpha1_series, rad)
        measured = parity_min_log(g1, g2, rad)
        assert measured >= floor - 1e-9
        assert floor > -math.inf


def test_parity_min_positive_fraction_of_weight(alpha1_series):
    w = make_power_weight(1.0)
    g1, g2 = split_even_odd(alpha1_series)
    for j in (1, 4, 8, 12):
        rad = Radius.dyadic(j)
        measured = parity_min_log(g1, g2, rad)
        assert measured - w.phi_radius(rad) > math.log(1e-3)


def test_concentration_fraction(alpha1_series):
    w = make_power_weight(1.0)
    for j in (0, 2, 8, 14):
        rad = Radius.dyadic(j)
        frac = measure_concentration_check(alpha1_series, w, rad, 1 << 12)
        assert 0.0 < frac <= 1.0
        assert frac >= 0.05  # generous sanity floor; the acceptance
        # suite pins the exact exp(-2 C0) / 2 bound


# --- property tests ----------------------------------------------------------

@given(st.floats(min_value=0.05, max_value=0.95),
       st.floats(min_value=0.5, max_value=8.0))
@settings(max_examples=30, deadline=None)
def test_volume_below_sphere_mean_property(r, q):
    gs = ONE_PLUS_2Z3
    rad = Radius.from_r(r)
    v = volume_mean(gs, q, rad, 1)
    m = mp_sampled(gs, q, rad)
    assert v <= m + 1e-8


@given(st.integers(min_value=1, max_value=60),
       st.integers(min_value=2, max_value=40))
@settings(max_examples=25, deadline=None)
def test_fold_matches_brute_force_property(n1, gap):
    """Sampled means agree with direct evaluation for random 2-term series."""
    n2 = n1 + gap
    gs = poly_series({n1: 1.5, n2: 0.25})
    r = 0.6
    got = mp_sampled(gs, 1.0, Radius.from_r(r))
    want = brute_mp(1.0, [(n1, 1.5), (n2, 0.25)], 1.0, r)
    assert got == pytest.approx(want, abs=1e-7)
