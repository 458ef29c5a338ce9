import math

import numpy as np
import pytest

from gapmeans.errors import InputError, RangeError
from gapmeans.grids import Radius
from gapmeans.multidim import (
    BallSeries,
    HomPoly,
    _log_monomial_l2sq,
    _monomials,
    generate_delta_table,
    l2_norm_sphere,
    load_delta_table,
    m2_exact_ball,
    mc_inner_product,
    mp_sphere_sampled,
    random_rw_poly,
    rw_delta,
    sphere_samples,
    sup_norm_sphere,
    theorem1_series_ball,
)
from gapmeans.weights import make_power_weight


# --- monomials and norms -----------------------------------------------------

def test_monomial_count():
    # degree-k monomials in d variables: C(k+d-1, d-1)
    assert len(_monomials(2, 5)) == 6
    assert len(_monomials(3, 4)) == 15


def test_monomial_l2_formula_d2():
    # ||z1^a z2^b||^2 = (d-1)! a! b! / (d-1+k)! with d=2, k=a+b
    got = math.exp(_log_monomial_l2sq((3, 2), 2))
    want = (math.factorial(3) * math.factorial(2)) / math.factorial(6)
    assert got == pytest.approx(want, rel=1e-12)


def test_monomial_l2_matches_monte_carlo():
    alpha = (2, 1)
    poly = HomPoly(dim=2, degree=3, exponents=np.array([alpha]),
                   coeffs=np.array([1.0 + 0j]))
    est, se = mc_inner_product(poly, poly, 200_000, seed=9)
    want = math.exp(_log_monomial_l2sq(alpha, 2))
    assert abs(est.real - want) <= 4.0 * max(se, 1e-6)


def test_distinct_monomials_orthogonal_mc():
    p1 = HomPoly(dim=2, degree=3, exponents=np.array([(3, 0)]),
                 coeffs=np.array([1.0 + 0j]))
    p2 = HomPoly(dim=2, degree=3, exponents=np.array([(0, 3)]),
                 coeffs=np.array([1.0 + 0j]))
    est, se = mc_inner_product(p1, p2, 200_000, seed=2)
    assert abs(est) <= 4.0 * max(se, 1e-6)


def test_homogeneity_enforced():
    with pytest.raises(InputError):
        HomPoly(dim=2, degree=1, exponents=np.array([(1, 0), (1, 1)]),
                coeffs=np.array([1.0 + 0j, 1.0 + 0j]))


def test_poly_eval_homogeneous_scaling():
    poly = random_rw_poly(2, 7, seed=1)
    zeta = sphere_samples(2, 4, seed=3)
    v1 = poly.eval(zeta)
    v2 = poly.eval(0.5 * zeta)
    assert np.allclose(v2, v1 * 0.5 ** 7, rtol=1e-12)


def test_l2_norm_single_normalized_monomial():
    alpha = (4, 2)
    inv = math.exp(-0.5 * _log_monomial_l2sq(alpha, 2))
    poly = HomPoly(dim=2, degree=6, exponents=np.array([alpha]),
                   coeffs=np.array([inv + 0j]))
    assert l2_norm_sphere(poly) == pytest.approx(1.0, rel=1e-12)


def test_sup_norm_of_pure_power():
    # |z1|^k maxes at z=(1,0): sup of z1^k is 1
    poly = HomPoly(dim=2, degree=6, exponents=np.array([(6, 0)]),
                   coeffs=np.array([1.0 + 0j]))
    assert sup_norm_sphere(poly) == pytest.approx(1.0, rel=1e-9)


def test_sup_norm_two_term_known():
    # |z1 z2| on |z1|^2+|z2|^2=1 maxes at 1/2
    poly = HomPoly(dim=2, degree=2, exponents=np.array([(1, 1)]),
                   coeffs=np.array([1.0 + 0j]))
    assert sup_norm_sphere(poly) == pytest.approx(0.5, rel=1e-9)


# --- random polynomials ------------------------------------------------------

def test_random_poly_deterministic():
    a = random_rw_poly(2, 12, seed=4)
    b = random_rw_poly(2, 12, seed=4)
    assert np.array_equal(a.coeffs, b.coeffs)
    c = random_rw_poly(2, 12, seed=5)
    assert not np.array_equal(a.coeffs, c.coeffs)


def test_random_poly_unit_sup():
    poly = random_rw_poly(2, 9, seed=0)
    assert sup_norm_sphere(poly) == pytest.approx(1.0, rel=1e-9)


def test_rw_delta_raw_l2_is_sqrt_m():
    for k in (1, 5, 20):
        _, l2, _ = rw_delta(2, k, seed=0)
        assert l2 == pytest.approx(math.sqrt(k + 1), rel=1e-12)


def test_random_poly_range_checks():
    with pytest.raises(RangeError):
        random_rw_poly(4, 3, seed=0)
    with pytest.raises(RangeError):
        random_rw_poly(2, 0, seed=0)
    with pytest.raises(RangeError):
        random_rw_poly(2, 200, seed=0)


def test_sphere_samples_on_sphere_and_shard_stable():
    z = sphere_samples(2, 20_000, seed=1)
    norms = np.linalg.norm(z, axis=1)
    assert np.allclose(norms, 1.0, atol=1e-12)
    # shard scheme: a longer draw extends, never reshuffles, the shorter
    z2 = sphere_samples(2, 40_000, seed=1)
    assert np.array_equal(z, z2[:20_000])


# --- shipped delta table -----------------------------------------------------

def test_shipped_delta_table_floor():
    rows = load_delta_table()
    assert len(rows) == 5 * 64
    assert min(float(r["delta"]) for r in rows) >= 0.2


def test_delta_table_regeneration_matches_shipped():
    """Spot-check: regenerating one row reproduces the shipped value."""
    rows = load_delta_table()
    pick = [r for r in rows if int(r["seed"]) == 1 and int(r["k"]) == 8][0]
    sup, l2, delta = rw_delta(2, 8, seed=1)
    assert sup == pytest.approx(float(pick["sup_estimate"]), rel=1e-12)
    assert delta == pytest.approx(float(pick["delta"]), rel=1e-12)


def test_generate_delta_table_format():
    text = generate_delta_table(d=2, k_max=2, seeds=(0,), budget=20_000)
    lines = text.strip().split("\n")
    assert lines[0] == "seed,k,sup_estimate,l2,delta"
    assert len(lines) == 3


# --- ball series -------------------------------------------------------------

@pytest.fixture(scope="module")
def ball_alpha1():
    return theorem1_series_ball(make_power_weight(1.0), 2, seed=0,
                                budget=30_000)


def test_ball_series_terms_capped(ball_alpha1):
    assert all(n <= 128 for n, _, _, _ in ball_alpha1.terms)
    ns = [n for n, _, _, _ in ball_alpha1.terms]
    assert ns == sorted(ns)


def test_ball_series_normalization_tracks_weight(ball_alpha1):
    w = make_power_weight(1.0)
    # within the degree-capped window M_2/w is pinned near its min of 1
    gaps = []
    for j in range(1, 6):
        rad = Radius.dyadic(j)
        gaps.append(m2_exact_ball(ball_alpha1, rad) - w.phi_radius(rad))
    assert min(gaps) >= -1e-9
    assert min(gaps) < 1.0


def test_ball_m2_mc_agreement(ball_alpha1):
    """Exact orthogonality M_2 vs Monte Carlo within 3 standard errors."""
    r = 0.5
    exact = m2_exact_ball(ball_alpha1, r)
    mc, se = mp_sphere_sampled(ball_alpha1, 2.0, r, 100_000, seed=0)
    assert abs(mc - exact) <= 3.0 * max(se, 1e-6)


def test_ball_series_json_round_trip(tmp_path, ball_alpha1):
    path = tmp_path / "ball.json"
    ball_alpha1.save(path)
    back = BallSeries.load(path)
    assert back.dim == ball_alpha1.dim
    assert len(back.terms) == len(ball_alpha1.terms)
    z = sphere_samples(2, 8, seed=7)
    assert np.allclose(back.eval_at(0.6, z), ball_alpha1.eval_at(0.6, z),
                       rtol=1e-12)


def test_ball_eval_matches_term_sum(ball_alpha1):
    z = sphere_samples(2, 16, seed=5)
    r = 0.7
    direct = np.full(16, math.exp(ball_alpha1.log_const), dtype=complex)
    for n, la, _, poly in ball_alpha1.terms:
        direct += math.exp(la + n * math.log(r)) * poly.eval(z)
    assert np.allclose(ball_alpha1.eval_at(r, z), direct, rtol=1e-10)


def test_ball_certificate_rows_post_normalization(ball_alpha1):
    for n, sup, l2, l2b in ball_alpha1.certificate.entries:
        assert sup == 1.0
        assert l2 == l2b
        assert 0.2 <= l2 <= 1.0


def test_mp_sphere_sampled_guards():
    bs = theorem1_series_ball(make_power_weight(1.0), 2, seed=0,
                              budget=20_000)
    with pytest.raises(InputError):
        mp_sphere_sampled(bs, 2.0, 0.5, 500)
