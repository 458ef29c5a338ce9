import math

import pytest
from hypothesis import given, strategies as st

from gapmeans.errors import RangeError
from gapmeans.grids import Radius, as_radius, dyadic_grid, merge_grids


def test_dyadic_radius_is_exact():
    rad = Radius.dyadic(35)
    assert rad.delta == 2.0 ** -35
    assert rad.r == 1.0 - 2.0 ** -35


def test_dyadic_radius_beyond_float_resolution():
    # 1 - 2^-60 rounds to 1.0 in float; delta must survive anyway
    rad = Radius.dyadic(60)
    assert rad.delta == 2.0 ** -60
    assert rad.s == pytest.approx(math.log1p(-2.0 ** -60), abs=1e-30)
    assert rad.s < 0.0


@given(st.floats(min_value=1e-12, max_value=0.999999))
def test_from_r_round_trip(r):
    rad = Radius.from_r(r)
    assert rad.r == pytest.approx(r, rel=1e-15)


def test_from_r_rejects_out_of_range():
    with pytest.raises(RangeError):
        Radius.from_r(1.0)
    with pytest.raises(RangeError):
        Radius.from_r(-0.25)


def test_r_zero():
    rad = Radius.from_r(0.0)
    assert rad.delta == 1.0
    assert rad.s == -math.inf


def test_dyadic_grid_contents():
    grid = dyadic_grid(3)
    deltas = [g.delta for g in grid]
    assert deltas == [1.0, 0.5, 0.25, 0.125]
    assert grid[0].r == 0.0


def test_dyadic_grid_sorted_increasing_r():
    grid = dyadic_grid(14)
    rs = [g.r for g in grid]
    assert rs == sorted(rs)
    assert len(set(g.delta for g in grid)) == len(grid)


def test_merge_grids_dedupes():
    a = dyadic_grid(4)
    b = dyadic_grid(6)
    merged = merge_grids(a, b)
    assert len(merged) == len(dyadic_grid(6))
    deltas = [g.delta for g in merged]
    assert deltas == sorted(deltas, reverse=True)


def test_as_radius_passthrough_and_conversion():
    rad = Radius.dyadic(5)
    assert as_radius(rad) is rad
    conv = as_radius(0.5)
    assert conv.delta == 0.5


@given(st.integers(min_value=0, max_value=100))
def test_s_negative_and_monotone(j):
    rad = Radius.dyadic(j)
    nxt = Radius.dyadic(j + 1)
    assert rad.s <= 0.0
    assert nxt.s > rad.s or (j == 0 and rad.s == -math.inf)
