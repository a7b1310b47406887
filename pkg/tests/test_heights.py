from __future__ import annotations

import itertools
import math
from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from superapprox.errors import SearchBudgetExceeded
from superapprox.heights import (
    INF, IntPolynomial, place_norm, point_height, point_height_by_places, poly_height, poly_height_by_places,
    primitive_representative, product_formula_check, rationals_up_to, small_point_search,
)

nonzero = st.fractions(max_denominator=10**6).filter(lambda q: q != 0)


def test_place_norm_examples():
    assert place_norm(6, 2) == Fraction(1, 2)
    assert place_norm(6, 5) == 1
    assert place_norm(Fraction(3, 4), 2) == 4
    assert place_norm(Fraction(-3, 4), INF) == Fraction(3, 4)
    assert place_norm(0, 7) == 0


@pytest.mark.parametrize("x", [6, 1, Fraction(-35, 8)])
def test_product_formula_examples(x):
    res = product_formula_check(x)
    assert res.passed and res.product == 1


def test_product_formula_zero():
    with pytest.raises(ValueError):
        product_formula_check(0)


@given(nonzero)
def test_product_formula_random(x):
    assert product_formula_check(x).passed


def test_point_height_examples():
    h = point_height(["3/2"])
    assert h.multiplicative == 3 and h.logarithmic == pytest.approx(math.log(3), abs=1e-12)
    assert point_height([1, 2, 4], projective=True).multiplicative == 4
    assert point_height([0]).logarithmic == 0
    assert point_height([Fraction(1, 2), Fraction(1, 3)]).multiplicative == 6
    with pytest.raises(ValueError):
        point_height([0, 0], projective=True)


def test_bit_cap():
    with pytest.raises(ValueError):
        point_height([2**600])


@given(st.lists(st.fractions(max_denominator=1000), min_size=1, max_size=4))
def test_height_by_places_agrees(xs):
    assert point_height(xs).multiplicative == point_height_by_places(xs).multiplicative
    if any(x != 0 for x in xs):
        assert (point_height(xs, projective=True).multiplicative
                == point_height_by_places(xs, projective=True).multiplicative)


@given(st.lists(st.fractions(max_denominator=1000), min_size=1, max_size=4).filter(lambda v: any(v)), nonzero)
def test_projective_scaling_invariance(xs, lam):
    assert point_height(xs, projective=True) == point_height([lam * x for x in xs], projective=True)


@given(nonzero, nonzero)
def test_height_submultiplicative(x, y):
    assert point_height([x * y]).multiplicative <= point_height([x]).multiplicative * point_height([y]).multiplicative


def test_primitive_representative():
    assert primitive_representative([Fraction(1, 2), Fraction(-3, 4), 0]) == [2, -3, 0]


def test_poly_parse_and_eval():
    f = IntPolynomial.parse("2:1,0;-3:0,1;5:0,0")
    assert f.nvars == 2 and f([1, 1]) == 4
    assert IntPolynomial.parse("7:").coefficients == [7]
    with pytest.raises(ValueError):
        IntPolynomial.parse("1:1;1:1,1")


@pytest.mark.parametrize("text,H", [("1:1;2:0", 2), ("2:1;6:0", 3), ("7:0", 1), ("-4:2;6:1;10:0", 5)])
def test_poly_height(text, H):
    f = IntPolynomial.parse(text)
    assert poly_height(f).multiplicative == H
    assert poly_height_by_places(f).multiplicative == H


def test_poly_height_zero():
    with pytest.raises(ValueError):
        poly_height(IntPolynomial.from_dict(1, {(1,): 0}))


def test_rationals_up_to():
    rs = rationals_up_to(3)
    assert rs[:3] == [0, 1, -1]
    assert len(rs) == len(set(rs))
    heights = [max(abs(r.numerator), r.denominator) for r in rs]
    assert heights == sorted(heights) and max(heights) == 3


def test_small_point_examples():
    res = small_point_search([IntPolynomial.parse("1:1;-2:0")], 3)
    assert res.point == (2,) and res.height.logarithmic == pytest.approx(math.log(2))
    circle = [IntPolynomial.parse("1:2,0;1:0,2;-1:0,0"), IntPolynomial.parse("1:1,0;-1:0,1")]
    res = small_point_search(circle, 3)
    assert res.point is None and res.tested > 0
    lin = [IntPolynomial.parse("2:1,0;-3:0,1"), IntPolynomial.parse("1:1,0;1:0,1;-5:0,0")]
    assert small_point_search(lin, 3).point == (3, 2)


def test_small_point_budget():
    circle = [IntPolynomial.parse("1:2,0;1:0,2;-1:0,0"), IntPolynomial.parse("1:1,0;-1:0,1")]
    with pytest.raises(SearchBudgetExceeded):
        small_point_search(circle, 3, budget=100)


def test_small_point_ordering_soundness():
    # X*Y = 2 over heights <= 4: brute force the least-height solution
    f = [IntPolynomial.parse("1:1,1;-2:0,0")]
    res = small_point_search(f, math.log(4))
    pool = rationals_up_to(4)
    sols = [(x, y) for x, y in itertools.product(pool, repeat=2) if x * y == 2]
    best = min(point_height(s).multiplicative for s in sols)
    assert res.height.multiplicative == best == point_height(res.point).multiplicative
