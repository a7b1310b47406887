from __future__ import annotations

import json
from fractions import Fraction

import numpy as np
import pytest

from superapprox.errors import Unsupported
from superapprox.heights import IntPolynomial
from superapprox.modgroup import enumerate_group, lubotzky
from superapprox.regsemi import f_s
from superapprox.varcount import (
    MatrixVariety, count_points_mod_p, dimension_bound_check, escape_series, load_variety, locus_mask,
    mixing_envelope, nonregular_escape, nonregular_mask, special_linear_table, word_lift,
)
from superapprox.walk import spectral_gap, uniform_on


@pytest.fixture(scope="module")
def tables():
    return {p: special_linear_table(2, p) for p in (3, 5, 7, 11)}


def test_trace_two_counts(tables):
    w = MatrixVariety.trace_equals(2, 2)
    for p, t in tables.items():
        brute = sum(1 for m in t.mats if (int(m[0, 0]) + int(m[1, 1]) - 2) % p == 0)
        assert count_points_mod_p(w, t) == brute == p * p


def test_trivial_varieties(tables):
    t = tables[5]
    assert count_points_mod_p(MatrixVariety.identity(2), t) == 1
    assert count_points_mod_p(MatrixVariety.whole(2), t) == t.order == 120


def test_unsupported_prime_power():
    t = special_linear_table(2, 3, 2)
    with pytest.raises(Unsupported):
        count_points_mod_p(MatrixVariety.trace_equals(2, 2), t)


def test_variety_validation():
    with pytest.raises(ValueError):
        MatrixVariety(2, (IntPolynomial.parse("1:1;-1:0"),))


def test_dimension_bound(tables):
    rows = dimension_bound_check(MatrixVariety.trace_equals(2, 2, claimed_dim=2), [3, 5, 7, 11], 1.01, tables)
    assert all(r.ratio == 1 and r.ok for r in rows)
    rows = dimension_bound_check(MatrixVariety.whole(2), [3, 5, 7, 11], 1.0, tables)
    assert all(r.ratio == Fraction(r.p**2 - 1, r.p**2) for r in rows)
    rows = dimension_bound_check(MatrixVariety.identity(2), [5], 1.0, tables)
    assert rows[0].ratio == 1
    with pytest.raises(ValueError):
        dimension_bound_check(MatrixVariety.trace_equals(2, 2), [5])


def test_load_variety(tmp_path):
    path = tmp_path / "w.json"
    path.write_text(json.dumps({"n": 2, "claimed_dim": 2, "constraints": ["1:1,0,0,0;1:0,0,0,1;-2:0,0,0,0"]}))
    w = load_variety(str(path))
    assert count_points_mod_p(w, special_linear_table(2, 7)) == 49


def test_escape_trivial():
    t = enumerate_group(lubotzky(7))
    mu = uniform_on(t)
    whole = escape_series(MatrixVariety.whole(2), mu, 5)
    assert [m for _, m in whole.rows] == [1] * 6
    w = MatrixVariety.trace_equals(2, 0)
    assert escape_series(w, mu, 3).rows[0] == (0, 0)


def test_escape_converges_in_envelope():
    p = 11
    t = enumerate_group(lubotzky(p))
    mu = uniform_on(t, exact=False)
    w = MatrixVariety.trace_equals(2, 2)
    series = escape_series(w, mu, 30)
    assert series.limit == Fraction(p, p * p - 1)
    lam = spectral_gap(mu, method="dense").lam
    for l, m in series.rows:
        assert 0 <= m <= 1
        assert abs(m - float(series.limit)) <= mixing_envelope(lam, series.locus_size, l)


def test_word_lift_reduces(sl2_25):
    rng = np.random.default_rng(0)
    for i in rng.integers(0, sl2_25.order, 20):
        lift = word_lift(sl2_25, int(i))
        assert lift[0, 0] * lift[1, 1] - lift[0, 1] * lift[1, 0] == 1
        assert np.array_equal((lift % 25).astype(np.int64), sl2_25.mats[i])


def test_nonregular_mask_matches_integer_lifts(sl2_25):
    mask = nonregular_mask(sl2_25, np.eye(2, dtype=np.int64), 1)
    assert mask[0]
    rng = np.random.default_rng(1)
    for i in rng.integers(0, sl2_25.order, 40):
        lift = word_lift(sl2_25, int(i)).tolist()
        assert mask[i] == (f_s(lift, [5]).valuations[5] >= 1)


def test_nonregular_escape(sl2_25):
    mu = uniform_on(sl2_25, exact=False)
    series = nonregular_escape(mu, np.eye(2, dtype=np.int64), 1, 25)
    assert series.rows[0] == (0, 1)
    assert all(0 <= m <= 1 for _, m in series.rows)
    # |f_s| = tr^2 (tr^2 - 4)^3, so the locus mod 5 is tr in {0, 2, -2}: 30 + 25 + 25 of 120 classes
    assert series.limit == Fraction(80, 120)
    lam = spectral_gap(mu).lam
    for l, m in series.rows:
        assert abs(m - float(series.limit)) <= mixing_envelope(lam, series.locus_size, l) + 1e-12
    with pytest.raises(ValueError):
        nonregular_escape(mu, np.eye(2, dtype=np.int64), 0, 3)
    with pytest.raises(ValueError):
        nonregular_escape(mu, np.eye(2, dtype=np.int64), 3, 3)
