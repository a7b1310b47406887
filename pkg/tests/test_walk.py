from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from superapprox.errors import NotSymmetric, TableMismatch, Unsupported
from superapprox.modgroup import SubsetHandle, enumerate_group, lubotzky
from superapprox.walk import (
    Measure, convolve, delta, flattening_series, kesten_check, l2_norm, mixing_check, operator_matrix,
    spectral_gap, trace_identity_check, uniform_on, uniform_on_subset, walk_distribution,
)

from conftest import cyclic_gens, unipotent_gens


def test_uniform_on_generators(sl2_7, mu7):
    assert len(mu7.support()) == 4
    assert all(mu7[i] == Fraction(1, 4) for i in mu7.support())
    t = enumerate_group(cyclic_gens(2))  # g = g^-1 collapses to one generator
    mu = uniform_on(t)
    assert len(mu.support()) == 1 and mu[mu.support()[0]] == 1


def test_measure_validation(sl2_5):
    w = np.zeros(sl2_5.order)
    w[0] = 0.5
    with pytest.raises(ValueError):
        Measure(sl2_5, w)


def test_convolve_identity(mu5, sl2_5):
    e = delta(sl2_5)
    assert np.array_equal(convolve(e, mu5).probabilities(), mu5.probabilities())
    assert convolve(mu5, mu5)[0] == Fraction(1, 4)


def test_convolve_matches_definition(sl2_5):
    rng = np.random.default_rng(3)
    t = sl2_5
    a = uniform_on_subset(SubsetHandle.from_ids(t, rng.choice(t.order, 5, replace=False)))
    b = uniform_on_subset(SubsetHandle.from_ids(t, rng.choice(t.order, 3, replace=False)))
    out = convolve(a, b)
    want = {}
    for h in a.support():
        for g in b.support():
            x = int(t.multiply_ids(np.array([h]), np.array([g]))[0])
            want[x] = want.get(x, 0) + a[h] * b[g]
    assert {int(i): out[i] for i in out.support()} == want


def test_convolve_table_mismatch(mu5, mu7):
    with pytest.raises(TableMismatch):
        convolve(mu5, mu7)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_convolution_associative(seed):
    t = enumerate_group(lubotzky(5))
    rng = np.random.default_rng(seed)
    ms = []
    for _ in range(3):
        ids = rng.choice(t.order, int(rng.integers(1, 6)), replace=False)
        ms.append(uniform_on_subset(SubsetHandle.from_ids(t, ids)))
    lhs = convolve(convolve(ms[0], ms[1]), ms[2])
    rhs = convolve(ms[0], convolve(ms[1], ms[2]))
    assert [lhs[i] for i in range(t.order)] == [rhs[i] for i in range(t.order)]


def test_self_convolution_symmetric(mu7):
    assert convolve(mu7, mu7).is_symmetric()


def test_walk_distribution(mu5, sl2_5):
    assert walk_distribution(mu5, 0)[0] == 1
    assert [walk_distribution(mu5, 1)[i] for i in range(120)] == [mu5[i] for i in range(120)]
    t3 = enumerate_group(unipotent_gens(3))
    m4 = walk_distribution(uniform_on(t3), 4)
    assert sum(m4[i] for i in range(t3.order)) == 1


def test_l2_norm(mu5, sl2_5):
    assert l2_norm(delta(sl2_5)) == 1
    assert l2_norm(mu5) == pytest.approx(0.5)
    full = uniform_on_subset(SubsetHandle.full(sl2_5))
    assert l2_norm(full) == pytest.approx(1 / math.sqrt(120))


def test_flattening_series():
    t = enumerate_group(lubotzky(17))
    series = flattening_series(uniform_on(t, exact=False), 40)
    norms = [v for _, v in series]
    assert norms[0] == 1
    assert all(b <= a + 1e-15 for a, b in zip(norms, norms[1:]))
    floor = 1 / math.sqrt(t.order)
    assert min(norms) <= 1.05 * floor
    with pytest.raises(ValueError):
        flattening_series(uniform_on(t), 0)


@pytest.mark.parametrize("n,lam", [(3, 0.5), (5, math.cos(math.pi / 5))])
def test_cyclic_gap(n, lam):
    t = enumerate_group(cyclic_gens(n))
    assert t.order == n
    for method in ("dense", "iterative", "power"):
        assert spectral_gap(uniform_on(t), method=method).lam == pytest.approx(lam, abs=1e-7)


def test_gap_sl2_5(mu5):
    dense = spectral_gap(mu5, method="dense")
    assert dense.lam == pytest.approx((1 + math.sqrt(5)) / 4, abs=1e-12)
    assert abs(spectral_gap(mu5, method="iterative").lam - dense.lam) < 1e-6
    assert abs(spectral_gap(mu5, method="power").lam - dense.lam) < 1e-6
    assert not dense.bipartite


@pytest.mark.parametrize("p", [7, 11, 13])
def test_iterative_matches_dense(p):
    mu = uniform_on(enumerate_group(lubotzky(p)), exact=False)
    assert abs(spectral_gap(mu, method="iterative").lam - spectral_gap(mu, method="dense").lam) < 1e-6


def test_bipartite_detected():
    # mod 2 the unipotent generators give SL_2(F_2) = S_3 with a bipartite Cayley graph
    t = enumerate_group(unipotent_gens(2))
    rep = spectral_gap(uniform_on(t))
    assert rep.bipartite and rep.lam == pytest.approx(1.0)


def test_gap_needs_symmetric(sl2_5):
    a = SubsetHandle.from_ids(sl2_5, [int(sl2_5.gen_ids[0])])
    with pytest.raises(NotSymmetric):
        spectral_gap(uniform_on_subset(a))


def test_operator_matrix_is_stochastic(mu5):
    m = operator_matrix(mu5)
    assert np.allclose(m.sum(axis=0), 1) and np.allclose(m.sum(axis=1), 1)
    assert np.allclose(m, m.T)


def test_mixing_trivial_cases(mu5, sl2_5):
    lam = spectral_gap(mu5).lam
    full = SubsetHandle.full(sl2_5)
    v = mixing_check(mu5, lam, full, 7)
    assert v.passed and v.lhs == 0
    x = SubsetHandle.from_ids(sl2_5, [3, 8, 40])
    v = mixing_check(mu5, lam, x, 0)
    assert v.passed and v.lhs == Fraction(3, 120)


def test_mixing_random_subsets(mu7, sl2_7):
    lam = spectral_gap(mu7, method="dense").lam
    rng = np.random.default_rng(7)
    walks = {l: walk_distribution(mu7, l) for l in (5, 10, 20)}
    for _ in range(20):
        x = SubsetHandle.from_ids(sl2_7, rng.choice(sl2_7.order, int(rng.integers(1, sl2_7.order)), replace=False))
        for l, w in walks.items():
            assert mixing_check(mu7, lam, x, l, walk=w).passed


def test_trace_identity(mu5, sl2_5):
    for l in (0, 1, 3):
        lhs, rhs = trace_identity_check(mu5, l)
        assert lhs == pytest.approx(rhs, rel=1e-8)
    lhs, rhs = trace_identity_check(mu5, 0)
    assert rhs == 120
    lhs, rhs = trace_identity_check(delta(sl2_5), 4)
    assert lhs == pytest.approx(120) and rhs == 120
    with pytest.raises(Unsupported):
        trace_identity_check(mu5, 1, dense_cap=100)


def test_kesten_examples(mu7, sl2_7):
    full = SubsetHandle.full(sl2_7)
    v = kesten_check(mu7, full, 4, 2)
    assert v.passed and v.lhs == 1 and v.rhs == 1
    e = SubsetHandle.from_ids(sl2_7, [0])
    for l in (2, 4, 6):
        v = kesten_check(mu7, e, l, l - 1)
        assert v.passed
        assert v.lhs == walk_distribution(mu7, 2 * l - 2)[0]
    with pytest.raises(ValueError):
        kesten_check(mu7, e, 2, 2)


def test_kesten_rejects_nonsymmetric(mu7, sl2_7):
    a = SubsetHandle.from_ids(sl2_7, [int(sl2_7.gen_ids[0])])
    with pytest.raises(NotSymmetric):
        kesten_check(mu7, a, 3, 1)
