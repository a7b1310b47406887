"""Approximate-subgroup diagnostics on subsets of an enumerated group."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import NotSymmetric
from .modgroup import SubsetHandle, subset_power, subset_product
from .walk import Measure, convolve, l2_norm_sq, walk_distribution


@dataclass
class PredicateReport:
    q: int
    delta: float
    l: int
    mass: Fraction | float
    conjuncts: tuple[bool, bool, bool]

    @property
    def holds(self) -> bool:
        return all(self.conjuncts)


@dataclass
class GrowthReport:
    sizes: tuple[int, int, int]
    delta_star: float
    predicate: PredicateReport | None = None

    def as_dict(self) -> dict:
        out = {"schema": "growth/1", "sizes": list(self.sizes), "delta_star": _json_float(self.delta_star)}
        if self.predicate is not None:
            pr = self.predicate
            out["predicate"] = {"q": pr.q, "delta": pr.delta, "l": pr.l, "conjuncts": list(pr.conjuncts)}
        return out


def _json_float(x: float):
    return "inf" if math.isinf(x) else x


def tripling_exponent(a: int, aaa: int) -> float:
    """Smallest d with aaa <= a^(1+d)."""
    if a >= 2:
        return math.log(aaa) / math.log(a) - 1.0
    return math.inf if aaa > 1 else 0.0


def growth_profile(a: SubsetHandle) -> GrowthReport:
    if len(a) == 0:
        raise ValueError("A must be nonempty")
    aa = subset_product(a, a)
    aaa = subset_product(aa, a)
    sizes = (len(a), len(aa), len(aaa))
    return GrowthReport(sizes, tripling_exponent(sizes[0], sizes[2]))


def check_P_predicate(a: SubsetHandle, mu: Measure, delta: float, l: int,
                      q: int | None = None, walk: Measure | None = None) -> PredicateReport:
    """Evaluate the three conjuncts: walk mass of A above q^-delta, l > log(q)/delta,
    and |AAA| <= |A|^(1+delta).  ``q`` defaults to the table modulus."""
    if delta <= 0:
        raise ValueError("delta must be positive")
    if not a.is_symmetric():
        raise NotSymmetric("A must be symmetric")
    q = a.table.modulus if q is None else q
    m = walk if walk is not None else walk_distribution(mu, l)
    mass = m.mass(a)
    logq = math.log(q)
    c1 = mass > 0 and math.log(mass) > -delta * logq
    c2 = l > logq / delta
    size_a = len(a)
    size_aaa = len(subset_power(a, 3))
    c3 = size_aaa <= size_a ** (1.0 + delta)
    return PredicateReport(q, delta, l, mass, (bool(c1), bool(c2), bool(c3)))


@dataclass
class BSGVerdict:
    size_bounds: bool
    tripling: bool
    min_mass: bool
    details: dict = field(default_factory=dict)

    @property
    def holds(self) -> bool:
        return self.size_bounds and self.tripling and self.min_mass


def _power(k: float, r: float):
    if float(r).is_integer():
        return Fraction(k) ** int(r)
    return k**r


def bsg_verify(a: SubsetHandle, mu: Measure, k: float, r: float = 3) -> BSGVerdict:
    """Check the three BSG conclusions for a supplied candidate set A."""
    if len(a) == 0:
        raise ValueError("candidate set must be nonempty")
    kr = _power(k, r)
    norm2 = l2_norm_sq(mu)
    size = len(a)
    lower = 1 / (kr * norm2)
    upper = kr / norm2
    c1 = lower <= size <= upper
    aaa = len(subset_power(a, 3))
    c2 = aaa <= kr * size
    conv = convolve(mu.reversed(), mu)
    sel = conv.weights[a.mask]
    lowest = min(sel.tolist())
    lowest = Fraction(lowest, conv.den) if conv.exact else float(lowest)
    c3 = lowest >= 1 / (kr * size)
    return BSGVerdict(bool(c1), bool(c2), bool(c3), {
        "size": size, "size_range": (lower, upper), "aaa": aaa, "min_mass": lowest, "norm2": norm2,
    })


def level_set(mu: Measure, count: int) -> SubsetHandle:
    """The ``count`` heaviest elements of mu (ties broken by id)."""
    w = mu.probabilities()
    order = np.lexsort((np.arange(w.size), -w))
    return SubsetHandle.from_ids(mu.table, order[:count])


@dataclass
class RuzsaVerdict:
    passed: bool
    lhs: int
    rhs: Fraction


def ruzsa_check(a: SubsetHandle, c: int) -> RuzsaVerdict:
    """|A^c| <= (|AAA|/|A|)^(c-2) |A| for symmetric A containing the identity."""
    if c < 3:
        raise ValueError("c must be at least 3")
    if 0 not in a:
        raise ValueError("A must contain the identity")
    if not a.is_symmetric():
        raise NotSymmetric("A must be symmetric")
    size = len(a)
    aaa = len(subset_power(a, 3))
    lhs = len(subset_power(a, c))
    rhs = Fraction(aaa, size) ** (c - 2) * size
    return RuzsaVerdict(lhs <= rhs, lhs, rhs)
