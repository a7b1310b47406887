"""Heights of rational points and integer polynomials over Q."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from functools import reduce
from typing import Iterable, Sequence

import numpy as np
from sympy import factorint

from .errors import SearchBudgetExceeded

INF = "inf"
MAX_BITS = 512


def _rational(x) -> Fraction:
    if isinstance(x, str):
        x = Fraction(x.strip())
    x = Fraction(x)
    if max(abs(x.numerator).bit_length(), x.denominator.bit_length()) > MAX_BITS:
        raise ValueError(f"rational exceeds {MAX_BITS} bits")
    return x


def _primes(x: Fraction) -> list[int]:
    return sorted(set(factorint(abs(x.numerator))) | set(factorint(x.denominator)))


def valuation(x: Fraction, p: int) -> int:
    x = Fraction(x)
    if x == 0:
        raise ValueError("valuation of 0")
    v = 0
    num, den = abs(x.numerator), x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


def place_norm(x, place) -> Fraction:
    """|x|_p = p^(-v_p(x)) at a prime, |x| at infinity."""
    x = _rational(x)
    if place == INF or place == math.inf:
        return abs(x)
    if x == 0:
        return Fraction(0)
    return Fraction(int(place)) ** (-valuation(x, int(place)))


def places(xs: Iterable[Fraction]) -> list:
    """Infinity plus every prime dividing a numerator or denominator."""
    ps: set[int] = set()
    for x in xs:
        if x != 0:
            ps.update(_primes(x))
    return [INF] + sorted(ps)


@dataclass
class FormulaCheck:
    passed: bool
    product: Fraction
    factors: dict = field(default_factory=dict)


def product_formula_check(x) -> FormulaCheck:
    x = _rational(x)
    if x == 0:
        raise ValueError("product formula needs x != 0")
    factors = {str(v): place_norm(x, v) for v in places([x])}
    prod = reduce(lambda a, b: a * b, factors.values(), Fraction(1))
    return FormulaCheck(prod == 1, prod, factors)


@dataclass(frozen=True)
class HeightValue:
    multiplicative: Fraction

    @property
    def logarithmic(self) -> float:
        h = self.multiplicative
        return math.log(h.numerator) - math.log(h.denominator)

    def as_dict(self) -> dict:
        h = self.multiplicative
        text = str(h.numerator) if h.denominator == 1 else str(h)
        return {"schema": "height/1", "H": text, "logH": self.logarithmic}


def _lcm(values: Iterable[int]) -> int:
    return reduce(math.lcm, values, 1)


def primitive_representative(coords: Sequence) -> list[int]:
    """Scale a nonzero rational vector to coprime integers."""
    xs = [_rational(c) for c in coords]
    if all(x == 0 for x in xs):
        raise ValueError("the zero vector is not a projective point")
    d = _lcm(x.denominator for x in xs)
    ints = [int(x * d) for x in xs]
    g = reduce(math.gcd, (abs(v) for v in ints))
    return [v // g for v in ints]


def point_height(coords: Sequence, projective: bool = False) -> HeightValue:
    xs = [_rational(c) for c in coords]
    if projective:
        return HeightValue(Fraction(max(abs(v) for v in primitive_representative(xs))))
    d = _lcm(x.denominator for x in xs)
    return HeightValue(Fraction(max([d] + [abs(int(x * d)) for x in xs])))


def point_height_by_places(coords: Sequence, projective: bool = False) -> HeightValue:
    """Same height, as the product over places of the local max-norms."""
    xs = [_rational(c) for c in coords]
    if not projective:
        xs = [Fraction(1)] + xs
    elif all(x == 0 for x in xs):
        raise ValueError("the zero vector is not a projective point")
    out = Fraction(1)
    for v in places(xs):
        out *= max(place_norm(x, v) for x in xs)
    return HeightValue(out)


@dataclass(frozen=True)
class IntPolynomial:
    """Integer polynomial: exponent vector -> nonzero coefficient."""

    nvars: int
    terms: tuple[tuple[tuple[int, ...], int], ...]

    @classmethod
    def from_dict(cls, nvars: int, terms: dict) -> "IntPolynomial":
        clean = {}
        for exps, c in terms.items():
            exps = tuple(int(e) for e in exps)
            if len(exps) != nvars or any(e < 0 for e in exps):
                raise ValueError(f"bad exponent vector {exps}")
            if int(c) != c:
                raise ValueError("coefficients must be integers")
            clean[exps] = clean.get(exps, 0) + int(c)
        return cls(nvars, tuple(sorted((e, c) for e, c in clean.items() if c != 0)))

    @classmethod
    def parse(cls, text: str) -> "IntPolynomial":
        """``"c:e1,e2;c:e1,e2"``, e.g. ``"2:1;6:0"`` for 2X + 6."""
        terms: dict = {}
        nvars = None
        for chunk in filter(None, (t.strip() for t in text.split(";"))):
            coeff, _, exps = chunk.partition(":")
            vec = tuple(int(e) for e in exps.split(",")) if exps.strip() else ()
            if nvars is None:
                nvars = len(vec)
            elif len(vec) != nvars:
                raise ValueError("inconsistent variable counts")
            terms[vec] = terms.get(vec, 0) + int(coeff)
        return cls.from_dict(nvars or 0, terms)

    @property
    def coefficients(self) -> list[int]:
        return [c for _, c in self.terms]

    def is_zero(self) -> bool:
        return not self.terms

    def __call__(self, point: Sequence) -> Fraction:
        xs = [Fraction(x) for x in point]
        if len(xs) != self.nvars:
            raise ValueError(f"expected {self.nvars} coordinates")
        total = Fraction(0)
        for exps, c in self.terms:
            term = Fraction(c)
            for x, e in zip(xs, exps):
                if e:
                    term *= x**e
            total += term
        return total

    def evaluate_float(self, points: np.ndarray) -> np.ndarray:
        """Vectorized float evaluation on an (m, nvars) array."""
        out = np.zeros(points.shape[0])
        for exps, c in self.terms:
            term = np.full(points.shape[0], float(c))
            for i, e in enumerate(exps):
                if e:
                    term = term * points[:, i] ** e
            out += term
        return out


def poly_height(f: IntPolynomial) -> HeightValue:
    """max |a_I| / gcd(a_I)."""
    if f.is_zero():
        raise ValueError("the zero polynomial has no height")
    cs = [abs(c) for c in f.coefficients]
    return HeightValue(Fraction(max(cs), reduce(math.gcd, cs)))


def poly_height_by_places(f: IntPolynomial) -> HeightValue:
    if f.is_zero():
        raise ValueError("the zero polynomial has no height")
    cs = [Fraction(c) for c in f.coefficients]
    out = Fraction(1)
    for v in places(cs):
        out *= max(place_norm(c, v) for c in cs)
    return HeightValue(out)


def rationals_up_to(bound: int) -> list[Fraction]:
    """All rationals of height <= bound, ordered by (height, |x|, sign)."""
    out = []
    for b in range(1, bound + 1):
        for a in range(0, bound + 1):
            if math.gcd(a, b) == 1:
                out.append(Fraction(a, b))
                if a:
                    out.append(Fraction(-a, b))
    out.sort(key=lambda x: (max(abs(x.numerator), x.denominator), abs(x), x < 0))
    return out


@dataclass
class SearchResult:
    point: tuple[Fraction, ...] | None
    height: HeightValue | None
    tested: int


def _degree(f: IntPolynomial) -> int:
    return max((sum(e) for e, _ in f.terms), default=0)


def _layer_blocks(nums: np.ndarray, dens: np.ndarray, size: int, nvars: int, h: int):
    """Tuples over the first ``size`` pool entries whose point height is exactly h,
    yielded in lexicographic rank order, one block per leading coordinate."""
    rest = np.indices((size,) * (nvars - 1)).reshape(nvars - 1, -1).T if nvars > 1 else np.zeros((1, 0), dtype=np.int64)
    for lead in range(size):
        idx = np.hstack([np.full((rest.shape[0], 1), lead), rest]).astype(np.int64)
        lcm = np.ones(idx.shape[0], dtype=np.int64)
        for i in range(nvars):
            lcm = np.lcm(lcm, dens[idx[:, i]])
        height = lcm.copy()
        for i in range(nvars):
            height = np.maximum(height, np.abs(nums[idx[:, i]]) * (lcm // dens[idx[:, i]]))
        sel = idx[height == h]
        if sel.size:
            yield sel


def small_point_search(system: Sequence[IntPolynomial], h_bound: float,
                       budget: int = 5_000_000) -> SearchResult:
    """First common rational zero in increasing point-height order.

    Candidates have affine height <= exp(h_bound) and are ranked by (point
    height, coordinate ranks in ``rationals_up_to`` order).  Only Q-points are
    searched, so a miss says nothing about algebraic solutions.
    """
    if not system:
        raise ValueError("empty system")
    nvars = system[0].nvars
    if any(f.nvars != nvars for f in system):
        raise ValueError("polynomials have different variable counts")
    bound = int(math.floor(math.exp(h_bound) + 1e-9))
    if bound < 1:
        return SearchResult(None, None, 0)
    pool = rationals_up_to(bound)
    nums = np.array([x.numerator for x in pool], dtype=np.int64)
    dens = np.array([x.denominator for x in pool], dtype=np.int64)
    heights = np.maximum(np.abs(nums), dens)
    floats = nums / dens
    tols = [1e-9 * max(abs(c) for c in f.coefficients) * bound ** (_degree(f) + 1) for f in system]
    tested = 0
    for h in range(1, bound + 1):
        size = int(np.searchsorted(heights, h, side="right"))
        for block in _layer_blocks(nums, dens, size, nvars, h):
            values = floats[block]
            mask = np.ones(block.shape[0], dtype=bool)
            for f, tol in zip(system, tols):
                mask &= np.abs(f.evaluate_float(values)) <= tol
            for pos in np.flatnonzero(mask):
                point = tuple(pool[j] for j in block[pos])
                if all(f(point) == 0 for f in system):
                    tested += int(pos) + 1
                    if tested > budget:
                        raise SearchBudgetExceeded(budget)
                    return SearchResult(point, HeightValue(Fraction(h)), tested)
            tested += block.shape[0]
            if tested > budget:
                raise SearchBudgetExceeded(tested)
    return SearchResult(None, None, tested)
