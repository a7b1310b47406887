"""Regularity of semisimple elements through the adjoint characteristic polynomial.

Polynomials are lists of exact coefficients, lowest degree first.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import mpmath
from sympy import factorint

from .errors import NotSpecialLinear

Poly = list  # list[Fraction], index = degree


def _rows(g) -> list[list[Fraction]]:
    rows = [[Fraction(v) for v in row] for row in g]
    if any(len(r) != len(rows) for r in rows):
        raise ValueError("expected a square matrix")
    return rows


def _det(rows: Sequence[Sequence[Fraction]]) -> Fraction:
    a = [list(r) for r in rows]
    n = len(a)
    det = Fraction(1)
    for c in range(n):
        piv = next((r for r in range(c, n) if a[r][c] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != c:
            a[c], a[piv] = a[piv], a[c]
            det = -det
        det *= a[c][c]
        for r in range(c + 1, n):
            f = a[r][c] / a[c][c]
            if f:
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return det


def _inverse(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(rows)
    a = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(rows)]
    for c in range(n):
        piv = next(r for r in range(c, n) if a[r][c] != 0)
        a[c], a[piv] = a[piv], a[c]
        inv = 1 / a[c][c]
        a[c] = [x * inv for x in a[c]]
        for r in range(n):
            if r != c and a[r][c]:
                f = a[r][c]
                a[r] = [x - f * y for x, y in zip(a[r], a[c])]
    return [r[n:] for r in a]


def _matmul(a, b):
    return [[sum(x * y for x, y in zip(row, col)) for col in zip(*b)] for row in a]


def _require_sl(rows) -> None:
    if _det(rows) != 1:
        raise NotSpecialLinear("determinant is not 1")


def lie_basis(n: int) -> list[tuple[str, int, int]]:
    """Off-diagonal E_ij in lexicographic order, then H_i = E_ii - E_{i+1,i+1}."""
    basis = [("E", i, j) for i in range(n) for j in range(n) if i != j]
    return basis + [("H", i, i + 1) for i in range(n - 1)]


def _basis_matrix(n: int, b) -> list[list[Fraction]]:
    m = [[Fraction(0)] * n for _ in range(n)]
    kind, i, j = b
    if kind == "E":
        m[i][j] = Fraction(1)
    else:
        m[i][i] = Fraction(1)
        m[j][j] = Fraction(-1)
    return m


def _coordinates(x: list[list[Fraction]]) -> list[Fraction]:
    n = len(x)
    coords = [x[i][j] for i in range(n) for j in range(n) if i != j]
    acc = Fraction(0)
    for i in range(n - 1):
        acc += x[i][i]
        coords.append(acc)
    return coords


def _adjugate(rows: list[list[Fraction]]) -> list[list[Fraction]]:
    n = len(rows)
    if n == 1:
        return [[Fraction(1)]]
    return [[(-1) ** (i + j) * _det([r[:i] + r[i + 1:] for t, r in enumerate(rows) if t != j])
             for j in range(n)] for i in range(n)]


def adjoint(g, polynomial: bool = False) -> list[list[Fraction]]:
    """Matrix of X -> g X g^-1 on trace-zero matrices, columns = images of basis.

    With ``polynomial=True`` the inverse is replaced by the adjugate and the
    determinant is not checked; entries are then integer polynomials in the
    entries of g, which is what reduction modulo q needs.
    """
    rows = _rows(g)
    if polynomial:
        ginv = _adjugate(rows)
    else:
        _require_sl(rows)
        ginv = _inverse(rows)
    n = len(rows)
    cols = [_coordinates(_matmul(_matmul(rows, _basis_matrix(n, b)), ginv)) for b in lie_basis(n)]
    d = len(cols)
    return [[cols[j][i] for j in range(d)] for i in range(d)]


def charpoly(a: Sequence[Sequence[Fraction]]) -> Poly:
    """det(A - xI), lowest degree first (Faddeev-LeVerrier)."""
    d = len(a)
    a = [[Fraction(v) for v in row] for row in a]
    coeffs = [Fraction(0)] * (d + 1)  # monic det(xI - A)
    coeffs[d] = Fraction(1)
    m = [[Fraction(0)] * d for _ in range(d)]
    for k in range(1, d + 1):
        for i in range(d):
            m[i][i] += coeffs[d - k + 1]
        am = _matmul(a, m)
        coeffs[d - k] = -sum(am[i][i] for i in range(d)) / k
        m = am
    sign = -1 if d % 2 else 1
    return [sign * c for c in coeffs]


def poly_divmod(num: Poly, den: Poly) -> tuple[Poly, Poly]:
    num = list(num)
    dd = len(den) - 1
    if len(num) - 1 < dd:
        return [Fraction(0)], num
    quot = [Fraction(0)] * (len(num) - dd)
    for i in range(len(num) - 1, dd - 1, -1):
        c = num[i] / den[dd]
        quot[i - dd] = c
        for j in range(dd + 1):
            num[i - dd + j] -= c * den[j]
    return quot, num[:dd] or [Fraction(0)]


def poly_mul(a: Poly, b: Poly) -> Poly:
    out = [Fraction(0)] * (len(a) + len(b) - 1)
    for i, x in enumerate(a):
        for j, y in enumerate(b):
            out[i + j] += x * y
    return out


def poly_eval(p: Poly, x) -> Fraction:
    acc = Fraction(0)
    for c in reversed(p):
        acc = acc * x + c
    return acc


def derivative(p: Poly) -> Poly:
    return [i * c for i, c in enumerate(p)][1:] or [Fraction(0)]


def _trim(p: Poly) -> Poly:
    p = list(p)
    while len(p) > 1 and p[-1] == 0:
        p.pop()
    return p


@dataclass
class CharFactorization:
    F: Poly
    r: int

    def coefficients(self) -> list[Fraction]:
        """Highest degree first."""
        return list(reversed(self.F))


def char_factorization(g, modulus: int | None = None) -> CharFactorization:
    """F with F(x) (x-1)^(n-1) = det(Ad(g) - xI); the division is checked to be exact.

    With ``modulus`` set, g only needs determinant 1 modulo it; the remainder
    of the division is then checked to vanish modulo ``modulus``.
    """
    rows = _rows(g)
    n = len(rows)
    total = charpoly(adjoint(rows, polynomial=modulus is not None))
    quot = total
    for _ in range(n - 1):
        quot, rem = poly_divmod(quot, [Fraction(-1), Fraction(1)])
        bad = any(rem) if modulus is None else any(Fraction(r) % modulus for r in rem)
        if bad:
            raise AssertionError("characteristic polynomial not divisible by (x-1)^(n-1)")
    return CharFactorization(quot, n - 1)


def h_s(g) -> Fraction:
    return poly_eval(char_factorization(g).F, 1)


def bareiss_det(m: Sequence[Sequence[Fraction]]) -> Fraction:
    """Fraction-free determinant; exact for integer and rational entries."""
    a = [list(r) for r in m]
    n = len(a)
    if n == 0:
        return Fraction(1)
    sign, prev = 1, Fraction(1)
    for k in range(n - 1):
        if a[k][k] == 0:
            swap = next((r for r in range(k + 1, n) if a[r][k] != 0), None)
            if swap is None:
                return Fraction(0)
            a[k], a[swap] = a[swap], a[k]
            sign = -sign
        for i in range(k + 1, n):
            for j in range(k + 1, n):
                a[i][j] = (a[i][j] * a[k][k] - a[i][k] * a[k][j]) / prev
        prev = a[k][k]
    return sign * a[n - 1][n - 1]


def sylvester(f: Poly, g: Poly) -> list[list[Fraction]]:
    f, g = _trim(f), _trim(g)
    m, n = len(f) - 1, len(g) - 1
    size = m + n
    rows = []
    fh, gh = list(reversed(f)), list(reversed(g))
    for i in range(n):
        rows.append([Fraction(0)] * i + fh + [Fraction(0)] * (size - m - 1 - i))
    for i in range(m):
        rows.append([Fraction(0)] * i + gh + [Fraction(0)] * (size - n - 1 - i))
    return rows


def resultant(f: Poly, g: Poly) -> Fraction:
    return bareiss_det(sylvester(f, g))


def valuation(x: Fraction, p: int) -> float:
    """p-adic valuation; inf at 0."""
    if x == 0:
        return float("inf")
    v = 0
    num, den = x.numerator, x.denominator
    while num % p == 0:
        num //= p
        v += 1
    while den % p == 0:
        den //= p
        v -= 1
    return v


@dataclass
class RegularityReport:
    h_s: Fraction
    f_s: Fraction
    valuations: dict[int, float] = field(default_factory=dict)
    verdicts: dict[tuple[int, int], bool] = field(default_factory=dict)

    def verdict(self, p: int, m: int) -> bool:
        """|f_s|_p > p^-m, i.e. v_p(f_s) < m."""
        v = self.valuations.get(p)
        if v is None:
            v = valuation(self.f_s, p)
            self.valuations[p] = v
        out = v < m
        self.verdicts[(p, m)] = out
        return out

    def as_dict(self) -> dict:
        def num(x: Fraction):
            return str(x) if x.denominator != 1 else str(x.numerator)

        return {
            "schema": "regsemi/1",
            "h_s": num(self.h_s),
            "f_s": num(self.f_s),
            "valuations": {str(p): ("inf" if v == float("inf") else v) for p, v in self.valuations.items()},
            "verdicts": {f"{p}^{m}": ok for (p, m), ok in self.verdicts.items()},
        }


def f_s(g, primes: Iterable[int] | None = None) -> RegularityReport:
    """Resultant of (x-1)F_g and its derivative, with valuations at ``primes``.

    When ``primes`` is None and f_s is a nonzero integer, valuations are taken
    at every prime divisor.
    """
    fac = char_factorization(g)
    full = poly_mul([Fraction(-1), Fraction(1)], fac.F)
    res = resultant(full, derivative(full))
    report = RegularityReport(poly_eval(fac.F, 1), res)
    if primes is None and res != 0 and res.denominator == 1:
        primes = sorted(factorint(abs(res.numerator)))
    for p in primes or ():
        report.valuations[p] = valuation(res, p)
    return report


def f_s_residue(g, q: int) -> int:
    """f_s modulo q for an integer matrix with det(g) = 1 mod q.

    Every step is an integer polynomial in the entries, so the value agrees
    with f_s of any determinant-one integer lift of g mod q.
    """
    if any(Fraction(v).denominator != 1 for row in g for v in row):
        raise ValueError("entries must be integers")
    if (_det(_rows(g)) - 1) % q:
        raise NotSpecialLinear(f"determinant is not 1 mod {q}")
    fac = char_factorization(g, modulus=q)
    full = poly_mul([Fraction(-1), Fraction(1)], fac.F)
    res = resultant(full, derivative(full))
    return int(res) % q


def eta_regular(g, p: int, m: int) -> bool:
    """f_s(g) is nonzero modulo p^m."""
    if any(Fraction(v).denominator != 1 for row in g for v in row):
        raise ValueError("entries must be integers")
    return f_s(g, [p]).verdict(p, m)


def _poly_gcd_degree(a: Poly, b: Poly) -> int:
    a, b = _trim(a), _trim(b)
    while any(b):
        _, r = poly_divmod(a, b)
        a, b = b, _trim(r)
    return len(a) - 1


def root_product_check(g, digits: int = 60) -> tuple[float, float]:
    """(|f_s|, h_s^2 * prod_{i<j} |phi_i - phi_j|^2) with phi the roots of F_g.

    Roots are found with mpmath at ``digits`` significant digits so that
    clustered eigenvalues do not swamp the comparison.
    """
    fac = char_factorization(g)
    rep = f_s(g, [])
    if rep.f_s == 0:
        # Both sides vanish exactly: h_s = 0 or F has a repeated root.
        if rep.h_s != 0 and _poly_gcd_degree(fac.F, derivative(fac.F)) == 0:
            raise AssertionError("resultant vanishes but F_g is separable with F_g(1) != 0")
        return 0.0, 0.0
    coeffs = [mpmath.mpf(c.numerator) / c.denominator for c in reversed(_trim(fac.F))]
    with mpmath.workdps(digits):
        roots = mpmath.polyroots(coeffs, maxsteps=2000, extraprec=4 * digits) if len(coeffs) > 1 else []
        prod = mpmath.mpf(1)
        for i in range(len(roots)):
            for j in range(i + 1, len(roots)):
                prod *= abs(roots[i] - roots[j]) ** 2
        # Res(f, f') = +-lc^(2 deg f - 1) prod (r_i - r_j)^2 for f = (x-1)F.
        deg = len(roots)
        scale = abs(coeffs[0]) ** (2 * deg - 1) if deg else 1
        h = mpmath.mpf(rep.h_s.numerator) / rep.h_s.denominator
        return abs(float(rep.f_s)), float(h**2 * prod * scale)
