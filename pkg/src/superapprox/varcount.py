"""Point counts of matrix varieties over F_p and escape probabilities of walks."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from .errors import Unsupported
from .heights import IntPolynomial
from .modgroup import GroupTable, SymmetricGenSet, elementary, enumerate_group
from .regsemi import f_s_residue
from .walk import Measure, walk_iter


@dataclass(frozen=True)
class MatrixVariety:
    """Common zeros of integer polynomials in the n^2 entries (row-major)."""

    n: int
    constraints: tuple[IntPolynomial, ...] = ()
    claimed_dim: int | None = None
    name: str = ""

    def __post_init__(self):
        for f in self.constraints:
            if f.nvars != self.n * self.n:
                raise ValueError(f"constraint has {f.nvars} variables, expected {self.n * self.n}")

    @classmethod
    def trace_equals(cls, n: int, t: int, claimed_dim: int | None = None) -> "MatrixVariety":
        terms = {tuple(int(v == i * n + i) for v in range(n * n)): 1 for i in range(n)}
        terms[(0,) * (n * n)] = -t
        name = f"trace-{t}"
        return cls(n, (IntPolynomial.from_dict(n * n, terms),), claimed_dim, name)

    @classmethod
    def identity(cls, n: int) -> "MatrixVariety":
        polys = []
        for v in range(n * n):
            e = tuple(int(u == v) for u in range(n * n))
            terms = {e: 1}
            if v // n == v % n:
                terms[(0,) * (n * n)] = -1
            polys.append(IntPolynomial.from_dict(n * n, terms))
        return cls(n, tuple(polys), 0, "identity")

    @classmethod
    def whole(cls, n: int) -> "MatrixVariety":
        return cls(n, (), n * n - 1, "group")

    @classmethod
    def from_json(cls, data: dict) -> "MatrixVariety":
        n = int(data["n"])
        polys = tuple(IntPolynomial.parse(t) if isinstance(t, str)
                      else IntPolynomial.from_dict(n * n, {tuple(e): c for e, c in t})
                      for t in data.get("constraints", []))
        return cls(n, polys, data.get("claimed_dim"), data.get("name", ""))


PRESETS = {"trace-2": lambda: MatrixVariety.trace_equals(2, 2, claimed_dim=2)}


def load_variety(path: str) -> MatrixVariety:
    with open(path) as fh:
        return MatrixVariety.from_json(json.load(fh))


def _eval_mod(f: IntPolynomial, entries: np.ndarray, p: int) -> np.ndarray:
    out = np.zeros(entries.shape[0], dtype=np.int64)
    for exps, c in f.terms:
        term = np.full(entries.shape[0], c % p, dtype=np.int64)
        for v, e in enumerate(exps):
            for _ in range(e):
                term = term * entries[:, v] % p
        out = (out + term) % p
    return out


def locus_mask(w: MatrixVariety, table: GroupTable) -> np.ndarray:
    """Element ids of the table lying on W, as a boolean mask."""
    if table.k != 1:
        raise Unsupported("point counts need a prime modulus")
    if table.n != w.n:
        raise ValueError("variety and group have different dimensions")
    entries = table.mats.reshape(table.order, -1).astype(np.int64)
    mask = np.ones(table.order, dtype=bool)
    for f in w.constraints:
        mask &= _eval_mod(f, entries, table.p) == 0
    return mask


def count_points_mod_p(w: MatrixVariety, table: GroupTable) -> int:
    return int(np.count_nonzero(locus_mask(w, table)))


def special_linear_table(n: int, p: int, k: int = 1) -> GroupTable:
    """SL_n(Z/p^k) from the elementary generators I + E_ij."""
    gens = [elementary(n, i, j, 1, p, k) for i in range(n) for j in range(n) if i != j]
    return enumerate_group(SymmetricGenSet.close(gens))


@dataclass
class DimensionRow:
    p: int
    count: int
    ratio: Fraction
    ok: bool


def dimension_bound_check(w: MatrixVariety, primes, c: float = 1.0,
                          tables: dict[int, GroupTable] | None = None) -> list[DimensionRow]:
    """|W(F_p)| / p^d per prime and whether it stays <= c."""
    if w.claimed_dim is None:
        raise ValueError("claimed_dim is required")
    rows = []
    for p in primes:
        table = tables[p] if tables and p in tables else special_linear_table(w.n, p)
        count = count_points_mod_p(w, table)
        ratio = Fraction(count, p**w.claimed_dim)
        rows.append(DimensionRow(p, count, ratio, ratio <= c))
    return rows


@dataclass
class EscapeSeries:
    rows: list[tuple[int, Fraction | float]] = field(default_factory=list)
    locus_size: int = 0
    order: int = 0

    @property
    def limit(self) -> Fraction:
        return Fraction(self.locus_size, self.order)

    def as_csv_rows(self) -> list[tuple[int, float]]:
        return [(l, float(m)) for l, m in self.rows]


def _series(mu: Measure, mask: np.ndarray, lmax: int) -> EscapeSeries:
    if lmax < 0:
        raise ValueError("lmax must be nonnegative")
    out = EscapeSeries(locus_size=int(np.count_nonzero(mask)), order=mu.table.order)
    for l, m in zip(range(lmax + 1), walk_iter(mu)):
        out.rows.append((l, m.mass(mask)))
    return out


def escape_series(w: MatrixVariety, mu: Measure, lmax: int) -> EscapeSeries:
    """mu^(l)(W(F_p)) for l = 0..lmax."""
    return _series(mu, locus_mask(w, mu.table), lmax)


def nonregular_mask(table: GroupTable, a, m: int) -> np.ndarray:
    """Ids gamma with f_s(lift(gamma) a) = 0 mod p^m, lifts having entries in [0, p^k)."""
    if m < 1:
        raise ValueError("regularity power m must be at least 1")
    if m > table.k:
        raise ValueError("need m <= k")
    q = table.p**m
    a = np.array(a, dtype=np.int64).reshape(table.n, table.n) % table.modulus
    prods = np.einsum("xij,jk->xik", table.mats.astype(np.int64), a) % q
    keys = prods.reshape(table.order, -1)
    uniq, inverse = np.unique(keys, axis=0, return_inverse=True)
    flags = np.array([f_s_residue(row.reshape(table.n, table.n).tolist(), q) == 0 for row in uniq])
    return flags[inverse.ravel()]


def nonregular_escape(mu: Measure, a, m: int, lmax: int) -> EscapeSeries:
    """mu^(l) mass of the elements gamma for which gamma*a is not p^m-regular."""
    return _series(mu, nonregular_mask(mu.table, a, m), lmax)


def word_lift(table: GroupTable, i: int) -> np.ndarray:
    """A determinant-one integer matrix reducing to element i.

    Multiplies centered integer lifts of the generators along the BFS tree;
    only valid when those lifts have determinant one (e.g. elementary
    generators).
    """
    n, q = table.n, table.modulus
    lifts = []
    for g in table.gens:
        arr = np.array(g.rows(), dtype=object)
        arr = np.vectorize(lambda v: v - q if v > q // 2 else v, otypes=[object])(arr)
        lifts.append(arr)
    out = np.array(np.eye(n, dtype=int), dtype=object)
    while i != 0:
        out = out @ lifts[int(table.parent_gen[i])]
        i = int(table.parent[i])
    return out


def mixing_envelope(lam: float, locus_size: int, l: int) -> float:
    return lam**l * math.sqrt(locus_size)
