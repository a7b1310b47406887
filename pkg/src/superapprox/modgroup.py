"""Matrices over Z/p^k and breadth-first enumeration of finite matrix groups.

Elements of an enumerated group are addressed by integer ids assigned in BFS
discovery order; id 0 is always the identity.  Bulk arithmetic works on
``(N, n, n)`` int64 arrays, and entries are reduced after every product.  When
``n * q**2`` would overflow int64 the code falls back to object arrays of
Python ints, which is slow but exact.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sympy import integer_nthroot, isprime

from .errors import GroupTooLarge, ModulusMismatch, NotInvertible, NotSpecialLinear, TableMismatch

DEFAULT_CAP = 20_000_000
MAX_MODULUS = 2**63


@lru_cache(maxsize=None)
def _is_prime(p: int) -> bool:
    return bool(isprime(p))


def split_prime_power(q: int) -> tuple[int, int]:
    """Return (p, k) with q = p**k, p prime."""
    if q < 2:
        raise ValueError(f"modulus {q} is not a prime power")
    for k in range(q.bit_length(), 0, -1):
        root, exact = integer_nthroot(q, k)
        if exact and isprime(root):
            return int(root), k
    raise ValueError(f"modulus {q} is not a prime power")


def parse_modulus(text: str | int) -> tuple[int, int]:
    """Parse ``"p^k"`` (or a plain prime power) into (p, k)."""
    if isinstance(text, int):
        return split_prime_power(text)
    text = text.strip()
    if "^" in text:
        base, exp = text.split("^", 1)
        p, k = int(base), int(exp)
        if not isprime(p) or k < 1:
            raise ValueError(f"bad modulus {text!r}")
        return p, k
    return split_prime_power(int(text))


def _int_det(rows: Sequence[Sequence[int]]) -> int:
    """Exact integer determinant (Bareiss)."""
    m = [list(r) for r in rows]
    n = len(m)
    sign, prev = 1, 1
    for i in range(n - 1):
        if m[i][i] == 0:
            for r in range(i + 1, n):
                if m[r][i] != 0:
                    m[i], m[r] = m[r], m[i]
                    sign = -sign
                    break
            else:
                return 0
        for r in range(i + 1, n):
            for c in range(i + 1, n):
                m[r][c] = (m[r][c] * m[i][i] - m[r][i] * m[i][c]) // prev
        prev = m[i][i]
    return sign * m[n - 1][n - 1]


@dataclass(frozen=True, order=True)
class ResidueMatrix:
    """An n x n matrix with entries in [0, p**k), stored row-major."""

    entries: tuple[int, ...]
    n: int
    p: int
    k: int

    def __post_init__(self):
        if len(self.entries) != self.n * self.n:
            raise ValueError("entry count does not match dimension")
        if self.k < 1 or not _is_prime(self.p):
            raise ValueError(f"modulus must be p^k with p prime and k >= 1, got {self.p}^{self.k}")
        q = self.p**self.k
        if q >= MAX_MODULUS:
            raise ValueError("modulus must be below 2**63")
        if any(not 0 <= e < q for e in self.entries):
            raise ValueError("entries must be reduced residues")

    @classmethod
    def from_rows(cls, rows: Sequence[Sequence[int]], p: int, k: int = 1) -> "ResidueMatrix":
        q = p**k
        n = len(rows)
        if any(len(r) != n for r in rows):
            raise ValueError("matrix must be square")
        return cls(tuple(int(x) % q for r in rows for x in r), n, p, k)

    @classmethod
    def identity(cls, n: int, p: int, k: int = 1) -> "ResidueMatrix":
        return cls(tuple(int(i == j) for i in range(n) for j in range(n)), n, p, k)

    @property
    def modulus(self) -> int:
        return self.p**self.k

    def rows(self) -> list[list[int]]:
        n = self.n
        return [list(self.entries[i * n:(i + 1) * n]) for i in range(n)]

    def det(self) -> int:
        return _int_det(self.rows()) % self.modulus

    def as_array(self) -> np.ndarray:
        return np.array(self.entries, dtype=_dtype_for(self.n, self.modulus)).reshape(self.n, self.n)

    def __matmul__(self, other: "ResidueMatrix") -> "ResidueMatrix":
        return mat_mul(self, other)

    def __str__(self) -> str:
        return f"{self.rows()} mod {self.p}^{self.k}"


def _check_same_ring(a: ResidueMatrix, b: ResidueMatrix) -> None:
    if (a.n, a.p, a.k) != (b.n, b.p, b.k):
        raise ModulusMismatch(f"cannot combine {a.n}x{a.n} mod {a.modulus} with {b.n}x{b.n} mod {b.modulus}")


def mat_mul(a: ResidueMatrix, b: ResidueMatrix) -> ResidueMatrix:
    _check_same_ring(a, b)
    n, q = a.n, a.modulus
    x, y = a.entries, b.entries
    out = tuple(
        sum(x[i * n + t] * y[t * n + j] for t in range(n)) % q
        for i in range(n)
        for j in range(n)
    )
    return ResidueMatrix(out, n, a.p, a.k)


def _inverse_mod_prime(rows: list[list[int]], p: int) -> list[list[int]]:
    n = len(rows)
    aug = [[x % p for x in r] + [int(i == j) for j in range(n)] for i, r in enumerate(rows)]
    for col in range(n):
        piv = next((r for r in range(col, n) if aug[r][col] % p), None)
        if piv is None:
            raise NotInvertible("determinant is divisible by p")
        aug[col], aug[piv] = aug[piv], aug[col]
        inv = pow(aug[col][col], -1, p)
        aug[col] = [x * inv % p for x in aug[col]]
        for r in range(n):
            if r != col and aug[r][col]:
                f = aug[r][col]
                aug[r] = [(x - f * y) % p for x, y in zip(aug[r], aug[col])]
    return [r[n:] for r in aug]


def _mul_rows(x: list[list[int]], y: list[list[int]], q: int) -> list[list[int]]:
    n = len(x)
    return [[sum(x[i][t] * y[t][j] for t in range(n)) % q for j in range(n)] for i in range(n)]


def mat_inv(a: ResidueMatrix) -> ResidueMatrix:
    """Inverse mod p**k: invert mod p, then Newton-lift X <- X(2I - AX)."""
    rows = a.rows()
    x = _inverse_mod_prime(rows, a.p)
    n, prec = a.n, 1
    while prec < a.k:
        prec = min(2 * prec, a.k)
        q = a.p**prec
        ax = _mul_rows(rows, x, q)
        two_minus = [[(2 * (i == j) - ax[i][j]) % q for j in range(n)] for i in range(n)]
        x = _mul_rows(x, two_minus, q)
    return ResidueMatrix.from_rows(x, a.p, a.k)


def reduce_modulus(g: ResidueMatrix, q: int) -> ResidueMatrix:
    """Entrywise reduction to Z/q, q a power of the same prime dividing the modulus."""
    if q < 1 or g.modulus % q:
        raise ModulusMismatch(f"{q} does not divide {g.modulus}")
    if q == 1:
        raise ModulusMismatch("cannot reduce to the zero ring")
    p, j = split_prime_power(q)
    return ResidueMatrix(tuple(e % q for e in g.entries), g.n, p, j)


def elementary(n: int, i: int, j: int, c: int, p: int, k: int = 1) -> ResidueMatrix:
    """I + c E_ij."""
    rows = [[int(a == b) for b in range(n)] for a in range(n)]
    rows[i][j] += c
    return ResidueMatrix.from_rows(rows, p, k)


@dataclass(frozen=True)
class SymmetricGenSet:
    """Inverse-closed, duplicate-free, canonically sorted generator list."""

    gens: tuple[ResidueMatrix, ...]

    @classmethod
    def close(cls, gens: Iterable[ResidueMatrix], gl: bool = False) -> "SymmetricGenSet":
        gens = list(gens)
        if not gens:
            raise ValueError("empty generator set")
        g0 = gens[0]
        pool = set()
        for g in gens:
            _check_same_ring(g0, g)
            d = g.det()
            if d % g.p == 0:
                raise NotInvertible(f"generator {g} has non-unit determinant")
            if not gl and d != 1:
                raise NotSpecialLinear(f"generator {g} has determinant {d} != 1 (pass gl=True to allow)")
            pool.add(g)
            pool.add(mat_inv(g))
        return cls(tuple(sorted(pool)))

    def __len__(self) -> int:
        return len(self.gens)

    def __iter__(self):
        return iter(self.gens)

    @property
    def n(self) -> int:
        return self.gens[0].n

    @property
    def p(self) -> int:
        return self.gens[0].p

    @property
    def k(self) -> int:
        return self.gens[0].k

    @property
    def modulus(self) -> int:
        return self.gens[0].modulus

    def reduce(self, q: int) -> "SymmetricGenSet":
        return SymmetricGenSet.close([reduce_modulus(g, q) for g in self.gens], gl=True)


def lubotzky(p: int, k: int = 1, t: int = 3) -> SymmetricGenSet:
    """{[[1, +-t],[0,1]], [[1,0],[+-t,1]]} modulo p**k."""
    mats = [elementary(2, 0, 1, s * t, p, k) for s in (1, -1)]
    mats += [elementary(2, 1, 0, s * t, p, k) for s in (1, -1)]
    return SymmetricGenSet.close(mats, gl=True)


def load_gens(path: str | Path, gl: bool = False) -> SymmetricGenSet:
    """Read a generator-set JSON file and close it under inverses."""
    data = json.loads(Path(path).read_text())
    mats = []
    for obj in data:
        p, k = parse_modulus(obj["modulus"])
        m = ResidueMatrix.from_rows(obj["rows"], p, k)
        if m.n != int(obj["n"]):
            raise ValueError(f"declared n={obj['n']} does not match rows")
        mats.append(m)
    return SymmetricGenSet.close(mats, gl=gl)


def dump_gens(gens: Iterable[ResidueMatrix]) -> str:
    return json.dumps([{"n": g.n, "modulus": f"{g.p}^{g.k}", "rows": g.rows()} for g in gens])


# --- batched arithmetic ---------------------------------------------------

def _dtype_for(n: int, q: int):
    return np.int64 if n * (q - 1) ** 2 < 2**63 else object


def batch_matmul(a: np.ndarray, b: np.ndarray, q: int) -> np.ndarray:
    return np.matmul(a, b) % q


def _batch_det(m: np.ndarray, q: int) -> np.ndarray:
    n = m.shape[-1]
    if n == 1:
        return m[..., 0, 0] % q
    if n == 2:
        return (m[..., 0, 0] * m[..., 1, 1] - m[..., 0, 1] * m[..., 1, 0]) % q
    total = np.zeros(m.shape[:-2], dtype=m.dtype)
    for j in range(n):
        minor = np.delete(np.delete(m, 0, axis=-2), j, axis=-1)
        term = m[..., 0, j] * _batch_det(minor, q) % q
        total = (total + term) if j % 2 == 0 else (total - term)
    return total % q


def batch_inverse(m: np.ndarray, q: int) -> np.ndarray:
    """Inverse of every matrix in an (N, n, n) stack of unit-determinant matrices."""
    n = m.shape[-1]
    if n == 1:
        adj = np.ones_like(m)
    else:
        adj = np.empty_like(m)
        for i in range(n):
            for j in range(n):
                minor = np.delete(np.delete(m, i, axis=-2), j, axis=-1)
                c = _batch_det(minor, q)
                adj[..., j, i] = c if (i + j) % 2 == 0 else (-c) % q
    det = _batch_det(m, q)
    if np.all(det == 1):
        return adj % q
    uniq, inv_idx = np.unique(det, return_inverse=True)
    inv_det = np.array([pow(int(d), -1, q) for d in uniq], dtype=m.dtype)[inv_idx]
    return adj * inv_det.reshape(det.shape)[..., None, None] % q


def encode_keys(m: np.ndarray, q: int) -> np.ndarray:
    """Row-major base-q key per matrix; ordering of keys is lexicographic on entries."""
    flat = m.reshape(m.shape[0], -1)
    width = flat.shape[1]
    dtype = np.int64 if q**width < 2**63 else object
    keys = np.zeros(flat.shape[0], dtype=dtype)
    for c in range(width):
        keys = keys * q + flat[:, c].astype(dtype)
    return keys


# --- enumeration ----------------------------------------------------------

class GroupTable:
    """An enumerated finite matrix group with generator actions.

    ``gen_action[s, x]`` is the id of ``gens[s] @ element(x)``.  ``depth[x]``
    is the word length of ``x`` in the generators, and ``parent``/``parent_gen``
    record the BFS tree (``element(x) = gens[parent_gen[x]] @ element(parent[x])``).
    """

    def __init__(self, gens: SymmetricGenSet, mats: np.ndarray, gen_action: np.ndarray,
                 parent: np.ndarray, parent_gen: np.ndarray, depth: np.ndarray):
        self.gens = gens
        self.n, self.p, self.k = gens.n, gens.p, gens.k
        self.modulus = gens.modulus
        self.mats = mats
        self.gen_action = gen_action
        self.parent = parent
        self.parent_gen = parent_gen
        self.depth = depth
        keys = encode_keys(mats, self.modulus)
        order = np.argsort(keys, kind="stable")
        self._sorted_keys = keys[order]
        self._key_ids = order
        self.mats.setflags(write=False)
        self.gen_action.setflags(write=False)

    @property
    def order(self) -> int:
        return self.mats.shape[0]

    def __len__(self) -> int:
        return self.order

    def __repr__(self) -> str:
        return f"GroupTable(n={self.n}, modulus={self.p}^{self.k}, order={self.order}, gens={len(self.gens)})"

    def element(self, i: int) -> ResidueMatrix:
        return ResidueMatrix(tuple(int(x) for x in self.mats[i].ravel()), self.n, self.p, self.k)

    def lookup(self, mats: np.ndarray, strict: bool = True) -> np.ndarray:
        """Ids of a stack of matrices; -1 (or KeyError when strict) for non-members."""
        keys = encode_keys(mats, self.modulus)
        pos = np.searchsorted(self._sorted_keys, keys)
        pos = np.minimum(pos, self.order - 1)
        hit = self._sorted_keys[pos] == keys
        if strict and not np.all(hit):
            raise KeyError("matrix is not an element of this table")
        return np.where(hit, self._key_ids[pos], -1)

    def index_of(self, g: ResidueMatrix | Sequence[int]) -> int:
        entries = g.entries if isinstance(g, ResidueMatrix) else tuple(g)
        if isinstance(g, ResidueMatrix) and (g.n, g.p, g.k) != (self.n, self.p, self.k):
            raise ModulusMismatch("matrix ring differs from the table's")
        arr = np.array(entries, dtype=self.mats.dtype).reshape(1, self.n, self.n)
        return int(self.lookup(arr)[0])

    @cached_property
    def gen_ids(self) -> np.ndarray:
        return self.lookup(np.stack([g.as_array() for g in self.gens.gens]).astype(self.mats.dtype))

    @cached_property
    def inverse_ids(self) -> np.ndarray:
        return self.lookup(batch_inverse(self.mats, self.modulus))

    @cached_property
    def gen_inverse_index(self) -> np.ndarray:
        """Position in ``gens`` of each generator's inverse."""
        pos = {int(g): s for s, g in enumerate(self.gen_ids)}
        return np.array([pos[int(self.inverse_ids[g])] for g in self.gen_ids])

    def multiply_ids(self, a: np.ndarray, b: np.ndarray, chunk: int = 1 << 20) -> np.ndarray:
        """Ids of element(a[i]) @ element(b[i]) (broadcasting a against b)."""
        a, b = np.broadcast_arrays(np.asarray(a), np.asarray(b))
        a, b = a.ravel(), b.ravel()
        out = np.empty(a.shape[0], dtype=np.int64)
        for s in range(0, a.shape[0], chunk):
            prod = batch_matmul(self.mats[a[s:s + chunk]], self.mats[b[s:s + chunk]], self.modulus)
            out[s:s + chunk] = self.lookup(prod)
        return out

    def left_perm(self, h: int) -> np.ndarray:
        """x -> id(element(h) @ element(x)) for all x."""
        return self.multiply_ids(np.full(self.order, h), np.arange(self.order))

    def is_bipartite(self) -> bool:
        """Whether the Cayley graph admits a proper 2-colouring."""
        colour = self.depth % 2
        return bool(all(np.all(colour[self.gen_action[s]] != colour) for s in range(len(self.gens))))


def enumerate_group(gens: SymmetricGenSet, cap: int = DEFAULT_CAP) -> GroupTable:
    """BFS closure of the identity under left multiplication by ``gens``.

    Level-synchronous, but ids follow the sequential FIFO order: candidates are
    ranked by (parent id, generator position) and the first hit wins.
    """
    n, q = gens.n, gens.modulus
    dtype = _dtype_for(n, q)
    gmat = np.stack([g.as_array() for g in gens.gens]).astype(dtype)
    s = gmat.shape[0]
    ident = np.eye(n, dtype=dtype)[None]

    mats_levels = [ident]
    parent_levels = [np.array([-1])]
    pgen_levels = [np.array([-1])]
    depth_levels = [np.array([0])]
    action_src, action_dst = [], []

    vis_keys = encode_keys(ident, q)
    vis_ids = np.array([0], dtype=np.int64)
    frontier_ids = np.array([0], dtype=np.int64)
    frontier = ident
    count, level = 1, 0
    while frontier.shape[0]:
        cand = batch_matmul(gmat[None, :, :, :], frontier[:, None, :, :], q).reshape(-1, n, n)
        ck = encode_keys(cand, q)
        pos = np.minimum(np.searchsorted(vis_keys, ck), vis_keys.shape[0] - 1)
        seen = vis_keys[pos] == ck
        fresh = np.flatnonzero(~seen)
        _, first = np.unique(ck[fresh], return_index=True)
        disc = fresh[np.sort(first)]
        m = disc.shape[0]
        if count + m > cap:
            raise GroupTooLarge(cap, count + m)
        new_ids = np.arange(count, count + m, dtype=np.int64)
        count += m
        level += 1

        new_keys = ck[disc]
        ins = np.argsort(new_keys, kind="stable")
        at = np.searchsorted(vis_keys, new_keys[ins])
        vis_keys = np.insert(vis_keys, at, new_keys[ins])
        vis_ids = np.insert(vis_ids, at, new_ids[ins])

        pos = np.searchsorted(vis_keys, ck)
        action_src.append(frontier_ids)
        action_dst.append(vis_ids[pos].reshape(-1, s))

        mats_levels.append(cand[disc])
        parent_levels.append(frontier_ids[disc // s])
        pgen_levels.append(disc % s)
        depth_levels.append(np.full(m, level))
        frontier_ids = new_ids
        frontier = cand[disc]

    mats = np.concatenate(mats_levels)
    idx_dtype = np.int32 if count < 2**31 else np.int64
    gen_action = np.empty((s, count), dtype=idx_dtype)
    for src, dst in zip(action_src, action_dst):
        gen_action[:, src] = dst.T
    return GroupTable(
        gens,
        mats,
        gen_action,
        np.concatenate(parent_levels),
        np.concatenate(pgen_levels),
        np.concatenate(depth_levels),
    )


def order_sl2(p: int, k: int = 1) -> int:
    """|SL_2(Z/p^k)| = p^(3k-2) (p^2 - 1)."""
    return p ** (3 * k - 2) * (p * p - 1)


def reduction_map(src: GroupTable, dst: GroupTable) -> np.ndarray:
    """For each id of ``src``, the id of its reduction in ``dst`` (-1 if absent)."""
    if src.p != dst.p or src.n != dst.n or dst.k > src.k:
        raise ModulusMismatch("destination must be a lower level of the same tower")
    return dst.lookup(src.mats % dst.modulus, strict=False)


# --- subsets ----------------------------------------------------------------

@dataclass(eq=False)
class SubsetHandle:
    """A subset of a GroupTable, as a boolean mask over element ids."""

    table: GroupTable
    mask: np.ndarray

    def __post_init__(self):
        self.mask = np.asarray(self.mask, dtype=bool)
        if self.mask.shape != (self.table.order,):
            raise ValueError("mask length must equal the group order")

    @classmethod
    def from_ids(cls, table: GroupTable, ids: Iterable[int]) -> "SubsetHandle":
        mask = np.zeros(table.order, dtype=bool)
        mask[np.fromiter(ids, dtype=np.int64)] = True
        return cls(table, mask)

    @classmethod
    def full(cls, table: GroupTable) -> "SubsetHandle":
        return cls(table, np.ones(table.order, dtype=bool))

    @classmethod
    def ball(cls, table: GroupTable, radius: int) -> "SubsetHandle":
        """Words of length <= radius in the generators (identity included)."""
        return cls(table, table.depth <= radius)

    @property
    def ids(self) -> np.ndarray:
        return np.flatnonzero(self.mask)

    def __len__(self) -> int:
        return int(self.mask.sum())

    def __contains__(self, i: int) -> bool:
        return bool(self.mask[i])

    def __eq__(self, other) -> bool:
        return isinstance(other, SubsetHandle) and other.table is self.table and np.array_equal(self.mask, other.mask)

    def __or__(self, other: "SubsetHandle") -> "SubsetHandle":
        _same_table(self, other)
        return SubsetHandle(self.table, self.mask | other.mask)

    def inverse(self) -> "SubsetHandle":
        return SubsetHandle.from_ids(self.table, self.table.inverse_ids[self.ids])

    def is_symmetric(self) -> bool:
        return self == self.inverse()

    def symmetrized(self) -> "SubsetHandle":
        return self | self.inverse()


def _same_table(x: SubsetHandle, y: SubsetHandle) -> None:
    if x.table is not y.table:
        raise TableMismatch("subsets belong to different tables")


def subset_product(x: SubsetHandle, y: SubsetHandle, chunk: int = 1 << 20) -> SubsetHandle:
    """{a b : a in x, b in y}."""
    _same_table(x, y)
    t = x.table
    xs, ys = x.ids, y.ids
    mask = np.zeros(t.order, dtype=bool)
    if xs.size == 0 or ys.size == 0:
        return SubsetHandle(t, mask)
    if xs.size == t.order or ys.size == t.order:
        return SubsetHandle.full(t)
    rows = max(1, chunk // ys.size)
    for s in range(0, xs.size, rows):
        block = xs[s:s + rows]
        ids = t.multiply_ids(block[:, None], ys[None, :])
        mask[ids] = True
    return SubsetHandle(t, mask)


def subset_power(a: SubsetHandle, c: int) -> SubsetHandle:
    """The c-fold product set A·A·...·A."""
    if c < 1:
        raise ValueError("need at least one factor")
    out = a
    for _ in range(c - 1):
        out = subset_product(out, a)
    return out
