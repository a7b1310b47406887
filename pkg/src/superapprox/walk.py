"""Measures on a GroupTable, convolution, random walks and spectral gaps.

A measure is a dense weight vector over element ids.  Exact mode keeps integer
numerators (numpy object arrays of Python ints) over one common denominator,
so repeated convolution never needs a gcd.  Float mode keeps float64
probabilities.

Convolution follows ``(mu * nu)(g) = sum_h mu(h) nu(h^-1 g)``; the walk operator
is ``T f = mu * f``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterator

import numpy as np
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigsh

from .errors import MaxIterations, NotSymmetric, TableMismatch, Unsupported
from .modgroup import GroupTable, SubsetHandle, SymmetricGenSet

DENSE_CAP = 5000


@dataclass(eq=False)
class Measure:
    table: GroupTable
    weights: np.ndarray
    den: int | None = None

    def __post_init__(self):
        w = self.weights
        if w.shape != (self.table.order,):
            raise ValueError("weight vector length must equal the group order")
        if self.exact:
            if w.dtype != object:
                self.weights = w = w.astype(object)
            if any(x < 0 for x in w[w != 0]):
                raise ValueError("negative weight")
            if sum(w.tolist()) != self.den:
                raise ValueError("weights do not sum to 1")
        else:
            if np.any(w < 0):
                raise ValueError("negative weight")
            if abs(math.fsum(w) - 1.0) > 1e-12:
                raise ValueError("weights do not sum to 1")

    @property
    def exact(self) -> bool:
        return self.den is not None

    def __getitem__(self, i: int) -> Fraction | float:
        if self.exact:
            return Fraction(self.weights[i], self.den)
        return float(self.weights[i])

    def support(self) -> np.ndarray:
        return np.flatnonzero(self.weights != 0)

    def mass(self, subset: SubsetHandle | np.ndarray) -> Fraction | float:
        mask = subset.mask if isinstance(subset, SubsetHandle) else np.asarray(subset, dtype=bool)
        if isinstance(subset, SubsetHandle) and subset.table is not self.table:
            raise TableMismatch("subset and measure live on different tables")
        sel = self.weights[mask]
        if self.exact:
            return Fraction(sum(sel.tolist()), self.den)
        return math.fsum(sel)

    def probabilities(self) -> np.ndarray:
        """Float view of the weights."""
        if self.exact:
            return np.array([float(Fraction(x, self.den)) for x in self.weights.tolist()])
        return self.weights.copy()

    def to_float(self) -> "Measure":
        return Measure(self.table, self.probabilities())

    def reversed(self) -> "Measure":
        """h -> mu(h^-1)."""
        w = np.empty_like(self.weights)
        w[self.table.inverse_ids] = self.weights
        return Measure(self.table, w, self.den)

    def is_symmetric(self) -> bool:
        other = self.weights[self.table.inverse_ids]
        if self.exact:
            return bool(np.all(other == self.weights))
        return bool(np.max(np.abs(other - self.weights), initial=0.0) <= 1e-12)

    def simplified(self) -> "Measure":
        if not self.exact:
            return self
        g = self.den
        for x in self.weights[self.weights != 0].tolist():
            g = math.gcd(g, x)
            if g == 1:
                return self
        return Measure(self.table, self.weights // g, self.den // g)


def delta(table: GroupTable, i: int = 0, exact: bool = True) -> Measure:
    w = np.zeros(table.order, dtype=object if exact else np.float64)
    w[:] = 0
    w[i] = 1
    return Measure(table, w, 1 if exact else None)


def uniform_on(table: GroupTable, gens: SymmetricGenSet | None = None, exact: bool = True) -> Measure:
    """Counting measure on the (deduplicated) generator set."""
    if gens is None:
        ids = table.gen_ids
    else:
        if len(gens) == 0:
            raise ValueError("empty generator set")
        ids = np.unique(table.lookup(np.stack([g.as_array() for g in gens.gens]).astype(table.mats.dtype)))
    mask = np.zeros(table.order, dtype=bool)
    mask[ids] = True
    return uniform_on_subset(SubsetHandle(table, mask), exact=exact)


def uniform_on_subset(subset: SubsetHandle, exact: bool = True) -> Measure:
    size = len(subset)
    if size == 0:
        raise ValueError("empty support")
    if exact:
        w = np.zeros(subset.table.order, dtype=object)
        w[:] = 0
        w[subset.mask] = 1
        return Measure(subset.table, w, size)
    w = np.where(subset.mask, 1.0 / size, 0.0)
    return Measure(subset.table, w)


def _check_pair(mu: Measure, nu: Measure) -> None:
    if mu.table is not nu.table:
        raise TableMismatch("measures live on different tables")
    if mu.exact != nu.exact:
        raise TableMismatch("cannot mix exact and float measures")


def _generator_slots(mu: Measure) -> list[int] | None:
    """Generator positions carrying mu's support, or None if mu leaves the generators."""
    supp = mu.support()
    gen_pos = {int(g): s for s, g in enumerate(mu.table.gen_ids)}
    if all(int(i) in gen_pos for i in supp):
        return [gen_pos[int(i)] for i in supp]
    return None


def convolve(mu: Measure, nu: Measure) -> Measure:
    _check_pair(mu, nu)
    t = mu.table
    out = np.zeros(t.order, dtype=mu.weights.dtype)
    if mu.exact:
        out[:] = 0
    slots = _generator_slots(mu)
    if slots is not None:
        for s in slots:
            c = mu.weights[t.gen_ids[s]]
            out[t.gen_action[s]] += c * nu.weights
    else:
        supp_nu = nu.support()
        vals = nu.weights[supp_nu]
        for h in mu.support():
            out[t.multiply_ids(h, supp_nu)] += mu.weights[h] * vals
    den = mu.den * nu.den if mu.exact else None
    return Measure(t, out, den)


def walk_iter(mu: Measure) -> Iterator[Measure]:
    """mu^(0), mu^(1), mu^(2), ..."""
    cur = delta(mu.table, exact=mu.exact)
    while True:
        yield cur
        cur = convolve(mu, cur)


def walk_distribution(mu: Measure, l: int) -> Measure:
    if l < 0:
        raise ValueError("step count must be nonnegative")
    for i, m in enumerate(walk_iter(mu)):
        if i == l:
            return m


def l2_norm_sq(mu: Measure) -> Fraction | float:
    if mu.exact:
        nz = mu.weights[mu.weights != 0].tolist()
        return Fraction(sum(x * x for x in nz), mu.den * mu.den)
    return math.fsum(mu.weights * mu.weights)


def l2_norm(mu: Measure) -> float:
    return math.sqrt(float(l2_norm_sq(mu)))


def flattening_series(mu: Measure, lmax: int) -> list[tuple[int, float]]:
    if lmax < 1:
        raise ValueError("lmax must be at least 1")
    out = []
    for l, m in zip(range(lmax + 1), walk_iter(mu)):
        out.append((l, l2_norm(m)))
    return out


def walk_rows(mu: Measure, lmax: int) -> list[tuple[int, float, float]]:
    """(l, l2 norm, mass at identity) for l = 0..lmax."""
    out = []
    for l, m in zip(range(lmax + 1), walk_iter(mu)):
        out.append((l, l2_norm(m), float(m[0])))
    return out


# --- spectral gap -----------------------------------------------------------

@dataclass
class SpectralReport:
    lam: float
    method: str
    iterations: int
    residual: float
    order: int
    bipartite: bool = False
    converged: bool = True

    def as_dict(self) -> dict:
        return {
            "order": self.order,
            "lambda": self.lam,
            "method": self.method,
            "iterations": self.iterations,
            "residual": self.residual,
            "bipartite": self.bipartite,
        }


def operator_matrix(mu: Measure) -> np.ndarray:
    """Dense matrix of T f = mu * f, i.e. T[h x, x] += mu(h)."""
    t = mu.table
    p = mu.probabilities()
    mat = np.zeros((t.order, t.order))
    cols = np.arange(t.order)
    slots = _generator_slots(mu)
    if slots is not None:
        for s in slots:
            mat[t.gen_action[s], cols] += p[t.gen_ids[s]]
    else:
        for h in mu.support():
            mat[t.left_perm(h), cols] += p[h]
    return mat


def _apply_factory(mu: Measure):
    """Closure computing T f via gathers: (T f)(g) = sum_h mu(h) f(h^-1 g)."""
    t = mu.table
    p = mu.probabilities()
    slots = _generator_slots(mu)
    if slots is not None:
        pairs = [(p[t.gen_ids[s]], t.gen_action[t.gen_inverse_index[s]]) for s in slots]
    else:
        inv = t.inverse_ids
        pairs = [(p[h], t.left_perm(int(inv[h]))) for h in mu.support()]

    def apply(f: np.ndarray) -> np.ndarray:
        out = np.zeros_like(f)
        for c, idx in pairs:
            out += c * f[idx]
        return out

    return apply


def _dense_gap(mu: Measure) -> tuple[float, np.ndarray]:
    n = mu.table.order
    mat = operator_matrix(mu) - 1.0 / n
    ev = np.linalg.eigvalsh(mat)
    return float(np.max(np.abs(ev))), ev


def spectral_gap(mu: Measure, method: str = "auto", dense_cap: int = DENSE_CAP,
                 tol: float = 1e-9, max_iter: int = 100_000, seed: int = 0) -> SpectralReport:
    """Operator norm of T_mu on the functions with zero sum.

    ``method``: ``dense`` (full symmetric eigensolve), ``iterative`` (Lanczos
    on the deflated operator), ``power`` (power iteration on T^2 with the
    constants projected out), or ``auto`` (dense up to ``dense_cap``).
    """
    if not mu.is_symmetric():
        raise NotSymmetric("spectral gap needs a symmetric measure")
    t = mu.table
    bip = t.is_bipartite() if _generator_slots(mu) is not None and len(mu.support()) == len(t.gens) else False
    if t.order == 1:
        return SpectralReport(0.0, "dense", 0, 0.0, 1, bip)
    if method == "auto":
        method = "dense" if t.order <= dense_cap else "iterative"
    if method == "dense":
        lam, _ = _dense_gap(mu)
        return SpectralReport(min(lam, 1.0), "dense", 1, 0.0, t.order, bip)

    apply = _apply_factory(mu)

    def deflated(v: np.ndarray) -> np.ndarray:
        v = v - v.mean()
        w = apply(v)
        return w - w.mean()

    rng = np.random.default_rng(seed)
    v0 = rng.standard_normal(t.order)
    v0 -= v0.mean()
    if method == "iterative":
        if t.order <= 3:
            lam, _ = _dense_gap(mu)
            return SpectralReport(lam, "iterative", 1, 0.0, t.order, bip)
        count = [0]

        def counted(x):
            count[0] += 1
            return deflated(x.ravel())

        op = LinearOperator((t.order, t.order), matvec=counted, dtype=np.float64)
        k = 2 if t.order > 4 else 1
        try:
            vals, vecs = eigsh(op, k=k, which="LM", tol=tol * 1e-3, v0=v0, maxiter=max_iter)
        except ArpackNoConvergence as exc:
            vals, vecs = exc.eigenvalues, exc.eigenvectors
            if len(vals) == 0:
                raise MaxIterations(SpectralReport(float("nan"), "iterative", count[0], float("inf"), t.order, bip, False))
            j = int(np.argmax(np.abs(vals)))
            res = float(np.linalg.norm(deflated(vecs[:, j]) - vals[j] * vecs[:, j]))
            raise MaxIterations(SpectralReport(abs(float(vals[j])), "iterative", count[0], res, t.order, bip, False))
        j = int(np.argmax(np.abs(vals)))
        v = vecs[:, j] / np.linalg.norm(vecs[:, j])
        res = float(np.linalg.norm(deflated(v) - vals[j] * v))
        return SpectralReport(min(abs(float(vals[j])), 1.0), "iterative", count[0], res, t.order, bip)
    if method == "power":
        v = v0 / np.linalg.norm(v0)
        rho, res = 0.0, float("inf")
        for it in range(1, max_iter + 1):
            w = deflated(deflated(v))
            rho = float(v @ w)
            res = float(np.linalg.norm(w - rho * v))
            if res < tol:
                return SpectralReport(min(math.sqrt(max(rho, 0.0)), 1.0), "power", it, res, t.order, bip)
            nrm = np.linalg.norm(w)
            if nrm == 0.0:
                return SpectralReport(0.0, "power", it, 0.0, t.order, bip)
            v = w / nrm
        raise MaxIterations(SpectralReport(math.sqrt(max(rho, 0.0)), "power", max_iter, res, t.order, bip, False))
    raise ValueError(f"unknown method {method!r}")


# --- inequality checks -------------------------------------------------------

@dataclass
class Verdict:
    passed: bool
    lhs: float | Fraction
    rhs: float | Fraction


def mixing_check(mu: Measure, lambda1: float, x: SubsetHandle, l: int,
                 residual: float = 0.0, walk: Measure | None = None) -> Verdict:
    """|mu^(l)(X) - |X|/|H|| <= lambda1^l sqrt|X|, with lambda1 inflated by ``residual``."""
    m = walk if walk is not None else walk_distribution(mu, l)
    size = len(x)
    if mu.exact:
        lhs = abs(m.mass(x) - Fraction(size, mu.table.order))
    else:
        lhs = abs(m.mass(x) - size / mu.table.order)
    lam = min(lambda1 + residual, 1.0)
    rhs = lam**l * math.sqrt(size)
    return Verdict(float(lhs) <= rhs, lhs, rhs)


def trace_identity_check(mu: Measure, l: int, dense_cap: int = DENSE_CAP) -> tuple[float, float]:
    """(sum of eigenvalues^(2l), |G| * ||mu^(l)||_2^2)."""
    if not mu.is_symmetric():
        raise NotSymmetric("trace identity needs a symmetric measure")
    n = mu.table.order
    if n > dense_cap:
        raise Unsupported(f"order {n} exceeds dense cap {dense_cap}")
    ev = np.linalg.eigvalsh(operator_matrix(mu))
    lhs = math.fsum(ev ** (2 * l))
    rhs = n * float(l2_norm_sq(walk_distribution(mu, l)))
    return lhs, rhs


def kesten_check(mu: Measure, a: SubsetHandle, l: int, l0: int) -> Verdict:
    """mu^(2 l0)(A A) >= mu^(l)(A)^2 for symmetric mu and A, l > l0."""
    from .modgroup import subset_product

    if not mu.is_symmetric() or not a.is_symmetric():
        raise NotSymmetric("Kesten-type bound needs symmetric mu and A")
    if not l > l0 >= 0:
        raise ValueError("need l > l0 >= 0")
    aa = subset_product(a, a)
    lhs = walk_distribution(mu, 2 * l0).mass(aa)
    rhs = walk_distribution(mu, l).mass(a) ** 2
    return Verdict(lhs >= rhs, lhs, rhs)
