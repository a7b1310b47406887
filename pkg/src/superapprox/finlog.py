"""Finite logarithmic maps between congruence levels of SL_n(Z).

For g = I + q1*x with x integral, Psi(g) = x mod q3 where q3 = q2/q1.  All
group arithmetic is done on exact integer matrices (numpy object arrays of
Python ints); reduction happens only when Psi is evaluated.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import NotSpecialLinear
from .modgroup import _int_det, split_prime_power


def int_matrix(rows) -> np.ndarray:
    a = np.array([[int(v) for v in row] for row in rows], dtype=object)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    return a


def eye(n: int) -> np.ndarray:
    return int_matrix(np.eye(n, dtype=int))


def unit(n: int, i: int, j: int) -> np.ndarray:
    e = int_matrix(np.zeros((n, n), dtype=int))
    e[i, j] = 1
    return e


def int_det(a: np.ndarray) -> int:
    return _int_det(a.tolist())


def sl_inverse(a: np.ndarray) -> np.ndarray:
    """Inverse of a determinant-one integer matrix (its adjugate)."""
    n = a.shape[0]
    if int_det(a) != 1:
        raise NotSpecialLinear("determinant is not 1")
    if n == 1:
        return eye(1)
    adj = np.empty((n, n), dtype=object)
    rows = a.tolist()
    for i in range(n):
        for j in range(n):
            minor = [r[:j] + r[j + 1:] for t, r in enumerate(rows) if t != i]
            adj[j, i] = (-1) ** (i + j) * _int_det(minor)
    return adj


def commutator(g: np.ndarray, h: np.ndarray) -> np.ndarray:
    """(g, h) = g^-1 h^-1 g h."""
    return sl_inverse(g) @ sl_inverse(h) @ g @ h


def lie_bracket(x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return x @ y - y @ x


def reduce(x: np.ndarray, q: int) -> np.ndarray:
    return np.vectorize(lambda v: v % q, otypes=[object])(x)


def same_mod(x: np.ndarray, y: np.ndarray, q: int) -> bool:
    return all((a - b) % q == 0 for a, b in zip(x.ravel(), y.ravel()))


@dataclass(frozen=True)
class FiniteLogParams:
    """Levels q1 | q2 | q1^2, powers of one prime."""

    q1: int
    q2: int

    def __post_init__(self):
        p1, _ = split_prime_power(self.q1)
        p2, _ = split_prime_power(self.q2)
        if p1 != p2:
            raise ValueError("q1 and q2 must be powers of the same prime")
        if self.q2 % self.q1 or (self.q1 * self.q1) % self.q2:
            raise ValueError("need q1 | q2 | q1^2")

    @classmethod
    def from_exponents(cls, p: int, e1: int, e2: int) -> "FiniteLogParams":
        return cls(p**e1, p**e2)

    @property
    def q3(self) -> int:
        return self.q2 // self.q1

    @property
    def p(self) -> int:
        return split_prime_power(self.q1)[0]


@dataclass(frozen=True, eq=False)
class CongruenceElement:
    """An integer matrix of determinant 1 congruent to I modulo q1."""

    g: np.ndarray
    q1: int

    def __post_init__(self):
        g = int_matrix(self.g) if not isinstance(self.g, np.ndarray) or self.g.dtype != object else self.g
        object.__setattr__(self, "g", g)
        if int_det(g) != 1:
            raise NotSpecialLinear("determinant is not 1")
        if not same_mod(g, eye(g.shape[0]), self.q1):
            raise ValueError(f"matrix is not congruent to I mod {self.q1}")

    @property
    def n(self) -> int:
        return self.g.shape[0]

    def __matmul__(self, other: "CongruenceElement") -> "CongruenceElement":
        return CongruenceElement(self.g @ other.g, math.gcd(self.q1, other.q1))

    def inverse(self) -> "CongruenceElement":
        return CongruenceElement(sl_inverse(self.g), self.q1)

    def conjugate(self, gamma: np.ndarray) -> "CongruenceElement":
        """gamma^-1 g gamma."""
        return CongruenceElement(sl_inverse(gamma) @ self.g @ gamma, self.q1)


@dataclass(frozen=True, eq=False)
class LieVector:
    x: np.ndarray
    q3: int

    @property
    def n(self) -> int:
        return self.x.shape[0]

    def __eq__(self, other) -> bool:
        return isinstance(other, LieVector) and self.q3 == other.q3 and same_mod(self.x, other.x, self.q3)

    def __add__(self, other: "LieVector") -> "LieVector":
        return LieVector(reduce(self.x + other.x, self.q3), self.q3)

    def __neg__(self) -> "LieVector":
        return LieVector(reduce(-self.x, self.q3), self.q3)

    def trace(self) -> int:
        return sum(self.x[i, i] for i in range(self.n)) % self.q3

    def rows(self) -> list[list[int]]:
        return [[int(v) for v in row] for row in self.x]


def finlog(g: CongruenceElement | np.ndarray, params: FiniteLogParams) -> LieVector:
    """((g - I)/q1) mod q3."""
    mat = g.g if isinstance(g, CongruenceElement) else int_matrix(g)
    diff = mat - eye(mat.shape[0])
    if any(v % params.q1 for v in diff.ravel()):
        raise ValueError(f"matrix is not congruent to I mod {params.q1}")
    out = LieVector(reduce(diff // params.q1, params.q3), params.q3)
    if out.trace() != 0:
        raise AssertionError("finite logarithm has nonzero trace")
    return out


@dataclass
class IdentityCheck:
    passed: bool
    lhs: list
    rhs: list


def _check(lhs: LieVector, rhs: LieVector) -> IdentityCheck:
    return IdentityCheck(lhs == rhs, lhs.rows(), rhs.rows())


def check_additive(g: CongruenceElement, h: CongruenceElement, params: FiniteLogParams) -> IdentityCheck:
    """Psi(gh) = Psi(g) + Psi(h)."""
    return _check(finlog(g @ h, params), finlog(g, params) + finlog(h, params))


def check_equivariance(gamma: np.ndarray, g: CongruenceElement, params: FiniteLogParams) -> IdentityCheck:
    """Psi(gamma^-1 g gamma) = gamma^-1 Psi(g) gamma mod q3."""
    gamma = int_matrix(gamma)
    x = finlog(g, params)
    rhs = LieVector(reduce(sl_inverse(gamma) @ x.x @ gamma, params.q3), params.q3)
    return _check(finlog(g.conjugate(gamma), params), rhs)


def composite_params(p_g: FiniteLogParams, p_h: FiniteLogParams) -> FiniteLogParams:
    """Level q1 q1' and upper level gcd(q2 q1', q1 q2')."""
    q1 = p_g.q1 * p_h.q1
    q = math.gcd(p_g.q2 * p_h.q1, p_g.q1 * p_h.q2)
    return FiniteLogParams(q1, q)


def check_commutator(g: CongruenceElement, h: CongruenceElement, p_g: FiniteLogParams,
                     p_h: FiniteLogParams) -> IdentityCheck:
    """Psi((g,h)) = [Psi(g), Psi(h)] at the composite level."""
    comp = composite_params(p_g, p_h)
    c = CongruenceElement(commutator(g.g, h.g), comp.q1)
    lhs = finlog(c, comp)
    x, y = finlog(g, p_g), finlog(h, p_h)
    rhs = LieVector(reduce(lie_bracket(x.x, y.x), comp.q3), comp.q3)
    return _check(lhs, rhs)


def conj_commutator(t: np.ndarray, gamma: np.ndarray) -> np.ndarray:
    """C_t(gamma) = t gamma t^-1 gamma^-1."""
    return t @ gamma @ sl_inverse(t) @ sl_inverse(gamma)


def iterated_commutator_check(ts: Sequence[np.ndarray], gamma0: np.ndarray, p: int, m: int,
                              k: int) -> IdentityCheck:
    """C_{t_1}(...C_{t_N}(gamma0)) = I + p^(k+Nm) ad(y_1)...ad(y_N) xi0 mod p^(k+(N+1)m)."""
    if not 1 <= m <= k:
        raise ValueError("need 1 <= m <= k")
    gamma0 = int_matrix(gamma0)
    n = gamma0.shape[0]
    one = eye(n)
    if not same_mod(gamma0, one, p**k):
        raise ValueError(f"gamma0 is not congruent to I mod p^{k}")
    ys = []
    for t in ts:
        t = int_matrix(t)
        if not same_mod(t, one, p**m):
            raise ValueError(f"t is not congruent to I mod p^{m}")
        ys.append(((t - one) // p**m, t))
    g = gamma0
    for _, t in reversed(ys):
        g = conj_commutator(t, g)
    xi = (gamma0 - one) // p**k
    for y, _ in reversed(ys):
        xi = lie_bracket(y, xi)
    big_n = len(ys)
    q = p ** (k + (big_n + 1) * m)
    rhs = one + p ** (k + big_n * m) * xi
    return IdentityCheck(same_mod(g, rhs, q), reduce(g, q).tolist(), reduce(rhs, q).tolist())


def random_sl(n: int, rng: np.random.Generator, length: int = 6, bound: int = 3,
              q1: int = 1) -> np.ndarray:
    """Product of ``length`` elementary matrices I + q1*c*E_ij with |c| <= bound."""
    g = eye(n)
    if n < 2:
        return g
    for _ in range(length):
        i, j = rng.choice(n, size=2, replace=False)
        c = int(rng.integers(-bound, bound + 1))
        e = eye(n)
        e[i, j] = q1 * c
        g = g @ e
    return g


def random_congruence(n: int, q1: int, rng: np.random.Generator, length: int = 6,
                      bound: int = 3) -> CongruenceElement:
    return CongruenceElement(random_sl(n, rng, length, bound, q1), q1)


@dataclass
class QuotientSweep:
    size: int
    image_size: int
    injective: bool
    surjective: bool
    additive: bool


def injectivity_sweep(n: int, params: FiniteLogParams, pair_limit: int = 1000) -> QuotientSweep:
    """Exhaustive check of Psi on ker(SL_n(Z/q2) -> SL_n(Z/q1)).

    Psi only depends on g mod q2, so every kernel element is visited as a
    matrix mod q2.  Surjectivity is onto trace-zero matrices mod q3, and the
    homomorphism property is checked on all pairs when the kernel has at most
    ``pair_limit`` elements.
    """
    q1, q2, q3 = params.q1, params.q2, params.q3
    one = eye(n)
    kernel = []
    for flat in itertools.product(range(q2), repeat=n * n):
        g = int_matrix(np.array(flat, dtype=object).reshape(n, n))
        if same_mod(g, one, q1) and (int_det(g) - 1) % q2 == 0:
            kernel.append(g)
    images: dict[tuple, np.ndarray] = {}
    injective = True
    for g in kernel:
        key = tuple(v % q3 for v in ((g - one) // q1).ravel())
        if key in images and not same_mod(images[key], g, q2):
            injective = False
        images[key] = g
    additive = True
    if len(kernel) <= pair_limit:
        logs = [LieVector(reduce((g - one) // q1, q3), q3) for g in kernel]
        for (g, x), (h, y) in itertools.product(zip(kernel, logs), repeat=2):
            gh = reduce(g @ h, q2)
            if LieVector(reduce((gh - one) // q1, q3), q3) != x + y:
                additive = False
                break
    trace_zero = q3 ** (n * n - 1)
    return QuotientSweep(len(kernel), len(images), injective, len(images) == trace_zero, additive)
