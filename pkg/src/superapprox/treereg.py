"""Regularization of leaf sets in rooted k-ary trees.

Leaves of T_{k,n} are digit vectors of length n.  Internally a leaf is packed
as the base-k integer of its digits, so the ancestor at level i is simply
``code // k**(n - i)`` and lexicographic order on vectors is numeric order on
codes.  Logarithms in the dyadic bucketing bound are base 2.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .errors import HypothesisFailed, PostconditionFailed

_TOL = 1e-12


def _packed_dtype(k: int, n: int):
    return np.int64 if k**n < 2**62 else object


def pack(digits: Sequence[int], k: int) -> int:
    code = 0
    for d in digits:
        code = code * k + int(d)
    return code


def unpack(code: int, k: int, length: int) -> tuple[int, ...]:
    out = []
    code = int(code)
    for _ in range(length):
        code, d = divmod(code, k)
        out.append(d)
    return tuple(reversed(out))


def ancestor(leaf: Sequence[int], i: int) -> tuple[int, ...]:
    """Prefix of length i."""
    if not 0 <= i <= len(leaf):
        raise ValueError(f"level {i} outside [0, {len(leaf)}]")
    return tuple(leaf[:i])


@dataclass(frozen=True, eq=False)
class TreeSubset:
    """A set of leaves of T_{k,n}, stored as sorted unique packed codes."""

    k: int
    n: int
    codes: np.ndarray

    def __post_init__(self):
        if self.k < 1 or self.n < 0:
            raise ValueError("need k >= 1 and n >= 0")
        codes = np.unique(np.asarray(self.codes, dtype=_packed_dtype(self.k, self.n)))
        if codes.size and (codes[0] < 0 or codes[-1] >= self.k**self.n):
            raise ValueError("leaf code out of range")
        object.__setattr__(self, "codes", codes)

    @classmethod
    def from_digits(cls, k: int, n: int, leaves: Iterable[Sequence[int]]) -> "TreeSubset":
        codes = []
        for leaf in leaves:
            if len(leaf) != n:
                raise ValueError(f"leaf {tuple(leaf)} does not have length {n}")
            if any(not 0 <= int(d) < k for d in leaf):
                raise ValueError(f"leaf {tuple(leaf)} has a digit outside [0, {k})")
            codes.append(pack(leaf, k))
        return cls(k, n, np.array(codes, dtype=_packed_dtype(k, n)))

    @classmethod
    def full(cls, k: int, n: int) -> "TreeSubset":
        return cls(k, n, np.arange(k**n, dtype=np.int64))

    def __len__(self) -> int:
        return int(self.codes.size)

    def __eq__(self, other) -> bool:
        return (isinstance(other, TreeSubset) and (self.k, self.n) == (other.k, other.n)
                and np.array_equal(self.codes, other.codes))

    def __contains__(self, leaf) -> bool:
        code = pack(leaf, self.k)
        i = np.searchsorted(self.codes, code)
        return bool(i < self.codes.size and self.codes[i] == code)

    def issubset(self, other: "TreeSubset") -> bool:
        return bool(np.isin(self.codes, other.codes).all())

    def leaves(self) -> list[tuple[int, ...]]:
        return [unpack(c, self.k, self.n) for c in self.codes]

    def prefixes(self, i: int) -> np.ndarray:
        """Sorted unique level-i ancestors, packed."""
        return np.unique(self.codes // self.k ** (self.n - i))

    def level_count(self, i: int) -> int:
        if not self.codes.size:
            return 0
        pre = self.codes // self.k ** (self.n - i)
        return int(np.count_nonzero(pre[1:] != pre[:-1]) + 1)

    def level_counts(self) -> list[int]:
        return [self.level_count(i) for i in range(self.n + 1)]

    def restrict(self, level: int, vertices: np.ndarray) -> "TreeSubset":
        """Leaves whose level-``level`` ancestor is among ``vertices``."""
        keep = np.isin(self.codes // self.k ** (self.n - level), vertices)
        return TreeSubset(self.k, self.n, self.codes[keep])

    def to_json(self) -> dict:
        return {"k": self.k, "n": self.n, "leaves": [list(v) for v in self.leaves()]}

    @classmethod
    def from_json(cls, data: dict) -> "TreeSubset":
        return cls.from_digits(int(data["k"]), int(data["n"]), data["leaves"])


def bound_divisor(k: int) -> float:
    """2 log2 k, clamped to 1 for k = 1."""
    return max(1.0, 2.0 * math.log2(k)) if k > 1 else 1.0


def _select_children(codes: np.ndarray, k: int) -> tuple[int, np.ndarray]:
    """Dyadic bucketing on sorted child codes; returns (k', kept codes)."""
    parents = codes // k
    _, start, deg = np.unique(parents, return_index=True, return_counts=True)
    deg = deg.astype(np.int64)
    bucket = np.zeros(deg.size, dtype=np.int64)
    top = int(deg.max()).bit_length() - 1
    for i in range(1, top + 1):
        bucket += deg >= (1 << i)
    # Bucket mass after truncation to 2^i children per parent.
    retained = np.array([(1 << i) * int(np.count_nonzero(bucket == i)) for i in range(top + 1)])
    best = int(np.flatnonzero(retained == retained.max())[-1])
    kp = 1 << best
    group = np.repeat(np.arange(deg.size), deg)
    rank = np.arange(codes.size) - start[group]
    keep = (bucket[group] == best) & (rank < kp)
    return kp, codes[keep]


def parents_generation(a: TreeSubset) -> tuple[int, TreeSubset]:
    """Keep one dyadic degree class of parents, each with exactly k' children."""
    if len(a) == 0:
        raise ValueError("A must be nonempty")
    if a.n == 0:
        raise ValueError("the root has no parent")
    kp, kept = _select_children(a.codes, a.k)
    return kp, TreeSubset(a.k, a.n, kept)


@dataclass
class Chain:
    """The descending sequence A_n = A, ..., A_0 and the degrees k_0..k_{n-1}."""

    sets: list[TreeSubset]
    degrees: list[int]

    def check_sizes(self) -> bool:
        n = len(self.degrees)
        size = len(self.sets[n])
        div = bound_divisor(self.sets[n].k)
        return all(len(self.sets[i]) * div ** (n - i) >= size * (1 - _TOL) for i in range(n + 1))


def regularization_chain(a: TreeSubset) -> Chain:
    if len(a) == 0:
        raise ValueError("A must be nonempty")
    k, n = a.k, a.n
    sets: list[TreeSubset | None] = [None] * (n + 1)
    degrees = [0] * n
    cur = a
    sets[n] = cur
    for i in range(n - 1, -1, -1):
        kp, kept = _select_children(cur.prefixes(i + 1), k)
        degrees[i] = kp
        cur = cur.restrict(i + 1, kept)
        sets[i] = cur
    return Chain(sets, degrees)


def select_level(degrees: Sequence[int], k: int, eps: float) -> int:
    """Largest i in [0, n-1] with prod_{j<i} k_j < k^(i eps/2); 0 if none."""
    m = 0
    acc = 0.0
    lk = math.log2(k) if k > 1 else 0.0
    for i in range(len(degrees)):
        if acc < i * eps / 2 * lk - _TOL:
            m = i
        acc += math.log2(degrees[i])
    return m


@dataclass
class RegularizedBlock:
    m: int
    v: tuple[int, ...]
    block: TreeSubset
    counts: list[int]
    required: dict = field(default_factory=dict)
    achieved: dict = field(default_factory=dict)
    degrees: list[int] = field(default_factory=list)

    def as_dict(self) -> dict:
        return {
            "schema": "treereg/1",
            "m": self.m,
            "v": list(self.v),
            "levels": self.counts,
            "b_size": len(self.block),
            "bounds": {"required": self.required, "achieved": self.achieved},
        }

    def check_invariants(self, a: TreeSubset) -> bool:
        b = self.block
        single = b.level_count(self.m) == 1 and unpack(b.prefixes(self.m)[0], b.k, self.m) == self.v
        return single and b.issubset(a) and self.counts == b.level_counts()


def _postconditions(b: TreeSubset, m: int, eps: float, level_exp: float, size_exp: float,
                    log_floor: float = 0.0) -> tuple[dict, dict, bool]:
    """Log2-scale bounds: m <= n(1-eps/4), |pi_l B| >= 2^log_floor k^((l-m) level_exp),
    |B| >= k^(n size_exp)."""
    k, n = b.k, b.n
    lk = math.log2(k) if k > 1 else 0.0
    counts = b.level_counts()
    req_levels = [log_floor + (l - m) * level_exp * lk for l in range(m, n + 1)]
    got_levels = [math.log2(counts[l]) for l in range(m, n + 1)]
    required = {
        "m_max": n * (1 - eps / 4),
        "log2_levels": req_levels,
        "log2_b_size": n * size_exp * lk,
    }
    achieved = {"m": m, "log2_levels": got_levels, "log2_b_size": math.log2(len(b))}
    ok = (m <= required["m_max"] + _TOL
          and all(g >= r - _TOL for g, r in zip(got_levels, req_levels))
          and achieved["log2_b_size"] >= required["log2_b_size"] - _TOL)
    return required, achieved, ok


def _check_density(a: TreeSubset, eps: float, strict: bool) -> None:
    if len(a) == 0:
        raise ValueError("A must be nonempty")
    if eps <= 0:
        raise ValueError("eps must be positive")
    if not strict:
        return
    lk = math.log2(a.k) if a.k > 1 else 0.0
    need = a.n * eps * lk
    have = math.log2(len(a))
    if have < need - _TOL:
        raise HypothesisFailed("|A| < k^(n eps)", required=2.0**need, achieved=len(a))


def _construct(a: TreeSubset, eps: float) -> tuple[int, tuple[int, ...], TreeSubset, list[int]]:
    chain = regularization_chain(a)
    m = select_level(chain.degrees, a.k, eps)
    a0 = chain.sets[0]
    v_code = a0.prefixes(m)[0]
    b = a0.restrict(m, np.array([v_code], dtype=a0.codes.dtype))
    return m, unpack(v_code, a.k, m), b, chain.degrees


def regularize_hypothesis_holds(k: int, eps: float) -> bool:
    """k^(eps/4) > 2 log2 k."""
    return k > 1 and (eps / 4) * math.log2(k) > 1 + math.log2(math.log2(k))


def regularize(a: TreeSubset, eps: float, strict: bool = True) -> RegularizedBlock:
    """Find a level m, a vertex v and B under v with regular growth below m.

    With ``strict=False`` the construction runs without the hypotheses on
    |A| and k, and failed postconditions are reported rather than raised.
    """
    _check_density(a, eps, strict)
    if strict and not regularize_hypothesis_holds(a.k, eps):
        raise HypothesisFailed("k^(eps/4) <= 2 log2 k",
                               required=2 * math.log2(a.k) if a.k > 1 else 0.0,
                               achieved=a.k ** (eps / 4))
    m, v, b, degrees = _construct(a, eps)
    required, achieved, ok = _postconditions(b, m, eps, eps / 2, eps**2 / 8)
    achieved["ok"] = ok
    if strict and not ok:
        raise PostconditionFailed(f"regularize bounds violated: {achieved}")
    return RegularizedBlock(m, v, b, b.level_counts(), required, achieved, degrees)


def threshold_K(eps: float) -> float:
    """Least K beyond which K^(eps/4) >= 2 log2 K holds for every larger value.

    The inequality also holds trivially near K = 1, so the literal smallest
    solution is useless; this is the larger root of K^(eps/4) = 2 log2 K.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")

    def gap(x: float) -> float:  # x = log2 K
        return x * eps / 4 - 1 - math.log2(x)

    x_min = 4 / (eps * math.log(2))
    if gap(x_min) >= 0:
        return 2.0 ** max(x_min, 1.0)
    hi = 2 * x_min
    while gap(hi) < 0:
        hi *= 2
    return 2.0 ** brentq(gap, x_min, hi, xtol=1e-12)


def block_size(k: int, K: float) -> int:
    """Smallest s >= 1 with k^s >= K."""
    if k < 2:
        raise ValueError("block size needs k >= 2")
    s = max(1, math.ceil(math.log2(K) / math.log2(k) - 1e-12))
    while k**s < K:
        s += 1
    return s


def blocked_threshold_log2(k: int, eps: float) -> float:
    """log2 of K(eps)^max(64/eps^2, 2/eps), the required lower bound on k^n."""
    return math.log2(threshold_K(eps)) * max(64 / eps**2, 2 / eps)


def blocked_regularize(a: TreeSubset, eps: float, strict: bool = True) -> RegularizedBlock:
    """Regularize on the coarsened tree T_{k^s, n//s} where k^s >= K(eps).

    With ``strict=False`` the thresholds on |A| and k^n are skipped (useful at
    desk scale) and failed postconditions are reported in ``achieved["ok"]``.
    """
    _check_density(a, eps, strict)
    k, n = a.k, a.n
    big_k = threshold_K(eps)
    if strict:
        need = blocked_threshold_log2(k, eps)
        have = n * math.log2(k) if k > 1 else 0.0
        if have < need:
            raise HypothesisFailed("k^n below K(eps)^max(64/eps^2, 2/eps)",
                                   required=need, achieved=have)
    s = block_size(k, big_k)
    blocks = n // s
    coarse = TreeSubset(k**s, blocks, a.prefixes(s * blocks))
    if blocks == 0:
        m_c, v_code = 0, 0
        kept = coarse.codes
    else:
        m_c, _, b_c, _ = _construct(coarse, eps / 2)
        v_code = b_c.prefixes(m_c)[0]
        kept = b_c.codes
    m = s * m_c
    b = a.restrict(s * blocks, kept)
    log_floor = -2 * math.log2(big_k)
    required, achieved, ok = _postconditions(b, m, eps, eps / 4, eps**2 / 32, log_floor)
    achieved["ok"] = ok
    required["log2_K"] = math.log2(big_k)
    required["block"] = s
    if strict and not ok:
        raise PostconditionFailed(f"blocked_regularize bounds violated: {achieved}")
    return RegularizedBlock(m, unpack(v_code, k, m), b, b.level_counts(), required, achieved)


def load_tree(path: str) -> TreeSubset:
    with open(path) as fh:
        return TreeSubset.from_json(json.load(fh))
