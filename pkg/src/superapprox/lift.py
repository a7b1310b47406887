"""Spectral gaps of SL_n(Z/p^k) walks without enumerating the top level.

Let N be the kernel of G_k -> G_{k-1}.  For k >= 2 it is abelian,
N = {I + p^(k-1) X : X in sl_n(F_p)}, and the walk operator commutes with
right translation by N.  So L^2(G_k) splits into the spaces

    L^2_psi = {f : f(g n) = psi(n) f(g)},   psi a character of N,

each of dimension |G_{k-1}|.  The trivial character gives back the level
k-1 walk; for psi_Y(I + p^(k-1) X) = exp(2 pi i tr(YX) / p) the operator,
written on a section s: G_{k-1} -> G_k, is

    (T_psi F)(x) = sum_t mu(t) psi(s(t x)^-1 t s(x)) F(t x).

Right translation by g in G_k carries L^2_psi onto L^2_{psi o Ad(g^-1)}
and commutes with T, so one representative Y per adjoint orbit suffices.

The group generated at level k must be the full preimage of the level
k-1 group.  For SL_2 this holds for p >= 5 whenever the generators
reduce to all of SL_2(F_p), and :func:`tower_gaps` checks that condition.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import csr_matrix
from scipy.sparse.linalg import eigsh

from .errors import Unsupported
from .modgroup import GroupTable, SymmetricGenSet, batch_inverse, enumerate_group, order_sl2
from .walk import spectral_gap, uniform_on


def character_orbits(n: int, p: int, gens: SymmetricGenSet) -> list[tuple[np.ndarray, int]]:
    """Adjoint orbits on the nonzero trace-zero matrices mod p, as (representative, size).

    ``gens`` may live at any level p^k; only their reductions mod p matter.
    """
    gm = np.stack([g.as_array() for g in gens.gens]).astype(np.int64) % p
    gi = batch_inverse(gm, p)
    dim = n * n
    grid = np.indices((p,) * (dim - 1)).reshape(dim - 1, -1).T
    mats = np.zeros((grid.shape[0], n, n), dtype=np.int64)
    flat = mats.reshape(grid.shape[0], dim)
    flat[:, : dim - 1] = grid
    diag = sum(flat[:, i * n + i] for i in range(n - 1))
    flat[:, dim - 1] = (-diag) % p
    keys = flat @ (p ** np.arange(dim - 1, -1, -1))
    order = np.argsort(keys)
    keys_sorted = keys[order]
    label = np.full(mats.shape[0], -1)
    orbits = []
    for start in order:
        if label[start] >= 0 or not flat[start].any():
            continue
        label[start] = len(orbits)
        frontier, members = [start], 1
        while frontier:
            cur = mats[frontier]
            nxt = np.einsum("sij,fjk,skl->fsil", gm, cur, gi).reshape(-1, n, n) % p
            nk = nxt.reshape(-1, dim) @ (p ** np.arange(dim - 1, -1, -1))
            idx = order[np.searchsorted(keys_sorted, nk)]
            fresh = np.unique(idx[label[idx] < 0])
            label[fresh] = len(orbits)
            members += fresh.size
            frontier = list(fresh)
        orbits.append((mats[start].copy(), members))
    return orbits


@dataclass
class TwistedFamily:
    """Data shared by the twisted operators T_psi over a fixed base level."""

    base: GroupTable
    p: int
    weights: np.ndarray          # mu(t) for each top-level generator t
    actions: list[np.ndarray]    # id of (t mod p^(k-1)) x in the base table
    cocycles: list[np.ndarray]   # X(t, x) in sl_n(F_p), shape (N, n, n), int8

    @property
    def dim(self) -> int:
        return self.base.order

    def phases(self, y: np.ndarray) -> list[np.ndarray]:
        omega = np.exp(2j * np.pi * np.arange(self.p) / self.p)
        out = []
        for x in self.cocycles:
            e = np.einsum("ij,nji->n", y.astype(np.int64), x.astype(np.int64)) % self.p
            out.append(omega[e])
        return out

    def apply_factory(self, y: np.ndarray):
        op = self.sparse(y)
        return lambda f: op @ f

    def sparse(self, y: np.ndarray) -> csr_matrix:
        """T_psi as a CSR matrix with one entry per (row, generator)."""
        rows = np.tile(np.arange(self.dim), len(self.actions))
        cols = np.concatenate(self.actions)
        data = np.concatenate([w * ph for w, ph in zip(self.weights, self.phases(y))])
        return csr_matrix((data, (rows, cols)), shape=(self.dim, self.dim))

    def matrix(self, y: np.ndarray) -> np.ndarray:
        return self.sparse(y).toarray()

    def norm(self, y: np.ndarray, method: str = "iterative", tol: float = 1e-10,
             seed: int = 0, ncv: int = 32) -> float:
        if method == "dense" or self.dim <= 3:
            return float(np.max(np.abs(np.linalg.eigvalsh(self.matrix(y)))))
        rng = np.random.default_rng(seed)
        v0 = rng.standard_normal(self.dim) + 1j * rng.standard_normal(self.dim)
        # One eigenvalue of largest modulus is the norm; a wider Krylov space
        # needs far fewer restarts on the clustered top of the spectrum.
        vals = eigsh(self.sparse(y), k=1, which="LM", tol=tol, v0=v0, ncv=min(ncv, self.dim - 1),
                     return_eigenvectors=False)
        return float(np.max(np.abs(vals)))


def twisted_family(gens_top: SymmetricGenSet, base: GroupTable) -> TwistedFamily:
    """Section, cocycle and actions for the walk uniform on ``gens_top`` at level k."""
    p, k = gens_top.p, gens_top.k
    if k < 2:
        raise ValueError("need k >= 2")
    if base.p != p or base.k != k - 1:
        raise ValueError("base table must be the level k-1 quotient")
    n, q = gens_top.n, gens_top.modulus
    low = p ** (k - 1)
    top = np.stack([g.as_array() for g in gens_top.gens]).astype(np.int64)
    base_mats = np.stack([g.as_array() for g in base.gens.gens]).astype(np.int64)
    slot = []
    for t in top:
        hit = np.flatnonzero(np.all(base_mats == t % low, axis=(1, 2)))
        if hit.size != 1:
            raise ValueError("top generators do not reduce onto the base generators")
        slot.append(int(hit[0]))
    # One lift per base generator, used to build the section along the BFS tree.
    lift_of = {}
    for t, s in zip(top, slot):
        lift_of.setdefault(s, t)
    lifts = np.stack([lift_of[s] for s in range(len(base.gens))])
    size = base.order
    sec = np.zeros((size, n, n), dtype=np.int64)
    sec[0] = np.eye(n, dtype=np.int64)
    depth = base.depth
    for d in range(1, int(depth.max()) + 1):
        ids = np.flatnonzero(depth == d)
        sec[ids] = np.matmul(lifts[base.parent_gen[ids]], sec[base.parent[ids]]) % q
    sec_inv = batch_inverse(sec, q)
    eye = np.eye(n, dtype=np.int64)
    actions, cocycles = [], []
    for t, s in zip(top, slot):
        act = base.gen_action[s].astype(np.int64)
        c = np.matmul(sec_inv[act], np.matmul(t, sec) % q) % q
        diff = (c - eye) % q
        if np.any(diff % low):
            raise AssertionError("cocycle does not lie in the congruence kernel")
        actions.append(act)
        cocycles.append(((diff // low) % p).astype(np.int8))
    weights = np.full(len(top), 1.0 / len(top))
    return TwistedFamily(base, p, weights, actions, cocycles)


@dataclass
class LevelGap:
    k: int
    order: int
    lam: float
    new_lam: float
    blocks: list[tuple[list[list[int]], int, float]] = field(default_factory=list)
    method: str = ""

    def as_dict(self) -> dict:
        return {"k": self.k, "order": self.order, "lambda": self.lam, "new_lambda": self.new_lam,
                "method": self.method,
                "blocks": [{"Y": y, "orbit": size, "norm": v} for y, size, v in self.blocks]}


def tower_gaps(make_gens, p: int, kmax: int, method: str = "iterative",
               tol: float = 1e-10) -> list[LevelGap]:
    """lambda at levels 1..kmax, enumerating only up to level kmax-1.

    ``make_gens(k)`` returns the symmetric generating set modulo p^k.
    """
    gens1 = make_gens(1)
    n = gens1.n
    if n * n - 1 < 1 or p % n == 0:
        raise Unsupported("the trace pairing on sl_n(F_p) needs p not dividing n")
    t1 = enumerate_group(gens1)
    if n == 2 and (p < 5 or t1.order != order_sl2(p)):
        raise Unsupported("level lifting needs p >= 5 and generators onto SL_2(F_p)")
    rep = spectral_gap(uniform_on(t1), method="dense" if t1.order <= 5000 else "iterative")
    out = [LevelGap(1, t1.order, rep.lam, rep.lam, [], rep.method)]
    orbits = character_orbits(n, p, gens1)
    base = t1
    for k in range(2, kmax + 1):
        gens_k = make_gens(k)
        fam = twisted_family(gens_k, base)
        blocks = []
        for y, size in orbits:
            blocks.append((y.tolist(), size, fam.norm(y, method=method, tol=tol)))
        new = max(v for _, _, v in blocks)
        out.append(LevelGap(k, base.order * p ** (n * n - 1), max(out[-1].lam, new), new, blocks,
                            f"lift-{method}"))
        if k < kmax:
            base = enumerate_group(make_gens(k))
    return out


def block_trace(fam: TwistedFamily, power: int) -> float:
    """Sum over all characters of Tr(T_psi^power), by dense block eigensolves."""
    n = fam.base.n
    total = 0.0
    for flat in np.ndindex(*(fam.p,) * (n * n - 1)):
        y = np.zeros((n, n), dtype=np.int64)
        y.reshape(-1)[: n * n - 1] = flat
        y[n - 1, n - 1] = (-sum(y[i, i] for i in range(n - 1))) % fam.p
        ev = np.linalg.eigvalsh(fam.matrix(y))
        total += math.fsum(ev**power)
    return total
