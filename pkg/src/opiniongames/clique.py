"""
Clique games: persons grouped into cliques that minimize their summed cost, and
the reduction of such a game to an ordinary heterogeneous game on stacked opinions.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .cost_fn import AffinePre, DimensionError, Sum
from .equilibrium import NonConvexError, SolveResult, gradient_descent
from .game import AsymmetricGameError, HeterogeneousGame, InternalCost, PairCost, compile_objective


@dataclass(eq=False)
class CliqueGame:
    """A heterogeneous game together with a partition of its persons."""

    base: HeterogeneousGame
    partition: list[list[int]]

    def __post_init__(self):
        self.partition = [sorted(int(j) for j in c) for c in self.partition]
        seen = [j for c in self.partition for j in c]
        if any(not c for c in self.partition):
            raise ValueError("cliques must be nonempty")
        if sorted(seen) != list(range(self.base.n)):
            raise ValueError("cliques must partition the persons 0..n-1")
        self._owner = {j: i for i, c in enumerate(self.partition) for j in c}

    @property
    def t(self) -> int:
        return len(self.partition)

    # profile layout -------------------------------------------------------

    @property
    def dims(self) -> list[int]:
        return [sum(self.base.dims[j] for j in c) for c in self.partition]

    @property
    def size(self) -> int:
        return self.base.size

    def check_profile(self, z) -> np.ndarray:
        return self.base.check_profile(z)

    def blocks(self, z):
        return self.base.blocks(z)

    def social_cost(self, z) -> float:
        return self.base.social_cost(z)

    def to_reduced(self, z) -> np.ndarray:
        """Base-ordered profile -> clique-stacked profile of the reduced game."""
        zs = self.base.blocks(z)
        return np.concatenate([zs[j] for c in self.partition for j in c]) if zs else np.zeros(0)

    def from_reduced(self, zr) -> np.ndarray:
        zr = np.asarray(zr, dtype=float)
        out = [None] * self.base.n
        pos = 0
        for c in self.partition:
            for j in c:
                m = self.base.dims[j]
                out[j] = zr[pos:pos + m]
                pos += m
        if pos != zr.size:
            raise DimensionError(f"reduced profile has {zr.size} entries, expected {pos}")
        return self.base.stack(out) if out else np.zeros(0)

    # costs ----------------------------------------------------------------

    def clique_cost(self, i: int, z) -> float:
        if not 0 <= i < self.t:
            raise IndexError(f"clique index {i} out of range")
        zs = self.base.blocks(z)
        return sum(self.base.person_cost_blocks(j, zs) for j in self.partition[i])

    def clique_objective(self, i: int, zs):
        """q_i as a function of the clique's stacked blocks, outsiders frozen at ``zs``.

        Returns a callable v -> (value, gradient).
        """
        b = self.base
        members = self.partition[i]
        L = _selectors(self)
        inside = set(members)
        terms = []
        for j in members:
            ic = b.internal[j]
            if ic is not None:
                terms.append((ic.g, ic.R @ L[j], -ic.s))
            for k in b.neighbors(j):
                pc = b.pairwise[(j, k)]
                if k in inside:
                    terms.append((pc.f, pc.A @ L[j] + pc.B @ L[k], np.zeros(pc.f.d_in)))
                else:
                    terms.append((pc.f, pc.A @ L[j], pc.B @ zs[k]))
        return compile_objective(terms, self.dims[i])

    def clique_gradient_blocks(self, i: int, zs) -> list[np.ndarray]:
        """Gradient of q_i with respect to each member's block, in member order."""
        b = self.base
        members = self.partition[i]
        grads = []
        for j in members:
            g = b.person_gradient_blocks(j, zs)
            for k in members:
                pc = b.pairwise.get((k, j))
                if k != j and pc is not None:
                    g = g + pc.B.T @ pc.f._grad(pc.A @ zs[k] + pc.B @ zs[j])
            grads.append(g)
        return grads


def clique_cost(cgame: CliqueGame, i: int, z) -> float:
    return cgame.clique_cost(i, z)


def _selectors(cgame: CliqueGame) -> dict[int, np.ndarray]:
    """L_j: the 0/1 matrix picking z_j out of its clique's stacked vector."""
    out = {}
    for c in cgame.partition:
        total = sum(cgame.base.dims[j] for j in c)
        pos = 0
        for j in c:
            m = cgame.base.dims[j]
            L = np.zeros((m, total))
            L[:, pos:pos + m] = np.eye(m)
            out[j] = L
            pos += m
    return out


def _segment_selectors(sizes: list[int]) -> list[np.ndarray]:
    total = sum(sizes)
    out, pos = [], 0
    for d in sizes:
        M = np.zeros((d, total))
        M[:, pos:pos + d] = np.eye(d)
        out.append(M)
        pos += d
    return out


def reduce_clique(cgame: CliqueGame) -> HeterogeneousGame:
    """Flatten a clique game into a t-person heterogeneous game.

    Person i of the result holds the stacked opinions of clique i (members in
    ascending order).  Its internal cost collects the members' internal costs
    and all intra-clique pairwise costs, with R' = I and s' = 0; pairwise costs
    between cliques are sums over member pairs, each reading its own segment of
    a stacked argument.  Profiles convert with ``cgame.to_reduced``.
    """
    b = cgame.base
    rep = b.check_symmetric()
    if not rep:
        raise AsymmetricGameError(f"base game is not symmetric at {rep.pair}: {rep.reason}")
    L = _selectors(cgame)
    dims = cgame.dims

    internal = []
    for i, c in enumerate(cgame.partition):
        terms = []
        for j in c:
            ic = b.internal[j]
            if ic is not None:
                terms.append(AffinePre(ic.R @ L[j], -ic.s, ic.g))
        for j in c:
            for k in c:
                pc = b.pairwise.get((j, k))
                if j != k and pc is not None:
                    terms.append(AffinePre(pc.A @ L[j] + pc.B @ L[k], None, pc.f))
        if terms:
            g = terms[0] if len(terms) == 1 else Sum(terms)
            internal.append(InternalCost(g, np.eye(dims[i]), np.zeros(dims[i])))
        else:
            internal.append(None)

    pairwise = {}
    for i, ci in enumerate(cgame.partition):
        for l, cl in enumerate(cgame.partition):
            if l <= i:
                continue
            pairs = [(j, k) for j in ci for k in cl if (j, k) in b.pairwise]
            if not pairs:
                continue
            sizes = [b.pairwise[p].f.d_in for p in pairs]
            sel = _segment_selectors(sizes)
            f_il = [AffinePre(M, None, b.pairwise[(j, k)].f) for M, (j, k) in zip(sel, pairs)]
            f_li = [AffinePre(M, None, b.pairwise[(k, j)].f) for M, (j, k) in zip(sel, pairs)]
            A_il = np.vstack([b.pairwise[(j, k)].A @ L[j] for j, k in pairs])
            B_il = np.vstack([b.pairwise[(j, k)].B @ L[k] for j, k in pairs])
            A_li = np.vstack([b.pairwise[(k, j)].A @ L[k] for j, k in pairs])
            B_li = np.vstack([b.pairwise[(k, j)].B @ L[j] for j, k in pairs])
            pairwise[(i, l)] = PairCost(f_il[0] if len(f_il) == 1 else Sum(f_il), A_il, B_il)
            pairwise[(l, i)] = PairCost(f_li[0] if len(f_li) == 1 else Sum(f_li), A_li, B_li)
    return HeterogeneousGame(dims, internal, pairwise)


def nash_clique(cgame: CliqueGame, z0=None, inner_tol: float = 1e-11, outer_tol: float = 1e-10,
                max_rounds: int = 10_000, max_inner: int = 100_000) -> SolveResult:
    """Round-robin over cliques; each clique runs gradient descent on q_i jointly
    over its members' blocks.  Inner tolerances follow the same schedule as
    ``nash_general``.  The returned profile uses the base game's layout."""
    b = cgame.base
    rep = b.check_symmetric()
    if not rep:
        raise AsymmetricGameError(f"base game is not symmetric at {rep.pair}: {rep.reason}")
    if not b.convex:
        raise NonConvexError("game contains a non-convex cost function")
    z = np.zeros(b.size) if z0 is None else b.check_profile(z0).copy()
    zs = [blk.copy() for blk in b.blocks(z)]
    moved = np.inf
    for rnd in range(1, max_rounds + 1):
        tol_r = max(inner_tol, min(1e-3, 1e-2 * moved))
        moved = 0.0
        for i, c in enumerate(cgame.partition):
            sizes = [b.dims[j] for j in c]
            cuts = np.cumsum(sizes)[:-1]

            def load(v, c=c, cuts=cuts):
                for j, part in zip(c, np.split(v, cuts)):
                    zs[j] = part

            old = np.concatenate([zs[j] for j in c])
            res = gradient_descent(cgame.clique_objective(i, zs), old, tol=tol_r,
                                   max_iter=max_inner)
            load(res.z.copy())
            moved = max(moved, float(np.abs(res.z - old).max()) if old.size else 0.0)
        if moved <= outer_tol and tol_r <= max(inner_tol, outer_tol):
            z = b.stack(zs)
            resid = clique_residual(cgame, z)
            if resid <= 10 * outer_tol:
                return SolveResult(z, rnd, True, resid)
    z = b.stack(zs)
    return SolveResult(z, max_rounds, False, clique_residual(cgame, z), "max_rounds exceeded")


def clique_residual(cgame: CliqueGame, z) -> float:
    """max over cliques i and members j of ||grad_j q_i(z)||_inf."""
    zs = cgame.base.blocks(z)
    res = 0.0
    for i in range(cgame.t):
        for g in cgame.clique_gradient_blocks(i, zs):
            if g.size:
                res = max(res, float(np.abs(g).max()))
    return res
