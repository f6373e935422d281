"""
Game data model: heterogeneous, quadratic and FJ-derived opinion games.

Opinion profiles are flat float arrays; ``game.blocks(z)`` splits one into the
per-person blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from .cost_fn import CostFunction, DimensionError, QuadraticForm, Scale, structurally_equal

PSD_TOL = 1e-10


class NotPSDError(ValueError):
    """A matrix that must be positive semidefinite (or definite) is not."""


class AsymmetricGameError(ValueError):
    """An operation that needs a symmetric game received an asymmetric one."""


def psd_sqrt(A, name: str = "matrix") -> np.ndarray:
    """Symmetric square root; eigenvalues in [-1e-10, 0] are clamped, lower ones rejected."""
    A = np.asarray(A, dtype=float)
    if not np.allclose(A, A.T, atol=1e-12, rtol=0):
        raise NotPSDError(f"{name} is not symmetric")
    vals, vecs = np.linalg.eigh(0.5 * (A + A.T))
    if vals.size and vals.min() < -PSD_TOL:
        raise NotPSDError(f"{name} has eigenvalue {vals.min():.3g} < 0")
    vals = np.clip(vals, 0.0, None)
    return (vecs * np.sqrt(vals)) @ vecs.T


def is_psd(A, tol: float = PSD_TOL) -> bool:
    A = np.asarray(A, dtype=float)
    return np.allclose(A, A.T, atol=1e-12, rtol=0) and np.linalg.eigvalsh(A).min() >= -tol


def is_pd(A, tol: float = PSD_TOL) -> bool:
    A = np.asarray(A, dtype=float)
    return np.allclose(A, A.T, atol=1e-12, rtol=0) and np.linalg.eigvalsh(A).min() > tol


@dataclass
class SymmetryReport:
    passed: bool
    pair: tuple[int, int] | None = None
    reason: str = ""

    def __bool__(self):
        return self.passed


class _ProfileMixin:
    dims: list[int]

    @property
    def n(self) -> int:
        return len(self.dims)

    @property
    def offsets(self) -> list[int]:
        cached = self.__dict__.get("_offsets")
        if cached is None or cached[0] != self.dims:
            off = [0]
            for m in self.dims:
                off.append(off[-1] + m)
            cached = (list(self.dims), off)
            self.__dict__["_offsets"] = cached
        return cached[1]

    @property
    def size(self) -> int:
        return int(sum(self.dims))

    def block(self, z, i: int) -> np.ndarray:
        o = self.offsets
        return z[o[i]:o[i + 1]]

    def blocks(self, z) -> list[np.ndarray]:
        z = self.check_profile(z)
        o = self.offsets
        return [z[o[i]:o[i + 1]] for i in range(self.n)]

    def stack(self, blocks) -> np.ndarray:
        return np.concatenate([np.atleast_1d(np.asarray(b, dtype=float)) for b in blocks])

    def check_profile(self, z) -> np.ndarray:
        z = np.atleast_1d(np.asarray(z, dtype=float))
        if z.ndim != 1 or z.size != self.size:
            raise DimensionError(f"profile has {z.size} entries, game expects {self.size}")
        return z

    def social_cost(self, z) -> float:
        z = self.check_profile(z)
        return sum(self.person_cost(i, z) for i in range(self.n))

    def person_cost(self, i: int, z) -> float:
        raise NotImplementedError


# ---------------------------------------------------------------------------
# heterogeneous game
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class InternalCost:
    g: CostFunction
    R: np.ndarray
    s: np.ndarray


@dataclass(eq=False)
class PairCost:
    f: CostFunction
    A: np.ndarray
    B: np.ndarray


@dataclass(eq=False)
class HeterogeneousGame(_ProfileMixin):
    """c_i(z) = g_i(R_i z_i - s_i) + sum_{j != i} f_ij(A_ij z_i + B_ij z_j).

    ``internal[i]`` may be None (zero internal cost); absent pairs cost nothing.
    """

    dims: list[int]
    internal: list[InternalCost | None]
    pairwise: dict[tuple[int, int], PairCost] = field(default_factory=dict)

    def __post_init__(self):
        self.dims = [int(m) for m in self.dims]
        if len(self.internal) != self.n:
            raise DimensionError("one internal cost entry per person is required")
        for i, ic in enumerate(self.internal):
            if ic is None:
                continue
            ic.R = np.atleast_2d(np.asarray(ic.R, dtype=float))
            ic.s = np.atleast_1d(np.asarray(ic.s, dtype=float))
            e = ic.g.d_in
            if ic.R.shape != (e, self.dims[i]) or ic.s.shape != (e,):
                raise DimensionError(f"person {i}: R must be {e}x{self.dims[i]}, s length {e}")
        for (i, j), pc in self.pairwise.items():
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise DimensionError(f"bad pair ({i}, {j})")
            pc.A = np.atleast_2d(np.asarray(pc.A, dtype=float))
            pc.B = np.atleast_2d(np.asarray(pc.B, dtype=float))
            d = pc.f.d_in
            if pc.A.shape != (d, self.dims[i]) or pc.B.shape != (d, self.dims[j]):
                raise DimensionError(
                    f"pair ({i}, {j}): A must be {d}x{self.dims[i]}, B {d}x{self.dims[j]}"
                )
        self._nbrs = [[] for _ in range(self.n)]
        for (i, j) in sorted(self.pairwise):
            self._nbrs[i].append(j)

    def neighbors(self, i: int) -> list[int]:
        return self._nbrs[i]

    def cost_functions(self) -> Iterator[tuple[str, tuple, CostFunction]]:
        for i, ic in enumerate(self.internal):
            if ic is not None:
                yield "g", (i,), ic.g
        for key in sorted(self.pairwise):
            yield "f", key, self.pairwise[key].f

    @property
    def convex(self) -> bool:
        return all(f.convex for _, _, f in self.cost_functions())

    def person_cost_blocks(self, i: int, zs: list[np.ndarray]) -> float:
        total = 0.0
        ic = self.internal[i]
        if ic is not None:
            total += ic.g._eval(ic.R @ zs[i] - ic.s)
        for j in self._nbrs[i]:
            pc = self.pairwise[(i, j)]
            total += pc.f._eval(pc.A @ zs[i] + pc.B @ zs[j])
        return float(total)

    def person_gradient_blocks(self, i: int, zs: list[np.ndarray]) -> np.ndarray:
        g = np.zeros(self.dims[i])
        ic = self.internal[i]
        if ic is not None:
            g += ic.R.T @ ic.g._grad(ic.R @ zs[i] - ic.s)
        for j in self._nbrs[i]:
            pc = self.pairwise[(i, j)]
            g += pc.A.T @ pc.f._grad(pc.A @ zs[i] + pc.B @ zs[j])
        return g

    def person_objective(self, i: int, zs: list[np.ndarray]):
        """c_i as a function of z_i alone, others frozen at ``zs``.

        Returns a callable v -> (value, gradient); partner contributions
        B_ij z_j are computed once up front.
        """
        terms = []
        ic = self.internal[i]
        if ic is not None:
            terms.append((ic.g, ic.R, -ic.s))
        for j in self._nbrs[i]:
            pc = self.pairwise[(i, j)]
            terms.append((pc.f, pc.A, pc.B @ zs[j]))
        return compile_objective(terms, self.dims[i])

    def person_cost(self, i: int, z) -> float:
        return self.person_cost_blocks(i, self.blocks(z))

    def person_gradient(self, i: int, z) -> np.ndarray:
        return self.person_gradient_blocks(i, self.blocks(z))

    def social_objective(self, z) -> tuple[float, np.ndarray]:
        """SC(z) and its gradient in one pass."""
        zs = self.blocks(z)
        total = 0.0
        out = [np.zeros(m) for m in self.dims]
        for i, ic in enumerate(self.internal):
            if ic is not None:
                val, g = ic.g._eval_grad(ic.R @ zs[i] - ic.s)
                total += val
                out[i] += ic.R.T @ g
        for (i, j), pc in self.pairwise.items():
            val, gf = pc.f._eval_grad(pc.A @ zs[i] + pc.B @ zs[j])
            total += val
            out[i] += pc.A.T @ gf
            out[j] += pc.B.T @ gf
        return float(total), self.stack(out)

    def social_gradient(self, z) -> np.ndarray:
        """Gradient of SC with respect to the whole profile."""
        zs = self.blocks(z)
        out = [np.zeros(m) for m in self.dims]
        for i, ic in enumerate(self.internal):
            if ic is not None:
                out[i] += ic.R.T @ ic.g._grad(ic.R @ zs[i] - ic.s)
        for (i, j), pc in self.pairwise.items():
            gf = pc.f._grad(pc.A @ zs[i] + pc.B @ zs[j])
            out[i] += pc.A.T @ gf
            out[j] += pc.B.T @ gf
        return self.stack(out)

    def check_symmetric(self) -> SymmetryReport:
        for (i, j) in sorted(self.pairwise):
            if (j, i) not in self.pairwise:
                return SymmetryReport(False, (i, j), "reverse pair missing")
            a, b = self.pairwise[(i, j)], self.pairwise[(j, i)]
            if a.f.d_in != b.f.d_in:
                return SymmetryReport(False, (i, j), "d_ij != d_ji")
            if not structurally_equal(a.f, b.f):
                return SymmetryReport(False, (i, j), "f_ij differs from f_ji")
            if not (np.array_equal(a.A, b.B) and np.array_equal(a.B, b.A)):
                return SymmetryReport(False, (i, j), "A_ij != B_ji or B_ij != A_ji")
        return SymmetryReport(True)


def _as_quadratic(f: CostFunction):
    """Matrix S with f(u) = ||S u||^2, or None when f is not of that form."""
    if isinstance(f, QuadraticForm):
        return f.M
    if isinstance(f, Scale) and isinstance(f.f, QuadraticForm):
        return np.sqrt(f.w) * f.f.M
    return None


def compile_objective(terms, dim: int):
    """v -> (sum_k f_k(A_k v + c_k), gradient) for terms (f_k, A_k, c_k).

    Quadratic-form terms are merged into one ||S v + t||^2, which is the same
    function with far fewer small matrix products per evaluation.
    """
    quad_S, quad_t, rest = [], [], []
    for f, A, c in terms:
        M = _as_quadratic(f)
        if M is None:
            rest.append((f, A, c))
        else:
            quad_S.append(M @ A)
            quad_t.append(M @ c)
    S = np.vstack(quad_S) if quad_S else None
    t = np.concatenate(quad_t) if quad_t else None

    def fg(v):
        total, g = 0.0, np.zeros(dim)
        if S is not None:
            u = S @ v + t
            total += u @ u
            g += 2.0 * (S.T @ u)
        for f, A, c in rest:
            val, gf = f._eval_grad(A @ v + c)
            total += val
            g += A.T @ gf
        return float(total), g

    return fg


def check_symmetric(game) -> SymmetryReport:
    return game.check_symmetric()


def person_cost(game, i: int, z) -> float:
    return game.person_cost(i, z)


def social_cost(game, z) -> float:
    return game.social_cost(z)


def person_gradient(game, i: int, z) -> np.ndarray:
    return game.person_gradient(i, z)


# ---------------------------------------------------------------------------
# quadratic game
# ---------------------------------------------------------------------------


@dataclass(eq=False)
class QuadraticGame(_ProfileMixin):
    """c_i(z) = (z_i - s_i)' R_i (z_i - s_i) + sum_j (z_i - z_j)' W_ij (z_i - z_j).

    ``W`` maps ordered pairs to m x m matrices; absent pairs are zero.  With
    ``unsafe_indefinite`` the PSD checks on W and R are skipped, which is only
    meant for reproducing the no-equilibrium example.
    """

    m: int
    R: list[np.ndarray]
    s: list[np.ndarray]
    W: dict[tuple[int, int], np.ndarray] = field(default_factory=dict)
    unsafe_indefinite: bool = False

    def __post_init__(self):
        m = self.m = int(self.m)
        self.R = [np.asarray(r, dtype=float).reshape(m, m) for r in self.R]
        self.s = [np.asarray(v, dtype=float).reshape(m) for v in self.s]
        if len(self.R) != len(self.s):
            raise DimensionError("R and s must list one entry per person")
        self.dims = [m] * len(self.R)
        W = {}
        for (i, j), w in self.W.items():
            if i == j or not (0 <= i < self.n and 0 <= j < self.n):
                raise DimensionError(f"bad edge ({i}, {j})")
            W[(int(i), int(j))] = np.asarray(w, dtype=float).reshape(m, m)
        self.W = W
        if not self.unsafe_indefinite:
            for (i, j), w in W.items():
                if not is_psd(w):
                    raise NotPSDError(f"W[{i},{j}] is not symmetric PSD")
            for i, r in enumerate(self.R):
                if not is_psd(r):
                    raise NotPSDError(f"R[{i}] is not symmetric PSD")
        self.pd_flags = [bool(np.linalg.eigvalsh(0.5 * (r + r.T)).min() > PSD_TOL) for r in self.R]
        self._nbrs = [[] for _ in range(self.n)]
        for (i, j) in sorted(W):
            self._nbrs[i].append(j)

    def neighbors(self, i: int) -> list[int]:
        return self._nbrs[i]

    @property
    def all_pd(self) -> bool:
        return all(self.pd_flags)

    def weight_sum(self, i: int) -> np.ndarray:
        out = np.zeros((self.m, self.m))
        for j in self._nbrs[i]:
            out += self.W[(i, j)]
        return out

    def person_cost(self, i: int, z) -> float:
        zs = self.blocks(z)
        d = zs[i] - self.s[i]
        total = d @ self.R[i] @ d
        for j in self._nbrs[i]:
            e = zs[i] - zs[j]
            total += e @ self.W[(i, j)] @ e
        return float(total)

    def person_gradient(self, i: int, z) -> np.ndarray:
        zs = self.blocks(z)
        g = 2.0 * self.R[i] @ (zs[i] - self.s[i])
        for j in self._nbrs[i]:
            g += 2.0 * self.W[(i, j)] @ (zs[i] - zs[j])
        return g

    def check_symmetric(self) -> SymmetryReport:
        for (i, j) in sorted(self.W):
            other = self.W.get((j, i))
            if other is None:
                if np.any(self.W[(i, j)] != 0):
                    return SymmetryReport(False, (i, j), "reverse edge missing")
                continue
            if not np.array_equal(self.W[(i, j)], other):
                return SymmetryReport(False, (i, j), "W_ij != W_ji")
        return SymmetryReport(True)

    # block matrices ---------------------------------------------------------

    def block_R(self) -> np.ndarray:
        from scipy.linalg import block_diag
        return block_diag(*self.R) if self.n else np.zeros((0, 0))

    def block_W(self) -> np.ndarray:
        m = self.m
        out = np.zeros((self.size, self.size))
        for (i, j), w in self.W.items():
            out[i * m:(i + 1) * m, j * m:(j + 1) * m] = w
        return out

    def block_L(self) -> np.ndarray:
        m = self.m
        L = -self.block_W()
        for i in range(self.n):
            L[i * m:(i + 1) * m, i * m:(i + 1) * m] = self.weight_sum(i)
        return L

    def stacked_s(self) -> np.ndarray:
        return self.stack(self.s) if self.n else np.zeros(0)


def quadratic_to_heterogeneous(q: QuadraticGame) -> HeterogeneousGame:
    """f_ij = ||W_ij^(1/2) x||^2 on A = I, B = -I; g_i = ||R_i^(1/2) x||^2 with R-slot I."""
    m = q.m
    eye = np.eye(m)
    internal = [
        InternalCost(QuadraticForm(psd_sqrt(q.R[i], f"R[{i}]")), eye.copy(), q.s[i].copy())
        for i in range(q.n)
    ]
    pairwise = {}
    for (i, j), w in q.W.items():
        pairwise[(i, j)] = PairCost(QuadraticForm(psd_sqrt(w, f"W[{i},{j}]")), eye.copy(), -eye)
    # keep f_ij and f_ji literally identical when W_ij == W_ji
    for (i, j) in pairwise:
        if (j, i) in pairwise and i > j and np.array_equal(q.W[(i, j)], q.W[(j, i)]):
            pairwise[(i, j)].f = pairwise[(j, i)].f
            pairwise[(i, j)].A, pairwise[(i, j)].B = pairwise[(j, i)].B.copy(), pairwise[(j, i)].A.copy()
    return HeterogeneousGame(list(q.dims), internal, pairwise)


def fj_to_quadratic(r, s, w, C) -> QuadraticGame:
    """Multidimensional FJ instance as a quadratic game.

    W_ij = w_ij C, R_i = (r_i + sum_j w_ij) I - sum_j w_ij C, and internal
    opinion R_i^{-1} r_i s_i.  ``w`` is a dict over ordered pairs or an n x n array.
    """
    C = np.atleast_2d(np.asarray(C, dtype=float))
    m = C.shape[0]
    r = np.asarray(r, dtype=float)
    n = r.size
    if not np.allclose(C, C.T, atol=1e-12):
        raise ValueError("C must be symmetric")
    if not np.allclose(C.sum(axis=1), 1.0, atol=1e-12):
        raise ValueError("C must be row-stochastic")
    if np.linalg.eigvalsh(C).min() < -PSD_TOL:
        raise NotPSDError("C must be positive semidefinite")
    if np.any(r <= 0):
        raise ValueError("every r_i must be positive")
    if isinstance(w, dict):
        weights = {(int(i), int(j)): float(v) for (i, j), v in w.items()}
    else:
        w = np.asarray(w, dtype=float)
        weights = {(i, j): float(w[i, j]) for i in range(n) for j in range(n) if w[i, j] != 0}
    if any(i == j for (i, j) in weights):
        raise ValueError("self-loops are not allowed")
    if any(v < 0 for v in weights.values()):
        raise ValueError("edge weights must be nonnegative")
    s = [np.asarray(v, dtype=float).reshape(m) for v in s]
    eye = np.eye(m)
    R, s_new = [], []
    for i in range(n):
        tot = sum(v for (a, _), v in weights.items() if a == i)
        Ri = (r[i] + tot) * eye - tot * C
        if not is_pd(Ri):
            raise NotPSDError(f"R[{i}] is not positive definite")
        R.append(Ri)
        s_new.append(np.linalg.solve(Ri, r[i] * s[i]))
    W = {k: v * C for k, v in weights.items()}
    return QuadraticGame(m, R, s_new, W)


def fj_cost(i: int, z, r, s, w) -> float:
    """Scalar FJ cost r_i (z_i - s_i)^2 + sum_j w_ij (z_i - z_j)^2."""
    z = np.asarray(z, dtype=float)
    w = np.asarray(w, dtype=float)
    return float(r[i] * (z[i] - s[i]) ** 2 + sum(w[i, j] * (z[i] - z[j]) ** 2 for j in range(len(z))))


def scalar_quadratic(r, s, w, unsafe_indefinite: bool = False) -> QuadraticGame:
    """Convenience constructor for m = 1 games from scalar weights."""
    r = np.asarray(r, dtype=float)
    n = r.size
    if isinstance(w, dict):
        W = {k: [[v]] for k, v in w.items()}
    else:
        w = np.asarray(w, dtype=float)
        W = {(i, j): [[w[i, j]]] for i in range(n) for j in range(n) if i != j and w[i, j] != 0}
    return QuadraticGame(1, [[[v]] for v in r], [[v] for v in s], W,
                         unsafe_indefinite=unsafe_indefinite)


def symmetric_edges(pairs: dict[tuple[int, int], object]) -> dict:
    """Mirror every (i, j) entry to (j, i)."""
    out = dict(pairs)
    for (i, j), v in pairs.items():
        out.setdefault((j, i), v)
    return out

