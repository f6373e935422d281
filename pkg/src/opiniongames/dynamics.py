"""
Best-response dynamics for quadratic games.

Updates are simultaneous: every person moves to the minimizer of their own cost
given everybody else's previous opinion, i.e. ``z <- Lam W z + Lam R s``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import block_diag

from .game import AsymmetricGameError, NotPSDError, QuadraticGame, is_pd

DIVERGENCE_FACTOR = 1e6


@dataclass(eq=False)
class BlockSystem:
    Lam: np.ndarray
    W: np.ndarray
    R: np.ndarray
    L: np.ndarray
    s: np.ndarray

    @property
    def iteration_matrix(self) -> np.ndarray:
        return self.Lam @ self.W

    @property
    def offset(self) -> np.ndarray:
        return self.Lam @ self.R @ self.s


def _hessian_blocks(q: QuadraticGame) -> list[np.ndarray]:
    return [q.R[i] + q.weight_sum(i) for i in range(q.n)]


def _require_pd(q: QuadraticGame) -> None:
    if q.unsafe_indefinite:
        for i, M in enumerate(_hessian_blocks(q)):
            if abs(np.linalg.det(M)) < 1e-14:
                raise NotPSDError(f"R[{i}] + sum_j W[{i},j] is singular")
        return
    bad = [i for i, ok in enumerate(q.pd_flags) if not ok]
    if bad:
        raise NotPSDError(f"R_i must be positive definite; fails for persons {bad}")


def block_system(q: QuadraticGame) -> BlockSystem:
    _require_pd(q)
    lam = block_diag(*[np.linalg.inv(M) for M in _hessian_blocks(q)]) if q.n else np.zeros((0, 0))
    return BlockSystem(lam, q.block_W(), q.block_R(), q.block_L(), q.stacked_s())


def best_response_step(q: QuadraticGame, z) -> np.ndarray:
    """z_i <- (R_i + sum_j W_ij)^-1 (R_i s_i + sum_j W_ij z_j) for all i at once."""
    _require_pd(q)
    zs = q.blocks(z)
    out = []
    for i, M in enumerate(_hessian_blocks(q)):
        rhs = q.R[i] @ q.s[i]
        for j in q.neighbors(i):
            rhs = rhs + q.W[(i, j)] @ zs[j]
        out.append(np.linalg.solve(M, rhs))
    return q.stack(out) if out else np.zeros(0)


@dataclass
class SimulationResult:
    status: str  # "converged" | "diverged" | "max_iter_reached"
    z: np.ndarray
    iters: int
    reason: str = ""
    trajectory: list[tuple[int, np.ndarray]] = field(default_factory=list)

    @property
    def converged(self) -> bool:
        return self.status == "converged"


def simulate(q: QuadraticGame, z0=None, tol: float = 1e-10, max_iter: int = 10_000,
             record_stride: int | None = None, detect_unbounded: bool = True) -> SimulationResult:
    """Iterate best responses until the sup-norm step drops below ``tol``.

    Divergence is declared once ``||z||_inf`` exceeds 1e6 (1 + ||z0||_inf + ||s||_inf).
    With ``detect_unbounded`` an indefinite game whose per-person Hessian
    R_i + sum_j W_ij has a negative eigenvalue is reported as diverged straight
    away: that person's cost is unbounded below, so no best response exists.
    """
    _require_pd(q)
    z = np.zeros(q.size) if z0 is None else q.check_profile(z0).copy()
    traj = [(0, z.copy())] if record_stride else []
    if detect_unbounded and q.unsafe_indefinite:
        for i, M in enumerate(_hessian_blocks(q)):
            if np.linalg.eigvalsh(0.5 * (M + M.T)).min() < 0:
                return SimulationResult("diverged", z, 0, f"person {i} has no best response "
                                        "(own cost unbounded below)", traj)
    s_inf = max((np.abs(v).max() for v in q.s), default=0.0)
    z0_inf = np.abs(z).max() if z.size else 0.0
    limit = DIVERGENCE_FACTOR * (1.0 + z0_inf + s_inf)
    sys_ = block_system(q)
    T, c = sys_.iteration_matrix, sys_.offset
    for t in range(1, max_iter + 1):
        z_new = T @ z + c
        step = np.abs(z_new - z).max() if z.size else 0.0
        z = z_new
        if record_stride and t % record_stride == 0:
            traj.append((t, z.copy()))
        if z.size and np.abs(z).max() > limit:
            return SimulationResult("diverged", z, t, "iterates blew up", traj)
        if step <= tol:
            if record_stride and t % record_stride:
                traj.append((t, z.copy()))
            return SimulationResult("converged", z, t, "", traj)
    return SimulationResult("max_iter_reached", z, max_iter, "", traj)


def write_trajectory_csv(q: QuadraticGame, result: SimulationResult, fh) -> None:
    """Rows of iter, person, component, value."""
    w = csv.writer(fh)
    w.writerow(["iter", "person", "component", "value"])
    for t, z in result.trajectory:
        for i, block in enumerate(q.blocks(z)):
            for k, v in enumerate(block):
                w.writerow([t, i, k, repr(float(v))])


@dataclass
class NormalizationReport:
    passed: bool
    person: int | None = None
    deviation: float = 0.0

    def __bool__(self):
        return self.passed


def is_weight_normalized(q: QuadraticGame, tol: float = 1e-10) -> NormalizationReport:
    eye = np.eye(q.m)
    worst = 0.0
    for i in range(q.n):
        dev = float(np.abs(q.weight_sum(i) - eye).max())
        worst = max(worst, dev)
        if dev > tol:
            return NormalizationReport(False, i, dev)
    return NormalizationReport(True, None, worst)


def _require_undirected(q: QuadraticGame) -> None:
    rep = q.check_symmetric()
    if not rep:
        raise AsymmetricGameError(f"game is not undirected at {rep.pair}: {rep.reason}")


def clone_transform(q: QuadraticGame, d: float | str = "auto") -> QuadraticGame:
    """Double the game, tie each person to its copy with weight dI - sum_j W_ij,
    then divide every weight and R_i by d.  The result is weight-normalized."""
    _require_undirected(q)
    _require_pd(q)
    sums = [q.weight_sum(i) for i in range(q.n)]
    if d == "auto":
        d = max((np.linalg.eigvalsh(S).max() for S in sums), default=0.0) + 1.0
    d = float(d)
    eye = np.eye(q.m)
    cross = []
    for i, S in enumerate(sums):
        C = d * eye - S
        if not is_pd(C):
            raise ValueError(f"d={d} too small: dI - sum_j W[{i},j] is not positive definite")
        cross.append(C)
    n = q.n
    W = {}
    for (i, j), w in q.W.items():
        W[(i, j)] = w / d
        W[(i + n, j + n)] = w / d
    for i, C in enumerate(cross):
        W[(i, i + n)] = C / d
        W[(i + n, i)] = C / d
    R = [r / d for r in q.R] * 2
    s = [v.copy() for v in q.s] * 2
    return QuadraticGame(q.m, R, s, W)


def spectral_radius(q: QuadraticGame) -> float:
    """rho(Lam W) through the symmetric similarity Lam^(1/2) W Lam^(1/2)."""
    _require_undirected(q)
    if not q.all_pd:
        raise NotPSDError("spectral_radius needs every R_i positive definite")
    if q.n == 0:
        return 0.0
    halves = []
    for M in _hessian_blocks(q):
        vals, vecs = np.linalg.eigh(M)
        halves.append((vecs / np.sqrt(vals)) @ vecs.T)
    H = block_diag(*halves)
    S = H @ q.block_W() @ H
    return float(np.abs(np.linalg.eigvalsh(0.5 * (S + S.T))).max())
