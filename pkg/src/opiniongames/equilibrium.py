"""
Nash equilibria, social optima, price of anarchy and suitability-based upper bounds.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import linalg

from .cost_fn import (
    CertificateError,
    SamplingSpec,
    SuitabilityCertificate,
    certify,
    verify_suitability,
)
from .game import (
    AsymmetricGameError,
    HeterogeneousGame,
    NotPSDError,
    QuadraticGame,
    quadratic_to_heterogeneous,
)

log = logging.getLogger(__name__)

SC_FLOOR = 1e-12


class SolverError(RuntimeError):
    """An iterative solver stopped without meeting its tolerance."""


class NonConvexError(ValueError):
    """Gradient-based equilibrium logic was asked to handle a non-convex cost."""


@dataclass
class SolveResult:
    z: np.ndarray
    iters: int
    converged: bool
    residual: float = 0.0
    message: str = ""


# ---------------------------------------------------------------------------
# generic descent
# ---------------------------------------------------------------------------


def gradient_descent(fg: Callable, x0, tol: float = 1e-10, max_iter: int = 100_000,
                     step0: float = 1.0, shrink: float = 0.5, slope: float = 1e-4) -> SolveResult:
    """Steepest descent with Armijo backtracking; stops when ||grad||_inf <= tol.

    ``fg(x)`` returns the value and gradient.  The first trial step is
    ``step0``; later ones use the Barzilai-Borwein length s's / s'y of the
    previous move, which is then backtracked as usual.  Once f stops changing
    at round-off level, a step is accepted when it shrinks the gradient instead.
    """
    x = np.array(x0, dtype=float)
    fx, g = fg(x)
    gnorm = np.abs(g).max() if g.size else 0.0
    trial = step0
    for k in range(max_iter):
        if gnorm <= tol:
            return SolveResult(x, k, True, gnorm)
        gg = g @ g
        t = trial
        while True:
            x_new = x - t * g
            f_new, g_new = fg(x_new)
            if f_new <= fx - slope * t * gg:
                break
            if abs(f_new - fx) <= 1e-13 * max(1.0, abs(fx)) and np.abs(g_new).max() < gnorm:
                break
            t *= shrink
            if t < 1e-20:
                return SolveResult(x, k, False, gnorm, "line search stalled")
        s_vec, y_vec = x_new - x, g_new - g
        sy = s_vec @ y_vec
        trial = min(max((s_vec @ s_vec) / sy, 1e-10), 1e10) if sy > 0 else step0
        x, fx, g = x_new, f_new, g_new
        gnorm = np.abs(g).max()
    return SolveResult(x, max_iter, gnorm <= tol, gnorm, "max_iter reached")


# ---------------------------------------------------------------------------
# quadratic closed forms
# ---------------------------------------------------------------------------


def _check_quadratic(q: QuadraticGame) -> None:
    rep = q.check_symmetric()
    if not rep:
        raise AsymmetricGameError(f"game is not undirected at {rep.pair}: {rep.reason}")
    if q.unsafe_indefinite:
        raise NotPSDError("closed-form solves need PSD weights")
    if not q.all_pd:
        raise NotPSDError("closed-form solves need every R_i positive definite")


def nash_quadratic(q: QuadraticGame) -> np.ndarray:
    """Unique equilibrium x = (R + L)^-1 R s."""
    _check_quadratic(q)
    R, L, s = q.block_R(), q.block_L(), q.stacked_s()
    rhs = R @ s
    x = linalg.solve(R + L, rhs, assume_a="pos")
    res = np.abs((R + L) @ x - rhs).max() if x.size else 0.0
    scale = np.abs(rhs).max() if rhs.size else 0.0
    if res > 1e-9 * max(scale, 1e-300) and res > 1e-14:
        raise SolverError(f"Nash solve residual {res:.3g} too large")
    return x


def optimum_quadratic(q: QuadraticGame) -> np.ndarray:
    """Social optimum y = (R + 2L)^-1 R s, since SC = (z-s)'R(z-s) + 2 z'Lz."""
    _check_quadratic(q)
    R, L, s = q.block_R(), q.block_L(), q.stacked_s()
    return linalg.solve(R + 2.0 * L, R @ s, assume_a="pos")


# ---------------------------------------------------------------------------
# general games
# ---------------------------------------------------------------------------


def _as_heterogeneous(game) -> HeterogeneousGame:
    if isinstance(game, QuadraticGame):
        return quadratic_to_heterogeneous(game)
    return game


def _check_general(game: HeterogeneousGame) -> None:
    rep = game.check_symmetric()
    if not rep:
        raise AsymmetricGameError(f"game is not symmetric at {rep.pair}: {rep.reason}")
    if not game.convex:
        raise NonConvexError("game contains a non-convex cost function")


def nash_general(game, z0=None, inner_tol: float = 1e-11, outer_tol: float = 1e-10,
                 max_rounds: int = 10_000, max_inner: int = 100_000) -> SolveResult:
    """Round-robin best response; each person runs gradient descent on their own cost.

    Stops when a full round moves no block by more than ``outer_tol`` (sup norm)
    and the stationarity residual is at most ``10 * outer_tol``.
    Early rounds solve the inner problems loosely, to 1e-2 times the previous
    round's largest move; the final rounds always run at ``inner_tol``.
    A run that hits ``max_rounds`` returns its last iterate with converged=False.
    """
    game = _as_heterogeneous(game)
    _check_general(game)
    z = np.zeros(game.size) if z0 is None else game.check_profile(z0).copy()
    zs = [b.copy() for b in game.blocks(z)]
    moved = np.inf
    for rnd in range(1, max_rounds + 1):
        tol_r = max(inner_tol, min(1e-3, 1e-2 * moved))
        moved = 0.0
        for i in range(game.n):
            old = zs[i].copy()
            res = gradient_descent(game.person_objective(i, zs), old, tol=tol_r,
                                   max_iter=max_inner)
            zs[i] = res.z
            moved = max(moved, float(np.abs(res.z - old).max()) if old.size else 0.0)
        if moved <= outer_tol and tol_r <= max(inner_tol, outer_tol):
            z = game.stack(zs)
            resid = verify_nash(game, z).residual
            if resid <= 10 * outer_tol:
                return SolveResult(z, rnd, True, resid)
    z = game.stack(zs)
    return SolveResult(z, max_rounds, False, verify_nash(game, z).residual,
                       "max_rounds exceeded")


def optimum_general(game, z0=None, tol: float = 1e-10, max_iter: int = 200_000) -> SolveResult:
    """Gradient descent on SC; by convexity a stationary point is a global optimum."""
    game = _as_heterogeneous(game)
    _check_general(game)
    z = np.zeros(game.size) if z0 is None else game.check_profile(z0).copy()
    return gradient_descent(game.social_objective, z, tol=tol, max_iter=max_iter)


@dataclass
class NashReport:
    passed: bool
    residual: float
    worst_person: int | None
    residuals: list[float] = field(default_factory=list)

    def __bool__(self):
        return self.passed


def verify_nash(game, x, tol: float = 1e-8) -> NashReport:
    """Check ||grad_i c_i(x)||_inf <= tol for every person (valid for convex costs only)."""
    if isinstance(game, HeterogeneousGame) and not game.convex:
        raise NonConvexError("the gradient test does not certify equilibria of non-convex games")
    x = game.check_profile(x)
    res = [float(np.abs(game.person_gradient(i, x)).max()) if game.dims[i] else 0.0
           for i in range(game.n)]
    if not res:
        return NashReport(True, 0.0, None, res)
    worst = int(np.argmax(res))
    return NashReport(res[worst] <= tol, res[worst], worst, res)


# ---------------------------------------------------------------------------
# price of anarchy
# ---------------------------------------------------------------------------


@dataclass
class PoAResult:
    flag: str  # "ratio" | "unbounded" | "degenerate_one"
    ratio: float
    sc_nash: float
    sc_opt: float
    x: np.ndarray
    y: np.ndarray
    nash_residual: float = 0.0
    opt_residual: float = 0.0
    nash_iters: int = 0
    opt_iters: int = 0

    def to_dict(self) -> dict:
        return {
            "flag": self.flag,
            "ratio": None if math.isinf(self.ratio) else self.ratio,
            "sc_nash": self.sc_nash,
            "sc_opt": self.sc_opt,
            "nash": self.x.tolist(),
            "optimum": self.y.tolist(),
            "nash_residual": self.nash_residual,
            "opt_residual": self.opt_residual,
            "nash_iters": self.nash_iters,
            "opt_iters": self.opt_iters,
        }


def poa_from_costs(sc_x: float, sc_y: float) -> tuple[str, float]:
    if sc_y <= SC_FLOOR:
        if sc_x <= SC_FLOOR:
            return "degenerate_one", 1.0
        return "unbounded", math.inf
    return "ratio", sc_x / sc_y


def price_of_anarchy(game, solver: str = "closed", tol: float = 1e-10,
                     max_rounds: int = 10_000) -> PoAResult:
    """SC(Nash) / SC(optimum) with the conventions for vanishing optimal cost.

    Quadratic games use the closed forms unless ``solver="iterative"``; other
    games always use the iterative solvers.  Clique games use the clique Nash.
    """
    from .clique import CliqueGame, nash_clique

    if isinstance(game, QuadraticGame) and solver == "closed":
        x, y = nash_quadratic(game), optimum_quadratic(game)
        nres = verify_nash(game, x).residual
        ores = float(np.abs(quadratic_sc_gradient(game, y)).max()) if y.size else 0.0
        nit = oit = 0
        sc_game = game
    else:
        if isinstance(game, CliqueGame):
            nash = nash_clique(game, inner_tol=tol * 0.1, outer_tol=tol, max_rounds=max_rounds)
            base = game.base
        else:
            base = _as_heterogeneous(game)
            nash = nash_general(base, inner_tol=tol * 0.1, outer_tol=tol, max_rounds=max_rounds)
        if not nash.converged:
            raise SolverError(f"Nash solve did not converge: {nash.message}")
        opt = optimum_general(base, tol=tol)
        if not opt.converged:
            raise SolverError(f"optimum solve did not converge: {opt.message}")
        x, y = nash.z, opt.z
        nres, ores, nit, oit = nash.residual, opt.residual, nash.iters, opt.iters
        sc_game = base
    sc_x, sc_y = sc_game.social_cost(x), sc_game.social_cost(y)
    flag, ratio = poa_from_costs(sc_x, sc_y)
    return PoAResult(flag, ratio, sc_x, sc_y, x, y, nres, ores, nit, oit)


def quadratic_sc_gradient(q: QuadraticGame, z) -> np.ndarray:
    R, L, s = q.block_R(), q.block_L(), q.stacked_s()
    return 2.0 * R @ (z - s) + 4.0 * L @ z


# ---------------------------------------------------------------------------
# certificate-based upper bound
# ---------------------------------------------------------------------------


@dataclass
class LedgerEntry:
    role: str  # "g" or "f"
    key: tuple
    p_required: tuple
    status: str  # "certificate" | "sampled" | "failed"
    certificate: SuitabilityCertificate | None = None
    note: str = ""


@dataclass
class BoundReport:
    bound: float
    lam: float
    kappa: float
    ledger: list[LedgerEntry]


def poa_upper_bound(game, lam: float | None = None, kappa: float | None = None,
                    verify_samples: SamplingSpec | int | None = None, seed: int = 0) -> BoundReport:
    """lam / kappa, provided every f_ij is (lam, kappa, 2)-suitable and every g_i
    is (lam, kappa, 1)-suitable.  Clique games also need every f_ij for p = 1.

    Without explicit constants, the loosest constants implied by the derived
    certificates are used.  Functions without a certificate can be admitted by
    sampling when ``verify_samples`` is given; otherwise the bound is refused.
    """
    from .clique import CliqueGame

    clique = isinstance(game, CliqueGame)
    base = game.base if clique else _as_heterogeneous(game)
    rep = base.check_symmetric()
    if not rep:
        raise AsymmetricGameError(f"game is not symmetric at {rep.pair}: {rep.reason}")
    if isinstance(verify_samples, int):
        verify_samples = SamplingSpec(n=verify_samples)

    funcs = []
    for role, key, f in base.cost_functions():
        if role == "g":
            req = (1,)
        else:
            req = (1, 2) if clique else (2,)
        funcs.append((role, key, f, req, certify(f)))

    if lam is None or kappa is None:
        certs = [c for *_, c in funcs if c is not None]
        if not certs:
            raise CertificateError("no certificate available and no constants given")
        lam = max(c.lam for c in certs)
        kappa = min(c.kappa for c in certs)

    ledger, failed = [], []
    for role, key, f, req, cert in funcs:
        if cert is not None and all(cert.implies(lam, kappa, p) for p in req):
            ledger.append(LedgerEntry(role, key, req, "certificate", cert))
            continue
        if verify_samples is not None:
            reports = [verify_suitability(f, lam, kappa, p, verify_samples, seed) for p in req]
            if all(reports):
                ledger.append(LedgerEntry(role, key, req, "sampled", None,
                                          "no violation on " + verify_samples.describe()))
                continue
            bad = next(r for r in reports if not r)
            note = f"violation {bad.violation:.3g} at p={bad.p}"
        else:
            note = "no certificate covers these constants"
        ledger.append(LedgerEntry(role, key, req, "failed", cert, note))
        failed.append((role, key, note))
    if failed:
        raise CertificateError(f"suitability not established for {failed[:3]}"
                               + (" ..." if len(failed) > 3 else ""))
    return BoundReport(lam / kappa, lam, kappa, ledger)
