"""
Constructors for extreme instances: the three-person tight game for a scalar
cost h, its exponential instantiation, a non-convex game with unbounded price
of anarchy, and an indefinite quadratic game without a Nash equilibrium.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .cost_fn import CostFunction, CrossQuartic, ExpNode, QuadraticForm, Scale
from .equilibrium import poa_from_costs
from .game import HeterogeneousGame, InternalCost, PairCost, QuadraticGame, scalar_quadratic

NEG, ZERO, POS = 0, 1, 2


@dataclass
class TightInstanceSpec:
    """Scalar cost ``h`` with a p = 2 pair (x1, y1) and a p = 1 pair (x2, y2).

    When ``lam`` and ``kappa`` are given, both pairs must make the suitability
    inequality hold with equality.
    """

    h: CostFunction
    x1: float
    y1: float
    x2: float
    y2: float
    lam: float | None = None
    kappa: float | None = None
    eq_tol: float = 1e-8
    residuals: tuple[float, float] = field(init=False, default=(math.nan, math.nan))

    def __post_init__(self):
        if self.h.d_in != 1:
            raise ValueError("h must take a scalar argument")
        if self.x2 == self.y2:
            raise ValueError("x2 == y2 leaves a undefined")
        if self.x1 == self.y1:
            raise ValueError("x1 == y1 leaves b undefined")
        s1 = self.dh(self.x1) * (self.x1 - self.y1)
        s2 = self.dh(self.x2) * (self.x2 - self.y2)
        if not s1 * s2 < 0:
            raise ValueError("h'(x1)(x1 - y1) and h'(x2)(x2 - y2) must have opposite signs")
        if self.a == 0 or self.b == 0:
            raise ValueError("a and b must be nonzero")
        if self.lam is not None and self.kappa is not None:
            r1 = self.equality_residual(self.x1, self.y1, 2)
            r2 = self.equality_residual(self.x2, self.y2, 1)
            self.residuals = (r1, r2)
            if max(abs(r1), abs(r2)) > self.eq_tol:
                raise ValueError(f"pairs are not binding: residuals {r1:.3g}, {r2:.3g}")
        w = self._raw_w()
        if w < -1e-12:
            raise ValueError(f"w = {w:.3g} is negative")

    def dh(self, t: float) -> float:
        return float(self.h.grad([t])[0])

    def equality_residual(self, x: float, y: float, p: int) -> float:
        """lam h(y) - kappa h(x) - h'(x)(y - x)/p; zero when the pair binds."""
        return self.lam * self.h.eval([y]) - self.kappa * self.h.eval([x]) - self.dh(x) * (y - x) / p

    @property
    def a(self) -> float:
        return (self.y1 * self.x2 - self.x1 * self.y2) / (self.x2 - self.y2)

    @property
    def b(self) -> float:
        return (self.y1 * self.x2 - self.x1 * self.y2) / (self.x1 - self.y1)

    def _raw_w(self) -> float:
        return -self.b * self.dh(self.x2) / (self.a * self.dh(self.x1))

    @property
    def w(self) -> float:
        return max(self._raw_w(), 0.0)

    @property
    def ratio(self) -> float | None:
        if self.lam is None or self.kappa is None:
            return None
        return self.lam / self.kappa

    def x_profile(self) -> np.ndarray:
        """(p_neg, p_zero, p_pos) = (-x1/a, 0, x1/a); the constructed equilibrium."""
        return np.array([-self.x1 / self.a, 0.0, self.x1 / self.a])

    def y_profile(self) -> np.ndarray:
        return np.array([-self.y1 / self.a, 0.0, self.y1 / self.a])


def build_three_person(spec: TightInstanceSpec) -> HeterogeneousGame:
    """Persons p_neg, p_zero, p_pos (indices 0, 1, 2).

    p_pos pays h(b z_pos - b), p_neg pays h(-b - b z_neg), p_zero has no
    internal cost, and both outer persons share w h(.) with p_zero through the
    maps +-a, arranged so that the game is symmetric.
    """
    a, b = spec.a, spec.b
    f = Scale(spec.w, spec.h)
    internal = [
        InternalCost(spec.h, [[-b]], [b]),
        None,
        InternalCost(spec.h, [[b]], [b]),
    ]
    pairwise = {
        (NEG, ZERO): PairCost(f, [[-a]], [[a]]),
        (ZERO, NEG): PairCost(f, [[a]], [[-a]]),
        (POS, ZERO): PairCost(f, [[a]], [[-a]]),
        (ZERO, POS): PairCost(f, [[-a]], [[a]]),
    }
    return HeterogeneousGame([1, 1, 1], internal, pairwise)


def exp_tight_spec() -> TightInstanceSpec:
    """h = e^x with lam = 2/e, kappa = ln 2.

    The p = 2 pair binds at displacement 1 - 2 ln 2 and the p = 1 pair at
    1 - ln 2; the latter is shifted to start at x2 = 1 so that a != 0.
    """
    ln2 = math.log(2.0)
    return TightInstanceSpec(
        h=ExpNode(),
        x1=0.0,
        y1=1.0 - 2.0 * ln2,
        x2=1.0,
        y2=2.0 - ln2,
        lam=2.0 / math.e,
        kappa=ln2,
    )


# ---------------------------------------------------------------------------
# non-convex example
# ---------------------------------------------------------------------------


@dataclass
class GridBestResponse:
    person: int
    argmin: float
    value: float
    current_value: float
    step: float

    @property
    def gap(self) -> float:
        """How much the person could gain by moving on the grid (>= 0 up to round-off)."""
        return self.current_value - self.value


@dataclass
class NonconvexExample:
    """Two scalar persons with c_k = eps z_k^2 + (1 - z1)^2 z2^2 + z1^2 (1 - z2)^2.

    Gradient-based equilibrium logic does not apply, so best responses are
    checked by exhaustive 1-D grid search instead.
    """

    epsilon: float
    game: HeterogeneousGame

    def cost(self, k: int, z1, z2):
        """Vectorized polynomial cost of person k (0 or 1)."""
        z1 = np.asarray(z1, dtype=float)
        z2 = np.asarray(z2, dtype=float)
        own = z1 if k == 0 else z2
        return self.epsilon * own**2 + (1 - z1) ** 2 * z2**2 + z1**2 * (1 - z2) ** 2

    def social_cost(self, z) -> float:
        return float(self.cost(0, z[0], z[1]) + self.cost(1, z[0], z[1]))

    def grid_best_response(self, k: int, z, lo: float = -2.0, hi: float = 2.0,
                           step: float = 1e-4) -> GridBestResponse:
        n = int(round((hi - lo) / step))
        grid = lo + step * np.arange(n + 1)
        if k == 0:
            vals = self.cost(0, grid, z[1])
        else:
            vals = self.cost(1, z[0], grid)
        i = int(np.argmin(vals))
        cur = float(self.cost(k, z[0], z[1]))
        return GridBestResponse(k, float(grid[i]), float(vals[i]), cur, step)

    def is_mutual_best_response(self, z, lo: float = -2.0, hi: float = 2.0,
                                step: float = 1e-4, atol: float = 1e-12) -> bool:
        """True when no person gains more than ``atol`` on the grid and each grid
        argmin lies within one grid step of the current opinion."""
        for k in (0, 1):
            br = self.grid_best_response(k, z, lo, hi, step)
            if br.gap > atol or abs(br.argmin - z[k]) > step:
                return False
        return True

    def poa_flag(self, x=(0.75, 0.75), y=(0.0, 0.0)) -> tuple[str, float]:
        return poa_from_costs(self.social_cost(x), self.social_cost(y))


def nonconvex_example(epsilon: float = 0.125) -> NonconvexExample:
    if not epsilon > 0:
        raise ValueError("epsilon must be positive")
    g = Scale(epsilon, QuadraticForm([[1.0]]))
    f = CrossQuartic()
    e1, e2 = [[1.0], [0.0]], [[0.0], [1.0]]
    game = HeterogeneousGame(
        [1, 1],
        [InternalCost(g, [[1.0]], [0.0]), InternalCost(g, [[1.0]], [0.0])],
        {(0, 1): PairCost(f, e1, e2), (1, 0): PairCost(f, e2, e1)},
    )
    return NonconvexExample(float(epsilon), game)


# ---------------------------------------------------------------------------
# no equilibrium
# ---------------------------------------------------------------------------


def no_nash_example(r: float = 0.0) -> QuadraticGame:
    """Two scalar persons joined by an edge of weight -1, with s = 0 and internal weight r.

    Built with ``unsafe_indefinite`` since the weight is not PSD.
    """
    return scalar_quadratic([r, r], [0.0, 0.0], {(0, 1): -1.0, (1, 0): -1.0},
                            unsafe_indefinite=True)
