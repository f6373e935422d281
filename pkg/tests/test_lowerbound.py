import math

import numpy as np
import pytest

from opiniongames.cost_fn import ExpNode, PowerNorm, QuadraticForm
from opiniongames.equilibrium import optimum_general, price_of_anarchy, verify_nash
from opiniongames.game import NotPSDError, QuadraticGame, check_symmetric
from opiniongames.lowerbound import (
    NEG,
    POS,
    ZERO,
    TightInstanceSpec,
    build_three_person,
    exp_tight_spec,
    no_nash_example,
    nonconvex_example,
)


def exp_oracle():
    """a, b, w from the three-person formulas, evaluated directly at the exp pairs."""
    x1, y1 = 0.0, 1 - 2 * math.log(2)
    x2, y2 = 1.0, 2 - math.log(2)
    num = y1 * x2 - x1 * y2
    a, b = num / (x2 - y2), num / (x1 - y1)
    w = -b * math.exp(x2) / (a * math.exp(x1))
    return a, b, w


def test_exp_spec_constants():
    spec = exp_tight_spec()
    assert spec.lam == pytest.approx(2 / math.e, rel=1e-15)
    assert spec.kappa == pytest.approx(math.log(2), rel=1e-15)
    a, b, w = exp_oracle()
    assert spec.a == pytest.approx(a, rel=1e-14)
    assert spec.b == pytest.approx(b, rel=1e-14)
    assert spec.w == pytest.approx(w, rel=1e-14)
    assert spec.a == pytest.approx(1.258892, abs=1e-6)
    assert spec.b == pytest.approx(-1.0, abs=1e-15)
    assert spec.w > 0 and spec.a * spec.b < 0


def test_exp_spec_equality_residuals():
    spec = exp_tight_spec()
    lam, kappa = 2 / math.e, math.log(2)
    for (x, y), p in (((spec.x1, spec.y1), 2), ((spec.x2, spec.y2), 1)):
        c = y - x
        assert abs(lam * math.exp(c) - kappa - c / p) <= 1e-12
        assert abs(spec.equality_residual(x, y, p)) <= 1e-12


def test_exp_game_layout():
    spec = exp_tight_spec()
    g = build_three_person(spec)
    assert g.n == 3 and g.dims == [1, 1, 1]
    assert g.internal[ZERO] is None
    assert check_symmetric(g)
    assert set(g.pairwise) == {(NEG, ZERO), (ZERO, NEG), (POS, ZERO), (ZERO, POS)}


def test_exp_game_internal_costs():
    spec = exp_tight_spec()
    g = build_three_person(spec)
    b = spec.b
    pos, neg = g.internal[POS], g.internal[NEG]
    for z in (-0.3, 0.0, 0.8):
        v = np.array([z])
        assert pos.g.eval(pos.R @ v - pos.s) == pytest.approx(math.exp(b * z - b), rel=1e-14)
        assert neg.g.eval(neg.R @ v - neg.s) == pytest.approx(math.exp(-b - b * z), rel=1e-14)


def test_exp_game_nash_and_ratio():
    spec = exp_tight_spec()
    g = build_three_person(spec)
    x, y = spec.x_profile(), spec.y_profile()
    np.testing.assert_allclose(x, [-spec.x1 / spec.a, 0, spec.x1 / spec.a])
    np.testing.assert_allclose(y, [-spec.y1 / spec.a, 0, spec.y1 / spec.a])
    assert verify_nash(g, x, 1e-8)
    assert g.social_cost(x) / g.social_cost(y) == pytest.approx(2 / math.e / math.log(2), abs=1e-6)


def test_exp_game_optimizer_finds_nothing_lower():
    spec = exp_tight_spec()
    g = build_three_person(spec)
    sc_y = g.social_cost(spec.y_profile())
    sc_opt = g.social_cost(optimum_general(g).z)
    assert sc_opt >= sc_y * (1 - 1e-4)
    assert price_of_anarchy(g).ratio >= g.social_cost(spec.x_profile()) / sc_y - 1e-9


def test_square_tight_instance():
    # x^2 with (3/4, 2/3); each binding pair is the double root of a quadratic in y
    lam, kappa = 0.75, 2 / 3
    h = QuadraticForm([[1.0]])

    def resid(x, y, p):
        return lam * y * y - kappa * x * x - 2 * x * (y - x) / p

    # p = 2: lam y^2 - x y + (1 - kappa) x^2 = 0, double root y = x / (2 lam)
    x1 = 1.0
    y1 = x1 / (2 * lam)
    # p = 1: lam y^2 - 2 x y + (2 - kappa) x^2 = 0, double root y = x / lam
    x2 = -1.0
    y2 = x2 / lam
    assert abs(resid(x1, y1, 2)) <= 1e-15 and abs(resid(x2, y2, 1)) <= 1e-15
    spec = TightInstanceSpec(h, x1, y1, x2, y2, lam, kappa)
    g = build_three_person(spec)
    assert verify_nash(g, spec.x_profile(), 1e-8)
    assert g.social_cost(spec.x_profile()) / g.social_cost(spec.y_profile()) == pytest.approx(9 / 8, abs=1e-6)


def test_spec_rejections():
    h = ExpNode()
    with pytest.raises(ValueError):
        TightInstanceSpec(h, 0.0, -1.0, 1.0, 1.0)  # x2 == y2
    with pytest.raises(ValueError):
        TightInstanceSpec(h, 0.0, 0.0, 1.0, 2.0)  # x1 == y1
    with pytest.raises(ValueError):
        # h' > 0, both displacements negative: same sign
        TightInstanceSpec(h, 0.0, 1.0, 1.0, 2.0)
    with pytest.raises(ValueError):
        TightInstanceSpec(PowerNorm(2.0, 2.0, 2), 0.0, 1.0, 1.0, 0.0)
    with pytest.raises(ValueError):
        # off the binding curve for the stated constants
        TightInstanceSpec(h, 0.0, 1 - 2 * math.log(2) + 1e-3, 1.0, 2 - math.log(2), 2 / math.e, math.log(2))


# --- non-convex example ---------------------------------------------------------


def test_nonconvex_gradients_vanish():
    ex = nonconvex_example(1 / 8)
    z = np.array([0.75, 0.75])
    for i in range(2):
        np.testing.assert_allclose(ex.game.person_gradient(i, z), [0.0], atol=1e-15)


def test_nonconvex_polynomial_matches_game():
    ex = nonconvex_example(0.3)
    rng = np.random.default_rng(0)
    for _ in range(50):
        z = rng.uniform(-2, 2, 2)
        for k in range(2):
            assert ex.cost(k, z[0], z[1]) == pytest.approx(ex.game.person_cost(k, z), rel=1e-13, abs=1e-15)


def test_nonconvex_grid_oracle():
    ex = nonconvex_example(1 / 8)
    assert ex.is_mutual_best_response([0.75, 0.75])
    for k in range(2):
        br = ex.grid_best_response(k, [0.75, 0.75])
        assert abs(br.argmin - 0.75) <= 1e-4
        assert br.gap <= 1e-12
    assert not ex.is_mutual_best_response([0.5, 0.75])


def test_nonconvex_unbounded_flag():
    ex = nonconvex_example(1 / 8)
    assert ex.social_cost([0.0, 0.0]) == 0.0
    assert ex.social_cost([0.75, 0.75]) == pytest.approx(9 / 32, abs=1e-15)
    assert ex.poa_flag() == ("unbounded", math.inf)


def test_nonconvex_rejects_bad_epsilon():
    with pytest.raises(ValueError):
        nonconvex_example(0.0)


# --- no-Nash example ------------------------------------------------------------


def test_no_nash_game():
    q = no_nash_example()
    assert q.unsafe_indefinite
    assert q.W[(0, 1)][0, 0] == -1.0
    np.testing.assert_array_equal(q.stacked_s(), [0.0, 0.0])
    with pytest.raises(NotPSDError):
        QuadraticGame(1, q.R, q.s, q.W)
