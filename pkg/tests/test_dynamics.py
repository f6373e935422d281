import io

import numpy as np
import pytest

from _catalogue import corpus, two_person
from opiniongames.dynamics import (
    best_response_step,
    block_system,
    clone_transform,
    is_weight_normalized,
    simulate,
    spectral_radius,
    write_trajectory_csv,
)
from opiniongames.equilibrium import nash_quadratic
from opiniongames.game import NotPSDError, QuadraticGame, scalar_quadratic
from opiniongames.lowerbound import no_nash_example


def test_best_response_step_examples():
    q = two_person()
    np.testing.assert_allclose(best_response_step(q, [0, 0]), [0, 0.5])
    np.testing.assert_allclose(best_response_step(q, [1 / 3, 2 / 3]), [1 / 3, 2 / 3], atol=1e-15)
    lone = scalar_quadratic([1, 2], [3.0, -1.0], {})
    np.testing.assert_allclose(best_response_step(lone, [10.0, 7.0]), [3.0, -1.0])


def test_step_equals_block_form():
    rng = np.random.default_rng(0)
    for q in corpus()[:10]:
        bs = block_system(q)
        z = rng.normal(size=q.size)
        np.testing.assert_allclose(best_response_step(q, z), bs.Lam @ bs.W @ z + bs.Lam @ bs.R @ bs.s,
                                   rtol=1e-10, atol=1e-12)


def test_block_system_invariants():
    for q in corpus()[:10]:
        bs = block_system(q)
        assert np.linalg.eigvalsh(bs.L).min() >= -1e-10
        np.testing.assert_allclose(bs.Lam, bs.Lam.T, atol=1e-12)
        assert np.linalg.eigvalsh(bs.Lam).min() > 0


def test_step_requires_pd_internal():
    q = scalar_quadratic([1.0, 0.0], [0.0, 1.0], {(0, 1): 1.0, (1, 0): 1.0})
    with pytest.raises(NotPSDError):
        best_response_step(q, [0, 0])


def test_simulate_two_person():
    res = simulate(two_person(), [0, 0], tol=1e-10)
    assert res.converged
    np.testing.assert_allclose(res.z, [1 / 3, 2 / 3], atol=1e-9)


def test_simulate_no_edges_one_step():
    res = simulate(scalar_quadratic([1, 1], [0.3, -2.0], {}), [5.0, 5.0])
    assert res.converged and res.iters == 2
    np.testing.assert_allclose(res.z, [0.3, -2.0])


def test_simulate_fixed_point_identity():
    for q in corpus()[:10]:
        c = clone_transform(q)
        res = simulate(c, tol=1e-10, max_iter=100_000)
        assert res.converged
        bs = block_system(c)
        resid = res.z - (bs.Lam @ bs.W @ res.z + bs.Lam @ bs.R @ bs.s)
        assert np.abs(resid).max() <= 10 * 1e-10


def test_no_nash_game_diverges():
    assert simulate(no_nash_example(), [0.0, 1.0]).status == "diverged"
    for r in (0.0, 0.5):
        res = simulate(no_nash_example(r), [1e-3, -1e-3])
        assert res.status == "diverged" and res.iters <= 100


def test_literal_iteration_on_perturbed_variant_blows_up():
    res = simulate(no_nash_example(0.5), [1e-3, -1e-3], detect_unbounded=False)
    assert res.status == "diverged" and res.iters <= 100
    assert np.abs(res.z).max() > 1e6
    still = simulate(no_nash_example(0.5), [0.0, 0.0], detect_unbounded=False, max_iter=50)
    np.testing.assert_array_equal(still.z, [0.0, 0.0])


def test_max_iter_reached():
    res = simulate(two_person(), [0, 0], tol=0.0, max_iter=3)
    assert res.status == "max_iter_reached" and res.iters == 3


def test_trajectory_csv():
    q = two_person()
    res = simulate(q, [0, 0], record_stride=5)
    buf = io.StringIO()
    write_trajectory_csv(q, res, buf)
    lines = buf.getvalue().strip().splitlines()
    assert lines[0] == "iter,person,component,value"
    assert lines[1] == "0,0,0,0.0"
    assert len(lines) - 1 == 2 * len(res.trajectory)
    assert res.trajectory[-1][0] == res.iters


def test_weight_normalization():
    assert is_weight_normalized(two_person())
    half = scalar_quadratic([1, 1], [0, 1], {(0, 1): 0.5, (1, 0): 0.5})
    rep = is_weight_normalized(half)
    assert not rep and rep.person == 0


def test_clone_two_person():
    c = clone_transform(two_person(), 2.0)
    assert c.n == 4
    assert c.W[(0, 2)][0, 0] == pytest.approx(0.5)
    assert is_weight_normalized(c)
    x = nash_quadratic(c)
    np.testing.assert_allclose(x, [1 / 3, 2 / 3, 1 / 3, 2 / 3], atol=1e-12)


def test_clone_normalized_game_stays_normalized():
    c = clone_transform(two_person(), 2.0)
    assert c.W[(0, 2)][0, 0] == pytest.approx(0.5)
    assert is_weight_normalized(c)


def test_clone_rejects_small_d():
    with pytest.raises(ValueError):
        clone_transform(two_person(), 0.5)


def test_clone_auto_d_on_corpus():
    for q in corpus()[:25]:
        c = clone_transform(q)
        assert is_weight_normalized(c)
        x, xc = nash_quadratic(q), nash_quadratic(c)
        np.testing.assert_allclose(xc[: q.size], xc[q.size:], atol=1e-8)
        np.testing.assert_allclose(xc[: q.size], x, atol=1e-8)


def test_spectral_radius_examples():
    assert spectral_radius(two_person()) == pytest.approx(0.5, abs=1e-15)
    assert spectral_radius(scalar_quadratic([1, 1], [0, 0], {})) == 0.0


def test_spectral_radius_matches_dense_eigenvalues():
    for q in corpus()[:10]:
        bs = block_system(q)
        rho = np.abs(np.linalg.eigvals(bs.Lam @ bs.W)).max()
        assert spectral_radius(q) == pytest.approx(rho, rel=1e-9)


def test_normalized_instances_are_contractive():
    for q in corpus()[:25]:
        c = clone_transform(q)
        bs = block_system(c)
        assert spectral_radius(c) < 1
        assert np.linalg.norm(bs.Lam, 2) < 1
        assert np.linalg.norm(bs.W, 2) <= 1 + 1e-12


def test_spectral_radius_requires_undirected():
    q = QuadraticGame(1, [[[1.0]], [[1.0]]], [[0.0], [1.0]], {(0, 1): [[1.0]]})
    with pytest.raises(ValueError):
        spectral_radius(q)
