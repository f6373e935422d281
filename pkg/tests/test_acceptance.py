"""Acceptance criteria, one test each, at the stated tolerances.

Each test records a PASS/FAIL line; pytest prints them in the terminal summary.
Runs standalone too: ``python3 tests/test_acceptance.py``.
"""

import math
import time

import numpy as np

from _catalogue import catalogue, clique_corpus, corpus, two_person
from acceptance_log import record
from opiniongames.clique import reduce_clique
from opiniongames.cost_fn import (
    LIMIT_RATIO,
    CoshNode,
    ExpNode,
    Norm,
    PowerNorm,
    QuadraticForm,
    SamplingSpec,
    certify,
    finite_difference_grad,
    min_ratio_search,
    verify_suitability,
    zeta,
)
from opiniongames.dynamics import clone_transform, is_weight_normalized, simulate, spectral_radius
from opiniongames.equilibrium import (
    nash_general,
    nash_quadratic,
    optimum_general,
    optimum_quadratic,
    poa_upper_bound,
    price_of_anarchy,
    verify_nash,
)
from opiniongames.game import quadratic_to_heterogeneous
from opiniongames.lowerbound import build_three_person, exp_tight_spec, no_nash_example, nonconvex_example

LIMIT = 2 / (math.e * math.log(2))


def check(number, detail, conditions):
    """Record and assert a list of (label, bool) conditions."""
    failed = [label for label, ok in conditions if not ok]
    record(number, not failed, detail + (f"  [failed: {', '.join(failed)}]" if failed else ""))
    assert not failed, failed


def test_01_zeta_at_two():
    err = abs(zeta(2) - 1.125)
    check(1, f"|zeta(2) - 9/8| = {err:.2e} <= 1e-12", [("zeta(2)", err <= 1e-12)])


def test_02_zeta_limit_and_floor():
    grid = [1.01, 1.1, 1.5, 2, 3, 5, 10, 100, 1000]
    vals = [zeta(a) for a in grid]
    gap = abs(zeta(1000) - LIMIT)
    floor = min(v - LIMIT for v in vals)
    check(2, f"|zeta(1000) - 2/(e ln 2)| = {gap:.2e}; min zeta - limit on grid = {floor:.2e}",
          [("limit constant", abs(LIMIT_RATIO - LIMIT) <= 1e-15),
           ("zeta(1000)", gap <= 0.01),
           ("floor", floor >= -1e-9)])


def test_03_exp_tight_instance():
    spec = exp_tight_spec()
    g = build_three_person(spec)
    x, y = spec.x_profile(), spec.y_profile()
    rep = verify_nash(g, x, 1e-8)
    ratio = g.social_cost(x) / g.social_cost(y)
    sc_y = g.social_cost(y)
    sc_opt = g.social_cost(optimum_general(g).z)
    drop = (sc_y - sc_opt) / sc_y
    check(3, f"Nash residual {rep.residual:.1e}; SC(x)/SC(y) = {ratio:.9f}; optimizer drop {drop:.1e}",
          [("verify_nash", bool(rep)),
           ("ratio", abs(ratio - LIMIT) <= 1e-6),
           ("optimizer", drop <= 1e-4)])


def test_04_two_person_example():
    q = two_person()
    x_oracle = np.linalg.solve([[2.0, -1.0], [-1.0, 2.0]], [0.0, 1.0])
    y_oracle = np.linalg.solve([[3.0, -2.0], [-2.0, 3.0]], [0.0, 1.0])
    x, y = nash_quadratic(q), optimum_quadratic(q)
    res = price_of_anarchy(q)
    check(4, f"x = {x.round(12).tolist()}, y = {y.round(12).tolist()}, PoA = {res.ratio:.12f}",
          [("oracle nash", np.abs(x_oracle - [1 / 3, 2 / 3]).max() <= 1e-15),
           ("oracle opt", np.abs(y_oracle - [2 / 5, 3 / 5]).max() <= 1e-15),
           ("nash", np.abs(x - x_oracle).max() <= 1e-9),
           ("opt", np.abs(y - y_oracle).max() <= 1e-9),
           ("SC(x)", abs(res.sc_nash - 4 / 9) <= 1e-9),
           ("SC(y)", abs(res.sc_opt - 2 / 5) <= 1e-9),
           ("PoA", abs(res.ratio - 10 / 9) <= 1e-9)])


def test_05_quadratic_corpus():
    games = corpus()
    lo, hi, sim_err, gen_err = math.inf, -math.inf, 0.0, 0.0
    for q in games:
        r = price_of_anarchy(q).ratio
        lo, hi = min(lo, r), max(hi, r)
        x = nash_quadratic(q)
        s = simulate(clone_transform(q), tol=1e-12, max_iter=200_000)
        sim_err = max(sim_err, np.abs(s.z[: q.size] - x).max() if s.converged else math.inf)
        ng = nash_general(quadratic_to_heterogeneous(q))
        gen_err = max(gen_err, np.abs(ng.z - x).max() if ng.converged else math.inf)
    check(5, f"{len(games)} games: PoA in [{lo:.6f}, {hi:.6f}]; clone simulate err {sim_err:.1e}; "
             f"nash_general err {gen_err:.1e}",
          [("count", len(games) == 100),
           ("PoA range", lo >= 1 - 1e-9 and hi <= 9 / 8 + 1e-9),
           ("simulate", sim_err <= 1e-6),
           ("nash_general", gen_err <= 1e-6)])


def test_06_spectral_convergence():
    rng = np.random.default_rng(6)
    normalized, rho_max, spread, all_conv = True, 0.0, 0.0, True
    for q in corpus():
        c = clone_transform(q)
        normalized &= bool(is_weight_normalized(c))
        rho_max = max(rho_max, spectral_radius(c))
        ends = []
        for _ in range(5):
            s = simulate(c, rng.uniform(-5, 5, c.size), tol=1e-12, max_iter=200_000)
            all_conv &= s.converged
            ends.append(s.z)
        spread = max(spread, max(np.abs(e - ends[0]).max() for e in ends))
    check(6, f"max rho = {rho_max:.6f}; max spread over 5 starts = {spread:.1e}",
          [("normalized", normalized), ("rho < 1", rho_max < 1),
           ("converged", all_conv), ("same fixed point", spread <= 1e-6)])


def test_07_clone_duplication():
    err = 0.0
    for q in corpus()[:25]:
        x, xc = nash_quadratic(q), nash_quadratic(clone_transform(q))
        err = max(err, np.abs(xc[: q.size] - x).max(), np.abs(xc[q.size:] - x).max())
    check(7, f"max |clone block - original Nash| = {err:.1e} on 25 games", [("duplication", err <= 1e-8)])


def test_08_clique_reduction():
    rng = np.random.default_rng(8)
    parity, poa_gap, excess = 0.0, 0.0, -math.inf
    games = clique_corpus(25)
    for cg in games:
        r = reduce_clique(cg)
        for _ in range(100):
            z = rng.normal(size=cg.size)
            zr = cg.to_reduced(z)
            parity = max(parity, max(abs(r.person_cost(i, zr) - cg.clique_cost(i, z)) for i in range(cg.t)))
        native = price_of_anarchy(cg).ratio
        poa_gap = max(poa_gap, abs(native - price_of_anarchy(r).ratio))
        excess = max(excess, native - poa_upper_bound(cg).bound)
    check(8, f"{len(games)} clique games: cost parity {parity:.1e}; PoA gap {poa_gap:.1e}; "
             f"max PoA - bound = {excess:.4f}",
          [("parity", parity <= 1e-10), ("PoA invariance", poa_gap <= 1e-6), ("bound", excess <= 1e-9)])


def test_09_nonconvex_unbounded():
    ex = nonconvex_example(1 / 8)
    z = np.array([0.75, 0.75])
    grad = max(np.abs(ex.game.person_gradient(i, z)).max() for i in range(2))
    mutual = ex.is_mutual_best_response(z, -2.0, 2.0, 1e-4)
    flag, _ = ex.poa_flag()
    check(9, f"max gradient {grad:.1e}; grid best responses {mutual}; SC(3/4,3/4) = "
             f"{ex.social_cost(z)}, SC(0,0) = {ex.social_cost([0, 0])}; flag {flag}",
          [("gradients", grad <= 1e-12), ("grid", mutual),
           ("SC(x) > 0", ex.social_cost(z) > 0), ("SC(0,0) = 0", ex.social_cost([0, 0]) == 0.0),
           ("flag", flag == "unbounded")])


def test_10_no_nash_divergence():
    runs = {}
    for r in (0.0, 0.5):
        for z0 in ([1e-3, -1e-3], [-1e-3, 2e-3]):
            runs[(r, tuple(z0))] = simulate(no_nash_example(r), z0)
    literal = simulate(no_nash_example(0.5), [1e-3, -1e-3], detect_unbounded=False)
    worst = max(s.iters for s in runs.values())
    check(10, f"all runs diverged, worst after {worst} iterations; literal r = 0.5 run diverged after "
              f"{literal.iters} (|z| = {np.abs(literal.z).max():.1e})",
          [("diverged", all(s.status == "diverged" and s.iters <= 100 for s in runs.values())),
           ("literal", literal.status == "diverged" and literal.iters <= 100)])


def test_11_suitability_machinery():
    spec = SamplingSpec(n=10_000)
    cases = {
        "x^2": (QuadraticForm([[1.0]]), (0.75, 2 / 3)),
        "e^x": (ExpNode(), (2 / math.e, math.log(2))),
    }
    rng = np.random.default_rng(11)
    propagated = {
        "||Mz||^2": QuadraticForm(rng.normal(size=(3, 3))),
        "e^{x^2}": ExpNode(QuadraticForm([[1.0]])),
        "cosh": CoshNode(),
        "cosh||z||": CoshNode(Norm(2.0, 2)),
    }
    conds = []
    for name, (f, (lam, kappa)) in cases.items():
        for p in (1, 2):
            conds.append((f"{name} p={p}", bool(verify_suitability(f, lam, kappa, p, spec, seed=p))))
    for name, f in propagated.items():
        cert = certify(f)
        conds.append((f"{name} certified", cert is not None))
        for p in (cert.p_set if cert else ()):
            conds.append((f"{name} p={p}", bool(verify_suitability(f, cert.lam, cert.kappa, p, spec, seed=p))))
    ratios = {
        "x^2": (min_ratio_search(QuadraticForm([[1.0]]), spec).ratio, 9 / 8),
        "e^x": (min_ratio_search(ExpNode(), spec).ratio, LIMIT),
        "|x|^3": (min_ratio_search(PowerNorm(3.0, 2.0, 1), spec).ratio, zeta(3)),
    }
    for name, (got, want) in ratios.items():
        conds.append((f"ratio {name}", abs(got - want) <= 5e-3))
    shown = ", ".join(f"{k} {v[0]:.5f}" for k, v in ratios.items())
    check(11, f"{len(conds) - 3} sampled certificate checks; searched ratios {shown}", conds)


def test_12_gradients():
    rng = np.random.default_rng(12)
    worst, bad = 0.0, []
    for name, f in catalogue().items():
        for _ in range(100):
            v = rng.uniform(-2, 2, size=f.d_in)
            g = f.grad(v)
            rel = np.linalg.norm(g - finite_difference_grad(f.eval, v, h=1e-6)) / (1 + np.linalg.norm(g))
            worst = max(worst, rel)
            if rel > 1e-5:
                bad.append(name)
    check(12, f"{len(catalogue())} constructors x 100 points, worst relative error {worst:.1e}",
          [(n, False) for n in sorted(set(bad))] or [("all", True)])


if __name__ == "__main__":
    import sys

    failures = 0
    for name, fn in sorted(globals().items()):
        if name.startswith("test_") and callable(fn):
            t0 = time.perf_counter()
            try:
                fn()
            except AssertionError:
                failures += 1
            print(f"      ({time.perf_counter() - t0:.1f} s)")
    sys.exit(1 if failures else 0)
