"""
Command-line interface.

Exit codes: 0 success, 1 analytic negative (divergence, suitability
violation), 2 numeric failure, 3 usage or schema error.
"""

from __future__ import annotations

import csv
import json
import math
import sys
from fractions import Fraction

import click
import numpy as np

from . import schema
from .corpus import random_quadratic
from .cost_fn import (
    LIMIT_RATIO,
    CoshNode,
    ExpNode,
    Norm,
    PowerNorm,
    QuadraticForm,
    SamplingSpec,
    SearchError,
    min_ratio_search,
    verify_suitability,
    zeta,
)
from .dynamics import simulate, write_trajectory_csv
from .equilibrium import NonConvexError, SolverError, price_of_anarchy
from .game import AsymmetricGameError, NotPSDError, QuadraticGame
from .lowerbound import build_three_person, exp_tight_spec, no_nash_example, nonconvex_example

EXIT_OK, EXIT_NEGATIVE, EXIT_NUMERIC, EXIT_USAGE = 0, 1, 2, 3


def _fail(msg: str, code: int) -> int:
    click.echo(f"error: {msg}", err=True)
    return code


def _load(path: str):
    try:
        return schema.load(path)
    except OSError as exc:
        raise click.UsageError(f"cannot read {path}: {exc}") from exc
    except schema.SchemaError as exc:
        raise click.UsageError(f"schema error in {path}: {exc}") from exc


def _real(text: str) -> float:
    """Parse a real, accepting exact fractions such as 2/3."""
    try:
        return float(Fraction(text)) if "/" in text else float(text)
    except (ValueError, ZeroDivisionError) as exc:
        raise click.BadParameter(f"not a real number: {text!r}") from exc


@click.group()
def cli():
    """Multidimensional opinion-formation games."""


# ---------------------------------------------------------------------------
# poa
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("game_file", type=click.Path(dir_okay=False))
@click.option("--solver", type=click.Choice(["closed", "iterative"]), default="closed",
              show_default=True, help="Closed forms apply to quadratic games only.")
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-rounds", type=click.IntRange(min=1), default=10_000, show_default=True,
              help="Round limit for the iterative Nash solver.")
@click.option("--format", "fmt", type=click.Choice(["text", "json", "csv"]), default="text",
              show_default=True)
def poa(game_file, solver, tol, max_rounds, fmt):
    """Price of anarchy of a game file."""
    game = _load(game_file)
    try:
        res = price_of_anarchy(game, solver=solver, tol=tol, max_rounds=max_rounds)
    except (NotPSDError, AsymmetricGameError, NonConvexError) as exc:
        raise click.UsageError(f"game does not meet the solver preconditions: {exc}") from exc
    except (SolverError, np.linalg.LinAlgError, ArithmeticError) as exc:
        return _fail(f"solver failure: {exc}", EXIT_NUMERIC)
    rec = res.to_dict()
    if fmt == "json":
        click.echo(json.dumps(rec, indent=1))
    elif fmt == "csv":
        cols = ["flag", "ratio", "sc_nash", "sc_opt", "nash_residual", "opt_residual",
                "nash_iters", "opt_iters"]
        w = csv.writer(sys.stdout)
        w.writerow(cols)
        w.writerow(["" if rec[c] is None else rec[c] for c in cols])
    else:
        click.echo(f"SC(nash)      {res.sc_nash!r}")
        click.echo(f"SC(optimum)   {res.sc_opt!r}")
        if res.flag == "ratio":
            click.echo(f"PoA           {res.ratio!r}")
        else:
            click.echo(f"PoA           {res.flag}")
        click.echo(f"nash residual {res.nash_residual:.3g}")
        click.echo(f"opt residual  {res.opt_residual:.3g}")
    return EXIT_OK


# ---------------------------------------------------------------------------
# zeta
# ---------------------------------------------------------------------------


def _parse_range(text: str) -> list[float]:
    try:
        a, b, step = (float(t) for t in text.split(":"))
    except ValueError as exc:
        raise click.BadParameter("expected start:stop:step") from exc
    if step <= 0 or b < a:
        raise click.BadParameter("need step > 0 and stop >= start")
    count = int(math.floor((b - a) / step + 1e-9)) + 1
    return [a + k * step for k in range(count)]


@cli.command("zeta")
@click.option("--alpha", type=float, multiple=True, help="Exponent (repeatable).")
@click.option("--range", "rng", help="start:stop:step grid of exponents.")
@click.option("--limit", is_flag=True, help="Append the alpha -> inf limit 2/(e ln 2).")
@click.option("--output", "-o", type=click.File("w"), default="-")
def zeta_cmd(alpha, rng, limit, output):
    """Worst-case PoA zeta(alpha) of |x|^alpha as CSV rows alpha,zeta."""
    alphas = list(alpha) + (_parse_range(rng) if rng else [])
    if not alphas and not limit:
        raise click.UsageError("give --alpha, --range or --limit")
    bad = [a for a in alphas if not a > 1]
    if bad:
        raise click.BadParameter(f"alpha must exceed 1, got {bad[0]!r}")
    w = csv.writer(output)
    w.writerow(["alpha", "zeta"])
    for a in alphas:
        w.writerow([repr(a), repr(zeta(a))])
    if limit:
        w.writerow(["inf", repr(LIMIT_RATIO)])
    return EXIT_OK


# ---------------------------------------------------------------------------
# generate
# ---------------------------------------------------------------------------


@cli.command()
@click.argument("kind", type=click.Choice(["exp-tight", "nonconvex", "no-nash", "random-quadratic"]))
@click.option("--n", type=int, default=5, show_default=True)
@click.option("--m", type=int, default=2, show_default=True)
@click.option("--density", type=float, default=0.5, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--epsilon", type=float, default=0.125, show_default=True, help="nonconvex only.")
@click.option("--r", "r", type=float, default=0.0, show_default=True,
              help="no-nash internal weight.")
@click.option("--output", "-o", type=click.Path(dir_okay=False), default="-")
def generate(kind, n, m, density, seed, epsilon, r, output):
    """Write a game file."""
    try:
        if kind == "exp-tight":
            game = build_three_person(exp_tight_spec())
        elif kind == "nonconvex":
            game = nonconvex_example(epsilon).game
        elif kind == "no-nash":
            game = no_nash_example(r)
        else:
            game = random_quadratic(n, m, density, seed)
    except ValueError as exc:
        raise click.BadParameter(str(exc)) from exc
    text = schema.dumps(game)
    if output == "-":
        click.echo(text, nl=False)
    else:
        with open(output, "w", encoding="utf-8") as fh:
            fh.write(text)
    return EXIT_OK


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


@cli.command("simulate")
@click.argument("game_file", type=click.Path(dir_okay=False))
@click.option("--init", type=click.Choice(["zeros", "internal", "random"]), default="zeros",
              show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--tol", type=float, default=1e-10, show_default=True)
@click.option("--max-iter", type=int, default=10_000, show_default=True)
@click.option("--trace", type=click.File("w"), help="CSV trajectory: iter,person,component,value.")
@click.option("--stride", type=int, default=1, show_default=True)
@click.option("--literal", is_flag=True,
              help="Iterate even when some person's own cost is unbounded below.")
def simulate_cmd(game_file, init, seed, tol, max_iter, trace, stride, literal):
    """Simultaneous best-response dynamics on a quadratic game."""
    game = _load(game_file)
    if not isinstance(game, QuadraticGame):
        raise click.UsageError("simulate needs a quadratic game")
    if init == "zeros":
        z0 = np.zeros(game.size)
    elif init == "internal":
        z0 = game.stacked_s()
    else:
        z0 = np.random.default_rng(seed).uniform(-1.0, 1.0, game.size)
    try:
        res = simulate(game, z0, tol=tol, max_iter=max_iter,
                       record_stride=stride if trace else None, detect_unbounded=not literal)
    except NotPSDError as exc:
        raise click.UsageError(str(exc)) from exc
    if trace:
        write_trajectory_csv(game, res, trace)
    click.echo(f"status {res.status}")
    click.echo(f"iters  {res.iters}")
    if res.reason:
        click.echo(f"reason {res.reason}")
    click.echo("z      " + " ".join(repr(float(v)) for v in res.z))
    if res.status == "converged":
        return EXIT_OK
    return EXIT_NEGATIVE if res.status == "diverged" else EXIT_NUMERIC


# ---------------------------------------------------------------------------
# suitability
# ---------------------------------------------------------------------------


def parse_fn(spec: str):
    """``square``, ``exp``, ``cosh``, ``exp-square`` (e^{x^2}), ``power:ALPHA``,
    ``cosh-norm:DIM`` or ``quadratic:DIM`` (||x||^2 in DIM dimensions)."""
    name, _, arg = spec.partition(":")
    try:
        if name == "square":
            return QuadraticForm([[1.0]])
        if name == "exp":
            return ExpNode()
        if name == "cosh":
            return CoshNode()
        if name == "exp-square":
            return ExpNode(QuadraticForm([[1.0]]))
        if name == "power":
            return PowerNorm(float(arg), 2.0, 1)
        if name == "cosh-norm":
            return CoshNode(Norm(2.0, int(arg or 2)))
        if name == "quadratic":
            return QuadraticForm(np.eye(int(arg or 1)))
    except ValueError as exc:
        raise click.BadParameter(f"bad function spec {spec!r}: {exc}") from exc
    raise click.BadParameter(f"unknown function {spec!r}")


@cli.command("suitability")
@click.option("--fn", "fn_spec", required=True, help="square, exp, cosh, exp-square, power:A, ...")
@click.option("--lambda", "lam", help="Omit lambda and kappa to search for the minimum ratio.")
@click.option("--kappa", "kappa")
@click.option("--p", "p", type=click.Choice(["1", "2", "both"]), default="both", show_default=True)
@click.option("--samples", type=int, default=10_000, show_default=True)
@click.option("--box", type=float, default=10.0, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
def suitability_cmd(fn_spec, lam, kappa, p, samples, box, seed):
    """Check (lambda, kappa, p)-suitability on sampled pairs, or search the minimum ratio."""
    f = parse_fn(fn_spec)
    spec = SamplingSpec(n=samples, box=box)
    if (lam is None) != (kappa is None):
        raise click.UsageError("give both --lambda and --kappa, or neither")
    if lam is None:
        try:
            res = min_ratio_search(f, spec, seed=seed)
        except SearchError as exc:
            return _fail(str(exc), EXIT_NUMERIC)
        click.echo(f"ratio  {res.ratio!r}")
        click.echo(f"lambda {res.lam!r}")
        click.echo(f"kappa  {res.kappa!r}")
        return EXIT_OK
    lam, kappa = _real(lam), _real(kappa)
    if not (lam > 0 and kappa > 0):
        raise click.BadParameter("lambda and kappa must be positive")
    ok = True
    for pv in ([1, 2] if p == "both" else [int(p)]):
        rep = verify_suitability(f, lam, kappa, pv, spec, seed)
        if rep:
            click.echo(f"p={pv} pass  min slack {rep.worst_margin:.6g} on {rep.n_checked} pairs")
        else:
            ok = False
            a, b = rep.counterexample
            click.echo(f"p={pv} FAIL  violation {rep.violation:.6g} at a={a.tolist()} b={b.tolist()}")
    return EXIT_OK if ok else EXIT_NEGATIVE


def main(argv=None) -> int:
    try:
        rv = cli.main(args=argv, prog_name="opiniongames", standalone_mode=False)
    except click.UsageError as exc:
        exc.show()
        return EXIT_USAGE
    except click.Abort:
        click.echo("aborted", err=True)
        return EXIT_USAGE
    return rv if isinstance(rv, int) else EXIT_OK


def entry() -> None:
    sys.exit(main())


if __name__ == "__main__":
    entry()
