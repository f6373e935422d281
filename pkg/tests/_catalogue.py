"""Shared fixtures-by-function for the test modules."""

import numpy as np

from opiniongames.corpus import quadratic_corpus
from opiniongames.cost_fn import (
    AffinePre,
    CoshNode,
    CrossQuartic,
    ExpNode,
    Linear,
    Norm,
    PowerNorm,
    QuadraticForm,
    Scale,
    Sum,
)
from opiniongames.game import scalar_quadratic


def catalogue():
    """Every constructor kind, with a few parameterizations each."""
    rng = np.random.default_rng(5)
    M = rng.normal(size=(3, 3))
    return {
        "quadratic_form": QuadraticForm(M),
        "quadratic_form_rect": QuadraticForm(rng.normal(size=(2, 3))),
        "power_2": PowerNorm(2.0, 2.0, 3),
        "power_3": PowerNorm(3.0, 2.0, 3),
        "power_1.5_p3": PowerNorm(1.5, 3.0, 2),
        "power_4_p1.5": PowerNorm(4.0, 1.5, 2),
        "norm": Norm(2.0, 3),
        "norm_p3": Norm(3.0, 2),
        "linear": Linear([1.0, -2.0], 0.5),
        "exp": ExpNode(),
        "exp_square": ExpNode(QuadraticForm([[1.0]])),
        "exp_linear": ExpNode(Linear([0.3, -0.2])),
        "cosh": CoshNode(),
        "cosh_norm": CoshNode(Norm(2.0, 2)),
        "scale": Scale(2.5, PowerNorm(3.0, 2.0, 2)),
        "sum": Sum([QuadraticForm(np.eye(2)), ExpNode(Linear([1.0, 1.0]))]),
        "affine": AffinePre(rng.normal(size=(2, 3)), [0.5, -1.0], PowerNorm(2.5, 2.0, 2)),
        "cross_quartic": CrossQuartic(),
    }


def two_person():
    """r = (1, 1), s = (0, 1), w12 = 1."""
    return scalar_quadratic([1.0, 1.0], [0.0, 1.0], {(0, 1): 1.0, (1, 0): 1.0})


_CORPUS = {}


def corpus(count=100, seed=0):
    key = (count, seed)
    if key not in _CORPUS:
        _CORPUS[key] = quadratic_corpus(count, seed=seed)
    return _CORPUS[key]


def random_partition(n, rng):
    labels = rng.integers(0, max(1, n // 2), n)
    return [[int(j) for j in np.flatnonzero(labels == c)] for c in np.unique(labels)]


def clique_corpus(count=25, seed=11):
    """Quadratic-derived heterogeneous games with random partitions."""
    from opiniongames.clique import CliqueGame
    from opiniongames.game import quadratic_to_heterogeneous

    rng = np.random.default_rng(seed)
    return [CliqueGame(h, random_partition(h.n, rng))
            for h in (quadratic_to_heterogeneous(q) for q in corpus()[:count])]
