"""
Seeded random instances for experiments and property tests.
"""

from __future__ import annotations

import numpy as np
from scipy.stats import ortho_group

from .game import QuadraticGame


def random_pd(rng: np.random.Generator, m: int, lo: float = 0.5, hi: float = 2.0) -> np.ndarray:
    """Symmetric matrix with eigenvalues drawn uniformly from [lo, hi]."""
    Q = ortho_group.rvs(m, random_state=rng) if m > 1 else np.ones((1, 1))
    M = (Q * rng.uniform(lo, hi, size=m)) @ Q.T
    return 0.5 * (M + M.T)


def random_psd(rng: np.random.Generator, m: int, scale: float = 1.0) -> np.ndarray:
    """Random PSD matrix G'G / m with a random rank between 1 and m."""
    k = int(rng.integers(1, m + 1))
    G = rng.normal(size=(k, m))
    M = scale * (G.T @ G) / m
    return 0.5 * (M + M.T)


def random_quadratic(n: int, m: int, density: float = 0.5, seed: int = 0,
                     weight_scale: float = 1.0) -> QuadraticGame:
    """Undirected quadratic game with PD internal weights and PSD edge weights.

    Each unordered pair becomes an edge with probability ``density``.
    """
    if n < 1 or m < 1:
        raise ValueError("n and m must be positive")
    if not 0.0 <= density <= 1.0:
        raise ValueError("density must lie in [0, 1]")
    rng = np.random.default_rng(seed)
    R = [random_pd(rng, m) for _ in range(n)]
    s = [rng.normal(size=m) for _ in range(n)]
    W = {}
    for i in range(n):
        for j in range(i + 1, n):
            if rng.random() < density:
                w = random_psd(rng, m, weight_scale)
                W[(i, j)] = w
                W[(j, i)] = w.copy()
    return QuadraticGame(m, R, s, W)


def quadratic_corpus(count: int = 100, seed: int = 0, max_n: int = 10,
                     max_m: int = 4) -> list[QuadraticGame]:
    """``count`` games with n in [2, max_n] and m in [1, max_m]."""
    rng = np.random.default_rng(seed)
    games = []
    for _ in range(count):
        n = int(rng.integers(2, max_n + 1))
        m = int(rng.integers(1, max_m + 1))
        density = float(rng.uniform(0.2, 1.0))
        games.append(random_quadratic(n, m, density, seed=int(rng.integers(2**32))))
    return games
