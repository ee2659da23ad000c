"""Synthetic dataset generators used by the test suite and benchmarks."""

from __future__ import annotations

import numpy as np

from .dataset import Dataset


def imbalanced_blobs(
    n_neg: int,
    n_pos: int,
    p: int = 6,
    n_informative: int = 3,
    separation: float = 2.0,
    seed: int = 0,
) -> Dataset:
    """Two Gaussian clouds; the positive class is shifted by ``separation``
    along the first ``n_informative`` axes. No resampling anywhere: the
    returned class ratio is exactly n_pos:n_neg."""
    rng = np.random.default_rng(seed)
    Xn = rng.normal(0.0, 1.0, size=(n_neg, p))
    Xp = rng.normal(0.0, 1.0, size=(n_pos, p))
    Xp[:, :n_informative] += separation
    X = np.vstack([Xn, Xp])
    y = np.concatenate([np.zeros(n_neg, dtype=int), np.ones(n_pos, dtype=int)])
    order = rng.permutation(len(y))
    names = [f"f{j}" for j in range(p)]
    return Dataset(names, X[order], y[order])


def xor_data(n: int = 4000, seed: int = 0, noise: float = 0.0) -> Dataset:
    """Two uniform features on [-1, 1]; label is 1 when their signs disagree.

    No univariate additive model can separate this; a single pairwise
    term can.
    """
    rng = np.random.default_rng(seed)
    X = rng.uniform(-1.0, 1.0, size=(n, 2))
    y = (X[:, 0] * X[:, 1] < 0).astype(int)
    if noise > 0:
        flip = rng.random(n) < noise
        y = np.where(flip, 1 - y, y)
    return Dataset(["f0", "f1"], X, y)


def monotone_informative(
    n: int = 3000,
    p: int = 6,
    n_informative: int = 2,
    seed: int = 0,
    coef: float = 2.0,
) -> Dataset:
    """Labels drawn from a logistic model over the first ``n_informative``
    columns; remaining columns are pure noise."""
    rng = np.random.default_rng(seed)
    X = rng.normal(0.0, 1.0, size=(n, p))
    logit = coef * X[:, :n_informative].sum(axis=1)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-logit))).astype(int)
    names = [f"f{j}" for j in range(p)]
    return Dataset(names, X, y)
