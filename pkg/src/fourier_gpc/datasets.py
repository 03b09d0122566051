"""Seeded synthetic binary-classification datasets."""

from __future__ import annotations

import numpy as np

from .data import Dataset

__all__ = ["make_blobs", "make_annulus", "make_anisotropic", "blobs_bayes_accuracy"]


def _rng(seed):
    return np.random.Generator(np.random.PCG64(seed))


def make_blobs(n: int = 2000, seed: int = 0, center: float = 2.0) -> Dataset:
    """Two unit-covariance Gaussians at ``+-(center, center)``, equal class sizes."""
    rng = _rng(seed)
    y = np.repeat([0, 1], [n // 2, n - n // 2])
    X = rng.standard_normal((n, 2)) + np.where(y[:, None] == 1, center, -center)
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm])


def blobs_bayes_accuracy(center: float = 2.0) -> float:
    """Bayes-rule accuracy for :func:`make_blobs`: ``Phi(|c| * sqrt(2))``."""
    from scipy.stats import norm

    return float(norm.cdf(abs(center) * np.sqrt(2.0)))


def make_annulus(n: int = 2000, seed: int = 0, r_inner: float = 1.0, r_outer: float = 3.0,
                 noise: float = 0.25) -> Dataset:
    """Class 0 on a ring of radius ``r_inner``, class 1 on radius ``r_outer``."""
    rng = _rng(seed)
    y = np.repeat([0, 1], [n // 2, n - n // 2])
    theta = rng.uniform(0.0, 2.0 * np.pi, n)
    r = np.where(y == 1, r_outer, r_inner) + noise * rng.standard_normal(n)
    X = np.column_stack([r * np.cos(theta), r * np.sin(theta)])
    perm = rng.permutation(n)
    return Dataset(X[perm], y[perm])


def make_anisotropic(n: int = 1000, d: int = 20, seed: int = 0, flip: float = 0.05) -> Dataset:
    """Labels depend on two coordinates only; the other ``d - 2`` are noise.

    The label is 1 when ``x_0 + x_1 > 0`` (a linear boundary in the first
    two coordinates), with a fraction ``flip`` of labels inverted.  The
    informative pair has small scale relative to the noise dimensions.
    """
    rng = _rng(seed)
    X = rng.standard_normal((n, d))
    X[:, :2] *= 0.5
    y = (X[:, 0] + X[:, 1] > 0).astype(np.int64)
    flipped = rng.random(n) < flip
    y = np.where(flipped, 1 - y, y)
    return Dataset(X, y)
