"""Fourier feature map for the squared-exponential kernel.

Inputs are mapped to ``z(x) = D**-0.5 * (cos(v_1.x), sin(v_1.x), ...,
cos(v_D.x), sin(v_D.x))`` with ``v_j = w_j / sigma``.  The cos/sin pairs
are interleaved; serialized posteriors depend on this layout.

Frequencies are drawn with a frozen recipe so that a given ``(D, d, seed)``
yields the same matrix on every platform and numpy release: raw 64-bit
words from PCG64 are turned into open-interval uniforms
``((word >> 11) + 0.5) / 2**53`` and pushed through the inverse normal CDF.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass

import numpy as np
from scipy.special import ndtri

from .errors import DomainError

__all__ = [
    "BasisMode",
    "FrequencyBasis",
    "standard_normal",
    "sample_frequencies",
    "project",
    "se_kernel",
    "approx_kernel",
]


class BasisMode(str, enum.Enum):
    FIXED_RANDOM = "fixed_random"
    LEARNABLE = "learnable"


@dataclass(frozen=True)
class FrequencyBasis:
    """A D x d matrix of Fourier frequencies, one frequency per row.

    For a fixed random basis ``W`` holds unit-scale standard-normal draws and
    the length-scale is applied separately.  A learnable basis holds
    frequencies with the length-scale already divided in.
    """

    W: np.ndarray
    mode: BasisMode = BasisMode.FIXED_RANDOM
    seed: int | None = None

    def __post_init__(self):
        W = np.array(self.W, dtype=np.float64, copy=True)
        if W.ndim != 2 or W.shape[0] < 1 or W.shape[1] < 1:
            raise DomainError(f"frequency matrix must be 2-D and non-empty, got shape {W.shape}")
        if not np.all(np.isfinite(W)):
            raise DomainError("frequency matrix has non-finite entries")
        W.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "mode", BasisMode(self.mode))

    @property
    def D(self) -> int:
        return self.W.shape[0]

    @property
    def d(self) -> int:
        return self.W.shape[1]


def standard_normal(shape, seed: int) -> np.ndarray:
    """Seeded standard-normal draws using the frozen inverse-CDF recipe."""
    size = int(np.prod(shape))
    bits = np.random.PCG64(seed).random_raw(size)
    u = ((bits >> np.uint64(11)).astype(np.float64) + 0.5) * 2.0**-53
    return ndtri(u).reshape(shape)


def sample_frequencies(D: int, d: int, seed: int) -> FrequencyBasis:
    """Draw a fixed D x d frequency matrix with i.i.d. N(0, 1) entries."""
    if int(D) != D or int(d) != d or D < 1 or d < 1:
        raise DomainError(f"need D >= 1 and d >= 1, got D={D}, d={d}")
    W = standard_normal((int(D), int(d)), seed)
    return FrequencyBasis(W, BasisMode.FIXED_RANDOM, int(seed))


def _check_sigma(sigma):
    if not np.isfinite(sigma) or sigma <= 0:
        raise DomainError(f"sigma must be a positive finite number, got {sigma}")


def project(X, basis: FrequencyBasis | np.ndarray, sigma: float = 1.0, out=None) -> np.ndarray:
    """Map the rows of ``X`` to the 2D-dimensional feature space.

    Parameters
    ----------
    X : array_like, shape (n, d)
        Input points.  A 1-D array is treated as a single row.
    basis : FrequencyBasis or ndarray, shape (D, d)
        Frequencies.
    sigma : float
        Length-scale dividing every frequency.
    out : ndarray, shape (n, 2D), optional
        Preallocated buffer to write the features into.

    Returns
    -------
    ndarray, shape (n, 2D)
        Interleaved ``(cos, sin)`` features scaled by ``D**-0.5``.
    """
    _check_sigma(sigma)
    W = basis.W if isinstance(basis, FrequencyBasis) else np.asarray(basis, dtype=np.float64)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != W.shape[1]:
        raise DomainError(f"input has shape {X.shape}, expected (n, {W.shape[1]})")
    D = W.shape[0]
    # divide after the product: rescaling (X, sigma) by a power of two is then exact
    U = X @ W.T
    if sigma != 1.0:
        U /= sigma
    if out is None:
        out = np.empty((X.shape[0], 2 * D))
    np.cos(U, out=out[:, 0::2])
    np.sin(U, out=out[:, 1::2])
    out *= 1.0 / np.sqrt(D)
    return out


def _pair(x, x2):
    x = np.atleast_1d(np.asarray(x, dtype=np.float64))
    x2 = np.atleast_1d(np.asarray(x2, dtype=np.float64))
    if x.shape != x2.shape or x.ndim != 1:
        raise DomainError(f"points must be vectors of equal length, got {x.shape} and {x2.shape}")
    return x, x2


def se_kernel(x, x2, sigma: float, gamma: float = 1.0) -> float:
    """Exact squared-exponential kernel ``gamma * exp(-|x - x2|^2 / (2 sigma^2))``."""
    x, x2 = _pair(x, x2)
    _check_sigma(sigma)
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    r2 = float(np.sum((x - x2) ** 2))
    return gamma * np.exp(-r2 / (2.0 * sigma**2))


def approx_kernel(x, x2, basis: FrequencyBasis, sigma: float, gamma: float = 1.0) -> float:
    """Feature-space approximation ``gamma * z(x).z(x2)`` of :func:`se_kernel`.

    Diagnostic only; training never forms kernel values.
    """
    x, x2 = _pair(x, x2)
    if gamma <= 0:
        raise DomainError(f"gamma must be positive, got {gamma}")
    z = project(x, basis, sigma)[0]
    z2 = project(x2, basis, sigma)[0]
    return gamma * float(z @ z2)
