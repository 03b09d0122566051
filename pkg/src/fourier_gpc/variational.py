"""Variational inference for logistic regression on Fourier features.

The logistic likelihood is replaced by the quadratic lower bound

    log(1 + e^x) <= lam(xi) (x^2 - xi^2) + (x - xi)/2 + log(1 + e^xi),

with ``lam(xi) = (sigmoid(xi) - 1/2) / (2 xi)``, one ``xi`` per training
point.  Under a ``N(0, gamma I)`` prior on the 2D weights this gives a
Gaussian posterior ``N(mu, Sigma)`` and a closed-form evidence bound ``F``.

All dense work is on 2D x 2D matrices.  The factorization kept on the
posterior is of the scaled precision ``M = I + 2 gamma Z' Lam Z``
(``Sigma = gamma M^-1``), whose eigenvalues are >= 1 for any positive
``gamma`` and ``xi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import lapack, solve_triangular

from .errors import DomainError, NumericalError
from .features import project

__all__ = [
    "lambda_of_xi",
    "softplus",
    "sigmoid_bound_rhs",
    "WeightPosterior",
    "BoundDiagnostics",
    "compute_posterior",
    "update_xi",
    "log_bound",
    "EvidenceObjective",
    "objective_gradient",
]

_LAMBDA_ZERO = 1e-8


def lambda_of_xi(xi):
    """Curvature ``(sigmoid(xi) - 1/2) / (2 xi)`` of the bound, even in ``xi``.

    Evaluated as ``tanh(xi/2) / (4 xi)``; returns the limit 1/8 for
    ``|xi| < 1e-8``.
    """
    xi = np.asarray(xi, dtype=np.float64)
    small = np.abs(xi) < _LAMBDA_ZERO
    safe = np.where(small, 1.0, xi)
    lam = np.where(small, 0.125, np.tanh(0.5 * safe) / (4.0 * safe))
    return lam[()] if lam.ndim == 0 else lam


def softplus(x):
    """``log(1 + e^x)`` without overflow."""
    x = np.asarray(x, dtype=np.float64)
    out = np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))
    return out[()] if out.ndim == 0 else out


def sigmoid_bound_rhs(x, xi):
    """Right-hand side of the quadratic upper bound on ``log(1 + e^x)``."""
    x = np.asarray(x, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    return lambda_of_xi(xi) * (x * x - xi * xi) + 0.5 * (x - xi) + softplus(xi)


@dataclass(frozen=True)
class WeightPosterior:
    """Gaussian ``N(mu, Sigma)`` over the 2D feature weights.

    ``chol`` is the lower Cholesky factor of ``I + 2 gamma Z' Lam Z`` (plus
    any jitter that had to be added), so ``Sigma = gamma * inv(chol chol')``.
    """

    mu: np.ndarray
    Sigma: np.ndarray
    chol: np.ndarray
    gamma: float
    b: np.ndarray
    jitter: float = 0.0

    @property
    def dim(self) -> int:
        return self.mu.shape[0]

    def logdet_scaled_precision(self) -> float:
        """``log|I + 2 gamma Z' Lam Z|``, equal to ``-log|Sigma / gamma|``."""
        return 2.0 * float(np.sum(np.log(np.diag(self.chol))))


@dataclass(frozen=True)
class BoundDiagnostics:
    log_F: float
    log_C: float
    objective: float


def _potrf(M):
    L, info = lapack.dpotrf(M, lower=1, clean=1, overwrite_a=0)
    return L, info


def _cholesky_with_jitter(M):
    """Lower Cholesky factor of ``M``, adding diagonal jitter if needed.

    Jitter starts at ``1e-10 * s`` and grows tenfold up to ``1e-4 * s``,
    where ``s`` is the mean absolute diagonal entry (1 if that is zero).
    """
    L, info = _potrf(M)
    if not np.all(np.isfinite(M)):
        # some LAPACK builds let NaN pivots through; locate the first bad row instead
        if info == 0:
            info = int(np.flatnonzero(~np.all(np.isfinite(L), axis=1))[0]) + 1
        raise NumericalError(
            f"Cholesky failed at pivot {info}: matrix has non-finite entries", pivot=int(info)
        )
    if info == 0:
        return L, 0.0
    m = M.shape[0]
    scale = float(np.mean(np.abs(np.diag(M)))) or 1.0
    jitter = 1e-10 * scale
    while jitter <= 1e-4 * scale * (1 + 1e-12):
        L, info2 = _potrf(M + jitter * np.eye(m))
        if info2 == 0:
            return L, jitter
        info = info2
        jitter *= 10.0
    raise NumericalError(
        f"Cholesky failed at pivot {info} even with jitter {jitter / 10:.3g}", pivot=int(info)
    )


def _check_inputs(Z, y, gamma, xi):
    Z = np.asarray(Z, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64).ravel()
    xi = np.asarray(xi, dtype=np.float64).ravel()
    if Z.ndim != 2:
        raise DomainError(f"feature matrix must be 2-D, got shape {Z.shape}")
    if Z.shape[0] != y.shape[0] or xi.shape[0] != y.shape[0]:
        raise DomainError(
            f"row counts differ: Z has {Z.shape[0]}, y has {y.shape[0]}, xi has {xi.shape[0]}"
        )
    if not (np.isfinite(gamma) and gamma > 0):
        raise DomainError(f"gamma must be positive and finite, got {gamma}")
    return Z, y, xi


def compute_posterior(Z, y, gamma: float, xi) -> WeightPosterior:
    """Posterior over the weights for fixed ``gamma`` and ``xi``.

    ``Sigma = (2 Z' Lam Z + I/gamma)^-1`` and ``mu = Sigma Z' (y - 1/2)``,
    from one Cholesky factorization of a 2D x 2D matrix.  Cost is
    ``O(n D^2 + D^3)``.
    """
    Z, y, xi = _check_inputs(Z, y, gamma, xi)
    m = Z.shape[1]
    lam = lambda_of_xi(xi)
    A = Z.T @ (lam[:, None] * Z)
    M = 2.0 * gamma * A
    M[np.diag_indices(m)] += 1.0
    L, jitter = _cholesky_with_jitter(M)
    b = Z.T @ (y - 0.5)
    Linv = solve_triangular(L, np.eye(m), lower=True, check_finite=False)
    S = Linv.T @ Linv
    Sigma = gamma * 0.5 * (S + S.T)
    mu = gamma * solve_triangular(L.T, Linv @ b, lower=False, check_finite=False)
    return WeightPosterior(mu=mu, Sigma=Sigma, chol=L, gamma=float(gamma), b=b, jitter=jitter)


def update_xi(Z, posterior: WeightPosterior) -> np.ndarray:
    """Variational parameters ``sqrt(z_i' (Sigma + mu mu') z_i)`` for each row."""
    Z = np.asarray(Z, dtype=np.float64)
    quad = np.einsum("ij,ij->i", Z @ posterior.Sigma, Z)
    zm = Z @ posterior.mu
    xi = np.sqrt(np.maximum(quad, 0.0) + zm * zm)
    # Sigma is positive definite and rows are nonzero, so only round-off can hit 0
    return np.maximum(xi, np.finfo(float).tiny)


def log_bound(Z, y, gamma: float, xi, posterior: WeightPosterior | None = None) -> BoundDiagnostics:
    """Log of the evidence lower bound and the hyperparameter objective.

    ``log_F = log_C + 1/2 log|Sigma/gamma| + 1/2 mu' Sigma^-1 mu`` and the
    objective ``-log|2 gamma Z' Lam Z + I| + v' Z Sigma Z' v`` equals
    ``2 (log_F - log_C)``.
    """
    Z, y, xi = _check_inputs(Z, y, gamma, xi)
    if posterior is None:
        posterior = compute_posterior(Z, y, gamma, xi)
    log_C = float(np.sum(lambda_of_xi(xi) * xi * xi + 0.5 * xi - softplus(xi)))
    objective = -posterior.logdet_scaled_precision() + float(posterior.b @ posterior.mu)
    return BoundDiagnostics(log_F=log_C + 0.5 * objective, log_C=log_C, objective=objective)


class EvidenceObjective:
    """Negated hyperparameter objective and its gradient, for a minimizer.

    With ``xi`` held fixed, maximizes over the feature parameters and
    ``gamma``

        J = -log|2 gamma Z' Lam Z + I| + v' Z (2 Z' Lam Z + I/gamma)^-1 Z' v.

    Parameter vector layout:

    * ``"rff"``: ``[log sigma, log gamma]`` with the frequencies fixed to
      ``W``.
    * ``"vff"``: ``[V.ravel(), log gamma]`` where ``V = W / sigma`` is the
      learned D x d frequency matrix (row-major).

    With ``ridge=True`` the VFF value gains ``0.5 * |V|^2``.

    A numerical breakdown at a finite parameter vector yields ``inf`` so a
    line search can back off; a non-finite parameter vector is rejected.
    """

    def __init__(self, X, y, xi, W, mode: str = "rff", ridge: bool = False):
        self.X = np.asarray(X, dtype=np.float64)
        self.y = np.asarray(y, dtype=np.float64).ravel()
        self.xi = np.asarray(xi, dtype=np.float64).ravel()
        self.W = np.asarray(W, dtype=np.float64)
        if mode not in ("rff", "vff"):
            raise DomainError(f"mode must be 'rff' or 'vff', got {mode!r}")
        self.mode = mode
        self.ridge = bool(ridge)
        n, d = self.X.shape
        if self.W.ndim != 2 or self.W.shape[1] != d:
            raise DomainError(f"frequency matrix shape {self.W.shape} does not match d={d}")
        if self.y.shape[0] != n or self.xi.shape[0] != n:
            raise DomainError("X, y and xi must have the same number of rows")
        self.lam = lambda_of_xi(self.xi)
        self.v = self.y - 0.5
        self._Z = np.empty((n, 2 * self.W.shape[0]))
        self.n_evals = 0

    @property
    def size(self) -> int:
        return 2 if self.mode == "rff" else self.W.size + 1

    def pack(self, sigma: float, gamma: float, V=None) -> np.ndarray:
        if self.mode == "rff":
            return np.array([math.log(sigma), math.log(gamma)])
        V = self.W / sigma if V is None else np.asarray(V, dtype=np.float64)
        return np.concatenate([V.ravel(), [math.log(gamma)]])

    def unpack(self, theta):
        """Return ``(frequencies, sigma, gamma)`` for a parameter vector."""
        theta = np.asarray(theta, dtype=np.float64)
        if theta.shape != (self.size,):
            raise DomainError(f"parameter vector must have length {self.size}, got {theta.shape}")
        if not np.all(np.isfinite(theta)):
            raise DomainError("parameter vector has non-finite entries")
        gamma = math.exp(theta[-1]) if theta[-1] < 709.0 else math.inf
        if self.mode == "rff":
            sigma = math.exp(theta[0]) if abs(theta[0]) < 709.0 else (math.inf if theta[0] > 0 else 0.0)
            return self.W, sigma, gamma
        return theta[:-1].reshape(self.W.shape), 1.0, gamma

    def features(self, theta) -> np.ndarray:
        W, sigma, _ = self.unpack(theta)
        return project(self.X, W, sigma, out=self._Z)

    def __call__(self, theta):
        W, sigma, gamma = self.unpack(theta)
        self.n_evals += 1
        bad = (math.inf, np.full(self.size, np.nan))
        if not (0.0 < sigma < math.inf and 0.0 < gamma < math.inf):
            return bad
        Z = project(self.X, W, sigma, out=self._Z)
        try:
            post = compute_posterior(Z, self.y, gamma, self.xi)
        except NumericalError:
            return bad
        mu, Sigma = post.mu, post.Sigma
        m = Z.shape[1]
        J = -post.logdet_scaled_precision() + float(post.b @ mu)

        # dJ/dZ = -4 Lam Z (Sigma + mu mu') + 2 v mu'
        Zm = Z @ mu
        G = -4.0 * self.lam[:, None] * (Z @ Sigma + np.outer(Zm, mu)) + 2.0 * np.outer(self.v, mu)
        # chain through cos/sin: d cos(u) = -sin(u) du, d sin(u) = cos(u) du
        H = Z[:, 1::2] * G[:, 0::2]
        np.subtract(Z[:, 0::2] * G[:, 1::2], H, out=H)

        grad = np.empty(self.size)
        grad[-1] = -m + (np.trace(Sigma) + mu @ mu) / gamma
        if self.mode == "rff":
            U = self.X @ W.T
            U /= sigma
            grad[0] = -float(np.sum(H * U))
        else:
            grad[:-1] = (H.T @ self.X).ravel()

        value = -J
        grad = -grad
        if self.ridge and self.mode == "vff":
            value += 0.5 * float(np.sum(W * W))
            grad[:-1] += W.ravel()
        if not np.isfinite(value):
            return bad
        return value, grad


def objective_gradient(theta, X, y, xi, basis, mode: str = "rff", ridge: bool = False):
    """Negated objective and gradient at ``theta``; see :class:`EvidenceObjective`."""
    W = getattr(basis, "W", basis)
    return EvidenceObjective(X, y, xi, W, mode=mode, ridge=ridge)(theta)
