"""Polak-Ribiere+ nonlinear conjugate gradient with a strong Wolfe line search.

The objective is a callable returning ``(value, gradient)``.  Every call
counts as one evaluation against the budget.  Only steps satisfying both
strong Wolfe conditions are accepted, so accepted values strictly decrease.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np

from .errors import DomainError

__all__ = ["OptimizerConfig", "Status", "CGResult", "cg_minimize", "check_gradient"]

Objective = Callable[[np.ndarray], tuple]


@dataclass(frozen=True)
class OptimizerConfig:
    """Stopping rules and line-search constants.

    ``max_evals`` is the evaluation budget for one call; 0 returns the
    starting point untouched.
    """

    max_evals: int = 100
    grad_tol: float = 1e-5
    step_tol: float = 1e-9
    wolfe_c1: float = 1e-4
    wolfe_c2: float = 0.1

    def __post_init__(self):
        if self.max_evals < 0:
            raise DomainError(f"max_evals must be >= 0, got {self.max_evals}")
        if not (0.0 < self.wolfe_c1 < 0.5 and self.wolfe_c1 < self.wolfe_c2 < 1.0):
            raise DomainError(
                f"need 0 < c1 < 0.5 and c1 < c2 < 1, got c1={self.wolfe_c1}, c2={self.wolfe_c2}"
            )
        if self.grad_tol < 0 or self.step_tol < 0:
            raise DomainError("tolerances must be non-negative")


class Status(str, enum.Enum):
    GRADIENT = "gradient_tol"
    STEP = "step_tol"
    BUDGET = "budget_exhausted"
    LINE_SEARCH_FAILED = "line_search_failed"


class CGResult(NamedTuple):
    x: np.ndarray
    fun: float
    evals: int
    status: Status
    iterations: int
    history: list = []


class _Budget(Exception):
    pass


@dataclass
class _Counter:
    fn: Objective
    limit: int
    evals: int = 0

    def __call__(self, x):
        if self.evals >= self.limit:
            raise _Budget
        self.evals += 1
        f, g = self.fn(x)
        return float(f), np.asarray(g, dtype=np.float64)


def _cubicmin(a, fa, fpa, b, fb, c, fc):
    # minimizer of the cubic through (a, fa, fpa), (b, fb), (c, fc)
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            C = fpa
            db = b - a
            dc = c - a
            denom = (db * dc) ** 2 * (db - dc)
            d1 = np.array([[dc**2, -(db**2)], [-(dc**3), db**3]])
            A, B = d1 @ np.array([fb - fa - C * db, fc - fa - C * dc]) / denom
            radical = B * B - 3 * A * C
            xmin = a + (-B + np.sqrt(radical)) / (3 * A)
        except (ArithmeticError, FloatingPointError):
            return None
    return xmin if np.isfinite(xmin) else None


def _quadmin(a, fa, fpa, b, fb):
    with np.errstate(divide="raise", over="raise", invalid="raise"):
        try:
            db = b - a
            B = (fb - fa - fpa * db) / (db * db)
            xmin = a - fpa / (2.0 * B)
        except (ArithmeticError, FloatingPointError):
            return None
    return xmin if np.isfinite(xmin) else None


def _zoom(phi, lo, hi, f0, g0, c1, c2, max_iter=30):
    """Shrink ``[lo, hi]`` until a strong Wolfe point is found.

    ``lo`` and ``hi`` are ``(alpha, f, dphi, x, g)`` tuples; ``lo`` always
    satisfies sufficient decrease.
    """
    prev = None
    for i in range(max_iter):
        a_lo, f_lo, d_lo = lo[:3]
        a_hi, f_hi = hi[:2]
        span = a_hi - a_lo
        left, right = min(a_lo, a_hi), max(a_lo, a_hi)
        trial = None
        if i > 0 and prev is not None:
            trial = _cubicmin(a_lo, f_lo, d_lo, a_hi, f_hi, prev[0], prev[1])
        if trial is None or not (left + 0.2 * abs(span) < trial < right - 0.2 * abs(span)):
            trial = _quadmin(a_lo, f_lo, d_lo, a_hi, f_hi) if np.isfinite(f_hi) else None
            if trial is None or not (left + 0.1 * abs(span) < trial < right - 0.1 * abs(span)):
                trial = a_lo + 0.5 * span
        f, g, x, dphi = phi(trial)
        point = (trial, f, dphi, x, g)
        if not np.isfinite(f) or f > f0 + c1 * trial * g0 or f >= f_lo:
            prev = hi
            hi = point
        else:
            if abs(dphi) <= -c2 * g0:
                return point
            prev = hi
            if dphi * (a_hi - a_lo) >= 0:
                hi = lo
            lo = point
        if abs(hi[0] - lo[0]) <= 1e-14 * max(1.0, abs(lo[0])):
            break
    return None


def _line_search(fn, x, f0, grad0, d, alpha0, c1, c2, max_iter=30):
    """Strong Wolfe step along ``d``; returns ``(alpha, f, x, g)`` or None."""
    g0 = float(grad0 @ d)

    def phi(alpha):
        xa = x + alpha * d
        f, g = fn(xa)
        dphi = float(g @ d) if np.isfinite(f) else math.nan
        return f, g, xa, dphi

    prev = (0.0, f0, g0, x, grad0)
    alpha = alpha0
    for i in range(max_iter):
        f, g, xa, dphi = phi(alpha)
        point = (alpha, f, dphi, xa, g)
        if not np.isfinite(f):
            res = _zoom(phi, prev, point, f0, g0, c1, c2)
        elif f > f0 + c1 * alpha * g0 or (i > 0 and f >= prev[1]):
            res = _zoom(phi, prev, point, f0, g0, c1, c2)
        elif abs(dphi) <= -c2 * g0:
            res = point
        elif dphi >= 0:
            res = _zoom(phi, point, prev, f0, g0, c1, c2)
        else:
            prev = point
            alpha *= 2.0
            continue
        if res is None:
            return None
        return res[0], res[1], res[3], res[4]
    return None


def cg_minimize(objective: Objective, x0, config: OptimizerConfig | None = None) -> CGResult:
    """Minimize ``objective`` from ``x0`` with Polak-Ribiere+ conjugate gradients.

    Parameters
    ----------
    objective : callable
        ``objective(x) -> (value, gradient)``.
    x0 : array_like
        Starting point.
    config : OptimizerConfig, optional
        Budget, tolerances and Wolfe constants.

    Returns
    -------
    CGResult
        Best accepted iterate, its value, evaluations used and stop reason.
        ``history`` lists the accepted objective values in order.

    Raises
    ------
    DomainError
        If the objective is not finite at ``x0``.
    """
    config = config or OptimizerConfig()
    x = np.array(x0, dtype=np.float64).ravel()
    if config.max_evals == 0:
        return CGResult(x, math.nan, 0, Status.BUDGET, 0, [])

    fn = _Counter(objective, config.max_evals)
    f, g = fn(x)
    if not (np.isfinite(f) and np.all(np.isfinite(g))):
        raise DomainError(f"objective is not finite at the starting point (value {f})")
    history = [f]
    d = -g
    f_prev = None
    status = Status.BUDGET
    it = 0
    restarted = False
    try:
        while True:
            if np.max(np.abs(g), initial=0.0) <= config.grad_tol:
                status = Status.GRADIENT
                break
            slope = float(g @ d)
            if slope >= 0:
                d = -g
                slope = -float(g @ g)
            if f_prev is None:
                alpha0 = min(1.0, 1.0 / max(np.linalg.norm(g), 1e-300))
            else:
                alpha0 = min(1.0, 1.01 * 2.0 * (f - f_prev) / slope)
                if not (alpha0 > 0 and np.isfinite(alpha0)):
                    alpha0 = 1.0
            res = _line_search(fn, x, f, g, d, alpha0, config.wolfe_c1, config.wolfe_c2)
            if res is None:
                if restarted or np.array_equal(d, -g):
                    status = Status.LINE_SEARCH_FAILED
                    break
                d = -g
                restarted = True
                f_prev = None
                continue
            restarted = False
            alpha, f_new, x_new, g_new = res
            step = np.max(np.abs(x_new - x), initial=0.0)
            beta = max(0.0, float(g_new @ (g_new - g)) / float(g @ g))
            d = -g_new + beta * d
            f_prev, f, x, g = f, f_new, x_new, g_new
            history.append(f)
            it += 1
            if step <= config.step_tol * (1.0 + np.max(np.abs(x), initial=0.0)):
                status = Status.STEP
                break
    except _Budget:
        status = Status.BUDGET
    return CGResult(x, f, fn.evals, status, it, history)


def check_gradient(objective: Objective, x, step: float = 1e-5) -> float:
    """Largest relative error between the analytic and central-difference gradient.

    Relative error per coordinate is ``|a - n| / max(1e-8, |a| + |n|)``.
    """
    x = np.array(x, dtype=np.float64).ravel()
    _, g = objective(x)
    g = np.asarray(g, dtype=np.float64).ravel()
    num = np.empty_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        num[i] = (objective(x + e)[0] - objective(x - e)[0]) / (2.0 * step)
    rel = np.abs(g - num) / np.maximum(1e-8, np.abs(g) + np.abs(num))
    return float(np.max(rel, initial=0.0))
