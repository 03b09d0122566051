import numpy as np
import pytest

from conftest import random_instance
from fourier_gpc.errors import DomainError
from fourier_gpc.features import sample_frequencies
from fourier_gpc.optim import OptimizerConfig, Status, cg_minimize, check_gradient
from fourier_gpc.variational import EvidenceObjective


def rosenbrock(x):
    f = 100.0 * (x[1] - x[0] ** 2) ** 2 + (1.0 - x[0]) ** 2
    g = np.array([-400.0 * x[0] * (x[1] - x[0] ** 2) - 2.0 * (1.0 - x[0]), 200.0 * (x[1] - x[0] ** 2)])
    return f, g


class Recorder:
    """Wraps an objective and remembers every evaluation."""

    def __init__(self, fn):
        self.fn = fn
        self.calls = []

    def __call__(self, x):
        f, g = self.fn(x)
        self.calls.append((np.array(x), f, np.array(g)))
        return f, g


def test_quadratic_bowl():
    a = np.array([3.0, -2.0])
    res = cg_minimize(lambda x: (np.sum((x - a) ** 2), 2 * (x - a)), np.zeros(2))
    np.testing.assert_allclose(res.x, a, atol=1e-6)
    assert res.status is Status.GRADIENT


def test_rosenbrock():
    res = cg_minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_evals=2000, grad_tol=1e-8))
    np.testing.assert_allclose(res.x, [1.0, 1.0], atol=1e-4)


def test_budget_respected():
    rec = Recorder(rosenbrock)
    res = cg_minimize(rec, [-1.2, 1.0], OptimizerConfig(max_evals=3))
    assert res.evals <= 3 and len(rec.calls) <= 3
    assert res.fun <= rosenbrock(np.array([-1.2, 1.0]))[0]
    assert res.status is Status.BUDGET


def test_zero_budget_returns_start():
    rec = Recorder(rosenbrock)
    res = cg_minimize(rec, [-1.2, 1.0], OptimizerConfig(max_evals=0))
    np.testing.assert_array_equal(res.x, [-1.2, 1.0])
    assert res.evals == 0 and not rec.calls


def test_accepted_values_strictly_decrease():
    res = cg_minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_evals=500))
    assert np.all(np.diff(res.history) < 0)


def test_accepted_steps_satisfy_strong_wolfe():
    cfg = OptimizerConfig(max_evals=400, grad_tol=1e-8)
    rec = Recorder(rosenbrock)
    res = cg_minimize(rec, [-1.2, 1.0], cfg)
    # rebuild the accepted iterates from the evaluation log
    by_value = {}
    for x, f, g in rec.calls:
        by_value.setdefault(f, (x, g))
    iterates = [by_value[f] for f in res.history]
    d = -iterates[0][1]
    for (x0, g0), (x1, g1), f0, f1 in zip(iterates, iterates[1:], res.history, res.history[1:]):
        if g0 @ d >= 0:
            d = -g0
        step = x1 - x0
        alpha = np.dot(step, d) / np.dot(d, d)
        np.testing.assert_allclose(step, alpha * d, rtol=1e-8, atol=1e-14)
        assert f1 <= f0 + cfg.wolfe_c1 * alpha * (g0 @ d)
        assert abs(g1 @ d) <= -cfg.wolfe_c2 * (g0 @ d) * (1 + 1e-12)
        beta = max(0.0, g1 @ (g1 - g0) / (g0 @ g0))
        d = -g1 + beta * d


def test_deterministic():
    a = cg_minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_evals=200))
    b = cg_minimize(rosenbrock, [-1.2, 1.0], OptimizerConfig(max_evals=200))
    assert a.history == b.history
    np.testing.assert_array_equal(a.x, b.x)


def test_non_finite_start_rejected():
    with pytest.raises(DomainError):
        cg_minimize(lambda x: (np.nan, x), np.zeros(2))


def test_backs_off_from_infinite_values():
    # finite only inside the unit ball; minimum at 0.5
    def f(x):
        if np.sum(x**2) >= 1:
            return np.inf, np.full_like(x, np.nan)
        return float(np.sum((x - 0.5) ** 2)), 2 * (x - 0.5)

    res = cg_minimize(f, np.array([-0.5]), OptimizerConfig(max_evals=200))
    np.testing.assert_allclose(res.x, [0.5], atol=1e-6)


def test_flat_direction_stops_cleanly():
    # gradient points the wrong way: line search cannot make progress
    res = cg_minimize(lambda x: (float(x[0]), np.array([-1.0])), np.array([0.0]), OptimizerConfig(max_evals=100))
    assert res.status in (Status.LINE_SEARCH_FAILED, Status.BUDGET)
    assert res.fun <= 0.0


@pytest.mark.parametrize(
    "kwargs", [dict(wolfe_c1=0.5, wolfe_c2=0.4), dict(wolfe_c1=0.6, wolfe_c2=0.9), dict(wolfe_c1=0.0), dict(wolfe_c2=1.0), dict(max_evals=-1)]
)
def test_config_validation(kwargs):
    with pytest.raises(DomainError):
        OptimizerConfig(**kwargs)


class TestCheckGradient:
    def test_exact_gradient(self):
        assert check_gradient(lambda x: (x @ x, 2 * x), np.array([1.0, 2.0, 3.0])) <= 1e-7

    def test_wrong_gradient_detected(self):
        assert check_gradient(lambda x: (x @ x, 4 * x), np.array([1.0, 2.0, 3.0])) >= 0.3

    def test_variational_objective(self, rng):
        X, y, xi = random_instance(rng, n=30, d=2)
        obj = EvidenceObjective(X, y, xi, sample_frequencies(3, 2, 0).W, "rff")
        assert check_gradient(obj, obj.pack(1.1, 0.8)) <= 1e-5
