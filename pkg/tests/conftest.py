from pathlib import Path

import numpy as np
import pytest

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def random_instance(rng, n=30, d=2, D=3):
    """Small random classification instance with features, labels and xi."""
    X = rng.normal(size=(n, d))
    y = (rng.random(n) < 0.5).astype(float)
    xi = rng.uniform(0.3, 3.0, size=n)
    return X, y, xi


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    results = getattr(mod, "RESULTS", None)
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(results):
        ok, line = results[num]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'} [{num:2d}] {line}")
