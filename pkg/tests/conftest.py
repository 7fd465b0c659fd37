import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from gexpect.expectation import Model, clear_cache

settings.register_profile("default", deadline=None, max_examples=40,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES = {}


@pytest.fixture(scope="session")
def bm():
    """Standard Brownian motion on [0, 1] with 100 steps."""
    return Model.standard()


@pytest.fixture(autouse=True, scope="module")
def _fresh_paths():
    clear_cache()
    yield
    clear_cache()


def record(criterion, passed, detail):
    ACCEPTANCE_LINES[criterion] = f"criterion {criterion:>2}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])


def gaussian_expectation(f, mean=0.0, sd=1.0):
    """E[f(mean + sd N)] by adaptive quadrature."""
    from scipy import integrate
    from scipy.stats import norm

    val, _ = integrate.quad(lambda u: f(mean + sd * u) * norm.pdf(u), -12, 12, limit=400, points=[0.0])
    return val


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
