import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

from s2gd import ObjectiveSpec, SparseDataset, generate_least_squares, generate_logistic  # noqa: E402

settings.register_profile(
    "default", deadline=None, max_examples=50, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("default")


def random_spec(loss, n=20, d=5, lam=0.1, seed=0, density=1.0):
    if loss == "least_squares":
        data, _ = generate_least_squares(n, d, kappa=10.0, density=density, seed=seed)
    else:
        data = generate_logistic(n, d, density=density, seed=seed)
    return ObjectiveSpec(data, loss, lam=lam)


@pytest.fixture(scope="session", params=["least_squares", "logistic"])
def loss(request):
    return request.param


@pytest.fixture
def small_spec(loss):
    return random_spec(loss)


def scalar_quadratic():
    """n = 1, d = 1, f(x) = x^2 / 2."""
    data = SparseDataset.from_dense(np.array([[1.0]]), np.array([0.0]))
    return ObjectiveSpec(data, "least_squares")


def pytest_terminal_summary(terminalreporter):
    from acceptance_log import RESULTS

    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(RESULTS):
        ok, detail = RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if ok else 'FAIL'} - {detail}")
