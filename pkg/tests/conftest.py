import numpy as np
import pytest

from riskratio import ModelSpec, breast_cancer_table, build_design, fit_poisson, toy_dataset
from riskratio.design import DesignData

BREAST_SPEC = ModelSpec("Dead", factors=(("Receptor_Level", "2"), ("Stage", "1")))

# posterior mean of the intercept under a flat prior, n = 20 and s = 7, from
# trapezoid quadrature of exp(7 b) (1 - exp(b))^13 on (-15, 0) with 10^4 panels
INTERCEPT_ONLY_POSTERIOR_MEAN = -1.147739657


def intercept_only(n=20, s=7):
    y = np.zeros(n)
    y[:s] = 1.0
    return DesignData(y=y, X=np.ones((n, 1)), labels=("(Intercept)",))


def log_posterior_intercept_only(b, n=20, s=7):
    b = np.asarray(b, dtype=float)
    out = np.full(b.shape, -np.inf)
    ok = b < 0
    out[ok] = s * b[ok] + (n - s) * np.log1p(-np.exp(b[ok]))
    return out


@pytest.fixture(scope="session")
def breast_design():
    return build_design(breast_cancer_table(), BREAST_SPEC)


@pytest.fixture(scope="session")
def breast_fit(breast_design):
    return fit_poisson(breast_design)


@pytest.fixture(scope="session")
def toy():
    return toy_dataset()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        passed, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {text}")
