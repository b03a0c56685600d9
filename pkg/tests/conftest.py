import math

import numpy as np
import pytest
from scipy import integrate

ACCEPTANCE_LINES = []


def record_criterion(number, name, passed, detail):
    line = f"[{'PASS' if passed else 'FAIL'}] criterion {number}: {name} -- {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return passed


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


# ---------------------------------------------------------------------------
# closed-form / quadrature oracles, independent of the package


def bernoulli_kl(p, q):
    """KL(Ber(p) || Ber(q)) straight from the definition."""
    total = 0.0
    for a, b in ((p, q), (1 - p, 1 - q)):
        if a > 0:
            total += a * math.log(a / b)
    return total


def gaussian_kl(mu_p, cov_p, mu_q, cov_q):
    """KL(N(mu_p, cov_p) || N(mu_q, cov_q)) for multivariate normals."""
    mu_p, mu_q = np.atleast_1d(mu_p).astype(float), np.atleast_1d(mu_q).astype(float)
    cov_p, cov_q = np.atleast_2d(cov_p).astype(float), np.atleast_2d(cov_q).astype(float)
    inv_q = np.linalg.inv(cov_q)
    diff = mu_q - mu_p
    k = mu_p.size
    return 0.5 * (np.trace(inv_q @ cov_p) + diff @ inv_q @ diff - k
                  + math.log(np.linalg.det(cov_q) / np.linalg.det(cov_p)))


def quadrature_kl_normal(mu_p, mu_q, sd=1.0):
    """1-D KL(N(mu_p, sd^2) || N(mu_q, sd^2)) by numerical integration."""
    def integrand(x):
        lp = -0.5 * ((x - mu_p) / sd) ** 2
        lq = -0.5 * ((x - mu_q) / sd) ** 2
        return math.exp(lp) / (sd * math.sqrt(2 * math.pi)) * (lp - lq)
    return integrate.quad(integrand, -np.inf, np.inf)[0]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
