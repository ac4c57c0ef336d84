import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def random_spd(rng, d, cond=None):
    """Random SPD matrix; with ``cond`` its eigenvalues span [1, cond] exactly."""
    Q, _ = np.linalg.qr(rng.standard_normal((d, d)))
    if cond is None:
        lam = rng.uniform(0.5, 5.0, d)
    else:
        lam = np.geomspace(1.0, cond, d)
    A = (Q * lam) @ Q.T
    return 0.5 * (A + A.T)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(line)
