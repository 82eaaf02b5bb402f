import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_density(q, rng, rank=None, real=False):
    rank = q if rank is None else rank
    X = rng.standard_normal((q, rank))
    if not real:
        X = X + 1j * rng.standard_normal((q, rank))
    rho = X @ X.conj().T
    return rho / np.trace(rho).real


def random_hermitian(q, rng, real=False):
    X = rng.standard_normal((q, q))
    if not real:
        X = X + 1j * rng.standard_normal((q, q))
    return (X + X.conj().T) / 2


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("tests.test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(mod.RESULTS, key=lambda s: int(s.split("criterion")[1].split("(")[0])):
        terminalreporter.write_line(line)
