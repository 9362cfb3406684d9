import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("dsl", deadline=None, max_examples=25, derandomize=True)
settings.load_profile("dsl")


def random_density(dim, rng, rank=None):
    rank = dim if rank is None else rank
    z = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    rho = z @ z.conj().T
    return rho / np.trace(rho).real


def random_unitary(dim, rng):
    z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    q, r = np.linalg.qr(z)
    return q * (np.diagonal(r) / np.abs(np.diagonal(r)))


def coherent_vector(alpha, n):
    from math import lgamma

    alpha = complex(alpha)
    k = np.arange(n)
    if alpha == 0:
        return (k == 0).astype(complex)
    logmag = -abs(alpha) ** 2 / 2 + k * np.log(abs(alpha)) - 0.5 * np.array([lgamma(j + 1) for j in k])
    return np.exp(logmag + 1j * k * np.angle(alpha))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_ACCEPTANCE = {}


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"CRITERION {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[number] = line
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[k])
