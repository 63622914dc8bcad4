import numpy as np
import pytest

from hyperepp.statecore import DIM, ket

ACCEPTANCE_LINES: list[str] = []


def random_density(rng, rank=None, dim=DIM):
    rank = rank or int(rng.integers(1, dim + 1))
    G = rng.normal(size=(dim, rank)) + 1j * rng.normal(size=(dim, rank))
    m = G @ G.conj().T
    m = m / np.trace(m)
    return (m + m.conj().T) / 2


def random_unitary(rng, dim=DIM):
    Z = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    Q, R = np.linalg.qr(Z)
    return Q * (np.diag(R) / np.abs(np.diag(R)))


def random_simplex(rng):
    return tuple(float(x) for x in rng.dirichlet(np.ones(4)))


def erasable_vector(rng, rails=None):
    """Random pure state whose frequency bits are a function of polarization and rails."""
    v = np.zeros(DIM, dtype=complex)
    for pa in (0, 1):
        for pb in (0, 1):
            for ra in (0, 1):
                for rb in (0, 1):
                    if rails is not None and (ra, rb) != rails:
                        continue
                    fa, fb = rng.integers(0, 2, size=2)
                    v += (rng.normal() + 1j * rng.normal()) * ket(
                        pol_A=pa, pol_B=pb, freq_A=int(fa), freq_B=int(fb), rail_A=ra, rail_B=rb)
    return v / np.linalg.norm(v)


def assert_valid(m, atol=1e-12):
    m = np.asarray(m)
    assert np.max(np.abs(m - m.conj().T)) <= atol
    assert abs(np.trace(m) - 1) <= atol
    assert np.linalg.eigvalsh(m).min() >= -1e-10


@pytest.fixture
def rng():
    return np.random.default_rng(20100307)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
