"""Shared helpers: independent dense constructions used as oracles."""

import numpy as np
import pytest

SX = np.array([[0, 1], [1, 0]], dtype=complex) / 2
SZ = np.array([[1, 0], [0, -1]], dtype=complex) / 2


def kron_all(mats):
    out = np.eye(1, dtype=complex)
    for m in mats:
        out = np.kron(out, m)
    return out


def site_op(op, j, n, d=2):
    return kron_all([op if k == j else np.eye(d) for k in range(n)])


def dense_ising(n, J=1.0, g=1.0):
    """H = -J sum Sz Sz - g sum Sx, spin-1/2 operators, site 0 most significant."""
    h = np.zeros((2**n, 2**n), dtype=complex)
    for j in range(n - 1):
        h -= J * site_op(SZ, j, n) @ site_op(SZ, j + 1, n)
    for j in range(n):
        h -= g * site_op(SX, j, n)
    return h


def crandn(rng, *shape):
    return rng.standard_normal(shape) + 1j * rng.standard_normal(shape)


def exact_evolve(h, psi0, t):
    w, v = np.linalg.eigh(h)
    return v @ (np.exp(-1j * w * t) * (v.conj().T @ psi0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240607)


ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE, key=lambda s: int(s.split()[1])):
        terminalreporter.write_line(line)
