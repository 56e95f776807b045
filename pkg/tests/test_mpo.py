import numpy as np
import pytest

from ttevolve.errors import DimensionError, StateError
from ttevolve.models import IsingParams, ising_mpo
from ttevolve.mpo import (
    MPO,
    apply_mpo,
    bond_operator,
    build_left_environments,
    build_right_environments,
    expectation,
    identity_mpo,
    one_site_operator,
    two_site_operator,
)
from ttevolve.mps import MPS, mixed_canonicalize, random_mps, shift_center, to_vector

from conftest import crandn, dense_ising


def random_mpo(rng, dims, bond):
    cores = []
    for k, d in enumerate(dims):
        wl = 1 if k == 0 else bond
        wr = 1 if k == len(dims) - 1 else bond
        cores.append(crandn(rng, wl, d, d, wr))
    return MPO(cores)


def basis_columns(psi, j, shape, place):
    """Columns of the embedding of the local unknown into the full space."""
    cols = []
    for i in range(int(np.prod(shape))):
        e = np.zeros(int(np.prod(shape)), dtype=complex)
        e[i] = 1
        cols.append(to_vector(MPS(place(e.reshape(shape)))))
    return np.stack(cols, axis=1)


def test_mpo_to_matrix_matches_kron():
    h = ising_mpo(IsingParams(5, J=0.7, g=1.3))
    np.testing.assert_allclose(h.to_matrix(), dense_ising(5, 0.7, 1.3), atol=1e-13)


def test_apply_mpo(rng):
    dims = [2, 3, 2, 2]
    h = random_mpo(rng, dims, 3)
    psi = random_mps(dims, 3, rng)
    out = apply_mpo(h, psi)
    np.testing.assert_allclose(to_vector(out), h.to_matrix() @ to_vector(psi), atol=1e-10)
    assert out.bond_dims == [a * b for a, b in zip(h.bond_dims, psi.bond_dims)]


def test_expectation(rng):
    h = ising_mpo(IsingParams(6, g=0.4))
    psi = random_mps([2] * 6, 4, rng)
    v = to_vector(psi)
    assert np.isclose(expectation(h, psi), np.vdot(v, dense_ising(6, 1, 0.4) @ v).real, atol=1e-10)


def test_expectation_requires_normalized(rng):
    psi = random_mps([2] * 4, 2, rng, normalize=False)
    psi = MPS([c * 2 for c in psi.cores])
    with pytest.raises(StateError):
        expectation(identity_mpo([2] * 4), psi)


def test_dimension_mismatch(rng):
    with pytest.raises(DimensionError):
        apply_mpo(identity_mpo([2] * 3), random_mps([2] * 4, 2, rng))


@pytest.mark.parametrize("j", [0, 2, 4])
def test_one_site_operator_is_projected_hamiltonian(rng, j):
    n = 5
    h = random_mpo(rng, [2] * n, 3)
    psi = mixed_canonicalize(random_mps([2] * n, 4, rng), j)
    left = build_left_environments(h, psi, j)
    right = build_right_environments(h, psi, j + 1, check=False)
    left.right = right.right
    eff = one_site_operator(left, h, j)

    def place(x):
        cores = list(psi.cores)
        cores[j] = x
        return cores

    p = basis_columns(psi, j, psi[j].shape, place)
    ref = p.conj().T @ h.to_matrix() @ p
    np.testing.assert_allclose(eff.to_matrix(), ref, atol=1e-10)


def test_two_site_and_bond_operators(rng):
    n, j = 5, 1
    h = ising_mpo(IsingParams(n, g=0.8))
    psi = mixed_canonicalize(random_mps([2] * n, 4, rng), j)
    left = build_left_environments(h, psi, j)
    right = build_right_environments(h, psi, j + 2, check=False)
    left.right = right.right
    eff = two_site_operator(left, h, j)
    a, b = psi[j], psi[j + 1]

    shape = (a.shape[0], 2, 2, b.shape[2])
    cols = []
    for i in range(int(np.prod(shape))):
        e = np.zeros(int(np.prod(shape)), dtype=complex)
        e[i] = 1
        e = e.reshape(shape)
        cores = list(psi.cores)
        merged = e.reshape(shape[0], 2, 2, shape[3])
        # split the merged tensor without truncation: identity on the left index pair
        cores[j] = np.eye(shape[0] * 2).reshape(shape[0], 2, shape[0] * 2)
        cores[j + 1] = merged.reshape(shape[0] * 2, 2, shape[3])
        cols.append(to_vector(MPS(cores)))
    p = np.stack(cols, axis=1)
    ref = p.conj().T @ h.to_matrix() @ p
    np.testing.assert_allclose(eff.to_matrix(), ref, atol=1e-10)

    moved, bond = shift_center(psi, 1)
    stack = build_left_environments(h, moved, j + 1)
    stack.right = build_right_environments(h, moved, j + 1, check=False).right
    beff = bond_operator(stack, j)
    cols = []
    bl = bond.matrix.shape
    for i in range(bl[0] * bl[1]):
        e = np.zeros(bl[0] * bl[1], dtype=complex)
        e[i] = 1
        cores = list(moved.cores)
        cores[j + 1] = np.tensordot(e.reshape(bl), moved[j + 1], axes=(1, 0))
        cols.append(to_vector(MPS(cores)))
    p = np.stack(cols, axis=1)
    np.testing.assert_allclose(beff.to_matrix(), p.conj().T @ h.to_matrix() @ p, atol=1e-10)


def test_right_environment_precondition(rng):
    h = identity_mpo([2] * 4)
    psi = mixed_canonicalize(random_mps([2] * 4, 2, rng), 3)
    with pytest.raises(StateError):
        build_right_environments(h, psi, 1)
