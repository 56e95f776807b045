import numpy as np
import pytest

from ttevolve.dense import imr_propagate, termsum_generator
from ttevolve.errors import SolverError, StateError
from ttevolve.integrators import (
    IntegratorConfig,
    default_center,
    evolve,
    mps_bug_step,
    prepare,
    tdvp2_step,
    tdvp_step,
)
from ttevolve.models import IsingParams, TransmonParams, ising_model, state_transfer_pulses, transmon_model
from ttevolve.mpo import expectation
from ttevolve.mps import (
    check_canonical,
    max_bonds,
    mixed_canonicalize,
    pad_bonds,
    product_state,
    random_mps,
    to_vector,
)

from conftest import crandn, dense_ising, exact_evolve


def random_product(rng, n):
    vecs = [crandn(rng, 2) for _ in range(n)]
    return product_state([v / np.linalg.norm(v) for v in vecs])


def orders(errs):
    errs = np.array(errs)
    return np.log2(errs[:-1] / errs[1:])


def test_default_center():
    assert [default_center(n) for n in (1, 2, 3, 6, 7)] == [0, 0, 1, 2, 3]


@pytest.mark.parametrize("method,halves", [("tdvp2", 2), ("mps_bug", 1)])
def test_exact_for_product_eigenstate(method, halves):
    _, h = ising_model(IsingParams(5, g=0.0))
    psi = product_state([np.array([1, 0])] * 5)
    out, reps = evolve(psi, h, 0.0, 1.0, 4, method)
    # IMR on an eigenvector multiplies by a Cayley factor per local solve; the
    # symmetric two-site sweep nets two half-step factors per step
    e, d = -4 * 0.25, 0.25 / halves
    phase = ((1 - 0.5j * d * e) / (1 + 0.5j * d * e)) ** (4 * halves)
    np.testing.assert_allclose(to_vector(out), phase * to_vector(psi), atol=1e-12)
    assert all(r.max_bond == 1 for r in reps)


def test_tdvp2_second_order(rng):
    n = 5
    _, h = ising_model(IsingParams(n))
    psi = random_product(rng, n)
    ref = exact_evolve(dense_ising(n), to_vector(psi), 1.0)
    errs = [np.linalg.norm(to_vector(evolve(psi, h, 0.0, 1.0, s, "tdvp2")[0]) - ref) for s in (8, 16, 32)]
    assert np.all(np.abs(orders(errs) - 2) < 0.2)


def test_tdvp_full_bonds_second_order(rng):
    n = 4
    _, h = ising_model(IsingParams(n, g=0.7))
    psi = pad_bonds(random_product(rng, n), max_bonds([2] * n))
    ref = exact_evolve(dense_ising(n, 1.0, 0.7), to_vector(psi), 1.0)
    errs = [np.linalg.norm(to_vector(evolve(psi, h, 0.0, 1.0, s, "tdvp")[0]) - ref) for s in (8, 16, 32)]
    assert np.all(np.abs(orders(errs) - 2) < 0.2)


def test_tdvp_conserves_norm_and_energy(rng):
    n = 5
    _, h = ising_model(IsingParams(n))
    psi = prepare(random_mps([2] * n, 2, rng), "tdvp")
    e0 = expectation(h, psi)
    out, reps = evolve(psi, h, 0.0, 2.0, 40, "tdvp")
    assert abs(reps[-1].norm - 1) < 1e-10
    assert abs(expectation(h, out) - e0) < 1e-8
    assert out.bond_dims == psi.bond_dims


def test_tdvp_requires_center_at_zero(rng):
    _, h = ising_model(IsingParams(4))
    psi = mixed_canonicalize(random_mps([2] * 4, 2, rng), 2)
    with pytest.raises(StateError):
        tdvp_step(psi, h, 0.0, 0.1)


def test_mps_bug_local_error_third_order(rng):
    # from a state whose bonds are already saturated the step is second order
    n = 5
    _, h = ising_model(IsingParams(n))
    psi = random_mps([2] * n, 4, rng)
    psi = prepare(psi, "mps_bug")
    x0 = to_vector(psi)
    hd = dense_ising(n)

    def err(d):
        out, _ = mps_bug_step(psi, h, 0.0, d)
        return np.linalg.norm(to_vector(out) - exact_evolve(hd, x0, d))

    assert np.log2(err(0.04) / err(0.02)) > 2.7


def test_mps_bug_forward_only_and_center(rng):
    n = 6
    _, h = ising_model(IsingParams(n))
    psi = prepare(random_product(rng, n), "mps_bug")
    assert psi.center == default_center(n)
    out, rep = mps_bug_step(psi, h, 0.0, 0.1)
    assert rep.backward_solves == 0
    assert out.center == default_center(n) and check_canonical(out)
    assert rep.augmented_bonds is not None
    assert all(a >= b for a, b in zip(rep.augmented_bonds, out.bond_dims))
    with pytest.raises(SolverError):
        mps_bug_step(psi, h, 0.0, -0.1)


def test_mps_bug_threads_identical(rng):
    n = 6
    _, h = ising_model(IsingParams(n))
    psi = random_product(rng, n)
    a, _ = evolve(psi, h, 0.0, 0.5, 5, "mps_bug", IntegratorConfig(eps=1e-10))
    b, _ = evolve(psi, h, 0.0, 0.5, 5, "mps_bug", IntegratorConfig(eps=1e-10, threads=2))
    np.testing.assert_array_equal(to_vector(a), to_vector(b))


def test_tdvp2_backward_solve_count(rng):
    n = 5
    _, h = ising_model(IsingParams(n))
    psi = prepare(random_product(rng, n), "tdvp2")
    _, rep = tdvp2_step(psi, h, 0.0, 0.1)
    # two half-sweeps over N-1 pairs, each skipping the final backward solve
    assert rep.backward_solves == 2 * (n - 2)


def test_truncation_respects_eps(rng):
    n = 6
    _, h = ising_model(IsingParams(n))
    psi = random_product(rng, n)
    out_loose, reps = evolve(psi, h, 0.0, 1.0, 10, "tdvp2", IntegratorConfig(eps=1e-2))
    out_tight, _ = evolve(psi, h, 0.0, 1.0, 10, "tdvp2", IntegratorConfig(eps=1e-12))
    assert out_loose.storage() <= out_tight.storage()
    for r in reps:
        assert all(w <= 1e-2 * np.sqrt(2) + 1e-14 for w in r.trunc_weights.values())


@pytest.mark.parametrize("method", ["tdvp2", "mps_bug"])
def test_time_dependent_matches_dense_imr(method):
    p = TransmonParams([5.0, 5.06, 5.12], couplings_ghz=[0.005, 0.005])
    T = 10.0
    mpo, ts = transmon_model(p, state_transfer_pulses(p, T), horizon=T)
    psi = product_state([np.array([1, 0])] * 3)
    out, _ = evolve(psi, mpo, 0.0, T, 200, method)
    ref = imr_propagate(to_vector(psi), termsum_generator(ts), T, 200)
    # both are second order with midpoint sampling; they agree to O(delta^2)
    assert np.linalg.norm(to_vector(out) - ref) < 1e-3


def test_callback_and_report_times(rng):
    _, h = ising_model(IsingParams(4))
    seen = []
    _, reps = evolve(random_product(rng, 4), h, 0.0, 1.0, 4, "tdvp2", callback=lambda k, psi, r: seen.append(k))
    assert seen == [0, 1, 2, 3]
    assert np.allclose([r.t for r in reps], [0.25, 0.5, 0.75, 1.0])
