"""Acceptance criteria, one test each.

Every test records a ``ACCEPTANCE <n> PASS|FAIL: ...`` line that is printed
in the terminal summary, then asserts the criterion at its stated tolerance.
"""

import numpy as np

from ttevolve.harness.config import from_dict
from ttevolve.harness.runner import epsilon_sweep, magnetization_study, paper_eps_grid, run_experiment
from ttevolve.integrators import mps_bug_step, prepare
from ttevolve import integrators as integrators_module
from ttevolve.models import (
    IsingParams,
    coupled_chain_params,
    ising_model,
    state_transfer_pulses,
    transmon_model,
)
from ttevolve.mpo import (
    EffectiveHamiltonian,
    apply_mpo,
    build_left_environments,
    build_right_environments,
    expectation,
)
from ttevolve.mps import MPS, mixed_canonicalize, random_mps, random_product_state, shift_center, to_vector
from ttevolve.observables import magnetization
from ttevolve.tensor import thin_qr, truncated_svd
from ttevolve.tucker import TuckerState, apply_termsum, tucker_to_dense

from conftest import ACCEPTANCE, crandn, dense_ising, site_op


def record(num, ok, detail):
    line = f"ACCEPTANCE {num} {'PASS' if ok else 'FAIL'}: {detail}"
    print(line)
    ACCEPTANCE.append(line)
    assert ok, line


def slope(xs, ys):
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


def cfg_of(**kw):
    d = {"outputs": {"cadence": 1, "observables": ["norm"]}}
    d.update(kw)
    return from_dict(d)


# 1 -------------------------------------------------------------------------


def test_01_truncated_svd_identity():
    rng = np.random.default_rng(101)
    worst = 0.0
    for _ in range(200):
        m, n = rng.integers(1, 129, size=2)
        a = crandn(rng, m, n)
        nrm = np.linalg.norm(a)
        for frac in (0.0, 1e-8, 1e-4, 1e-2, 0.1, 0.3, 0.6, 0.9):
            r = truncated_svd(a, frac * nrm)
            err = np.linalg.norm(a - (r.u * r.s) @ r.vh)
            worst = max(worst, abs(err - r.discarded_weight))
    record(1, worst <= 1e-12, f"max | |M - M~|_F - discarded | = {worst:.2e} (tol 1e-12)")


# 2 -------------------------------------------------------------------------


def _embedding(psi, j, kind):
    """Columns mapping a local unknown to the full vector for a centered train."""
    cols = []
    if kind == "one_site":
        shape = psi[j].shape
    elif kind == "two_site":
        shape = (psi[j].shape[0], psi[j].shape[1], psi[j + 1].shape[1], psi[j + 1].shape[2])
    else:
        shape = (psi[j].shape[2], psi[j].shape[2])
    size = int(np.prod(shape))
    for i in range(size):
        e = np.zeros(size, dtype=complex)
        e[i] = 1
        e = e.reshape(shape)
        cores = list(psi.cores)
        if kind == "one_site":
            cores[j] = e
        elif kind == "two_site":
            bl, d1 = shape[0], shape[1]
            cores[j] = np.eye(bl * d1).reshape(bl, d1, bl * d1)
            cores[j + 1] = e.reshape(bl * d1, shape[2], shape[3])
        else:
            cores[j] = np.tensordot(cores[j], e, axes=(2, 0))
        cols.append(to_vector(MPS(cores)))
    return np.stack(cols, axis=1)


def test_02_dense_oracle_equivalence():
    rng = np.random.default_rng(102)
    worst = {}
    n = 6
    _, ising = ising_model(IsingParams(n, J=0.9, g=0.6))
    h_ising = dense_ising(n, 0.9, 0.6)
    p = coupled_chain_params(4)
    tm_mpo, tm_ts = transmon_model(p, state_transfer_pulses(p, 40.0), horizon=40.0)

    psi = random_mps([2] * n, 4, rng)
    v = to_vector(psi)
    worst["apply_mpo"] = np.linalg.norm(to_vector(apply_mpo(ising, psi)) - h_ising @ v)
    for t in rng.uniform(0, 40, 3):
        phi = random_mps([2] * 4, 3, rng)
        err = np.linalg.norm(to_vector(apply_mpo(tm_mpo(t), phi)) - tm_ts.dense(t) @ to_vector(phi))
        worst["apply_mpo"] = max(worst["apply_mpo"], err)
    worst["expectation"] = abs(expectation(ising, psi) - np.vdot(v, h_ising @ v).real)

    errs = []
    for j in range(n - 1):
        c = mixed_canonicalize(psi, j)
        stack = build_left_environments(ising, c, j, check=True)
        stack.right = build_right_environments(ising, c, j + 1).right
        one = EffectiveHamiltonian("one_site", stack.left[j], stack.right[j + 1], (ising[j],))
        p1 = _embedding(c, j, "one_site")
        errs.append(np.abs(one.to_matrix() - p1.conj().T @ h_ising @ p1).max())
        right2 = build_right_environments(ising, c, j + 2, check=False)
        two = EffectiveHamiltonian("two_site", stack.left[j], right2.right[j + 2], (ising[j], ising[j + 1]))
        p2 = _embedding(c, j, "two_site")
        errs.append(np.abs(two.to_matrix() - p2.conj().T @ h_ising @ p2).max())
        moved, _ = shift_center(c, 1)
        # left-normalized through site j, right-normalized from site j + 1
        split = MPS(list(moved.cores[: j + 1]) + list(c.cores[j + 1:]))
        left_b = build_left_environments(ising, split, j + 1)
        right_b = build_right_environments(ising, mixed_canonicalize(c, j), j + 1)
        bond = EffectiveHamiltonian("bond", left_b.left[j + 1], right_b.right[j + 1])
        pb = _embedding(split, j, "bond")
        errs.append(np.abs(bond.to_matrix() - pb.conj().T @ h_ising @ pb).max())
    worst["effective"] = max(errs)

    z = np.diag([1.0, -1.0])
    ref = np.array([np.vdot(v, site_op(z, j, n) @ v).real for j in range(n)])
    worst["magnetization"] = np.abs(magnetization(psi) - ref).max()

    ts_ising, _ = ising_model(IsingParams(n, J=0.9, g=0.6))
    ranks = [2, 1, 2, 2, 1, 2]
    y = TuckerState(crandn(rng, *ranks), [thin_qr(crandn(rng, 2, r))[0] for r in ranks])
    worst["tucker"] = np.linalg.norm(tucker_to_dense(apply_termsum(ts_ising, y)).ravel()
                                     - h_ising @ tucker_to_dense(y).ravel())
    tm_tucker = TuckerState(crandn(rng, 2, 2, 1, 2), [thin_qr(crandn(rng, 2, r))[0] for r in (2, 2, 1, 2)])
    worst["tucker"] = max(worst["tucker"], np.linalg.norm(
        tucker_to_dense(apply_termsum(tm_ts, tm_tucker, 13.0)).ravel() - tm_ts.dense(13.0) @ tucker_to_dense(tm_tucker).ravel()))

    ok = all(e <= 1e-10 for e in worst.values())
    record(2, ok, ", ".join(f"{k}={e:.1e}" for k, e in worst.items()) + " (tol 1e-10)")


# 3 -------------------------------------------------------------------------


def test_03_second_order_convergence():
    base = {"model": {"type": "ising", "n": 6, "J": 1.0, "g": 1.0}, "T": 1.0, "eps": 0.0, "seed": 303,
            "initial": {"kind": "random_product"}}
    ref = run_experiment(cfg_of(integrator="dense_expm", steps=1, **base)).final_vector()
    counts = [8, 16, 32, 64, 128]
    results = {}
    for method in ("tdvp2", "mps_bug", "tucker_bug", "dense_imr"):
        errs = [np.linalg.norm(run_experiment(cfg_of(integrator=method, steps=s, **base)).final_vector() - ref)
                for s in counts]
        results[method] = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    ok = all(np.all((o >= 1.8) & (o <= 2.2)) for o in results.values())
    detail = "; ".join(f"{m} orders " + ",".join(f"{x:.2f}" for x in o) for m, o in results.items())
    record(3, ok, detail + " (band [1.8, 2.2])")


# 4 -------------------------------------------------------------------------


def test_04_tdvp_conservation():
    cfg = from_dict({"model": {"type": "ising", "n": 6}, "integrator": "tdvp", "T": 10.0, "steps": 512, "seed": 404,
                     "initial": {"kind": "random_product"}, "outputs": {"cadence": 1, "observables": ["norm", "energy"]}})
    res = run_experiment(cfg)
    norms = np.array([r.norm for r in res.rows])
    energies = np.array([r.energy for r in res.rows])
    norm_dev = np.abs(norms - 1).max()
    drift = np.abs(energies - energies[0]).max() / abs(energies[0])
    ok = norm_dev <= 1e-8 and drift <= 1e-6
    record(4, ok, f"max |norm-1| = {norm_dev:.1e} (tol 1e-8), relative energy drift = {drift:.1e} (tol 1e-6), "
                  f"bonds {res.final.bond_dims[1:-1]}")


# 5 -------------------------------------------------------------------------


def test_05_bond_one_without_field():
    sizes = [10, 40, 100]
    parts, ok = [], True
    for method in ("tdvp2", "mps_bug"):
        walls, bonds = [], []
        for n in sizes:
            res = run_experiment(cfg_of(model={"type": "ising", "n": n, "g": 0.0}, integrator=method, T=5.0,
                                        steps=100, initial={"kind": "zeros"}))
            bonds.append(max(r.max_bond for r in res.rows))
            walls.append(res.wall_ms)
        s = slope(sizes, walls)
        ok &= all(b == 1 for b in bonds) and s < 2.0
        parts.append(f"{method}: max bonds {bonds}, wall-clock slope {s:.2f}")
    record(5, ok, "; ".join(parts) + " (need bond 1, slope < 2)")


# 6 -------------------------------------------------------------------------


def test_06_bond_plateau_with_field():
    bonds = {}
    for n in (10, 20, 30):
        res = run_experiment(cfg_of(model={"type": "ising", "n": n, "g": 0.5}, integrator="tdvp2", T=5.0, steps=100,
                                    eps=1e-8, initial={"kind": "zeros"}))
        bonds[n] = max(r.max_bond for r in res.rows)
    record(6, all(b <= 8 for b in bonds.values()), f"TDVP-2 max bond by N {bonds} (bound 8, eps 1e-8, 100 steps)")


# 7 -------------------------------------------------------------------------


def test_07_error_vs_eps_regimes():
    eps_list = [0.0, 1e-12, 1e-9, 1e-6, 1e-3]
    parts, ok = [], True
    for steps in (200, 400):
        cfg = from_dict({"model": {"type": "ising", "n": 10}, "integrator": "tdvp2", "T": 10.0, "steps": steps,
                         "seed": 707, "initial": {"kind": "random_product"}})
        rows = epsilon_sweep(cfg, eps_list)["rows"]
        err = {r["eps"]: r["error"] for r in rows}
        store = [r["max_stored_entries"] for r in rows]
        near = abs(err[1e-12] - err[0.0]) <= 0.1 * err[0.0]
        far = err[1e-3] >= 10 * err[0.0]
        mono = all(a >= b for a, b in zip(store, store[1:]))
        ok &= near and far and mono
        parts.append(f"{steps} steps: err(0)={err[0.0]:.2e} err(1e-12)={err[1e-12]:.2e} err(1e-3)={err[1e-3]:.2e} "
                     f"storage {store}")
    record(7, ok, "; ".join(parts))


# 8 -------------------------------------------------------------------------


def test_08_magnetization_eps_scaling():
    cfg = from_dict({"model": {"type": "ising", "n": 20, "J": 1.0, "g": 0.5}, "integrator": "tdvp2", "T": 5.0,
                     "steps": 256, "initial": {"kind": "bits", "bits": "1" * 19 + "0"}})
    out = magnetization_study(cfg, paper_eps_grid(0, 20))
    s = out["slope"]
    record(8, 1.0 <= s <= 1.6, f"slope of log Delta_k vs log eps_k = {s:.3f} (band [1.0, 1.6])")


# 9 -------------------------------------------------------------------------


def test_09_model_structure():
    rng = np.random.default_rng(909)
    _, ising = ising_model(IsingParams(7))
    p = coupled_chain_params(5)
    mpo, ts = transmon_model(p, state_transfer_pulses(p, 40.0), horizon=40.0)
    tm_bonds = mpo(3.0).bond_dims[1:-1]
    herm = 0.0
    for t in rng.uniform(0, 40, 10):
        m = mpo(t).to_matrix()
        herm = max(herm, np.abs(m - m.conj().T).max())
    ok = tm_bonds == [4] * 4 and ising.bond_dims[1:-1] == [3] * 6 and herm <= 1e-10
    record(9, ok, f"transmon bonds {tm_bonds}, Ising bonds {ising.bond_dims[1:-1]}, max |H - H^+| = {herm:.1e}")


# 10 ------------------------------------------------------------------------


def _transmon_cfg(n, steps, integrator="tdvp2"):
    return cfg_of(model={"type": "transmon", "n": n, "preset": "uncoupled", "pulses": {"kind": "analytic"}},
                  integrator=integrator, T=40.0, steps=steps, eps=1e-6)


def _infidelity(res):
    tv = np.ones(1)
    for _ in range(res.model.n):
        tv = np.kron(tv, np.array([1.0, 1.0]) / np.sqrt(2))
    v = res.final_vector()
    return 1 - abs(np.vdot(tv, v)) ** 2


def test_10_uncoupled_state_transfer():
    infid, bonds = {}, {}
    for n in (6, 10):
        res = run_experiment(_transmon_cfg(n, 4096))
        infid[n] = _infidelity(res)
        bonds[n] = max(r.max_bond for r in res.rows)
    dense = _infidelity(run_experiment(_transmon_cfg(6, 4096, "dense_imr")))
    sizes = [10, 20, 40]
    walls = [run_experiment(_transmon_cfg(n, 512)).wall_ms for n in sizes]
    s = slope(sizes, walls)
    ok = (all(v <= 1e-5 for v in infid.values()) and abs(infid[6] - dense) <= 1e-6
          and all(b == 1 for b in bonds.values()) and s <= 1.15)
    record(10, ok, f"TDVP-2 infidelity {{6: {infid[6]:.1e}, 10: {infid[10]:.1e}}} (tol 1e-5), dense IMR {dense:.1e} "
                   f"(match 1e-6), bonds {bonds}, wall-clock slope {s:.2f} for N={sizes} (<= 1.15)")


# 11 ------------------------------------------------------------------------


def test_11_tucker_binary_truncation():
    seen = set()
    runs = [
        cfg_of(model={"type": "ising", "n": 6, "g": 0.5}, integrator="tucker_bug", T=2.0, steps=40, eps=1e-4,
               initial={"kind": "random_product"}, seed=1111),
        cfg_of(model={"type": "ising", "n": 6, "g": 1.0}, integrator="tucker_bug", T=2.0, steps=40, eps=1e-8),
        cfg_of(model={"type": "transmon", "n": 4, "preset": "uncoupled"}, integrator="tucker_bug", T=40.0,
               steps=200, eps=1e-6),
    ]
    for cfg in runs:
        res = run_experiment(cfg)
        for rep in res.reports:
            seen.update(rep.ranks)
            seen.update(rep.augmented_bonds)
    record(11, seen <= {1, 2}, f"per-mode ranks observed {sorted(seen)} (allowed {{1, 2}})")


# 12 ------------------------------------------------------------------------


def test_12_mps_bug_forward_only_and_reversible(monkeypatch):
    _, h = ising_model(IsingParams(6))
    h_rev = h.scaled(-1)
    calls = []
    real = integrators_module.evolve_local

    def spy(op_at, x, t0, t1, cfg=None, stats=None, forward_only=False):
        calls.append((forward_only, t1 >= t0))
        return real(op_at, x, t0, t1, cfg, stats, forward_only)

    monkeypatch.setattr(integrators_module, "evolve_local", spy)
    psi = prepare(random_product_state(6, rng=np.random.default_rng(1212)), "mps_bug")
    deltas = [0.1, 0.05, 0.025]
    errs, backward = [], 0
    for d in deltas:
        a, r1 = mps_bug_step(psi, h, 0.0, d)
        b, r2 = mps_bug_step(a, h_rev, d, d)
        backward += r1.backward_solves + r2.backward_solves
        errs.append(np.linalg.norm(to_vector(b) - to_vector(psi)))
    orders = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    forward_flag = bool(calls) and all(f and fwd for f, fwd in calls)
    ok = forward_flag and backward == 0 and np.all(orders >= 1.8)
    record(12, ok, f"{len(calls)} local solves all forward-only={forward_flag}, backward solves {backward}; "
                   f"double-step errors " + ",".join(f"{e:.1e}" for e in errs)
                   + " orders " + ",".join(f"{o:.2f}" for o in orders) + " (need O(delta^2))")
