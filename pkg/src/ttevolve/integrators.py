"""Tensor-train time steppers: TDVP, two-site TDVP and the fixed-center BUG step.

A time-dependent Hamiltonian is frozen at the midpoint ``t0 + delta/2`` of
each step, so all environments within one step refer to the same operator.
Together with the second-order local solves this keeps every stepper second
order in ``delta``.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, SolverError, StateError
from .local import LocalSolveConfig, SolveStats, constant, evolve_local
from .mpo import (
    TRIVIAL_ENV,
    EffectiveHamiltonian,
    as_time_dependent,
    bond_operator,
    build_right_environments,
    extend_left,
    extend_right,
    one_site_operator,
    two_site_operator,
)
from .mps import MPS, compress, left_orthonormalize_core, mixed_canonicalize, right_orthonormalize_core
from .tensor import thin_qr, truncated_svd


@dataclass(frozen=True)
class IntegratorConfig:
    eps: float = 0.0
    local: LocalSolveConfig = LocalSolveConfig()
    bug_center: int | None = None
    threads: int = 1

    def __post_init__(self):
        if self.eps < 0:
            raise ValueError("eps must be non-negative")
        if self.threads < 1:
            raise ValueError("threads must be >= 1")


def default_center(n: int) -> int:
    """0-based site ``ceil(N/2) - 1``."""
    return (n + 1) // 2 - 1


@dataclass
class StepReport:
    t: float
    max_bond: int
    storage: int
    norm: float
    trunc_weights: dict = field(default_factory=dict)
    iterations: list = field(default_factory=list)
    backward_solves: int = 0
    augmented_bonds: list | None = None
    ranks: list | None = None


def _report(psi: MPS, t: float, stats: SolveStats, weights=None, augmented=None) -> StepReport:
    return StepReport(
        t=t,
        max_bond=psi.max_bond,
        storage=psi.storage(),
        norm=float(np.linalg.norm(psi[psi.center])),
        trunc_weights=dict(weights or {}),
        iterations=list(stats.iteration_log),
        backward_solves=stats.backward_solves,
        augmented_bonds=augmented,
    )


def _frozen(h, t0, delta):
    hm = as_time_dependent(h)(t0 + 0.5 * delta)
    return hm


def _solve(op, x, dt, cfg: IntegratorConfig, stats, site, forward_only=False):
    try:
        return evolve_local(constant(op), x, 0.0, dt, cfg.local, stats, forward_only)
    except SolverError as exc:
        raise exc.at_site(site) from exc


def _check_start(psi: MPS, h, center: int):
    if psi.center != center:
        raise StateError(f"step requires the orthogonality center at site {center}, have {psi.center}")
    hm = as_time_dependent(h)
    if list(hm.phys_dims) != psi.phys_dims:
        raise DimensionError(f"Hamiltonian dims {hm.phys_dims} do not match state dims {psi.phys_dims}")


def _single_site(psi, h, t0, delta, cfg, stats):
    hm = _frozen(h, t0, delta)
    core = _solve(EffectiveHamiltonian("one_site", TRIVIAL_ENV, TRIVIAL_ENV, (hm[0],)), psi[0], delta, cfg, stats, 0)
    return MPS([core], center=0)


def tdvp_step(psi: MPS, h, t0: float, delta: float, cfg: IntegratorConfig = IntegratorConfig()):
    """One symmetric one-site TDVP step at fixed bond dimensions; center stays at 0."""
    _check_start(psi, h, 0)
    stats = SolveStats()
    n = len(psi)
    if n == 1:
        out = _single_site(psi, h, t0, delta, cfg, stats)
        return out, _report(out, t0 + delta, stats)
    hm = _frozen(h, t0, delta)
    half = 0.5 * delta
    cores = list(psi.cores)
    env = build_right_environments(hm, psi, down_to=1, tag=t0)

    for j in range(n):
        m = _solve(one_site_operator(env, hm, j), cores[j], half, cfg, stats, j)
        if j == n - 1:
            cores[j] = m
            break
        a, c = left_orthonormalize_core(m)
        cores[j] = a
        env.extend_left(j, a, hm[j], tag=t0 + half)
        c = _solve(bond_operator(env, j), c, -half, cfg, stats, j)
        cores[j + 1] = np.tensordot(c, cores[j + 1], axes=(1, 0))

    for j in range(n - 1, -1, -1):
        m = _solve(one_site_operator(env, hm, j), cores[j], half, cfg, stats, j)
        if j == 0:
            cores[j] = m
            break
        c, b = right_orthonormalize_core(m)
        cores[j] = b
        env.extend_right(j, b, hm[j], tag=t0 + delta)
        c = _solve(bond_operator(env, j - 1), c, -half, cfg, stats, j)
        cores[j - 1] = np.tensordot(cores[j - 1], c, axes=(2, 0))

    out = MPS(cores, center=0)
    return out, _report(out, t0 + delta, stats)


def tdvp2_step(psi: MPS, h, t0: float, delta: float, cfg: IntegratorConfig = IntegratorConfig()):
    """One symmetric two-site TDVP step with ``eps``-truncated splits; center stays at 0.

    The backward one-site solve after the last pair of each half-sweep is
    skipped, since the next operation evolves that site forward again.
    """
    _check_start(psi, h, 0)
    stats = SolveStats()
    n = len(psi)
    if n == 1:
        out = _single_site(psi, h, t0, delta, cfg, stats)
        return out, _report(out, t0 + delta, stats)
    hm = _frozen(h, t0, delta)
    half = 0.5 * delta
    cores = list(psi.cores)
    env = build_right_environments(hm, psi, down_to=1, tag=t0)
    weights = {}

    for j in range(n - 1):
        bl, d1 = cores[j].shape[:2]
        d2, br = cores[j + 1].shape[1:]
        theta = np.tensordot(cores[j], cores[j + 1], axes=(2, 0))
        theta = _solve(two_site_operator(env, hm, j), theta, half, cfg, stats, j)
        res = truncated_svd(theta.reshape(bl * d1, d2 * br), cfg.eps)
        weights[j] = res.discarded_weight
        cores[j] = res.u.reshape(bl, d1, res.rank)
        env.extend_left(j, cores[j], hm[j], tag=t0 + half)
        m = (res.s[:, None] * res.vh).reshape(res.rank, d2, br)
        if j < n - 2:
            m = _solve(one_site_operator(env, hm, j + 1), m, -half, cfg, stats, j + 1)
        cores[j + 1] = m

    for j in range(n - 2, -1, -1):
        bl, d1 = cores[j].shape[:2]
        d2, br = cores[j + 1].shape[1:]
        theta = np.tensordot(cores[j], cores[j + 1], axes=(2, 0))
        theta = _solve(two_site_operator(env, hm, j), theta, half, cfg, stats, j)
        res = truncated_svd(theta.reshape(bl * d1, d2 * br), cfg.eps)
        weights[j] = float(np.hypot(weights[j], res.discarded_weight))
        cores[j + 1] = res.vh.reshape(res.rank, d2, br)
        env.extend_right(j + 1, cores[j + 1], hm[j + 1], tag=t0 + delta)
        m = (res.u * res.s).reshape(bl, d1, res.rank)
        if j > 0:
            m = _solve(one_site_operator(env, hm, j), m, -half, cfg, stats, j)
        cores[j] = m

    out = MPS(cores, center=0)
    return out, _report(out, t0 + delta, stats, weights)


# -- fixed-center BUG ---------------------------------------------------------


def _bug_left_sweep(psi, hm, c, centered, right_old, delta, cfg, stats):
    """Update the bases of sites ``0 .. c-1``; returns (cores, transfer, left envs)."""
    transfer = np.ones((1, 1), dtype=np.complex128)
    env = TRIVIAL_ENV
    new_cores = []
    envs = [env]
    for k in range(c):
        k0 = np.tensordot(transfer, centered[k], axes=(1, 0))
        op = EffectiveHamiltonian("one_site", env, right_old[k + 1], (hm[k],))
        k1 = _solve(op, k0, delta, cfg, stats, k, forward_only=True)
        old = np.tensordot(transfer, psi[k], axes=(1, 0))
        bl, d, br = old.shape
        q, _ = thin_qr(np.concatenate([k1.reshape(bl * d, -1), old.reshape(bl * d, br)], axis=1))
        transfer = q.conj().T @ old.reshape(bl * d, br)
        core = q.reshape(bl, d, q.shape[1])
        new_cores.append(core)
        env = extend_left(env, core, hm[k])
        envs.append(env)
    return new_cores, transfer, envs


def _bug_right_sweep(psi, hm, c, centered, left_old, delta, cfg, stats):
    """Update the bases of sites ``N-1 .. c+1``; returns (cores, transfer, right envs)."""
    n = len(psi)
    transfer = np.ones((1, 1), dtype=np.complex128)
    env = TRIVIAL_ENV
    new_cores = {}
    envs = {n: env}
    for m in range(n - 1, c, -1):
        k0 = np.tensordot(centered[m], transfer, axes=(2, 0))
        op = EffectiveHamiltonian("one_site", left_old[m], env, (hm[m],))
        k1 = _solve(op, k0, delta, cfg, stats, m, forward_only=True)
        old = np.tensordot(psi[m], transfer, axes=(2, 0))
        bl, d, br = old.shape
        stacked = np.concatenate([k1.reshape(-1, d * br), old.reshape(bl, d * br)], axis=0)
        q, _ = thin_qr(stacked.T)
        core = q.T.reshape(q.shape[1], d, br)
        transfer = old.reshape(bl, d * br) @ q.conj()
        new_cores[m] = core
        env = extend_right(env, core, hm[m])
        envs[m] = env
    return [new_cores[m] for m in range(c + 1, n)], transfer, envs


def mps_bug_step(psi: MPS, h, t0: float, delta: float, cfg: IntegratorConfig = IntegratorConfig()):
    """One rank-adaptive BUG step with the orthogonality center fixed at ``cfg.bug_center``.

    Left of the center each site basis is evolved forward with the already
    updated left environment and the old right environment, augmented with
    the old basis and re-orthonormalized by QR; the right side is mirrored.
    The two sweeps are independent. The center core is then evolved in the
    new bases and all bonds are truncated with ``eps``. Every local solve runs
    forward in time, and the augmented interior bonds are recorded in the
    report.
    """
    n = len(psi)
    c = default_center(n) if cfg.bug_center is None else cfg.bug_center
    if not 0 <= c < n:
        raise DimensionError(f"BUG center {c} out of range")
    _check_start(psi, h, c)
    if delta < 0:
        raise SolverError("the BUG step only integrates forward in time")
    hm = _frozen(h, t0, delta)

    # old state with the center moved to every site, for the frozen environments
    centered = {c: psi[c]}
    cur = psi[c]
    right_old = [None] * (n + 1)
    right_old[n] = TRIVIAL_ENV
    for j in range(n - 1, c, -1):
        right_old[j] = extend_right(right_old[j + 1], psi[j], hm[j])
    for k in range(c, 0, -1):
        cmat, b = right_orthonormalize_core(cur)
        right_old[k] = extend_right(right_old[k + 1], b, hm[k])
        cur = np.tensordot(psi[k - 1], cmat, axes=(2, 0))
        centered[k - 1] = cur
    cur = psi[c]
    left_old = [None] * (n + 1)
    left_old[0] = TRIVIAL_ENV
    for j in range(c):
        left_old[j + 1] = extend_left(left_old[j], psi[j], hm[j])
    for m in range(c, n - 1):
        a, cmat = left_orthonormalize_core(cur)
        left_old[m + 1] = extend_left(left_old[m], a, hm[m])
        cur = np.tensordot(cmat, psi[m + 1], axes=(1, 0))
        centered[m + 1] = cur

    stats_l, stats_r = SolveStats(), SolveStats()
    args_l = (psi, hm, c, centered, right_old, delta, cfg, stats_l)
    args_r = (psi, hm, c, centered, left_old, delta, cfg, stats_r)
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=2) as pool:
            fut_l = pool.submit(_bug_left_sweep, *args_l)
            fut_r = pool.submit(_bug_right_sweep, *args_r)
            left_cores, t_left, lenvs = fut_l.result()
            right_cores, t_right, renvs = fut_r.result()
    else:
        left_cores, t_left, lenvs = _bug_left_sweep(*args_l)
        right_cores, t_right, renvs = _bug_right_sweep(*args_r)

    stats = SolveStats()
    for s in (stats_l, stats_r):
        stats.solves += s.solves
        stats.iterations += s.iterations
        stats.backward_solves += s.backward_solves
        stats.iteration_log.extend(s.iteration_log)

    core = np.tensordot(t_left, psi[c], axes=(1, 0))
    core = np.tensordot(core, t_right, axes=(2, 0))
    op = EffectiveHamiltonian("one_site", lenvs[c], renvs[c + 1], (hm[c],))
    core = _solve(op, core, delta, cfg, stats, c, forward_only=True)

    augmented = MPS(left_cores + [core] + right_cores, center=c)
    aug_bonds = augmented.bond_dims
    weights = {}
    out = compress(augmented, cfg.eps, report=weights)
    return out, _report(out, t0 + delta, stats, weights, aug_bonds)


STEPPERS = {"tdvp": tdvp_step, "tdvp2": tdvp2_step, "mps_bug": mps_bug_step}


def prepare(psi: MPS, method: str, cfg: IntegratorConfig = IntegratorConfig()) -> MPS:
    """Move the center to where ``method`` expects it."""
    if method == "mps_bug":
        c = default_center(len(psi)) if cfg.bug_center is None else cfg.bug_center
    else:
        c = 0
    return mixed_canonicalize(psi, c)


def evolve(psi: MPS, h, t0: float, t1: float, steps: int, method: str = "tdvp2",
           cfg: IntegratorConfig = IntegratorConfig(), callback=None):
    """Take ``steps`` equal steps from ``t0`` to ``t1``; returns ``(psi, reports)``.

    ``callback(k, psi, report)`` is invoked after every step.
    """
    if method not in STEPPERS:
        raise ValueError(f"unknown method {method!r}")
    if steps < 1:
        raise ValueError("steps must be >= 1")
    step = STEPPERS[method]
    psi = prepare(psi, method, cfg)
    delta = (t1 - t0) / steps
    reports = []
    for k in range(steps):
        psi, rep = step(psi, h, t0 + k * delta, delta, cfg)
        rep.t = t0 + (k + 1) * delta
        reports.append(rep)
        if callback is not None:
            callback(k, psi, rep)
    return psi, reports
