"""Tucker-format states and the rank-adaptive BUG integrators.

``matrix_bug_step`` is the matrix version; ``tucker_bug_step`` applies the
same basis-update / Galerkin pattern to every mode of a Tucker tensor whose
right-hand side is ``-i H(t) Y`` with ``H`` a ``TermSumOperator``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, SolverError
from .integrators import StepReport
from .local import LocalSolveConfig, SolveStats, evolve_local
from .tensor import thin_qr, truncated_svd
from .termsum import TermSumOperator

__all__ = [
    "TuckerState",
    "TermSumOperator",
    "ttm",
    "tucker_to_dense",
    "tucker_product_state",
    "apply_termsum",
    "hosvd_truncate",
    "matrix_bug_step",
    "tucker_bug_step",
    "evolve_tucker",
]


def ttm(g: np.ndarray, k: int, m: np.ndarray) -> np.ndarray:
    """Mode-``k`` product ``g x_k m``: contracts ``m``'s columns with mode ``k``."""
    if not 0 <= k < g.ndim:
        raise DimensionError(f"mode {k} out of range for order-{g.ndim} tensor")
    if m.ndim != 2 or m.shape[1] != g.shape[k]:
        raise DimensionError(f"matrix of shape {m.shape} cannot act on mode {k} of extent {g.shape[k]}")
    return np.moveaxis(np.tensordot(m, g, axes=(1, k)), 0, k)


@dataclass
class TuckerState:
    """``Y = G x_1 U_1 ... x_N U_N`` with orthonormal factor columns."""

    core: np.ndarray
    factors: list

    def __post_init__(self):
        self.core = np.asarray(self.core, dtype=np.complex128)
        self.factors = [np.asarray(u, dtype=np.complex128) for u in self.factors]
        if self.core.ndim != len(self.factors):
            raise DimensionError(f"core of order {self.core.ndim} with {len(self.factors)} factors")
        for k, u in enumerate(self.factors):
            if u.ndim != 2 or u.shape[1] != self.core.shape[k]:
                raise DimensionError(f"factor {k} has shape {u.shape}, core extent {self.core.shape[k]}")
            if u.shape[1] > u.shape[0]:
                raise DimensionError(f"factor {k} has more columns than rows")

    @property
    def phys_dims(self):
        return [u.shape[0] for u in self.factors]

    @property
    def ranks(self):
        return list(self.core.shape)

    def storage(self) -> int:
        return self.core.size + sum(u.size for u in self.factors)

    def check_orthonormal(self, tol: float = 1e-10) -> bool:
        return all(np.linalg.norm(u.conj().T @ u - np.eye(u.shape[1])) <= tol for u in self.factors)

    def norm(self) -> float:
        return float(np.linalg.norm(self.core))


def tucker_to_dense(y: TuckerState) -> np.ndarray:
    out = y.core
    for k, u in enumerate(y.factors):
        out = ttm(out, k, u)
    return out


def tucker_product_state(vectors) -> TuckerState:
    factors = []
    for v in vectors:
        v = np.asarray(v, dtype=np.complex128).ravel()
        factors.append((v / np.linalg.norm(v)).reshape(-1, 1))
    return TuckerState(np.ones((1,) * len(factors), dtype=np.complex128), factors)


def _check_dims(h: TermSumOperator, y: TuckerState):
    if list(h.phys_dims) != y.phys_dims:
        raise DimensionError(f"operator dims {h.phys_dims} do not match state dims {y.phys_dims}")


def apply_termsum(h: TermSumOperator, y: TuckerState, t: float = 0.0) -> TuckerState:
    """Tucker form of ``H(t) Y``.

    Each term maps the factors to ``S_k U_k``; the factors of all terms are
    concatenated per mode (a block-diagonal core), then each mode is
    re-orthonormalized by QR and the triangular factors folded into the core.
    """
    _check_dims(h, y)
    n = len(y.factors)
    coeffs = h.coefficients(t)
    blocks = [[] for _ in range(n)]
    for term in h.terms:
        local = dict(term.factors)
        for k, u in enumerate(y.factors):
            blocks[k].append(local[k] @ u if k in local else u)
    qs, rs = [], []
    for k in range(n):
        q, r = thin_qr(np.concatenate(blocks[k], axis=1))
        qs.append(q)
        rs.append(r)
    core = np.zeros(tuple(q.shape[1] for q in qs), dtype=np.complex128)
    for i, c in enumerate(coeffs):
        if c == 0:
            continue
        g = c * y.core
        for k in range(n):
            b = y.core.shape[k]
            g = ttm(g, k, rs[k][:, i * b:(i + 1) * b])
        core += g
    return TuckerState(core, qs)


def hosvd_truncate(core: np.ndarray, factors, eps: float):
    """Truncate each mode of ``core`` to the ``eps``-rank of its matricization.

    Returns ``(core, factors, discarded)`` where ``discarded[k]`` is the
    singular-value tail dropped in mode ``k``.
    """
    basis = []
    discarded = []
    for k in range(core.ndim):
        mat = np.moveaxis(core, k, 0).reshape(core.shape[k], -1)
        res = truncated_svd(mat, eps)
        basis.append(res.u)
        discarded.append(res.discarded_weight)
    new_core = core
    for k, p in enumerate(basis):
        new_core = ttm(new_core, k, p.conj().T)
    new_factors = [u @ p for u, p in zip(factors, basis)]
    return new_core, new_factors, discarded


# -- matrix BUG ---------------------------------------------------------------


def matrix_bug_step(u0, s0, v0, f, t0: float, delta: float, eps: float = 0.0,
                    cfg: LocalSolveConfig = LocalSolveConfig(), stats: SolveStats | None = None,
                    return_augmented: bool = False):
    """One rank-adaptive BUG step for ``T' = F(t, T)`` with ``T(t0) = U0 S0 V0^+``.

    ``f(t, T)`` must be linear in ``T``. Returns ``(U1, S1, V1)``; with
    ``return_augmented`` the augmented bases are returned too.
    """
    u0, s0, v0 = (np.asarray(a, dtype=np.complex128) for a in (u0, s0, v0))
    if delta < 0:
        raise SolverError("BUG steps integrate forward in time only")
    t1 = t0 + delta

    # K-step on U0 S0 with V0 frozen, L-step on V0 S0^+ with U0 frozen
    k1 = evolve_local(lambda t: (lambda k: 1j * (f(t, k @ v0.conj().T) @ v0)), u0 @ s0, t0, t1, cfg, stats, True)
    l1 = evolve_local(lambda t: (lambda l: 1j * (f(t, u0 @ l.conj().T).conj().T @ u0)),
                      v0 @ s0.conj().T, t0, t1, cfg, stats, True)
    u_hat, _ = thin_qr(np.concatenate([k1, u0], axis=1))
    v_hat, _ = thin_qr(np.concatenate([l1, v0], axis=1))

    s_hat = (u_hat.conj().T @ u0) @ s0 @ (v0.conj().T @ v_hat)
    s_hat = evolve_local(lambda t: (lambda s: 1j * (u_hat.conj().T @ f(t, u_hat @ s @ v_hat.conj().T) @ v_hat)),
                         s_hat, t0, t1, cfg, stats, True)
    res = truncated_svd(s_hat, eps)
    out = (u_hat @ res.u, np.diag(res.s).astype(np.complex128), v_hat @ res.v)
    if return_augmented:
        return out + (u_hat, v_hat)
    return out


# -- Tucker BUG ---------------------------------------------------------------


def _k_step_operator(locals_, y: TuckerState, i: int):
    """Right factors ``Z_t`` of the mode-``i`` K-step, and the initial ``K``.

    With ``Mat_i(G)^T = Q R`` the mode-``i`` unfolding of ``Y`` is
    ``K W^T`` for ``K = U_i R^T`` and orthonormal ``W``; the projected
    equation reads ``K' = -i sum_t c_t S_{t,i} K Z_t`` where
    ``Z_t = (Q^+ (x_{j != i} U_j^+ S_{t,j} U_j) Q)^T``.
    """
    g = y.core
    n = g.ndim
    b_i = g.shape[i]
    other = [j for j in range(n) if j != i]
    mat = np.moveaxis(g, i, 0).reshape(b_i, -1)
    q, r = thin_qr(mat.T)
    r_i = q.shape[1]
    q_t = q.reshape(tuple(g.shape[j] for j in other) + (r_i,))
    k0 = y.factors[i] @ r.T
    axes = list(range(len(other)))
    zs = []
    for loc in locals_:
        a = q_t
        for pos, j in enumerate(other):
            if j in loc:
                u = y.factors[j]
                a = ttm(a, pos, u.conj().T @ loc[j] @ u)
        zs.append(np.tensordot(q_t.conj(), a, axes=(axes, axes)).T)
    return k0, zs


def tucker_bug_step(y: TuckerState, h: TermSumOperator, t0: float, delta: float, eps: float = 0.0,
                    cfg: LocalSolveConfig = LocalSolveConfig()):
    """One rank-adaptive Tucker BUG step for ``Y' = -i H(t) Y``; returns ``(Y1, StepReport)``."""
    _check_dims(h, y)
    if delta < 0:
        raise SolverError("BUG steps integrate forward in time only")
    n = len(y.factors)
    t1 = t0 + delta
    stats = SolveStats()
    locals_ = [dict(term.factors) for term in h.terms]

    new_factors = []
    transfers = []
    aug_ranks = []
    for i in range(n):
        k0, zs = _k_step_operator(locals_, y, i)
        s_ops = [loc.get(i) for loc in locals_]

        def k_op(t, zs=zs, s_ops=s_ops):
            coeffs = h.coefficients(t)

            def apply(k):
                out = np.zeros_like(k)
                for c, s, z in zip(coeffs, s_ops, zs):
                    if c == 0:
                        continue
                    out += c * ((s @ k if s is not None else k) @ z)
                return out

            return apply

        try:
            k1 = evolve_local(k_op, k0, t0, t1, cfg, stats, forward_only=True)
        except SolverError as exc:
            raise exc.at_site(i) from exc
        u_hat, _ = thin_qr(np.concatenate([k1, y.factors[i]], axis=1))
        new_factors.append(u_hat)
        transfers.append(u_hat.conj().T @ y.factors[i])
        aug_ranks.append(u_hat.shape[1])

    c0 = y.core
    for i, m in enumerate(transfers):
        c0 = ttm(c0, i, m)

    projected = []
    for loc in locals_:
        projected.append({k: new_factors[k].conj().T @ s @ new_factors[k] for k, s in loc.items()})

    def core_op(t):
        coeffs = h.coefficients(t)

        def apply(g):
            out = np.zeros_like(g)
            for c, loc in zip(coeffs, projected):
                if c == 0:
                    continue
                x = g
                for k, s in loc.items():
                    x = ttm(x, k, s)
                out += c * x
            return out

        return apply

    c1 = evolve_local(core_op, c0, t0, t1, cfg, stats, forward_only=True)
    core, factors, discarded = hosvd_truncate(c1, new_factors, eps)
    y1 = TuckerState(core, factors)
    report = StepReport(
        t=t1,
        max_bond=max(y1.ranks),
        storage=y1.storage(),
        norm=y1.norm(),
        trunc_weights=dict(enumerate(discarded)),
        iterations=list(stats.iteration_log),
        backward_solves=stats.backward_solves,
        augmented_bonds=aug_ranks,
        ranks=y1.ranks,
    )
    return y1, report


def evolve_tucker(y: TuckerState, h: TermSumOperator, t0: float, t1: float, steps: int, eps: float = 0.0,
                  cfg: LocalSolveConfig = LocalSolveConfig(), callback=None):
    if steps < 1:
        raise ValueError("steps must be >= 1")
    delta = (t1 - t0) / steps
    reports = []
    for k in range(steps):
        y, rep = tucker_bug_step(y, h, t0 + k * delta, delta, eps, cfg)
        rep.t = t0 + (k + 1) * delta
        reports.append(rep)
        if callback is not None:
            callback(k, y, rep)
    return y, reports
