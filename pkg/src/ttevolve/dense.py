"""Full state-vector reference solver.

States are plain complex vectors in lexicographic order (last site index
varies fastest), matching ``numpy.ravel`` of the order-N amplitude tensor.
"""

from __future__ import annotations

import numpy as np

from .errors import CapacityError, DimensionError, SolverError
from .mpo import MPO, TimeDependentMpo
from .termsum import TermSumOperator

EXPM_CAP = 2**12
IMR_CAP = 2**20


def lex_index(idx, dims) -> int:
    """0-based linear index of the 0-based tuple ``idx``."""
    if len(idx) != len(dims):
        raise DimensionError(f"tuple of length {len(idx)} for {len(dims)} dims")
    out = 0
    for i, d in zip(idx, dims):
        if not 0 <= i < d:
            raise IndexError(f"index component {i} out of range for extent {d}")
        out = out * d + int(i)
    return out


def lex_tuple(index: int, dims) -> tuple:
    total = int(np.prod(dims))
    if not 0 <= index < total:
        raise IndexError(f"linear index {index} out of range for {total} entries")
    out = []
    for d in reversed(dims):
        index, r = divmod(index, d)
        out.append(r)
    return tuple(reversed(out))


def dense_hamiltonian(model, t: float = 0.0, cap: int = EXPM_CAP) -> np.ndarray:
    """Dense matrix of a term sum, MPO or time-dependent MPO at time ``t``."""
    if isinstance(model, TermSumOperator):
        return model.dense(t, cap)
    if isinstance(model, TimeDependentMpo):
        model = model(t)
    if isinstance(model, MPO):
        return model.to_matrix(cap)
    raise TypeError(f"cannot densify {type(model).__name__}")


def _check_cap(n, cap):
    if n > cap:
        raise CapacityError(f"state of dimension {n} exceeds dense cap {cap}")


class ExpPropagator:
    """``exp(-i t H)`` through one Hermitian eigendecomposition, reused across ``t``."""

    def __init__(self, h: np.ndarray, cap: int = EXPM_CAP):
        h = np.asarray(h, dtype=np.complex128)
        _check_cap(h.shape[0], cap)
        self.evals, self.evecs = np.linalg.eigh(0.5 * (h + h.conj().T))

    def __call__(self, psi0: np.ndarray, t: float) -> np.ndarray:
        y = self.evecs.conj().T @ psi0
        return self.evecs @ (np.exp(-1j * t * self.evals) * y)


def expm_propagate(psi0, h, t: float, cap: int = EXPM_CAP) -> np.ndarray:
    psi0 = np.asarray(psi0, dtype=np.complex128).ravel()
    if h.shape != (psi0.size, psi0.size):
        raise DimensionError(f"operator shape {h.shape} does not match state length {psi0.size}")
    return ExpPropagator(h, cap)(psi0, t)


def imr_propagate(psi0, h_at, t_final: float, steps: int, fp_tol: float = 1e-12,
                  t0: float = 0.0, max_iters: int = 500, cap: int = IMR_CAP) -> np.ndarray:
    """Implicit midpoint rule with ``H`` sampled at step midpoints.

    ``h_at(t)`` returns a dense array or scipy sparse matrix. The linear system
    is solved by the fixed-point iteration
    ``g <- -i H x - (i dt/2) H g``, ``x_new = x + dt g``, stopping once the
    update is below ``fp_tol`` relative to ``|g|``.
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    x = np.asarray(psi0, dtype=np.complex128).ravel().copy()
    _check_cap(x.size, cap)
    dt = (t_final - t0) / steps
    for k in range(steps):
        t_mid = t0 + (k + 0.5) * dt
        h = h_at(t_mid)
        if h.shape != (x.size, x.size):
            raise DimensionError(f"operator shape {h.shape} does not match state length {x.size}")
        b = -1j * (h @ x)
        g = b
        for _ in range(max_iters):
            g_new = b - 0.5j * dt * (h @ g)
            delta = np.linalg.norm(g_new - g)
            g = g_new
            if delta <= fp_tol * np.linalg.norm(g):
                break
        else:
            raise SolverError(f"IMR fixed point failed at step {k} (t={t_mid:.6g})", residual=float(delta))
        x = x + dt * g
    return x


def termsum_generator(h: TermSumOperator, sparse: bool = True):
    """``t -> H(t)`` for ``imr_propagate``, cached when ``h`` is time-independent."""
    if not h.time_dependent:
        m = h.sparse(0.0) if sparse else h.dense(0.0, cap=IMR_CAP)
        return lambda t: m
    return (lambda t: h.sparse(t)) if sparse else (lambda t: h.dense(t, cap=IMR_CAP))


def richardson_estimate(psi_coarse, psi_fine, order: int = 2) -> float:
    """``|psi_fine - psi_coarse| / (2^p - 1)``, an error proxy for the fine solution."""
    a = np.asarray(psi_coarse).ravel()
    b = np.asarray(psi_fine).ravel()
    if a.shape != b.shape:
        raise DimensionError(f"states have lengths {a.size} and {b.size}")
    return float(np.linalg.norm(b - a) / (2.0**order - 1.0))

