"""Site magnetization, fidelities, state errors and storage counts."""

from __future__ import annotations

import numpy as np

from .errors import DimensionError, StateError
from .mps import MPS, _qr_left, _qr_right, inner, mixed_canonicalize, to_vector
from .tucker import TuckerState, tucker_to_dense

SIGMA_Z = np.array([1.0, -1.0])


def magnetization(psi: MPS, norm_tol: float = 1e-8, normalize: bool = False) -> np.ndarray:
    """``m_j = <psi| 2 S^z_j |psi>`` for every qubit site.

    The center is swept across the train, so each value is a local
    contraction of the center core. With ``normalize`` the values are divided
    by ``<psi|psi>`` instead of requiring a unit norm.
    """
    if any(d != 2 for d in psi.phys_dims):
        raise DimensionError("magnetization is defined for qubit sites only")
    start = psi.center if psi.center is not None else 0
    psi = mixed_canonicalize(psi, start)
    nrm2 = float(np.linalg.norm(psi[start]) ** 2)
    if not normalize and abs(nrm2 - 1.0) > norm_tol:
        raise StateError(f"state is not normalized (norm^2 = {nrm2:.12g})")
    out = np.empty(len(psi))
    cores = list(psi.cores)
    order = list(range(start, len(psi))) + list(range(start - 1, -1, -1))
    cur = start
    for j in order:
        if j < cur:
            cores = _move_left(cores, cur, j)
        elif j > cur:
            cores = _move_right(cores, cur, j)
        cur = j
        c = cores[j]
        w = np.sum(np.abs(c) ** 2, axis=(0, 2))
        out[j] = float(SIGMA_Z @ w)
    return out / nrm2 if normalize else out


def _move_right(cores, i, j):
    for k in range(i, j):
        a, r = _qr_left(cores[k])
        cores[k] = a
        cores[k + 1] = np.tensordot(r, cores[k + 1], axes=(1, 0))
    return cores


def _move_left(cores, i, j):
    for k in range(i, j, -1):
        r, b = _qr_right(cores[k])
        cores[k] = b
        cores[k - 1] = np.tensordot(cores[k - 1], r, axes=(2, 0))
    return cores


def magnetization_dense(vec, n: int) -> np.ndarray:
    """Reference values from a full state vector of ``n`` qubits."""
    t = np.asarray(vec).reshape((2,) * n)
    p = np.abs(t) ** 2
    out = np.empty(n)
    for j in range(n):
        w = np.sum(p, axis=tuple(k for k in range(n) if k != j))
        out[j] = SIGMA_Z @ w
    return out / p.sum()


def _as_vector(psi):
    if isinstance(psi, MPS):
        return to_vector(psi)
    if isinstance(psi, TuckerState):
        return tucker_to_dense(psi).ravel()
    return np.asarray(psi, dtype=np.complex128).ravel()


def fidelity(psi, target, norm_tol: float = 1e-8) -> float:
    """``|<target|psi>|^2`` for normalized states (trains or vectors)."""
    if isinstance(psi, MPS) and isinstance(target, MPS):
        ov = inner(target, psi)
        n1, n2 = inner(psi, psi).real, inner(target, target).real
    else:
        a, b = _as_vector(psi), _as_vector(target)
        if a.shape != b.shape:
            raise DimensionError(f"state lengths {a.size} and {b.size} differ")
        ov = np.vdot(b, a)
        n1, n2 = np.vdot(a, a).real, np.vdot(b, b).real
    for label, v in (("state", n1), ("target", n2)):
        if abs(v - 1.0) > norm_tol:
            raise StateError(f"{label} is not normalized (norm^2 = {v:.12g})")
    return float(min(abs(ov) ** 2, 1.0))


def infidelity(psi, target, norm_tol: float = 1e-8) -> float:
    return 1.0 - fidelity(psi, target, norm_tol)


def state_error(psi, ref, align_phase: bool = False) -> float:
    """``|psi - ref|_2`` on full vectors, optionally after removing the global phase."""
    a = _as_vector(psi)
    b = _as_vector(ref)
    if a.shape != b.shape:
        raise DimensionError(f"state lengths {a.size} and {b.size} differ")
    if align_phase:
        ov = np.vdot(a, b)
        if abs(ov) > 0:
            a = a * (ov / abs(ov))
    return float(np.linalg.norm(a - b))


def storage(psi) -> int:
    """Stored complex entries of a train or Tucker state."""
    if isinstance(psi, (MPS, TuckerState)):
        return psi.storage()
    return int(np.asarray(psi).size)
