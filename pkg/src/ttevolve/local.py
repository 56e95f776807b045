"""Propagation of small dense unknowns under ``x' = -i H x``.

``H`` is any callable mapping an array to an array of the same shape. The
default method is the implicit midpoint rule, with its linear system solved by
fixed-point (Jacobi-type) iteration so only the action of ``H`` is needed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import CapacityError, SolverError


@dataclass(frozen=True)
class LocalSolveConfig:
    method: str = "imr"
    substeps: int = 1
    fp_tol: float = 1e-12
    fp_max_iters: int = 200
    exp_cap: int = 4096

    def __post_init__(self):
        if self.method not in ("imr", "hermitian_exp"):
            raise ValueError(f"unknown local method {self.method!r}")
        if self.substeps < 1:
            raise ValueError("substeps must be >= 1")
        if not self.fp_tol > 0:
            raise ValueError("fp_tol must be positive")
        if self.fp_max_iters < 1:
            raise ValueError("fp_max_iters must be >= 1")


@dataclass
class SolveStats:
    """Counters accumulated over local solves."""

    solves: int = 0
    iterations: int = 0
    backward_solves: int = 0
    iteration_log: list = field(default_factory=list)

    def record(self, iters: int, backward: bool):
        self.solves += 1
        self.iterations += iters
        self.iteration_log.append(iters)
        if backward:
            self.backward_solves += 1


def imr_substep(op, x: np.ndarray, dt: float, cfg: LocalSolveConfig = LocalSolveConfig()):
    """One implicit-midpoint step; returns ``(x_new, iterations)``.

    Solves ``(I + i dt/2 H) g = -i H x`` by iterating
    ``g <- -i H x - i dt/2 H g`` until the update norm falls below
    ``fp_tol * |g|``, then returns ``x + dt g``. Negative ``dt`` steps backward.
    """
    b = -1j * op(x)
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return x.copy(), 0
    g = b
    half = 0.5j * dt
    delta = np.inf
    for it in range(1, cfg.fp_max_iters + 1):
        g_new = b - half * op(g)
        delta = np.linalg.norm(g_new - g)
        g = g_new
        if delta <= cfg.fp_tol * np.linalg.norm(g):
            return x + dt * g, it
        if not np.isfinite(delta):
            break
    raise SolverError(
        f"fixed-point iteration did not converge in {cfg.fp_max_iters} iterations "
        f"(|dt|={abs(dt):.3e}, |Hx|={nb:.3e})",
        residual=float(delta),
    )


def dense_operator(op, shape, cap: int) -> np.ndarray:
    n = int(np.prod(shape))
    if n > cap:
        raise CapacityError(f"local operator of dimension {n} exceeds cap {cap}")
    eye = np.eye(n, dtype=np.complex128)
    return np.stack([op(eye[i].reshape(shape)).ravel() for i in range(n)], axis=1)


def hermitian_exp_step(op, x: np.ndarray, dt: float, cap: int = 4096) -> np.ndarray:
    """``exp(-i dt H) x`` through an eigendecomposition of the densified ``H``."""
    h = dense_operator(op, x.shape, cap)
    h = 0.5 * (h + h.conj().T)
    evals, evecs = np.linalg.eigh(h)
    y = evecs.conj().T @ x.ravel()
    y = evecs @ (np.exp(-1j * dt * evals) * y)
    return y.reshape(x.shape)


def evolve_local(op_at, x, t0: float, t1: float, cfg: LocalSolveConfig = LocalSolveConfig(),
                 stats: SolveStats | None = None, forward_only: bool = False):
    """Propagate ``x`` from ``t0`` to ``t1`` (either order).

    ``op_at(t)`` returns the operator at time ``t``; it is sampled at each
    substep midpoint. With ``forward_only`` a backward interval is an error.
    """
    if forward_only and t1 < t0:
        raise SolverError(f"backward local solve requested ({t0} -> {t1}) in a forward-only integrator")
    n = cfg.substeps
    h = (t1 - t0) / n
    total = 0
    for i in range(n):
        op = op_at(t0 + (i + 0.5) * h)
        if cfg.method == "imr":
            x, it = imr_substep(op, x, h, cfg)
            total += it
        else:
            x = hermitian_exp_step(op, x, h, cfg.exp_cap)
    if stats is not None:
        stats.record(total, t1 < t0)
    return x


def constant(op):
    """Wrap a fixed operator as a function of time."""
    return lambda t: op
