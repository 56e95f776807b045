"""Matrix-product operators, environments and effective Hamiltonians.

An MPO core has shape ``(w_left, d_out, d_in, w_right)``. Environments are
stored with index order ``(bra, mpo, ket)``; ``left[j]`` contracts sites
``0 .. j-1`` and ``right[j]`` contracts sites ``j .. N-1``, so ``left[0]`` and
``right[N]`` are the trivial ``1x1x1`` tensor.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import CapacityError, DimensionError, HermiticityError, StateError
from .mps import MPS, is_left_normalized, is_right_normalized

TRIVIAL_ENV = np.ones((1, 1, 1), dtype=np.complex128)


class MPO:
    """Matrix-product operator with order-4 cores."""

    __slots__ = ("_cores",)

    def __init__(self, cores):
        cores = tuple(np.asarray(c, dtype=np.complex128) for c in cores)
        if not cores:
            raise DimensionError("an MPO needs at least one core")
        for k, w in enumerate(cores):
            if w.ndim != 4 or w.shape[1] != w.shape[2]:
                raise DimensionError(f"MPO core {k} has shape {w.shape}")
        if cores[0].shape[0] != 1 or cores[-1].shape[3] != 1:
            raise DimensionError("outer MPO bonds must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[3] != cores[k + 1].shape[0]:
                raise DimensionError(f"MPO bond {k} extents do not match")
        self._cores = cores

    @property
    def cores(self):
        return self._cores

    def __len__(self):
        return len(self._cores)

    def __getitem__(self, k):
        return self._cores[k]

    @property
    def phys_dims(self):
        return [w.shape[1] for w in self._cores]

    @property
    def bond_dims(self):
        return [1] + [w.shape[3] for w in self._cores]

    def scaled(self, factor: complex) -> "MPO":
        cores = list(self._cores)
        cores[0] = cores[0] * factor
        return MPO(cores)

    def to_matrix(self, cap: int = 4096) -> np.ndarray:
        """Dense operator matrix in lexicographic ordering."""
        total = int(np.prod(self.phys_dims))
        if total > cap:
            raise CapacityError(f"dense operator of dimension {total} exceeds cap {cap}")
        # acc[row, col, w]
        acc = self._cores[0][0]  # (d, d, w)
        for w in self._cores[1:]:
            r, c, _ = acc.shape
            d = w.shape[1]
            acc = np.tensordot(acc, w, axes=(2, 0))  # r, c, d, d', w'
            acc = acc.transpose(0, 2, 1, 3, 4).reshape(r * d, c * d, w.shape[3])
        return acc[:, :, 0]

    def __repr__(self):
        return f"MPO(N={len(self)}, bonds={self.bond_dims[1:-1]})"


def identity_mpo(phys_dims) -> MPO:
    return MPO([np.eye(d, dtype=np.complex128).reshape(1, d, d, 1) for d in phys_dims])


class TimeDependentMpo:
    """MPO-valued function of time (ns) with fixed bond structure."""

    def __init__(self, evaluator: Callable[[float], MPO], phys_dims=None, bond_dims=None):
        self._evaluator = evaluator
        probe = evaluator(0.0)
        self.phys_dims = list(phys_dims or probe.phys_dims)
        self.bond_dims = list(bond_dims or probe.bond_dims)

    @classmethod
    def constant(cls, mpo: MPO) -> "TimeDependentMpo":
        return cls(lambda t: mpo)

    def __call__(self, t: float) -> MPO:
        mpo = self._evaluator(float(t))
        if mpo.bond_dims != self.bond_dims:
            raise DimensionError(f"MPO bond dims changed at t={t}: {mpo.bond_dims} vs {self.bond_dims}")
        return mpo

    def scaled(self, factor: complex) -> "TimeDependentMpo":
        ev = self._evaluator
        return TimeDependentMpo(lambda t: ev(t).scaled(factor), self.phys_dims, self.bond_dims)


def as_time_dependent(h) -> TimeDependentMpo:
    if isinstance(h, TimeDependentMpo):
        return h
    if isinstance(h, MPO):
        return TimeDependentMpo.constant(h)
    raise TypeError(f"expected MPO or TimeDependentMpo, got {type(h).__name__}")


# -- MPO applied to states ----------------------------------------------------


def apply_mpo(h: MPO, psi: MPS) -> MPS:
    """``H|psi>`` as a train with inflated bonds ``b''_k = b'_k * b_k``.

    Used for tests and observables; the integrators never form this product.
    The combined bond index is ``w * b_k + m`` (operator index major).
    """
    if h.phys_dims != psi.phys_dims:
        raise DimensionError(f"MPO dims {h.phys_dims} do not match state dims {psi.phys_dims}")
    cores = []
    for w, m in zip(h.cores, psi.cores):
        wl, d, _, wr = w.shape
        ml, _, mr = m.shape
        c = np.tensordot(w, m, axes=(2, 1))  # wl, d, wr, ml, mr
        c = c.transpose(0, 3, 1, 2, 4).reshape(wl * ml, d, wr * mr)
        cores.append(c)
    return MPS(cores)


def extend_left(env: np.ndarray, core: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``L_new[b, v, b'] = conj(A[a, s, b]) L[a, w, a'] W[w, s, s', v] A[a', s', b']``."""
    t = np.tensordot(env, core, axes=(2, 0))  # a, w, s', b'
    t = np.tensordot(t, w, axes=([1, 2], [0, 2]))  # a, b', s, v
    t = np.tensordot(core.conj(), t, axes=([0, 1], [0, 2]))  # b, b', v
    return t.transpose(0, 2, 1)


def extend_right(env: np.ndarray, core: np.ndarray, w: np.ndarray) -> np.ndarray:
    """``R_new[a, w, a'] = conj(B[a, s, b]) W[w, s, s', v] B[a', s', b'] R[b, v, b']``."""
    t = np.tensordot(core, env, axes=(2, 2))  # a', s', b, v
    t = np.tensordot(w, t, axes=([2, 3], [1, 3]))  # w, s, a', b
    t = np.tensordot(core.conj(), t, axes=([1, 2], [1, 3]))  # a, w, a'
    return t


def expectation(h: MPO, psi: MPS, norm_tol: float = 1e-8, herm_tol: float = 1e-10) -> float:
    """Real part of ``<psi|H|psi>`` for a normalized state."""
    if h.phys_dims != psi.phys_dims:
        raise DimensionError("MPO and state dims differ")
    env = TRIVIAL_ENV
    for c, w in zip(psi.cores, h.cores):
        env = extend_left(env, c, w)
    if norm_tol is not None:
        nrm2 = _norm2(psi)
        if abs(nrm2 - 1.0) > norm_tol:
            raise StateError(f"state is not normalized (norm^2 = {nrm2:.12g})")
    val = complex(env[0, 0, 0])
    if abs(val.imag) > herm_tol * max(1.0, abs(val.real)):
        raise HermiticityError(f"<psi|H|psi> has imaginary part {val.imag:.3e}")
    return val.real


def _norm2(psi: MPS) -> float:
    env = np.ones((1, 1), dtype=np.complex128)
    for c in psi.cores:
        t = np.tensordot(env, c, axes=(1, 0))
        env = np.tensordot(c.conj(), t, axes=([0, 1], [0, 1]))
    return float(env[0, 0].real)


# -- environments -------------------------------------------------------------


@dataclass
class EnvironmentStack:
    """Cached left/right environments with the time level of the cores used."""

    n: int
    left: list = field(default_factory=list)
    right: list = field(default_factory=list)
    left_tags: list = field(default_factory=list)
    right_tags: list = field(default_factory=list)

    def __post_init__(self):
        if not self.left:
            self.left = [None] * (self.n + 1)
            self.right = [None] * (self.n + 1)
            self.left_tags = [None] * (self.n + 1)
            self.right_tags = [None] * (self.n + 1)
            self.left[0] = TRIVIAL_ENV
            self.right[self.n] = TRIVIAL_ENV

    def copy(self) -> "EnvironmentStack":
        return EnvironmentStack(
            self.n, list(self.left), list(self.right), list(self.left_tags), list(self.right_tags)
        )

    def extend_left(self, j: int, core: np.ndarray, w: np.ndarray, tag=None) -> np.ndarray:
        """Build ``left[j + 1]`` from ``left[j]`` and site ``j``."""
        if self.left[j] is None:
            raise StateError(f"left environment {j} missing")
        self.left[j + 1] = extend_left(self.left[j], core, w)
        self.left_tags[j + 1] = tag
        return self.left[j + 1]

    def extend_right(self, j: int, core: np.ndarray, w: np.ndarray, tag=None) -> np.ndarray:
        """Build ``right[j]`` from ``right[j + 1]`` and site ``j``."""
        if self.right[j + 1] is None:
            raise StateError(f"right environment {j + 1} missing")
        self.right[j] = extend_right(self.right[j + 1], core, w)
        self.right_tags[j] = tag
        return self.right[j]


def build_right_environments(h: MPO, psi: MPS, down_to: int = 1, tag=None, check: bool = True) -> EnvironmentStack:
    """Right environments ``right[N] .. right[down_to]`` of a centered train."""
    n = len(psi)
    if check:
        if psi.center is None or psi.center >= down_to:
            raise StateError(f"need a center left of site {down_to}, have {psi.center}")
        for k in range(down_to, n):
            if not is_right_normalized(psi[k]):
                raise StateError(f"core {k} is not right-normalized")
    stack = EnvironmentStack(n)
    for j in range(n - 1, down_to - 1, -1):
        stack.extend_right(j, psi[j], h[j], tag)
    return stack


def build_left_environments(h: MPO, psi: MPS, up_to: int, tag=None, check: bool = True) -> EnvironmentStack:
    """Left environments ``left[0] .. left[up_to]``."""
    if check:
        for k in range(up_to):
            if not is_left_normalized(psi[k]):
                raise StateError(f"core {k} is not left-normalized")
    stack = EnvironmentStack(len(psi))
    for j in range(up_to):
        stack.extend_left(j, psi[j], h[j], tag)
    return stack


# -- effective Hamiltonians ---------------------------------------------------


class EffectiveHamiltonian:
    """Projected Hamiltonian acting on a site core, bond matrix or merged pair.

    ``kind`` is ``"one_site"`` (unknown of order 3), ``"bond"`` (order 2) or
    ``"two_site"`` (order 4). The action is evaluated by small contractions
    with the right environment first, then the MPO cores, then the left
    environment; the dense matrix is never formed.
    """

    def __init__(self, kind: str, left: np.ndarray, right: np.ndarray, ws=()):
        expected = {"one_site": 1, "bond": 0, "two_site": 2}
        if kind not in expected:
            raise ValueError(f"unknown effective Hamiltonian kind {kind!r}")
        if len(ws) != expected[kind]:
            raise ValueError(f"{kind} needs {expected[kind]} MPO cores")
        self.kind = kind
        self.left = left
        self.right = right
        self.ws = tuple(ws)
        if kind == "bond":
            self.shape = (left.shape[0], right.shape[0])
        elif kind == "one_site":
            self.shape = (left.shape[0], ws[0].shape[1], right.shape[0])
        else:
            self.shape = (left.shape[0], ws[0].shape[1], ws[1].shape[1], right.shape[0])

    @property
    def size(self) -> int:
        return int(np.prod(self.shape))

    def __call__(self, x: np.ndarray) -> np.ndarray:
        if x.shape != self.shape:
            raise DimensionError(f"{self.kind} operator expects shape {self.shape}, got {x.shape}")
        L, R = self.left, self.right
        if self.kind == "bond":
            t = np.tensordot(x, R, axes=(1, 2))  # a', b, w
            return np.tensordot(L, t, axes=([1, 2], [2, 0]))  # a, b
        if self.kind == "one_site":
            (w,) = self.ws
            t = np.tensordot(x, R, axes=(2, 2))  # a', s', b, v
            t = np.tensordot(t, w, axes=([1, 3], [2, 3]))  # a', b, w, s
            t = np.tensordot(L, t, axes=([1, 2], [2, 0]))  # a, b, s
            return t.transpose(0, 2, 1)
        w1, w2 = self.ws
        t = np.tensordot(x, R, axes=(3, 2))  # a', s', t', b, v
        t = np.tensordot(t, w2, axes=([2, 4], [2, 3]))  # a', s', b, u, t
        t = np.tensordot(t, w1, axes=([1, 3], [2, 3]))  # a', b, t, w, s
        t = np.tensordot(L, t, axes=([1, 2], [3, 0]))  # a, b, t, s
        return t.transpose(0, 3, 2, 1)

    def to_matrix(self, cap: int = 4096) -> np.ndarray:
        """Dense matrix of the map on the flattened unknown (testing only)."""
        n = self.size
        if n > cap:
            raise CapacityError(f"effective operator of dimension {n} exceeds cap {cap}")
        cols = []
        for i in range(n):
            e = np.zeros(n, dtype=np.complex128)
            e[i] = 1.0
            cols.append(self(e.reshape(self.shape)).ravel())
        return np.stack(cols, axis=1)


def one_site_operator(stack: EnvironmentStack, h: MPO, j: int) -> EffectiveHamiltonian:
    if stack.left[j] is None or stack.right[j + 1] is None:
        raise StateError(f"environments for site {j} are missing")
    return EffectiveHamiltonian("one_site", stack.left[j], stack.right[j + 1], (h[j],))


def bond_operator(stack: EnvironmentStack, j: int) -> EffectiveHamiltonian:
    """Operator on the bond matrix between sites ``j`` and ``j + 1``."""
    if stack.left[j + 1] is None or stack.right[j + 1] is None:
        raise StateError(f"environments for bond {j} are missing")
    return EffectiveHamiltonian("bond", stack.left[j + 1], stack.right[j + 1])


def two_site_operator(stack: EnvironmentStack, h: MPO, j: int) -> EffectiveHamiltonian:
    if stack.left[j] is None or stack.right[j + 2] is None:
        raise StateError(f"environments for sites {j}, {j + 1} are missing")
    return EffectiveHamiltonian("two_site", stack.left[j], stack.right[j + 2], (h[j], h[j + 1]))


def apply_effective(eff: EffectiveHamiltonian, x: np.ndarray) -> np.ndarray:
    return eff(x)
