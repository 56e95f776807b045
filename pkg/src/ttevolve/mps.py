"""Tensor-train (MPS) states.

Sites are numbered from 0. Core ``k`` has shape ``(b_{k-1}, d_k, b_k)`` with
outer bonds of extent 1. ``center`` is the index of the orthogonality center
when the train is in mixed-canonical form, ``None`` otherwise.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

import numpy as np

from .errors import CapacityError, DimensionError, StateError
from .tensor import truncated_svd, thin_qr

DENSE_CAP = 2**24


@dataclass(frozen=True)
class BondMatrix:
    """Square matrix on the bond between ``site`` and ``site + 1``."""

    site: int
    matrix: np.ndarray


class MPS:
    """Immutable tensor-train state. Operations return new instances."""

    __slots__ = ("_cores", "center")

    def __init__(self, cores, center: int | None = None):
        cores = tuple(np.asarray(c, dtype=np.complex128) for c in cores)
        if not cores:
            raise DimensionError("an MPS needs at least one core")
        for k, c in enumerate(cores):
            if c.ndim != 3:
                raise DimensionError(f"core {k} has order {c.ndim}, expected 3")
        if cores[0].shape[0] != 1 or cores[-1].shape[2] != 1:
            raise DimensionError("outer bond dimensions must be 1")
        for k in range(len(cores) - 1):
            if cores[k].shape[2] != cores[k + 1].shape[0]:
                raise DimensionError(
                    f"bond {k}: core {k} right extent {cores[k].shape[2]} != "
                    f"core {k + 1} left extent {cores[k + 1].shape[0]}"
                )
        if center is not None and not 0 <= center < len(cores):
            raise DimensionError(f"center {center} out of range")
        self._cores = cores
        self.center = center

    @property
    def cores(self) -> tuple:
        return self._cores

    def __len__(self):
        return len(self._cores)

    def __getitem__(self, k):
        return self._cores[k]

    @property
    def phys_dims(self) -> list[int]:
        return [c.shape[1] for c in self._cores]

    @property
    def bond_dims(self) -> list[int]:
        """Interior and outer bonds ``b_0 .. b_N``."""
        return [1] + [c.shape[2] for c in self._cores]

    @property
    def max_bond(self) -> int:
        return max(self.bond_dims)

    def storage(self) -> int:
        """Number of stored complex entries, sum of ``b_{k-1} d_k b_k``."""
        return sum(c.size for c in self._cores)

    def replace(self, cores=None, center="keep") -> "MPS":
        return MPS(self._cores if cores is None else cores, self.center if center == "keep" else center)

    def __repr__(self):
        return f"MPS(N={len(self)}, bonds={self.bond_dims[1:-1]}, center={self.center})"


# -- construction -------------------------------------------------------------


def product_state(vectors, tol: float = 1e-12) -> MPS:
    """Product state from one normalized local vector per site."""
    cores = []
    for k, v in enumerate(vectors):
        v = np.asarray(v, dtype=np.complex128).ravel()
        if abs(np.linalg.norm(v) - 1.0) > tol:
            raise ValueError(f"local vector {k} is not normalized (norm {np.linalg.norm(v):.15g})")
        cores.append(v.reshape(1, -1, 1))
    return MPS(cores, center=0)


def basis_state(bits, d: int = 2) -> MPS:
    """Computational basis product state, e.g. ``[1, 1, 0]``."""
    vectors = []
    for b in bits:
        v = np.zeros(d)
        v[int(b)] = 1.0
        vectors.append(v)
    return product_state(vectors)


def random_local_vectors(n: int, d: int = 2, rng=None) -> list[np.ndarray]:
    """Normalized vectors of independent standard complex Gaussians."""
    rng = np.random.default_rng(rng)
    out = []
    for _ in range(n):
        v = rng.standard_normal(d) + 1j * rng.standard_normal(d)
        out.append(v / np.linalg.norm(v))
    return out


def random_product_state(n: int, d: int = 2, rng=None) -> MPS:
    return product_state(random_local_vectors(n, d, rng))


def random_mps(phys_dims, bond: int, rng=None, normalize: bool = True) -> MPS:
    """Random train with interior bonds ``min(bond, max possible)``."""
    rng = np.random.default_rng(rng)
    n = len(phys_dims)
    bonds = [1]
    for k in range(1, n):
        left = int(np.prod(phys_dims[:k]))
        right = int(np.prod(phys_dims[k:]))
        bonds.append(min(bond, left, right))
    bonds.append(1)
    cores = []
    for k, d in enumerate(phys_dims):
        shape = (bonds[k], d, bonds[k + 1])
        cores.append(rng.standard_normal(shape) + 1j * rng.standard_normal(shape))
    psi = MPS(cores)
    if normalize:
        psi = mixed_canonicalize(psi, 0)
        c0 = psi[0] / np.linalg.norm(psi[0])
        psi = psi.replace(cores=(c0,) + psi.cores[1:])
    return psi


def tt_svd_from_dense(t: np.ndarray, eps: float = 0.0) -> MPS:
    """TT-SVD of an order-N tensor; left-canonical with center at the last site."""
    t = np.asarray(t, dtype=np.complex128)
    dims = t.shape
    cores = []
    rest = t.reshape(1, -1)
    b = 1
    for k in range(len(dims) - 1):
        mat = rest.reshape(b * dims[k], -1)
        res = truncated_svd(mat, eps)
        cores.append(res.u.reshape(b, dims[k], res.rank))
        rest = res.s[:, None] * res.vh
        b = res.rank
    cores.append(rest.reshape(b, dims[-1], 1))
    return MPS(cores, center=len(dims) - 1)


def pad_bonds(psi: MPS, bonds) -> MPS:
    """Embed the cores into zero-padded cores with interior bonds ``bonds``.

    The represented state is unchanged. ``bonds`` lists ``b_1 .. b_{N-1}``.
    """
    bonds = [1] + [int(b) for b in bonds] + [1]
    if len(bonds) != len(psi) + 1:
        raise DimensionError(f"need {len(psi) - 1} interior bonds, got {len(bonds) - 2}")
    cores = []
    for k, c in enumerate(psi.cores):
        bl, d, br = c.shape
        if bonds[k] < bl or bonds[k + 1] < br:
            raise DimensionError(f"cannot shrink bond at core {k}")
        new = np.zeros((bonds[k], d, bonds[k + 1]), dtype=np.complex128)
        new[:bl, :, :br] = c
        cores.append(new)
    return MPS(cores)


def max_bonds(phys_dims) -> list[int]:
    """Largest interior bonds a train over ``phys_dims`` can need."""
    n = len(phys_dims)
    return [min(int(np.prod(phys_dims[:k])), int(np.prod(phys_dims[k:]))) for k in range(1, n)]


# -- dense conversion and inner products --------------------------------------


def to_dense(psi: MPS, cap: int = DENSE_CAP) -> np.ndarray:
    """Full order-N tensor with element ``M^{s_1} ... M^{s_N}``."""
    total = int(np.prod(psi.phys_dims, dtype=np.int64))
    if total > cap:
        raise CapacityError(f"dense state of {total} entries exceeds cap {cap}")
    out = psi[0].reshape(psi[0].shape[1], psi[0].shape[2])
    for c in psi.cores[1:]:
        out = np.tensordot(out, c, axes=(out.ndim - 1, 0))
    return out.reshape(psi.phys_dims)


def to_vector(psi: MPS, cap: int = DENSE_CAP) -> np.ndarray:
    return to_dense(psi, cap).ravel()


def inner(psi: MPS, phi: MPS) -> complex:
    """<psi|phi>, contracting the two trains site by site."""
    if psi.phys_dims != phi.phys_dims:
        raise DimensionError(f"physical dims differ: {psi.phys_dims} vs {phi.phys_dims}")
    env = np.ones((1, 1), dtype=np.complex128)
    for a, b in zip(psi.cores, phi.cores):
        # env[a, b] -> sum conj(A[a, s, a']) env[a, b] B[b, s, b']
        tmp = np.tensordot(env, b, axes=(1, 0))  # a, s, b'
        env = np.tensordot(a.conj(), tmp, axes=([0, 1], [0, 1]))
    return complex(env[0, 0])


def norm(psi: MPS) -> float:
    if psi.center is not None:
        return float(np.linalg.norm(psi[psi.center]))
    return float(np.sqrt(max(inner(psi, psi).real, 0.0)))


# -- canonical forms ----------------------------------------------------------


def left_orthonormalize_core(core: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``core = A . C`` with ``A`` left-normalized; returns ``(A, C)``."""
    bl, d, br = core.shape
    u, s, vh = np.linalg.svd(core.reshape(bl * d, br), full_matrices=False)
    k = len(s)
    return u.reshape(bl, d, k), s[:, None] * vh


def right_orthonormalize_core(core: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """``core = C . B`` with ``B`` right-normalized; returns ``(C, B)``."""
    bl, d, br = core.shape
    u, s, vh = np.linalg.svd(core.reshape(bl, d * br), full_matrices=False)
    k = len(s)
    return u * s, vh.reshape(k, d, br)


def _qr_left(core):
    bl, d, br = core.shape
    q, r = thin_qr(core.reshape(bl * d, br))
    return q.reshape(bl, d, q.shape[1]), r


def _qr_right(core):
    bl, d, br = core.shape
    q, r = thin_qr(core.reshape(bl, d * br).T)
    return r.T, q.T.reshape(q.shape[1], d, br)


def mixed_canonicalize(psi: MPS, j: int) -> MPS:
    """Move the orthogonality center to site ``j``.

    Cores left of ``j`` become left-normalized and cores right of ``j``
    right-normalized. A train that is already centered is only swept between
    its old and new center. Bonds may shrink where they exceed what the
    neighbouring extents allow.
    """
    n = len(psi)
    if not 0 <= j < n:
        raise DimensionError(f"site {j} out of range")
    cores = list(psi.cores)
    if psi.center is None:
        lo, hi = 0, n - 1
    else:
        lo = hi = psi.center
    lo = min(lo, j)
    hi = max(hi, j)
    for k in range(lo, j):
        a, r = _qr_left(cores[k])
        cores[k] = a
        cores[k + 1] = np.tensordot(r, cores[k + 1], axes=(1, 0))
    for k in range(hi, j, -1):
        r, b = _qr_right(cores[k])
        cores[k] = b
        cores[k - 1] = np.tensordot(cores[k - 1], r, axes=(2, 0))
    return MPS(cores, center=j)


def shift_center(psi: MPS, direction: int) -> tuple[MPS, BondMatrix]:
    """Move the center one site right (``+1``) or left (``-1``).

    The center core is factored by an untruncated SVD; the bond matrix is
    returned before it is absorbed into the neighbouring core.
    """
    if psi.center is None:
        raise StateError("shift_center needs a mixed-canonical state")
    j = psi.center
    target = j + direction
    if direction not in (1, -1) or not 0 <= target < len(psi):
        raise DimensionError(f"cannot move center from {j} in direction {direction}")
    cores = list(psi.cores)
    if direction == 1:
        a, c = left_orthonormalize_core(cores[j])
        cores[j] = a
        cores[j + 1] = np.tensordot(c, cores[j + 1], axes=(1, 0))
        bond = BondMatrix(j, c)
    else:
        c, b = right_orthonormalize_core(cores[j])
        cores[j] = b
        cores[j - 1] = np.tensordot(cores[j - 1], c, axes=(2, 0))
        bond = BondMatrix(j - 1, c)
    return MPS(cores, center=target), bond


def is_left_normalized(core: np.ndarray, tol: float = 1e-10) -> bool:
    bl, d, br = core.shape
    m = core.reshape(bl * d, br)
    return np.linalg.norm(m.conj().T @ m - np.eye(br)) <= tol


def is_right_normalized(core: np.ndarray, tol: float = 1e-10) -> bool:
    bl, d, br = core.shape
    m = core.reshape(bl, d * br)
    return np.linalg.norm(m @ m.conj().T - np.eye(bl)) <= tol


def check_canonical(psi: MPS, tol: float = 1e-10) -> bool:
    """True if ``psi.center`` is set and every other core is normalized accordingly."""
    if psi.center is None:
        return False
    c = psi.center
    return all(is_left_normalized(psi[k], tol) for k in range(c)) and all(
        is_right_normalized(psi[k], tol) for k in range(c + 1, len(psi))
    )


# -- compression --------------------------------------------------------------


def compress(psi: MPS, eps: float, max_rank: int | None = None, report=None) -> MPS:
    """Truncate every bond with threshold ``eps``, keeping the center where it is.

    Bonds right of the center are truncated in a rightward sweep and bonds
    left of it in a leftward sweep; each truncation acts on a bond of a
    canonical train, so its error is exactly the discarded singular weight.
    If ``report`` is a dict, discarded weights are stored under bond index.
    """
    center = psi.center if psi.center is not None else 0
    psi = mixed_canonicalize(psi, center)
    cores = list(psi.cores)
    n = len(cores)
    weights = {}

    for k in range(center, n - 1):
        bl, d, br = cores[k].shape
        res = truncated_svd(cores[k].reshape(bl * d, br), eps, max_rank)
        weights[k] = res.discarded_weight
        cores[k] = res.u.reshape(bl, d, res.rank)
        cores[k + 1] = np.tensordot(res.s[:, None] * res.vh, cores[k + 1], axes=(1, 0))
    for k in range(n - 1, center, -1):
        r, b = _qr_right(cores[k])
        cores[k] = b
        cores[k - 1] = np.tensordot(cores[k - 1], r, axes=(2, 0))

    for k in range(center, 0, -1):
        bl, d, br = cores[k].shape
        res = truncated_svd(cores[k].reshape(bl, d * br), eps, max_rank)
        weights[k - 1] = res.discarded_weight
        cores[k] = res.vh.reshape(res.rank, d, br)
        cores[k - 1] = np.tensordot(cores[k - 1], res.u * res.s, axes=(2, 0))
    for k in range(0, center):
        a, r = _qr_left(cores[k])
        cores[k] = a
        cores[k + 1] = np.tensordot(r, cores[k + 1], axes=(1, 0))

    if report is not None:
        report.update(weights)
    return MPS(cores, center=center)


# -- serialization ------------------------------------------------------------

_MAGIC = b"TTS1"


def save(psi: MPS, path) -> None:
    """Write ``psi`` to a little-endian binary container.

    Layout: magic ``TTS1``; uint32 site count; int32 center (-1 if unset);
    per core three uint64 extents; then every core's entries in row-major
    order as interleaved float64 (real, imag) pairs.
    """
    with open(path, "wb") as fh:
        fh.write(_MAGIC)
        fh.write(struct.pack("<Ii", len(psi), -1 if psi.center is None else psi.center))
        for c in psi.cores:
            fh.write(struct.pack("<QQQ", *c.shape))
        for c in psi.cores:
            fh.write(np.ascontiguousarray(c, dtype="<c16").tobytes())


def load(path) -> MPS:
    with open(path, "rb") as fh:
        if fh.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a tensor-train container")
        n, center = struct.unpack("<Ii", fh.read(8))
        shapes = [struct.unpack("<QQQ", fh.read(24)) for _ in range(n)]
        cores = []
        for shape in shapes:
            count = int(np.prod(shape))
            data = np.frombuffer(fh.read(16 * count), dtype="<c16")
            cores.append(data.reshape(shape).astype(np.complex128))
    return MPS(cores, center=None if center < 0 else center)
