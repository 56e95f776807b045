"""Dense complex tensor kernels.

Tensors are plain ``numpy`` arrays in row-major (C) order, so the last index
varies fastest. This is the same lexicographic convention used for state
vectors, which makes ``np.kron`` consistent with reshaping.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError

# relative cutoff below which singular values count as exact zeros
ZERO_CUTOFF = 1e-14


def as_tensor(data, dims=None) -> np.ndarray:
    """Return ``data`` as a complex128 array, optionally reshaped to ``dims``."""
    arr = np.asarray(data, dtype=np.complex128)
    if dims is not None:
        dims = tuple(int(d) for d in dims)
        if any(d < 1 for d in dims):
            raise DimensionError(f"extents must be positive, got {dims}")
        if int(np.prod(dims)) != arr.size:
            raise DimensionError(f"cannot view {arr.size} entries as {dims}")
        arr = arr.reshape(dims)
    return arr


def matricize(t: np.ndarray, split: int) -> np.ndarray:
    """Group the first ``split`` modes into rows and the rest into columns."""
    if not 0 <= split <= t.ndim:
        raise DimensionError(f"split {split} out of range for order {t.ndim}")
    rows = int(np.prod(t.shape[:split], dtype=np.int64))
    return t.reshape(rows, -1)


def dematricize(m: np.ndarray, dims) -> np.ndarray:
    """Inverse of :func:`matricize`."""
    dims = tuple(int(d) for d in dims)
    if int(np.prod(dims, dtype=np.int64)) != m.size:
        raise DimensionError(f"matrix of size {m.size} does not fit dims {dims}")
    return m.reshape(dims)


def contract(a: np.ndarray, b: np.ndarray, pairs) -> np.ndarray:
    """Sum over paired modes ``(mode_a, mode_b)``.

    The result carries the free modes of ``a`` followed by the free modes of ``b``.
    """
    pairs = list(pairs)
    axes_a = [p[0] for p in pairs]
    axes_b = [p[1] for p in pairs]
    for i, j in pairs:
        if a.shape[i] != b.shape[j]:
            raise DimensionError(
                f"cannot contract mode {i} (extent {a.shape[i]}) with mode {j} (extent {b.shape[j]})"
            )
    return np.tensordot(a, b, axes=(axes_a, axes_b))


@dataclass(frozen=True)
class SvdResult:
    """Truncated SVD ``m ~= u @ diag(s) @ v.conj().T``."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray
    discarded_weight: float

    @property
    def rank(self) -> int:
        return len(self.s)

    @property
    def vh(self) -> np.ndarray:
        return self.v.conj().T


def retained_rank(s: np.ndarray, eps: float, max_rank: int | None = None) -> tuple[int, float]:
    """Smallest leading count ``k >= 1`` whose discarded tail has norm ``<= eps``.

    ``s`` must be sorted in descending order. Returns ``(k, tail_norm)``.
    """
    n = len(s)
    if n == 0:
        raise DimensionError("no singular values")
    # tail[k] = sqrt(sum_{i >= k} s_i^2), tail[n] = 0
    tail = np.zeros(n + 1)
    tail[:n] = np.sqrt(np.cumsum((s[::-1] ** 2))[::-1])
    k = n
    cut = ZERO_CUTOFF * s[0]
    while k > 1 and (tail[k - 1] <= eps or s[k - 1] <= cut):
        k -= 1
    if max_rank is not None:
        k = max(1, min(k, int(max_rank)))
    return k, float(tail[k])


def truncated_svd(m: np.ndarray, eps: float = 0.0, max_rank: int | None = None) -> SvdResult:
    """Thin SVD with the trailing singular values dropped.

    The retained rank ``k`` is the smallest count such that the discarded values
    have root-sum-square at most ``eps``; at least one value is always kept.
    Values below ``1e-14 * s[0]`` are dropped regardless of ``eps``.
    """
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got order {m.ndim}")
    if eps < 0:
        raise ValueError("eps must be non-negative")
    try:
        u, s, vh = np.linalg.svd(m, full_matrices=False)
    except np.linalg.LinAlgError:
        try:
            import scipy.linalg

            u, s, vh = scipy.linalg.svd(m, full_matrices=False, lapack_driver="gesvd")
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise np.linalg.LinAlgError(f"SVD did not converge for {m.shape[0]}x{m.shape[1]} matrix") from exc
    k, discarded = retained_rank(s, eps, max_rank)
    return SvdResult(u[:, :k], s[:k], vh[:k].conj().T, discarded)


def thin_qr(m: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Reduced QR factorization; ``q`` has ``min(rows, cols)`` orthonormal columns."""
    if m.ndim != 2:
        raise DimensionError(f"expected a matrix, got order {m.ndim}")
    q, r = np.linalg.qr(m, mode="reduced")
    return q, r


def frobenius(t: np.ndarray) -> float:
    return float(np.linalg.norm(t.ravel()))
