"""Dense kernels shared by the rest of the package.

Seeded Gaussian sampling, thin Householder QR and a compact SVD with a fixed
sign convention. The factorizations are LAPACK-backed (``geqrf`` and the
Golub-Kahan-Reinsch ``gesvd`` driver).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg

#: relative cutoff below which singular values are dropped from a compact SVD
RANK_CUTOFF = 1e-14


@dataclass(frozen=True)
class SvdFactors:
    """Compact SVD ``B = U @ diag(sigma) @ V.T`` with ``sigma`` positive, non-increasing."""

    U: np.ndarray
    sigma: np.ndarray
    V: np.ndarray

    @property
    def rank(self) -> int:
        return self.sigma.size

    def reconstruct(self) -> np.ndarray:
        return (self.U * self.sigma) @ self.V.T


def _check_dims(rows, cols):
    if int(rows) < 1 or int(cols) < 1:
        raise ValueError(f"invalid dimension: {rows}x{cols}")


def rng_from(seed, *salt) -> np.random.Generator:
    """PCG64 generator for ``seed`` optionally mixed with integer ``salt``.

    Distinct salts give statistically independent streams; identical
    arguments give bit-identical streams.
    """
    if isinstance(seed, np.random.SeedSequence):
        ss = seed
    else:
        ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, salt)])
    return np.random.Generator(np.random.PCG64(ss))


def derive_seed(seed, *salt) -> int:
    """Deterministic 64-bit child seed, e.g. one per Monte Carlo trial."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, *map(int, salt)])
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def gaussian_matrix(rows: int, cols: int, seed: int, *salt: int) -> np.ndarray:
    """``rows x cols`` matrix of i.i.d. standard normal draws.

    Deterministic in ``(rows, cols, seed, salt)``. Draws are made in
    column-major order so a given column does not depend on later ones.
    """
    _check_dims(rows, cols)
    g = rng_from(seed, *salt).standard_normal((cols, rows))
    return np.ascontiguousarray(g.T)


def householder_qr(Y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Thin QR factorization ``Y = Q R`` with a non-negative diagonal in ``R``.

    Raises
    ------
    ValueError
        If ``Y`` has fewer rows than columns.
    """
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise ValueError("Y must be a matrix")
    m, n = Y.shape
    _check_dims(m, n)
    if m < n:
        raise ValueError(f"invalid shape {m}x{n}: QR needs rows >= cols")
    Q, R = scipy.linalg.qr(Y, mode="economic", check_finite=False)
    signs = np.where(np.diag(R) < 0, -1.0, 1.0)
    return Q * signs, R * signs[:, None]


def _fix_signs(U, Vt):
    # largest-magnitude entry of every left singular vector is made positive
    idx = np.argmax(np.abs(U), axis=0)
    signs = np.sign(U[idx, np.arange(U.shape[1])])
    signs[signs == 0] = 1.0
    return U * signs, Vt * signs[:, None]


def compact_svd(B: np.ndarray, cutoff: float = RANK_CUTOFF) -> SvdFactors:
    """Compact SVD of ``B``; singular values below ``cutoff * sigma_1 * max(B.shape)`` are dropped."""
    B = np.asarray(B, dtype=float)
    if B.ndim != 2:
        raise ValueError("B must be a matrix")
    _check_dims(*B.shape)
    if not np.all(np.isfinite(B)):
        raise ValueError("invalid input: B has non-finite entries")
    U, s, Vt = scipy.linalg.svd(
        B, full_matrices=False, check_finite=False, lapack_driver="gesvd"
    )
    if s.size == 0 or s[0] == 0.0:
        r = 0
    else:
        r = int(np.count_nonzero(s > cutoff * s[0] * max(B.shape)))
    U, Vt = _fix_signs(U[:, :r], Vt[:r])
    return SvdFactors(U=U, sigma=s[:r].copy(), V=np.ascontiguousarray(Vt.T))


def orthonormality_residual(Q: np.ndarray) -> float:
    """Spectral norm of ``Q.T Q - I``."""
    k = Q.shape[1]
    if k == 0:
        return 0.0
    return float(np.linalg.norm(Q.T @ Q - np.eye(k), 2))
