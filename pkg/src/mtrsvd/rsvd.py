"""Randomized SVD (single Gaussian sketch, no power iterations) and its rank-k truncation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .kernels import compact_svd, gaussian_matrix, householder_qr

MIN_OVERSAMPLING = 4


@dataclass(frozen=True)
class RsvdResult:
    """Rank-``l`` approximation ``Utilde @ diag(sigma_tilde) @ Vtilde.T``.

    ``Q`` is the orthonormal range basis: ``m x l`` for the overdetermined
    variant (approximation ``Q Q^T A``), ``n x l`` for the underdetermined
    one (approximation ``A Q Q^T``).
    """

    Utilde: np.ndarray
    sigma_tilde: np.ndarray
    Vtilde: np.ndarray
    Q: np.ndarray
    k: int
    q: int
    seed: int
    variant: str

    @property
    def l(self) -> int:
        return self.k + self.q

    def dense(self) -> np.ndarray:
        return (self.Utilde * self.sigma_tilde) @ self.Vtilde.T


@dataclass(frozen=True)
class TrsvdApproximation:
    """Rank-``k`` truncation of an :class:`RsvdResult`."""

    Uk: np.ndarray
    Sigmak: np.ndarray
    Vk: np.ndarray
    sigma_tilde_next: float

    @property
    def k(self) -> int:
        return self.Sigmak.size

    def dense(self) -> np.ndarray:
        return (self.Uk * self.Sigmak) @ self.Vk.T


def _check_params(k, q, limit, variant):
    if k < 1:
        raise ValueError(f"invalid parameters: k={k} must be >= 1")
    if q < MIN_OVERSAMPLING:
        raise ValueError(f"invalid parameters: q={q} must be >= {MIN_OVERSAMPLING}")
    if k + q >= limit:
        dim = "n" if variant == "over" else "m"
        raise ValueError(f"invalid parameters: l=k+q={k + q} must be < {dim}={limit}")


def rsvd_overdetermined(A, k: int, q: int, seed: int) -> RsvdResult:
    """Sketch ``Y = A Omega`` with ``Omega`` of size ``n x l`` and factor ``Q^T A``.

    ``A`` may be a dense array or anything supporting ``@`` and ``.T``
    (scipy sparse matrices, for instance). The sketch is drawn from
    ``(seed, l)`` so scans over ``k`` at fixed ``q`` get a fresh ``Omega``
    for every ``l``.
    """
    m, n = A.shape
    if m < n:
        raise ValueError(f"A is {m}x{n} with m < n: use rsvd_underdetermined")
    _check_params(k, q, n, "over")
    l = k + q
    omega = gaussian_matrix(n, l, seed, l)
    Q, _ = householder_qr(np.asarray(A @ omega))
    B = np.asarray(A.T @ Q).T
    f = compact_svd(B, cutoff=0.0)
    return RsvdResult(
        Utilde=Q @ f.U, sigma_tilde=f.sigma, Vtilde=f.V, Q=Q,
        k=k, q=q, seed=seed, variant="over",
    )


def rsvd_underdetermined(A, k: int, q: int, seed: int) -> RsvdResult:
    """Sketch ``Y = Omega A`` with ``Omega`` of size ``l x m`` and factor ``A Q``.

    Uses the same ``(seed, l)`` stream as :func:`rsvd_overdetermined`, so
    ``rsvd_underdetermined(A)`` equals ``rsvd_overdetermined(A.T)`` with the
    roles of the left and right factors swapped.
    """
    m, n = A.shape
    if m > n:
        raise ValueError(f"A is {m}x{n} with m > n: use rsvd_overdetermined")
    _check_params(k, q, m, "under")
    l = k + q
    omega_t = gaussian_matrix(m, l, seed, l)
    Q, _ = householder_qr(np.asarray(A.T @ omega_t))
    B = np.asarray(A @ Q)
    f = compact_svd(B.T, cutoff=0.0)
    # B = (V_B S U_B^T)^T; keep the sign convention attached to the V side as in the transpose
    return RsvdResult(
        Utilde=f.V, sigma_tilde=f.sigma, Vtilde=Q @ f.U, Q=Q,
        k=k, q=q, seed=seed, variant="under",
    )


def rsvd(A, k: int, q: int, seed: int) -> RsvdResult:
    """Dispatch on shape; square matrices take the overdetermined path."""
    m, n = A.shape
    if m >= n:
        return rsvd_overdetermined(A, k, q, seed)
    return rsvd_underdetermined(A, k, q, seed)


def truncate(r: RsvdResult, k: int) -> TrsvdApproximation:
    """Leading ``k`` singular triples of ``r``; ``k`` may not exceed ``l - 1``."""
    if k < 1 or k > r.l - 1:
        raise ValueError(f"invalid parameters: truncation rank {k} outside [1, {r.l - 1}]")
    rank = r.sigma_tilde.size
    if k > rank:
        raise ValueError(f"invalid parameters: sketch has numerical rank {rank} < {k}")
    nxt = float(r.sigma_tilde[k]) if k < rank else 0.0
    return TrsvdApproximation(
        Uk=r.Utilde[:, :k], Sigmak=r.sigma_tilde[:k], Vk=r.Vtilde[:, :k],
        sigma_tilde_next=nxt,
    )


def projection_error(A, r: RsvdResult) -> float:
    """Spectral norm of ``A - Q Q^T A`` (or ``A - A Q Q^T``), computed densely."""
    A = np.asarray(A.toarray() if hasattr(A, "toarray") else A, dtype=float)
    Q = r.Q
    if r.variant == "over":
        E = A - Q @ (Q.T @ A)
    else:
        E = A - (A @ Q) @ Q.T
    return float(np.linalg.norm(E, 2))
