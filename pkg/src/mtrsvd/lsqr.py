"""Matrix-free Golub-Kahan (Lanczos) bidiagonalization and LSQR.

The bidiagonalization runs on any operator exposing ``matvec``/``rmatvec``.
For the projected regularizer ``L (I - Vk Vk^T)`` every step costs one
product with ``L``, one with ``L^T`` and two projections against ``Vk``; the
dense projected matrix is never formed.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigvalsh_tridiagonal

BREAKDOWN_TOL = 1e-14
DEFAULT_TOL = 1e-6


class _Basis:
    """Row-stacked orthonormal vectors with amortized growth."""

    def __init__(self, dim, capacity=64):
        self.data = np.empty((capacity, dim))
        self.size = 0

    def append(self, v):
        if self.size == self.data.shape[0]:
            grown = np.empty((2 * self.data.shape[0], self.data.shape[1]))
            grown[:self.size] = self.data[:self.size]
            self.data = grown
        self.data[self.size] = v
        self.size += 1

    def view(self):
        return self.data[:self.size]

    def orthogonalize(self, v):
        # classical Gram-Schmidt applied twice
        if self.size == 0:
            return v
        B = self.view()
        v = v - B.T @ (B @ v)
        return v - B.T @ (B @ v)


@dataclass
class BidiagState:
    """State of a lower-bidiagonalization ``op V_j = U_{j+1} B_j``.

    ``alphas[j-1]`` is the diagonal and ``betas[j-1]`` the subdiagonal entry
    of column ``j`` of ``B_j``; ``Uhat`` holds ``j + 1`` and ``Vhat`` holds
    ``j`` vectors after ``j`` steps.
    """

    Uhat: _Basis
    Vhat: _Basis
    alphas: list = field(default_factory=list)
    betas: list = field(default_factory=list)
    reorthogonalize: bool = True
    scale: float = 1.0
    breakdown: str | None = None

    @property
    def steps(self) -> int:
        return len(self.alphas)

    @property
    def U(self) -> np.ndarray:
        return self.Uhat.view().T

    @property
    def V(self) -> np.ndarray:
        return self.Vhat.view().T

    def bidiagonal(self) -> np.ndarray:
        """Dense ``(j+1) x j`` lower-bidiagonal matrix ``B_j``."""
        j = self.steps
        B = np.zeros((j + 1, j))
        B[np.arange(j), np.arange(j)] = self.alphas
        B[np.arange(1, len(self.betas) + 1), np.arange(len(self.betas))] = self.betas
        return B


def operator_scale(op) -> float:
    """Cheap deterministic magnitude estimate for ``op`` used by breakdown tests."""
    hint = getattr(op, "norm_hint", None)
    if hint is None and hasattr(op, "L"):
        hint = getattr(op.L, "norm_hint", None)
    if hint is not None:
        return float(hint)
    n = op.shape[1]
    x = np.cos(np.arange(1, n + 1) * 0.7) + 1.0
    est = 0.0
    for _ in range(4):
        nx = np.linalg.norm(x)
        if nx == 0:
            break
        y = op.matvec(x / nx)
        est = max(est, np.linalg.norm(y))
        x = op.rmatvec(y)
    return est if est > 0 else 1.0


def start_bidiag(op, u1, reorthogonalize: bool = True, scale: float | None = None) -> BidiagState:
    """Initial state holding the unit starting vector ``u1 / ||u1||``."""
    u1 = np.asarray(u1, dtype=float).ravel()
    nu = np.linalg.norm(u1)
    if nu == 0 or not np.isfinite(nu):
        raise ValueError("starting vector must be finite and nonzero")
    p, n = op.shape
    st = BidiagState(Uhat=_Basis(p), Vhat=_Basis(n), reorthogonalize=reorthogonalize)
    st.Uhat.append(u1 / nu)
    st.scale = operator_scale(op) if scale is None else float(scale)
    return st


def lanczos_bidiag_step(op, state: BidiagState) -> BidiagState:
    """Append one step: ``alpha_j``, ``v_j``, ``beta_{j+1}``, ``u_{j+1}``.

    On ``alpha_j`` or ``beta_{j+1}`` below ``BREAKDOWN_TOL * scale`` the
    state's ``breakdown`` attribute is set to ``"alpha"`` or ``"beta"`` and
    nothing further is appended.
    """
    if state.breakdown is not None:
        return state
    j = state.steps + 1
    u = state.Uhat.data[j - 1]
    p = op.rmatvec(u)
    if j > 1:
        p = p - state.betas[-1] * state.Vhat.data[j - 2]
    if state.reorthogonalize:
        p = state.Vhat.orthogonalize(p)
    alpha = float(np.linalg.norm(p))
    if not np.isfinite(alpha):
        raise FloatingPointError("non-finite value in bidiagonalization")
    thresh = BREAKDOWN_TOL * state.scale
    if alpha <= thresh:
        state.breakdown = "alpha"
        return state
    v = p / alpha
    state.Vhat.append(v)
    state.alphas.append(alpha)
    r = op.matvec(v) - alpha * u
    if state.reorthogonalize:
        r = state.Uhat.orthogonalize(r)
    beta = float(np.linalg.norm(r))
    if not np.isfinite(beta):
        raise FloatingPointError("non-finite value in bidiagonalization")
    if beta <= thresh:
        state.breakdown = "beta"
        return state
    state.betas.append(beta)
    state.Uhat.append(r / beta)
    return state


@dataclass
class LsqrOutcome:
    solution: np.ndarray
    iterations: int
    final_relative_criterion: float
    converged: bool
    residual_norm: float = 0.0
    op_norm: float = 0.0
    residual_history: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _sigma_max(alphas, betas):
    # largest singular value of the (j+1) x j lower bidiagonal via B^T B
    a = np.asarray(alphas)
    b = np.zeros_like(a)
    b[:len(betas)] = betas[:a.size]
    d = a * a + b * b
    if a.size == 1:
        return float(np.sqrt(d[0]))
    e = a[1:] * b[:-1]
    top = eigvalsh_tridiagonal(d, e, select="i", select_range=(a.size - 1, a.size - 1))
    return float(np.sqrt(top[0]))


def lsqr_solve(op, rhs, tol: float = DEFAULT_TOL, max_iterations: int | None = None,
               reorthogonalize: bool = True) -> LsqrOutcome:
    """Minimum-norm least-squares solution of ``min ||op z - rhs||`` by LSQR from ``z = 0``.

    Stops when ``||op^T r|| / (||op|| ||r||) <= tol`` (``||op||`` is the
    largest singular value of the accumulated bidiagonal matrix) or when
    ``||r|| <= tol ||rhs||``. Hitting ``max_iterations`` returns the last
    iterate with ``converged=False``.
    """
    rhs = np.asarray(rhs, dtype=float).ravel()
    if not np.all(np.isfinite(rhs)):
        raise FloatingPointError("non-finite right-hand side")
    if tol <= 0:
        raise ValueError("tol must be positive")
    p, n = op.shape
    if max_iterations is None:
        k = getattr(op, "Vk", np.zeros((n, 0))).shape[1]
        max_iterations = 2 * max(n - k, 1)
    beta1 = float(np.linalg.norm(rhs))
    x = np.zeros(n)
    if beta1 == 0.0:
        return LsqrOutcome(x, 0, 0.0, True, 0.0, 0.0, np.zeros(1))

    st = start_bidiag(op, rhs, reorthogonalize)
    lanczos_bidiag_step(op, st)
    if st.steps == 0:
        # op^T rhs = 0: zero is the minimum-norm solution
        return LsqrOutcome(x, 0, 0.0, True, beta1, 0.0, np.array([beta1]))

    w = st.Vhat.data[0].copy()
    phibar = beta1
    rhobar = st.alphas[0]
    history = [beta1]
    crit = np.inf
    op_norm = 0.0
    converged = False
    it = 0
    while it < max_iterations:
        it += 1
        alpha_i = st.alphas[it - 1]
        if len(st.betas) >= it:
            beta_next = st.betas[it - 1]
            lanczos_bidiag_step(op, st)
            alpha_next = st.alphas[it] if st.steps > it else 0.0
        else:
            beta_next = 0.0
            alpha_next = 0.0

        rho = np.hypot(rhobar, beta_next)
        c, s = rhobar / rho, beta_next / rho
        theta = s * alpha_next
        rhobar = -c * alpha_next
        phi = c * phibar
        phibar = s * phibar
        x += (phi / rho) * w
        if alpha_next > 0.0:
            w = st.Vhat.data[it] - (theta / rho) * w
        if not np.all(np.isfinite(x)):
            raise FloatingPointError("non-finite iterate in LSQR")

        history.append(phibar)
        op_norm = _sigma_max(st.alphas[:it + (alpha_next > 0)], st.betas)
        rnorm = phibar
        arnorm = phibar * alpha_next * abs(c)
        crit_ls = arnorm / (op_norm * rnorm) if rnorm > 0 else 0.0
        crit = min(rnorm / beta1, crit_ls)
        if crit <= tol or alpha_next == 0.0 or beta_next == 0.0:
            converged = True
            break

    return LsqrOutcome(
        solution=x, iterations=it, final_relative_criterion=float(crit),
        converged=converged, residual_norm=float(phibar), op_norm=op_norm,
        residual_history=np.asarray(history),
    )


def perturbation_diagnostic(op_norm: float, kappa_LV: float, residual_norm: float,
                            z_norm: float, tol: float, sharp: bool = False) -> float:
    """Upper bound on ``||z - z_bar|| / ||z||`` for an LSQR solve stopped at ``tol``.

    ``kappa_LV`` is the condition number of the projected operator. With
    ``sharp=True`` the factor ``kappa + 1`` multiplying the residual term is
    replaced by ``kappa`` (the right-hand side is unperturbed).
    """
    if tol == 0:
        return 0.0
    if min(op_norm, kappa_LV, z_norm, tol) <= 0 or residual_norm < 0:
        raise ValueError("inputs must be positive")
    eta = tol * kappa_LV
    if eta >= 1:
        raise ValueError(f"bound inapplicable: tol * kappa = {eta:g} >= 1")
    factor = kappa_LV if sharp else kappa_LV + 1.0
    return eta / (1.0 - eta) * (2.0 + factor * residual_norm / (op_norm * z_norm))
