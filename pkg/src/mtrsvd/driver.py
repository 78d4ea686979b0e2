"""MTRSVD solutions, semi-convergence scans and regularization-parameter choice."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .lsqr import DEFAULT_TOL, LsqrOutcome, lsqr_solve
from .regularizers import as_dense, projected_regularizer
from .rsvd import TrsvdApproximation, rsvd, truncate

DESK_LIMIT = 512


class NoCornerError(ValueError):
    """The L-curve has no convex corner (e.g. all points collinear in log scale)."""


@dataclass
class MtrsvdSolution:
    x_k: np.ndarray
    z_k: np.ndarray
    x_Lk: np.ndarray
    k: int
    q: int
    inner: LsqrOutcome
    approximation: TrsvdApproximation | None = None


def minimum_norm_solution(approx: TrsvdApproximation, b) -> np.ndarray:
    """``pinv(A_k) b = Vk diag(1/Sigmak) Uk^T b`` for the truncated approximation."""
    b = np.asarray(b, dtype=float).ravel()
    if b.size != approx.Uk.shape[0]:
        raise ValueError(f"dimension mismatch: b has {b.size} entries, Uk has {approx.Uk.shape[0]} rows")
    return approx.Vk @ ((approx.Uk.T @ b) / approx.Sigmak)


def correction_from_approximation(approx: TrsvdApproximation, b, L, tol: float = DEFAULT_TOL,
                                  reorthogonalize: bool = True, max_iterations=None):
    """Steps 2-4 of MTRSVD given a rank-k approximation: ``x_k``, ``z_k`` and ``x_k - z_k``."""
    x_k = minimum_norm_solution(approx, b)
    op = projected_regularizer(L, approx.Vk)
    inner = lsqr_solve(op, L.matvec(x_k), tol=tol, max_iterations=max_iterations,
                       reorthogonalize=reorthogonalize)
    return x_k, inner.solution, inner


def mtrsvd_solve(A, b, L, k: int, q: int, tol: float = DEFAULT_TOL, seed: int = 0,
                 reorthogonalize: bool = True, max_iterations=None) -> MtrsvdSolution:
    """Regularized solution ``x_{L,k} = x_k - z_k`` from a rank-k TRSVD of ``A``.

    ``m >= n`` uses the column sketch ``A Omega``; ``m < n`` the row sketch
    ``Omega A``. ``z_k`` is the LSQR solution of
    ``min ||L (I - Vk Vk^T) z - L x_k||``; a solve that hits its iteration
    limit is returned with ``inner.converged = False``.
    """
    approx = truncate(rsvd(A, k, q, seed), k)
    x_k, z_k, inner = correction_from_approximation(
        approx, b, L, tol=tol, reorthogonalize=reorthogonalize, max_iterations=max_iterations)
    return MtrsvdSolution(x_k=x_k, z_k=z_k, x_Lk=x_k - z_k, k=k, q=q, inner=inner,
                          approximation=approx)


@dataclass
class SemiConvergenceReport:
    ks: np.ndarray
    relative_errors: np.ndarray
    residuals: np.ndarray
    seminorms: np.ndarray
    inner_iterations: np.ndarray
    converged: np.ndarray
    k0: int
    selection_method: str
    wall_times: np.ndarray = field(default_factory=lambda: np.zeros(0))
    solutions: list = field(default_factory=list)

    @property
    def best_error(self) -> float:
        return float(self.relative_errors[self.k0 - self.ks[0]])

    def record(self, k: int) -> dict:
        i = k - int(self.ks[0])
        return {
            "k": int(self.ks[i]),
            "relative_L_error": float(self.relative_errors[i]),
            "residual": float(self.residuals[i]),
            "seminorm": float(self.seminorms[i]),
            "inner_iterations": int(self.inner_iterations[i]),
            "converged": bool(self.converged[i]),
        }


def choose_k0(ks, relative_errors=None, residuals=None, seminorms=None):
    """A-priori argmin when errors are available, otherwise the L-curve corner.

    Returns ``(k0, method)``.
    """
    ks = np.asarray(ks)
    if relative_errors is not None and np.all(np.isfinite(relative_errors)):
        return int(ks[int(np.argmin(relative_errors))]), "a-priori"
    pts = list(zip(residuals, seminorms))
    return int(ks[lcurve_corner(pts)]), "l-curve"


def semiconvergence_scan(problem, L, q: int, tol: float = DEFAULT_TOL, k_max: int = 20,
                         seed: int = 0, k_min: int = 1, keep_solutions: bool = False,
                         reorthogonalize: bool = True, selection: str | None = None
                         ) -> SemiConvergenceReport:
    """Run :func:`mtrsvd_solve` for ``k = k_min..k_max`` with a fresh sketch per ``l = k + q``.

    ``problem`` needs ``A`` and ``b`` and optionally ``x_true``. The relative
    error is ``||L (x - x_true)|| / ||L x_true||``. ``selection`` forces
    ``"a-priori"`` or ``"l-curve"``; by default the a-priori choice is used
    whenever ``x_true`` is known.
    """
    A, b = problem.A, np.asarray(problem.b, dtype=float)
    if k_max + q >= min(A.shape):
        raise ValueError(f"invalid parameters: k_max + q = {k_max + q} >= min(m, n) = {min(A.shape)}")
    x_true = getattr(problem, "x_true", None)
    have_truth = x_true is not None and np.all(np.isfinite(x_true))
    if have_truth:
        Lx_true = L.matvec(x_true)
        nLx = np.linalg.norm(Lx_true)
    ks = np.arange(k_min, k_max + 1)
    errs, res, semi, its, conv, times, sols = [], [], [], [], [], [], []
    for k in ks:
        t0 = time.perf_counter()
        sol = mtrsvd_solve(A, b, L, int(k), q, tol=tol, seed=seed, reorthogonalize=reorthogonalize)
        times.append(time.perf_counter() - t0)
        Lx = L.matvec(sol.x_Lk)
        errs.append(np.linalg.norm(Lx - Lx_true) / nLx if have_truth else np.nan)
        res.append(np.linalg.norm(A @ sol.x_Lk - b))
        semi.append(np.linalg.norm(Lx))
        its.append(sol.inner.iterations)
        conv.append(sol.inner.converged)
        if keep_solutions:
            sols.append(sol)
    errs = np.asarray(errs)
    if selection == "l-curve" or not have_truth:
        k0, method = choose_k0(ks, None, res, semi)
    else:
        k0, method = choose_k0(ks, errs)
    return SemiConvergenceReport(
        ks=ks, relative_errors=errs, residuals=np.asarray(res), seminorms=np.asarray(semi),
        inner_iterations=np.asarray(its), converged=np.asarray(conv), k0=k0,
        selection_method=method, wall_times=np.asarray(times), solutions=sols,
    )


def lcurve_curvature(points) -> np.ndarray:
    """Signed three-point curvature of the log10 polyline; endpoints get ``nan``.

    Each log axis is rescaled to unit range first, so a seminorm spanning
    many decades does not flatten the residual direction. Positive values
    mark turns whose osculating circle lies toward larger residual and
    seminorm, i.e. the corner of an L-shaped curve.
    """
    P = np.log10(np.asarray(points, dtype=float))
    span = np.ptp(P, axis=0)
    P = (P - P.min(axis=0)) / np.where(span > 0, span, 1.0)
    out = np.full(len(P), np.nan)
    for i in range(1, len(P) - 1):
        a, b, c = P[i - 1], P[i], P[i + 1]
        ab, bc, ac = np.linalg.norm(b - a), np.linalg.norm(c - b), np.linalg.norm(c - a)
        cross = (b[0] - a[0]) * (c[1] - b[1]) - (b[1] - a[1]) * (c[0] - b[0])
        if ab == 0 or bc == 0 or ac == 0:
            out[i] = 0.0
            continue
        kappa = 2.0 * abs(cross) / (ab * bc * ac)
        if kappa == 0.0:
            out[i] = 0.0
            continue
        # circumcenter, to orient the turn
        d = 2.0 * cross
        sa, sb, sc = a @ a, b @ b, c @ c
        ux = (sa * (b[1] - c[1]) + sb * (c[1] - a[1]) + sc * (a[1] - b[1])) / d
        uy = (sa * (c[0] - b[0]) + sb * (a[0] - c[0]) + sc * (b[0] - a[0])) / d
        sign = 1.0 if (ux - b[0]) + (uy - b[1]) > 0 else -1.0
        out[i] = sign * kappa
    return out


def lcurve_corner(points) -> int:
    """Index of the L-curve corner among ``(residual_norm, seminorm)`` points.

    Raises
    ------
    ValueError
        Fewer than 4 points or non-positive coordinates.
    NoCornerError
        No interior point bends toward the corner orientation.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[0] < 4:
        raise ValueError("insufficient data: the L-curve needs at least 4 points")
    if np.any(pts <= 0) or not np.all(np.isfinite(pts)):
        raise ValueError("L-curve points must be positive and finite")
    curv = lcurve_curvature(pts)
    if not np.any(curv[1:-1] > 1e-8):
        raise NoCornerError("no corner: log-log points show no convex turn")
    return int(np.nanargmax(curv))


def _check_desk(A):
    if min(A.shape) > DESK_LIMIT:
        raise ValueError(f"size guard: dense oracle limited to min(m, n) <= {DESK_LIMIT}")


def dense_projected_pinv_solve(L, Vk, rhs, rel_cutoff: float = 1e-10) -> np.ndarray:
    """``pinv(L (I - Vk Vk^T)) rhs`` by a dense SVD."""
    M = as_dense(L)
    M = M - (M @ Vk) @ Vk.T
    U, s, Vt = np.linalg.svd(M, full_matrices=False)
    r = int(np.count_nonzero(s > rel_cutoff * s[0])) if s.size and s[0] > 0 else 0
    return Vt[:r].T @ ((U[:, :r].T @ rhs) / s[:r])


def dense_mtrsvd_solution(approx: TrsvdApproximation, b, L) -> np.ndarray:
    """Dense reference for ``x_{L,k}`` built from the same truncated approximation."""
    x_k = minimum_norm_solution(approx, b)
    return x_k - dense_projected_pinv_solve(L, approx.Vk, L.matvec(x_k))


def dense_oracle_solution(A, b, L, k: int) -> np.ndarray:
    """Modified truncated SVD solution from the exact SVD of ``A`` (desk scale only)."""
    A = np.asarray(A, dtype=float)
    _check_desk(A)
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    approx = TrsvdApproximation(Uk=U[:, :k], Sigmak=s[:k], Vk=Vt[:k].T,
                                sigma_tilde_next=float(s[k]) if k < s.size else 0.0)
    return dense_mtrsvd_solution(approx, b, L)


def projected_condition_number(L, Vk) -> float:
    """Ratio of the extreme nonzero singular values of ``L (I - Vk Vk^T)`` (dense)."""
    M = as_dense(L)
    M = M - (M @ Vk) @ Vk.T
    s = np.linalg.svd(M, compute_uv=False)
    r = min(M.shape[1] - Vk.shape[1], s.size)
    return float(s[0] / s[r - 1])
