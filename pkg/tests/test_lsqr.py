import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.sparse.linalg import aslinearoperator

from mtrsvd.driver import projected_condition_number
from mtrsvd.kernels import householder_qr, orthonormality_residual
from mtrsvd.lsqr import (
    lanczos_bidiag_step,
    lsqr_solve,
    perturbation_diagnostic,
    start_bidiag,
)
from mtrsvd.regularizers import as_dense, build_regularizer, projected_regularizer


def _orth(n, k, seed):
    Q, _ = householder_qr(np.random.default_rng(seed).standard_normal((n, k)))
    return Q


def _run(op, u1, steps):
    st_ = start_bidiag(op, u1)
    for _ in range(steps):
        lanczos_bidiag_step(op, st_)
    return st_


def test_plain_golub_kahan_residual():
    n = 50
    L = build_regularizer("L1", n)
    op = projected_regularizer(L, np.zeros((n, 0)))
    e1 = np.zeros(n - 1)
    e1[0] = 1.0
    s = _run(op, e1, 10)
    assert s.steps == 10 and s.breakdown is None
    res = as_dense(L) @ s.V - s.U @ s.bidiagonal()
    assert np.linalg.norm(res, 2) <= 1e-10
    assert all(a > 0 for a in s.alphas) and all(b >= 0 for b in s.betas)


@pytest.mark.parametrize("kind", ["L1", "L2", "L3"])
def test_projected_bidiag_orthonormality(kind):
    n, k = 80, 6
    L = build_regularizer(kind, n)
    op = projected_regularizer(L, _orth(n, k, 1))
    s = _run(op, np.random.default_rng(2).standard_normal(L.shape[0]), 40)
    assert orthonormality_residual(s.U) <= 1e-10
    assert orthonormality_residual(s.V) <= 1e-10
    D = op.toarray()
    assert np.linalg.norm(D @ s.V - s.U @ s.bidiagonal(), 2) <= 1e-10
    # v_j stay orthogonal to range(Vk)
    assert np.linalg.norm(op.Vk.T @ s.V) <= 1e-12


def test_degenerate_start_signals_breakdown():
    n = 20
    Vk = _orth(n, 3, 0)
    op = projected_regularizer(build_regularizer("identity", n), Vk)
    s = _run(op, Vk[:, 0], 3)
    assert s.breakdown == "alpha"
    assert s.steps == 0


def test_exhaustion_signals_beta_breakdown():
    n = 12
    op = aslinearoperator(np.eye(n))
    s = _run(op, np.ones(n), 5)
    assert s.breakdown == "beta" and s.steps == 1


def test_zero_rhs():
    out = lsqr_solve(build_regularizer("L1", 10), np.zeros(9))
    assert out.iterations == 0 and out.converged
    assert np.array_equal(out.solution, np.zeros(10))


def test_dense_well_conditioned_matches_lstsq():
    rng = np.random.default_rng(8)
    U, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    V, _ = np.linalg.qr(rng.standard_normal((30, 30)))
    A = (U * np.linspace(1.0, 5.0, 30)) @ V.T
    b = rng.standard_normal(30)
    out = lsqr_solve(aslinearoperator(A), b, tol=1e-12)
    ref = np.linalg.lstsq(A, b, rcond=None)[0]
    assert out.converged
    assert np.linalg.norm(out.solution - ref) <= 1e-8 * np.linalg.norm(ref)
    assert out.final_relative_criterion <= 1e-12


def test_minimum_norm_on_rank_deficient():
    rng = np.random.default_rng(9)
    A = rng.standard_normal((40, 8)) @ rng.standard_normal((8, 25))
    b = rng.standard_normal(40)
    out = lsqr_solve(aslinearoperator(A), b, tol=1e-13)
    ref = np.linalg.pinv(A) @ b
    assert np.linalg.norm(out.solution - ref) <= 1e-8 * np.linalg.norm(ref)


@pytest.mark.parametrize("n,k,kind", [(64, 4, "L1"), (96, 10, "L3"), (128, 20, "L2")])
def test_iterations_within_dimension(n, k, kind):
    L = build_regularizer(kind, n)
    op = projected_regularizer(L, _orth(n, k, n))
    rhs = L.matvec(np.random.default_rng(k).standard_normal(n))
    out = lsqr_solve(op, rhs, tol=1e-12)
    assert out.iterations <= n - k + 5
    h = out.residual_history
    assert np.all(np.diff(h) <= 1e-12 * h[0])


def test_max_iterations_reports_nonconvergence():
    n = 60
    L = build_regularizer("L2", n)
    op = projected_regularizer(L, _orth(n, 3, 1))
    out = lsqr_solve(op, np.random.default_rng(0).standard_normal(n - 2), tol=1e-14, max_iterations=3)
    assert out.iterations == 3 and not out.converged


def test_nan_rhs_raises():
    with pytest.raises(FloatingPointError):
        lsqr_solve(build_regularizer("L1", 5), np.array([1.0, np.nan, 0, 0]))


def test_diagnostic_closed_form():
    assert perturbation_diagnostic(3.0, 10.0, 0.5, 2.0, 0.0) == 0.0
    val = perturbation_diagnostic(1.0, 10.0, 0.0, 1.0, 1e-6)
    assert abs(val - 2e-5 / (1 - 1e-5)) <= 1e-18
    assert abs(val - 2.00002e-5) <= 1e-10
    # residual term uses kappa + 1, or kappa when sharp
    full = perturbation_diagnostic(2.0, 10.0, 1.0, 1.0, 1e-3)
    sharp = perturbation_diagnostic(2.0, 10.0, 1.0, 1.0, 1e-3, sharp=True)
    eta = 1e-2
    assert np.isclose(full, eta / (1 - eta) * (2 + 11 / 2))
    assert np.isclose(sharp, eta / (1 - eta) * (2 + 10 / 2))


def test_diagnostic_inapplicable():
    with pytest.raises(ValueError, match="inapplicable"):
        perturbation_diagnostic(1.0, 1e7, 0.0, 1.0, 1e-6)


@pytest.mark.parametrize("tol", [1e-4, 1e-6])
def test_diagnostic_bounds_measured_error(tol):
    n, k = 64, 8
    L = build_regularizer("L1", n)
    Vk = _orth(n, k, 3)
    op = projected_regularizer(L, Vk)
    rng = np.random.default_rng(4)
    rhs = L.matvec(rng.standard_normal(n)) + 0.3 * rng.standard_normal(n - 1)
    D = op.toarray()
    z = np.linalg.pinv(D, rcond=1e-10) @ rhs
    out = lsqr_solve(op, rhs, tol=tol)
    measured = np.linalg.norm(out.solution - z) / np.linalg.norm(z)
    kappa = projected_condition_number(L, Vk)
    bound = perturbation_diagnostic(np.linalg.norm(D, 2), kappa, np.linalg.norm(D @ z - rhs),
                                    np.linalg.norm(z), tol)
    assert measured <= bound


@settings(max_examples=20, deadline=None)
@given(n=st.integers(10, 128), kfrac=st.floats(0.0, 0.5), seed=st.integers(0, 2**32 - 1),
       kind=st.sampled_from(["L1", "L2", "L3"]))
def test_property_bidiag_and_lsqr_monotone(n, kfrac, seed, kind):
    k = int(kfrac * n)
    L = build_regularizer(kind, n)
    op = projected_regularizer(L, _orth(n, k, seed) if k else np.zeros((n, 0)))
    rng = np.random.default_rng(seed)
    rhs = rng.standard_normal(L.shape[0])
    s = _run(op, rhs, min(15, n // 2))
    if s.steps:
        B = s.bidiagonal()[: s.U.shape[1], :]
        assert np.linalg.norm(op.toarray() @ s.V - s.U @ B, 2) <= 1e-10
    h = lsqr_solve(op, rhs, tol=1e-10).residual_history
    assert np.all(np.diff(h) <= 1e-12 * h[0])
