import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mtrsvd.kernels import householder_qr
from mtrsvd.regularizers import as_dense, build_regularizer, projected_regularizer


def _orth(n, k, seed):
    Q, _ = householder_qr(np.random.default_rng(seed).standard_normal((n, k)))
    return Q


def test_l1_rows_n4():
    L = as_dense(build_regularizer("L1", 4))
    assert np.array_equal(L, [[1, -1, 0, 0], [0, 1, -1, 0], [0, 0, 1, -1]])


def test_l2_rows_n5():
    L = as_dense(build_regularizer("L2", 5))
    assert np.array_equal(L, [[-1, 2, -1, 0, 0], [0, -1, 2, -1, 0], [0, 0, -1, 2, -1]])


@pytest.mark.parametrize("kind,rows", [("L1", 49), ("L2", 48), ("L3", 97), ("identity", 50)])
def test_shapes(kind, rows):
    assert build_regularizer(kind, 50).shape == (rows, 50)


def test_annihilation():
    n = 30
    t = np.arange(1, n + 1, dtype=float)
    assert np.allclose(build_regularizer("L1", n) @ np.full(n, 3.7), 0, atol=1e-14)
    assert np.allclose(build_regularizer("L2", n) @ (2.0 - 0.5 * t), 0, atol=1e-13)


def test_l3_stacks_l1_over_l2():
    n = 12
    L3 = as_dense(build_regularizer("L3", n))
    assert np.array_equal(L3[: n - 1], as_dense(build_regularizer("L1", n)))
    assert np.array_equal(L3[n - 1:], as_dense(build_regularizer("L2", n)))


def test_small_n_rejected():
    with pytest.raises(ValueError):
        build_regularizer("L1", 2)
    with pytest.raises(ValueError):
        build_regularizer("L4", 10)


def test_at_most_three_nonzeros_per_row():
    S = build_regularizer("L3", 40).tosparse()
    assert np.diff(S.indptr).max() <= 3


@pytest.mark.parametrize("kind", ["L1", "L2", "L3", "identity"])
def test_matvec_matches_dense(kind):
    L = build_regularizer(kind, 37)
    D = as_dense(L)
    rng = np.random.default_rng(0)
    x, y = rng.standard_normal(37), rng.standard_normal(L.shape[0])
    assert np.allclose(L.apply(x), D @ x, rtol=0, atol=1e-14)
    assert np.allclose(L.apply_transpose(y), D.T @ y, rtol=0, atol=1e-14)
    assert np.allclose(L.T @ y, D.T @ y, rtol=0, atol=1e-14)


@pytest.mark.parametrize("kind", ["L1", "L2", "L3"])
def test_adjoint_consistency_100_probes(kind):
    n = 64
    L = build_regularizer(kind, n)
    P = projected_regularizer(L, _orth(n, 5, 1))
    rng = np.random.default_rng(2)
    for op in (L, P):
        for _ in range(100):
            x, y = rng.standard_normal(n), rng.standard_normal(op.shape[0])
            lhs, rhs = op.apply(x) @ y, x @ op.apply_transpose(y)
            scale = np.linalg.norm(op.apply(x)) * np.linalg.norm(y)
            assert abs(lhs - rhs) <= 1e-12 * scale


def test_projected_with_empty_basis_is_l():
    n = 25
    L = build_regularizer("L3", n)
    P = projected_regularizer(L, np.zeros((n, 0)))
    x = np.random.default_rng(3).standard_normal(n)
    assert np.linalg.norm(P.apply(x) - L.apply(x)) <= 1e-14 * np.linalg.norm(L.apply(x))


def test_projected_annihilates_range():
    n, k = 40, 6
    L = build_regularizer("L2", n)
    Vk = _orth(n, k, 4)
    x = Vk @ np.random.default_rng(5).standard_normal(k)
    y = projected_regularizer(L, Vk).apply(x)
    assert np.linalg.norm(y) <= 1e-13 * L.norm_hint * np.linalg.norm(x)


def test_projected_matches_densified():
    n, k = 40, 7
    L = build_regularizer("L1", n)
    Vk = _orth(n, k, 6)
    P = projected_regularizer(L, Vk)
    D = as_dense(L) @ (np.eye(n) - Vk @ Vk.T)
    rng = np.random.default_rng(7)
    x, y = rng.standard_normal(n), rng.standard_normal(n - 1)
    assert np.allclose(P.apply(x), D @ x, rtol=0, atol=1e-12)
    assert np.allclose(P.apply_transpose(y), D.T @ y, rtol=0, atol=1e-12)
    assert np.allclose(P.toarray(), D, rtol=0, atol=1e-12)


def test_projected_dimension_mismatch():
    with pytest.raises(ValueError, match="dimension mismatch"):
        projected_regularizer(build_regularizer("L1", 10), np.zeros((9, 2)))


@pytest.mark.parametrize("kind", ["L1", "L3"])
@pytest.mark.parametrize("k", [1, 5, 20])
def test_projected_singular_values_equal_complement(kind, k):
    n = 96
    Q, _ = householder_qr(np.random.default_rng(k).standard_normal((n, n)))
    Vk, Vc = Q[:, :k], Q[:, k:]
    L = build_regularizer(kind, n)
    s_proj = np.linalg.svd(projected_regularizer(L, Vk).toarray(), compute_uv=False)[: n - k]
    s_comp = np.linalg.svd(as_dense(L) @ Vc, compute_uv=False)
    assert np.allclose(s_proj, s_comp, rtol=1e-10, atol=1e-12)


@pytest.mark.parametrize("n", [64, 256])
def test_l1_condition_number(n):
    s = np.linalg.svd(as_dense(build_regularizer("L1", n)), compute_uv=False)
    assert s[0] / s[-1] <= 2 * n / np.pi * 1.01


@settings(max_examples=25, deadline=None)
@given(n=st.integers(3, 128), kind=st.sampled_from(["L1", "L2", "L3", "identity"]),
       seed=st.integers(0, 2**32 - 1))
def test_property_adjoint(n, kind, seed):
    L = build_regularizer(kind, n)
    rng = np.random.default_rng(seed)
    x, y = rng.standard_normal(n), rng.standard_normal(L.shape[0])
    lhs, rhs = L.apply(x) @ y, x @ L.apply_transpose(y)
    assert abs(lhs - rhs) <= 1e-12 * np.linalg.norm(L.apply(x)) * np.linalg.norm(y) + 1e-300
