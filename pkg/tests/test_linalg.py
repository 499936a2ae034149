import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from symbiris.linalg import (
    NumericalFailure,
    cholesky_psd,
    crandn,
    hermitian,
    hermitian_eig,
    log2det_pd,
    numerical_rank,
    seeded_rng,
    svd,
    unit_phases,
)

from conftest import random_psd


def test_eig_identity():
    lam, U = hermitian_eig(np.eye(3))
    np.testing.assert_allclose(lam, [1, 1, 1])
    np.testing.assert_allclose(U.conj().T @ U, np.eye(3), atol=1e-12)


def test_eig_diagonal_sorted_descending():
    lam, U = hermitian_eig(np.diag([1.0, 3.0]))
    np.testing.assert_allclose(lam, [3, 1])
    np.testing.assert_allclose(np.abs(U), [[0, 1], [1, 0]], atol=1e-12)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**32 - 1), st.integers(1, 8))
def test_eig_reconstruction(seed, n):
    rng = np.random.default_rng(seed)
    A = crandn(rng, n, n)
    X = A + A.conj().T
    lam, U = hermitian_eig(X)
    assert np.all(np.diff(lam) <= 0)
    scale = np.max(np.abs(X))
    assert np.max(np.abs(U @ np.diag(lam) @ U.conj().T - X)) <= 1e-9 * scale
    assert np.max(np.abs(U.conj().T @ U - np.eye(n))) <= 1e-9


def test_eig_rejects_nonfinite():
    with pytest.raises(NumericalFailure):
        hermitian_eig(np.array([[np.nan, 0], [0, 1]]))


def test_svd_zero_matrix():
    _, s, _ = svd(np.zeros((2, 3)))
    assert np.all(s == 0)


def test_svd_rank_one():
    rng = np.random.default_rng(1)
    X = np.outer(crandn(rng, 4), crandn(rng, 3).conj())
    _, s, _ = svd(X)
    assert np.sum(s > 1e-9 * s[0]) == 1
    assert numerical_rank(X) == 1


def test_svd_random_orthogonality_and_reconstruction():
    rng = np.random.default_rng(2)
    X = crandn(rng, 3, 5)
    U, s, V = svd(X)
    np.testing.assert_allclose(U.conj().T @ U, np.eye(3), atol=1e-9)
    np.testing.assert_allclose(V.conj().T @ V, np.eye(5), atol=1e-9)
    Sigma = np.zeros((3, 5))
    Sigma[:3, :3] = np.diag(s)
    np.testing.assert_allclose(U @ Sigma @ V.conj().T, X, atol=1e-9 * np.abs(X).max())
    assert np.all(np.diff(s) <= 0)


def test_svd_of_psd_equals_eigenvalues():
    rng = np.random.default_rng(3)
    X = random_psd(rng, 5)
    _, s, _ = svd(X)
    lam, _ = hermitian_eig(X)
    np.testing.assert_allclose(s, lam, rtol=1e-8)


def test_cholesky_examples():
    np.testing.assert_allclose(cholesky_psd(np.eye(3)), np.eye(3))
    assert cholesky_psd(np.diag([1.0, -1.0])) is None
    rng = np.random.default_rng(4)
    A = crandn(rng, 4, 4)
    X = A.conj().T @ A + 1e-6 * np.eye(4)
    L = cholesky_psd(X)
    assert L is not None
    np.testing.assert_allclose(L @ L.conj().T, X, atol=1e-9 * np.abs(X).max())


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-2.0, 2.0))
def test_cholesky_iff_eigen_bound(seed, shift):
    rng = np.random.default_rng(seed)
    X = random_psd(rng, 4, rank=2)
    lam_max = hermitian_eig(X)[0][0]
    X = X + shift * 1e-9 * (1 + lam_max) * np.eye(4) * 1.5
    lam, _ = hermitian_eig(X)
    psd = lam[-1] >= -1e-9 * (1 + lam[0])
    # keep clear of the boundary where both sides are rounding noise
    if abs(lam[-1] + 1e-9 * (1 + lam[0])) < 1e-12 * (1 + lam[0]):
        return
    assert (cholesky_psd(X) is not None) == psd


def test_cholesky_strict_probe():
    assert cholesky_psd(np.diag([1.0, 0.0]), tol=0.0) is None
    assert cholesky_psd(np.diag([1.0, 0.0])) is not None


def test_hermitian_symmetrizes_small_drift():
    X = np.array([[1.0, 1 + 1e-13], [1.0, 2.0]])
    Xh = hermitian(X)
    np.testing.assert_array_equal(Xh, Xh.conj().T)
    with pytest.raises(ValueError):
        hermitian(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ValueError):
        hermitian(np.diag([1.0, -1.0]), psd=True)


def test_log2det():
    assert log2det_pd(2 * np.eye(2)) == pytest.approx(2.0)
    with pytest.raises(NumericalFailure):
        log2det_pd(np.diag([1.0, 0.0]))


def test_unit_phases():
    phi = unit_phases(np.exp(1j * np.array([0.1, 2.0])))
    np.testing.assert_allclose(np.abs(phi), 1.0)
    with pytest.raises(ValueError):
        unit_phases([1.0, 0.5])


def test_rng_determinism_and_moments():
    a = seeded_rng(42).standard_normal(1000)
    b = seeded_rng(42).standard_normal(1000)
    np.testing.assert_array_equal(a, b)
    u = seeded_rng(7).uniform(size=10_000)
    assert u.min() >= 0 and u.max() < 1
    for seed in (1, 2):
        assert abs(seeded_rng(seed).standard_normal(10**6).mean()) < 0.01


def test_crandn_unit_variance():
    z = crandn(seeded_rng(5), 200_000)
    assert abs(np.mean(np.abs(z) ** 2) - 1) < 0.01
    assert abs(np.mean(z.real**2) - 0.5) < 0.01
