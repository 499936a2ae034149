"""Dense complex linear-algebra kernels and seeded randomness.

Everything here works on plain ``numpy`` arrays. Hermitian inputs are
symmetrized on the way in rather than rejected, since iterative solvers
accumulate small asymmetries.
"""

import numpy as np

__all__ = [
    "NumericalFailure",
    "hermitian",
    "hermitian_eig",
    "svd",
    "cholesky_psd",
    "numerical_rank",
    "log2det_pd",
    "unit_phases",
    "seeded_rng",
    "crandn",
    "RANK_TOL",
]

#: relative singular-value threshold for numerical rank
RANK_TOL = 1e-8

_HERM_TOL = 1e-10
_PSD_TOL = 1e-9


class NumericalFailure(RuntimeError):
    """Raised when a factorization or iteration breaks down."""


def hermitian(X, psd=False):
    """Return ``(X + X^H)/2`` after checking the drift is small.

    Parameters
    ----------
    X : array_like, shape (n, n)
    psd : bool
        Also require the smallest eigenvalue to be at least
        ``-1e-9 * (1 + lambda_max)``.
    """
    X = np.asarray(X, dtype=complex)
    if X.ndim != 2 or X.shape[0] != X.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        raise ValueError("matrix has non-finite entries")
    scale = 1.0 + np.max(np.abs(X), initial=0.0)
    drift = np.max(np.abs(X - X.conj().T), initial=0.0)
    if drift > _HERM_TOL * scale:
        raise ValueError(f"matrix is not Hermitian (drift {drift:.3e})")
    Xh = 0.5 * (X + X.conj().T)
    if psd:
        lam = np.linalg.eigvalsh(Xh)
        if lam[0] < -_PSD_TOL * (1.0 + max(lam[-1], 0.0)):
            raise ValueError(f"matrix is not PSD (lambda_min {lam[0]:.3e})")
    return Xh


def hermitian_eig(X):
    """Eigendecomposition of a Hermitian matrix, eigenvalues descending.

    Returns
    -------
    lam : ndarray of float, shape (n,)
    U : ndarray of complex, shape (n, n)
        Unitary, with ``X = U @ diag(lam) @ U^H``.
    """
    X = np.asarray(X, dtype=complex)
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("non-finite input to hermitian_eig")
    try:
        lam, U = np.linalg.eigh(0.5 * (X + X.conj().T))
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    order = np.argsort(-lam, kind="stable")  # ties keep their original order
    return lam[order], U[:, order]


def svd(X):
    """Thin-free SVD ``X = U @ diag(s) @ V^H`` with ``s`` descending.

    Returns ``(U, s, V)`` (note: ``V``, not ``V^H``).
    """
    X = np.asarray(X, dtype=complex)
    if not np.all(np.isfinite(X)):
        raise NumericalFailure("non-finite input to svd")
    try:
        U, s, Vh = np.linalg.svd(X)
    except np.linalg.LinAlgError as exc:
        raise NumericalFailure(str(exc)) from exc
    return U, s, Vh.conj().T


def cholesky_psd(X, tol=_PSD_TOL):
    """Lower Cholesky factor of a Hermitian PSD matrix, or ``None``.

    ``None`` is the not-PSD signal. With ``tol > 0`` a matrix whose
    smallest eigenvalue is at least ``-tol * (1 + lambda_max)`` is accepted
    and factored after a diagonal shift of ``2 * tol * (1 + lambda_max)``
    (so ``L L^H`` matches ``X`` to that level). ``tol = 0`` is a strict
    positive-definiteness probe.
    """
    X = np.asarray(X, dtype=complex)
    X = 0.5 * (X + X.conj().T)
    if not np.all(np.isfinite(X)):
        return None
    try:
        return np.linalg.cholesky(X)
    except np.linalg.LinAlgError:
        if tol <= 0:
            return None
    lam = np.linalg.eigvalsh(X)
    bound = tol * (1.0 + max(lam[-1], 0.0))
    if lam[0] < -bound:
        return None
    try:
        return np.linalg.cholesky(X + 2.0 * bound * np.eye(X.shape[0]))
    except np.linalg.LinAlgError:
        return None


def numerical_rank(X, rtol=RANK_TOL):
    """Number of singular values above ``rtol * sigma_max``."""
    s = np.linalg.svd(np.asarray(X, dtype=complex), compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def log2det_pd(Y):
    """``log2 det(Y)`` for Hermitian positive-definite ``Y`` via Cholesky."""
    L = cholesky_psd(Y, tol=0.0)
    if L is None:
        raise NumericalFailure("log-det argument is not positive definite")
    return 2.0 * float(np.sum(np.log2(np.real(np.diag(L)))))


def unit_phases(phi):
    """Validate a reflecting-phase vector: every entry unit-modulus.

    Entries are renormalized to exactly unit modulus after the check.
    """
    phi = np.atleast_1d(np.asarray(phi, dtype=complex))
    if phi.ndim != 1:
        raise ValueError("phase vector must be one-dimensional")
    err = np.max(np.abs(np.abs(phi) - 1.0), initial=0.0)
    if err > 1e-12:
        raise ValueError(f"phases are not unit modulus (error {err:.3e})")
    return phi / np.abs(phi)


def seeded_rng(seed):
    """Deterministic random stream.

    numpy's ``Generator`` over PCG64; normals come from its ziggurat
    sampler. Streams are bit-identical for the same seed and numpy
    version; across numpy releases reproducibility is best effort.
    ``seed`` may be an int or a tuple of ints (for derived streams).
    """
    return np.random.default_rng(seed)


def crandn(rng, *shape):
    """Samples of CN(0, 1): ``(x + jy)/sqrt(2)`` with x, y standard normal."""
    x = rng.standard_normal(shape)
    y = rng.standard_normal(shape)
    return (x + 1j * y) / np.sqrt(2.0)
