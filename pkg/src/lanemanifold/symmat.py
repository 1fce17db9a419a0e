"""Dense symmetric and SPD matrix kernels.

Matrices are plain ``numpy`` arrays. Functions that need a symmetric input
symmetrize it as ``(M + M.T) / 2`` first, which absorbs the rounding left by
products such as ``C @ X @ C.T``. Functions that need an SPD input certify it:
the smallest eigenvalue must exceed ``SPD_EPS * max(1, largest eigenvalue)``.
"""

from typing import NamedTuple

import numpy as np

from .exceptions import (
    BadLengthError,
    DimensionMismatchError,
    MatrixOverflowError,
    NonFiniteError,
    NotPositiveDefiniteError,
)

SPD_EPS = 1e-12
EXP_MAX_EIGENVALUE = 700.0


class EigenDecomposition(NamedTuple):
    """Eigenvalues in descending order with matching orthonormal columns."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self):
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.T


def sym(m):
    """Return the symmetric part of a square matrix as a float array."""
    m = np.asarray(m, dtype=float)
    if m.ndim != 2 or m.shape[0] != m.shape[1] or m.shape[0] < 1:
        raise DimensionMismatchError(f"expected a non-empty square matrix, got shape {m.shape}")
    if not np.all(np.isfinite(m)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    return 0.5 * (m + m.T)


def sym_eig(m):
    """Eigendecomposition of a symmetric matrix.

    Eigenvalues are sorted in descending order; ties keep the order in which
    the solver returned them, so the result is deterministic for a fixed input.

    Parameters
    ----------
    m : ndarray, shape (n, n)
        Symmetric matrix. Only its symmetric part is used.

    Returns
    -------
    EigenDecomposition
    """
    m = sym(m)
    w, V = np.linalg.eigh(m)
    order = np.argsort(-w, kind="stable")
    return EigenDecomposition(w[order], V[:, order])


def _spd_eig(p, eps=SPD_EPS):
    eig = sym_eig(p)
    lam = eig.eigenvalues
    floor = eps * max(1.0, lam[0])
    if lam[-1] <= floor:
        raise NotPositiveDefiniteError(
            f"smallest eigenvalue {lam[-1]:.3e} is not above {floor:.3e}"
        )
    return eig


def certify_spd(p):
    """Return the symmetrized matrix if it is SPD, raise otherwise."""
    _spd_eig(p)
    return sym(p)


def is_spd(p):
    try:
        _spd_eig(p)
    except (NotPositiveDefiniteError, NonFiniteError, DimensionMismatchError):
        return False
    return True


def _spectral(eig, fn):
    V = eig.eigenvectors
    return sym((V * fn(eig.eigenvalues)) @ V.T)


def spd_function(p, fn, eps=SPD_EPS):
    """Apply a scalar function to the spectrum of an SPD matrix.

    ``eps`` is the relative certification floor. Internal callers whose input
    is SPD by construction (congruences of certified matrices) pass ``0``.
    """
    return _spectral(_spd_eig(p, eps), fn)


def mat_log(p):
    """Principal matrix logarithm of an SPD matrix."""
    return _spectral(_spd_eig(p), np.log)


def mat_exp(m):
    """Matrix exponential of a symmetric matrix; the result is SPD."""
    eig = sym_eig(m)
    if eig.eigenvalues[0] > EXP_MAX_EIGENVALUE:
        raise MatrixOverflowError(
            f"eigenvalue {eig.eigenvalues[0]:.3e} exceeds {EXP_MAX_EIGENVALUE}"
        )
    return _spectral(eig, np.exp)


def spd_sqrt(p):
    return _spectral(_spd_eig(p), np.sqrt)


def spd_inv_sqrt(p):
    return _spectral(_spd_eig(p), lambda w: 1.0 / np.sqrt(w))


def spd_power(p, t):
    return _spectral(_spd_eig(p), lambda w: w ** t)


def spd_inv(p):
    return _spectral(_spd_eig(p), lambda w: 1.0 / w)


def cholesky(p):
    """Lower-triangular Cholesky factor with positive diagonal."""
    p = certify_spd(p)
    try:
        L = np.linalg.cholesky(p)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(str(exc)) from exc
    return L


def check_lower_triangular_positive(L):
    """Validate a lower-triangular matrix with strictly positive diagonal."""
    L = np.asarray(L, dtype=float)
    if L.ndim != 2 or L.shape[0] != L.shape[1] or L.shape[0] < 1:
        raise DimensionMismatchError(f"expected a square matrix, got shape {L.shape}")
    if not np.all(np.isfinite(L)):
        raise NonFiniteError("matrix contains NaN or Inf entries")
    if np.any(np.triu(L, 1) != 0):
        raise DimensionMismatchError("matrix has non-zero entries above the diagonal")
    if np.any(np.diag(L) <= 0):
        raise NotPositiveDefiniteError("lower-triangular factor needs a positive diagonal")
    return L


def svec_dim(n):
    return n * (n + 1) // 2


def smat_dim(length):
    """Return ``n`` with ``n (n + 1) / 2 == length`` or raise BadLengthError."""
    n = int(round((np.sqrt(8 * length + 1) - 1) / 2))
    if length < 1 or svec_dim(n) != length:
        raise BadLengthError(f"length {length} is not a triangular number")
    return n


def _svec_index(n):
    rows, cols = np.triu_indices(n, 1)
    diag = np.arange(n)
    return np.concatenate([diag, rows]), np.concatenate([diag, cols])


def svec(m):
    """Norm-preserving half-vectorization of a symmetric matrix.

    Diagonal entries come first in index order, then the strictly upper
    triangle in row-major order scaled by ``sqrt(2)``, so that
    ``norm(svec(m)) == norm(m, 'fro')``.
    """
    m = sym(m)
    n = m.shape[0]
    rows, cols = _svec_index(n)
    v = m[rows, cols].copy()
    v[n:] *= np.sqrt(2.0)
    return v


def smat(v):
    """Inverse of :func:`svec`."""
    v = np.asarray(v, dtype=float).ravel()
    n = smat_dim(v.size)
    rows, cols = _svec_index(n)
    vals = v.copy()
    vals[n:] /= np.sqrt(2.0)
    m = np.zeros((n, n))
    m[rows, cols] = vals
    m[cols, rows] = vals
    return m
