"""Lie-group embedding of a mean-covariance pair and the log-domain descriptor."""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .exceptions import DimensionMismatchError
from .symmat import (
    check_lower_triangular_positive,
    cholesky,
    mat_exp,
    mat_log,
    smat,
    svec,
    svec_dim,
    sym,
)
from .validation import check_matrix


@dataclass(frozen=True, eq=False)
class GroupElement:
    """Element ``(L, u)`` of the block lower-triangular group.

    ``L`` is a lower-triangular ``p x p`` factor with positive diagonal and
    ``u`` the log-coordinates of the mean, realized as ``[[L, 0], [u^T, 1]]``.
    """

    factor: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        factor = check_lower_triangular_positive(self.factor)
        coords = np.asarray(self.coords, dtype=float).ravel()
        if coords.shape[0] != factor.shape[0]:
            raise DimensionMismatchError(
                f"factor is {factor.shape[0]}x{factor.shape[0]} but coords has length {coords.size}"
            )
        object.__setattr__(self, "factor", factor)
        object.__setattr__(self, "coords", coords)

    @property
    def p(self):
        return self.factor.shape[0]

    def matrix(self):
        return matrix_realization(self)

    def mean(self):
        """The SPD mean recovered as ``exp(smat(coords))``."""
        return mat_exp(smat(self.coords))

    def covariance(self):
        return self.factor @ self.factor.T


def group_identity(p):
    return GroupElement(np.eye(p), np.zeros(p))


def mean_coords(p_m):
    """Global log-coordinates ``svec(log P_m)`` of an SPD mean."""
    return svec(mat_log(p_m))


def group_embed(p_m, p_c):
    """Map ``(P_m, P_c)`` to ``(cholesky(P_c), svec(log P_m))``."""
    p_m = sym(p_m)
    p_c = sym(p_c)
    n = p_m.shape[0]
    if p_c.shape[0] != svec_dim(n):
        raise DimensionMismatchError(
            f"covariance is {p_c.shape[0]}x{p_c.shape[0]}, expected p = n(n+1)/2 = {svec_dim(n)} for n = {n}"
        )
    return GroupElement(cholesky(p_c), mean_coords(p_m))


def group_compose(g1, g2):
    """Group law ``(L1, u1) * (L2, u2) = (L1 L2, L2^T u1 + u2)``."""
    if g1.p != g2.p:
        raise DimensionMismatchError(f"cannot compose elements of size {g1.p} and {g2.p}")
    return GroupElement(g1.factor @ g2.factor, g2.factor.T @ g1.coords + g2.coords)


def group_inverse(g):
    L_inv = np.linalg.inv(g.factor)
    return GroupElement(np.tril(L_inv), -L_inv.T @ g.coords)


def matrix_realization(g):
    p = g.p
    M = np.zeros((p + 1, p + 1))
    M[:p, :p] = g.factor
    M[p, :p] = g.coords
    M[p, p] = 1.0
    return M


def descriptor_dim(p):
    """Length ``(p+1)(p+2)/2`` of the raw log-domain descriptor."""
    return svec_dim(p + 1)


class DescriptorTrace(NamedTuple):
    lifted: np.ndarray
    spd: np.ndarray
    log_spd: np.ndarray
    raw: np.ndarray
    projected: np.ndarray


def descriptor_trace(g, w_triangle, w_h):
    """Descriptor with all intermediate stages, see :func:`descriptor`."""
    w_triangle = check_lower_triangular_positive(w_triangle)
    p = g.p
    if w_triangle.shape[0] != p + 1:
        raise DimensionMismatchError(
            f"w_triangle is {w_triangle.shape[0]}x{w_triangle.shape[0]}, expected {p + 1} (p = {p})"
        )
    d_g = descriptor_dim(p)
    w_h = check_matrix(w_h, (d_g, None), "w_h")
    D = matrix_realization(g) @ w_triangle
    diag = np.diag(D)
    assert np.all(diag > 0), "lifted factor lost its positive diagonal"
    Q = sym(D @ D.T)
    E = mat_log(Q)
    raw = svec(E)
    return DescriptorTrace(D, Q, E, raw, raw @ w_h)


def descriptor(g, w_triangle, w_h):
    """Fusion descriptor from a group element.

    ``D = M(g) W_tri``, ``Q = D D^T``, raw descriptor ``svec(log Q)`` of
    length ``d_g = (p+1)(p+2)/2``, projected by ``W_h`` (``d_g x d_h``).

    Parameters
    ----------
    g : GroupElement
    w_triangle : ndarray, shape (p + 1, p + 1)
        Lower-triangular with positive diagonal.
    w_h : ndarray, shape (d_g, d_h)

    Returns
    -------
    ndarray, shape (d_h,)
    """
    return descriptor_trace(g, w_triangle, w_h).projected
