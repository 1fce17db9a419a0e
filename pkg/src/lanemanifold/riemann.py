"""Affine-invariant geometry on the SPD manifold.

Distance, exponential and logarithm maps, the Karcher mean, parallel
transport and tangent-space statistics, all under the affine-invariant
Riemannian metric ``<X, Y>_P = tr(P^-1 X P^-1 Y)``.
"""

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import (
    BaseMismatchError,
    DimensionMismatchError,
    EmptyInputError,
    NotConvergedError,
    NotPositiveDefiniteError,
)
from .symmat import (
    _spd_eig,
    _spectral,
    certify_spd,
    mat_exp,
    spd_function,
    smat,
    svec,
    svec_dim,
    sym,
    sym_eig,
)

DEFAULT_RIDGE = 1e-6
MAX_STEP_HALVINGS = 10


@dataclass(frozen=True, eq=False)
class TangentVector:
    """A symmetric matrix living in the tangent space at ``base``."""

    base: np.ndarray
    value: np.ndarray

    def __post_init__(self):
        base = certify_spd(self.base)
        value = sym(self.value)
        if base.shape != value.shape:
            raise DimensionMismatchError(
                f"tangent of shape {value.shape} at base of shape {base.shape}"
            )
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "value", value)

    @property
    def dim(self):
        return self.base.shape[0]


class KarcherResult(NamedTuple):
    mean: np.ndarray
    iterations: int
    final_gradient_norm: float
    converged: bool


def _same_base(a, b):
    return a.shape == b.shape and np.allclose(a, b, rtol=1e-10, atol=1e-12)


def _check_pair(a, b):
    a = certify_spd(a)
    b = certify_spd(b)
    if a.shape != b.shape:
        raise DimensionMismatchError(f"shapes {a.shape} and {b.shape} differ")
    return a, b


def _log_inner(m):
    # whitened congruences are SPD by construction; only require positivity
    return spd_function(m, np.log, eps=0.0)


def _half_powers(p, eps=0.0):
    eig = _spd_eig(p, eps)
    V, w = eig.eigenvectors, eig.eigenvalues
    s = np.sqrt(w)
    return sym((V * s) @ V.T), sym((V / s) @ V.T)


def airm_distance(a, b):
    """Geodesic distance ``||log(A^-1/2 B A^-1/2)||_F``.

    Parameters
    ----------
    a, b : ndarray, shape (n, n)
        SPD matrices.

    Returns
    -------
    float
    """
    a, b = _check_pair(a, b)
    _, a_isqrt = _half_powers(a)
    lam = sym_eig(a_isqrt @ b @ a_isqrt).eigenvalues
    if lam[-1] <= 0:
        raise NotPositiveDefiniteError("whitened matrix lost positivity")
    return float(np.sqrt(np.sum(np.log(lam) ** 2)))


def airm_inner(base, x, y):
    """AIRM inner product ``tr(P^-1 X P^-1 Y)`` of two tangents at ``base``."""
    base = certify_spd(base)
    _, b_isqrt = _half_powers(base)
    xw = b_isqrt @ sym(x) @ b_isqrt
    yw = b_isqrt @ sym(y) @ b_isqrt
    return float(np.sum(xw * yw))


def airm_norm(x):
    """Norm of a :class:`TangentVector` under the metric at its base."""
    return float(np.sqrt(max(airm_inner(x.base, x.value, x.value), 0.0)))


def log_map(base, p):
    """Riemannian logarithm ``Y^1/2 log(Y^-1/2 P Y^-1/2) Y^1/2``.

    Returns
    -------
    TangentVector
        Tangent at ``base`` pointing towards ``p``.
    """
    base, p = _check_pair(base, p)
    b_sqrt, b_isqrt = _half_powers(base)
    value = b_sqrt @ _log_inner(b_isqrt @ p @ b_isqrt) @ b_sqrt
    return TangentVector(base, value)


def exp_map(base, x):
    """Riemannian exponential ``Y^1/2 exp(Y^-1/2 X Y^-1/2) Y^1/2``.

    ``x`` may be a :class:`TangentVector` (its base must equal ``base``) or a
    bare symmetric matrix, which is then taken to live at ``base``.
    """
    base = certify_spd(base)
    if isinstance(x, TangentVector):
        if not _same_base(x.base, base):
            raise BaseMismatchError("tangent vector is not based at the given point")
        value = x.value
    else:
        value = sym(x)
    if value.shape != base.shape:
        raise DimensionMismatchError(f"tangent {value.shape} vs base {base.shape}")
    b_sqrt, b_isqrt = _half_powers(base)
    return certify_spd(b_sqrt @ mat_exp(b_isqrt @ value @ b_isqrt) @ b_sqrt)


def geodesic(a, b, t):
    """Point at parameter ``t`` on the AIRM geodesic from ``a`` to ``b``."""
    a, b = _check_pair(a, b)
    a_sqrt, a_isqrt = _half_powers(a)
    inner = a_isqrt @ b @ a_isqrt
    eig = _spd_eig(inner, 0.0)
    V = eig.eigenvectors
    return certify_spd(a_sqrt @ sym((V * eig.eigenvalues ** t) @ V.T) @ a_sqrt)


def _check_points(points):
    points = [certify_spd(p) for p in points]
    if not points:
        raise EmptyInputError("no SPD matrices supplied")
    shape = points[0].shape
    for p in points:
        if p.shape != shape:
            raise DimensionMismatchError(f"mixed shapes {shape} and {p.shape}")
    return points


def _whitened_eigs(points, y_isqrt):
    return [_spd_eig(y_isqrt @ p @ y_isqrt, 0.0) for p in points]


def _whitened_logs(points, y_isqrt):
    return [_log_inner(y_isqrt @ p @ y_isqrt) for p in points]


def _objective(points, y):
    _, y_isqrt = _half_powers(y)
    total = 0.0
    for p in points:
        lam = sym_eig(y_isqrt @ p @ y_isqrt).eigenvalues
        total += np.sum(np.log(lam) ** 2)
    return total / len(points)


def _coth_ratio(delta):
    # (delta / 2) / tanh(delta / 2), equal to 1 at delta = 0
    out = np.ones_like(delta)
    big = np.abs(delta) > 1e-8
    half = 0.5 * delta[big]
    out[big] = half / np.tanh(half)
    return out


def _newton_step(eigs, mean_log):
    """Solve ``Hess[V] = mean_log`` for the mean squared-distance objective.

    In whitened coordinates the Hessian of ``d(., P)^2 / 2`` acts on ``V`` as
    ``U (K o U^T V U) U^T`` with ``K_ij = phi(l_i - l_j)``, where ``U, exp(l)``
    diagonalize the whitened ``P``. ``phi -> 1`` as the points cluster, so the
    step tends to the plain log-average-exp step.
    """
    n = mean_log.shape[0]
    m = svec_dim(n)
    basis = [smat(e) for e in np.eye(m)]
    H = np.zeros((m, m))
    for eig in eigs:
        U = eig.eigenvectors
        l = np.log(eig.eigenvalues)
        K = _coth_ratio(l[:, None] - l[None, :])
        for k, E in enumerate(basis):
            H[:, k] += svec(U @ (K * (U.T @ E @ U)) @ U.T)
    H /= len(eigs)
    return smat(np.linalg.solve(sym(H), svec(mean_log)))


def karcher_mean(points, tol=None, max_iter=100, strict=True, method="newton"):
    """Riemannian (Karcher) mean by a log-average-exp iteration.

    Starts from the arithmetic mean and iterates ``Y <- Exp_Y(step)`` where
    the plain step is the mean tangent ``mean_s Log_Y(P_s)``. With
    ``method="newton"`` (default) that tangent is preconditioned by the
    inverse Hessian of the mean squared distance, which keeps the iteration
    fast when the points are far apart; for tightly clustered points both
    steps coincide. A step that increases the mean squared distance is
    halved, at most ten times.

    Parameters
    ----------
    points : sequence of ndarray, shape (n, n)
        SPD matrices.
    tol : float, optional
        Stop once the Frobenius norm of the summed tangent
        ``sum_s Log_Y(P_s)`` drops to ``tol``.
        Defaults to ``1e-10 * (1 + ||Y0||_F)``.
    max_iter : int
        Iteration cap.
    strict : bool
        Raise :class:`NotConvergedError` (carrying the best iterate) when the
        cap is reached; otherwise return it with ``converged=False``.
    method : {"newton", "fixed-point"}

    Returns
    -------
    KarcherResult
    """
    if method not in ("newton", "fixed-point"):
        raise ValueError(f"unknown method {method!r}")
    points = _check_points(points)
    y = certify_spd(np.mean(points, axis=0))
    if tol is None:
        tol = 1e-10 * (1.0 + np.linalg.norm(y))
    if tol <= 0:
        raise ValueError("tol must be positive")
    best = KarcherResult(y, 0, np.inf, False)
    for it in range(1, max_iter + 1):
        y_sqrt, y_isqrt = _half_powers(y)
        eigs = _whitened_eigs(points, y_isqrt)
        mean_log = np.mean([_spectral(e, np.log) for e in eigs], axis=0)
        grad_norm = len(points) * float(np.linalg.norm(y_sqrt @ mean_log @ y_sqrt))
        if grad_norm < best.final_gradient_norm:
            best = KarcherResult(y, it - 1, grad_norm, False)
        if grad_norm <= tol:
            return KarcherResult(y, it - 1, grad_norm, True)
        step = _newton_step(eigs, mean_log) if method == "newton" else mean_log
        obj = _objective(points, y)
        scale = 1.0
        for _ in range(MAX_STEP_HALVINGS + 1):
            candidate = sym(y_sqrt @ mat_exp(scale * step) @ y_sqrt)
            if _objective(points, candidate) <= obj * (1.0 + 1e-12) + 1e-300:
                break
            scale *= 0.5
        y = candidate
    y_sqrt, y_isqrt = _half_powers(y)
    grad_norm = float(np.linalg.norm(y_sqrt @ np.sum(_whitened_logs(points, y_isqrt), axis=0) @ y_sqrt))
    if grad_norm <= tol:
        return KarcherResult(y, max_iter, grad_norm, True)
    if grad_norm < best.final_gradient_norm:
        best = KarcherResult(y, max_iter, grad_norm, False)
    result = KarcherResult(best.mean, max_iter, best.final_gradient_norm, False)
    if strict:
        raise NotConvergedError(
            f"Karcher mean did not reach tol={tol:.3e} in {max_iter} iterations "
            f"(best gradient norm {best.final_gradient_norm:.3e})",
            result,
        )
    return result


def transporter(p_m, p_ref):
    """Transport matrix ``C = P_m^1/2 (P_m^-1/2 P_ref P_m^-1/2)^1/2 P_m^-1/2``."""
    p_m, p_ref = _check_pair(p_m, p_ref)
    m_sqrt, m_isqrt = _half_powers(p_m)
    inner_sqrt, _ = _half_powers(m_isqrt @ p_ref @ m_isqrt)
    return m_sqrt @ inner_sqrt @ m_isqrt


def parallel_transport(x, p_m, p_ref):
    """Carry a tangent at ``p_m`` along the geodesic to ``p_ref``.

    Computes ``C X C^T`` with ``C`` from :func:`transporter`. The AIRM inner
    product is preserved.

    Parameters
    ----------
    x : TangentVector
        Tangent based at ``p_m``.
    p_m, p_ref : ndarray, shape (n, n)
        Start and end points.

    Returns
    -------
    TangentVector
        Tangent based at ``p_ref``.
    """
    p_m, p_ref = _check_pair(p_m, p_ref)
    if not isinstance(x, TangentVector):
        x = TangentVector(p_m, x)
    if x.value.shape != p_m.shape:
        raise DimensionMismatchError(f"tangent {x.value.shape} vs base {p_m.shape}")
    if not _same_base(x.base, p_m):
        raise BaseMismatchError("tangent vector is not based at p_m")
    C = transporter(p_m, p_ref)
    return TangentVector(p_ref, C @ x.value @ C.T)


def tangent_covariance(tangents, ridge=DEFAULT_RIDGE):
    """Sample covariance of vectorized tangents plus ``ridge * I``.

    Parameters
    ----------
    tangents : sequence of TangentVector
        Tangents sharing one base point.
    ridge : float
        Non-negative diagonal loading.

    Returns
    -------
    ndarray, shape (p, p)
        SPD covariance with ``p = n (n + 1) / 2``. A single tangent yields
        ``ridge * I``.
    """
    tangents = list(tangents)
    if not tangents:
        raise EmptyInputError("no tangent vectors supplied")
    if ridge < 0:
        raise ValueError("ridge must be non-negative")
    base = tangents[0].base
    for t in tangents[1:]:
        if not _same_base(t.base, base):
            raise BaseMismatchError("tangent vectors do not share a base point")
    V = np.array([svec(t.value) for t in tangents])
    S, p = V.shape
    cov = np.zeros((p, p))
    if S > 1:
        dev = V - V.mean(axis=0)
        cov = dev.T @ dev / (S - 1)
    cov = sym(cov + ridge * np.eye(p))
    try:
        np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(
            "tangent covariance is singular; use a positive ridge"
        ) from exc
    return certify_spd(cov)


class RiemannianStatsResult(NamedTuple):
    mean: np.ndarray
    covariance: np.ndarray
    karcher: KarcherResult
    tangents: list
    ridge: float


def riemannian_statistics(points, p_ref=None, tol=None, max_iter=100, ridge=None):
    """Karcher mean plus covariance of tangents transported to ``p_ref``.

    With ``ridge=None`` the loading is chosen automatically: ``1e-6`` whenever
    ``S <= p``, otherwise none unless the raw covariance is not SPD.
    """
    points = _check_points(points)
    karcher = karcher_mean(points, tol=tol, max_iter=max_iter)
    p_m = karcher.mean
    if p_ref is None:
        p_ref = p_m
    p_ref = certify_spd(p_ref)
    if p_ref.shape != p_m.shape:
        raise DimensionMismatchError(f"reference {p_ref.shape} vs points {p_m.shape}")
    tangents = [parallel_transport(log_map(p_m, p), p_m, p_ref) for p in points]
    if ridge is not None:
        used = float(ridge)
        cov = tangent_covariance(tangents, used)
    elif len(points) <= svec_dim(p_m.shape[0]):
        used = DEFAULT_RIDGE
        cov = tangent_covariance(tangents, used)
    else:
        try:
            used = 0.0
            cov = tangent_covariance(tangents, used)
        except NotPositiveDefiniteError:
            used = DEFAULT_RIDGE
            cov = tangent_covariance(tangents, used)
    return RiemannianStatsResult(p_m, cov, karcher, tangents, used)


def riem_stats(points, p_ref=None, tol=None, max_iter=100, ridge=None):
    """Return the ``(P_m, P_c)`` pair of :func:`riemannian_statistics`."""
    res = riemannian_statistics(points, p_ref, tol=tol, max_iter=max_iter, ridge=ridge)
    return res.mean, res.covariance


class RiemannianStatistics(BaseEstimator, TransformerMixin):
    """Mean-covariance summary of a set of SPD matrices.

    ``fit`` computes the Karcher mean and the covariance of the transported
    tangents; ``transform`` maps SPD matrices to the vectorized tangents at
    the reference point, the same coordinates the covariance is built from.

    Parameters
    ----------
    reference : ndarray, shape (n, n), optional
        Target of the parallel transport. Defaults to the fitted mean.
    tol, max_iter : Karcher stopping rule, see :func:`karcher_mean`.
    ridge : float or None
        Diagonal loading, ``None`` for the automatic policy.
    """

    def __init__(self, reference=None, tol=None, max_iter=100, ridge=None):
        self.reference = reference
        self.tol = tol
        self.max_iter = max_iter
        self.ridge = ridge

    def fit(self, X, y=None):
        res = riemannian_statistics(
            list(np.asarray(X, dtype=float)),
            self.reference,
            tol=self.tol,
            max_iter=self.max_iter,
            ridge=self.ridge,
        )
        self.mean_ = res.mean
        self.covariance_ = res.covariance
        self.reference_ = res.mean if self.reference is None else certify_spd(self.reference)
        self.karcher_ = res.karcher
        self.ridge_ = res.ridge
        self.n_features_in_ = res.mean.shape[0]
        return self

    def transform(self, X):
        check_is_fitted(self, "mean_")
        X = np.asarray(X, dtype=float)
        if X.ndim != 3 or X.shape[1:] != self.mean_.shape:
            raise DimensionMismatchError(f"expected (n_matrices, {self.n_features_in_}, "
                                         f"{self.n_features_in_}), got {X.shape}")
        out = [
            svec(parallel_transport(log_map(self.mean_, p), self.mean_, self.reference_).value)
            for p in X
        ]
        return np.array(out)
