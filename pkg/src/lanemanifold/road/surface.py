"""Parametric road surfaces ``F(u, v)`` and their regularity checks.

``u`` runs along the road and ``v`` across it. Plane and ruled surfaces have
closed-form partials. Sampled grids use central differences on their nodes
and bilinear interpolation between them.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.interpolate import RegularGridInterpolator
from scipy.optimize import least_squares

from ..exceptions import DegenerateTangentError, OutOfRangeError, SchemaError
from .centerline import TANGENT_EPS, CenterlineSpec, CheckRecord, _float, _vector

KINDS = ("plane", "ruled-from-centerline", "sampled-grid")
DOMAIN_SLACK = 1e-9
RANK_EPS = 1e-8


@dataclass
class Crossfall:
    """Elevation ``h(u, v) = c0 + cv v + cvv v^2 + cuv u v`` in meters."""

    c0_m: float = 0.0
    cv: float = 0.0
    cvv_per_m: float = 0.0
    cuv_per_m: float = 0.0

    def __call__(self, u, v):
        return self.c0_m + self.cv * v + self.cvv_per_m * v ** 2 + self.cuv_per_m * u * v

    def partials(self, u, v):
        return self.cuv_per_m * v, self.cv + 2 * self.cvv_per_m * v + self.cuv_per_m * u


@dataclass(eq=False)
class SurfaceSpec:
    """A road surface.

    Kinds
    -----
    ``plane``
        ``F = origin_m + u u_axis + v v_axis``.
    ``ruled-from-centerline``
        ``F = c(u) + v n(u) + h(u, v) e_z`` with ``n`` the left horizontal
        normal of the plan tangent. ``u`` spans the centerline stations.
    ``sampled-grid``
        ``points_m[i, j] = F(u_m[i], v_m[j])`` on a grid of at least 3 x 3.
    """

    kind: str
    u_range_m: tuple = (0.0, 100.0)
    v_range_m: tuple = (-5.0, 5.0)
    origin_m: np.ndarray = field(default_factory=lambda: np.zeros(3))
    u_axis: np.ndarray = field(default_factory=lambda: np.array([0.0, 1.0, 0.0]))
    v_axis: np.ndarray = field(default_factory=lambda: np.array([-1.0, 0.0, 0.0]))
    centerline: Optional[CenterlineSpec] = None
    crossfall: Crossfall = field(default_factory=Crossfall)
    u_m: Optional[np.ndarray] = None
    v_m: Optional[np.ndarray] = None
    points_m: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown surface kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "ruled-from-centerline":
            if self.centerline is None:
                raise SchemaError("ruled-from-centerline needs a centerline")
            self.u_range_m = (self.centerline.s_start_m, self.centerline.s_end_m)
        elif self.kind == "sampled-grid":
            u = np.asarray(self.u_m, dtype=float)
            v = np.asarray(self.v_m, dtype=float)
            P = np.asarray(self.points_m, dtype=float)
            if u.ndim != 1 or v.ndim != 1 or u.size < 3 or v.size < 3:
                raise SchemaError("sampled grids need at least 3 x 3 nodes")
            if np.any(np.diff(u) <= 0) or np.any(np.diff(v) <= 0):
                raise SchemaError("grid coordinates must be strictly increasing")
            if P.shape != (u.size, v.size, 3) or not np.all(np.isfinite(P)):
                raise SchemaError("points_m must be a finite (n_u, n_v, 3) array")
            self.u_m, self.v_m, self.points_m = u, v, P
            self.u_range_m = (float(u[0]), float(u[-1]))
            self.v_range_m = (float(v[0]), float(v[-1]))
            Fu = np.gradient(P, u, axis=0, edge_order=2)
            Fv = np.gradient(P, v, axis=1, edge_order=2)
            self._interp = [RegularGridInterpolator((u, v), A) for A in (P, Fu, Fv)]
        else:
            self.origin_m = np.asarray(self.origin_m, dtype=float)
            self.u_axis = np.asarray(self.u_axis, dtype=float)
            self.v_axis = np.asarray(self.v_axis, dtype=float)
        self.u_range_m = tuple(float(x) for x in self.u_range_m)
        self.v_range_m = tuple(float(x) for x in self.v_range_m)
        for lo, hi in (self.u_range_m, self.v_range_m):
            if not hi > lo:
                raise SchemaError("parameter ranges must have positive length")

    @property
    def analytic(self):
        return self.kind != "sampled-grid"

    def _check_domain(self, u, v):
        (u0, u1), (v0, v1) = self.u_range_m, self.v_range_m
        if (np.any(u < u0 - DOMAIN_SLACK) or np.any(u > u1 + DOMAIN_SLACK)
                or np.any(v < v0 - DOMAIN_SLACK) or np.any(v > v1 + DOMAIN_SLACK)):
            raise OutOfRangeError(f"(u, v) outside [{u0}, {u1}] x [{v0}, {v1}]")
        return np.clip(u, u0, u1), np.clip(v, v0, v1)

    def partials(self, u, v):
        """``F``, ``F_u`` and ``F_v``, each of shape ``broadcast(u, v).shape + (3,)``."""
        u, v = np.broadcast_arrays(np.asarray(u, dtype=float), np.asarray(v, dtype=float))
        u, v = self._check_domain(u, v)
        if self.kind == "plane":
            F = self.origin_m + u[..., None] * self.u_axis + v[..., None] * self.v_axis
            return F, np.broadcast_to(self.u_axis, F.shape), np.broadcast_to(self.v_axis, F.shape)
        if self.kind == "sampled-grid":
            pts = np.stack([u.ravel(), v.ravel()], axis=-1)
            return tuple(f(pts).reshape(u.shape + (3,)) for f in self._interp)
        c, d1, d2, _ = self.centerline.derivatives(u)
        rho2 = d1[..., 0] ** 2 + d1[..., 1] ** 2
        if np.any(rho2 < TANGENT_EPS):
            raise DegenerateTangentError("plan tangent of the centerline vanishes")
        rho = np.sqrt(rho2)
        t = d1[..., :2] / rho[..., None]
        # derivative of the unit plan tangent
        p2 = d2[..., :2]
        dt = (p2 - t * np.sum(t * p2, axis=-1, keepdims=True)) / rho[..., None]
        zeros = np.zeros_like(u)
        n = np.stack([-t[..., 1], t[..., 0], zeros], axis=-1)
        dn = np.stack([-dt[..., 1], dt[..., 0], zeros], axis=-1)
        h = self.crossfall(u, v)
        hu, hv = self.crossfall.partials(u, v)
        ez = np.array([0.0, 0.0, 1.0])
        F = c + v[..., None] * n + h[..., None] * ez
        Fu = d1 + v[..., None] * dn + hu[..., None] * ez
        Fv = n + hv[..., None] * ez
        return F, Fu, Fv

    def evaluate(self, u, v):
        return self.partials(u, v)[0]

    def grid(self, shape=None):
        """Parameter grid; sampled surfaces default to their native nodes."""
        if shape is None:
            if self.kind == "sampled-grid":
                return np.meshgrid(self.u_m, self.v_m, indexing="ij")
            shape = (101, 21)
        n_u, n_v = shape
        if n_u < 3 or n_v < 3:
            raise ValueError("grid resolution must be at least 3 x 3")
        u = np.linspace(*self.u_range_m, n_u)
        v = np.linspace(*self.v_range_m, n_v)
        return np.meshgrid(u, v, indexing="ij")

    def closest_point(self, xyz):
        """Parameters ``(u, v)`` of the surface point nearest ``xyz`` and the distance."""
        xyz = np.asarray(xyz, dtype=float)
        U, V = self.grid((201, 41) if self.analytic else None)
        d2 = np.sum((self.evaluate(U, V) - xyz) ** 2, axis=-1)
        i = np.unravel_index(np.argmin(d2), d2.shape)
        x0 = np.array([U[i], V[i]])
        lo = [self.u_range_m[0], self.v_range_m[0]]
        hi = [self.u_range_m[1], self.v_range_m[1]]

        def resid(x):
            return self.evaluate(x[0], x[1]) - xyz

        def jac(x):
            _, Fu, Fv = self.partials(x[0], x[1])
            return np.column_stack([Fu, Fv])

        sol = least_squares(resid, x0, jac=jac, bounds=(lo, hi), xtol=1e-14, ftol=1e-14)
        best = sol.x if sol.cost < 0.5 * d2[i] else x0
        return best, float(np.linalg.norm(resid(best)))

    # -- JSON ---------------------------------------------------------------

    def to_dict(self):
        out = {"kind": self.kind}
        if self.kind == "sampled-grid":
            out.update(u_m=self.u_m.tolist(), v_m=self.v_m.tolist(), points_m=self.points_m.tolist())
        elif self.kind == "plane":
            out.update(u_range_m=list(self.u_range_m), v_range_m=list(self.v_range_m),
                       origin_m=self.origin_m.tolist(), u_axis=self.u_axis.tolist(),
                       v_axis=self.v_axis.tolist())
        else:
            out.update(v_range_m=list(self.v_range_m), centerline=self.centerline.to_dict(),
                       crossfall=vars(self.crossfall).copy())
        return out

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or "kind" not in doc:
            raise SchemaError("surface must be an object with a 'kind'")
        kind = doc["kind"]
        try:
            if kind == "sampled-grid":
                return cls(kind, u_m=np.asarray(doc["u_m"], dtype=float),
                           v_m=np.asarray(doc["v_m"], dtype=float),
                           points_m=np.asarray(doc["points_m"], dtype=float))
            v_range = tuple(_vector(doc, "v_range_m", 2, [-5.0, 5.0]))
            if kind == "plane":
                return cls(kind, u_range_m=tuple(_vector(doc, "u_range_m", 2, [0.0, 100.0])),
                           v_range_m=v_range, origin_m=_vector(doc, "origin_m", 3, [0, 0, 0]),
                           u_axis=_vector(doc, "u_axis", 3, [0, 1, 0]),
                           v_axis=_vector(doc, "v_axis", 3, [-1, 0, 0]))
            if kind == "ruled-from-centerline":
                cf = doc.get("crossfall", {})
                if not isinstance(cf, dict):
                    raise SchemaError("crossfall must be an object")
                unknown = set(cf) - set(Crossfall.__dataclass_fields__)
                if unknown:
                    raise SchemaError(f"unknown crossfall fields: {sorted(unknown)}")
                crossfall = Crossfall(**{k: _float(cf, k) for k in cf})
                return cls(kind, v_range_m=v_range,
                           centerline=CenterlineSpec.from_dict(doc.get("centerline")),
                           crossfall=crossfall)
        except (KeyError, TypeError, ValueError) as exc:
            if isinstance(exc, SchemaError):
                raise
            raise SchemaError(f"{kind} surface: {exc}") from exc
        raise SchemaError(f"unknown surface kind {kind!r}; expected one of {KINDS}")


class FundamentalForm(NamedTuple):
    E: np.ndarray
    F: np.ndarray
    G: np.ndarray
    det_g: np.ndarray
    cross_norm2: np.ndarray


def fundamental_form(surface, u, v):
    """First fundamental form ``(E, F, G)`` and ``det_g = EG - F^2``.

    ``cross_norm2 = |F_u x F_v|^2`` is returned as an independent check on
    ``det_g``.
    """
    _, Fu, Fv = surface.partials(u, v)
    E = np.sum(Fu * Fu, axis=-1)
    F = np.sum(Fu * Fv, axis=-1)
    G = np.sum(Fv * Fv, axis=-1)
    return FundamentalForm(E, F, G, E * G - F ** 2, np.sum(np.cross(Fu, Fv) ** 2, axis=-1))


def singular_ratio(surface, u, v):
    """``sigma_min / sigma_max`` of the 3 x 2 Jacobian ``[F_u F_v]`` per node."""
    _, Fu, Fv = surface.partials(u, v)
    J = np.stack([Fu, Fv], axis=-1)
    s = np.linalg.svd(J, compute_uv=False)
    return np.divide(s[..., 1], s[..., 0], out=np.zeros(s.shape[:-1]), where=s[..., 0] > 0)


def jacobian_rank_check(surface, shape=None, eps=RANK_EPS):
    """Rank-2 check: the smallest singular-value ratio must exceed ``eps``.

    A ratio above ``eps`` also gives ``det_g > 0``, so this record covers
    positivity of the metric.
    """
    U, V = surface.grid(shape)
    ratio = singular_ratio(surface, U, V)
    return CheckRecord.compare("jacobian_rank", ratio.min(), eps, sense="min", strict=True)


def fundamental_form_check(surface, shape=None, rtol=1e-9):
    """``E, G > 0`` and ``det_g == |F_u x F_v|^2`` (relative) at every node."""
    U, V = surface.grid(shape)
    ff = fundamental_form(surface, U, V)
    scale = np.maximum(np.abs(ff.cross_norm2), ff.E * ff.G)
    scale = np.where(scale > 0, scale, 1.0)
    rel = float(np.max(np.abs(ff.det_g - ff.cross_norm2) / scale))
    positive = bool(np.all(ff.E > 0) and np.all(ff.G > 0))
    rec = CheckRecord.compare("fundamental_form", rel, rtol)
    rec.passed = rec.passed and positive
    return rec


def c2_smoothness_proxy(surface, shape=None, max_second=10.0, max_jump=10.0):
    """Finite-difference proxy for ``C^2`` regularity.

    Second differences ``F_uu, F_uv, F_vv`` on the grid must stay bounded by
    ``max_second`` (1/m). Their change between neighbouring nodes, divided
    by the node spacing, must stay within ``max_jump`` (1/m^2). Both records
    are labelled ``PROXY``.
    """
    U, V = surface.grid(shape)
    P = surface.evaluate(U, V)
    u, v = U[:, 0], V[0, :]
    Fu = np.gradient(P, u, axis=0, edge_order=2)
    Fv = np.gradient(P, v, axis=1, edge_order=2)
    second = [np.gradient(Fu, u, axis=0, edge_order=2),
              np.gradient(Fu, v, axis=1, edge_order=2),
              np.gradient(Fv, v, axis=1, edge_order=2)]
    peak = max(float(np.linalg.norm(S, axis=-1).max()) for S in second)
    jump = 0.0
    for S in second:
        du = np.linalg.norm(np.diff(S, axis=0), axis=-1) / np.diff(u)[:, None]
        dv = np.linalg.norm(np.diff(S, axis=1), axis=-1) / np.diff(v)[None, :]
        jump = max(jump, float(du.max()), float(dv.max()))
    return [CheckRecord.compare("c2_second_difference", peak, max_second, label="PROXY"),
            CheckRecord.compare("c2_continuity", jump, max_jump, label="PROXY")]
