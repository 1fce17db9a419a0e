"""Road centerlines: plan curvature, vertical profile and design bounds.

Stations ``s`` are in meters along the plan (horizontal) alignment, and the
vertical profile is ``z(s) = a s^2 + b s + c``. Analytic kinds use closed-form
derivatives up to third order. Sampled kinds use central differences on the
native stations.
"""

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from ..exceptions import DegenerateTangentError, OutOfRangeError, SchemaError

KINDS = ("analytic-line", "circular-arc", "parabolic-profile", "sampled")
TANGENT_EPS = 1e-12
STATION_SLACK = 1e-9


def _float(doc, key, default=None):
    if key not in doc:
        if default is None:
            raise SchemaError(f"missing field '{key}'")
        return default
    try:
        value = float(doc[key])
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field '{key}' must be a number") from exc
    if not np.isfinite(value):
        raise SchemaError(f"field '{key}' must be finite")
    return value


def _vector(doc, key, size, default=None):
    if key not in doc:
        if default is None:
            raise SchemaError(f"missing field '{key}'")
        return np.asarray(default, dtype=float)
    try:
        v = np.asarray(doc[key], dtype=float)
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"field '{key}' must be numeric") from exc
    if v.shape != (size,) or not np.all(np.isfinite(v)):
        raise SchemaError(f"field '{key}' must hold {size} finite numbers")
    return v


@dataclass(eq=False)
class CenterlineSpec:
    """A road centerline ``c(s) = (x(s), y(s), z(s))``.

    Kinds
    -----
    ``analytic-line``
        Straight plan line from ``start_m`` along ``heading_rad`` with a
        linear profile (``profile_a_per_m`` must be zero).
    ``parabolic-profile``
        Straight plan line with a parabolic vertical curve.
    ``circular-arc``
        Plan arc of ``radius_m`` turning left (``turn = 1``) or right
        (``turn = -1``); a non-zero grade ``profile_b`` makes it a helix.
    ``sampled``
        Points ``points_m`` at strictly increasing ``stations_m``.
    """

    kind: str
    s_start_m: float = 0.0
    s_end_m: float = 100.0
    step_m: float = 1.0
    start_m: np.ndarray = field(default_factory=lambda: np.zeros(2))
    heading_rad: float = 0.0
    radius_m: float = np.inf
    turn: int = 1
    profile_a_per_m: float = 0.0
    profile_b: float = 0.0
    profile_c_m: float = 0.0
    stations_m: Optional[np.ndarray] = None
    points_m: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SchemaError(f"unknown centerline kind {self.kind!r}; expected one of {KINDS}")
        if self.kind == "sampled":
            s = np.asarray(self.stations_m, dtype=float)
            P = np.asarray(self.points_m, dtype=float)
            if s.ndim != 1 or s.size < 5:
                raise SchemaError("sampled centerlines need at least 5 stations")
            if P.shape != (s.size, 3) or not np.all(np.isfinite(P)) or not np.all(np.isfinite(s)):
                raise SchemaError("points_m must be a finite (n, 3) array matching stations_m")
            if np.any(np.diff(s) <= 0):
                raise SchemaError("stations_m must be strictly increasing")
            self.stations_m, self.points_m = s, P
            self.s_start_m, self.s_end_m = float(s[0]), float(s[-1])
            self._derivs = _sampled_derivatives(s, P)
        else:
            if not self.s_end_m > self.s_start_m:
                raise SchemaError("s_end_m must exceed s_start_m")
            if self.kind == "analytic-line" and self.profile_a_per_m != 0:
                raise SchemaError("analytic-line has a linear profile; use parabolic-profile")
            if self.kind == "parabolic-profile" and self.profile_a_per_m == 0:
                raise SchemaError("parabolic-profile needs a non-zero profile_a_per_m")
            if self.kind == "circular-arc":
                if not (np.isfinite(self.radius_m) and self.radius_m > 0):
                    raise SchemaError("circular-arc needs a positive radius_m")
                if self.turn not in (1, -1):
                    raise SchemaError("turn must be 1 (left) or -1 (right)")
            self.start_m = np.asarray(self.start_m, dtype=float)
        if not self.step_m > 0:
            raise SchemaError("step_m must be positive")

    # -- evaluation ---------------------------------------------------------

    def stations(self):
        """Sweep stations: native samples, or ``step_m`` spacing plus the end."""
        if self.kind == "sampled":
            return self.stations_m.copy()
        s = np.arange(self.s_start_m, self.s_end_m, self.step_m)
        return np.append(s, self.s_end_m)

    def _check_station(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.s_start_m - STATION_SLACK) or np.any(s > self.s_end_m + STATION_SLACK):
            raise OutOfRangeError(
                f"station outside [{self.s_start_m}, {self.s_end_m}] m"
            )
        return s

    def derivatives(self, s):
        """Position and first three derivatives, each of shape ``s.shape + (3,)``."""
        s = self._check_station(s)
        if self.kind == "sampled":
            st = self.stations_m
            return tuple(
                np.stack([np.interp(s, st, D[:, k]) for k in range(3)], axis=-1)
                for D in self._derivs
            )
        a, b, c = self.profile_a_per_m, self.profile_b, self.profile_c_m
        z = np.stack([a * s ** 2 + b * s + c, 2 * a * s + b,
                      np.full_like(s, 2 * a), np.zeros_like(s)])
        if self.kind == "circular-arc":
            R, t, h = self.radius_m, self.turn, self.heading_rad
            phi = h + t * s / R
            cos, sin = np.cos(phi), np.sin(phi)
            x0 = self.start_m[0] + t * R * (-np.sin(h) + sin)
            y0 = self.start_m[1] + t * R * (np.cos(h) - cos)
            plan = [(x0, y0), (cos, sin), (-t * sin / R, t * cos / R), (-cos / R ** 2, -sin / R ** 2)]
        else:
            ch, sh = np.cos(self.heading_rad), np.sin(self.heading_rad)
            zero = np.zeros_like(s)
            plan = [(self.start_m[0] + s * ch, self.start_m[1] + s * sh),
                    (zero + ch, zero + sh), (zero, zero), (zero, zero)]
        return tuple(np.stack([px, py, z[k]], axis=-1) for k, (px, py) in enumerate(plan))

    def position(self, s):
        return self.derivatives(s)[0]

    # -- JSON ---------------------------------------------------------------

    def to_dict(self):
        if self.kind == "sampled":
            return {"kind": self.kind, "stations_m": self.stations_m.tolist(),
                    "points_m": self.points_m.tolist()}
        out = {"kind": self.kind, "s_start_m": self.s_start_m, "s_end_m": self.s_end_m,
               "step_m": self.step_m, "start_m": self.start_m.tolist(),
               "heading_rad": self.heading_rad, "profile_a_per_m": self.profile_a_per_m,
               "profile_b": self.profile_b, "profile_c_m": self.profile_c_m}
        if self.kind == "circular-arc":
            out.update(radius_m=self.radius_m, turn=self.turn)
        return out

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or "kind" not in doc:
            raise SchemaError("centerline must be an object with a 'kind'")
        kind = doc["kind"]
        if kind == "sampled":
            try:
                return cls(kind, stations_m=np.asarray(doc["stations_m"], dtype=float),
                           points_m=np.asarray(doc["points_m"], dtype=float))
            except (KeyError, TypeError, ValueError) as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"sampled centerline: {exc}") from exc
        kwargs = dict(
            kind=kind,
            s_start_m=_float(doc, "s_start_m", 0.0),
            s_end_m=_float(doc, "s_end_m"),
            step_m=_float(doc, "step_m", 1.0),
            start_m=_vector(doc, "start_m", 2, [0.0, 0.0]),
            heading_rad=_float(doc, "heading_rad", 0.0),
            profile_a_per_m=_float(doc, "profile_a_per_m", 0.0),
            profile_b=_float(doc, "profile_b", 0.0),
            profile_c_m=_float(doc, "profile_c_m", 0.0),
        )
        if kind == "circular-arc":
            kwargs["radius_m"] = _float(doc, "radius_m")
            kwargs["turn"] = int(_float(doc, "turn", 1.0))
        return cls(**kwargs)


def _second_difference(f, s):
    # 3-point stencil on a possibly non-uniform grid; ends copy their neighbour
    h = np.diff(s)[:, None]
    out = np.empty_like(f)
    slope = np.diff(f, axis=0) / h
    out[1:-1] = 2 * (slope[1:] - slope[:-1]) / (h[1:] + h[:-1])
    out[0], out[-1] = out[1], out[-2]
    return out


def _sampled_derivatives(s, P):
    d1 = np.gradient(P, s, axis=0, edge_order=2)
    d2 = _second_difference(P, s)
    d3 = np.gradient(d2, s, axis=0, edge_order=2)
    return P, d1, d2, d3


def _plan_terms(d1, d2, d3):
    x1, y1 = d1[..., 0], d1[..., 1]
    rho2 = x1 ** 2 + y1 ** 2
    if np.any(rho2 < TANGENT_EPS):
        raise DegenerateTangentError("plan tangent vanishes (x'^2 + y'^2 < 1e-12)")
    N = x1 * d2[..., 1] - y1 * d2[..., 0]
    dN = x1 * d3[..., 1] - y1 * d3[..., 0]
    drho2 = 2 * (x1 * d2[..., 0] + y1 * d2[..., 1])
    return rho2, N, dN, drho2


def horizontal_curvature(c, s):
    """Plan curvature ``|x'y'' - y'x''| / (x'^2 + y'^2)^(3/2)`` in 1/m."""
    _, d1, d2, d3 = c.derivatives(s)
    rho2, N, _, _ = _plan_terms(d1, d2, d3)
    return np.abs(N) / rho2 ** 1.5


def horizontal_curvature_rate(c, s):
    """``d kappa_h / ds`` in 1/m^2 (zero where the plan curvature vanishes)."""
    _, d1, d2, d3 = c.derivatives(s)
    rho2, N, dN, drho2 = _plan_terms(d1, d2, d3)
    return np.sign(N) * dN / rho2 ** 1.5 - 1.5 * np.abs(N) * drho2 / rho2 ** 2.5


def _space_terms(d1, d2, d3):
    speed2 = np.sum(d1 ** 2, axis=-1)
    if np.any(speed2 < TANGENT_EPS):
        raise DegenerateTangentError("tangent vanishes (|c'|^2 < 1e-12)")
    w = np.cross(d1, d2)
    return np.sqrt(speed2), w, np.cross(d1, d3)


def spatial_curvature(c, s):
    """Space-curve curvature ``|c' x c''| / |c'|^3`` in 1/m."""
    _, d1, d2, d3 = c.derivatives(s)
    speed, w, _ = _space_terms(d1, d2, d3)
    return np.linalg.norm(w, axis=-1) / speed ** 3


def spatial_curvature_rate(c, s):
    """``d kappa / ds`` with ``s`` the station parameter, in 1/m^2."""
    _, d1, d2, d3 = c.derivatives(s)
    speed, w, dw = _space_terms(d1, d2, d3)
    wn = np.linalg.norm(w, axis=-1)
    first = np.divide(np.sum(w * dw, axis=-1), wn, out=np.zeros_like(wn), where=wn > 0)
    return first / speed ** 3 - 3 * wn * np.sum(d1 * d2, axis=-1) / speed ** 5


@dataclass
class ProfileResult:
    stations: np.ndarray
    grade: np.ndarray
    second_derivative: np.ndarray
    k_value: float
    k_pass: bool
    grade_pass: bool


def vertical_profile_check(c, limits, s=None):
    """Grade ``dz/ds``, ``d^2z/ds^2`` and the vertical-curve ``K = 1/|z''|``.

    ``K`` is the smallest value over the stations (``inf`` on a constant
    grade), flagged against ``limits.k_min_m``; the grade is flagged against
    ``limits.g_max``.
    """
    s = c.stations() if s is None else np.atleast_1d(np.asarray(s, dtype=float))
    _, d1, d2, _ = c.derivatives(s)
    g, zz = d1[:, 2], d2[:, 2]
    peak = float(np.max(np.abs(zz)))
    K = np.inf if peak == 0 else 1.0 / peak
    return ProfileResult(s, g, zz, K, bool(K >= limits.k_min_m),
                         bool(np.max(np.abs(g)) <= limits.g_max))


@dataclass(frozen=True)
class DesignLimits:
    """Geometric design limits. All values must be positive.

    ``k_min_m`` is the minimum vertical-curve ``K`` in meters per unit grade.
    ``kappa_max_per_m`` bounds spatial and lane curvature; by default it is
    the side-friction bound ``(tan e_max + f_max) / (V^2 / 127)``.
    """

    r_min_m: float
    alpha_max_per_m2: float
    k_min_m: float
    g_max: float
    e_max_rad: float
    f_max: float
    v_kmh: float
    tau_grade_rate_per_m: float = 0.01
    eta_curv_rate_per_m2: float = 1e-4
    kappa_max_per_m: Optional[float] = None
    sampling_epsilon_m: float = 10.0
    c2_max_per_m: float = 10.0
    c2_jump_max_per_m2: float = 10.0
    on_surface_tol_m: float = 0.05
    rank_eps: float = 1e-8

    def __post_init__(self):
        for f in self.__dataclass_fields__:
            value = getattr(self, f)
            if value is None:
                continue
            if not (np.isfinite(value) and value > 0):
                raise SchemaError(f"design limit '{f}' must be positive and finite, got {value}")

    @property
    def kappa_h_max(self):
        return 1.0 / self.r_min_m

    @property
    def lane_kappa_max(self):
        return (np.tan(self.e_max_rad) + self.f_max) / (self.v_kmh ** 2 / 127.0)

    @property
    def kappa_max(self):
        return self.lane_kappa_max if self.kappa_max_per_m is None else self.kappa_max_per_m

    def to_dict(self):
        return {f: getattr(self, f) for f in self.__dataclass_fields__}

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("design limits must be a JSON object")
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise SchemaError(f"unknown design-limit fields: {sorted(unknown)}")
        try:
            return cls(**{k: (None if v is None else float(v)) for k, v in doc.items()})
        except TypeError as exc:
            raise SchemaError(f"design limits: {exc}") from exc


@dataclass
class CheckRecord:
    """One check: ``observed`` against ``limit``.

    ``sense`` is ``"max"`` when the largest observed value must stay within
    the limit and ``"min"`` when the smallest must exceed it. ``strict``
    selects ``<`` (or ``>``) over ``<=`` (or ``>=``).
    """

    name: str
    max_observed: float
    limit: float
    passed: bool
    sense: str = "max"
    strict: bool = False
    label: str = ""

    @classmethod
    def compare(cls, name, observed, limit, sense="max", strict=False, label=""):
        observed = float(observed)
        if sense == "max":
            ok = observed < limit if strict else observed <= limit
        else:
            ok = observed > limit if strict else observed >= limit
        return cls(name, observed, float(limit), bool(ok), sense, strict, label)

    def to_dict(self):
        def num(v):
            return v if np.isfinite(v) else None
        out = {"name": self.name, "max_observed": num(self.max_observed),
               "limit": num(self.limit), "pass": self.passed, "sense": self.sense,
               "strict": self.strict}
        if self.label:
            out["label"] = self.label
        return out


def check_design_bounds(c, limits, s=None):
    """Sweep the centerline and compare against the design limits.

    Returns
    -------
    list of CheckRecord
        Horizontal curvature and its rate, spatial curvature, grade, K value,
        grade rate (``tau``) and spatial-curvature rate (``eta``).
    """
    s = c.stations() if s is None else np.asarray(s, dtype=float)
    kh = horizontal_curvature(c, s)
    dkh = horizontal_curvature_rate(c, s)
    k3 = spatial_curvature(c, s)
    dk3 = spatial_curvature_rate(c, s)
    prof = vertical_profile_check(c, limits, s)
    return [
        CheckRecord.compare("horizontal_curvature", kh.max(), limits.kappa_h_max),
        CheckRecord.compare("horizontal_curvature_rate", np.abs(dkh).max(), limits.alpha_max_per_m2),
        CheckRecord.compare("spatial_curvature", k3.max(), limits.kappa_max),
        CheckRecord.compare("grade", np.abs(prof.grade).max(), limits.g_max),
        CheckRecord.compare("k_value", prof.k_value, limits.k_min_m, sense="min"),
        CheckRecord.compare("grade_rate", np.abs(prof.second_derivative).max(),
                            limits.tau_grade_rate_per_m, strict=True),
        CheckRecord.compare("curvature_rate", np.abs(dk3).max(),
                            limits.eta_curv_rate_per_m2, strict=True),
    ]
