"""Road-manifold validation report: surface, centerline and lane checks."""

import json
from dataclasses import dataclass, field

import numpy as np

from ..exceptions import SchemaError
from ..lanes import LaneSet
from .centerline import CenterlineSpec, CheckRecord, DesignLimits, check_design_bounds
from .geodesic import local_geodesic
from .surface import (
    SurfaceSpec,
    c2_smoothness_proxy,
    fundamental_form_check,
    jacobian_rank_check,
)

CONDITION_RECORDS = {
    "local_charts": ("jacobian_rank", "fundamental_form"),
    "c2_smoothness": ("c2_second_difference", "c2_continuity"),
    "curvature_grade_consistency": ("horizontal_curvature", "horizontal_curvature_rate",
                                    "spatial_curvature", "grade", "k_value", "grade_rate",
                                    "curvature_rate"),
}


@dataclass
class ValidationReport:
    records: list = field(default_factory=list)

    @property
    def overall(self):
        return all(r.passed for r in self.records)

    @property
    def failed(self):
        return [r.name for r in self.records if not r.passed]

    def record(self, name):
        for r in self.records:
            if r.name == name:
                return r
        raise KeyError(name)

    @property
    def theorem_conditions(self):
        """Pass flags of the three manifold conditions, from their records."""
        by_name = {r.name: r.passed for r in self.records}
        return {cond: all(by_name[n] for n in names if n in by_name)
                for cond, names in CONDITION_RECORDS.items()}

    def to_dict(self):
        return {"overall": self.overall, "theorem_conditions": self.theorem_conditions,
                "records": [r.to_dict() for r in self.records]}


def _lane_uv(surface, points):
    uv, dist = [], []
    for p in points:
        x, d = surface.closest_point(p)
        uv.append(x)
        dist.append(d)
    return np.array(uv), np.array(dist)


def sampling_density_check(lane, surface=None, epsilon=10.0, name="sampling_density", uv=None):
    """Largest intrinsic gap between consecutive lane points, against ``epsilon``.

    With a surface each gap is a mesh geodesic between the points' surface
    parameters. Without one it is the Euclidean chord, a lower bound of the
    intrinsic distance. Passes iff the largest gap is below ``epsilon``.
    """
    pts = lane.points if hasattr(lane, "points") else np.asarray(lane, dtype=float)
    if surface is None:
        gaps = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    else:
        if uv is None:
            uv, _ = _lane_uv(surface, pts)
        gaps = np.array([local_geodesic(surface, uv[i], uv[i + 1]) for i in range(len(uv) - 1)])
    return CheckRecord.compare(name, gaps.max(), epsilon, strict=True)


def _arc_derivatives(pts):
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts, axis=0), axis=1))])
    d1 = np.gradient(pts, s, axis=0, edge_order=2 if len(s) > 2 else 1)
    d2 = np.gradient(d1, s, axis=0, edge_order=2 if len(s) > 2 else 1)
    return s, d1, d2


def lane_checks(lane, surface, limits, index):
    """Per-lane records: tangent, on-surface, curvature, its rate, grade, density.

    Curvature is the space-curve curvature of the sampled lane, an upper
    bound of its geodesic curvature on the surface.
    """
    pts = lane.points
    prefix = f"lane[{index}]."
    seg = np.linalg.norm(np.diff(pts, axis=0), axis=1)
    records = [CheckRecord.compare(prefix + "tangent", seg.min(), 0.0, sense="min", strict=True)]
    if seg.min() <= 0:
        return records
    uv, dist = _lane_uv(surface, pts)
    records.append(CheckRecord.compare(prefix + "on_surface", dist.max(), limits.on_surface_tol_m))
    if len(pts) >= 3:
        s, d1, d2 = _arc_derivatives(pts)
        speed = np.linalg.norm(d1, axis=1)
        kappa = np.linalg.norm(np.cross(d1, d2), axis=1) / speed ** 3
        dkappa = np.gradient(kappa, s, edge_order=2 if len(s) > 2 else 1)
        records.append(CheckRecord.compare(prefix + "curvature", kappa.max(), limits.lane_kappa_max))
        records.append(CheckRecord.compare(prefix + "curvature_rate", np.abs(dkappa).max(),
                                           limits.eta_curv_rate_per_m2, strict=True))
    plan = np.linalg.norm(np.diff(pts[:, :2], axis=0), axis=1)
    grade = np.abs(np.diff(pts[:, 2])) / np.maximum(plan, 1e-12)
    records.append(CheckRecord.compare(prefix + "grade", grade.max(), limits.g_max))
    records.append(sampling_density_check(lane, surface, limits.sampling_epsilon_m,
                                          prefix + "sampling_density", uv=uv))
    return records


def surface_centerline(surface, n=201):
    """Centerline to check against the design limits.

    Ruled surfaces carry their own. Otherwise the mid-``v`` parameter line is
    sampled and stationed by its plan length.
    """
    if surface.centerline is not None:
        return surface.centerline
    if surface.kind == "sampled-grid":
        u = surface.u_m
    else:
        u = np.linspace(*surface.u_range_m, n)
    v_mid = 0.5 * sum(surface.v_range_m)
    pts = surface.evaluate(u, np.full_like(u, v_mid))
    s = np.concatenate([[0.0], np.cumsum(np.linalg.norm(np.diff(pts[:, :2], axis=0), axis=1))])
    return CenterlineSpec("sampled", stations_m=s, points_m=pts)


def validate_manifold(surface, lanes, limits, grid_shape=None):
    """Check the conditions for the road to be a smooth Riemannian surface.

    Parameters
    ----------
    surface : SurfaceSpec
    lanes : LaneSet
    limits : DesignLimits
    grid_shape : (int, int), optional
        Evaluation grid; sampled surfaces default to their nodes.

    Returns
    -------
    ValidationReport
        ``overall`` is the conjunction of every record.
    """
    records = [
        jacobian_rank_check(surface, grid_shape, limits.rank_eps),
        fundamental_form_check(surface, grid_shape),
        *c2_smoothness_proxy(surface, grid_shape, limits.c2_max_per_m, limits.c2_jump_max_per_m2),
        *check_design_bounds(surface_centerline(surface), limits),
    ]
    for j, lane in enumerate(lanes.lanes):
        records.extend(lane_checks(lane, surface, limits, j))
    return ValidationReport(records)


def _load_json(path):
    with open(path) as fh:
        try:
            return json.load(fh)
        except json.JSONDecodeError as exc:
            raise SchemaError(f"{path}: {exc}") from exc


def load_surface(path):
    return SurfaceSpec.from_dict(_load_json(path))


def load_limits(path):
    return DesignLimits.from_dict(_load_json(path))


def load_lanes(path):
    return LaneSet.from_dict(_load_json(path))
