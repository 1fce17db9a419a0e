"""Road surface geometry and manifold-regularity checks."""

from .centerline import (
    CenterlineSpec,
    CheckRecord,
    DesignLimits,
    ProfileResult,
    check_design_bounds,
    horizontal_curvature,
    horizontal_curvature_rate,
    spatial_curvature,
    spatial_curvature_rate,
    vertical_profile_check,
)
from .geodesic import local_geodesic, mesh_geodesic, segment_length
from .surface import (
    Crossfall,
    FundamentalForm,
    SurfaceSpec,
    c2_smoothness_proxy,
    fundamental_form,
    fundamental_form_check,
    jacobian_rank_check,
    singular_ratio,
)
from .validate import (
    ValidationReport,
    lane_checks,
    load_lanes,
    load_limits,
    load_surface,
    sampling_density_check,
    validate_manifold,
)

__all__ = [
    "CenterlineSpec",
    "CheckRecord",
    "Crossfall",
    "DesignLimits",
    "FundamentalForm",
    "ProfileResult",
    "SurfaceSpec",
    "ValidationReport",
    "c2_smoothness_proxy",
    "check_design_bounds",
    "fundamental_form",
    "fundamental_form_check",
    "horizontal_curvature",
    "horizontal_curvature_rate",
    "jacobian_rank_check",
    "lane_checks",
    "load_lanes",
    "load_limits",
    "load_surface",
    "local_geodesic",
    "mesh_geodesic",
    "sampling_density_check",
    "segment_length",
    "singular_ratio",
    "spatial_curvature",
    "spatial_curvature_rate",
    "validate_manifold",
    "vertical_profile_check",
]
