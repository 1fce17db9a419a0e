import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lanemanifold.cli import fixture_path
from lanemanifold.exceptions import DisconnectedError, OutOfRangeError, SchemaError
from lanemanifold.lanes import Lane, LaneSet
from lanemanifold.road import (
    CenterlineSpec,
    CheckRecord,
    Crossfall,
    DesignLimits,
    SurfaceSpec,
    check_design_bounds,
    fundamental_form,
    fundamental_form_check,
    horizontal_curvature,
    horizontal_curvature_rate,
    jacobian_rank_check,
    load_lanes,
    load_limits,
    load_surface,
    local_geodesic,
    mesh_geodesic,
    sampling_density_check,
    singular_ratio,
    spatial_curvature,
    spatial_curvature_rate,
    validate_manifold,
    vertical_profile_check,
)

FIX = fixture_path


def _limits(**over):
    base = dict(r_min_m=300.0, alpha_max_per_m2=1e-3, k_min_m=60.0, g_max=0.08,
                e_max_rad=float(np.arctan(0.06)), f_max=0.12, v_kmh=100.0)
    base.update(over)
    return DesignLimits(**base)


def _plane(u_axis=(0.0, 1.0, 0.0), v_axis=(-1.0, 0.0, 0.0), u=(0.0, 100.0), v=(-5.0, 5.0)):
    return SurfaceSpec("plane", u_range_m=u, v_range_m=v, u_axis=np.array(u_axis),
                       v_axis=np.array(v_axis))


def _sampled_grid(fn, u, v):
    U, V = np.meshgrid(u, v, indexing="ij")
    return SurfaceSpec("sampled-grid", u_m=u, v_m=v, points_m=fn(U, V))


def _arc_surface(R=200.0, length=100.0, half=5.0, crossfall=Crossfall()):
    arc = CenterlineSpec("circular-arc", s_end_m=length, radius_m=R)
    return SurfaceSpec("ruled-from-centerline", centerline=arc, v_range_m=(-half, half),
                       crossfall=crossfall)


class TestCurvature:
    def test_straight_line(self):
        line = CenterlineSpec("analytic-line", heading_rad=0.3, profile_b=0.02)
        s = line.stations()
        assert np.all(horizontal_curvature(line, s) == 0)
        assert np.all(spatial_curvature(line, s) == 0)

    def test_arc_analytic_and_sampled(self):
        arc = CenterlineSpec("circular-arc", s_end_m=100.0, radius_m=500.0, turn=-1)
        s = arc.stations()
        assert np.abs(horizontal_curvature(arc, s) - 0.002).max() <= 1e-9
        assert np.abs(horizontal_curvature_rate(arc, s)).max() <= 1e-12
        assert np.allclose(spatial_curvature(arc, s), horizontal_curvature(arc, s), atol=1e-9)
        sampled = CenterlineSpec("sampled", stations_m=s, points_m=arc.position(s))
        assert np.abs(horizontal_curvature(sampled, s) - 0.002).max() <= 1e-4

    def test_sampled_parabola_vertex(self):
        x = np.linspace(-2.0, 2.0, 401)
        c = CenterlineSpec("sampled", stations_m=x, points_m=np.column_stack([x, x ** 2 / 2, 0 * x]))
        assert horizontal_curvature(c, np.array([0.0]))[0] == pytest.approx(1.0, abs=1e-3)

    def test_sampled_cubic_rate(self):
        x = np.linspace(0.0, 60.0, 601)
        c = CenterlineSpec("sampled", stations_m=x,
                           points_m=np.column_stack([x, x ** 3 / 600, 0 * x]))
        xs = np.linspace(10.0, 50.0, 9)
        yp, ypp, yppp = xs ** 2 / 200, xs / 100, np.full_like(xs, 0.01)
        kappa = ypp / (1 + yp ** 2) ** 1.5
        rate = yppp / (1 + yp ** 2) ** 1.5 - 3 * ypp ** 2 * yp / (1 + yp ** 2) ** 2.5
        assert np.allclose(horizontal_curvature(c, xs), kappa, rtol=1e-4)
        assert np.allclose(horizontal_curvature_rate(c, xs), rate, rtol=1e-2, atol=1e-6)

    def test_spatial_rate_against_central_difference(self):
        c = CenterlineSpec("circular-arc", s_end_m=200.0, radius_m=150.0, profile_a_per_m=-0.001,
                           profile_b=0.05)
        s = np.linspace(5.0, 195.0, 20)
        h = 1e-4
        fd = (spatial_curvature(c, s + h) - spatial_curvature(c, s - h)) / (2 * h)
        assert np.allclose(spatial_curvature_rate(c, s), fd, rtol=1e-6, atol=1e-12)

    @settings(max_examples=30, deadline=None)
    @given(st.floats(5.0, 2000.0), st.floats(-0.3, 0.3))
    def test_helix_curvature(self, R, b):
        c = CenterlineSpec("circular-arc", s_end_m=50.0, radius_m=R, profile_b=b)
        h = b * R
        assert np.allclose(spatial_curvature(c, c.stations()), R / (R ** 2 + h ** 2), rtol=1e-9)
        assert np.abs(spatial_curvature_rate(c, c.stations())).max() < 1e-12

    def test_station_range(self):
        c = CenterlineSpec("analytic-line", s_end_m=10.0)
        with pytest.raises(OutOfRangeError):
            c.position(np.array([11.0]))


class TestProfile:
    def test_constant_grade(self):
        c = CenterlineSpec("analytic-line", profile_b=0.02)
        prof = vertical_profile_check(c, _limits(k_min_m=1e9))
        assert np.allclose(prof.grade, 0.02) and np.all(prof.second_derivative == 0)
        assert prof.k_value == np.inf and prof.k_pass

    def test_crest(self):
        c = CenterlineSpec("parabolic-profile", s_end_m=6.0, profile_a_per_m=-0.005, profile_b=0.03)
        prof = vertical_profile_check(c, _limits(k_min_m=60.0))
        assert np.allclose(prof.second_derivative, -0.01)
        assert prof.k_value == 100.0 and prof.k_pass
        assert not vertical_profile_check(c, _limits(k_min_m=120.0)).k_pass


class TestDesignBounds:
    def test_straight_flat_road(self):
        line = CenterlineSpec("analytic-line")
        records = check_design_bounds(line, _limits())
        assert all(r.passed for r in records)
        for r in records:
            if r.sense == "max":
                assert r.max_observed == 0.0

    def test_arc_below_minimum_radius(self):
        arc = CenterlineSpec("circular-arc", radius_m=400.0)
        rec = {r.name: r for r in check_design_bounds(arc, _limits(r_min_m=500.0))}
        assert rec["horizontal_curvature"].max_observed == pytest.approx(0.0025)
        assert rec["horizontal_curvature"].limit == pytest.approx(0.002)
        assert not rec["horizontal_curvature"].passed

    def test_lane_curvature_limit(self):
        assert _limits().lane_kappa_max == pytest.approx((0.06 + 0.12) / (100 ** 2 / 127))
        assert round(_limits().lane_kappa_max, 6) == 0.002286

    def test_strict_records(self):
        assert not CheckRecord.compare("x", 1.0, 1.0, strict=True).passed
        assert CheckRecord.compare("x", 1.0, 1.0).passed
        assert CheckRecord.compare("x", 2.0, 1.0, sense="min", strict=True).passed
        assert CheckRecord.compare("x", np.inf, 1.0, sense="min").to_dict()["max_observed"] is None

    def test_limits_schema(self):
        with pytest.raises(SchemaError):
            DesignLimits.from_dict({"r_min_m": 1.0, "bogus": 2})
        with pytest.raises(SchemaError):
            _limits(g_max=-1.0)
        lim = _limits()
        assert DesignLimits.from_dict(lim.to_dict()) == lim


class TestSurface:
    def test_plane_form(self):
        ff = fundamental_form(_plane((1.0, 0, 0), (0, 1.0, 0)), 3.0, 1.0)
        assert (ff.E, ff.F, ff.G, ff.det_g) == (1.0, 0.0, 1.0, 1.0)

    def test_scaled_plane(self):
        ff = fundamental_form(_plane((2.0, 0, 0), (0, 3.0, 0), v=(0.0, 5.0)), 1.0, 1.0)
        assert (ff.E, ff.F, ff.G, ff.det_g) == (4.0, 0.0, 9.0, 36.0)

    def test_ruled_arc_positive_metric(self):
        surf = _arc_surface(crossfall=Crossfall(cv=-0.02, cvv_per_m=0.001))
        U, V = surf.grid((80, 15))
        ff = fundamental_form(surf, U, V)
        assert ff.det_g.min() > 0
        assert np.allclose(ff.det_g, ff.cross_norm2, rtol=1e-9)
        assert fundamental_form_check(surf).passed

    def test_partials_against_finite_differences(self):
        surf = _arc_surface(crossfall=Crossfall(c0_m=0.1, cv=-0.02, cvv_per_m=0.001,
                                                cuv_per_m=1e-4))
        u, v, h = np.array([10.0, 55.0]), np.array([-3.0, 2.0]), 1e-5
        _, Fu, Fv = surf.partials(u, v)
        fd_u = (surf.evaluate(u + h, v) - surf.evaluate(u - h, v)) / (2 * h)
        fd_v = (surf.evaluate(u, v + h) - surf.evaluate(u, v - h)) / (2 * h)
        assert np.allclose(Fu, fd_u, atol=1e-8) and np.allclose(Fv, fd_v, atol=1e-8)

    def test_lateral_offset_is_horizontal(self):
        surf = _arc_surface()
        F0 = surf.evaluate(30.0, 0.0)
        F1 = surf.evaluate(30.0, 2.0)
        assert np.linalg.norm(F1 - F0) == pytest.approx(2.0)
        assert F1[2] == F0[2]
        # left of the direction of travel on a left-turning arc is towards the center
        _, d1, _, _ = surf.centerline.derivatives(np.array(30.0))
        t, n = d1[:2], (F1 - F0)[:2]
        assert t[0] * n[1] - t[1] * n[0] > 0

    def test_rank(self):
        assert singular_ratio(_plane(), 1.0, 1.0) == pytest.approx(1.0)
        assert jacobian_rank_check(_plane()).passed
        flat = _sampled_grid(lambda U, V: np.stack([U, U, 0 * U], -1),
                             np.linspace(0, 4, 5), np.linspace(0, 4, 5))
        assert singular_ratio(flat, 2.0, 2.0) == pytest.approx(0.0, abs=1e-12)
        assert not jacobian_rank_check(flat).passed

    def test_closest_point(self):
        surf = _arc_surface()
        target = surf.evaluate(42.0, -1.5)
        uv, dist = surf.closest_point(target + [0.0, 0.0, 0.3])
        assert np.allclose(uv, [42.0, -1.5], atol=1e-6)
        assert dist == pytest.approx(0.3, abs=1e-6)

    def test_json_round_trip(self):
        for surf in (_plane(), _arc_surface(crossfall=Crossfall(cv=0.02)),
                     load_surface(FIX("rank_collapse/surface.json"))):
            back = SurfaceSpec.from_dict(json.loads(json.dumps(surf.to_dict())))
            U, V = surf.grid((7, 5))
            assert np.allclose(back.evaluate(U, V), surf.evaluate(U, V))

    @pytest.mark.parametrize("doc", [
        {"kind": "torus"},
        {"kind": "sampled-grid", "u_m": [0, 1], "v_m": [0, 1, 2], "points_m": []},
        {"kind": "ruled-from-centerline", "centerline": {"kind": "spiral"}},
        {"kind": "ruled-from-centerline", "crossfall": {"tilt": 1},
         "centerline": {"kind": "analytic-line"}},
        {"kind": "plane", "u_range_m": [1, 0]},
    ])
    def test_schema_errors(self, doc):
        with pytest.raises(SchemaError):
            SurfaceSpec.from_dict(doc)


class TestGeodesic:
    def test_axis_aligned(self):
        plane = _plane(u=(0.0, 20.0))
        assert mesh_geodesic(plane, (0.0, 0.0), (10.0, 0.0), resolution=(21, 11)) == 10.0

    def test_diagonal(self):
        plane = _plane(u=(0.0, 10.0), v=(0.0, 10.0))
        d = mesh_geodesic(plane, (0.0, 0.0), (7.0, 7.0), resolution=(11, 11))
        assert abs(d - 7.0 * np.sqrt(2.0)) <= 1e-9

    def test_off_grid_points_and_symmetry(self):
        surf = _arc_surface()
        p, q = (12.3, -1.1), (77.7, 3.3)
        a = mesh_geodesic(surf, p, q, resolution=(51, 11))
        assert a == mesh_geodesic(surf, q, p, resolution=(51, 11))
        chord = np.linalg.norm(surf.evaluate(*q) - surf.evaluate(*p))
        assert a >= chord

    def test_disconnected(self):
        plane = _plane(u=(0.0, 4.0), v=(0.0, 4.0))
        mask = np.ones((5, 5), dtype=bool)
        mask[2, :] = False
        with pytest.raises(DisconnectedError):
            mesh_geodesic(plane, (0.0, 0.0), (4.0, 4.0), resolution=(5, 5), mask=mask)

    def test_local_geodesic_plane(self):
        plane = _plane()
        assert local_geodesic(plane, (10.0, 1.0), (14.0, 1.0)) == pytest.approx(4.0, rel=1e-12)


def _flat_lane(y, x=1.75):
    return Lane(0, np.column_stack([np.full_like(y, x), y, np.zeros_like(y)]))


class TestSamplingDensity:
    def test_uniform_spacing(self):
        plane = _plane()
        rec = sampling_density_check(_flat_lane(np.arange(0.0, 20.0)), plane, epsilon=2.0)
        assert rec.passed and rec.max_observed == pytest.approx(1.0, rel=1e-12)

    def test_one_gap(self):
        y = np.array([0.0, 1.0, 2.0, 7.0, 8.0])
        rec = sampling_density_check(_flat_lane(y), _plane(), epsilon=2.0)
        assert not rec.passed and rec.max_observed == pytest.approx(5.0, rel=1e-12)
        assert sampling_density_check(_flat_lane(y), None, epsilon=2.0).max_observed == 5.0

    def test_chord_below_geodesic_on_curved_surface(self):
        surf = _arc_surface(R=40.0, length=60.0, crossfall=Crossfall(cvv_per_m=0.05))
        uv = np.column_stack([np.linspace(2.0, 58.0, 8), np.linspace(-4.0, 4.0, 8)])
        pts = surf.evaluate(uv[:, 0], uv[:, 1])
        for i in range(len(uv) - 1):
            chord = np.linalg.norm(pts[i + 1] - pts[i])
            assert chord <= local_geodesic(surf, uv[i], uv[i + 1]) * (1 + 1e-9)


class TestValidate:
    def _report(self, name, limits="limits.json"):
        return validate_manifold(load_surface(FIX(f"{name}/surface.json")),
                                 load_lanes(FIX(f"{name}/lanes.json")),
                                 load_limits(FIX(f"{name}/{limits}")))

    def test_flat_plane(self):
        rep = self._report("flat_plane")
        assert rep.overall and rep.failed == []
        names = {r.name for r in rep.records}
        assert {"jacobian_rank", "fundamental_form", "c2_second_difference",
                "lane[0].sampling_density", "lane[1].on_surface"} <= names

    def test_rank_collapse(self):
        rep = self._report("rank_collapse")
        assert not rep.overall
        assert rep.failed == ["jacobian_rank"]
        assert rep.theorem_conditions == {"local_charts": False, "c2_smoothness": True,
                                          "curvature_grade_consistency": True}

    def test_crest_threshold_flip(self):
        ok = self._report("crest", "limits_k60.json")
        bad = self._report("crest", "limits_k120.json")
        assert ok.overall
        assert bad.failed == ["k_value"]
        assert ok.record("k_value").max_observed == pytest.approx(100.0)
        flips = [a.name for a, b in zip(ok.records, bad.records) if a.passed != b.passed]
        assert flips == ["k_value"]

    def test_lane_off_surface_fails(self):
        surf = load_surface(FIX("flat_plane/surface.json"))
        y = np.linspace(5.0, 95.0, 19)
        lane = Lane(0, np.column_stack([np.zeros_like(y), y, np.full_like(y, 0.5)]))
        rep = validate_manifold(surf, LaneSet(y, [lane]), _limits())
        assert rep.failed == ["lane[0].on_surface"]

    def test_report_json(self):
        doc = self._report("flat_plane").to_dict()
        json.dumps(doc, allow_nan=False)
        assert doc["overall"] is True
