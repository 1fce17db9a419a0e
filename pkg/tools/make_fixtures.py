"""Regenerate the JSON fixtures bundled in ``lanemanifold/fixtures``."""

import json
from pathlib import Path

import numpy as np
from scipy.optimize import brentq

from lanemanifold.lanes import Lane, LaneSet
from lanemanifold.road import CenterlineSpec, Crossfall, SurfaceSpec

OUT = Path(__file__).resolve().parents[1] / "src" / "lanemanifold" / "fixtures"


def dump(name, doc):
    path = OUT / name
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n")


def limits(**overrides):
    base = {"r_min_m": 300.0, "alpha_max_per_m2": 1e-3, "k_min_m": 60.0, "g_max": 0.08,
            "e_max_rad": float(np.arctan(0.06)), "f_max": 0.12, "v_kmh": 100.0}
    base.update(overrides)
    return base


def lanes_on(surface, offsets, y_ref):
    lanes = []
    for v in offsets:
        pts = []
        for y in y_ref:
            u = brentq(lambda t: surface.evaluate(t, v)[1] - y, *surface.u_range_m, xtol=1e-14)
            pts.append(surface.evaluate(u, v))
        lanes.append(Lane(0, np.array(pts)))
    return LaneSet(y_ref, lanes)


def main():
    # flat plane, two straight lanes
    plane = SurfaceSpec("plane", u_range_m=(0.0, 100.0), v_range_m=(-5.0, 5.0))
    dump("flat_plane/surface.json", plane.to_dict())
    y = np.arange(0.0, 101.0, 5.0)
    dump("flat_plane/lanes.json", LaneSet(y, [
        Lane(0, np.column_stack([np.full_like(y, x), y, np.zeros_like(y)])) for x in (-1.75, 1.75)
    ]).to_dict())
    dump("flat_plane/limits.json", limits())

    # fold along v = 0: F(u, v) = (v^2, u + v, 0) has F_u parallel to F_v there
    u = np.arange(0.0, 101.0, 5.0)
    v = np.arange(-2.0, 2.01, 0.5)
    U, V = np.meshgrid(u, v, indexing="ij")
    fold = SurfaceSpec("sampled-grid", u_m=u, v_m=v, points_m=np.stack([V ** 2, U + V, 0 * U], -1))
    dump("rank_collapse/surface.json", fold.to_dict())
    y = np.arange(5.0, 96.0, 5.0)
    dump("rank_collapse/lanes.json", LaneSet(y, [
        Lane(0, np.column_stack([np.full_like(y, x), y, np.zeros_like(y)])) for x in (1.0, 2.25)
    ]).to_dict())
    dump("rank_collapse/limits.json", limits())

    # right-hand arc (R = 400 m) over a crest vertical curve (K = 100 m)
    arc = CenterlineSpec("circular-arc", s_end_m=10.0, step_m=0.5, heading_rad=np.pi / 2,
                         radius_m=400.0, turn=-1, profile_a_per_m=-0.005, profile_b=0.03)
    crest = SurfaceSpec("ruled-from-centerline", v_range_m=(-4.0, 4.0), centerline=arc,
                        crossfall=Crossfall())
    dump("crest/surface.json", crest.to_dict())
    dump("crest/lanes.json", lanes_on(crest, (-1.75, 1.75), np.linspace(0.5, 9.0, 18)).to_dict())
    crest_limits = dict(f_max=0.16, v_kmh=40.0, tau_grade_rate_per_m=0.02,
                        eta_curv_rate_per_m2=1e-3)
    dump("crest/limits_k60.json", limits(k_min_m=60.0, **crest_limits))
    dump("crest/limits_k120.json", limits(k_min_m=120.0, **crest_limits))

    # objectives: uniform 1 m lateral offset over two slices
    y = np.array([0.0, 1.0])
    gt = LaneSet(y, [Lane(1, np.column_stack([np.zeros(2), y, np.zeros(2)]))])
    pred = LaneSet(y, [Lane(1, np.column_stack([np.ones(2), y, np.zeros(2)]),
                            logits=np.array([0.0, 2.0, 0.0]))])
    dump("offset/gt.json", gt.to_dict())
    dump("offset/pred.json", pred.to_dict())

    # descriptor input: four lanes on the default 20-point grid
    y = np.linspace(3.0, 100.0, 20)
    xs = [-5.4 + 1e-3 * y ** 2, -1.8 + 0 * y, 1.8 + 5e-4 * y ** 2, 5.4 + 0 * y]
    dump("lanes_four.json", LaneSet(y, [
        Lane(c, np.column_stack([x, y, 0.02 * y + 0.01 * x * np.sin(y / 20)]))
        for c, x in zip((1, 2, 2, 1), xs)
    ]).to_dict())
    dump("lanes_single_straight.json", LaneSet(y, [
        Lane(0, np.column_stack([0 * y, y, 0 * y]))
    ]).to_dict())


if __name__ == "__main__":
    main()
