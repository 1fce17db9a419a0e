"""Intrinsic distance on a road surface by shortest paths on a sample grid.

Nodes sit on a rectangular parameter grid and connect to their 8 neighbours.
On analytic surfaces an edge weighs the arc length of the image of its
parameter segment (Gauss-Legendre quadrature). Every graph path is then a
real curve on the surface, so the result bounds the geodesic distance from
above. Nested refinement keeps every coarse path available, so the bound
cannot grow. Sampled grids use chords between nodes, which is exact for the
piecewise-linear surface through the samples.
"""

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import dijkstra

from ..exceptions import DisconnectedError

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_T = 0.5 * (_GL_NODES + 1.0)
_GL_W = 0.5 * _GL_WEIGHTS


def segment_length(surface, a, b):
    """Length of the surface curve ``F((1 - t) a + t b)``, ``t in [0, 1]``.

    ``a`` and ``b`` are arrays of ``(u, v)`` pairs with shape ``(m, 2)``.
    Planes and sampled grids use the chord, which is exact on a plane.
    """
    a = np.atleast_2d(np.asarray(a, dtype=float))
    b = np.atleast_2d(np.asarray(b, dtype=float))
    if surface.kind in ("plane", "sampled-grid"):
        return np.linalg.norm(surface.evaluate(b[:, 0], b[:, 1])
                              - surface.evaluate(a[:, 0], a[:, 1]), axis=-1)
    d = b - a
    pts = a[:, None, :] + _GL_T[None, :, None] * d[:, None, :]
    _, Fu, Fv = surface.partials(pts[..., 0], pts[..., 1])
    speed = np.linalg.norm(Fu * d[:, None, 0:1] + Fv * d[:, None, 1:2], axis=-1)
    return speed @ _GL_W


def _grid_edges(n_u, n_v):
    idx = np.arange(n_u * n_v).reshape(n_u, n_v)
    pairs = [
        (idx[:-1, :], idx[1:, :]),
        (idx[:, :-1], idx[:, 1:]),
        (idx[:-1, :-1], idx[1:, 1:]),
        (idx[:-1, 1:], idx[1:, :-1]),
    ]
    src = np.concatenate([p[0].ravel() for p in pairs])
    dst = np.concatenate([p[1].ravel() for p in pairs])
    return src, dst


def _locate(nodes, x):
    """Index of ``x`` in ``nodes`` if it is (numerically) a node, else the cell."""
    span = nodes[-1] - nodes[0]
    k = int(np.argmin(np.abs(nodes - x)))
    if abs(nodes[k] - x) <= 1e-12 * max(1.0, abs(span)):
        return k, True
    i = int(np.clip(np.searchsorted(nodes, x) - 1, 0, nodes.size - 2))
    return i, False


def mesh_geodesic(surface, p_uv, q_uv, resolution=(101, 101), nodes=None, mask=None):
    """Shortest-path length between two surface points, in meters.

    Parameters
    ----------
    surface : SurfaceSpec
    p_uv, q_uv : (float, float)
        Parameters of the end points. Points that are not grid nodes are
        joined to the corners of their cell.
    resolution : (int, int)
        Uniform node counts along ``u`` and ``v`` (at least 3 each). Ignored
        for sampled grids, which use their native nodes, and when ``nodes``
        is given.
    nodes : (ndarray, ndarray), optional
        Explicit increasing node coordinates along ``u`` and ``v``.
    mask : ndarray of bool, optional
        Usable nodes; edges touching a masked-out node are dropped.

    Raises
    ------
    DisconnectedError
        If no path joins the two points.
    """
    # fixed endpoint order makes the result exactly symmetric
    p_uv, q_uv = sorted([tuple(map(float, p_uv)), tuple(map(float, q_uv))])
    surface.evaluate(np.array([p_uv[0], q_uv[0]]), np.array([p_uv[1], q_uv[1]]))
    if nodes is not None:
        u, v = (np.asarray(x, dtype=float) for x in nodes)
    elif not surface.analytic:
        u, v = surface.u_m, surface.v_m
    else:
        n_u, n_v = resolution
        if n_u < 3 or n_v < 3:
            raise ValueError("resolution must be at least 3 x 3")
        u = np.linspace(*surface.u_range_m, n_u)
        v = np.linspace(*surface.v_range_m, n_v)
    n_u, n_v = u.size, v.size
    U, V = np.meshgrid(u, v, indexing="ij")
    uv = np.column_stack([U.ravel(), V.ravel()])

    src, dst = _grid_edges(n_u, n_v)
    if mask is not None:
        keep = np.asarray(mask, dtype=bool).ravel()
        ok = keep[src] & keep[dst]
        src, dst = src[ok], dst[ok]
    w = segment_length(surface, uv[src], uv[dst])

    ends = []
    extra_src, extra_dst, extra_w = [], [], []
    n_nodes = n_u * n_v
    for point in (p_uv, q_uv):
        (i, i_node), (j, j_node) = _locate(u, point[0]), _locate(v, point[1])
        if i_node and j_node:
            ends.append(i * n_v + j)
            continue
        k = n_nodes
        n_nodes += 1
        corners = {(ii, jj) for ii in ((i,) if i_node else (i, i + 1))
                   for jj in ((j,) if j_node else (j, j + 1))}
        corners = sorted(ci * n_v + cj for ci, cj in corners)
        if mask is not None:
            corners = [c for c in corners if keep[c]]
        pts = np.repeat(np.array([point]), len(corners), axis=0)
        extra_src += [k] * len(corners)
        extra_dst += corners
        extra_w.append(segment_length(surface, pts, uv[corners]) if corners else np.zeros(0))
        ends.append(k)
    if ends[0] == ends[1]:
        return 0.0
    if extra_src:
        src = np.concatenate([src, extra_src])
        dst = np.concatenate([dst, extra_dst])
        w = np.concatenate([w] + extra_w)
    # zero-length edges would vanish from a sparse matrix
    w = np.maximum(w, np.finfo(float).tiny)
    graph = coo_matrix((w, (src, dst)), shape=(n_nodes, n_nodes)).tocsr()
    dist = dijkstra(graph, directed=False, indices=ends[0])[ends[1]]
    if not np.isfinite(dist):
        raise DisconnectedError("no path between the two points on the sample grid")
    return float(dist)


def local_geodesic(surface, p_uv, q_uv, cells=16, margin=4):
    """Geodesic between nearby points on a grid fitted to their bounding box.

    The box spanned by ``p`` and ``q`` is split into ``cells`` intervals per
    axis and padded by ``margin`` cells (clipped to the domain), so both
    points are grid nodes.
    """
    if not surface.analytic:
        return mesh_geodesic(surface, p_uv, q_uv)
    p, q = np.asarray(p_uv, dtype=float), np.asarray(q_uv, dtype=float)
    extent = np.abs(q - p)
    ranges = (surface.u_range_m, surface.v_range_m)
    fallback = max(extent.max(), 1e-6) / cells
    axes = []
    for k in range(2):
        lo, hi = min(p[k], q[k]), max(p[k], q[k])
        h = extent[k] / cells if extent[k] > 0 else fallback
        core = np.linspace(lo, hi, cells + 1) if extent[k] > 0 else np.array([lo])
        before = lo - h * np.arange(margin, 0, -1)
        after = hi + h * np.arange(1, margin + 1)
        axis = np.concatenate([before, core, after])
        r0, r1 = ranges[k]
        axis = axis[(axis >= r0 - 1e-12) & (axis <= r1 + 1e-12)]
        if axis.size < 2:
            axis = np.array([lo, hi]) if hi > lo else np.array([lo])
        axes.append(axis)
    if axes[0].size < 2 or axes[1].size < 2:
        # a one-node-wide strip: fall back to the straight parameter segment
        return float(segment_length(surface, [p], [q])[0])
    return mesh_geodesic(surface, p, q, nodes=axes)
