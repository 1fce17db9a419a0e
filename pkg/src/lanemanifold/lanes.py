"""Lane data model and the two lane feature operators.

A :class:`LaneSet` holds lanes sampled on a shared longitudinal grid
``y_ref``. Lane points are ``(x, y, z)`` triples in meters.
"""

import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import BadTemperatureError, DimensionMismatchError, SchemaError
from .validation import check_finite, check_matrix

Y_TOL = 1e-9


@dataclass(eq=False)
class Lane:
    category: int
    points: np.ndarray
    visibility: Optional[np.ndarray] = None
    logits: Optional[np.ndarray] = None

    def __post_init__(self):
        pts = check_finite(self.points, "lane points")
        if pts.ndim != 2 or pts.shape[1] != 3:
            raise SchemaError(f"lane points must be Q x 3, got shape {pts.shape}")
        if pts.shape[0] < 2:
            raise SchemaError("a lane needs at least two points")
        if np.any(np.diff(pts[:, 1]) <= 0):
            raise SchemaError("lane y coordinates must be strictly increasing")
        self.points = pts
        self.category = int(self.category)
        if self.visibility is not None:
            vis = np.asarray(self.visibility, dtype=bool)
            if vis.shape != (pts.shape[0],):
                raise SchemaError("visibility must have one flag per point")
            self.visibility = vis
        if self.logits is not None:
            self.logits = check_finite(self.logits, "logits").ravel()

    @property
    def n_points(self):
        return self.points.shape[0]

    @property
    def x(self):
        return self.points[:, 0]

    @property
    def y(self):
        return self.points[:, 1]

    @property
    def z(self):
        return self.points[:, 2]

    def to_dict(self):
        out = {"category": self.category, "points": self.points.tolist()}
        if self.visibility is not None:
            out["visibility"] = self.visibility.tolist()
        if self.logits is not None:
            out["logits"] = self.logits.tolist()
        return out


@dataclass(eq=False)
class LaneSet:
    y_ref: np.ndarray
    lanes: list = field(default_factory=list)

    def __post_init__(self):
        y = check_finite(self.y_ref, "y_ref").ravel()
        if y.size < 2 or np.any(np.diff(y) <= 0):
            raise SchemaError("y_ref must hold at least two strictly increasing values")
        self.y_ref = y
        for j, lane in enumerate(self.lanes):
            if lane.n_points != y.size or not np.allclose(lane.y, y, rtol=0, atol=Y_TOL):
                raise SchemaError(f"lane {j} is not sampled on y_ref")

    @property
    def n_points(self):
        return self.y_ref.size

    def __len__(self):
        return len(self.lanes)

    def stack(self):
        """Points as an array of shape (Q, K, 3)."""
        if not self.lanes:
            return np.zeros((self.n_points, 0, 3))
        return np.stack([lane.points for lane in self.lanes], axis=1)

    def to_dict(self):
        return {"y_ref": self.y_ref.tolist(), "lanes": [lane.to_dict() for lane in self.lanes]}

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict) or "y_ref" not in doc or "lanes" not in doc:
            raise SchemaError("lane set needs 'y_ref' and 'lanes' keys")
        lanes = []
        for j, item in enumerate(doc["lanes"]):
            if not isinstance(item, dict) or "points" not in item:
                raise SchemaError(f"lane {j} needs a 'points' key")
            try:
                lanes.append(Lane(
                    category=item.get("category", 0),
                    points=np.asarray(item["points"], dtype=float),
                    visibility=item.get("visibility"),
                    logits=item.get("logits"),
                ))
            except (TypeError, ValueError) as exc:
                if isinstance(exc, SchemaError):
                    raise
                raise SchemaError(f"lane {j}: {exc}") from exc
        try:
            y_ref = np.asarray(doc["y_ref"], dtype=float)
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"y_ref: {exc}") from exc
        return cls(y_ref, lanes)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)


@dataclass(eq=False)
class AnchorFeatures:
    values: np.ndarray

    def __post_init__(self):
        self.values = check_matrix(self.values, name="anchor features")

    @property
    def n_anchors(self):
        return self.values.shape[0]

    @property
    def dim(self):
        return self.values.shape[1]

    @classmethod
    def from_dict(cls, doc):
        try:
            dims = [int(v) for v in doc["dims"]]
            values = np.asarray(doc["values"], dtype=float)
        except (KeyError, TypeError, ValueError) as exc:
            raise SchemaError(f"anchor features: {exc}") from exc
        if len(dims) != 2 or values.size != dims[0] * dims[1]:
            raise SchemaError(f"anchor features: dims {dims} do not match {values.size} values")
        return cls(values.reshape(dims))

    def to_dict(self):
        return {"dims": list(self.values.shape), "values": self.values.ravel().tolist()}


def neighbor_weights(y, tau):
    """Distance-aware softmax weights over the ``{i-1, i, i+1}`` neighborhood.

    Rows at either end of the lane renormalize over the neighbors that exist.

    Returns
    -------
    ndarray, shape (Q, 3)
        Column ``r + 1`` holds the weight of neighbor ``i + r``; missing
        neighbors get weight 0.
    """
    if not tau > 0:
        raise BadTemperatureError(f"temperature must be positive, got {tau}")
    y = np.asarray(y, dtype=float)
    Q = y.size
    logits = np.full((Q, 3), -np.inf)
    logits[:, 1] = 0.0
    logits[1:, 0] = -np.abs(y[1:] - y[:-1]) / tau
    logits[:-1, 2] = -np.abs(y[:-1] - y[1:]) / tau
    # self-distance is zero, so the row max is 0 and exp cannot overflow
    w = np.exp(logits)
    return w / w.sum(axis=1, keepdims=True)


def pw_conv(points, y, w_minus, w_zero, w_plus, tau):
    """Position-weighted convolution along each lane.

    Parameters
    ----------
    points : ndarray, shape (Q, K, 3)
        Input lane points, ``points[i, j]`` is point ``i`` of lane ``j``.
    y : ndarray, shape (Q,) or (Q, K)
        Longitudinal coordinate of each point, shared or per lane.
    w_minus, w_zero, w_plus : ndarray, shape (d, 3)
        Kernels for the previous, current and next neighbor.
    tau : float
        Softmax temperature.

    Returns
    -------
    ndarray, shape (Q, K, d)
    """
    X = check_finite(points, "points")
    if X.ndim != 3 or X.shape[2] != 3:
        raise DimensionMismatchError(f"points must be Q x K x 3, got {X.shape}")
    Q, K, c = X.shape
    if Q < 2:
        raise DimensionMismatchError("need at least two points per lane")
    kernels = [check_matrix(w, (None, c), name) for w, name in
               ((w_minus, "w_minus"), (w_zero, "w_zero"), (w_plus, "w_plus"))]
    d = kernels[0].shape[0]
    if any(k.shape[0] != d for k in kernels):
        raise DimensionMismatchError("kernels disagree on the output dimension")
    y = np.asarray(y, dtype=float)
    if y.ndim == 1:
        y = np.repeat(y[:, None], K, axis=1)
    if y.shape != (Q, K):
        raise DimensionMismatchError(f"y has shape {y.shape}, expected ({Q}, {K})")

    out = np.zeros((Q, K, d))
    for j in range(K):
        alpha = neighbor_weights(y[:, j], tau)
        xj = X[:, j, :]
        out[:, j] += alpha[:, [1]] * (xj @ kernels[1].T)
        out[1:, j] += alpha[1:, [0]] * (xj[:-1] @ kernels[0].T)
        out[:-1, j] += alpha[:-1, [2]] * (xj[1:] @ kernels[2].T)
    return out


def sigmoid(s):
    s = np.asarray(s, dtype=float)
    out = np.empty_like(s)
    pos = s >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-s[pos]))
    e = np.exp(s[~pos])
    out[~pos] = e / (1.0 + e)
    return out


def fusion_gates(f_anchor, h, w_gate):
    """Per-anchor scalar gates ``sigmoid([F_anchor, H_e] @ w_gate)``, shape (A,)."""
    F = check_matrix(f_anchor, name="anchor features")
    h = check_finite(h, "descriptor").ravel()
    A, d_a = F.shape
    w_gate = check_finite(w_gate, "w_gate").reshape(-1)
    if w_gate.size != d_a + h.size:
        raise DimensionMismatchError(
            f"w_gate has {w_gate.size} rows, expected d_a + d_h = {d_a + h.size}"
        )
    Z = np.hstack([F, np.broadcast_to(h, (A, h.size))])
    return sigmoid(Z @ w_gate)


def gated_fusion(f_anchor, h, w_gate, w_a):
    """Anchor-wise gated residual update ``F_anchor W_a + g * H_e``.

    Parameters
    ----------
    f_anchor : ndarray, shape (A, d_a)
    h : ndarray, shape (d_h,)
        Global descriptor, shared by every anchor.
    w_gate : ndarray, shape (d_a + d_h, 1)
        Gate weights; rows follow the (visual, geometric) concatenation order.
    w_a : ndarray, shape (d_a, d_h)

    Returns
    -------
    ndarray, shape (A, d_h)
    """
    F = check_matrix(f_anchor, name="anchor features")
    h = check_finite(h, "descriptor").ravel()
    w_a = check_matrix(w_a, (F.shape[1], h.size), "w_a")
    g = fusion_gates(F, h, w_gate)
    return F @ w_a + g[:, None] * h[None, :]


class PositionWeightedConv(BaseEstimator, TransformerMixin):
    """Position-weighted convolution as a transformer.

    ``transform`` accepts a :class:`LaneSet` (or a ``(Q, K, 3)`` array whose
    y channel is used for the distances) and returns per-point features of
    shape ``(Q, K, d)``. Kernels default to the identity.
    """

    def __init__(self, w_minus=None, w_zero=None, w_plus=None, tau=1.0):
        self.w_minus = w_minus
        self.w_zero = w_zero
        self.w_plus = w_plus
        self.tau = tau

    def fit(self, X=None, y=None):
        if not self.tau > 0:
            raise BadTemperatureError(f"temperature must be positive, got {self.tau}")
        eye = np.eye(3)
        self.kernels_ = tuple(
            eye.copy() if w is None else check_matrix(w, (None, 3), "kernel")
            for w in (self.w_minus, self.w_zero, self.w_plus)
        )
        return self

    def transform(self, X):
        check_is_fitted(self, "kernels_")
        if isinstance(X, LaneSet):
            pts = X.stack()
        else:
            pts = check_finite(X, "points")
        return pw_conv(pts, pts[..., 1], *self.kernels_, self.tau)
