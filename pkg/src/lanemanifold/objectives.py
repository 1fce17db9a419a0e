"""Lane objectives: the tubular lane IoU loss, the composite loss and F1.

Lanes live on a shared longitudinal grid, so comparing a predicted and a
ground-truth lane reduces to comparing ``(x, z)`` points slice by slice.
"""

from dataclasses import dataclass, field
from typing import NamedTuple, Optional

import numpy as np
from scipy.special import logsumexp

from .exceptions import (
    BadRadiusError,
    DegenerateTangentError,
    LengthMismatchError,
    OutOfRangeError,
)
from .lanes import Y_TOL, Lane, LaneSet
from .validation import check_finite

TANGENT_GUARD = 1e-9
SUBGRADIENT_EPS = 1e-6

R_TUBE = 1.5
LAMBDA_SIM = 0.4
LAMBDA_CLS = 1.0
LAMBDA_REG = 1.0
LAMBDA_TLIOU = 0.5
TAU_MATCH = 1.5
COVERAGE = 0.75
Y_RANGE = (0.0, 100.0)
EVAL_STEP = 1.0


def _check_radius(r_tube):
    if not (np.isfinite(r_tube) and r_tube > 0):
        raise BadRadiusError(f"tube radius must be positive, got {r_tube}")
    return float(r_tube)


def _lane_points(lane):
    pts = lane.points if isinstance(lane, Lane) else check_finite(lane, "lane points")
    if pts.ndim != 2 or pts.shape[1] != 3:
        raise LengthMismatchError(f"lane points must be Q x 3, got shape {pts.shape}")
    return pts


def slice_iou(p, g, r_tube=R_TUBE):
    """Slice overlap ``(2r - d) / (2r + d)`` of two tube cross-sections.

    ``p`` and ``g`` are ``(x, z)`` points on the same slice. The value is 1 for
    coincident centers, 0 when the discs just touch and negative once they are
    apart; it is never clamped.
    """
    r = _check_radius(r_tube)
    d = float(np.linalg.norm(np.asarray(p, dtype=float) - np.asarray(g, dtype=float)))
    return (2 * r - d) / (2 * r + d)


class TLIoUResult(NamedTuple):
    value: float
    iou_term: float
    cos_penalty: float
    gradient: np.ndarray
    n_subgradient: int
    n_guarded: int


def _tangent_cosines(dp, dg):
    """Guarded cosines and their gradient with respect to ``dp``."""
    np_ = np.linalg.norm(dp, axis=1)
    ng = np.linalg.norm(dg, axis=1)
    guarded = (np_ < TANGENT_GUARD) | (ng < TANGENT_GUARD)
    denom = np_ * ng + np.where(guarded, TANGENT_GUARD, 0.0)
    dot = np.sum(dp * dg, axis=1)
    sim = dot / denom
    # d(denom)/d(dp) = ||dg|| dp / ||dp||, taken as 0 where dp vanishes.
    # Unguarded rows use dot / |dp|^2 so that dp == dg gives exactly zero.
    np_sq = np.sum(dp * dp, axis=1)
    ratio = np.zeros_like(dot)
    plain = ~guarded
    ratio[plain] = dot[plain] / np_sq[plain]
    g = guarded & (np_ > 0)
    ratio[g] = dot[g] * ng[g] / (denom[g] * np_[g])
    dsim = (dg - ratio[:, None] * dp) / denom[:, None]
    return sim, dsim, int(guarded.sum())


def tliou_loss(pred, gt, r_tube=R_TUBE, lambda_sim=LAMBDA_SIM):
    """Tubular lane IoU loss with its analytic gradient.

    ``1 - sum(2r - d_i) / sum(2r + d_i)`` over the ``Q`` slices, plus
    ``lambda_sim`` times the mean of ``(1 - cos) / 2`` over consecutive 3D
    tangent pairs.

    Parameters
    ----------
    pred, gt : Lane or ndarray, shape (Q, 3)
        Lanes on the same longitudinal grid.
    r_tube : float
    lambda_sim : float

    Returns
    -------
    TLIoUResult
        ``gradient`` has shape ``(Q, 2)`` and holds the derivative with
        respect to the predicted ``(x_i, z_i)``. Slices with ``d_i < 1e-6``
        contribute a zero subgradient to the IoU part.
    """
    r = _check_radius(r_tube)
    P = _lane_points(pred)
    G = _lane_points(gt)
    if P.shape != G.shape:
        raise LengthMismatchError(f"pred has {P.shape[0]} points, gt has {G.shape[0]}")
    Q = P.shape[0]
    if Q < 2:
        raise LengthMismatchError("need at least two points per lane")
    if not np.allclose(P[:, 1], G[:, 1], rtol=0, atol=Y_TOL):
        raise LengthMismatchError("pred and gt are not sampled on the same y grid")

    diff = P[:, [0, 2]] - G[:, [0, 2]]
    d = np.linalg.norm(diff, axis=1)
    T = d.sum()
    D = 2 * r * Q + T
    iou_term = 2 * T / D
    grad = np.zeros((Q, 2))
    active = d >= SUBGRADIENT_EPS
    grad[active] = (4 * r * Q / D ** 2) * diff[active] / d[active, None]

    dp = np.diff(P, axis=0)
    dg = np.diff(G, axis=0)
    sim, dsim, n_guarded = _tangent_cosines(dp, dg)
    cos_penalty = float(np.mean((1 - sim) / 2))
    # dp_i = p_i - p_{i-1}; only x and z are free
    c = -lambda_sim / (2 * (Q - 1))
    dxz = c * dsim[:, [0, 2]]
    grad[1:] += dxz
    grad[:-1] -= dxz
    value = iou_term + lambda_sim * cos_penalty
    return TLIoUResult(float(value), float(iou_term), cos_penalty, grad,
                       int((~active).sum()), n_guarded)


class GradcheckResult(NamedTuple):
    max_rel_error: float
    analytic: np.ndarray
    numeric: np.ndarray
    n_excluded: int
    passed: bool


def gradcheck(pred, gt, r_tube=R_TUBE, lambda_sim=LAMBDA_SIM, h=1e-5, threshold=1e-5):
    """Compare the analytic gradient with central differences.

    The error is ``max|a - f| / max(max|a|, max|f|)`` over the free
    coordinates. Points where the subgradient rule applies (``d_i < 1e-6``)
    are left out because the loss is not differentiable there.
    """
    P = _lane_points(pred).copy()
    G = _lane_points(gt)
    if np.all(np.ptp(P, axis=0) == 0):
        raise DegenerateTangentError("all predicted points coincide")
    res = tliou_loss(P, G, r_tube, lambda_sim)
    numeric = np.zeros_like(res.gradient)
    for i in range(P.shape[0]):
        for k, col in enumerate((0, 2)):
            old = P[i, col]
            P[i, col] = old + h
            up = tliou_loss(P, G, r_tube, lambda_sim).value
            P[i, col] = old - h
            down = tliou_loss(P, G, r_tube, lambda_sim).value
            P[i, col] = old
            numeric[i, k] = (up - down) / (2 * h)
    d = np.linalg.norm(P[:, [0, 2]] - G[:, [0, 2]], axis=1)
    keep = d >= SUBGRADIENT_EPS
    a, f = res.gradient[keep], numeric[keep]
    scale = max(np.abs(a).max(initial=0.0), np.abs(f).max(initial=0.0))
    err = float(np.abs(a - f).max(initial=0.0) / scale) if scale > 0 else 0.0
    return GradcheckResult(err, res.gradient, numeric, int((~keep).sum()), err < threshold)


def smooth_l1(x, beta=1.0):
    x = np.abs(np.asarray(x, dtype=float))
    return np.where(x < beta, 0.5 * x ** 2 / beta, x - 0.5 * beta)


def cross_entropy(logits, target):
    """Softmax cross-entropy of one lane's class logits against ``target``."""
    logits = np.asarray(logits, dtype=float).ravel()
    if not 0 <= target < logits.size:
        raise OutOfRangeError(f"category {target} outside {logits.size} logits")
    return float(logsumexp(logits) - logits[target])


def _class_loss(pred_lane, gt_category):
    if pred_lane.logits is not None:
        return cross_entropy(pred_lane.logits, gt_category)
    # no logits: a one-hot prediction of the stored category, clipped
    return float(-np.log(1.0 if pred_lane.category == gt_category else 1e-12))


def predicted_category(lane):
    if lane.logits is not None:
        return int(np.argmax(lane.logits))
    return lane.category


def greedy_match(cost):
    """Greedy one-to-one matching by ascending cost; ties break by index.

    Non-finite costs are never matched. Returns a list of ``(row, col)``.
    """
    cost = np.asarray(cost, dtype=float)
    if cost.size == 0:
        return []
    rows, cols = np.nonzero(np.isfinite(cost))
    order = np.lexsort((cols, rows, cost[rows, cols]))
    used_r, used_c, pairs = set(), set(), []
    for k in order:
        i, j = int(rows[k]), int(cols[k])
        if i not in used_r and j not in used_c:
            pairs.append((i, j))
            used_r.add(i)
            used_c.add(j)
    return sorted(pairs)


def _slice_cost(pred_set, gt_set):
    cost = np.full((len(pred_set), len(gt_set)), np.inf)
    for i, p in enumerate(pred_set.lanes):
        for j, g in enumerate(gt_set.lanes):
            cost[i, j] = np.mean(np.linalg.norm(p.points[:, [0, 2]] - g.points[:, [0, 2]], axis=1))
    return cost


@dataclass
class LossBreakdown:
    tliou: float = 0.0
    iou_term: float = 0.0
    cos_penalty: float = 0.0
    l_x: float = 0.0
    l_z: float = 0.0
    l_cls: float = 0.0
    total: float = 0.0
    gradient: list = field(default_factory=list)
    pairs: list = field(default_factory=list)
    no_matches: bool = False
    weights: dict = field(default_factory=dict)

    def to_dict(self):
        out = {k: getattr(self, k) for k in
               ("tliou", "iou_term", "cos_penalty", "l_x", "l_z", "l_cls", "total", "no_matches")}
        out["gradient"] = [g.tolist() for g in self.gradient]
        out["pairs"] = [list(p) for p in self.pairs]
        out["weights"] = dict(self.weights)
        return out


def total_loss(pred_set, gt_set, lambda_cls=LAMBDA_CLS, lambda_reg=LAMBDA_REG,
               lambda_tliou=LAMBDA_TLIOU, r_tube=R_TUBE, lambda_sim=LAMBDA_SIM,
               matching=None):
    """Composite loss over matched lane pairs.

    ``l_cls`` is the mean softmax cross-entropy of matched predictions,
    ``l_x`` and ``l_z`` the mean smooth-L1 over matched points, and ``tliou``
    (with its two parts) the mean tube loss over matched pairs.

    Parameters
    ----------
    pred_set, gt_set : LaneSet
        Predictions may carry per-lane ``logits``.
    matching : list of (int, int), optional
        ``(pred, gt)`` index pairs. By default lanes are paired greedily by
        ascending mean slice distance, without a threshold.

    Returns
    -------
    LossBreakdown
        With ``no_matches=True`` and all terms zero when nothing pairs up.
    """
    _check_radius(r_tube)
    weights = {"lambda_cls": lambda_cls, "lambda_reg": lambda_reg, "lambda_tliou": lambda_tliou,
               "r_tube": r_tube, "lambda_sim": lambda_sim}
    if len(pred_set) and len(gt_set) and pred_set.n_points != gt_set.n_points:
        raise LengthMismatchError(
            f"pred lanes have {pred_set.n_points} points, gt lanes have {gt_set.n_points}"
        )
    pairs = greedy_match(_slice_cost(pred_set, gt_set)) if matching is None else \
        [(int(i), int(j)) for i, j in matching]
    if not pairs:
        return LossBreakdown(no_matches=True, weights=weights)

    out = LossBreakdown(pairs=pairs, weights=weights)
    res_x, res_z, parts = [], [], []
    for i, j in pairs:
        p, g = pred_set.lanes[i], gt_set.lanes[j]
        parts.append(tliou_loss(p, g, r_tube, lambda_sim))
        res_x.append(p.x - g.x)
        res_z.append(p.z - g.z)
        out.l_cls += _class_loss(p, g.category)
    out.l_cls /= len(pairs)
    out.l_x = float(np.mean(smooth_l1(np.concatenate(res_x))))
    out.l_z = float(np.mean(smooth_l1(np.concatenate(res_z))))
    out.tliou = float(np.mean([t.value for t in parts]))
    out.iou_term = float(np.mean([t.iou_term for t in parts]))
    out.cos_penalty = float(np.mean([t.cos_penalty for t in parts]))
    out.gradient = [t.gradient for t in parts]
    out.total = lambda_cls * out.l_cls + lambda_reg * (out.l_x + out.l_z) + lambda_tliou * out.tliou
    return out


def resample_lane(lane, y_range=Y_RANGE, step=EVAL_STEP):
    """Linear interpolation onto the ``step`` grid inside the lane's y-extent.

    Returns
    -------
    y : ndarray, shape (m,)
    xz : ndarray, shape (m, 2)
    """
    lo = max(lane.y[0], y_range[0])
    hi = min(lane.y[-1], y_range[1])
    if hi < lo:
        return np.zeros(0), np.zeros((0, 2))
    start = np.ceil((lo - y_range[0]) / step - 1e-9) * step + y_range[0]
    y = np.arange(start, hi + 1e-9 * step, step)
    xz = np.column_stack([np.interp(y, lane.y, lane.x), np.interp(y, lane.y, lane.z)])
    return y, xz


@dataclass
class MatchResult:
    tp: int
    fp: int
    fn: int
    precision: float
    recall: float
    f1: float
    category_accuracy: float
    pairs: list
    coverage: list

    def to_dict(self):
        return {"tp": self.tp, "fp": self.fp, "fn": self.fn, "precision": self.precision,
                "recall": self.recall, "f1": self.f1,
                "category_accuracy": self.category_accuracy,
                "pairs": [list(p) for p in self.pairs], "coverage": list(self.coverage)}


def _align(a, b, step):
    ya, xa = a
    yb, xb = b
    ka = np.round(ya / step).astype(np.int64)
    kb = np.round(yb / step).astype(np.int64)
    _, ia, ib = np.intersect1d(ka, kb, return_indices=True)
    return np.linalg.norm(xa[ia] - xb[ib], axis=1)


def f1_evaluate(pred_set, gt_set, tau_match=TAU_MATCH, coverage=COVERAGE,
                y_range=Y_RANGE, step=EVAL_STEP):
    """Match predictions to ground truth and score them.

    Both sets are resampled onto a ``step`` grid over ``y_range``. Pairs are
    formed greedily by ascending mean ``(x, z)`` distance over shared grid
    rows. A matched prediction is a true positive when at least ``coverage``
    of its own resampled points lie within ``tau_match`` of the ground truth;
    otherwise it counts as a false positive and its ground truth as missed.
    """
    pred_s = [resample_lane(l, y_range, step) for l in pred_set.lanes]
    gt_s = [resample_lane(l, y_range, step) for l in gt_set.lanes]
    cost = np.full((len(pred_s), len(gt_s)), np.inf)
    dists = {}
    for i, a in enumerate(pred_s):
        for j, b in enumerate(gt_s):
            dd = _align(a, b, step)
            if dd.size:
                cost[i, j] = dd.mean()
                dists[i, j] = dd
    tp_pairs, cov = [], []
    for i, j in greedy_match(cost):
        frac = float(np.sum(dists[i, j] <= tau_match) / pred_s[i][0].size)
        if frac >= coverage:
            tp_pairs.append((i, j))
            cov.append(frac)
    tp = len(tp_pairs)
    fp = len(pred_s) - tp
    fn = len(gt_s) - tp
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    correct = sum(predicted_category(pred_set.lanes[i]) == gt_set.lanes[j].category
                  for i, j in tp_pairs)
    acc = correct / tp if tp else 0.0
    return MatchResult(tp, fp, fn, precision, recall, f1, acc, tp_pairs, cov)


__all__ = [
    "GradcheckResult",
    "LossBreakdown",
    "MatchResult",
    "TLIoUResult",
    "cross_entropy",
    "f1_evaluate",
    "gradcheck",
    "greedy_match",
    "resample_lane",
    "slice_iou",
    "smooth_l1",
    "tliou_loss",
    "total_loss",
]
