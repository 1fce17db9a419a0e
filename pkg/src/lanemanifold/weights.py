"""Weight bundle shared by the lane operators and the descriptor pipeline.

Nothing here is trained. Weights are either loaded from a JSON bundle or drawn
from a seeded generator. In the JSON layout every array is stored as
``{"dims": [...], "values": [...]}`` with values in row-major order.
"""

import json
from dataclasses import dataclass, fields
from typing import Optional

import numpy as np

from .exceptions import DimensionMismatchError, SchemaError
from .group import descriptor_dim
from .symmat import check_lower_triangular_positive, mat_exp, svec_dim, sym

FORMAT = "lanemanifold-weights/1"
ARRAY_KEYS = ("w_minus", "w_zero", "w_plus", "w_gate", "w_a", "w_triangle", "w_h", "w_pt")


@dataclass(eq=False)
class WeightBundle:
    w_minus: Optional[np.ndarray] = None
    w_zero: Optional[np.ndarray] = None
    w_plus: Optional[np.ndarray] = None
    tau: float = 1.0
    w_gate: Optional[np.ndarray] = None
    w_a: Optional[np.ndarray] = None
    w_triangle: Optional[np.ndarray] = None
    w_h: Optional[np.ndarray] = None
    w_pt: Optional[np.ndarray] = None

    def reference(self):
        """SPD reference point ``exp(sym(W_pt))`` used as the transport target."""
        return mat_exp(sym(self.w_pt))

    def check_descriptor_dims(self, d, rho, d_h=None):
        """Validate the descriptor weights against feature dim ``d`` and ``rho``."""
        n = d + rho
        p = svec_dim(n)
        d_g = descriptor_dim(p)
        for name in ("w_triangle", "w_h", "w_pt"):
            if getattr(self, name) is None:
                raise SchemaError(f"weight bundle is missing '{name}'")
        if self.w_pt.shape != (n, n):
            raise DimensionMismatchError(
                f"w_pt has shape {self.w_pt.shape}; expected {n}x{n} (n = d + rho = {n})"
            )
        if self.w_triangle.shape != (p + 1, p + 1):
            raise DimensionMismatchError(
                f"w_triangle has shape {self.w_triangle.shape}; expected {p + 1}x{p + 1} "
                f"(n = {n}, p = n(n+1)/2 = {p})"
            )
        check_lower_triangular_positive(self.w_triangle)
        if self.w_h.ndim != 2 or self.w_h.shape[0] != d_g:
            raise DimensionMismatchError(
                f"w_h has shape {self.w_h.shape}; expected {d_g} rows "
                f"(n = {n}, p = {p}, d_g = (p+1)(p+2)/2 = {d_g})"
            )
        if d_h is not None and self.w_h.shape[1] != d_h:
            raise DimensionMismatchError(f"w_h has {self.w_h.shape[1]} columns, expected d_h = {d_h}")

    def to_dict(self):
        doc = {"format": FORMAT, "tau": float(self.tau)}
        for key in ARRAY_KEYS:
            arr = getattr(self, key)
            if arr is not None:
                doc[key] = {"dims": list(arr.shape), "values": arr.ravel().tolist()}
        return doc

    @classmethod
    def from_dict(cls, doc):
        if not isinstance(doc, dict):
            raise SchemaError("weight bundle must be a JSON object")
        kwargs = {"tau": float(doc.get("tau", 1.0))}
        for key in ARRAY_KEYS:
            if key in doc:
                kwargs[key] = _decode_array(key, doc[key])
        if "w_triangle" in kwargs:
            kwargs["w_triangle"] = _maybe_unpack_triangle(kwargs["w_triangle"], doc["w_triangle"])
        unknown = set(doc) - set(ARRAY_KEYS) - {"tau", "format", "dims"}
        if unknown:
            raise SchemaError(f"unknown weight keys: {sorted(unknown)}")
        return cls(**kwargs)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            try:
                doc = json.load(fh)
            except json.JSONDecodeError as exc:
                raise SchemaError(f"{path}: {exc}") from exc
        return cls.from_dict(doc)

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)

    def __repr__(self):
        shapes = {f.name: getattr(getattr(self, f.name), "shape", getattr(self, f.name))
                  for f in fields(self)}
        return f"WeightBundle({shapes})"


def _decode_array(key, entry):
    try:
        dims = [int(v) for v in entry["dims"]]
        values = np.asarray(entry["values"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise SchemaError(f"'{key}' must be an object with 'dims' and 'values': {exc}") from exc
    if values.ndim != 1:
        raise SchemaError(f"'{key}' values must be a flat row-major list")
    packed = (key == "w_triangle" and len(dims) == 2 and dims[0] == dims[1]
              and values.size == svec_dim(dims[0]) and values.size != dims[0] ** 2)
    if packed:
        return values
    if int(np.prod(dims)) != values.size:
        raise SchemaError(f"'{key}' dims {dims} do not match {values.size} values")
    return values.reshape(dims)


def _maybe_unpack_triangle(arr, entry):
    # packed storage: row-major lower triangle, n(n+1)/2 values
    if arr.ndim == 1:
        n = int(entry["dims"][0])
        L = np.zeros((n, n))
        L[np.tril_indices(n)] = arr
        return L
    return arr


def semi_orthogonal(rng, rows, cols):
    """Random matrix with orthonormal columns (or rows, when ``cols > rows``)."""
    if cols <= rows:
        q, r = np.linalg.qr(rng.standard_normal((rows, cols)))
        return q * np.sign(np.diag(r))
    q, r = np.linalg.qr(rng.standard_normal((cols, rows)))
    # C order so products round the same as arrays reloaded from JSON
    return np.ascontiguousarray((q * np.sign(np.diag(r))).T)


def init_weights(seed=0, d=3, rho=1, d_h=256, d_a=64):
    """Draw a complete weight bundle from a seeded generator.

    ``W_tri`` is the identity plus strictly-lower noise in ``(-0.1, 0.1)`` with
    diagonal ``exp(U(-0.1, 0.1))``; ``W_h`` is semi-orthogonal scaled by
    ``1 / sqrt(d_g)``; ``W_pt`` is small uniform noise so the reference sits
    near the identity. Convolution kernels are identity plus noise, ``tau = 1``.
    """
    rng = np.random.default_rng(seed)
    n = d + rho
    p = svec_dim(n)
    d_g = descriptor_dim(p)

    w_tri = np.tril(rng.uniform(-0.1, 0.1, (p + 1, p + 1)), -1)
    w_tri += np.diag(np.exp(rng.uniform(-0.1, 0.1, p + 1)))
    w_h = semi_orthogonal(rng, d_g, d_h) / np.sqrt(d_g)
    w_pt = rng.uniform(-0.1, 0.1, (n, n))
    kernels = [np.eye(d, 3) + rng.uniform(-0.1, 0.1, (d, 3)) for _ in range(3)]
    w_gate = 0.01 * rng.standard_normal((d_a + d_h, 1))
    w_a = rng.standard_normal((d_a, d_h)) / np.sqrt(d_a)
    return WeightBundle(
        w_minus=kernels[0], w_zero=kernels[1], w_plus=kernels[2], tau=1.0,
        w_gate=w_gate, w_a=w_a, w_triangle=w_tri, w_h=w_h, w_pt=w_pt,
    )
