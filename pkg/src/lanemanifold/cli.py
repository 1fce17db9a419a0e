"""Command-line entry point: ``lanemanifold <command> [options]``.

Exit codes: 0 success, 1 validation failed, 2 schema or usage error,
3 numerical failure, 4 empty input, 5 degenerate input. Failures print a
one-line JSON error record on stderr.
"""

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from importlib import resources
from pathlib import Path

import numpy as np

from . import __version__
from .descriptor import DescriptorConfig, lane_descriptor
from .exceptions import (
    DegenerateTangentError,
    DisconnectedError,
    EmptyInputError,
    LaneManifoldError,
    MatrixOverflowError,
    NonFiniteError,
    NotConvergedError,
    NotPositiveDefiniteError,
    SchemaError,
)
from .lanes import LaneSet
from .objectives import (
    COVERAGE,
    LAMBDA_CLS,
    LAMBDA_REG,
    LAMBDA_SIM,
    LAMBDA_TLIOU,
    R_TUBE,
    TAU_MATCH,
    f1_evaluate,
    gradcheck,
    greedy_match,
    total_loss,
)
from .road import DesignLimits, SurfaceSpec, validate_manifold
from .weights import WeightBundle, init_weights

EXIT_OK, EXIT_FAIL, EXIT_SCHEMA, EXIT_NUMERIC, EXIT_EMPTY, EXIT_DEGENERATE = range(6)
FIXTURE_PREFIX = "fixture:"
THREADS_ENV = "LANEMANIFOLD_THREADS"

NUMERIC_ERRORS = (NotConvergedError, NotPositiveDefiniteError, MatrixOverflowError,
                  NonFiniteError, DisconnectedError, np.linalg.LinAlgError)


class CommandError(Exception):
    def __init__(self, code, message):
        super().__init__(message)
        self.code = code


def fixture_path(name):
    """Filesystem path of a bundled fixture, e.g. ``crest/limits_k60.json``."""
    return Path(str(resources.files("lanemanifold") / "fixtures" / name))


def _resolve(path):
    if path.startswith(FIXTURE_PREFIX):
        return fixture_path(path[len(FIXTURE_PREFIX):])
    return Path(path)


def _read_json(path):
    p = _resolve(path)
    try:
        with open(p) as fh:
            return json.load(fh)
    except FileNotFoundError as exc:
        raise SchemaError(f"{path}: file not found") from exc
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: {exc}") from exc


def _read_lanes(path):
    return LaneSet.from_dict(_read_json(path))


def _dump(doc):
    return json.dumps(doc, sort_keys=True, indent=1, allow_nan=False) + "\n"


def _to_csv(rows):
    if not rows:
        return ""
    header = sorted({k for row in rows for k in row})
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=header, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow({k: json.dumps(v) if isinstance(v, (list, dict)) else v
                         for k, v in row.items()})
    return buf.getvalue()


def write_atomic(path, text):
    """Write via a temporary file in the target directory, then rename."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _emit(args, doc, rows):
    text = _dump(doc) if args.format == "json" else _to_csv(rows)
    if args.out:
        write_atomic(args.out, text)
    else:
        sys.stdout.write(text)


def _finite(x):
    return None if x is None or not np.isfinite(x) else float(x)


# -- commands ----------------------------------------------------------------

def cmd_descriptor(args):
    lanes = _read_lanes(args.input)
    if len(lanes) == 0:
        raise EmptyInputError("lane set has no lanes")
    config = DescriptorConfig(n_clusters=args.clusters, kmeans_iters=args.kmeans_iters,
                              rho=args.rho, d_h=args.d_h, seed=args.seed, ridge=args.ridge,
                              karcher_tol=args.karcher_tol,
                              karcher_max_iter=args.karcher_max_iter)
    if args.weights:
        weights = WeightBundle.from_dict(_read_json(args.weights))
        source = {"source": "file", "path": args.weights}
    else:
        weights = init_weights(args.seed, d=3, rho=args.rho, d_h=args.d_h)
        source = {"source": "seed", "seed": args.seed}
        if args.out:
            wpath = Path(args.out).with_suffix(".weights.json")
            write_atomic(wpath, _dump(weights.to_dict()))
            source["path"] = wpath.name
    result = lane_descriptor(lanes, weights, config)
    meta = config.to_dict()
    meta["n_points"] = int(lanes.n_points)
    meta["n_lanes"] = len(lanes)
    doc = {"command": "descriptor", "config": meta, "weights": source,
           "descriptor": result.descriptor.tolist(), "diagnostics": result.diagnostics}
    rows = [{"index": i, "value": float(x)} for i, x in enumerate(result.descriptor)]
    _emit(args, doc, rows)
    return EXIT_OK


def _loss_flags(args):
    return {"lambda_cls": args.lambda_cls, "lambda_reg": args.lambda_reg,
            "lambda_tliou": args.lambda_tliou, "lambda_sim": args.lambda_sim}


def cmd_loss(args):
    pred, gt = _read_lanes(args.input), _read_lanes(args.gt)
    if len(pred) == 0 and len(gt) == 0:
        raise EmptyInputError("neither prediction nor ground truth has lanes")
    flags = _loss_flags(args)
    records = []
    for r in args.r_tube:
        out = total_loss(pred, gt, r_tube=r, **flags).to_dict()
        out["r_tube"] = r
        records.append(out)
    doc = {"command": "loss", "flags": dict(flags, r_tube=args.r_tube), "records": records}
    rows = [{k: v for k, v in rec.items() if k not in ("gradient", "weights")} for rec in records]
    _emit(args, doc, rows)
    return EXIT_OK


def cmd_eval(args):
    pred, gt = _read_lanes(args.input), _read_lanes(args.gt)
    res = f1_evaluate(pred, gt, tau_match=args.tau_match, coverage=args.coverage)
    flags = {"tau_match": args.tau_match, "coverage": args.coverage}
    doc = {"command": "eval", "flags": flags, "result": res.to_dict()}
    _emit(args, doc, [dict(res.to_dict(), **flags)])
    return EXIT_EMPTY if len(pred) == 0 or len(gt) == 0 else EXIT_OK


def _limits_with_overrides(args):
    doc = _read_json(args.limits)
    if not isinstance(doc, dict):
        raise SchemaError("design limits must be a JSON object")
    for flag, key in (("tau_grade_rate", "tau_grade_rate_per_m"),
                      ("eta_curv_rate", "eta_curv_rate_per_m2"),
                      ("sampling_epsilon", "sampling_epsilon_m"),
                      ("k_min", "k_min_m"), ("r_min", "r_min_m")):
        value = getattr(args, flag)
        if value is not None:
            doc[key] = value
    return DesignLimits.from_dict(doc)


def cmd_validate_road(args):
    surface = SurfaceSpec.from_dict(_read_json(args.surface))
    lanes = _read_lanes(args.lanes)
    limits = _limits_with_overrides(args)
    report = validate_manifold(surface, lanes, limits)
    doc = dict(report.to_dict(), command="validate-road", limits=limits.to_dict())
    _emit(args, doc, [r.to_dict() for r in report.records])
    return EXIT_OK if report.overall else EXIT_FAIL


def _all_coincident(doc):
    try:
        pts = np.concatenate([np.asarray(l["points"], dtype=float).reshape(-1, 3)
                              for l in doc["lanes"]])
    except (KeyError, TypeError, ValueError):
        return False
    return pts.size > 0 and bool(np.all(np.ptp(pts, axis=0) == 0))


def _read_lanes_for_gradcheck(path):
    doc = _read_json(path)
    try:
        return LaneSet.from_dict(doc)
    except SchemaError:
        if isinstance(doc, dict) and _all_coincident(doc):
            raise DegenerateTangentError(f"{path}: all lane points coincide")
        raise


def cmd_gradcheck(args):
    pred, gt = _read_lanes_for_gradcheck(args.input), _read_lanes_for_gradcheck(args.gt)
    if len(pred) == 0 or len(gt) == 0:
        raise EmptyInputError("gradcheck needs at least one lane in each set")
    pairs = greedy_match([[np.mean(np.linalg.norm(p.points[:, [0, 2]] - g.points[:, [0, 2]], axis=1))
                           for g in gt.lanes] for p in pred.lanes])
    records = []
    for r in args.r_tube:
        for i, j in pairs:
            res = gradcheck(pred.lanes[i], gt.lanes[j], r, args.lambda_sim, args.h, args.threshold)
            records.append({"pred": i, "gt": j, "r_tube": r, "max_rel_error": res.max_rel_error,
                            "n_excluded": res.n_excluded, "pass": res.passed,
                            "gradient": res.analytic.tolist()})
    worst = max(rec["max_rel_error"] for rec in records)
    passed = all(rec["pass"] for rec in records)
    doc = {"command": "gradcheck", "max_rel_error": worst, "pass": passed,
           "threshold": args.threshold, "h": args.h, "lambda_sim": args.lambda_sim,
           "records": records}
    _emit(args, doc, [{k: v for k, v in rec.items() if k != "gradient"} for rec in records])
    return EXIT_OK if passed else EXIT_FAIL


# -- parser ------------------------------------------------------------------

def _radii(text):
    try:
        values = [float(x) for x in text.split(",") if x.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"bad radius list {text!r}") from exc
    if not values or any(not (v > 0 and np.isfinite(v)) for v in values):
        raise argparse.ArgumentTypeError("tube radii must be positive")
    return values


def _common(p, inputs=True):
    if inputs:
        p.add_argument("--input", required=True, help="lane set JSON (path or fixture:NAME)")
    p.add_argument("--out", help="output path (default: stdout)")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)


def _loss_args(p):
    p.add_argument("--gt", required=True, help="ground-truth lane set JSON")
    p.add_argument("--r-tube", type=_radii, default=[R_TUBE],
                   help="tube radius in meters, or a comma-separated sweep")
    p.add_argument("--lambda-sim", type=float, default=LAMBDA_SIM)


def build_parser():
    parser = argparse.ArgumentParser(prog="lanemanifold", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("descriptor", help="geometric descriptor of a lane set")
    _common(p)
    p.add_argument("--weights", help="weight bundle JSON; drawn from --seed when absent")
    p.add_argument("--clusters", type=int, default=DescriptorConfig.n_clusters, help="S")
    p.add_argument("--kmeans-iters", type=int, default=DescriptorConfig.kmeans_iters)
    p.add_argument("--rho", type=int, default=DescriptorConfig.rho)
    p.add_argument("--d-h", type=int, default=DescriptorConfig.d_h)
    p.add_argument("--ridge", type=float, default=DescriptorConfig.ridge)
    p.add_argument("--karcher-tol", type=float, default=None)
    p.add_argument("--karcher-max-iter", type=int, default=DescriptorConfig.karcher_max_iter)
    p.set_defaults(func=cmd_descriptor)

    p = sub.add_parser("loss", help="composite lane loss")
    _common(p)
    _loss_args(p)
    p.add_argument("--lambda-cls", type=float, default=LAMBDA_CLS)
    p.add_argument("--lambda-reg", type=float, default=LAMBDA_REG)
    p.add_argument("--lambda-tliou", type=float, default=LAMBDA_TLIOU)
    p.set_defaults(func=cmd_loss)

    p = sub.add_parser("eval", help="F1 and category accuracy")
    _common(p)
    p.add_argument("--gt", required=True)
    p.add_argument("--tau-match", type=float, default=TAU_MATCH)
    p.add_argument("--coverage", type=float, default=COVERAGE)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("validate-road", help="road-manifold regularity report")
    _common(p, inputs=False)
    p.add_argument("--surface", required=True)
    p.add_argument("--lanes", required=True)
    p.add_argument("--limits", required=True)
    p.add_argument("--tau-grade-rate", type=float)
    p.add_argument("--eta-curv-rate", type=float)
    p.add_argument("--sampling-epsilon", type=float)
    p.add_argument("--k-min", type=float)
    p.add_argument("--r-min", type=float)
    p.set_defaults(func=cmd_validate_road)

    p = sub.add_parser("gradcheck", help="analytic vs finite-difference loss gradient")
    _common(p)
    _loss_args(p)
    p.add_argument("--h", type=float, default=1e-5)
    p.add_argument("--threshold", type=float, default=1e-5)
    p.set_defaults(func=cmd_gradcheck)
    return parser


def _exit_code(exc):
    if isinstance(exc, CommandError):
        return exc.code
    if isinstance(exc, EmptyInputError):
        return EXIT_EMPTY
    if isinstance(exc, DegenerateTangentError):
        return EXIT_DEGENERATE
    if isinstance(exc, NUMERIC_ERRORS):
        return EXIT_NUMERIC
    return EXIT_SCHEMA


def _thread_limit():
    value = os.environ.get(THREADS_ENV)
    if not value:
        return None
    try:
        n = int(value)
    except ValueError:
        raise SchemaError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    if n < 1:
        raise SchemaError(f"{THREADS_ENV} must be a positive integer, got {value!r}")
    return n


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        n_threads = _thread_limit()
        if n_threads is None:
            return args.func(args)
        from threadpoolctl import threadpool_limits
        with threadpool_limits(limits=n_threads):
            return args.func(args)
    except (LaneManifoldError, CommandError, np.linalg.LinAlgError, OSError) as exc:
        code = _exit_code(exc)
        record = {"command": args.command, "error": type(exc).__name__,
                  "exit_code": code, "message": str(exc)}
        karcher = getattr(exc, "result", None)
        if karcher is not None:
            record["best_gradient_norm"] = _finite(karcher.final_gradient_norm)
        sys.stderr.write(json.dumps(record, sort_keys=True) + "\n")
        return code


if __name__ == "__main__":
    sys.exit(main())
