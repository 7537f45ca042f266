"""Command-line surface: JSON/CSV I/O around the library modules.

Exit codes: 0 success, 1 domain or data errors (malformed JSON names the
offending field), 2 usage errors.  The environment variable QV_THREADS
caps internal (BLAS-level) parallelism.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from . import embed, energy, extend, verify
from .grids import BOUNDARY, GridFunction, disk_mask, empty_grid, square_mask
from .qspace import MetricKind, QTuple, dist


class DataError(Exception):
    """Input file is malformed or inconsistent; maps to exit code 1."""


def _load_json(path: str):
    try:
        with open(path) as fh:
            return json.load(fh)
    except FileNotFoundError:
        raise DataError(f"cannot open {path}")
    except json.JSONDecodeError as exc:
        raise DataError(f"malformed JSON in {path}: {exc}")


def _field(obj: dict, name: str, path: str):
    if name not in obj:
        raise DataError(f"missing field '{name}' in {path}")
    return obj[name]


def _load_tuple(path: str) -> QTuple:
    obj = _load_json(path)
    try:
        return QTuple(obj)
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad tuple in {path}: {exc}")


def _load_grid(path: str) -> GridFunction:
    obj = _load_json(path)
    for name in ("m", "n", "Q", "shape", "h", "mask", "values"):
        _field(obj, name, path)
    try:
        return GridFunction.from_json(json.dumps(obj))
    except (ValueError, TypeError) as exc:
        raise DataError(f"bad grid function in {path}: {exc}")


def _load_query_csv(path: str) -> np.ndarray:
    try:
        rows = np.loadtxt(path, delimiter=",", ndmin=2)
    except OSError:
        raise DataError(f"cannot open {path}")
    except ValueError as exc:
        raise DataError(f"malformed CSV in {path}: {exc}")
    return rows


def _write(path: str, text: str):
    if path is None or path == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        with open(path, "w") as fh:
            fh.write(text)


def _cmd_dist(args) -> int:
    v = _load_tuple(args.a)
    w = _load_tuple(args.b)
    kind = MetricKind.parse(args.kind)
    value, match = dist(v, w, kind)
    _write(args.out, json.dumps({"value": value, "match": list(match.perm)}))
    return 0


def _cmd_frame(args) -> int:
    K = "auto" if args.k is None else args.k
    frame = embed.build_frame(args.n, args.q, K, seed=args.seed)
    _write(args.out, frame.to_json())
    return 0


def _load_frame(path: str) -> embed.DirectionFrame:
    obj = _load_json(path)
    for name in ("n", "Q", "K", "epsilon", "bases"):
        _field(obj, name, path)
    try:
        return embed.DirectionFrame(obj["n"], obj["Q"], obj["bases"], obj["epsilon"])
    except embed.FrameConstructionError as exc:
        raise DataError(f"bad frame in {path}: {exc}")


def _cmd_embed(args) -> int:
    frame = _load_frame(args.frame)
    v = _load_tuple(args.tuple)
    vec = embed.xi(v, frame)
    _write(args.out, ",".join(repr(float(c)) for c in vec.coords))
    return 0


def _cmd_decode(args) -> int:
    frame = _load_frame(args.frame)
    coords = _load_query_csv(args.infile).reshape(-1)
    hint = _load_tuple(args.hint) if args.hint else None
    v = embed.decode(coords, frame, hint)
    _write(args.out, v.to_text())
    return 0


def _load_boundary_sample(path: str) -> extend.BoundarySample:
    obj = _load_json(path)
    m = _field(obj, "m", path)
    R = _field(obj, "R", path)
    data = _field(obj, "points", path)
    points = []
    for entry in data:
        points.append((np.asarray(_field(entry, "x", path), dtype=float),
                       QTuple(_field(entry, "value", path))))
    try:
        return extend.BoundarySample(points=points, R=R, m=m)
    except ValueError as exc:
        raise DataError(f"bad boundary sample in {path}: {exc}")


def _boundary_sample_json(sample: extend.BoundarySample) -> str:
    return json.dumps(
        {
            "m": sample.m,
            "R": sample.R,
            "points": [
                {"x": loc.tolist(), "value": val.points.tolist()}
                for loc, val in sample.points
            ],
        }
    )


def _cmd_extend(args) -> int:
    if args.mode == "plane":
        f = _load_grid(args.infile)
        out = extend.extend_to_plane(f)
        _write(args.out, out.to_json())
        return 0
    queries = _load_query_csv(args.query)
    if args.mode == "cone":
        sample = _load_boundary_sample(args.infile)
        values = [extend.cone_extend(sample, q).points.tolist() for q in queries]
    else:
        obj = _load_json(args.infile)
        box = _field(obj, "box", args.infile)
        depth = int(obj.get("depth", 6))
        data = [
            (np.asarray(_field(e, "x", args.infile), dtype=float),
             QTuple(_field(e, "value", args.infile)))
            for e in _field(obj, "data", args.infile)
        ]
        ext = extend.WhitneyExtension(data, box, depth)
        values = [ext.evaluate(q).points.tolist() for q in queries]
    _write(args.out, json.dumps(values))
    return 0


def _load_solver_inputs(path: str, resolution: int):
    """Boundary data plus a grid template.

    Accepts either a full grid-function JSON (detected by a ``mask`` field,
    boundary values read off the boundary nodes) or a boundary-curve spec
    ``{"domain": "disk"|"square", "Q", "n", "curve": [{"x", "value"}]}``
    sampled onto a grid of the requested resolution, each boundary node
    taking the nearest curve sample's value.
    """
    obj = _load_json(path)
    if "mask" in obj:
        for name in ("m", "n", "Q", "shape", "h", "values"):
            _field(obj, name, path)
        f = GridFunction.from_json(json.dumps(obj))
        boundary = {idx: f.values[idx] for idx in f.nodes(kinds=(BOUNDARY,))}
        return boundary, f
    domain = _field(obj, "domain", path)
    Q = _field(obj, "Q", path)
    n = _field(obj, "n", path)
    curve = _field(obj, "curve", path)
    if resolution is None:
        raise DataError("--grid is required with a boundary-curve spec")
    if domain == "disk":
        mask = disk_mask(resolution)
        m = 2
    elif domain == "square":
        mask = square_mask(resolution, int(obj.get("m", 2)))
        m = int(obj.get("m", 2))
    else:
        raise DataError(f"unknown domain {domain!r} in {path}")
    grid = empty_grid(m, n, Q, resolution, mask)
    locs = np.array([np.asarray(_field(e, "x", path), dtype=float) for e in curve])
    vals = [np.asarray(_field(e, "value", path), dtype=float) for e in curve]
    boundary = {}
    for idx in grid.nodes(kinds=(BOUNDARY,)):
        x = grid.node_coords(idx)
        j = int(np.argmin(np.linalg.norm(locs - x[None, :], axis=1)))
        boundary[idx] = vals[j]
    return boundary, grid


def _cmd_solve(args) -> int:
    boundary, grid = _load_solver_inputs(args.boundary, args.grid)
    solution, report, history = energy.solve_dirichlet(
        boundary, grid, args.p, tol=args.tol, seed=args.seed,
        restarts=args.restarts,
    )
    _write(args.out, solution.to_json())
    if args.history:
        lines = ["iteration,total_energy"]
        lines += [f"{i},{e!r}" for i, e in enumerate(history)]
        _write(args.history, "\n".join(lines) + "\n")
    sys.stdout.write(
        json.dumps({"energy": report.total, "iterations": report.iterations,
                    "converged": report.converged}) + "\n"
    )
    return 0


def _cmd_energy(args) -> int:
    f = _load_grid(args.infile)
    report = energy.discrete_energy(f, args.p)
    _write(args.out, json.dumps({"total": report.total, "p": report.p,
                                 "edges": len(report.per_edge)}))
    return 0


def _cmd_trace(args) -> int:
    f = _load_grid(args.infile)
    sample = energy.trace(f)
    _write(args.out, _boundary_sample_json(sample))
    return 0


def _cmd_verify(args) -> int:
    if args.config:
        cfg = verify.CheckConfig.from_json(open(args.config).read())
    else:
        cfg = verify.CheckConfig()
    if args.seed is not None:
        cfg.seed = args.seed
    reports = verify.run_all(cfg)
    payload = json.dumps([r.to_dict() for r in reports], indent=2)
    if args.report:
        _write(args.report, payload)
    failures = 0
    for r in reports:
        status = "pass" if r.failures == 0 else "FAIL"
        sys.stdout.write(
            f"{r.name}: {status} ({r.trials} trials, {r.failures} failures, "
            f"ratio {r.worst_ratio:.6g})\n"
        )
        failures += r.failures
    return 0 if failures == 0 else 1


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="qv", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("dist", help="assignment distance between two tuples")
    p.add_argument("--kind", default="g2", help="g1, g2 or ginf")
    p.add_argument("--a", required=True)
    p.add_argument("--b", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_dist)

    p = sub.add_parser("frame", help="build a direction frame")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--q", type=int, required=True)
    p.add_argument("--k", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_frame)

    p = sub.add_parser("embed", help="embed a tuple through a frame")
    p.add_argument("--frame", required=True)
    p.add_argument("--tuple", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_embed)

    p = sub.add_parser("decode", help="approximately invert an embedded vector")
    p.add_argument("--frame", required=True)
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--hint", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_decode)

    p = sub.add_parser("extend", help="evaluate an extension operator")
    p.add_argument("mode", choices=["cone", "whitney", "plane"])
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--query", default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_extend)

    p = sub.add_parser("solve", help="minimize the discrete p-energy")
    p.add_argument("--boundary", required=True)
    p.add_argument("--grid", type=int, default=None)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--restarts", type=int, default=3)
    p.add_argument("--out", default=None)
    p.add_argument("--history", default=None)
    p.set_defaults(func=_cmd_solve)

    p = sub.add_parser("energy", help="discrete p-energy of a grid function")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--p", type=float, default=2.0)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_energy)

    p = sub.add_parser("trace", help="boundary restriction of a grid function")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out", default=None)
    p.set_defaults(func=_cmd_trace)

    p = sub.add_parser("verify", help="run the property harness")
    p.add_argument("--config", default=None)
    p.add_argument("--report", default=None)
    p.add_argument("--seed", type=int, default=None)
    p.set_defaults(func=_cmd_verify)

    return parser


def _apply_thread_cap():
    cap = os.environ.get("QV_THREADS")
    if not cap:
        return
    try:
        n = max(1, int(cap))
    except ValueError:
        return
    for var in ("OMP_NUM_THREADS", "OPENBLAS_NUM_THREADS", "MKL_NUM_THREADS"):
        os.environ.setdefault(var, str(n))
    try:
        import threadpoolctl

        threadpoolctl.threadpool_limits(n)
    except ImportError:
        pass


def main(argv=None) -> int:
    _apply_thread_cap()
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except DataError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1
    except (ValueError, ArithmeticError, OSError) as exc:
        sys.stderr.write(f"error: {exc}\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
