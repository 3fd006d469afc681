"""Command-line front end: ``conclab <subcommand> [flags]``.

Exit codes: 0 success, 1 a checked bound or certificate failed, 2 usage error.
Every subcommand is deterministic given ``--seed``.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys

import numpy as np

from . import _io
from ._rng import substream
from .concentration import IncompatibleFunctionError, empirical_tail, estimate_median, get_function
from .curvature import implication_check, inductive_identity_check, random_frames, ricci_floor_scan, sectional_curvature
from .finder import (
    DEFAULT_MAX_DRAWS,
    DenseValidationError,
    MaxDrawsExceededError,
    NoAdmissibleDimensionError,
    disintegration_check,
    find_submanifold,
)
from .geometry import GeodesicSubmanifoldSpec, GeometryError, parse_model
from .nets import (
    DEFAULT_STOP_AFTER,
    BoundPreconditionError,
    build_net,
    cardinality_bound_closed,
    lemma3_chain_check,
    verify_covering,
)

EXIT_OK, EXIT_FAILED, EXIT_USAGE = 0, 1, 2

BOUNDS_HEADER = ["m", "delta", "K", "integral_ratio", "gamma_bound", "linear_bound", "closed_bound", "ordered"]


class UsageError(Exception):
    pass


def _int_list(text: str) -> list[int]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if ":" in part:
            lo, hi = part.split(":")
            out.extend(range(int(lo), int(hi) + 1))
        elif part:
            out.append(int(part))
    return out


def _float_list(text: str) -> list[float]:
    return [float(p) for p in text.split(",") if p.strip()]


def _write(args, text: str) -> None:
    if not text.endswith("\n"):
        text += "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def _csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_cell(v) for v in row])
    return buf.getvalue()


def _cell(v):
    if isinstance(v, (bool, np.bool_)):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return "inf" if math.isinf(v) else _io.format_float(v)
    return v


def _require_epsilon(args) -> float:
    if args.epsilon is None or args.epsilon <= 0:
        raise UsageError("--epsilon must be positive")
    return args.epsilon


# ---------------------------------------------------------------------------
# subcommands


def cmd_net(args) -> int:
    model = parse_model(args.model)
    if args.delta is None or not 0 < args.delta <= model.diameter:
        raise UsageError(f"--delta must lie in (0, {model.diameter:.17g}] for {model}")
    net = build_net(model, args.delta, substream(args.seed, "net"), stop_after=args.stop_after)
    net.build_seed = args.seed
    cover = verify_covering(net, args.samples, substream(args.seed, "validation"))
    bound = cardinality_bound_closed(model.real_dim, args.delta, model.curvature_floor_K) \
        if args.delta * math.sqrt(model.curvature_floor_K) <= math.pi else math.inf
    ok = net.N <= bound
    if args.format == "csv":
        pts = net.points
        if model.is_complex:
            cols = [f"{p}{i}" for i in range(model.ambient_dim) for p in ("re", "im")]
            flat = np.stack([pts.real, pts.imag], axis=-1).reshape(len(pts), -1)
        else:
            cols = [f"x{i}" for i in range(model.ambient_dim)]
            flat = pts
        _write(args, _csv_text(["index"] + cols, [[i, *map(float, row)] for i, row in enumerate(flat)]))
    else:
        _write(args, _io.dumps({
            "v": _io.SCHEMA_VERSION,
            "net": net.to_dict(),
            "N": net.N,
            "covering": cover.to_dict(),
            "cardinality_bound": bound,
            "within_bound": ok,
        }, indent=1))
    return EXIT_OK if ok else EXIT_FAILED


def cmd_bounds(args) -> int:
    rows = []
    for m in _int_list(args.m_range):
        for delta in _float_list(args.delta_range):
            chk = lemma3_chain_check(m, delta, args.curvature)
            rows.append([m, delta, args.curvature, *chk.values, chk.passed])
    if args.format == "csv":
        _write(args, _csv_text(BOUNDS_HEADER, rows))
    else:
        _write(args, _io.dumps({
            "v": _io.SCHEMA_VERSION,
            "columns": BOUNDS_HEADER,
            "rows": [dict(zip(BOUNDS_HEADER, r)) for r in rows],
        }, indent=1))
    return EXIT_OK if all(r[-1] for r in rows) else EXIT_FAILED


def _default_function(model) -> str:
    return "coord" if model.family.value == "sphere" else "dist"


def cmd_tail(args) -> int:
    model = parse_model(args.model)
    eps = args.epsilon
    if eps is None or eps < 0:
        raise UsageError("--epsilon must be non-negative")
    label = args.function or _default_function(model)
    T = get_function(label, model, substream(args.seed, "catalog"))
    if args.median is not None:
        m_T, ci = args.median, (args.median, args.median)
    else:
        est = estimate_median(T, model, args.samples, substream(args.seed, "median"))
        m_T, ci = est.median, est.ci
    report = empirical_tail(
        T, model, m_T, eps, args.samples, substream(args.seed, "tail"), median_ci=ci,
        keep_values=args.format == "csv",
    )
    report.seed = args.seed
    if args.format == "csv":
        buf = io.StringIO()
        report.write_csv(buf)
        _write(args, buf.getvalue())
    else:
        _write(args, report.to_json(indent=1))
    return EXIT_OK if report.passed else EXIT_FAILED


def cmd_find(args) -> int:
    model = parse_model(args.model)
    eps = _require_epsilon(args)
    label = args.function or _default_function(model)
    T = get_function(label, model, substream(args.seed, "catalog"))
    try:
        cert = find_submanifold(
            T, model, eps, args.seed, args.max_draws,
            n_median=args.samples, stop_after=args.stop_after,
            n_functions=2 if args.two_functions else 1,
        )
    except (MaxDrawsExceededError, DenseValidationError) as exc:
        print(f"conclab find: {exc}", file=sys.stderr)
        return EXIT_FAILED
    _write(args, cert.to_json(indent=1))
    return EXIT_OK if cert.valid else EXIT_FAILED


def _test_function(name: str, model, args):
    if name == "one":
        return lambda x: np.ones(np.shape(x)[:-1])
    if name == "coord-sq":
        return lambda x: np.abs(x[..., 0]) ** 2
    if name == "indicator":
        eps = _require_epsilon(args)
        T = get_function(args.function or _default_function(model), model, substream(args.seed, "catalog"))
        med = estimate_median(T, model, args.samples, substream(args.seed, "median"))
        return lambda x: (np.abs(T(x) - med.median) <= eps / 2).astype(float)
    raise UsageError(f"unknown test function {name!r}; choose one, coord-sq or indicator")


def cmd_disintegrate(args) -> int:
    model = parse_model(args.model)
    spec = GeodesicSubmanifoldSpec.parse(args.sub, model)
    u = _test_function(args.test, model, args)
    rep = disintegration_check(u, model, spec, args.outer, args.inner, substream(args.seed, "disintegrate"))
    _write(args, _io.dumps({
        "v": _io.SCHEMA_VERSION,
        "model": model.designator,
        "submanifold": spec.designator,
        "test_function": args.test,
        "seed": args.seed,
        **rep.to_dict(),
    }, indent=1))
    return EXIT_OK if rep.passed else EXIT_FAILED


def cmd_curvature(args) -> int:
    model = parse_model(args.model)
    ms = _int_list(args.m) if args.m else sorted({2, min(4, model.real_dim), model.real_dim})
    scans = []
    ok = True
    for m in ms:
        if not 2 <= m <= model.real_dim:
            raise UsageError(f"--m values must lie in [2, {model.real_dim}] for {model}")
        scan = ricci_floor_scan(model, m, args.samples, substream(args.seed, "scan", m))
        ok &= scan.passed
        scans.append(scan.to_dict())
    planes = random_frames(model, 2, args.samples, substream(args.seed, "planes"))
    sec = sectional_curvature(model, planes, check=False)
    sec_ok = bool(np.all(sec >= model.curvature_floor_K - 1e-9) and np.all(sec <= model.curvature_ceiling + 1e-9))
    identity = {}
    if model.real_dim >= 3:
        m_id = min(3, model.real_dim - 1)
        frames = random_frames(model, m_id + 1, min(args.samples, 1000), substream(args.seed, "identity"))
        res = inductive_identity_check(model, frames)
        impl = implication_check(model, frames)
        identity = {"m": m_id, "frames": len(res), "max_residual": float(np.max(res)),
                    "implication_holds": bool(np.all(impl))}
        ok &= identity["max_residual"] < 1e-9 and identity["implication_holds"]
    ok &= sec_ok
    _write(args, _io.dumps({
        "v": _io.SCHEMA_VERSION,
        "model": model.designator,
        "seed": args.seed,
        "curvature_floor_K": model.curvature_floor_K,
        "sectional": {"samples": args.samples, "min": float(np.min(sec)), "max": float(np.max(sec)),
                      "within_range": sec_ok},
        "ricci_scans": scans,
        "inductive_identity": identity,
    }, indent=1))
    return EXIT_OK if ok else EXIT_FAILED


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="conclab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, samples=10_000, fmt=("json",)):
        p.add_argument("--model", default="sphere:2", help="sphere:<n>, rp:<n> or cp:<n>")
        p.add_argument("--seed", type=int, default=0)
        p.add_argument("--samples", type=int, default=samples)
        p.add_argument("--out", default=None, help="write here instead of stdout")
        p.add_argument("--format", choices=fmt, default=fmt[0])

    p = sub.add_parser("net", help="build a delta-net and check its covering and size")
    common(p, fmt=("json", "csv"))
    p.add_argument("--delta", type=float)
    p.add_argument("--stop-after", type=int, default=DEFAULT_STOP_AFTER)
    p.set_defaults(func=cmd_net)

    p = sub.add_parser("bounds", help="tabulate the net-size bound chain")
    p.add_argument("--m-range", default="1:30", help="e.g. 1:30,100")
    p.add_argument("--delta-range", "--delta", dest="delta_range", default="0.1,0.3,0.5,1.0")
    p.add_argument("--curvature", type=float, default=1.0, help="curvature floor K")
    p.add_argument("--out", default=None)
    p.add_argument("--format", choices=("csv", "json"), default="csv")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("tail", help="empirical concentration tail against the Ricci bound")
    common(p, samples=100_000, fmt=("json", "csv"))
    p.add_argument("--epsilon", type=float)
    p.add_argument("--function", default=None)
    p.add_argument("--median", type=float, default=None, help="use this median instead of estimating it")
    p.set_defaults(func=cmd_tail)

    p = sub.add_parser("find", help="search for a submanifold where the function is nearly constant")
    common(p)
    p.add_argument("--epsilon", type=float)
    p.add_argument("--function", default=None)
    p.add_argument("--max-draws", type=int, default=DEFAULT_MAX_DRAWS)
    p.add_argument("--stop-after", type=int, default=DEFAULT_STOP_AFTER)
    p.add_argument("--two-functions", action="store_true",
                   help="union bound for two functions (2N in the success condition)")
    p.set_defaults(func=cmd_find)

    p = sub.add_parser("disintegrate", help="ambient mean versus mean over random submanifolds")
    common(p)
    p.add_argument("--sub", default="coord:1", help="coord:<k> or real (cp only)")
    p.add_argument("--test", default="coord-sq", help="one, coord-sq or indicator")
    p.add_argument("--function", default=None, help="function for --test indicator")
    p.add_argument("--epsilon", type=float)
    p.add_argument("--outer", type=int, default=500)
    p.add_argument("--inner", type=int, default=500)
    p.set_defaults(func=cmd_disintegrate)

    p = sub.add_parser("curvature", help="sectional and m-Ricci curvature scans")
    common(p)
    p.add_argument("--m", default=None, help="frame sizes, e.g. 2,4,6 (default 2, 4, real dim)")
    p.set_defaults(func=cmd_curvature)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "samples", 1) is not None and getattr(args, "samples", 1) < 1:
        parser.error("--samples must be >= 1")
    try:
        return args.func(args)
    except BrokenPipeError:
        # reader went away (e.g. piped into head); silence the flush at exit
        os.dup2(os.open(os.devnull, os.O_WRONLY), sys.stdout.fileno())
        return EXIT_OK
    except (UsageError, GeometryError, BoundPreconditionError, NoAdmissibleDimensionError,
            IncompatibleFunctionError, KeyError, ValueError) as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"conclab {args.command}: {msg}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
