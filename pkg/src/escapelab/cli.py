"""Command-line front end.

Exit codes: 0 pass, 1 verification failure, 2 usage error, 3 construction
failure.  Every output file embeds a run manifest; JSON is UTF-8 with sorted
keys.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .classify import BOUNDED, CATEGORIES, FAST, FLAT_MODERATE, FLAT_SLOW, MODERATE, SLOW, UNIFORM_SLOW
from .classify import ClassifyParams, classify
from .construction import (
    FAMILIES,
    ConstructionConfig,
    ConstructionError,
    construct_point,
    default_rows,
    distortion_chain_audit,
    mcmullen_audit,
    mcmullen_from_itinerary,
    upper_bound_audit,
)
from .expmap import ExpMap
from .geometry import DEFAULT_SEED, HalfAnnulus, preimage_rectangle, sample_lemma_tuple, verify_density
from .geometry import HypothesisViolated, distortion_exact
from .itinerary import SEQUENCES, AnnularPartition, check_predicates, compute_itinerary, compute_R0

DEFAULT_BUDGET = 10**8

GRAY = {
    BOUNDED: 0,
    MODERATE: 48,
    FLAT_MODERATE: 96,
    SLOW: 128,
    FLAT_SLOW: 168,
    UNIFORM_SLOW: 208,
    FAST: 255,
}


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


# --------------------------------------------------------------------------
# argument helpers


def parse_complex(text: str) -> complex:
    parts = text.split(",")
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}")
    try:
        return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected 're,im', got {text!r}") from None


def parse_floats(count: int):
    def parse(text: str):
        try:
            vals = [float(v) for v in text.split(",")]
        except ValueError:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers") from None
        if len(vals) != count:
            raise argparse.ArgumentTypeError(f"expected {count} comma-separated numbers")
        return vals

    return parse


def default_seed() -> int:
    env = os.environ.get("ESCAPELAB_SEED")
    if env is None:
        return DEFAULT_SEED
    try:
        return int(env)
    except ValueError:
        raise UsageError(f"ESCAPELAB_SEED must be an integer, got {env!r}") from None


def make_map(args) -> ExpMap:
    if args.lam == 0:
        raise UsageError("lambda must be nonzero")
    try:
        return ExpMap(args.lam, args.precision)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def manifest(args, argv) -> dict:
    return {
        "command": ["escapelab", *argv],
        "seed": args.seed,
        "lambda": [args.lam.real, args.lam.imag],
        "precision": args.precision,
        "tool_version": __version__,
        # wall time would break byte-identical reruns, so it is opt-in
        "wall_time": round(time.monotonic() - args.started, 6) if args.timing else None,
    }


def dump_json(payload: dict, out) -> None:
    text = json.dumps(_jsonable(payload), sort_keys=True, indent=2, ensure_ascii=False) + "\n"
    if out is None or str(out) == "-":
        sys.stdout.write(text)
    else:
        Path(out).write_text(text, encoding="utf-8")


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.floating,)):
        obj = float(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    if isinstance(obj, float) and not math.isfinite(obj):
        return None if math.isnan(obj) else ("inf" if obj > 0 else "-inf")
    return obj


# --------------------------------------------------------------------------
# itinerary


def cmd_itinerary(args, argv) -> int:
    fmap = make_map(args)
    if not args.base > 1:
        raise UsageError("base must exceed 1")
    if args.steps < 0:
        raise UsageError("steps must be non-negative")
    report = compute_itinerary(fmap, AnnularPartition(args.base), args.z, args.steps)
    payload = {"manifest": manifest(args, argv), "base": args.base, "z": [args.z.real, args.z.imag]}
    payload["report"] = report.as_dict()
    dump_json(payload, args.out)
    return 0


# --------------------------------------------------------------------------
# construct


def cmd_construct(args, argv) -> int:
    if args.depth < 1:
        raise UsageError("depth must be at least 1")
    fmap = make_map(args)
    t = SEQUENCES[args.seq](args.depth + 1)
    try:
        base = args.base if args.base is not None else compute_R0(fmap, args.s0)
        config = ConstructionConfig(base, t, args.tau0, args.s0, args.precision)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if not args.force:
        try:
            config.check_base(fmap)
        except ValueError as exc:
            raise UsageError(f"{exc} (use --force to override)") from None
    failures = check_predicates(t).admissible_failures
    if failures:
        print(f"warning: itinerary is not admissible at indices {failures}", file=sys.stderr)
    try:
        rows = args.rows if args.rows is not None else default_rows(fmap, config, args.depth, args.row_policy)
        if len(rows) != args.depth:
            raise UsageError(f"--rows needs {args.depth} entries")
        chain = construct_point(fmap, config, rows, args.seed_point)
    except ConstructionError as exc:
        print(f"escapelab: construction failed at depth {exc.step}: {exc}", file=sys.stderr)
        return 3
    payload = chain.as_dict()
    payload["manifest"] = manifest(args, argv)
    payload["config"] = config.as_dict()
    dump_json(payload, args.out)
    return 0


# --------------------------------------------------------------------------
# classify-grid


def _classify_rows(task):
    lam, precision, horizon, params, cells = task
    fmap = ExpMap(lam, precision)
    out = []
    for z in cells:
        cert = classify(fmap, z, horizon, params)
        out.append((cert.category, cert.N, cert.R))
    return out


def grid_cells(window, width: int, height: int) -> list[complex]:
    """Cell centres, row-major from the top row (largest Im) down."""
    x0, x1, y0, y1 = window
    dx = (x1 - x0) / width
    dy = (y1 - y0) / height
    return [
        complex(x0 + (i + 0.5) * dx, y1 - (j + 0.5) * dy) for j in range(height) for i in range(width)
    ]


def cmd_classify_grid(args, argv) -> int:
    fmap = make_map(args)
    x0, x1, y0, y1 = args.window
    width, height = (int(v) for v in args.resolution)
    if not (x0 < x1 and y0 < y1):
        raise UsageError("window needs x0 < x1 and y0 < y1")
    if width < 1 or height < 1:
        raise UsageError("resolution must be positive")
    if width * height > args.budget:
        raise UsageError(f"{width * height} cells exceed the budget of {args.budget}")
    if args.horizon < 1:
        raise UsageError("horizon must be at least 1")

    params = ClassifyParams(fast_base=args.fast_base)
    cells = grid_cells(args.window, width, height)
    chunks = [cells[j * width:(j + 1) * width] for j in range(height)]
    tasks = [(fmap.lam, fmap.precision_bits, args.horizon, params, c) for c in chunks]
    jobs = args.jobs or os.cpu_count() or 1
    if jobs == 1 or len(tasks) == 1:
        results = [_classify_rows(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_classify_rows, tasks))
    flat = [r for row in results for r in row]

    man = manifest(args, argv)
    man_line = json.dumps(_jsonable(man), sort_keys=True)
    prefix = Path(args.out or args.prefix)
    lines = [f"# manifest: {man_line}", "re,im,category,N,R"]
    for z, (cat, N, R) in zip(cells, flat):
        lines.append(f"{z.real!r},{z.imag!r},{cat},{'' if N is None else N},{'' if R is None else repr(R)}")
    prefix.with_suffix(".csv").write_text("\n".join(lines) + "\n", encoding="utf-8")

    levels = np.array([GRAY[c] for c, _, _ in flat], dtype=np.uint8).reshape(height, width)
    legend = " ".join(f"{k}={v}" for k, v in GRAY.items())
    header = (
        f"P5\n# manifest: {man_line}\n# created: {time.strftime('%Y-%m-%dT%H:%M:%S')}\n"
        f"# gray levels: {legend}\n{width} {height}\n255\n"
    )
    prefix.with_suffix(".pgm").write_bytes(header.encode("ascii", "replace") + levels.tobytes())

    counts = {c: sum(1 for r in flat if r[0] == c) for c in CATEGORIES}
    print(json.dumps({"cells": len(flat), "counts": counts}, sort_keys=True))
    if args.figures:
        from . import plotting

        Path(args.figures).mkdir(parents=True, exist_ok=True)
        plotting.category_grid(levels, args.window, GRAY, Path(args.figures) / "categories.png")
    return 0


# --------------------------------------------------------------------------
# verify


def suite_density(args, fmap_unused=None) -> dict:
    rng = np.random.default_rng(args.seed)
    checks, exact, bound = [], [], []
    for i in range(args.trials):
        lam, s1, s2 = sample_lemma_tuple(rng)
        rep = verify_density(ExpMap(lam), s1, s2, args.mc_samples, args.seed + i)
        rep["tuple"] = {"lambda": [lam.real, lam.imag], "S1": [s1.r1, s1.r2], "S2": [s2.r1, s2.r2]}
        rep["slack"] = None if rep["bound"] is None else rep["exact_density"] - rep["bound"]
        checks.append(rep)
        if rep["bound"] is not None:
            exact.append(rep["exact_density"])
            bound.append(rep["bound"])
    slacks = [c["slack"] for c in checks if c["slack"] is not None]
    failed = [c["tuple"] for c in checks if not c["pass"]]
    out = {
        "trials": args.trials,
        "min_slack": min(slacks) if slacks else None,
        "failed": failed,
        "checks": checks,
        "pass": not failed,
    }
    if args.figures and exact:
        from . import plotting

        plotting.density_sweep(exact, bound, Path(args.figures) / "density.png")
    return out


def suite_distortion(args, fmap: ExpMap) -> dict:
    checks = []
    # single step: preimage rectangle of H(e, e^2) has distortion e^2/e
    rect = preimage_rectangle(fmap, HalfAnnulus(math.e, math.e**2), 0)
    single = math.exp(rect.re_max - rect.re_min)
    exact = distortion_exact(math.e, math.e**2)
    checks.append({"name": "single_step", "value": single, "expected": exact,
                   "pass": abs(single / exact - 1) < 1e-9})
    base = args.base if args.base is not None else compute_R0(fmap, args.s0)
    depth = args.depth if args.depth is not None else 5
    t = SEQUENCES[args.seq](depth + 1)
    config = ConstructionConfig(base, t, args.tau0, args.s0, args.precision)
    rows = default_rows(fmap, config, depth)
    for d in range(depth + 1):
        chain = construct_point(fmap, config, rows[:d])
        try:
            audit = distortion_chain_audit(fmap, chain, args.tau0, args.s0)
            checks.append({"name": f"chain_depth_{d}", "value": audit.value, "bound": audit.bound,
                           "pass": audit.ok})
        except HypothesisViolated as exc:
            checks.append({"name": f"chain_depth_{d}", "error": str(exc), "pass": False})
    return {"R": base, "tau0": args.tau0, "checks": checks, "pass": all(c["pass"] for c in checks)}


def suite_mcmullen(args, fmap: ExpMap) -> dict:
    base = args.base if args.base is not None else compute_R0(fmap, args.s0)
    n = args.depth if args.depth is not None else 10_000
    t = SEQUENCES[args.seq](n + 1)
    audit = mcmullen_audit(base, t, args.tau0, n)
    res = mcmullen_from_itinerary(base, t, args.tau0, n)
    doubled = mcmullen_from_itinerary(base, t, 2 * args.tau0, n).value
    audit["verdicts"].update(
        {
            "value": res.value,
            "distance_to_one": abs(res.value - 1),
            "tau0_doubled_shift": abs(doubled - res.value),
            "pass": abs(res.value - 1) < 0.05 and abs(doubled - res.value) < 0.01,
        }
    )
    audit["pass"] = audit["verdicts"]["pass"]
    if args.figures:
        from . import plotting

        plotting.running_bound(res.running, Path(args.figures) / "mcmullen.png")
    return audit


def suite_upperbound(args, fmap_unused=None) -> dict:
    family = FAMILIES[args.family]()
    audit = upper_bound_audit(family, args.p, args.epsilon, (args.n_min, args.n_max))
    ns = np.arange(args.n_min, args.n_max + 1)
    if args.figures:
        from . import plotting

        plotting.upper_audit(ns, audit["log_q"], audit["ratio"], Path(args.figures) / "upperbound.png")
    audit.pop("log_q")
    audit.pop("ratio")
    return audit


SUITES = {
    "density": suite_density,
    "distortion": suite_distortion,
    "mcmullen": suite_mcmullen,
    "upperbound": suite_upperbound,
}


def cmd_verify(args, argv) -> int:
    fmap = make_map(args)
    if args.figures:
        Path(args.figures).mkdir(parents=True, exist_ok=True)
    names = list(SUITES) if args.suite == "all" else [args.suite]
    results = {name: SUITES[name](args, fmap) for name in names}
    ok = all(r["pass"] for r in results.values())
    dump_json({"manifest": manifest(args, argv), "suites": results, "pass": ok}, args.out)
    for name, r in results.items():
        print(f"{name}: {'PASS' if r['pass'] else 'FAIL'}", file=sys.stderr)
        if name == "density" and r["failed"]:
            print(f"  failing tuple: {r['failed'][0]}", file=sys.stderr)
    return 0 if ok else 1


# --------------------------------------------------------------------------
# parser


def build_parser() -> argparse.ArgumentParser:
    common = _Parser(add_help=False)
    common.add_argument("--lambda", dest="lam", type=parse_complex, default=complex(1, 0),
                        help="map parameter as 're,im' (default 1,0)")
    common.add_argument("--precision", type=int, default=None,
                        help="working precision in bits (default 53; 256 for construct)")
    common.add_argument("--seed", type=int, default=None, help="RNG seed (default: $ESCAPELAB_SEED or built-in)")
    common.add_argument("--timing", action="store_true", help="record wall time in the manifest")
    common.add_argument("--out", "-o", default=None, help="output path ('-' or omitted: stdout)")

    parser = _Parser(prog="escapelab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("itinerary", parents=[common], help="annular itinerary of one orbit")
    p.add_argument("--base", type=float, required=True)
    p.add_argument("--z", type=parse_complex, required=True)
    p.add_argument("--steps", type=int, required=True)
    p.set_defaults(func=cmd_itinerary)

    p = sub.add_parser("construct", parents=[common], help="build a point with a prescribed itinerary")
    p.add_argument("--seq", choices=sorted(SEQUENCES), default="linear")
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--base", type=float, default=None, help="annulus base R (default: minimal R0)")
    p.add_argument("--tau0", type=float, default=2.0)
    p.add_argument("--s0", type=float, default=0.1)
    p.add_argument("--rows", type=lambda s: [int(v) for v in s.split(",")], default=None)
    p.add_argument("--row-policy", choices=["middle", "inner", "outer"], default="middle")
    p.add_argument("--seed-point", type=parse_complex, default=None)
    p.add_argument("--force", action="store_true", help="allow R below R0")
    p.set_defaults(func=cmd_construct)

    p = sub.add_parser("classify-grid", parents=[common], help="classify a grid of starting points")
    p.add_argument("--window", type=parse_floats(4), required=True, help="x0,x1,y0,y1")
    p.add_argument("--resolution", type=parse_floats(2), required=True, help="width,height")
    p.add_argument("--horizon", type=int, default=50)
    p.add_argument("--fast-base", type=float, default=None)
    p.add_argument("--jobs", type=int, default=0, help="worker processes (default: all cores)")
    p.add_argument("--budget", type=int, default=DEFAULT_BUDGET)
    p.add_argument("--figures", default=None, help="directory for PNG figures")
    p.add_argument("--prefix", default="grid", help="output path prefix for .csv and .pgm")
    p.set_defaults(func=cmd_classify_grid)

    p = sub.add_parser("verify", parents=[common], help="run a verification suite")
    p.add_argument("suite", choices=[*SUITES, "all"])
    p.add_argument("--trials", type=int, default=200)
    p.add_argument("--mc-samples", type=int, default=0)
    p.add_argument("--seq", choices=sorted(SEQUENCES), default="linear")
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--base", type=float, default=None)
    p.add_argument("--tau0", type=float, default=2.0)
    p.add_argument("--s0", type=float, default=0.1)
    p.add_argument("--family", choices=sorted(FAMILIES), default="ghdef")
    p.add_argument("--p", type=int, default=1)
    p.add_argument("--epsilon", type=float, default=0.5)
    p.add_argument("--n-min", type=int, default=100)
    p.add_argument("--n-max", type=int, default=10_000)
    p.add_argument("--figures", default=None, help="directory for PNG figures")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        args.started = time.monotonic()
        if args.seed is None:
            args.seed = default_seed()
        if args.precision is None:
            args.precision = 256 if args.command == "construct" else 53
        return args.func(args, argv)
    except UsageError as exc:
        print(f"escapelab: error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
