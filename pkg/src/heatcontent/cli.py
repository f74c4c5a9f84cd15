"""Command-line front end: ``heatcontent compute|verify|fit|sweep|replay``."""

from __future__ import annotations

import argparse
import contextlib
import json
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__
from .asymptotics import (fit_perimeter_coefficient, h3_check_ball, horn_exponent, is_decreasing_to_zero,
                          lp_convergence_check)
from .bounds import (BoundReport, format_table, report_sort_key, verify_geometric_props, verify_main_theorem,
                     verify_mu_sandwich, verify_nu_sandwich, verify_pointwise_lemmas, verify_subadditivity,
                     verify_time_scaling, verify_trivial_bounds)
from .content import HeatCurve, TimeGrid, heat_curve
from .estimate import seed_sequence
from .geometry import Ball, Horn, ShapeError, shape_from_dict, shape_to_dict

EXIT_OK = 0
EXIT_FAIL = 1
EXIT_USAGE = 2

SUITES = ("main", "mu", "nu", "scaling", "trivial", "subadd", "geom", "lemmas")


class UsageError(Exception):
    """Bad flags, files or shape documents (exit status 2)."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _default_jobs() -> int:
    raw = os.environ.get("HEATCONTENT_JOBS")
    if raw is None:
        return 1
    try:
        jobs = int(raw)
    except ValueError:
        raise UsageError(f"HEATCONTENT_JOBS must be an integer, got {raw!r}")
    if jobs < 1:
        raise UsageError("HEATCONTENT_JOBS must be at least 1")
    return jobs


def _grid_flags(p, tmin, tmax, points):
    p.add_argument("--tmin", type=float, default=tmin)
    p.add_argument("--tmax", type=float, default=tmax)
    p.add_argument("--points", type=int, default=points)
    p.add_argument("--spacing", choices=("log", "linear"), default="log")


def _mc_flags(p):
    p.add_argument("--samples", type=int, default=1 << 20)
    p.add_argument("--seed", type=int, default=0)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="heatcontent", description="Heat content of open sets: curves, bound checks, fits.")
    parser.add_argument("--version", action="version", version=f"heatcontent {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("compute", help="evaluate H or F on a time grid")
    p.add_argument("shape", help="shape JSON file")
    p.add_argument("--quantity", choices=("H", "F"), default="H")
    _grid_flags(p, 1e-4, 1e-1, 24)
    p.add_argument("--method", choices=("auto", "exact", "quadrature", "mc"), default="auto")
    _mc_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("verify", help="check the explicit inequalities")
    p.add_argument("shape")
    p.add_argument("--suite", choices=SUITES + ("all",), default="all")
    _grid_flags(p, 1e-3, 1e-1, 8)
    _mc_flags(p)
    p.add_argument("--pairs", type=int, default=20, help="random (s, t) pairs for subadd")
    p.add_argument("--probes", type=int, default=50, help="probe points for lemmas")
    p.add_argument("--out", required=True)

    p = sub.add_parser("fit", help="fit small-t coefficients or exponents")
    p.add_argument("shape")
    p.add_argument("--curve", help="curve CSV from 'compute' (default: compute one)")
    p.add_argument("--quantity", choices=("H", "F"), default="H", help="quantity stored in --curve")
    p.add_argument("--model", choices=("sqrt", "h3", "horn", "lp"), required=True)
    _grid_flags(p, 1e-5, 1e-3, 24)
    p.add_argument("--window-min", type=float)
    p.add_argument("--window-max", type=float)
    p.add_argument("--p", type=float, default=1.0, help="exponent for the lp model")
    _mc_flags(p)
    p.add_argument("--out", required=True)

    p = sub.add_parser("sweep", help="run a batch config")
    p.add_argument("config")
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=None, help="parallel entries (default $HEATCONTENT_JOBS or 1)")

    p = sub.add_parser("replay", help="re-run the command recorded in a manifest")
    p.add_argument("manifest")
    p.add_argument("--out", required=True)
    return parser


# ---------------------------------------------------------------------------
# helpers


def load_shape(path: str):
    try:
        doc = json.loads(Path(path).read_text())
    except OSError as e:
        raise UsageError(f"cannot read shape file: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"shape file is not valid JSON: {e}")
    try:
        return shape_from_dict(doc)
    except (ShapeError, ValueError, TypeError) as e:
        raise UsageError(f"invalid shape document: {e}")


def _grid(args) -> TimeGrid:
    if not (args.tmin > 0 and args.tmax > args.tmin) or args.points < 1:
        raise UsageError("grid needs 0 < tmin < tmax and points >= 1")
    if args.points == 1:
        return TimeGrid((args.tmin,))
    make = TimeGrid.log if args.spacing == "log" else TimeGrid.linear
    return make(args.tmin, args.tmax, args.points)


def _write(path: Path, text: str):
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text)


def _manifest(argv, args, shape, started, files, extra=None) -> dict:
    doc = {
        "tool": "heatcontent",
        "version": __version__,
        "command": args.command,
        "argv": list(argv),
        "shape": shape_to_dict(shape) if shape is not None else None,
        "seed": getattr(args, "seed", None),
        "samples": getattr(args, "samples", None),
        "wall_clock_seconds": round(time.time() - started, 3),
        "files": sorted(files),
    }
    if hasattr(args, "tmin"):
        doc["grid"] = {"tmin": args.tmin, "tmax": args.tmax, "points": args.points, "spacing": args.spacing}
    if extra:
        doc.update(extra)
    return doc


def _finish(out: Path, argv, args, shape, started, files, extra=None):
    manifest = _manifest(argv, args, shape, started, files, extra)
    _write(out / "manifest.json", json.dumps(manifest, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# commands


def cmd_compute(args, argv) -> int:
    started = time.time()
    shape = load_shape(args.shape)
    grid = _grid(args)
    if args.method == "exact" and type(shape).__name__ != "Box":
        raise UsageError("--method exact is available for boxes only")
    if args.quantity == "F" and not shape.finite_volume:
        raise UsageError("heat loss F needs a finite-volume shape")
    try:
        curve = heat_curve(shape, grid, args.quantity, args.method, args.samples, args.seed)
    except ShapeError as e:
        raise UsageError(str(e))
    out = Path(args.out)
    _write(out / "curve.csv", curve.to_csv())
    _write(out / "curve.json", curve.to_json())
    _finish(out, argv, args, shape, started, ["curve.csv", "curve.json"],
            {"quantity": args.quantity, "method": args.method})
    print(f"wrote {len(grid)} rows to {out / 'curve.csv'}")
    return EXIT_OK


def _suite_reports(suite, shape, grid, args):
    times = grid.times
    if suite == "main":
        return [verify_main_theorem(shape, t, args.samples, seed_sequence(args.seed, 1, i))
                for i, t in enumerate(times)]
    if suite == "mu":
        return [verify_mu_sandwich(shape, t, args.samples, seed_sequence(args.seed, 2, i))
                for i, t in enumerate(times)]
    if suite == "nu":
        return [verify_nu_sandwich(shape, t, args.samples, seed_sequence(args.seed, 3, i))
                for i, t in enumerate(times)]
    if suite == "scaling":
        if isinstance(shape, Horn) and not shape.heat_content_finite:
            raise ShapeError("H is infinite for this horn")
        pairs = list(zip(times[:-1], times[1:])) or [(times[0], times[0])]
        return [verify_time_scaling(shape, t2, t1, args.samples, seed_sequence(args.seed, 4, i))
                for i, (t2, t1) in enumerate(pairs)]
    if suite == "trivial":
        return [verify_trivial_bounds(shape, t, args.samples, seed_sequence(args.seed, 5, i))
                for i, t in enumerate(times)]
    if suite == "subadd":
        if not shape.finite_volume:
            raise ShapeError("heat loss needs finite volume")
        rng = np.random.Generator(np.random.PCG64(seed_sequence(args.seed, 6)))
        lo, hi = math.log(times[0]), math.log(times[-1])
        st = np.exp(rng.uniform(lo, hi, size=(args.pairs, 2)))
        return [verify_subadditivity(shape, float(s), float(t), args.samples, seed_sequence(args.seed, 6, i))
                for i, (s, t) in enumerate(st)]
    if suite == "geom":
        return verify_geometric_props(shape)
    if suite == "lemmas":
        if not isinstance(shape, Ball):
            raise ShapeError("lemma probes are implemented for balls")
        return [r for i, t in enumerate(times)
                for r in verify_pointwise_lemmas(shape, t, args.probes, seed_sequence(args.seed, 7, i))]
    raise UsageError(f"unknown suite {suite!r}")


def cmd_verify(args, argv) -> int:
    started = time.time()
    shape = load_shape(args.shape)
    grid = _grid(args)
    suites = SUITES if args.suite == "all" else (args.suite,)
    reports: list[BoundReport] = []
    skipped = []
    for suite in suites:
        try:
            reports.extend(_suite_reports(suite, shape, grid, args))
        except ShapeError as e:
            skipped.append({"suite": suite, "skipped": str(e)})
    reports.sort(key=report_sort_key)
    out = Path(args.out)
    lines = [r.to_json() for r in reports] + [json.dumps(s, sort_keys=True) for s in skipped]
    _write(out / "reports.jsonl", "".join(line + "\n" for line in lines))
    table = format_table(reports)
    for s in skipped:
        table += f"\nskipped {s['suite']}: {s['skipped']}"
    _write(out / "table.txt", table + "\n")
    failures = [r for r in reports if not r.passed]
    _finish(out, argv, args, shape, started, ["reports.jsonl", "table.txt"],
            {"suites": list(suites), "failures": len(failures), "skipped": skipped})
    print(table)
    return EXIT_FAIL if failures else EXIT_OK


def _fit_curve(args, shape, quantity):
    if args.curve:
        try:
            text = Path(args.curve).read_text()
            return HeatCurve.from_csv(text, shape, args.quantity)
        except (OSError, ValueError) as e:
            raise UsageError(f"cannot load curve: {e}")
    return heat_curve(shape, _grid(args), quantity, "auto", args.samples, args.seed)


def _window(args):
    if args.window_min is None and args.window_max is None:
        return None
    lo = args.window_min if args.window_min is not None else 0.0
    hi = args.window_max if args.window_max is not None else math.inf
    return lo, hi


def cmd_fit(args, argv) -> int:
    started = time.time()
    shape = load_shape(args.shape)
    try:
        if args.model == "sqrt":
            curve = _fit_curve(args, shape, "F")
            window = _clamp_window(_window(args), curve)
            res = fit_perimeter_coefficient(curve, window)
        elif args.model == "h3":
            if not isinstance(shape, Ball):
                raise UsageError("h3 model is defined for balls only")
            curve = _fit_curve(args, shape, "F")
            window = _clamp_window(_window(args), curve)
            res = h3_check_ball(shape.radius, shape.m, curve, window)
        elif args.model == "horn":
            if not isinstance(shape, Horn):
                raise UsageError("horn model needs a horn shape")
            res = horn_exponent(shape, _grid(args), args.samples, args.seed)
        else:
            vals = lp_convergence_check(shape, args.p, _grid(args), args.samples, args.seed)
            res = {"p": args.p, "times": list(_grid(args).times), "values": [v.to_dict() for v in vals],
                   "decreasing": is_decreasing_to_zero(vals)}
    except (ShapeError, ValueError) as e:
        raise UsageError(str(e))
    out = Path(args.out)
    doc = res if isinstance(res, dict) else res.to_dict()
    _write(out / "fit.json", json.dumps(doc, indent=2, sort_keys=True) + "\n")
    _finish(out, argv, args, shape, started, ["fit.json"], {"model": args.model})
    if isinstance(res, dict):
        for t, v in zip(res["times"], res["values"]):
            print(f"t={t:.4g}  norm^p={v['value']:.10g} ± {v['error_radius']:.2g}")
    else:
        print(f"model      predicted        fitted           relative_error\n"
              f"{res.model:<10} {res.predicted:<16.10g} {res.coefficient:<16.10g} {res.relative_error:.3g}")
    return EXIT_OK


def _clamp_window(window, curve):
    if window is None:
        return None
    lo, hi = window
    t = curve.times
    if lo == 0.0:
        lo = t[0]
    if math.isinf(hi):
        hi = t[-1]
    return lo, hi


# ---------------------------------------------------------------------------
# sweeps


def _entry_argv(entry: dict, base: Path, out: Path) -> list[str]:
    if not isinstance(entry, dict):
        raise UsageError("each sweep entry must be an object")
    name = entry.get("name")
    command = entry.get("command")
    if not isinstance(name, str) or not name or "/" in name or name.startswith("."):
        raise UsageError(f"sweep entry has a bad name: {name!r}")
    if command not in ("compute", "verify", "fit"):
        raise UsageError(f"entry {name}: command must be compute, verify or fit")
    shape = entry.get("shape")
    if isinstance(shape, dict):
        try:
            shape_from_dict(shape)
        except (ShapeError, ValueError, TypeError) as e:
            raise UsageError(f"entry {name}: invalid shape: {e}")
        shape_arg = str(out / name / "shape.json")
    elif isinstance(shape, str):
        shape_arg = str((base / shape).resolve())
        load_shape(shape_arg)
    else:
        raise UsageError(f"entry {name}: 'shape' must be a file path or a shape object")
    argv = [command, shape_arg]
    flags = entry.get("flags", {})
    if not isinstance(flags, dict):
        raise UsageError(f"entry {name}: 'flags' must be an object")
    for key, value in flags.items():
        if key == "out":
            raise UsageError(f"entry {name}: 'out' is set by the sweep")
        flag = "--" + key.replace("_", "-")
        if key == "curve":
            value = str((base / value).resolve())
        argv += [flag, str(value)]
    argv += ["--out", str(out / name)]
    return argv


def _run_entry(name: str, argv: list[str], shape_doc) -> dict:
    if shape_doc is not None:
        _write(Path(argv[1]), json.dumps(shape_doc, indent=2, sort_keys=True) + "\n")
    log = Path(argv[argv.index("--out") + 1]) / "stdout.txt"
    log.parent.mkdir(parents=True, exist_ok=True)
    try:
        with open(log, "w") as fh, contextlib.redirect_stdout(fh), contextlib.redirect_stderr(fh):
            code = main(argv)
        status = {EXIT_OK: "ok", EXIT_FAIL: "verification_failed"}.get(code, "failed")
        return {"name": name, "argv": argv, "exit": code, "status": status}
    except Exception as e:  # isolate the entry
        return {"name": name, "argv": argv, "exit": EXIT_FAIL, "status": "failed",
                "error": f"{type(e).__name__}: {e}"}


def cmd_sweep(args, argv) -> int:
    config_path = Path(args.config)
    try:
        config = json.loads(config_path.read_text())
    except OSError as e:
        raise UsageError(f"cannot read config: {e}")
    except json.JSONDecodeError as e:
        raise UsageError(f"config is not valid JSON: {e}")
    if not isinstance(config, dict) or not isinstance(config.get("entries", None), list):
        raise UsageError("config must be an object with an 'entries' list")
    jobs = args.jobs if args.jobs is not None else _default_jobs()
    if jobs < 1:
        raise UsageError("--jobs must be at least 1")
    out = Path(args.out)
    base = config_path.parent
    planned = []
    names = set()
    parser = build_parser()
    for entry in config["entries"]:
        entry_argv = _entry_argv(entry, base, out)
        if entry["name"] in names:
            raise UsageError(f"duplicate entry name {entry['name']!r}")
        names.add(entry["name"])
        parser.parse_args(entry_argv)  # validate flags before running anything
        shape_doc = entry["shape"] if isinstance(entry["shape"], dict) else None
        planned.append((entry["name"], entry_argv, shape_doc))
    out.mkdir(parents=True, exist_ok=True)
    if jobs == 1 or len(planned) <= 1:
        results = [_run_entry(*p) for p in planned]
    else:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(_run_entry, *zip(*planned)))
    summary = {"config": str(config_path), "entries": results,
               "ok": sum(r["status"] == "ok" for r in results),
               "failed": sum(r["status"] != "ok" for r in results)}
    _write(out / "summary.json", json.dumps(summary, indent=2, sort_keys=True) + "\n")
    for r in results:
        print(f"{r['name']:<32} {r['status']}")
    return EXIT_OK if summary["failed"] == 0 else EXIT_FAIL


def cmd_replay(args, argv) -> int:
    try:
        manifest = json.loads(Path(args.manifest).read_text())
        old = list(manifest["argv"])
    except (OSError, json.JSONDecodeError, KeyError, TypeError) as e:
        raise UsageError(f"bad manifest: {e}")
    if "--out" not in old:
        raise UsageError("manifest argv has no --out")
    old[old.index("--out") + 1] = args.out
    return main(old)


COMMANDS = {"compute": cmd_compute, "verify": cmd_verify, "fit": cmd_fit, "sweep": cmd_sweep,
            "replay": cmd_replay}


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    try:
        args = build_parser().parse_args(argv)
        return COMMANDS[args.command](args, argv)
    except UsageError as e:
        print(f"error: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
