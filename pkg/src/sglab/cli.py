"""Command-line front end.

Exit codes: 0 success, 1 property failure, 2 usage or schema error,
3 parameter invariant violated, 4 numerical trouble (unstable Morse verdict,
quadrature or integration failure).
"""

from __future__ import annotations

import argparse
import dataclasses
import datetime
import hashlib
import io
import json
import math
import os
import sys
import time

import numpy as np

from . import __version__
from . import backlund as bl
from . import geometry as geo
from . import kernels
from . import scattering as scat
from . import soliton as sc
from . import spectral as spc
from .errors import (ConfigDegenerate, CountMismatch, FactorizationBreakdown, InvariantError, NearSingular,
                     NoZeroCrossing, QuadratureFailure, SchemaError, StepTooCoarse, TruncationTooShort)

EXIT_OK, EXIT_PROPERTY, EXIT_USAGE, EXIT_INVARIANT, EXIT_NUMERICAL = 0, 1, 2, 3, 4

LAMBDA_GRID = (-3.0, -1.5, -0.5, -0.2, 0.2, 0.5, 1.5, 3.0)


# ---------------------------------------------------------------------------
# config documents


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise SchemaError(f"{where}: expected a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise SchemaError(f"{where}: must be finite")
    return v


def config_from_document(doc) -> sc.SolitonConfig:
    if not isinstance(doc, dict):
        raise SchemaError("top level must be an object")
    extra = set(doc) - {"n", "waves", "phases"}
    if extra:
        raise SchemaError(f"unknown fields: {sorted(extra)}")
    for key in ("n", "waves", "phases"):
        if key not in doc:
            raise SchemaError(f"missing field '{key}'")
    n = doc["n"]
    if isinstance(n, bool) or not isinstance(n, int) or n < 1:
        raise SchemaError("n: expected a positive integer")
    waves, phases = doc["waves"], doc["phases"]
    if not isinstance(waves, list) or len(waves) != n:
        raise SchemaError(f"waves: expected a list of {n} records")
    if not isinstance(phases, list) or len(phases) != n:
        raise SchemaError(f"phases: expected a list of {n} numbers")
    ws = []
    for i, w in enumerate(waves):
        if not isinstance(w, dict):
            raise SchemaError(f"waves[{i}]: expected an object")
        keys = set(w)
        if keys == {"theta"}:
            ws.append(sc.WaveVector.from_angle(_number(w["theta"], f"waves[{i}].theta")))
        elif keys == {"p", "q"}:
            ws.append(sc.WaveVector(_number(w["p"], f"waves[{i}].p"), _number(w["q"], f"waves[{i}].q")))
        else:
            raise SchemaError(f"waves[{i}]: expected {{theta}} or {{p, q}}, got {sorted(keys)}")
    ph = [_number(v, f"phases[{i}]") for i, v in enumerate(phases)]
    return sc.SolitonConfig(tuple(ws), tuple(ph))


def parse_config(path):
    """Read and validate a JSON config; returns ``(config, sha256 of the file bytes)``."""
    try:
        with open(path, "rb") as fh:
            raw = fh.read()
    except OSError as exc:
        raise SchemaError(f"cannot read {path}: {exc}") from exc
    try:
        doc = json.loads(raw.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc
    return config_from_document(doc), hashlib.sha256(raw).hexdigest()


# ---------------------------------------------------------------------------
# manifests and output


def _deterministic(args) -> bool:
    env = os.environ.get("SGLAB_DETERMINISTIC", "").strip().lower() in ("1", "true", "yes")
    return bool(args.deterministic or env)


def make_manifest(args, digest, parameters, outputs):
    wall = None
    if not _deterministic(args):
        wall = datetime.datetime.now(datetime.timezone.utc).isoformat(timespec="seconds")
    return {
        "command": args.command,
        "config_digest": digest,
        "tool_version": __version__,
        "backend": kernels.backend(),
        "parameters": parameters,
        "wall_clock": wall,
        "outputs": outputs,
    }


def _clean(obj):
    """JSON-ready copy: dataclasses to dicts, numpy scalars to Python, complex to [re, im]."""
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return _clean(dataclasses.asdict(obj))
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating,)):
        return float(obj)
    if isinstance(obj, (complex, np.complexfloating)):
        return [float(obj.real), float(obj.imag)]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    return obj


def emit_report(args, digest, parameters, body):
    outputs = [args.out] if args.out else []
    doc = {"manifest": make_manifest(args, digest, parameters, outputs), "report": _clean(body)}
    text = json.dumps(doc, indent=2, sort_keys=True) + "\n"
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def write_grid_csv(stream, x, y, u):
    stream.write("x,y,u\n")
    for a, b, c in zip(x, y, u):
        # repr-independent formatting: 17 significant digits, '.' separator
        stream.write("%.17g,%.17g,%.17g\n" % (a, b, c))


# ---------------------------------------------------------------------------
# subcommands


def _random_points(n, window, seed):
    rng = np.random.default_rng(seed)
    return rng.uniform(-window, window, n), rng.uniform(-window, window, n)


def cmd_eval(args, cfg, digest):
    m = int(round(args.window / args.h))
    if m < 1 or abs(m * args.h - args.window) > 1e-9 * max(1.0, args.window):
        raise SchemaError("--window must be a positive multiple of --h")
    axis = args.h * np.arange(-m, m + 1)
    X, Y = np.meshgrid(axis, axis)  # row-major, x fastest
    u = sc.eval_solution(cfg, X, Y, shifted=True)
    params = {"window": args.window, "h": args.h}
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
            write_grid_csv(fh, X.ravel(), Y.ravel(), u.ravel())
        with open(args.out + ".manifest.json", "w", encoding="utf-8", newline="\n") as fh:
            man = make_manifest(args, digest, params, [args.out])
            with open(args.out, "rb") as g:
                man["output_sha256"] = hashlib.sha256(g.read()).hexdigest()
            fh.write(json.dumps(man, indent=2, sort_keys=True) + "\n")
    else:
        buf = io.StringIO()
        write_grid_csv(buf, X.ravel(), Y.ravel(), u.ravel())
        sys.stdout.write(buf.getvalue())
    return EXIT_OK


def residual_check(cfg, points=10000, window=20.0, seed=0, tol=1e-10):
    x, y = _random_points(points, window, seed)
    r = np.abs(sc.pde_residual(cfg, x, y))
    i = int(np.argmax(r))
    return {"points": points, "window": window, "seed": seed, "max_residual": float(r[i]),
            "argmax": [float(x[i]), float(y[i])], "tolerance": tol, "passed": bool(r[i] <= tol)}


def cmd_residual(args, cfg, digest):
    rep = residual_check(cfg, args.points, args.window, args.seed, args.tol)
    emit_report(args, digest, {"points": args.points, "window": args.window, "seed": args.seed,
                               "tol": args.tol}, rep)
    return EXIT_OK if rep["passed"] else EXIT_PROPERTY


def _parse_schedule(text):
    grids = []
    for item in text.split(";"):
        R, h = (float(v) for v in item.split(","))
        grids.append(spc.GridSpec(R, h))
    return tuple(grids)


def cmd_morse(args, cfg, digest):
    schedule = _parse_schedule(args.schedule) if args.schedule else spc.DEFAULT_SCHEDULE
    rep = spc.morse_index(cfg, schedule, args.delta, independent=not args.no_independent)
    body = rep.to_dict()
    body["stable"] = rep.stable
    body["expected"] = cfg.n * (cfg.n - 1) // 2
    if _deterministic(args):
        for g in body["per_grid"]:
            g.pop("seconds", None)
    params = {"delta": args.delta, "schedule": [[g.R, g.h] for g in schedule]}
    emit_report(args, digest, params, body)
    if not rep.stable:
        return EXIT_NUMERICAL
    return EXIT_OK if rep.morse_index == body["expected"] else EXIT_PROPERTY


def kernel_check(cfg, schedule, points=500, seed=1, tol=1e-9):
    x, y = _random_points(points, 20.0, seed)
    pointwise = [float(np.max(np.abs(sc.kernel_residual(cfg, j, x, y)))) for j in range(cfg.n)]
    norms = [[spc.kernel_residual_norm(cfg, g, j) for j in range(cfg.n)] for g in schedule]
    orders = []
    for a, b, ga, gb in zip(norms[:-1], norms[1:], schedule[:-1], schedule[1:]):
        orders.append([math.log(na / nb) / math.log(ga.h / gb.h) for na, nb in zip(a, b)])
    rep = {"pointwise_max": pointwise, "grids": [[g.R, g.h] for g in schedule], "discrete_norms": norms,
           "observed_orders": orders, "tolerance": tol}
    if cfg.n >= 2:
        rep["gram_min_eig"] = spc.kernel_gram_min_eig(cfg, schedule[0])
    rep["passed"] = bool(max(pointwise) <= tol and all(o > 1.5 for row in orders for o in row))
    return rep


def cmd_kernel(args, cfg, digest):
    schedule = _parse_schedule(args.schedule) if args.schedule else spc.DEFAULT_SCHEDULE
    rep = kernel_check(cfg, schedule)
    emit_report(args, digest, {"schedule": [[g.R, g.h] for g in schedule]}, rep)
    return EXIT_OK if rep["passed"] else EXIT_PROPERTY


def backlund_check(cfg, points=100, window=10.0, seed=2, tol=1e-8, rapidities=None):
    x, y = _random_points(points, window, seed)
    worst, skipped = 0.0, 0
    for a, b in zip(x, y):
        try:
            r1, r2 = bl.elliptic_backlund_residual(cfg, float(a), float(b))
        except NearSingular:
            skipped += 1
            continue
        worst = max(worst, abs(r1), abs(r2))
    rep = {"elliptic_max": worst, "elliptic_points": points - skipped, "skipped_near_singular": skipped,
           "tolerance": tol}
    ok = worst <= tol
    if rapidities is not None:
        hc = sc.HyperbolicConfig.from_rapidities(rapidities, list(cfg.phases)[:len(rapidities)])
        hw = 0.0
        for a, b in zip(x, y):
            r1, r2 = bl.bilinear_backlund_residual(hc, float(a), float(b))
            hw = max(hw, abs(r1), abs(r2))
        rep["hyperbolic_max"] = hw
        ok = ok and hw <= tol
    rep["passed"] = bool(ok)
    return rep


def cmd_backlund(args, cfg, digest):
    rap = [float(v) for v in args.rapidities.split(",")] if args.rapidities else None
    if rap is not None and len(rap) != cfg.n:
        raise SchemaError("--rapidities needs one value per soliton")
    rep = backlund_check(cfg, args.points, args.window, args.seed, args.tol, rap)
    emit_report(args, digest, {"points": args.points, "window": args.window, "seed": args.seed,
                               "tol": args.tol, "rapidities": rap}, rep)
    return EXIT_OK if rep["passed"] else EXIT_PROPERTY


def _sample_widening(cfg, y, lam, X, step, widen):
    # the truncation precondition is strict; when allowed, retry on a wider line
    while True:
        try:
            return scat.scattering_coeffs(cfg, y, lam, X, step)
        except TruncationTooShort:
            if X >= widen:
                raise
            X += 10.0


def scatter_check(cfg, lams, ys, X=40.0, step=0.005, tol=1e-6, widen=None):
    widen = X if widen is None else widen
    rows = [_sample_widening(cfg, y, lam, X, step, widen).as_row() for y in ys for lam in lams]
    worst = max(r["abs_b"] for r in rows)
    drift = 0.0
    for lam in lams:
        a = [complex(r["a_re"], r["a_im"]) for r in rows if r["lambda"] == lam]
        drift = max(drift, max(abs(v - a[0]) for v in a))
    return {"rows": rows, "max_abs_b": worst, "max_a_drift": drift, "tolerance": tol,
            "passed": bool(worst <= tol and drift <= tol)}


def cmd_scatter(args, cfg, digest):
    lams = args.lam or list(LAMBDA_GRID)
    ys = args.y or [0.0]
    rep = scatter_check(cfg, lams, ys, args.X, args.step)
    emit_report(args, digest, {"lambda": lams, "y": ys, "X": args.X, "step": args.step}, rep)
    return EXIT_OK if rep["passed"] else EXIT_PROPERTY


def ends_check(cfg, R_trace=40.0, s=30.0, angle_tol_deg=2.0, profile_tol=5e-2):
    ends = geo.describe_ends(cfg, R_trace, s)
    worst_angle = max(math.degrees(e.angle_error) for e in ends)
    worst_prof = max(e.profile_error for e in ends)
    return {"ends": [e.as_row() for e in ends], "max_angle_error_deg": worst_angle,
            "max_profile_error": worst_prof,
            "passed": bool(worst_angle <= angle_tol_deg and worst_prof <= profile_tol)}


def cmd_ends(args, cfg, digest):
    rep = ends_check(cfg, args.R_trace, args.s)
    emit_report(args, digest, {"R_trace": args.R_trace, "s": args.s}, rep)
    return EXIT_OK if rep["passed"] else EXIT_PROPERTY


_NUMERICAL = (NearSingular, QuadratureFailure, FactorizationBreakdown, StepTooCoarse, TruncationTooShort)


def cmd_verify_all(args, cfg, digest):
    checks = [
        ("residual", lambda: residual_check(cfg, points=2000)),
        ("kernel", lambda: kernel_check(cfg, spc.DEFAULT_SCHEDULE[:1] + (spc.GridSpec(30.0, 0.125),))),
        ("backlund", lambda: backlund_check(cfg, points=50)),
        ("scatter", lambda: scatter_check(cfg, list(LAMBDA_GRID), [0.0, 5.0], widen=80.0)),
        ("ends", lambda: ends_check(cfg)),
    ]
    if not args.skip_morse and cfg.n <= 3:
        def morse():
            rep = spc.morse_index(cfg)
            return {"morse_index": rep.morse_index, "expected": cfg.n * (cfg.n - 1) // 2,
                    "reasons": rep.reasons,
                    "passed": rep.morse_index == cfg.n * (cfg.n - 1) // 2}
        checks.append(("morse", morse))
    results, code = {}, EXIT_OK
    for name, fn in checks:
        t0 = time.perf_counter()
        try:
            rep = fn()
            status = "pass" if rep["passed"] else "fail"
        except (CountMismatch, NoZeroCrossing) as exc:
            rep, status = {"error": str(exc)}, "fail"
        except _NUMERICAL as exc:
            rep, status = {"error": f"{type(exc).__name__}: {exc}"}, "numerical"
        if not _deterministic(args):
            rep["seconds"] = time.perf_counter() - t0
        results[name] = {"status": status, "detail": rep}
        print(f"{name:10s} {status}", file=sys.stderr)
        if status == "fail":
            code = EXIT_PROPERTY
        elif status == "numerical" and code == EXIT_OK:
            code = EXIT_NUMERICAL
    emit_report(args, digest, {"skip_morse": args.skip_morse}, results)
    return code


# ---------------------------------------------------------------------------
# entry point


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="sglab", description="Multi-end solutions of the elliptic sine-Gordon equation")
    ap.add_argument("--version", action="version", version=f"sglab {__version__}")
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="JSON parameter file")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--threads", type=int, default=None, help="cap on worker threads (env SGLAB_THREADS)")
    common.add_argument("--deterministic", action="store_true",
                        help="omit wall-clock data so reruns are byte-identical (env SGLAB_DETERMINISTIC)")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("eval", parents=[common], help="grid of U_n - pi as CSV")
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--h", type=float, default=0.5)
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("residual", parents=[common], help="max |Delta U - sin U| at random points")
    p.add_argument("--points", type=int, default=10000)
    p.add_argument("--window", type=float, default=20.0)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--tol", type=float, default=1e-10)
    p.set_defaults(func=cmd_residual)

    p = sub.add_parser("morse", parents=[common], help="negative eigenvalue count of the linearized operator")
    p.add_argument("--delta", type=float, default=spc.DEFAULT_DELTA)
    p.add_argument("--schedule", help="grids as 'R,h;R,h' (default 30,0.25;40,0.125)")
    p.add_argument("--no-independent", action="store_true", help="skip the LOBPCG cross-check")
    p.set_defaults(func=cmd_morse)

    p = sub.add_parser("kernel", parents=[common], help="kernel residuals, pointwise and discrete")
    p.add_argument("--schedule", help="grids as 'R,h;R,h'")
    p.set_defaults(func=cmd_kernel)

    p = sub.add_parser("backlund", parents=[common], help="Backlund residual sweep")
    p.add_argument("--points", type=int, default=100)
    p.add_argument("--window", type=float, default=10.0)
    p.add_argument("--seed", type=int, default=2)
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--rapidities", help="comma-separated rapidities for the hyperbolic check")
    p.set_defaults(func=cmd_backlund)

    p = sub.add_parser("scatter", parents=[common], help="scattering coefficients a, b")
    p.add_argument("--lambda", dest="lam", type=float, action="append")
    p.add_argument("--y", type=float, action="append")
    p.add_argument("--X", type=float, default=40.0)
    p.add_argument("--step", type=float, default=0.005)
    p.set_defaults(func=cmd_scatter)

    p = sub.add_parser("ends", parents=[common], help="traced ends and transverse profile errors")
    p.add_argument("--R-trace", dest="R_trace", type=float, default=40.0)
    p.add_argument("--s", type=float, default=30.0)
    p.set_defaults(func=cmd_ends)

    p = sub.add_parser("verify-all", parents=[common], help="run the property suite")
    p.add_argument("--skip-morse", action="store_true")
    p.set_defaults(func=cmd_verify_all)
    return ap


def run_command(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:  # argparse: usage errors exit 2, --help/--version exit 0
        return int(exc.code or 0)
    threads = args.threads
    if threads is None and os.environ.get("SGLAB_THREADS"):
        try:
            threads = int(os.environ["SGLAB_THREADS"])
        except ValueError:
            print("error: SGLAB_THREADS must be an integer", file=sys.stderr)
            return EXIT_USAGE
    kernels.set_threads(threads)
    try:
        cfg, digest = parse_config(args.config)
        return args.func(args, cfg, digest)
    except SchemaError as exc:
        print(f"schema error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (InvariantError, ConfigDegenerate) as exc:
        print(f"invariant violated: {exc}", file=sys.stderr)
        return EXIT_INVARIANT
    except (CountMismatch, NoZeroCrossing) as exc:
        print(f"property failure: {exc}", file=sys.stderr)
        return EXIT_PROPERTY
    except _NUMERICAL as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main(argv=None):
    sys.exit(run_command(argv))
