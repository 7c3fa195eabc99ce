"""Command line front end: ``harmzero <command> [options]``.

Every command writes its results (JSON, and CSV for tables) plus a
``manifest.json`` into ``--out``.  ``harmzero --replay MANIFEST`` re-runs a
recorded command into a fresh directory and compares output hashes.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

import numpy as np

from . import __version__, catalog
from .calibration import (CALIBRATION_VERSION, CalibrationError, build_calibration, default_path,
                          load_calibration, save_calibration, uncalibrated)
from .frequency import DEFAULT_SEED, UndefinedFrequencyError, frequency_profile, zeta_hat
from .poly import MultiPoly, NotOnZeroSetError, PolynomialFormatError, load
from .zeroset import CloudFormatError, ResourceError, effective_pitch, load_cloud, sample_zero_set

EXIT_OK, EXIT_INPUT, EXIT_UNRESOLVED, EXIT_RESOURCE = 0, 2, 3, 4
COMMON_DEFAULTS = {"seed": DEFAULT_SEED, "threads": 1, "out": "harmzero_out", "plot": None,
                   "calibration": None, "uncalibrated": False}


class InputError(ValueError):
    pass


# ----------------------------------------------------------------------------
# argument helpers

def floats(text: str) -> list:
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _fix_negative_values(argv: list) -> list:
    """Join ``--opt -1,1`` into ``--opt=-1,1`` so argparse accepts values
    that start with a minus sign."""
    out = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if (a.startswith("--") and "=" not in a and i + 1 < len(argv)
                and re.match(r"^-[\d.]", argv[i + 1])):
            out.append(f"{a}={argv[i + 1]}")
            i += 2
            continue
        out.append(a)
        i += 1
    return out


def sha256_file(path) -> str:
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else repr(v)
    if isinstance(obj, np.bool_):
        return bool(obj)
    return obj


def _strip_timing(obj):
    """Remove wall-clock fields so result files depend only on the inputs."""
    if isinstance(obj, dict):
        return {k: _strip_timing(v) for k, v in obj.items() if not k.endswith("seconds")}
    if isinstance(obj, list):
        return [_strip_timing(v) for v in obj]
    return obj


class Output:
    """Collects result files and writes the run manifest."""

    def __init__(self, out_dir, command: str, argv: list, args):
        self.dir = Path(out_dir)
        self.dir.mkdir(parents=True, exist_ok=True)
        self.command = command
        self.argv = argv
        self.args = args
        self.files = {}
        self.inputs = {}
        self.params = {}
        self.timings = {}
        self.calibration = None
        self.t0 = time.time()

    def path(self, name: str) -> Path:
        return self.dir / name

    def json(self, name: str, obj) -> Path:
        p = self.path(name)
        p.write_text(json.dumps(_jsonable(obj), indent=1, sort_keys=True) + "\n")
        self.files[name] = sha256_file(p)
        return p

    def csv(self, name: str, rows: list) -> Path:
        p = self.path(name)
        buf = io.StringIO()
        if rows:
            keys = list(rows[0].keys())
            w = csv.DictWriter(buf, fieldnames=keys, lineterminator="\n")
            w.writeheader()
            for r in rows:
                w.writerow({k: (repr(float(v)) if isinstance(v, (float, np.floating)) else v)
                            for k, v in r.items()})
        p.write_text(buf.getvalue())
        self.files[name] = sha256_file(p)
        return p

    def plot(self, name: str, fn, *a, **kw):
        fmt = getattr(self.args, "plot", None)
        if not fmt:
            return None
        p = self.path(f"{name}.{fmt}")
        fn(*a, path=p, **kw)
        self.files[p.name] = sha256_file(p)
        return p

    def input(self, path) -> None:
        self.inputs[str(path)] = sha256_file(path)

    def manifest(self, status: str, exit_code: int) -> Path:
        rec = {
            "command": self.command,
            "argv": self.argv,
            "cwd": str(Path.cwd()),
            "seed": getattr(self.args, "seed", None),
            "threads": getattr(self.args, "threads", None),
            "inputs": self.inputs,
            "parameters": self.params,
            "calibration": self.calibration,
            "package_version": __version__,
            "outputs": self.files,
            "status": status,
            "exit_code": exit_code,
            "timings": self.timings,
            "wall_time_s": round(time.time() - self.t0, 3),
        }
        p = self.path("manifest.json")
        p.write_text(json.dumps(_jsonable(rec), indent=1, sort_keys=True) + "\n")
        return p


# ----------------------------------------------------------------------------
# inputs

def read_poly(args, out: Output) -> MultiPoly:
    if getattr(args, "named", None):
        try:
            return catalog.named(args.named)
        except KeyError as exc:
            raise InputError(str(exc.args[0])) from None
    if not getattr(args, "poly", None):
        raise InputError("give --poly FILE or --named NAME")
    path = Path(args.poly)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    out.input(path)
    return load(path)


def read_cloud(args, out: Output):
    path = Path(args.cloud)
    if not path.exists():
        raise InputError(f"{path}: no such file")
    out.input(path)
    return load_cloud(path)


def _point(values, n: int, what: str) -> np.ndarray:
    if values is None:
        return np.zeros(n)
    v = np.asarray(values, dtype=float)
    if v.size == 1 and n > 1:
        v = np.full(n, float(v[0]))
    if v.shape != (n,):
        raise InputError(f"{what} must have {n} coordinates, got {v.size}")
    return v


def _get_calibration(args, out: Output):
    if args.uncalibrated:
        cal = uncalibrated()
        out.calibration = {"version": "uncalibrated"}
        return cal
    path = Path(args.calibration) if args.calibration else default_path()
    cal = load_calibration(path, CALIBRATION_VERSION)
    out.calibration = {"version": cal.version, "path": str(path), "sha256": sha256_file(path)}
    return cal


def _theta_options(args):
    from .theta import ThetaOptions
    return ThetaOptions(h=args.h, margin=args.margin, seed=args.seed)


# ----------------------------------------------------------------------------
# commands

def cmd_theta(args, out: Output, cal) -> int:
    from .theta import theta_bilateral_scales, theta_profile_taylor
    opts = _theta_options(args)
    if args.cloud:
        A = read_cloud(args, out)
        x = _point(args.point, A.n, "--point")
        rep = theta_bilateral_scales(A, x, args.scales, args.k, opts)
    else:
        p = read_poly(args, out)
        x = _point(args.point, p.n, "--point")
        if args.bilateral:
            R = max(args.scales) * (1 + opts.margin)
            h = effective_pitch(p.n, R, opts.h * min(args.scales), opts.max_vertices)
            A = sample_zero_set(p, x, R, h, max_vertices=opts.max_vertices)
            rep = theta_bilateral_scales(A, x, args.scales, args.k, opts)
        else:
            rep = theta_profile_taylor(p, x, args.scales, args.k, opts)
    out.params.update({"k": args.k, "scales": args.scales, "h": opts.h, "margin": opts.margin,
                       "bilateral": bool(args.cloud or args.bilateral)})
    rows = [{"r": r, "theta": t} for r, t in zip(rep.scales, rep.theta)]
    out.csv("theta.csv", rows)
    out.json("theta.json", rep.to_dict())
    print(json.dumps(_jsonable(rows)))
    return EXIT_OK


def cmd_zeta(args, out: Output, cal) -> int:
    p = read_poly(args, out)
    x = _point(args.point, p.n, "--point")
    rows = []
    for r in args.radii:
        z = zeta_hat(p, x, r, args.k, seed=args.seed)
        rows.append({"r": r, "k": args.k, "zeta": z.value})
    out.params.update({"k": args.k, "radii": args.radii})
    out.csv("zeta.csv", rows)
    out.json("zeta.json", rows)
    print(json.dumps(_jsonable(rows)))
    return EXIT_OK


def cmd_frequency(args, out: Output, cal) -> int:
    from .plotting import plot_profile
    p = read_poly(args, out)
    x0 = _point(args.center, p.n, "--center")
    prof = frequency_profile(p, x0, args.radii)
    rows = [{"r": r, "N": v} for r, v in zip(prof.radii, prof.N_vals)]
    out.params.update({"radii": args.radii})
    out.csv("frequency.csv", rows)
    out.json("frequency.json", {"center": x0, "degree": p.degree, "profile": rows})
    out.plot("frequency", plot_profile, prof.radii, prof.N_vals, title="frequency")
    print(json.dumps(_jsonable(rows)))
    return EXIT_OK


def cmd_detect(args, out: Output, cal) -> int:
    from .theta import detect_degree
    opts = _theta_options(args)
    if args.cloud:
        inp = read_cloud(args, out)
    else:
        inp = read_poly(args, out)
    x = _point(args.point, inp.n, "--point")
    lab = detect_degree(inp, x, args.scales, k_max=args.k_max, calibration=cal, opts=opts)
    out.params.update({"scales": args.scales, "k_max": args.k_max, "h": opts.h})
    rec = lab.to_dict()
    out.json("detect.json", rec)
    print(json.dumps(_jsonable({"k": lab.k, "unresolved": lab.unresolved,
                                "certificate": lab.certificate, "reason": lab.reason})))
    if lab.unresolved:
        print(f"unresolved: {lab.reason}", file=sys.stderr)
        return EXIT_UNRESOLVED
    return EXIT_OK


def cmd_stratify(args, out: Output, cal) -> int:
    from .plotting import plot_strata
    from .strata import stratify
    p = read_poly(args, out)
    c = _point(args.center, p.n, "--center")
    cloud, labels = stratify(p, c, args.radius, args.h, scales=args.scales,
                             cross_check=args.cross_check if args.scales else 0,
                             calibration=cal, opts=_theta_options(args), seed=args.seed,
                             max_vertices=args.max_vertices)
    rows = []
    for lab in labels:
        row = {f"x{i + 1}": v for i, v in enumerate(lab.point)}
        row["k"] = lab.k
        cross = lab.trace[0]["cross_label"] if lab.trace else ""
        row["cross_label"] = "" if cross is None else cross
        row["agrees"] = lab.certificate.get("agrees", "")
        rows.append(row)
    counts = {}
    for lab in labels:
        counts[str(lab.k)] = counts.get(str(lab.k), 0) + 1
    checked = [lab for lab in labels if "agrees" in lab.certificate]
    summary = {"points": len(labels), "counts": counts, "cross_checked": len(checked),
               "cross_agreement": (sum(lab.certificate["agrees"] for lab in checked) / len(checked))
               if checked else None}
    out.params.update({"radius": args.radius, "h": args.h, "center": c})
    out.csv("strata.csv", rows)
    out.json("stratify.json", summary)
    out.plot("strata", plot_strata, cloud.points, [lab.k for lab in labels], title="strata")
    print(json.dumps(_jsonable(summary)))
    return EXIT_OK


def cmd_mdim(args, out: Output, cal) -> int:
    from .plotting import plot_loglog
    from .strata import mdim_estimate, stratify, stratum_cloud
    if args.cloud:
        A = read_cloud(args, out)
    else:
        p = read_poly(args, out)
        c = _point(args.center, p.n, "--center")
        A = sample_zero_set(p, c, args.radius, args.h, max_vertices=args.max_vertices)
        if args.stratum:
            A, labels = stratify(p, c, args.radius, args.h, cross_check=0, cloud=A)
            A = stratum_cloud(A, labels, args.stratum)
    if not len(A):
        raise InputError("the selected set is empty")
    fit = mdim_estimate(A, args.s_list)
    rows = [{"s": s, "N": n} for s, n in zip(fit.scales, fit.counts)]
    rec = {"slope": fit.slope, "intercept": fit.intercept, "residual": fit.residual,
           "dropped": fit.dropped, "points": len(A), "counts": rows}
    out.params.update({"s_list": args.s_list, "stratum": args.stratum})
    out.csv("mdim.csv", rows)
    out.json("mdim.json", rec)
    kept = [r for r in rows if r["s"] not in fit.dropped]
    out.plot("mdim", plot_loglog, [math.log(1 / r["s"]) for r in kept],
             [math.log(r["N"]) for r in kept], slope=fit.slope, intercept=fit.intercept,
             title="covering numbers")
    print(json.dumps(_jsonable({"slope": fit.slope, "residual": fit.residual})))
    return EXIT_OK


def cmd_tube(args, out: Output, cal) -> int:
    from .plotting import plot_loglog
    from .strata import tube_slope, tube_volume
    p = read_poly(args, out)
    rows = tube_volume(p, args.radii, mode=args.mode, seed=args.seed, N=args.samples,
                       bands=cal.bands if cal is not None else None)
    table = [{"r": r, "volume": v, "stderr": e} for r, v, e in rows]
    slope = tube_slope(rows)
    out.params.update({"radii": args.radii, "mode": args.mode, "samples": args.samples})
    out.csv("tube.csv", table)
    out.json("tube.json", {"mode": args.mode, "slope": slope, "rows": table})
    pos = [t for t in table if t["volume"] > 0]
    if len(pos) >= 2:
        x = [math.log(t["r"]) for t in pos]
        y = [math.log(t["volume"]) for t in pos]
        b, a = np.polyfit(x, y, 1)
        out.plot("tube", plot_loglog, x, y, slope=float(b), intercept=float(a),
                 xlabel="log r", ylabel="log volume", title=f"tube ({args.mode})")
    print(json.dumps(_jsonable({"slope": slope, "rows": table})))
    return EXIT_OK


def cmd_components(args, out: Output, cal) -> int:
    from .plotting import plot_sign_slice
    from .topology import components, corkscrew_estimate, sign_bipartite_check
    p = read_poly(args, out)
    comps = components(p, args.box, args.pitch, kappa=args.kappa, max_vertices=args.max_vertices)
    rec = comps.to_dict()
    if args.bipartite:
        ok, info = sign_bipartite_check(p, args.box, args.pitch, args.kappa, comps=comps,
                                        full_output=True)
        rec["bipartite"] = ok
        rec["bipartite_info"] = info
    if args.corkscrew:
        ck = corkscrew_estimate(p, args.box, args.pitch, args.corkscrew, mode=args.corkscrew_mode,
                                seed=args.seed, max_vertices=args.max_vertices)
        rec["corkscrew"] = ck.to_dict()
        out.csv("corkscrew.csv", [{"Q": qi, "r": r, "side": s, "clearance": c, "ratio": m}
                                  for qi, r, s, c, m, _ in ck.rows])
    out.params.update({"box": args.box, "pitch": args.pitch, "kappa": args.kappa})
    out.json("components.json", rec)
    out.plot("signs", plot_sign_slice, comps.field, title="sign field")
    print(json.dumps(_jsonable({"pos": comps.pos, "neg": comps.neg})))
    return EXIT_OK


def cmd_symmetry(args, out: Output, cal) -> int:
    from .symmetry import symmetry_defect
    p = read_poly(args, out)
    x = _point(args.point, p.n, "--point")
    res = symmetry_defect(p, x, args.radius, args.k, sweep_deg=args.sweep_deg, seed=args.seed,
                          full_output=True)
    out.params.update({"radius": args.radius, "k": args.k, "sweep_deg": args.sweep_deg})
    out.json("symmetry.json", res.to_dict())
    print(json.dumps(_jsonable({"defect": res.defect, "degree": res.degree, "exact": res.exact})))
    return EXIT_OK


def cmd_calibrate(args, out: Output, cal) -> int:
    log = (lambda m: print(m, file=sys.stderr, flush=True)) if args.verbose else None
    c = build_calibration(fast=args.fast, n_random=args.random_cones, seed=args.seed,
                          ratio_seeds=tuple(range(1, args.ratio_seeds + 1)),
                          ratio_count=args.ratio_count, log=log)
    target = Path(args.output) if args.output else out.path("calibration.json")
    save_calibration(c, target)
    if target.parent == out.dir:
        out.files[target.name] = sha256_file(target)
    out.timings["calibration_wall_s"] = c.meta.get("wall_time_s")
    print(json.dumps({"written": str(target), "version": c.version}))
    return EXIT_OK


def _battery_job(job):
    from . import batteries
    name, seed, kw = job
    return batteries.BATTERIES[name](seed=seed, **kw)


def cmd_battery(args, out: Output, cal) -> int:
    kw = {}
    if args.count is not None:
        kw["count"] = args.count
    if args.name == "doubling":
        kw["exponent_offset"] = args.exponent_offset
    if args.name == "detection":
        kw["calibration"] = cal
    seeds = [int(s) for s in args.seeds] if args.seeds else [args.seed]
    jobs = [(args.name, s, kw) for s in seeds]
    if args.threads > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as ex:
            results = list(ex.map(_battery_job, jobs))
    else:
        results = [_battery_job(j) for j in jobs]
    rows, summaries = [], []
    for s, (r, summ) in zip(seeds, results):
        rows += [{"seed": s, **row} for row in r]
        summaries.append({"seed": s, **summ})
    out.timings["summaries"] = [{"seed": s["seed"], "seconds": s.get("seconds")} for s in summaries]
    if rows and "seconds" in rows[0]:
        out.timings["cases"] = [{"seed": r["seed"], "case": r["case"], "seconds": r["seconds"]}
                                for r in rows]
    out.params.update({"battery": args.name, "seeds": seeds, **{k: v for k, v in kw.items()
                                                                 if k != "calibration"}})
    out.csv(f"battery_{args.name}.csv", _strip_timing(rows))
    out.json(f"battery_{args.name}.json", _strip_timing(summaries))
    print(json.dumps(_jsonable(_strip_timing(summaries))))
    return EXIT_OK


COMMANDS = {
    "theta": cmd_theta, "zeta": cmd_zeta, "frequency": cmd_frequency, "detect": cmd_detect,
    "stratify": cmd_stratify, "mdim": cmd_mdim, "tube": cmd_tube, "components": cmd_components,
    "symmetry": cmd_symmetry, "calibrate": cmd_calibrate, "battery": cmd_battery,
}


# ----------------------------------------------------------------------------
# parser

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False, argument_default=argparse.SUPPRESS)
    g = common.add_argument_group("common options")
    g.add_argument("--seed", type=int, help=f"seed for all randomness (default {DEFAULT_SEED})")
    g.add_argument("--threads", type=int, help="cap on worker processes (default 1)")
    g.add_argument("--out", help="output directory (default harmzero_out)")
    g.add_argument("--plot", choices=["png", "svg"], help="also write figures in this format")
    g.add_argument("--calibration", help="calibration file (default: the packaged one)")
    g.add_argument("--uncalibrated", action="store_true",
                   help="run without a calibration file (conservative threshold)")

    def poly_args(sp):
        sp.add_argument("--poly", help="polynomial JSON file")
        sp.add_argument("--named", help=f"catalog polynomial: {', '.join(sorted(catalog.NAMED))}")

    def theta_args(sp):
        sp.add_argument("--h", type=float, default=0.01, help="relative sampling pitch")
        sp.add_argument("--margin", type=float, default=0.25, help="target margin")

    ap = argparse.ArgumentParser(prog="harmzero", description=__doc__.splitlines()[0],
                                 parents=[common])
    ap.add_argument("--replay", metavar="MANIFEST",
                    help="re-run the command recorded in a manifest and compare output hashes")
    sub = ap.add_subparsers(dest="command")

    sp = sub.add_parser("theta", parents=[common], help="approximation numbers at a point")
    poly_args(sp)
    sp.add_argument("--cloud", help="point-cloud file (bilateral measurement)")
    sp.add_argument("--point", type=floats)
    sp.add_argument("--scales", type=floats, required=True)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--bilateral", action="store_true",
                    help="sample the zero set and run the bilateral optimizer")
    theta_args(sp)

    sp = sub.add_parser("zeta", parents=[common], help="Taylor-part ratio zeta-hat")
    poly_args(sp)
    sp.add_argument("--point", type=floats)
    sp.add_argument("--k", type=int, required=True)
    sp.add_argument("--radii", type=floats, required=True)

    sp = sub.add_parser("frequency", parents=[common], help="frequency profile")
    poly_args(sp)
    sp.add_argument("--center", type=floats)
    sp.add_argument("--radii", type=floats, required=True)

    sp = sub.add_parser("detect", parents=[common], help="degree label of a point")
    poly_args(sp)
    sp.add_argument("--cloud")
    sp.add_argument("--point", type=floats)
    sp.add_argument("--scales", type=floats, required=True)
    sp.add_argument("--k-max", type=int)
    theta_args(sp)

    sp = sub.add_parser("stratify", parents=[common], help="label a sampled zero set")
    poly_args(sp)
    sp.add_argument("--center", type=floats)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=0.01, help="sampling pitch")
    sp.add_argument("--margin", type=float, default=0.25)
    sp.add_argument("--scales", type=floats, help="scales for the detect_degree cross-check")
    sp.add_argument("--cross-check", type=int, default=40)
    sp.add_argument("--max-vertices", type=int, default=10_000_000)

    sp = sub.add_parser("mdim", parents=[common], help="covering-number dimension fit")
    poly_args(sp)
    sp.add_argument("--cloud")
    sp.add_argument("--center", type=floats)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--h", type=float, default=0.01)
    sp.add_argument("--stratum", type=int, help="restrict to the points labelled k")
    sp.add_argument("--s-list", type=floats, required=True)
    sp.add_argument("--max-vertices", type=int, default=10_000_000)

    sp = sub.add_parser("tube", parents=[common], help="Monte Carlo tube volumes")
    poly_args(sp)
    sp.add_argument("--radii", type=floats, required=True)
    sp.add_argument("--mode", choices=["zero-set", "singular-set"], default="zero-set")
    sp.add_argument("--samples", type=int, default=1_000_000)

    sp = sub.add_parser("components", parents=[common], help="sign components on a grid")
    poly_args(sp)
    sp.add_argument("--box", type=floats, required=True, help="lo,hi (cube)")
    sp.add_argument("--pitch", type=float, required=True)
    sp.add_argument("--kappa", type=float, default=1.0)
    sp.add_argument("--bipartite", action="store_true", help="also check sign alternation")
    sp.add_argument("--corkscrew", type=floats, help="radii for corkscrew clearances")
    sp.add_argument("--corkscrew-mode", choices=["distance", "contained"], default="distance")
    sp.add_argument("--max-vertices", type=int, default=61 ** 4)

    sp = sub.add_parser("symmetry", parents=[common], help="symmetry defect of the blowup")
    poly_args(sp)
    sp.add_argument("--point", type=floats)
    sp.add_argument("--radius", type=float, default=1.0)
    sp.add_argument("--k", type=int, default=0)
    sp.add_argument("--sweep-deg", type=float, default=2.0)

    sp = sub.add_parser("calibrate", parents=[common], help="measure detection thresholds")
    sp.add_argument("--output", help="where to write the calibration file")
    sp.add_argument("--fast", action="store_true", help="coarser pitch and fewer restarts")
    sp.add_argument("--random-cones", type=int, default=6)
    sp.add_argument("--ratio-seeds", type=int, default=5)
    sp.add_argument("--ratio-count", type=int, default=200)
    sp.add_argument("--verbose", action="store_true")

    sp = sub.add_parser("battery", parents=[common], help="run a seeded battery")
    from .batteries import BATTERIES
    sp.add_argument("--name", choices=sorted(BATTERIES), required=True)
    sp.add_argument("--seeds", type=floats, help="one battery per seed, in this order")
    sp.add_argument("--count", type=int)
    sp.add_argument("--exponent-offset", type=float, default=0.0)
    return ap


def _run(argv: list) -> int:
    argv = _fix_negative_values(list(argv))
    ap = build_parser()
    args = ap.parse_args(argv)
    if args.replay:
        return replay(args.replay, getattr(args, "out", None))
    for k, v in COMMON_DEFAULTS.items():
        if not hasattr(args, k):
            setattr(args, k, v)
    if not args.command:
        ap.print_help()
        return EXIT_INPUT
    out = Output(args.out, args.command, argv, args)
    code = EXIT_OK
    status = "ok"
    try:
        cal = None if args.command == "calibrate" else _get_calibration(args, out)
        code = COMMANDS[args.command](args, out, cal)
        status = "unresolved" if code == EXIT_UNRESOLVED else "ok"
    except ResourceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, status = EXIT_RESOURCE, "resource cap"
    except (InputError, PolynomialFormatError, CloudFormatError, CalibrationError,
            NotOnZeroSetError, UndefinedFrequencyError, ValueError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        code, status = EXIT_INPUT, "input error"
    out.manifest(status, code)
    return code


def replay(manifest_path, out_dir=None) -> int:
    """Re-run a manifest's command and compare every recorded output hash."""
    mpath = Path(manifest_path)
    try:
        rec = json.loads(mpath.read_text())
    except (OSError, json.JSONDecodeError) as exc:
        print(f"error: cannot read manifest {mpath}: {exc}", file=sys.stderr)
        return EXIT_INPUT
    cwd = Path(rec.get("cwd", "."))
    for path, digest in rec.get("inputs", {}).items():
        full = cwd / path
        if not full.exists() or sha256_file(full) != digest:
            print(f"error: input {path} is missing or changed since the recorded run", file=sys.stderr)
            return EXIT_INPUT
    out_dir = (Path(out_dir) if out_dir
               else mpath.parent.with_name(mpath.parent.name + "_replay")).resolve()
    argv = list(rec["argv"])
    argv = [a for a in argv if not a.startswith("--out=")]
    cleaned = []
    skip = False
    for a in argv:
        if skip:
            skip = False
            continue
        if a == "--out":
            skip = True
            continue
        cleaned.append(a)
    here = Path.cwd()
    os.chdir(cwd)
    try:
        code = _run(cleaned + [f"--out={out_dir}"])
    finally:
        os.chdir(here)
    new = json.loads((out_dir / "manifest.json").read_text())
    same = new["outputs"] == rec["outputs"] and code == rec.get("exit_code", code)
    report = {"manifest": str(mpath), "replay_dir": str(out_dir), "identical": same,
              "differences": sorted(k for k in set(rec["outputs"]) | set(new["outputs"])
                                    if rec["outputs"].get(k) != new["outputs"].get(k))}
    print(json.dumps(report))
    return EXIT_OK if same else 1


def main(argv=None) -> int:
    return _run(sys.argv[1:] if argv is None else argv)


if __name__ == "__main__":
    sys.exit(main())
