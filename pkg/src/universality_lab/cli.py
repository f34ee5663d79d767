"""Command-line interface.

Every command resolves its parameters as defaults < JSON config file < flags,
writes its artifacts atomically and emits a JSON report that embeds the
resolved configuration. Exit codes: 0 success, 1 domain error (JSON on
stderr), 2 usage or configuration error, 3 I/O failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional

import numpy as np

from . import __version__
from .conjugacy import (DEFAULT_DEPTH, abel_chart, boettcher_chart, chart_value_and_residual,
                        koenigs_chart)
from .dynamics import (HolomorphicMap, attraction_radius_ok, basin_raster, classify_fixed_point,
                       find_fixed_point)
from .errors import LabError, PreconditionError
from .geometry import (CompactGridSet, GridSpec, circle_points, count_holes, csv_to_points,
                       hausdorff_distance, mask_to_pgm, pgm_to_mask, relative_hull)
from .omega import phi_fiber_check
from .runge import (LaurentRational, ScheduleTarget, build_universal_schedule, finite_set_universal,
                    fit_rational)
from .spiral import SpiralCut, box_dimension, default_scales, render_g0_full

EXIT_OK, EXIT_DOMAIN, EXIT_USAGE, EXIT_IO = 0, 1, 2, 3


class UsageError(Exception):
    """Bad flags, malformed or unknown configuration."""


# --- value parsing ---------------------------------------------------------------

def parse_complex(text) -> complex:
    if isinstance(text, (list, tuple)):
        if not 1 <= len(text) <= 2:
            raise UsageError(f"complex values are [re, im], got {text!r}")
        return complex(float(text[0]), float(text[1]) if len(text) == 2 else 0.0)
    if isinstance(text, (int, float)):
        return complex(text)
    parts = str(text).split(",")
    try:
        if len(parts) == 1:
            return complex(float(parts[0]), 0.0)
        if len(parts) == 2:
            return complex(float(parts[0]), float(parts[1]))
    except ValueError:
        pass
    raise UsageError(f"cannot read {text!r} as re,im")


def parse_complex_list(text) -> List[complex]:
    if isinstance(text, list):
        return [parse_complex(t) for t in text]
    text = str(text).strip()
    return [parse_complex(t) for t in text.split(";") if t.strip()] if text else []


def parse_ints(text) -> List[int]:
    if isinstance(text, list):
        return [int(t) for t in text]
    try:
        return [int(t) for t in str(text).split(",") if t.strip()]
    except ValueError:
        raise UsageError(f"cannot read {text!r} as a comma-separated integer list")


def parse_poles(text) -> List[list]:
    """``re,im:order;...`` or a JSON list of {"at": [re, im], "order": k}."""
    if isinstance(text, list):
        return [[parse_complex(p["at"]), int(p["order"])] for p in text]
    out = []
    for item in str(text).split(";"):
        if not item.strip():
            continue
        loc, _, order = item.partition(":")
        out.append([parse_complex(loc), int(order or 1)])
    return out


def parse_symbol(spec) -> HolomorphicMap:
    """``blaschke:0.6``, ``blaschke:0.6,0.1``, ``poly:c0;c1;...``, ``rational:n0;n1/d0;d1`` or a dict."""
    if isinstance(spec, dict):
        try:
            return HolomorphicMap.from_config(spec)
        except (KeyError, TypeError, ValueError) as exc:
            raise UsageError(f"bad symbol {spec!r}: {exc}")
    kind, _, rest = str(spec).partition(":")
    try:
        if kind == "blaschke":
            return HolomorphicMap.blaschke(parse_complex(rest or "0.6"))
        if kind in ("poly", "polynomial"):
            return HolomorphicMap.polynomial(parse_complex_list(rest))
        if kind == "rational":
            num, _, den = rest.partition("/")
            return HolomorphicMap.rational(parse_complex_list(num), parse_complex_list(den))
    except LabError as exc:
        raise UsageError(str(exc))
    raise UsageError(f"unknown symbol {spec!r}")


def _float(v):
    try:
        return float(v)
    except (TypeError, ValueError):
        raise UsageError(f"expected a number, got {v!r}")


def _int(v):
    try:
        if isinstance(v, float) and not v.is_integer():
            raise ValueError
        return int(v)
    except (TypeError, ValueError):
        raise UsageError(f"expected an integer, got {v!r}")


def _str(v):
    return str(v)


def _any(v):
    return v


# name -> (parser, default, help); None defaults are resolved by the command
Param = tuple
SYMBOL = ("symbol", parse_symbol, "blaschke:0.6", "map: blaschke:a | poly:c0;c1;.. | rational:n../d..")
GUESS = ("guess", parse_complex, "0,0", "starting point for the fixed-point search (re,im)")
CENTER = ("center", parse_complex, "0,0", "grid centre (re,im)")
HALF = ("half_width", _float, 1.0, "grid half width")
RES = ("res", _int, 512, "grid resolution in pixels")
SEED = ("seed", _int, 0, "seed for any sampling")

COMMANDS: Dict[str, List[Param]] = {
    "classify": [SYMBOL, GUESS],
    "basin": [SYMBOL, GUESS, CENTER, HALF, RES, ("nmax", _int, 500, "iteration budget"),
              ("eps", _float, None, "capture radius (default: largest contracting radius)")],
    "chart-table": [SYMBOL, GUESS, SEED,
                    ("kind", _str, None, "koenigs | boettcher | abel (default from the class)"),
                    ("samples", _int, 1000, "number of sample points"),
                    ("petal", _int, 1, "petal index for Abel charts"),
                    ("depth", _int, None, "chart depth (default per chart kind)")],
    "render-g0": [("alpha", parse_complex, "0.6,0", "Blaschke parameter"),
                  ("delta", _float, None, "spiral radius (default: half the chart range)"),
                  RES, CENTER, HALF, ("nmax", _int, 500, "basin iteration budget"),
                  ("clearance", _float, None, "spiral clearance in Phi units (default: pixel diagonal)"),
                  ("scales", parse_ints, None, "box sizes for the dimension estimate"),
                  ("stats", _str, None, "stats CSV path (default: output with .csv suffix)")],
    "runge-fit": [("input", _str, None, "CSV with columns re,im,t_re,t_im"),
                  ("poles", parse_poles, "", "re,im:order;..."),
                  ("degree", _int, 8, "polynomial degree"),
                  ("ridge", _float, 0.0, "Tikhonov weight")],
    "universal-build": [SYMBOL, GUESS, ("punctures", parse_complex_list, "0,0", "excluded points re,im;..."),
                        ("nmax", _int, 60, "largest index tried per step"),
                        ("targets", _any, [], "target list (config file)"),
                        ("finite", _any, None, "finite-set block {E, vectors, eps} (config file)")],
    "omega-check": [("schedule", _str, None, "universal-build report JSON"),
                    ("points", _str, None, "point CSV with header re,im"),
                    ("index", _int, -1, "which schedule index n_j to use"),
                    ("tol_in", _float, 1e-8, "fiber closeness"),
                    ("tol_out", _float, None, "value closeness (default 1e-4 x value range)")],
    "hull": [("mask", _str, None, "input PGM"), CENTER, HALF,
             ("exclude", parse_complex_list, "", "points outside Omega re,im;...")],
    "hausdorff": [("a", _str, None, "first set (CSV or PGM)"), ("b", _str, None, "second set"),
                  CENTER, HALF],
    "boxdim": [("mask", _str, None, "input PGM"), ("scales", parse_ints, None, "box sizes")],
}
REQUIRED = {"runge-fit": ["input"], "omega-check": ["schedule", "points"], "hull": ["mask"],
            "hausdorff": ["a", "b"], "boxdim": ["mask"]}


@dataclass
class RunConfig:
    command: str
    params: Dict[str, Any]
    out: Optional[str] = None
    raw: Dict[str, Any] = field(default_factory=dict)

    def resolved(self) -> dict:
        """JSON-ready form of the configuration as given (after defaults)."""
        return {"command": self.command, "out": self.out, **self.raw}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(message)


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="universality-lab", description="Universality lab command line.")
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", metavar="command")
    for name, params in COMMANDS.items():
        sp = sub.add_parser(name)
        sp.add_argument("--config", help="JSON file with parameter values")
        sp.add_argument("--out", help="output path (default: report on stdout)")
        for key, _, default, text in params:
            if key in ("targets", "finite"):
                continue
            sp.add_argument("--" + key.replace("_", "-"), dest=key, default=None,
                            help=f"{text} [default: {default}]")
    return parser


def parse_config(argv: List[str], file: Optional[str] = None) -> RunConfig:
    """Resolve parameters: defaults, then the JSON file, then flags."""
    parser = build_parser()
    args = parser.parse_args(argv)
    if not args.command:
        parser.print_usage(sys.stderr)
        raise UsageError("missing command")
    params = COMMANDS[args.command]
    file = file or args.config
    values: Dict[str, Any] = {key: default for key, _, default, _ in params}
    out = args.out
    if file:
        try:
            data = json.loads(Path(file).read_text(encoding="utf-8"))
        except FileNotFoundError:
            raise UsageError(f"config file {file} not found")
        except json.JSONDecodeError as exc:
            raise UsageError(f"malformed JSON in {file}: {exc}")
        if not isinstance(data, dict):
            raise UsageError("config file must hold a JSON object")
        data = dict(data)
        if data.pop("command", args.command) != args.command:
            raise UsageError("config file is for a different command")
        out = out if out is not None else data.pop("out", None)
        data.pop("out", None)
        unknown = sorted(set(data) - set(values))
        if unknown:
            raise UsageError(f"unknown config keys: {', '.join(unknown)}")
        values.update(data)
    for key in values:
        flag = getattr(args, key, None)
        if flag is not None:
            values[key] = flag
    for key in REQUIRED.get(args.command, []):
        if values.get(key) is None:
            raise UsageError(f"--{key.replace('_', '-')} is required")
    parsed = {}
    for key, conv, _, _ in params:
        v = values[key]
        parsed[key] = None if v is None else conv(v)
    raw = {}
    for key, v in values.items():
        if key == "symbol":
            raw[key] = parsed[key].to_config()
        elif isinstance(parsed[key], complex):
            raw[key] = [parsed[key].real, parsed[key].imag]
        elif isinstance(parsed[key], list) and parsed[key] and isinstance(parsed[key][0], complex):
            raw[key] = [[c.real, c.imag] for c in parsed[key]]
        elif key == "poles":
            raw[key] = [{"at": [p.real, p.imag], "order": k} for p, k in parsed[key]]
        else:
            raw[key] = parsed[key]
    return RunConfig(args.command, parsed, out, raw)


# --- output ----------------------------------------------------------------------------

def atomic_write(path: str, data: bytes):
    target = Path(path)
    fd, tmp = tempfile.mkstemp(dir=str(target.parent) if str(target.parent) else ".",
                               prefix="." + target.name + ".")
    try:
        with os.fdopen(fd, "wb") as fh:
            fh.write(data)
        os.replace(tmp, target)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _jsonable(obj):
    if isinstance(obj, complex):
        return [obj.real, obj.imag]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, np.ndarray):
        return [_jsonable(x) for x in obj.tolist()]
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(x) for x in obj]
    return obj


def dump_json(obj) -> bytes:
    return (json.dumps(_jsonable(obj), indent=2, sort_keys=True) + "\n").encode("utf-8")


def _emit_report(cfg: RunConfig, report: dict, path: Optional[str]):
    report = {"config": cfg.resolved(), **report}
    data = dump_json(report)
    if path:
        atomic_write(path, data)
    else:
        sys.stdout.write(data.decode("utf-8"))


def _side_path(out: Optional[str], suffix: str) -> Optional[str]:
    return str(Path(out).with_suffix(suffix)) if out else None


# --- commands --------------------------------------------------------------------------

def _fixed_point(f: HolomorphicMap, guess: complex):
    return classify_fixed_point(f, find_fixed_point(f, guess))


def cmd_classify(cfg: RunConfig):
    info = _fixed_point(cfg.params["symbol"], cfg.params["guess"])
    _emit_report(cfg, {"z0": info.z0, "multiplier": info.multiplier, "class": info.klass,
                       "p": info.p, "m": info.m}, cfg.out)


def _grid(p) -> GridSpec:
    return GridSpec(p["center"], p["half_width"], p["res"])


def cmd_basin(cfg: RunConfig):
    p = cfg.params
    f = p["symbol"]
    info = _fixed_point(f, p["guess"])
    eps = p["eps"]
    if eps is None:
        eps = max(1.0, abs(info.z0))
        while not attraction_radius_ok(f, info.z0, eps) and eps > 1e-12:
            eps *= 0.9
    grid = _grid(p)
    basin = basin_raster(f, info.z0, grid, p["nmax"], eps)
    if cfg.out:
        atomic_write(cfg.out, mask_to_pgm(basin.mask))
    _emit_report(cfg, {"z0": info.z0, "eps": eps, "basin_pixels": int(basin.mask.sum()),
                       "pixels": grid.resolution ** 2}, _side_path(cfg.out, ".json"))


def _chart_for(f, info, kind, petal, depth):
    if kind is None:
        kind = {"attracting": "koenigs", "superattracting": "boettcher", "neutral": "abel"}.get(info.klass)
        if kind is None:
            raise PreconditionError(f"no chart for a {info.klass} fixed point")
    if kind not in DEFAULT_DEPTH:
        raise UsageError(f"unknown chart kind {kind!r}")
    d = depth if depth is not None else DEFAULT_DEPTH[kind]
    if kind == "koenigs":
        return koenigs_chart(f, info.z0, depth=d)
    if kind == "boettcher":
        return boettcher_chart(f, info.z0, depth=d)
    return abel_chart(f, info.z0, petal=petal, depth=d)


def chart_samples(chart, n: int, seed: int) -> np.ndarray:
    """Seeded uniform samples from the chart's disk (Koenigs, Boettcher) or petal (Abel)."""
    rng = np.random.default_rng(seed)
    r = np.sqrt(rng.random(n))
    t = 2 * np.pi * rng.random(n)
    unit = r * np.exp(1j * t)
    if chart.kind == "abel":
        c = chart.z0 + chart.petal_radius * np.exp(1j * chart.directions[chart.petal - 1])
        return c + 0.9 * chart.petal_radius * unit
    return chart.z0 + 0.9 * chart.local_radius * unit


def cmd_chart_table(cfg: RunConfig):
    p = cfg.params
    f = p["symbol"]
    info = _fixed_point(f, p["guess"])
    chart = _chart_for(f, info, p["kind"], p["petal"], p["depth"])
    pts = chart_samples(chart, p["samples"], p["seed"])
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["re", "im", "phi_re", "phi_im", "residual"])
    worst = 0.0
    for z in pts:
        v, res = chart_value_and_residual(chart, complex(z))
        worst = max(worst, res)
        w.writerow([repr(float(z.real)), repr(float(z.imag)), repr(v.real), repr(v.imag), repr(res)])
    if cfg.out:
        atomic_write(cfg.out, buf.getvalue().encode("utf-8"))
    else:
        sys.stdout.write(buf.getvalue())
    report = {"kind": chart.kind, "z0": chart.z0, "multiplier": chart.lam, "depth": chart.depth,
              "local_radius": chart.local_radius, "max_residual": worst, "samples": int(pts.size)}
    if cfg.out:
        _emit_report(cfg, report, _side_path(cfg.out, ".json"))


def cmd_render_g0(cfg: RunConfig):
    p = cfg.params
    f = HolomorphicMap.blaschke(p["alpha"])
    chart = koenigs_chart(f, 0j)
    cut = SpiralCut.for_chart(chart, p["delta"])
    grid = _grid(p)
    clearance = p["clearance"] if p["clearance"] is not None else grid.pixel_diagonal
    render = render_g0_full(chart, cut, grid, p["nmax"], clearance)
    stats = render.stats()
    scales = p["scales"] or default_scales(grid.resolution)
    comp = render.complement
    stats["box_dimension"] = box_dimension(comp, scales) if comp.mask.any() else None
    stats["delta"] = cut.delta
    stats["clearance"] = clearance
    stats["scales"] = scales
    if cfg.out:
        atomic_write(cfg.out, mask_to_pgm(render.g0.mask))
        stats_path = p["stats"] or _side_path(cfg.out, ".csv")
        lines = ["basin_pixels,complement_pixels,complement_fraction,box_dimension",
                 f"{stats['basin_pixels']},{stats['complement_pixels']},"
                 f"{stats['complement_fraction']!r},{stats['box_dimension']!r}"]
        atomic_write(stats_path, ("\n".join(lines) + "\n").encode("utf-8"))
    _emit_report(cfg, stats, _side_path(cfg.out, ".json"))


def _read_text(path: str) -> str:
    return Path(path).read_text(encoding="utf-8")


def cmd_runge_fit(cfg: RunConfig):
    p = cfg.params
    rows = list(csv.DictReader(io.StringIO(_read_text(p["input"]))))
    try:
        samples = [(complex(float(r["re"]), float(r["im"])), complex(float(r["t_re"]), float(r["t_im"])))
                   for r in rows]
    except (KeyError, TypeError, ValueError):
        raise UsageError("runge-fit input needs columns re,im,t_re,t_im")
    r, err = fit_rational(samples, [tuple(x) for x in p["poles"]], p["degree"], p["ridge"])
    _emit_report(cfg, {"max_error": err, "rational": r.to_dict(), "samples": len(samples)}, cfg.out)


def target_function(spec: dict) -> Callable:
    kind = spec.get("target")
    coeffs = [parse_complex(c) for c in spec.get("coeffs", [])]
    if kind == "const":
        c = coeffs[0] if coeffs else 0j
        return lambda z: np.full(np.shape(z), c, dtype=complex)
    if kind == "identity":
        return lambda z: np.asarray(z, dtype=complex)
    if kind == "poly":
        return lambda z: np.polynomial.polynomial.polyval(np.asarray(z, dtype=complex), coeffs)
    raise UsageError(f"unknown target kind {kind!r}")


def schedule_targets(specs: list) -> List[ScheduleTarget]:
    out = []
    for j, spec in enumerate(specs):
        unknown = set(spec) - {"target", "coeffs", "L", "eps"}
        if unknown:
            raise UsageError(f"unknown target keys: {', '.join(sorted(unknown))}")
        try:
            L = spec["L"]
            pts = circle_points(parse_complex(L["center"]), float(L["radius"]), int(L["samples"]))
            out.append(ScheduleTarget(target_function(spec), CompactGridSet.from_points(pts),
                                      float(spec["eps"]), f"{spec['target']}{j}"))
        except (KeyError, TypeError) as exc:
            raise UsageError(f"target {j} is incomplete: {exc}")
    return out


def cmd_universal_build(cfg: RunConfig):
    p = cfg.params
    f = p["symbol"]
    fin = p["finite"]
    if fin is not None:
        if set(fin) - {"E", "vectors", "eps"}:
            raise UsageError("finite block takes E, vectors, eps")
        e = [parse_complex(z) for z in fin["E"]]
        vecs = [[parse_complex(v) for v in vec] for vec in fin["vectors"]]
        info = _fixed_point(f, p["guess"])
        sched = finite_set_universal(f, e, p["punctures"], vecs, float(fin["eps"]), z0=info.z0)
    else:
        info = _fixed_point(f, p["guess"])
        chart = koenigs_chart(f, info.z0)
        sched = build_universal_schedule(f, chart, p["punctures"], schedule_targets(p["targets"]),
                                         p["nmax"])
    _emit_report(cfg, sched.to_dict(), cfg.out)


def cmd_omega_check(cfg: RunConfig):
    p = cfg.params
    try:
        sched = json.loads(_read_text(p["schedule"]))
        f = parse_symbol(sched["config"]["symbol"])
        guess = parse_complex(sched["config"].get("guess", [0, 0]))
        g = LaurentRational.from_dict(sched["g"])
        indices = sched["indices"]
    except (json.JSONDecodeError, KeyError, TypeError) as exc:
        raise UsageError(f"not a schedule report: {exc}")
    if not indices:
        raise PreconditionError("schedule has no indices")
    n = indices[p["index"]]
    pts = csv_to_points(_read_text(p["points"]))
    info = _fixed_point(f, guess)
    chart = koenigs_chart(f, info.z0)

    def h(z):
        w = np.asarray(z, dtype=complex)
        for _ in range(n):
            w = f(w)
        return g(w)

    vals = h(pts)
    tol_out = p["tol_out"]
    if tol_out is None:
        spread = float(np.ptp(vals.real) + np.ptp(vals.imag)) if vals.size else 0.0
        tol_out = 1e-4 * spread if spread > 0 else 1e-12
    rep = phi_fiber_check(chart, vals, pts, p["tol_in"], tol_out)
    _emit_report(cfg, {"n": n, **rep.to_dict()}, cfg.out)


def _load_set(path: str, p) -> CompactGridSet:
    data = Path(path).read_bytes()
    if data[:2] == b"P5":
        mask = pgm_to_mask(data)
        if mask.shape[0] != mask.shape[1]:
            raise UsageError("masks must be square")
        return CompactGridSet(grid=GridSpec(p.get("center", 0j), p.get("half_width", 1.0),
                                            mask.shape[0]), mask=mask)
    return CompactGridSet.from_points(csv_to_points(data.decode("utf-8")))


def cmd_hull(cfg: RunConfig):
    p = cfg.params
    k = _load_set(p["mask"], p)
    if not k.is_raster:
        raise UsageError("hull needs a PGM mask")
    hull = relative_hull(k, p["exclude"])
    if cfg.out:
        atomic_write(cfg.out, mask_to_pgm(hull.mask))
    _emit_report(cfg, {"holes_before": count_holes(k), "holes_after": count_holes(hull),
                       "filled_pixels": int(hull.mask.sum() - k.mask.sum())},
                 _side_path(cfg.out, ".json"))


def cmd_hausdorff(cfg: RunConfig):
    p = cfg.params
    d = hausdorff_distance(_load_set(p["a"], p), _load_set(p["b"], p))
    _emit_report(cfg, {"hausdorff_distance": d}, cfg.out)


def cmd_boxdim(cfg: RunConfig):
    p = cfg.params
    k = _load_set(p["mask"], {})
    if not k.is_raster:
        raise UsageError("boxdim needs a PGM mask")
    scales = p["scales"] or default_scales(k.grid.resolution)
    _emit_report(cfg, {"box_dimension": box_dimension(k, scales), "scales": scales}, cfg.out)


HANDLERS = {
    "classify": cmd_classify, "basin": cmd_basin, "chart-table": cmd_chart_table,
    "render-g0": cmd_render_g0, "runge-fit": cmd_runge_fit, "universal-build": cmd_universal_build,
    "omega-check": cmd_omega_check, "hull": cmd_hull, "hausdorff": cmd_hausdorff,
    "boxdim": cmd_boxdim,
}


def _error(payload: dict):
    sys.stderr.write(json.dumps(_jsonable(payload), sort_keys=True) + "\n")


def _check_writable(path: Optional[str]):
    if path:
        parent = Path(path).resolve().parent
        if not parent.is_dir() or not os.access(parent, os.W_OK):
            raise OSError(f"cannot write to {path}")


def execute(config: RunConfig) -> int:
    try:
        _check_writable(config.out)
        HANDLERS[config.command](config)
    except UsageError as exc:
        _error({"error": "usage", "message": str(exc)})
        return EXIT_USAGE
    except LabError as exc:
        _error(exc.to_dict())
        return EXIT_DOMAIN
    except OSError as exc:
        _error({"error": "io", "message": str(exc)})
        return EXIT_IO
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        cfg = parse_config(argv)
    except UsageError as exc:
        _error({"error": "usage", "message": str(exc)})
        return EXIT_USAGE
    except SystemExit as exc:  # --help / --version
        return int(exc.code or 0)
    return execute(cfg)


if __name__ == "__main__":
    sys.exit(main())
