"""Command-line interface.

Exit codes: 0 analysis completed, 1 input error, 2 numerical failure,
3 zoo expectation mismatch (``zoo run`` only).  Verdicts themselves never
change the exit code.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path
from typing import Sequence

from . import __version__, analysis, boundary, expr, zoo
from .geometry import GeometryError, MetricSpec, build_spec
from .report import dumps, report_dict, summary_text

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC, EXIT_MISMATCH = 0, 1, 2, 3

REQUIRED_KEYS = ("name", "dimension", "coordinates", "signature", "components", "defining_function")
OPTIONAL_KEYS = ("parameters", "boundary_chart", "boundary_parameters", "boundary_samples", "boundary_box")


class InputError(ValueError):
    pass


# ---------------------------------------------------------------------------
# metric spec files


def spec_from_dict(data: dict) -> MetricSpec:
    if not isinstance(data, dict):
        raise InputError("metric spec must be a JSON object")
    unknown = sorted(set(data) - set(REQUIRED_KEYS) - set(OPTIONAL_KEYS))
    if unknown:
        raise InputError(f"{unknown[0]}: unknown key")
    for key in REQUIRED_KEYS:
        if key not in data:
            raise InputError(f"{key}: missing required key")
    coords = data["coordinates"]
    if not isinstance(coords, list) or not all(isinstance(c, str) for c in coords):
        raise InputError("coordinates: must be an array of names")
    if data["dimension"] != len(coords):
        raise InputError(f"dimension: {data['dimension']!r} does not match {len(coords)} coordinates")
    params = data.get("parameters", {})
    if not isinstance(params, dict) or not all(isinstance(v, (int, float)) for v in params.values()):
        raise InputError("parameters: must map names to numbers")
    comps = data["components"]
    if not isinstance(comps, list) or not all(isinstance(r, list) and all(isinstance(e, str) for e in r) for r in comps):
        raise InputError("components: must be an array of arrays of expression strings")
    try:
        return build_spec(
            name=str(data["name"]),
            coords=coords,
            components=comps,
            defining_function=data["defining_function"],
            signature=data["signature"],
            params=params,
            boundary_chart=data.get("boundary_chart"),
            boundary_params=data.get("boundary_parameters"),
            boundary_samples=data.get("boundary_samples"),
            boundary_box=data.get("boundary_box"),
        )
    except expr.ExprError as exc:
        raise InputError(str(exc)) from exc
    except (TypeError, GeometryError) as exc:
        raise InputError(str(exc)) from exc


def load_spec(path: str | Path) -> MetricSpec:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"cannot read {path}: {exc.strerror}") from exc
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: malformed JSON ({exc.msg} at line {exc.lineno})") from exc
    return spec_from_dict(data)


def spec_to_dict(spec: MetricSpec) -> dict:
    src = spec.sources
    out = {
        "name": spec.name,
        "dimension": spec.dim,
        "coordinates": list(spec.coords),
        "signature": list(spec.signature),
        "parameters": dict(spec.params),
        "components": src["components"],
        "defining_function": src["defining_function"],
    }
    if src.get("boundary_chart") is not None:
        out["boundary_chart"] = src["boundary_chart"]
        out["boundary_parameters"] = list(spec.boundary_params)
    if spec.boundary_samples is not None:
        out["boundary_samples"] = [list(s) for s in spec.boundary_samples]
    if spec.boundary_box is not None:
        out["boundary_box"] = [list(b) for b in spec.boundary_box]
    return out


# ---------------------------------------------------------------------------
# argument parsing


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--tol-extend", type=float, default=1e-6, help="relative residual for 'extends'")
    p.add_argument("--samples", type=int, default=25, help="samples per ray")
    p.add_argument("--ratio", type=float, default=0.7, help="geometric ratio of the ray schedule")
    p.add_argument("--t0", type=float, default=0.1, help="largest ray parameter")
    p.add_argument("--degree", type=int, default=4, help="polynomial degree of the extension fit")
    p.add_argument("--boundary-points", type=int, default=analysis.DEFAULT_BOUNDARY_POINTS,
                   help="number of low-discrepancy boundary samples")


def _param(text: str) -> tuple[str, float]:
    name, sep, value = text.partition("=")
    if not sep:
        raise argparse.ArgumentTypeError(f"expected NAME=VALUE, got {text!r}")
    return name.strip(), float(value)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="geomlab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"geomlab {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", help="full report for a metric spec file")
    p.add_argument("--metric", required=True)
    p.add_argument("--out")
    _add_config_flags(p)

    p = sub.add_parser("check-extension", help="trace-free Christoffel extension test only")
    p.add_argument("--metric", required=True)
    p.add_argument("--out")
    _add_config_flags(p)

    p = sub.add_parser("asymptotics", help="normal form, conformal class and trace-free Ricci checks")
    p.add_argument("--metric", required=True)
    p.add_argument("--out")
    p.add_argument("--rescale", action="append", default=[], metavar="EXPR",
                   help="also test the conformal class under r -> exp(EXPR) r (repeatable)")
    _add_config_flags(p)

    z = sub.add_parser("zoo", help="built-in metrics").add_subparsers(dest="zoo_command", required=True)
    z.add_parser("list", help="list entries")
    p = z.add_parser("export", help="write an entry as a metric spec file")
    p.add_argument("name")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--param", type=_param, action="append", default=[])
    p = z.add_parser("run", help="analyze an entry and compare with its expectations")
    p.add_argument("name")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--out")
    p.add_argument("--param", type=_param, action="append", default=[])
    _add_config_flags(p)
    return ap


def _config(args) -> analysis.AnalysisConfig:
    cfg = analysis.AnalysisConfig(
        extend_tolerance=args.tol_extend,
        degree=args.degree,
        t0=args.t0,
        ratio=args.ratio,
        count=args.samples,
        boundary_points=args.boundary_points,
    )
    if not 0 < cfg.ratio < 1 or cfg.t0 <= 0 or cfg.degree < 1 or cfg.count < cfg.degree + 3:
        raise InputError("ray schedule: need 0 < ratio < 1, t0 > 0, degree >= 1, samples >= degree + 3")
    if cfg.extend_tolerance <= 0 or cfg.boundary_points < 1:
        raise InputError("tolerances: need --tol-extend > 0 and --boundary-points >= 1")
    return cfg


# ---------------------------------------------------------------------------
# commands


def _emit(data: dict, out: str | None) -> None:
    if out:
        Path(out).write_text(dumps(data))


def _analyze(spec: MetricSpec, cfg, sections=analysis.SECTIONS):
    try:
        return analysis.full_report(spec, cfg, sections)
    except (GeometryError, boundary.BoundaryError, analysis.AnalysisError) as exc:
        raise InputError(str(exc)) from exc


def cmd_analyze(args) -> int:
    rep = _analyze(load_spec(args.metric), _config(args))
    _emit(report_dict(rep), args.out)
    sys.stdout.write(summary_text(rep))
    return EXIT_OK


def cmd_check_extension(args) -> int:
    spec = load_spec(args.metric)
    cfg = _config(args)
    rep = _analyze(spec, cfg, ("extension_test",))
    _emit(report_dict(rep), args.out)
    sys.stdout.write(summary_text(rep))
    return EXIT_OK


def cmd_asymptotics(args) -> int:
    spec = load_spec(args.metric)
    cfg = _config(args)
    rep = _analyze(spec, cfg, ("scalar_boundary", "asymptotics"))
    data = report_dict(rep)
    lines = []
    if args.rescale:
        data["conformal_invariance"] = []
        for u in args.rescale:
            try:
                res = analysis.conformal_class_invariance(spec, u, cfg)
            except expr.ExprError as exc:
                raise InputError(f"--rescale: {exc}") from exc
            except (ArithmeticError, analysis.AnalysisError) as exc:
                res = {"error": str(exc)}
            data["conformal_invariance"].append({"rescale": u, **res})
            if "max_deviation" in res:
                lines.append(f"  conformal deviation [{u}]: {res['max_deviation']:.6g}")
    _emit(data, args.out)
    sys.stdout.write(summary_text(rep) + "".join(line + "\n" for line in lines))
    return EXIT_OK


def cmd_zoo(args) -> int:
    if args.zoo_command == "list":
        for name in zoo.names():
            entry = zoo.get(name)
            dims = ",".join(map(str, entry.dims))
            sys.stdout.write(f"{name}  (m = {dims})  {entry.description}\n")
        return EXIT_OK
    params = dict(args.param)
    try:
        spec = zoo.instantiate(args.name, args.m, params)
    except (zoo.ZooError, ValueError) as exc:
        raise InputError(str(exc).strip("'\"")) from exc
    if args.zoo_command == "export":
        Path(args.out).write_text(dumps(spec_to_dict(spec)))
        return EXIT_OK
    rep = _analyze(spec, _config(args))
    data = report_dict(rep)
    mismatches = []
    for e in zoo.expectations(args.name, args.m, params):
        got = rep.get(e.path)
        if not e.matches(got):
            mismatches.append({"path": e.path, "expected": e.value, "got": got, "tol": e.tol,
                               "provenance": e.provenance})
    data["expectations"] = {"mismatches": mismatches}
    _emit(data, args.out)
    sys.stdout.write(summary_text(rep))
    for mm in mismatches:
        sys.stdout.write(f"  MISMATCH {mm['path']}: expected {mm['expected']!r}, got {mm['got']!r}\n")
    sys.stdout.write("  expectations: " + ("all met\n" if not mismatches else f"{len(mismatches)} mismatched\n"))
    return EXIT_MISMATCH if mismatches else EXIT_OK


COMMANDS = {
    "analyze": cmd_analyze,
    "check-extension": cmd_check_extension,
    "asymptotics": cmd_asymptotics,
    "zoo": cmd_zoo,
}


def run(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except InputError as exc:
        sys.stderr.write(f"error: {exc}\n")
        return EXIT_INPUT
    except (ArithmeticError, ValueError) as exc:
        sys.stderr.write(f"numerical failure: {type(exc).__name__}: {exc}\n")
        return EXIT_NUMERIC


def main() -> None:
    sys.exit(run())
