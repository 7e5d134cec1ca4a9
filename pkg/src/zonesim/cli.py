"""Command-line interface.

Exit codes:
  0  success
  1  schema error (malformed project, weather or map file)
  2  semantic error (invalid building, binding or settings)
  3  solver failure (non-convergence or singular system), with timestamp
  4  weather gap, naming the first missing timestamp
  5  missing result series
"""
from __future__ import annotations

import argparse
import json
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from datetime import datetime
from pathlib import Path

from . import __version__
from . import io as zio
from .hvac import HvacError, cop_curve
from .project import Project, SchemaError, SemanticError, load_project
from .simulation import Coupling, StepError, simulate
from .weather import WeatherGapError

EXIT_OK, EXIT_SCHEMA, EXIT_SEMANTIC, EXIT_SOLVER, EXIT_WEATHER_GAP, EXIT_MISSING_SERIES = range(6)
OUTPUT_ENV = "ZONESIM_OUTPUT_DIR"

log = logging.getLogger("zonesim")


def _err(msg: str) -> None:
    print(f"error: {msg}", file=sys.stderr)


def _timestamp(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an ISO 8601 timestamp: {text!r}") from None


# -- validate -----------------------------------------------------------------


def cmd_validate(args) -> int:
    report: dict = {"file": str(args.project), "ok": False, "errors": [], "warnings": []}
    code = EXIT_OK
    try:
        project = load_project(args.project)
    except OSError as exc:
        report["errors"].append({"kind": "schema", "message": str(exc)})
        code = EXIT_SCHEMA
    except SchemaError as exc:
        report["errors"].append({"kind": "schema", "message": str(exc), "line": exc.line, "column": exc.column})
        code = EXIT_SCHEMA
    except SemanticError as exc:
        report["errors"] += [{"kind": "semantic", "message": m} for m in exc.messages]
        code = EXIT_SEMANTIC
    else:
        from .model import validate_building

        report["warnings"] = [f"{i.entity}: {i.message}" for i in validate_building(project.building).warnings]
        report["ok"] = True
    if args.json_report:
        print(json.dumps(report, indent=2))
    else:
        for e in report["errors"]:
            _err(e["message"])
        for w in report["warnings"]:
            print(f"warning: {w}", file=sys.stderr)
        if report["ok"]:
            print(f"{args.project}: ok")
    return code


# -- simulate -----------------------------------------------------------------


def _non_default_warning(project: Project) -> list[str]:
    return [f"{entity} {v.slot.value}={v.variant}" for entity, v in project.bindings.non_default()]


def _run_one(project_path: str, weather_path: str, out_dir: str, opts: dict) -> tuple[int, list[str], str]:
    """One simulation: (exit code, warnings, summary or error). Safe in a worker process."""
    warnings: list[str] = []
    try:
        project = load_project(project_path)
        if not opts["expert"]:
            nd = _non_default_warning(project)
            if nd:
                warnings.append("non-default model bindings used without --expert: " + ", ".join(nd))
        weather = zio.read_weather_csv(weather_path)
        config = project.config(start=opts["start"], end=opts["end"], step=opts["step"], coupling=opts["coupling"])
        t0 = time.perf_counter()
        result = simulate(project.building, project.bindings, weather, config)
    except (OSError, SchemaError, zio.FormatError) as exc:
        return EXIT_SCHEMA, warnings, str(exc)
    except SemanticError as exc:
        return EXIT_SEMANTIC, warnings, str(exc)
    except WeatherGapError as exc:
        return EXIT_WEATHER_GAP, warnings, str(exc)
    except StepError as exc:
        return EXIT_SOLVER, warnings, f"solver failure at {exc}"
    except (ValueError, HvacError) as exc:
        return EXIT_SEMANTIC, warnings, str(exc)
    line = result.summary_line(time.perf_counter() - t0)
    zio.write_results(result, out_dir, config.outputs, line)
    warnings += result.warnings[:20]
    if len(result.warnings) > 20:
        warnings.append(f"{len(result.warnings) - 20} more warnings")
    return EXIT_OK, warnings, line


def _out_dir(value: str | None) -> str:
    out = value or os.environ.get(OUTPUT_ENV)
    if not out:
        raise SystemExit(_usage_exit(f"no output directory: use -o or set {OUTPUT_ENV}"))
    return out


def _usage_exit(msg: str) -> int:
    _err(msg)
    return EXIT_SEMANTIC


def cmd_simulate(args) -> int:
    out = _out_dir(args.output)
    opts = {
        "start": args.start,
        "end": args.end,
        "step": args.step,
        "coupling": args.coupling,
        "expert": args.expert,
    }
    projects = [args.project] + list(args.variant or [])
    if len(projects) == 1:
        jobs = [(args.project, args.weather, out, opts)]
    else:
        jobs = [(p, args.weather, str(Path(out) / Path(p).stem), opts) for p in projects]
    if args.jobs > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=args.jobs) as pool:
            results = list(pool.map(_run_one, *zip(*jobs)))
    else:
        results = [_run_one(*j) for j in jobs]
    worst = EXIT_OK
    for code, warnings, message in results:
        for w in warnings:
            print(f"warning: {w}", file=sys.stderr)
        if code == EXIT_OK:
            print(message)
        else:
            _err(message)
        worst = max(worst, code)
    return worst


# -- report -------------------------------------------------------------------


def cmd_report(args) -> int:
    out = Path(args.outdir)
    try:
        text = zio.build_report(out, args.comfort_threshold)
        (out / zio.REPORT_FILE).write_text(text, encoding="utf-8")
        sys.stdout.write(text)
        if args.svg:
            names = args.series or zio.default_chart_series(out)
            for name in names:
                table, col = zio.find_series(out, name)
                path = zio.write_svg(table, col, out / zio.svg_filename(col))
                print(f"wrote {path}")
    except zio.MissingSeriesError as exc:
        _err(str(exc))
        return EXIT_MISSING_SERIES
    except zio.FormatError as exc:
        _err(str(exc))
        return EXIT_SCHEMA
    return EXIT_OK


def cmd_cop_curve(args) -> int:
    """COP versus fractional on-time from a short-step run's HVAC series."""
    out = Path(args.outdir)
    path = out / zio.OUTPUT_FILES["hvac"]
    if not path.exists():
        _err("missing series: hvac")
        return EXIT_MISSING_SERIES
    table = zio.read_table(path)
    units = sorted({c.split(".")[0] for c in table.columns if c.endswith(".electric [W]")})
    if args.unit:
        if args.unit not in units:
            _err(f"missing series: {args.unit}.electric [W]")
            return EXIT_MISSING_SERIES
        units = [args.unit]
    lines = ["unit,fractional_on_time,cop"]
    for u in units:
        try:
            curve = cop_curve(
                table.columns[f"{u}.total [W]"],
                table.columns[f"{u}.electric [W]"],
                table.columns[f"{u}.on_fraction [-]"],
                table.dt,
                args.window,
                args.bins,
            )
        except KeyError as exc:
            _err(f"missing series: {exc.args[0]}")
            return EXIT_MISSING_SERIES
        except HvacError as exc:
            _err(f"{u}: {exc}")
            return EXIT_SEMANTIC
        lines += [f"{u},{zio.fmt(f)},{zio.fmt(c)}" for f, c in zip(curve.fot, curve.cop)]
    text = "\n".join(lines) + "\n"
    if args.output:
        Path(args.output).write_text(text, encoding="utf-8")
    sys.stdout.write(text)
    return EXIT_OK


# -- entry point --------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="zonesim", description="Multizone building thermal and airflow simulation.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true", help="log solver diagnostics")
    sub = p.add_subparsers(dest="command", required=True)

    v = sub.add_parser("validate", help="check a project file")
    v.add_argument("project")
    v.add_argument("--json-report", action="store_true", help="print a machine-readable report")
    v.set_defaults(func=cmd_validate)

    s = sub.add_parser("simulate", help="run a project against a weather file")
    s.add_argument("project")
    s.add_argument("weather")
    s.add_argument("-o", "--output", help=f"output directory (default ${OUTPUT_ENV})")
    s.add_argument("--from", dest="start", type=_timestamp, help="first step start, ISO 8601")
    s.add_argument("--to", dest="end", type=_timestamp, help="last step end, ISO 8601")
    s.add_argument("--step", type=float, help="force a uniform step in seconds")
    s.add_argument("--expert", action="store_true", help="silence the non-default binding warning")
    s.add_argument(
        "--coupling",
        type=lambda x: Coupling(x.upper()),
        choices=list(Coupling),
        metavar="{ping_pong,onion}",
        help="airflow/thermal coupling (default from the project, else ping_pong)",
    )
    s.add_argument("--seedless", action="store_true", help="accepted for compatibility; runs are always deterministic")
    s.add_argument("--jobs", type=int, default=1, help="parallel workers for --variant projects")
    s.add_argument("--variant", action="append", help="extra project run against the same weather (repeatable)")
    s.set_defaults(func=cmd_simulate)

    r = sub.add_parser("report", help="summarize an output directory")
    r.add_argument("outdir")
    r.add_argument("--svg", action="store_true", help="write one SVG chart per series")
    r.add_argument("--series", action="append", help="series to chart (repeatable; default zone temperatures and electric power)")
    r.add_argument("--comfort-threshold", type=float, default=28.0, help="comfort threshold, C")
    r.set_defaults(func=cmd_report)

    c = sub.add_parser("cop-curve", help="COP versus fractional on-time from a short-step run")
    c.add_argument("outdir")
    c.add_argument("--unit", help="HVAC component id (default all units)")
    c.add_argument("--window", type=float, default=3600.0, help="averaging window, s (default 3600)")
    c.add_argument("--bins", type=int, default=10, help="fractional on-time bins (default 10)")
    c.add_argument("-o", "--output", help="also write the curve to this CSV file")
    c.set_defaults(func=cmd_cop_curve)
    return p


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # usage errors, --help and --version
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except SystemExit as exc:
        return int(exc.code or 0)


if __name__ == "__main__":
    sys.exit(main())
