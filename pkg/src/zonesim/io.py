"""File formats: weather CSV, manufacturer map CSV, result CSVs, text report, SVG charts."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from . import hvac as hv
from .simulation import ResultSet
from .weather import P_ATM, WeatherRecord, WeatherSeries, humidity_ratio, saturation_pressure

WEATHER_COLUMNS = (
    "timestamp",
    "dry_bulb_C",
    "rel_humidity_pct",
    "wind_speed_ms",
    "wind_dir_deg",
    "global_horiz_Wm2",
    "diffuse_horiz_Wm2",
    "cloud_cover_frac",
    "dew_point_C",
)
_OPTIONAL_WEATHER = {"diffuse_horiz_Wm2", "cloud_cover_frac", "dew_point_C"}

MAP_COLUMNS = ("T_out", "T_in", "w_in", "Q_total", "Q_sensible", "P_elec")

OUTPUT_FILES = {"zones": "zones.csv", "surfaces": "surfaces.csv", "flows": "flows.csv", "hvac": "hvac.csv"}
SUMMARY_FILE = "summary.txt"
REPORT_FILE = "report.txt"


class FormatError(ValueError):
    """Malformed input file; carries the offending line."""

    def __init__(self, path, line: int | None, message: str):
        self.path = str(path)
        self.line = line
        where = f"{self.path}:{line}" if line is not None else self.path
        super().__init__(f"{where}: {message}")


class MissingSeriesError(LookupError):
    def __init__(self, name: str):
        self.name = name
        super().__init__(f"missing series: {name}")


def fmt(v: float) -> str:
    """Locale-independent shortest round-trip decimal."""
    if not math.isfinite(v):
        raise ValueError(f"non-finite value {v!r} in output")
    return repr(float(v))


# -- weather ------------------------------------------------------------------


def read_weather_csv(path) -> WeatherSeries:
    path = Path(path)
    records = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "empty weather file") from None
        header = [h.strip() for h in header]
        missing = [c for c in WEATHER_COLUMNS if c not in header]
        if missing:
            raise FormatError(path, 1, f"missing column(s): {', '.join(missing)}")
        idx = {c: header.index(c) for c in WEATHER_COLUMNS}
        for line, row in enumerate(reader, start=2):
            if not row or all(not c.strip() for c in row):
                continue
            if len(row) < len(header):
                raise FormatError(path, line, f"expected {len(header)} fields, got {len(row)}")
            vals = {}
            try:
                ts = datetime.fromisoformat(row[idx["timestamp"]].strip())
                for c in WEATHER_COLUMNS[1:]:
                    text = row[idx[c]].strip()
                    if not text:
                        if c not in _OPTIONAL_WEATHER:
                            raise ValueError(f"{c} is required")
                        vals[c] = None
                    else:
                        vals[c] = float(text)
                        if not math.isfinite(vals[c]):
                            raise ValueError(f"{c} is not finite")
                rh = vals["rel_humidity_pct"]
                if not 0.0 <= rh <= 100.0:
                    raise ValueError("rel_humidity_pct must be in [0, 100]")
                records.append(
                    WeatherRecord(
                        ts,
                        vals["dry_bulb_C"],
                        float(humidity_ratio(vals["dry_bulb_C"], rh)),
                        vals["wind_speed_ms"],
                        vals["wind_dir_deg"] % 360.0,
                        vals["global_horiz_Wm2"],
                        vals["diffuse_horiz_Wm2"],
                        vals["cloud_cover_frac"],
                        vals["dew_point_C"],
                    )
                )
            except ValueError as exc:
                raise FormatError(path, line, str(exc)) from None
    if not records:
        raise FormatError(path, None, "no weather records")
    try:
        return WeatherSeries(records)
    except ValueError as exc:
        raise FormatError(path, None, str(exc)) from None


def relative_humidity(t_c: float, w: float) -> float:
    pw = w * P_ATM / (0.621945 + w)
    return float(100.0 * pw / saturation_pressure(t_c))


def write_weather_csv(series: WeatherSeries, path) -> None:
    def opt(v):
        return "" if v is None else fmt(v)

    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(WEATHER_COLUMNS)
        for r in series.records:
            w.writerow(
                [
                    r.timestamp.isoformat(),
                    fmt(r.dry_bulb),
                    fmt(min(relative_humidity(r.dry_bulb, r.humidity_ratio), 100.0)),
                    fmt(r.wind_speed),
                    fmt(r.wind_direction),
                    fmt(r.global_horizontal),
                    opt(r.diffuse_horizontal),
                    opt(r.cloud_cover),
                    opt(r.dew_point),
                ]
            )


# -- manufacturer map -----------------------------------------------------------


def read_map_csv(path) -> list[hv.MapPoint]:
    path = Path(path)
    points = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = [h.strip() for h in (reader.fieldnames or [])]
        missing = [c for c in MAP_COLUMNS if c not in header]
        if missing:
            raise FormatError(path, 1, f"missing column(s): {', '.join(missing)}")
        for line, row in enumerate(reader, start=2):
            try:
                v = [float(row[c]) for c in MAP_COLUMNS]
            except (TypeError, ValueError):
                raise FormatError(path, line, "non-numeric manufacturer data") from None
            points.append(hv.MapPoint(*v))
    return points


def write_map_csv(points, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(MAP_COLUMNS)
        for p in points:
            w.writerow([fmt(p.t_out), fmt(p.t_in), fmt(p.w_in), fmt(p.q_total), fmt(p.q_sensible), fmt(p.p_elec)])


# -- results ------------------------------------------------------------------


def _write_table(path: Path, times, columns: list[tuple[str, np.ndarray]]) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["timestamp"] + [name for name, _ in columns])
        data = np.column_stack([c for _, c in columns]) if columns else np.zeros((len(times), 0))
        for t, row in zip(times, data):
            w.writerow([t.isoformat()] + [fmt(v) for v in row])


def result_tables(result: ResultSet) -> dict[str, list[tuple[str, np.ndarray]]]:
    zones = []
    for k, z in enumerate(result.zone_ids):
        zones.append((f"{z}.air_temperature [C]", result.air_temperature[:, k]))
        zones.append((f"{z}.humidity_ratio [kg/kg]", result.humidity_ratio[:, k]))
        zones.append((f"{z}.unmet_load [W]", result.unmet_load[:, k]))
    surfaces = []
    for k, s in enumerate(result.surface_ids):
        surfaces.append((f"{s}.face_a [C]", result.surface_temperature[:, k, 0]))
        surfaces.append((f"{s}.face_b [C]", result.surface_temperature[:, k, 1]))
    flows = []
    for k, l in enumerate(result.link_ids):
        flows.append((f"{l}.forward [kg/s]", result.link_flows[:, k, 0]))
        flows.append((f"{l}.reverse [kg/s]", result.link_flows[:, k, 1]))
    hvac = []
    for cid, s in result.hvac.items():
        hvac.append((f"{cid}.total [W]", s["total"]))
        hvac.append((f"{cid}.sensible [W]", s["sensible"]))
        hvac.append((f"{cid}.latent [W]", s["latent"]))
        hvac.append((f"{cid}.electric [W]", s["electric"]))
        hvac.append((f"{cid}.on_fraction [-]", s["on_fraction"]))
    return {"zones": zones, "surfaces": surfaces, "flows": flows, "hvac": hvac}


def write_results(result: ResultSet, out_dir, groups=tuple(OUTPUT_FILES), summary_line: str | None = None) -> list[Path]:
    """One CSV per requested group that has series, plus the summary text."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for group, columns in result_tables(result).items():
        if group not in groups or (group != "zones" and not columns):
            continue
        path = out / OUTPUT_FILES[group]
        _write_table(path, result.times, columns)
        written.append(path)
    lines = [summary_line] if summary_line else []
    lines += summary_lines(result.summaries)
    (out / SUMMARY_FILE).write_text("\n".join(lines) + "\n", encoding="utf-8")
    written.append(out / SUMMARY_FILE)
    return written


@dataclass
class Table:
    times: list[datetime]
    columns: dict[str, np.ndarray]

    @property
    def dt(self) -> float:
        if len(self.times) < 2:
            return 3600.0
        return (self.times[1] - self.times[0]).total_seconds()


def read_table(path) -> Table:
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise FormatError(path, 1, "empty file") from None
        times, rows = [], []
        for line, row in enumerate(reader, start=2):
            try:
                times.append(datetime.fromisoformat(row[0]))
                rows.append([float(v) for v in row[1:]])
            except (ValueError, IndexError):
                raise FormatError(path, line, "malformed row") from None
    data = np.array(rows, dtype=float).reshape(len(rows), len(header) - 1)
    return Table(times, {name: data[:, k] for k, name in enumerate(header[1:])})


def summary_lines(summaries: dict[str, hv.HvacSummary]) -> list[str]:
    """HVAC block: daily electric energy, mean COP and fractional on-time per unit."""
    lines = []
    for cid, s in summaries.items():
        lines.append(f"[hvac {cid}]")
        lines.append("day  electric_kWh")
        for d, e in enumerate(s.daily_energy_kwh, start=1):
            lines.append(f"{d:>3}  {e:.4f}")
        lines.append(f"daily_energy_kWh_mean {np.mean(s.daily_energy_kwh):.4f}")
        lines.append(f"cooling_kWh {s.cooling_kwh:.4f}")
        lines.append(f"mean_COP {'n/a' if s.mean_cop is None else f'{s.mean_cop:.4f}'}")
        lines.append(f"fractional_on_time {s.fractional_on_time:.4f}")
    return lines


def hvac_summaries(table: Table) -> dict[str, hv.HvacSummary]:
    units = sorted({name.split(".")[0] for name in table.columns if name.endswith(".electric [W]")})
    out = {}
    for u in units:
        try:
            total = table.columns[f"{u}.total [W]"]
            electric = table.columns[f"{u}.electric [W]"]
            fot = table.columns[f"{u}.on_fraction [-]"]
        except KeyError as exc:
            raise MissingSeriesError(exc.args[0]) from None
        out[u] = hv.summarize_arrays(total, electric, fot, table.dt)
    return out


def build_report(out_dir, comfort_threshold: float = 28.0) -> str:
    out = Path(out_dir)
    zpath = out / OUTPUT_FILES["zones"]
    if not zpath.exists():
        raise MissingSeriesError("zones")
    zones = read_table(zpath)
    lines = [f"steps {len(zones.times)}  step_s {zones.dt:g}"]
    lines.append(f"[zones] comfort threshold {comfort_threshold:g} C")
    lines.append("zone  mean_C  max_C  hours_above")
    for name, series in zones.columns.items():
        if not name.endswith(".air_temperature [C]"):
            continue
        above = float(np.count_nonzero(series > comfort_threshold)) * zones.dt / 3600.0
        lines.append(f"{name.split('.')[0]}  {series.mean():.2f}  {series.max():.2f}  {above:g}")
    hpath = out / OUTPUT_FILES["hvac"]
    if hpath.exists():
        lines += summary_lines(hvac_summaries(read_table(hpath)))
    return "\n".join(lines) + "\n"


def find_series(out_dir, name: str) -> tuple[Table, str]:
    """Locate a series column, given its full header or header without unit."""
    for group, fname in OUTPUT_FILES.items():
        path = Path(out_dir) / fname
        if not path.exists():
            continue
        table = read_table(path)
        for col in table.columns:
            if col == name or col.split(" [")[0] == name:
                return table, col
    raise MissingSeriesError(name)


def default_chart_series(out_dir) -> list[str]:
    names = []
    for fname in (OUTPUT_FILES["zones"], OUTPUT_FILES["hvac"]):
        path = Path(out_dir) / fname
        if path.exists():
            with path.open(encoding="utf-8") as fh:
                header = next(csv.reader(fh))
            names += [h for h in header[1:] if h.endswith(".air_temperature [C]") or h.endswith(".electric [W]")]
    return names


def write_svg(table: Table, column: str, path) -> Path:
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "zonesim"
    name, _, unit = column.partition(" [")
    unit = unit.rstrip("]") or "-"
    fig, ax = plt.subplots(figsize=(8, 3.5))
    ax.plot(table.times, table.columns[column], label=name, linewidth=1.0)
    ax.set_xlabel("time")
    ax.set_ylabel(f"{name.split('.')[-1]} [{unit}]")
    ax.legend(loc="best")
    ax.grid(True, alpha=0.3)
    fig.autofmt_xdate()
    fig.tight_layout()
    path = Path(path)
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)
    return path


def svg_filename(column: str) -> str:
    base = column.split(" [")[0]
    return "".join(c if c.isalnum() or c in "-_." else "_" for c in base) + ".svg"
