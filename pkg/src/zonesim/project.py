"""YAML project files: schema check with line numbers, loading and round-trip serialization.

Top-level sections: ``name``, ``site``, ``zones``, ``interambiances``,
``components`` (walls and windows), ``links`` (air links), ``units`` (split
units), ``bindings`` and ``simulation``. Unknown keys are rejected.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from pathlib import Path
from typing import Any

import yaml

from . import hvac as hv
from .airflow import Crack, LargeOpening, WindExposure
from .catalog import BindingError, ModelBindingSet, bind
from .io import FormatError, read_map_csv
from .model import (
    Building,
    Component,
    ComponentKind,
    Glazing,
    Interambiance,
    Orientation,
    Site,
    SurfaceClass,
    SurfaceProps,
    WallLayer,
    Zone,
    validate_building,
)
from .simulation import OUTPUT_GROUPS, Coupling, SimulationConfig


class SchemaError(ValueError):
    """Structural problem in a project file, located by line and column."""

    def __init__(self, message: str, line: int | None = None, column: int | None = None, path: str | None = None):
        self.line, self.column, self.path = line, column, path
        where = path or "<project>"
        if line is not None:
            where += f":{line}:{column}"
        super().__init__(f"{where}: {message}")


class SemanticError(ValueError):
    """Well-formed file describing an invalid building or binding."""

    def __init__(self, messages: list[str]):
        self.messages = messages
        super().__init__("; ".join(messages))


# -- schema -------------------------------------------------------------------

NUM, INT, STR, BOOL, TIME = "number", "integer", "string", "boolean", "timestamp"


def _req(t):
    return (t, True)


def _opt(t):
    return (t, False)


_FACE = {"sw_absorptance": _opt(NUM), "sw_reflectance": _opt(NUM), "lw_emissivity": _opt(NUM)}
_LAYER = {"thickness": _req(NUM), "conductivity": _req(NUM), "density": _req(NUM), "specific_heat": _req(NUM)}
_MAP = {"csv": _opt(STR), "coefficients": _opt(({"q_total": _req([NUM]), "q_sensible": _req([NUM]), "p_elec": _req([NUM])},)), "rms": _opt(({"q_total": _opt(NUM), "q_sensible": _opt(NUM), "p_elec": _opt(NUM)},))}

SCHEMA: dict[str, Any] = {
    "name": _req(STR),
    "morphology": _opt(STR),
    "site": _opt(
        (
            {
                "latitude": _req(NUM),
                "longitude": _req(NUM),
                "altitude": _opt(NUM),
                "albedo": _opt(NUM),
                "time_zone_offset": _opt(NUM),
            },
        )
    ),
    "zones": _req(
        [
            {
                "id": _req(STR),
                "name": _opt(STR),
                "volume": _req(NUM),
                "air_capacitance_multiplier": _opt(NUM),
                "initial_temperature": _opt(NUM),
                "initial_humidity_ratio": _opt(NUM),
                "sensible_gain": _opt(NUM),
                "latent_gain": _opt(NUM),
                "infiltration_ach": _opt(NUM),
            }
        ]
    ),
    "interambiances": _opt(
        [{"id": _req(STR), "zone_a": _req(STR), "zone_b": _req(STR), "azimuth": _opt(NUM), "tilt": _opt(NUM)}]
    ),
    "components": _opt(
        [
            {
                "id": _req(STR),
                "kind": _req(STR),
                "interambiance": _req(STR),
                "area": _req(NUM),
                "layers": _opt([_LAYER]),
                "glazing": _opt(({"transmittance": _opt(NUM), "u_value": _opt(NUM)},)),
                "face_a": _opt((_FACE,)),
                "face_b": _opt((_FACE,)),
                "surface_class": _opt(STR),
                "host": _opt(STR),
                "ground_contact": _opt(BOOL),
            }
        ]
    ),
    "links": _opt(
        [
            {
                "id": _req(STR),
                "kind": _req(STR),
                "interambiance": _req(STR),
                "coefficient": _opt(NUM),
                "exponent": _opt(NUM),
                "elevation": _opt(NUM),
                "width": _opt(NUM),
                "height": _opt(NUM),
                "cd": _opt(NUM),
                "bottom_elevation": _opt(NUM),
                "cp": _opt(NUM),
                "cp_leeward": _opt(NUM),
            }
        ]
    ),
    "units": _opt(
        [
            {
                "id": _req(STR),
                "zone": _req(STR),
                "rated_total": _opt(NUM),
                "shr": _opt(NUM),
                "rated_electric": _opt(NUM),
                "tau": _opt(NUM),
                "setpoint": _opt(NUM),
                "deadband": _opt(NUM),
                "performance_map": _opt((_MAP,)),
            }
        ]
    ),
    "bindings": _opt([{"entity": _req(STR), "slot": _req(STR), "variant": _req(STR), "params": _opt("mapping")}]),
    "simulation": _opt(
        (
            {
                "start": _opt(TIME),
                "end": _opt(TIME),
                "thermal_step": _opt(NUM),
                "reduced_step": _opt(NUM),
                "coupling": _opt(STR),
                "onion_tolerance": _opt(NUM),
                "onion_max_iterations": _opt(INT),
                "outputs": _opt([STR]),
                "step": _opt(NUM),
            },
        )
    ),
}

_LINK_KINDS = {"CRACK": ComponentKind.AIRLINK_CRACK, "LARGE_OPENING": ComponentKind.AIRLINK_LARGE_OPENING}
_ENVELOPE_KINDS = {"WALL": ComponentKind.WALL, "WINDOW": ComponentKind.WINDOW}


def _err(node, message: str, path: str | None) -> SchemaError:
    m = node.start_mark
    return SchemaError(message, m.line + 1, m.column + 1, path)


def _construct(node):
    # build straight from the node; re-serializing can turn "..." into a document end
    return yaml.constructor.SafeConstructor().construct_object(node, deep=True)


def _scalar(node, kind: str, where: str, path):
    if not isinstance(node, yaml.ScalarNode):
        raise _err(node, f"{where}: expected a {kind}", path)
    try:
        value = _construct(node)
    except yaml.YAMLError as exc:
        raise _err(node, f"{where}: {exc}", path) from None
    if kind == NUM:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise _err(node, f"{where}: expected a number, got {node.value!r}", path)
        return float(value)
    if kind == INT:
        if isinstance(value, bool) or not isinstance(value, int):
            raise _err(node, f"{where}: expected an integer, got {node.value!r}", path)
        return value
    if kind == BOOL:
        if not isinstance(value, bool):
            raise _err(node, f"{where}: expected true or false, got {node.value!r}", path)
        return value
    if kind == TIME:
        if isinstance(value, datetime):
            return value.replace(tzinfo=None)
        try:
            return datetime.fromisoformat(str(value))
        except ValueError:
            raise _err(node, f"{where}: expected an ISO 8601 timestamp, got {node.value!r}", path) from None
    if value is None:
        raise _err(node, f"{where}: expected a string", path)
    return str(value)


def _check(node, schema, where: str, path):
    """Validate a composed node against ``schema``; return plain Python data."""
    if schema == "mapping":
        if not isinstance(node, yaml.MappingNode):
            raise _err(node, f"{where}: expected a mapping", path)
        try:
            return _construct(node)
        except yaml.YAMLError as exc:
            raise _err(node, f"{where}: {exc}", path) from None
    if isinstance(schema, str):
        return _scalar(node, schema, where, path)
    if isinstance(schema, list):
        if not isinstance(node, yaml.SequenceNode):
            raise _err(node, f"{where}: expected a list", path)
        return [_check(item, schema[0], f"{where}[{k}]", path) for k, item in enumerate(node.value)]
    if isinstance(schema, tuple):  # single mapping
        schema = schema[0]
    if not isinstance(node, yaml.MappingNode):
        raise _err(node, f"{where}: expected a mapping", path)
    out = {}
    for key_node, value_node in node.value:
        key = key_node.value
        if key not in schema:
            allowed = ", ".join(sorted(schema))
            raise _err(key_node, f"{where}: unknown key {key!r} (allowed: {allowed})", path)
        if key in out:
            raise _err(key_node, f"{where}: duplicate key {key!r}", path)
        out[key] = _check(value_node, schema[key][0], f"{where}.{key}" if where else key, path)
    for key, (_, required) in schema.items():
        if required and key not in out:
            raise _err(node, f"{where or 'document'}: missing required key {key!r}", path)
    return out


def parse_document(text: str, path: str | None = None) -> dict:
    """Schema-checked plain data from YAML text."""
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark or exc.context_mark
        line = mark.line + 1 if mark else None
        col = mark.column + 1 if mark else None
        raise SchemaError(f"YAML syntax: {exc.problem or exc}", line, col, path) from None
    except yaml.YAMLError as exc:
        raise SchemaError(f"YAML syntax: {exc}", None, None, path) from None
    if root is None:
        raise SchemaError("empty project file", 1, 1, path)
    return _check(root, (SCHEMA,), "", path)


# -- model construction ---------------------------------------------------------


@dataclass
class Project:
    building: Building
    bindings: ModelBindingSet
    simulation: dict[str, Any] = field(default_factory=dict)
    source: Path | None = None

    def config(self, **overrides) -> SimulationConfig:
        """Simulation config from the file, with CLI overrides (None means keep)."""
        s = dict(self.simulation)
        s.update({k: v for k, v in overrides.items() if v is not None})
        if "start" not in s or "end" not in s:
            raise SemanticError(["simulation period not set (simulation.start/end or --from/--to)"])
        kw = {k: s[k] for k in ("thermal_step", "reduced_step", "onion_tolerance", "onion_max_iterations", "step") if k in s}
        if "coupling" in s:
            c = s["coupling"]
            kw["coupling"] = c if isinstance(c, Coupling) else Coupling(str(c).upper())
        if "outputs" in s:
            kw["outputs"] = tuple(s["outputs"])
        try:
            return SimulationConfig(s["start"], s["end"], **kw)
        except ValueError as exc:
            raise SemanticError([f"simulation: {exc}"]) from None


def _face(d: dict | None) -> SurfaceProps:
    return SurfaceProps(**d) if d else SurfaceProps()


def _enum(cls, value: str, where: str):
    try:
        return cls(value.upper())
    except ValueError:
        allowed = ", ".join(m.value for m in cls)
        raise SemanticError([f"{where}: unknown value {value!r} (allowed: {allowed})"]) from None


def _unit(d: dict, base: Path | None) -> hv.SplitUnit:
    pm = None
    entry = d.get("performance_map")
    if entry:
        if "csv" in entry:
            csv_path = Path(entry["csv"])
            if base is not None and not csv_path.is_absolute():
                csv_path = base / csv_path
            try:
                pm = hv.fit_performance_map(read_map_csv(csv_path))
            except (OSError, FormatError, hv.HvacError) as exc:
                raise SemanticError([f"unit {d['id']}: performance map: {exc}"]) from None
        elif "coefficients" in entry:
            coefs = {q: tuple(v) for q, v in entry["coefficients"].items()}
            if any(len(c) != 4 for c in coefs.values()):
                raise SemanticError([f"unit {d['id']}: each map needs 4 coefficients"])
            pm = hv.PerformanceMap(coefs, dict(entry.get("rms", {})))
    kw = {k: d[k] for k in ("rated_total", "shr", "rated_electric", "tau", "setpoint", "deadband") if k in d}
    return hv.SplitUnit(performance_map=pm, **kw)


def build_project(data: dict, base_dir: Path | None = None) -> Project:
    """Turn schema-checked data into a validated building and binding set."""
    site = Site(**data["site"]) if "site" in data else Site()
    zones = tuple(Zone(**z) for z in data["zones"])
    ias = tuple(
        Interambiance(i["id"], i["zone_a"], i["zone_b"], Orientation(i.get("azimuth", 0.0), i.get("tilt", 90.0)))
        for i in data.get("interambiances", [])
    )
    comps = []
    for c in data.get("components", []):
        kind = _ENVELOPE_KINDS.get(c["kind"].upper())
        if kind is None:
            raise SemanticError([f"component {c['id']}: kind must be WALL or WINDOW, got {c['kind']!r}"])
        comps.append(
            Component(
                c["id"],
                kind,
                c["interambiance"],
                area=c["area"],
                layers=tuple(WallLayer(**l) for l in c.get("layers", [])),
                glazing=Glazing(**c["glazing"]) if "glazing" in c else (Glazing() if kind is ComponentKind.WINDOW else None),
                face_a=_face(c.get("face_a")),
                face_b=_face(c.get("face_b")),
                surface_class=_enum(SurfaceClass, c.get("surface_class", "VERTICAL_WALL"), f"component {c['id']}"),
                host_id=c.get("host"),
                ground_contact=c.get("ground_contact", False),
            )
        )
    for l in data.get("links", []):
        kind = _LINK_KINDS.get(l["kind"].upper())
        if kind is None:
            raise SemanticError([f"link {l['id']}: kind must be CRACK or LARGE_OPENING, got {l['kind']!r}"])
        try:
            if kind is ComponentKind.AIRLINK_CRACK:
                element = Crack(l["coefficient"], l.get("exponent", 0.65), l.get("elevation", 0.0))
            else:
                element = LargeOpening(l["width"], l["height"], l.get("cd", 0.78), l.get("bottom_elevation", 0.0))
        except KeyError as exc:
            raise SemanticError([f"link {l['id']}: missing {exc.args[0]!r}"]) from None
        exposure = WindExposure(l["cp"], l.get("cp_leeward")) if "cp" in l else None
        comps.append(Component(l["id"], kind, l["interambiance"], link=element, exposure=exposure))
    for u in data.get("units", []):
        comps.append(Component(u["id"], ComponentKind.HVAC_SPLIT, zone_id=u["zone"], unit=_unit(u, base_dir)))

    building = Building(data["name"], zones, ias, tuple(comps), site, morphology=data.get("morphology", ""))
    report = validate_building(building)
    if not report.ok:
        raise SemanticError([f"{i.entity}: {i.message}" for i in report.errors])
    try:
        bindings = bind(
            building,
            [(b["entity"], b["slot"], (b["variant"], b.get("params", {}))) for b in data.get("bindings", [])],
        )
    except BindingError as exc:
        raise SemanticError([f"binding {p.entity} {p.slot.value}: {p.code} {p.message}" for p in exc.problems]) from None
    building = Building(building.name, zones, ias, tuple(comps), site, bindings, building.morphology)
    sim = dict(data.get("simulation", {}))
    for o in sim.get("outputs", []):
        if o not in OUTPUT_GROUPS:
            raise SemanticError([f"simulation.outputs: unknown group {o!r}"])
    return Project(building, bindings, sim)


def load_project(path) -> Project:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except UnicodeDecodeError as exc:
        raise SchemaError(f"not UTF-8: {exc}", None, None, str(path)) from None
    data = parse_document(text, str(path))
    project = build_project(data, path.parent)
    project.source = path
    return project


def loads_project(text: str, base_dir=None) -> Project:
    return build_project(parse_document(text), Path(base_dir) if base_dir else None)


# -- serialization ----------------------------------------------------------------


def _face_dict(f: SurfaceProps) -> dict:
    return {"sw_absorptance": f.sw_absorptance, "sw_reflectance": f.sw_reflectance, "lw_emissivity": f.lw_emissivity}


def to_document(building: Building, bindings: ModelBindingSet | None = None, simulation: dict | None = None) -> dict:
    """Plain data in the project schema; ``dump_project`` renders it as YAML."""
    s = building.site
    doc: dict[str, Any] = {
        "name": building.name,
        "site": {
            "latitude": s.latitude,
            "longitude": s.longitude,
            "altitude": s.altitude,
            "albedo": s.albedo,
            "time_zone_offset": s.time_zone_offset,
        },
        "zones": [
            {
                "id": z.id,
                "name": z.name,
                "volume": z.volume,
                "air_capacitance_multiplier": z.air_capacitance_multiplier,
                "initial_temperature": z.initial_temperature,
                "initial_humidity_ratio": z.initial_humidity_ratio,
                "sensible_gain": z.sensible_gain,
                "latent_gain": z.latent_gain,
                "infiltration_ach": z.infiltration_ach,
            }
            for z in building.zones
        ],
        "interambiances": [
            {"id": i.id, "zone_a": i.zone_a, "zone_b": i.zone_b, "azimuth": i.orientation.azimuth, "tilt": i.orientation.tilt}
            for i in building.interambiances
        ],
    }
    if building.morphology:
        doc["morphology"] = building.morphology
    comps, links, units = [], [], []
    for c in building.components:
        if c.is_envelope:
            d = {
                "id": c.id,
                "kind": c.kind.value,
                "interambiance": c.interambiance_id,
                "area": c.area,
                "face_a": _face_dict(c.face_a),
                "face_b": _face_dict(c.face_b),
                "surface_class": c.surface_class.value,
                "ground_contact": c.ground_contact,
            }
            if c.layers:
                d["layers"] = [
                    {"thickness": l.thickness, "conductivity": l.conductivity, "density": l.density, "specific_heat": l.specific_heat}
                    for l in c.layers
                ]
            if c.glazing is not None:
                d["glazing"] = {"transmittance": c.glazing.transmittance, "u_value": c.glazing.u_value}
            if c.host_id:
                d["host"] = c.host_id
            comps.append(d)
        elif c.is_airlink:
            e = c.link
            if isinstance(e, Crack):
                d = {"id": c.id, "kind": "CRACK", "interambiance": c.interambiance_id, "coefficient": e.coefficient, "exponent": e.exponent, "elevation": e.elevation}
            else:
                d = {
                    "id": c.id,
                    "kind": "LARGE_OPENING",
                    "interambiance": c.interambiance_id,
                    "width": e.width,
                    "height": e.height,
                    "cd": e.cd,
                    "bottom_elevation": e.bottom_elevation,
                }
            if c.exposure is not None:
                d["cp"] = c.exposure.cp
                if c.exposure.cp_leeward is not None:
                    d["cp_leeward"] = c.exposure.cp_leeward
            links.append(d)
        elif c.kind is ComponentKind.HVAC_SPLIT:
            u = c.unit
            d = {
                "id": c.id,
                "zone": c.zone_id,
                "rated_total": u.rated_total,
                "shr": u.shr,
                "rated_electric": u.rated_electric,
                "tau": u.tau,
                "setpoint": u.setpoint,
                "deadband": u.deadband,
            }
            if u.performance_map is not None:
                d["performance_map"] = {
                    "coefficients": {q: list(v) for q, v in u.performance_map.coefficients.items()},
                    "rms": dict(u.performance_map.rms),
                }
            units.append(d)
    doc["components"] = comps
    if links:
        doc["links"] = links
    if units:
        doc["units"] = units
    bindings = bindings or building.bindings
    chosen = bindings.non_default() if bindings is not None else []
    if chosen:
        doc["bindings"] = [
            {"entity": e, "slot": v.slot.value, "variant": v.variant, "params": _plain(dict(v.params))} for e, v in chosen
        ]
    if simulation:
        sim = {}
        for k, v in simulation.items():
            if isinstance(v, datetime):
                v = v.isoformat()
            elif isinstance(v, Coupling):
                v = v.value
            elif isinstance(v, tuple):
                v = list(v)
            sim[k] = v
        doc["simulation"] = sim
    return doc


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_plain(x) for x in v]
    return v


def dump_project(building: Building, bindings: ModelBindingSet | None = None, simulation: dict | None = None) -> str:
    return yaml.safe_dump(to_document(building, bindings, simulation), sort_keys=False, allow_unicode=True)


def config_dict(config: SimulationConfig) -> dict:
    return {
        "start": config.start,
        "end": config.end,
        "thermal_step": config.thermal_step,
        "reduced_step": config.reduced_step,
        "coupling": config.coupling,
        "onion_tolerance": config.onion_tolerance,
        "onion_max_iterations": config.onion_max_iterations,
        "outputs": config.outputs,
    } | ({"step": config.step} if config.step else {})


__all__ = [
    "Project",
    "SchemaError",
    "SemanticError",
    "build_project",
    "config_dict",
    "dump_project",
    "load_project",
    "loads_project",
    "parse_document",
    "to_document",
]
