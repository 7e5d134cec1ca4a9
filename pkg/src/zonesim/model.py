"""Building description: zones, interambiances, components and their validation.

The outside is a reserved zone id (:data:`OUTSIDE`). Every boundary condition
attaches through an interambiance that has the outside on one of its sides.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import TYPE_CHECKING

from .airflow import Crack, LargeOpening, WindExposure
from .hvac import SplitUnit

if TYPE_CHECKING:
    from .catalog import ModelBindingSet

OUTSIDE = "OUTSIDE"


class ComponentKind(str, enum.Enum):
    WALL = "WALL"
    WINDOW = "WINDOW"
    HVAC_SPLIT = "HVAC_SPLIT"
    AIRLINK_CRACK = "AIRLINK_CRACK"
    AIRLINK_LARGE_OPENING = "AIRLINK_LARGE_OPENING"


class SurfaceClass(str, enum.Enum):
    FLOOR = "FLOOR"
    CEILING = "CEILING"
    VERTICAL_WALL = "VERTICAL_WALL"
    WINDOW = "WINDOW"
    INTERIOR_SEPARATION = "INTERIOR_SEPARATION"

    def flipped(self) -> SurfaceClass:
        """Class of the opposite face of the same component."""
        if self is SurfaceClass.FLOOR:
            return SurfaceClass.CEILING
        if self is SurfaceClass.CEILING:
            return SurfaceClass.FLOOR
        return self


@dataclass(frozen=True)
class Site:
    latitude: float = 0.0
    longitude: float = 0.0
    altitude: float = 0.0
    albedo: float = 0.2
    time_zone_offset: float = 0.0


@dataclass(frozen=True)
class Zone:
    id: str
    name: str = ""
    volume: float = 1.0
    air_capacitance_multiplier: float = 1.0
    initial_temperature: float = 20.0
    initial_humidity_ratio: float = 0.008
    sensible_gain: float = 0.0
    latent_gain: float = 0.0
    infiltration_ach: float = 0.0


@dataclass(frozen=True)
class Orientation:
    azimuth: float = 0.0  # degrees from north, clockwise
    tilt: float = 90.0  # 0 = facing up, 90 = vertical


@dataclass(frozen=True)
class Interambiance:
    id: str
    zone_a: str
    zone_b: str
    orientation: Orientation = field(default_factory=Orientation)

    @property
    def faces_outside(self) -> bool:
        return OUTSIDE in (self.zone_a, self.zone_b)

    def other(self, zone_id: str) -> str:
        return self.zone_b if zone_id == self.zone_a else self.zone_a


@dataclass(frozen=True)
class WallLayer:
    thickness: float
    conductivity: float
    density: float
    specific_heat: float

    @property
    def resistance(self) -> float:
        """Unit-area resistance, m2K/W."""
        return self.thickness / self.conductivity

    @property
    def heat_capacity(self) -> float:
        """Unit-area heat capacity, J/(m2K)."""
        return self.density * self.specific_heat * self.thickness

    @property
    def diffusivity(self) -> float:
        return self.conductivity / (self.density * self.specific_heat)


@dataclass(frozen=True)
class SurfaceProps:
    sw_absorptance: float = 0.6
    sw_reflectance: float = 0.4
    lw_emissivity: float = 0.9


@dataclass(frozen=True)
class Glazing:
    transmittance: float = 0.8
    u_value: float = 5.8


@dataclass(frozen=True)
class Component:
    """A wall, window, air link or split unit.

    Walls and windows sit on an interambiance. Their layers run from the
    ``zone_a`` side (``face_a``) to the ``zone_b`` side (``face_b``), and
    ``surface_class`` is the class seen from ``zone_b``. Air links also sit on
    an interambiance and carry positive flow from ``zone_a`` to ``zone_b``.
    Split units sit in a zone.
    """

    id: str
    kind: ComponentKind
    interambiance_id: str | None = None
    zone_id: str | None = None
    area: float = 0.0
    layers: tuple[WallLayer, ...] = ()
    glazing: Glazing | None = None
    face_a: SurfaceProps = field(default_factory=SurfaceProps)
    face_b: SurfaceProps = field(default_factory=SurfaceProps)
    surface_class: SurfaceClass = SurfaceClass.VERTICAL_WALL
    host_id: str | None = None
    ground_contact: bool = False
    link: Crack | LargeOpening | None = None
    exposure: WindExposure | None = None
    unit: SplitUnit | None = None

    @property
    def is_envelope(self) -> bool:
        return self.kind in (ComponentKind.WALL, ComponentKind.WINDOW)

    @property
    def is_airlink(self) -> bool:
        return self.kind in (ComponentKind.AIRLINK_CRACK, ComponentKind.AIRLINK_LARGE_OPENING)

    def face(self, side: str) -> SurfaceProps:
        return self.face_a if side == "a" else self.face_b

    def face_class(self, side: str) -> SurfaceClass:
        if self.kind is ComponentKind.WINDOW:
            return SurfaceClass.WINDOW
        return self.surface_class if side == "b" else self.surface_class.flipped()


@dataclass(frozen=True)
class Building:
    name: str
    zones: tuple[Zone, ...]
    interambiances: tuple[Interambiance, ...] = ()
    components: tuple[Component, ...] = ()
    site: Site = field(default_factory=Site)
    bindings: ModelBindingSet | None = None
    morphology: str = ""

    def zone(self, zone_id: str) -> Zone:
        for z in self.zones:
            if z.id == zone_id:
                return z
        raise KeyError(zone_id)

    def interambiance(self, ia_id: str) -> Interambiance:
        for ia in self.interambiances:
            if ia.id == ia_id:
                return ia
        raise KeyError(ia_id)

    def component(self, comp_id: str) -> Component:
        for c in self.components:
            if c.id == comp_id:
                return c
        raise KeyError(comp_id)

    @property
    def zone_ids(self) -> list[str]:
        return [z.id for z in self.zones]


# -- validation ---------------------------------------------------------------


@dataclass(frozen=True)
class Issue:
    severity: str  # "error" or "warning"
    entity: str
    message: str


@dataclass(frozen=True)
class ValidationReport:
    issues: tuple[Issue, ...] = ()

    @property
    def errors(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "error"]

    @property
    def warnings(self) -> list[Issue]:
        return [i for i in self.issues if i.severity == "warning"]

    @property
    def ok(self) -> bool:
        return not self.errors

    def to_dict(self) -> dict:
        return {
            "ok": self.ok,
            "issues": [
                {"severity": i.severity, "entity": i.entity, "message": i.message}
                for i in self.issues
            ],
        }


class InvalidBuildingError(ValueError):
    def __init__(self, report: ValidationReport):
        self.report = report
        msgs = "; ".join(f"{i.entity}: {i.message}" for i in report.errors)
        super().__init__(f"invalid building: {msgs}")


def _check_face(comp_id: str, side: str, props: SurfaceProps, out: list[Issue]) -> None:
    a, r, e = props.sw_absorptance, props.sw_reflectance, props.lw_emissivity
    for name, v in (("sw_absorptance", a), ("sw_reflectance", r), ("lw_emissivity", e)):
        if not 0.0 <= v <= 1.0:
            out.append(Issue("error", comp_id, f"face {side}: {name}={v} outside [0, 1]"))
    if a + r > 1.0 + 1e-12:
        out.append(Issue("error", comp_id, f"face {side}: absorptance + reflectance = {a + r:g} > 1"))


def validate_building(b: Building) -> ValidationReport:
    """Check type invariants and the entity graph.

    Never raises; every failure is an entry of the returned report.
    """
    out: list[Issue] = []
    site = b.site
    if not -90.0 <= site.latitude <= 90.0:
        out.append(Issue("error", "site", f"latitude {site.latitude} outside [-90, 90]"))
    if not 0.0 <= site.albedo <= 1.0:
        out.append(Issue("error", "site", f"albedo {site.albedo} outside [0, 1]"))

    if not b.zones:
        out.append(Issue("error", b.name or "building", "building has no zone"))

    zone_ids: set[str] = set()
    for z in b.zones:
        if z.id == OUTSIDE:
            out.append(Issue("error", z.id, f"zone id {OUTSIDE!r} is reserved"))
        if z.id in zone_ids:
            out.append(Issue("error", z.id, "duplicate zone id"))
        zone_ids.add(z.id)
        if not z.volume > 0:
            out.append(Issue("error", z.id, f"volume {z.volume} must be > 0"))
        if z.air_capacitance_multiplier < 1.0:
            out.append(Issue("error", z.id, "air capacitance multiplier must be >= 1"))
        if not 0.0 <= z.initial_humidity_ratio <= 0.1:
            out.append(Issue("error", z.id, f"humidity ratio {z.initial_humidity_ratio} outside [0, 0.1]"))
        if z.infiltration_ach < 0:
            out.append(Issue("error", z.id, "infiltration air change rate must be >= 0"))

    known = zone_ids | {OUTSIDE}
    ia_ids: set[str] = set()
    for ia in b.interambiances:
        if ia.id in ia_ids:
            out.append(Issue("error", ia.id, "duplicate interambiance id"))
        ia_ids.add(ia.id)
        for side in (ia.zone_a, ia.zone_b):
            if side not in known:
                out.append(Issue("error", ia.id, f"references unknown zone {side}"))
        if ia.zone_a == ia.zone_b:
            out.append(Issue("error", ia.id, "both sides reference the same zone"))

    comp_ids: set[str] = set()
    hvac_zones: set[str] = set()
    by_id = {}
    for c in b.components:
        if c.id in comp_ids:
            out.append(Issue("error", c.id, "duplicate component id"))
        comp_ids.add(c.id)
        by_id[c.id] = c
        if c.kind is ComponentKind.HVAC_SPLIT:
            if c.zone_id not in zone_ids:
                out.append(Issue("error", c.id, f"references unknown zone {c.zone_id}"))
            elif c.zone_id in hvac_zones:
                out.append(Issue("error", c.id, f"zone {c.zone_id} already has a split unit"))
            hvac_zones.add(c.zone_id or "")
            if c.unit is None:
                out.append(Issue("error", c.id, "split component has no unit parameters"))
            else:
                for msg in c.unit.problems():
                    out.append(Issue("error", c.id, msg))
            continue

        if c.interambiance_id not in ia_ids:
            out.append(Issue("error", c.id, f"references unknown interambiance {c.interambiance_id}"))
        if c.is_envelope:
            if not c.area > 0:
                out.append(Issue("error", c.id, f"area {c.area} must be > 0"))
            _check_face(c.id, "a", c.face_a, out)
            _check_face(c.id, "b", c.face_b, out)
        if c.kind is ComponentKind.WALL:
            if not c.layers:
                out.append(Issue("error", c.id, "wall has no layer"))
            for k, layer in enumerate(c.layers):
                for name in ("thickness", "conductivity", "density", "specific_heat"):
                    if not getattr(layer, name) > 0:
                        out.append(Issue("error", c.id, f"layer {k}: {name} must be > 0"))
        elif c.kind is ComponentKind.WINDOW:
            g = c.glazing
            if g is None:
                out.append(Issue("error", c.id, "window has no glazing"))
            else:
                if not 0.0 <= g.transmittance <= 1.0:
                    out.append(Issue("error", c.id, "glazing transmittance outside [0, 1]"))
                if not g.u_value > 0:
                    out.append(Issue("error", c.id, "glazing U-value must be > 0"))
        elif c.is_airlink:
            if c.link is None:
                out.append(Issue("error", c.id, "air link has no flow parameters"))
            else:
                expected = Crack if c.kind is ComponentKind.AIRLINK_CRACK else LargeOpening
                if not isinstance(c.link, expected):
                    out.append(Issue("error", c.id, f"{c.kind.value} needs {expected.__name__} parameters"))
                for msg in c.link.problems():
                    out.append(Issue("error", c.id, msg))
        if c.ground_contact and c.interambiance_id in ia_ids:
            if not b.interambiance(c.interambiance_id).faces_outside:
                out.append(Issue("error", c.id, "ground contact wall must face OUTSIDE"))

    for c in b.components:
        if c.kind is ComponentKind.WINDOW and c.host_id is not None:
            host = by_id.get(c.host_id)
            if host is None or host.kind is not ComponentKind.WALL:
                out.append(Issue("error", c.id, f"host {c.host_id} is not a wall"))
            elif host.interambiance_id != c.interambiance_id:
                out.append(Issue("error", c.id, "window and host wall sit on different interambiances"))
    hosted: dict[str, float] = {}
    for c in b.components:
        if c.kind is ComponentKind.WINDOW and c.host_id in by_id:
            hosted[c.host_id] = hosted.get(c.host_id, 0.0) + c.area
    for host_id, win_area in hosted.items():
        if by_id[host_id].kind is ComponentKind.WALL and win_area >= by_id[host_id].area:
            out.append(Issue("error", host_id, "hosted window area leaves no net wall area"))

    # zones with no outside-facing envelope component
    exposed: set[str] = set()
    ia_map = {ia.id: ia for ia in b.interambiances}
    for c in b.components:
        ia = ia_map.get(c.interambiance_id or "")
        if ia is not None and ia.faces_outside and c.is_envelope:
            exposed.update((ia.zone_a, ia.zone_b))
    for z in b.zones:
        if z.id not in exposed:
            out.append(Issue("warning", z.id, "zone has no outside-facing component"))

    return ValidationReport(tuple(out))


# -- topology -----------------------------------------------------------------


@dataclass(frozen=True)
class ZoneEdge:
    interambiance: str
    zone_a: str
    zone_b: str
    components: tuple[str, ...]


@dataclass(frozen=True)
class ZoneGraph:
    vertices: tuple[str, ...]
    edges: tuple[ZoneEdge, ...]
    zone_components: dict[str, tuple[str, ...]]

    def neighbours(self, zone_id: str) -> list[str]:
        out = []
        for e in self.edges:
            if e.zone_a == zone_id:
                out.append(e.zone_b)
            elif e.zone_b == zone_id:
                out.append(e.zone_a)
        return out


def topology(b: Building) -> ZoneGraph:
    """Zones (plus OUTSIDE when referenced) as vertices, interambiances as edges."""
    report = validate_building(b)
    if not report.ok:
        raise InvalidBuildingError(report)
    vertices = [z.id for z in b.zones]
    if any(ia.faces_outside for ia in b.interambiances):
        vertices.append(OUTSIDE)
    edges = []
    for ia in b.interambiances:
        comps = tuple(c.id for c in b.components if c.interambiance_id == ia.id)
        edges.append(ZoneEdge(ia.id, ia.zone_a, ia.zone_b, comps))
    zone_comps = {
        z.id: tuple(c.id for c in b.components if c.zone_id == z.id and c.interambiance_id is None)
        for z in b.zones
    }
    return ZoneGraph(tuple(vertices), tuple(edges), zone_comps)
