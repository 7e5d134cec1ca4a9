"""Model slots, their binding level, available variants and binding resolution."""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .model import Building, ComponentKind


class ModelSlot(str, enum.Enum):
    AIRFLOW_TRANSFER = "AIRFLOW_TRANSFER"
    SKY_TEMPERATURE = "SKY_TEMPERATURE"
    OUTDOOR_CONVECTION = "OUTDOOR_CONVECTION"
    DIFFUSE_RECONSTITUTION = "DIFFUSE_RECONSTITUTION"
    INDOOR_CONVECTION = "INDOOR_CONVECTION"
    INDOOR_LW = "INDOOR_LW"
    INDOOR_SW = "INDOOR_SW"
    HVAC_SYSTEM = "HVAC_SYSTEM"
    HEAT_CONDUCTION = "HEAT_CONDUCTION"
    GROUND_COUPLING = "GROUND_COUPLING"


class BindingLevel(str, enum.Enum):
    BUILDING = "BUILDING"
    ZONE = "ZONE"
    COMPONENT = "COMPONENT"


_LEVELS = {
    ModelSlot.AIRFLOW_TRANSFER: BindingLevel.BUILDING,
    ModelSlot.SKY_TEMPERATURE: BindingLevel.BUILDING,
    ModelSlot.OUTDOOR_CONVECTION: BindingLevel.BUILDING,
    ModelSlot.DIFFUSE_RECONSTITUTION: BindingLevel.BUILDING,
    ModelSlot.INDOOR_CONVECTION: BindingLevel.ZONE,
    ModelSlot.INDOOR_LW: BindingLevel.ZONE,
    ModelSlot.INDOOR_SW: BindingLevel.ZONE,
    ModelSlot.HVAC_SYSTEM: BindingLevel.COMPONENT,
    ModelSlot.HEAT_CONDUCTION: BindingLevel.COMPONENT,
    # not in the published allocation table; bound on the ground-contact wall
    ModelSlot.GROUND_COUPLING: BindingLevel.COMPONENT,
}


def allocation_level(slot: ModelSlot) -> BindingLevel:
    return _LEVELS[ModelSlot(slot)]


# variant id -> default parameters, per slot; the first entry is the default
VARIANTS: dict[ModelSlot, dict[str, dict[str, Any]]] = {
    ModelSlot.AIRFLOW_TRANSFER: {
        "PRESCRIBED": {},
        "PRESSURE": {"relaxation": 0.75, "tolerance": 1e-6, "max_iterations": 100},
    },
    ModelSlot.SKY_TEMPERATURE: {
        "AIR": {},
        "SWINBANK": {"cloud_correction": False},
        "DEW_POINT": {"cloud_correction": False},
    },
    ModelSlot.OUTDOOR_CONVECTION: {
        "CONSTANT": {"h": 11.7},
        "LINEAR_WIND": {},
        "ITO": {},
        "COLE_STURROCK": {},
    },
    ModelSlot.DIFFUSE_RECONSTITUTION: {
        "AUTO": {},
        "MEASURED": {},
        "CLEARNESS_INDEX": {},
    },
    ModelSlot.INDOOR_CONVECTION: {
        "CONSTANT": {"h": 3.0},
        "CORRELATION": {
            "vertical": [1.52, 0.33],
            "unstable": [1.31, 0.25],
            "stable": [0.0, 0.0],
            "h_min": 0.5,
        },
    },
    ModelSlot.INDOOR_LW: {
        "MRT_STAR": {"t_ref": 293.15},
        "DETAILED": {"t_ref": 293.15},
    },
    ModelSlot.INDOOR_SW: {
        "SIMPLE": {},
        "GROUPED4": {},
        "FULL": {},
    },
    ModelSlot.HVAC_SYSTEM: {
        "NONE": {},
        "MODEL0": {},
        "MODEL1": {},
        "MODEL2": {},
    },
    ModelSlot.HEAT_CONDUCTION: {
        "R2C": {},
        "3R2C": {},
        "PER_LAYER": {"nodes_per_layer": 3},
    },
    ModelSlot.GROUND_COUPLING: {
        "CONSTANT": {"temperature": 18.0, "resistance": 0.5},
        "MONTHLY": {"temperatures": [18.0] * 12, "resistance": 0.5},
    },
}

# component kinds each component-level slot may target
_TARGETS = {
    ModelSlot.HVAC_SYSTEM: {ComponentKind.HVAC_SPLIT},
    ModelSlot.HEAT_CONDUCTION: {ComponentKind.WALL},
    ModelSlot.GROUND_COUPLING: {ComponentKind.WALL},
}


@dataclass(frozen=True)
class ModelVariant:
    slot: ModelSlot
    variant: str
    params: Mapping[str, Any] = field(default_factory=dict)

    def __getitem__(self, key: str) -> Any:
        return self.params[key]

    def __str__(self) -> str:
        return self.variant


def variant(slot: ModelSlot | str, variant_id: str, **params: Any) -> ModelVariant:
    """Build a variant with its defaults overlaid by ``params``."""
    slot = ModelSlot(slot)
    table = VARIANTS[slot]
    vid = variant_id.upper()
    if vid not in table:
        raise BindingError([BindingProblem("UNKNOWN_VARIANT", "", slot, f"{slot.value} has no variant {variant_id!r}")])
    unknown = set(params) - set(table[vid])
    if unknown:
        raise BindingError(
            [BindingProblem("UNKNOWN_VARIANT", "", slot, f"{vid} has no parameter(s) {', '.join(sorted(unknown))}")]
        )
    merged = dict(table[vid])
    merged.update(params)
    return ModelVariant(slot, vid, merged)


DEFAULTS: dict[ModelSlot, ModelVariant] = {slot: variant(slot, next(iter(t))) for slot, t in VARIANTS.items()}


@dataclass(frozen=True)
class BindingProblem:
    code: str  # LEVEL_MISMATCH, UNKNOWN_VARIANT, UNKNOWN_ENTITY, INCOMPATIBLE_COMPONENT
    entity: str
    slot: ModelSlot
    message: str


class BindingError(ValueError):
    def __init__(self, problems: list[BindingProblem]):
        self.problems = problems
        super().__init__("; ".join(f"{p.code} {p.entity or '-'} {p.slot.value}: {p.message}" for p in problems))

    @property
    def code(self) -> str:
        return self.problems[0].code


@dataclass(frozen=True)
class ModelBindingSet:
    building: dict[ModelSlot, ModelVariant] = field(default_factory=dict)
    zones: dict[str, dict[ModelSlot, ModelVariant]] = field(default_factory=dict)
    components: dict[str, dict[ModelSlot, ModelVariant]] = field(default_factory=dict)

    def lookup(self, entity: str | None, slot: ModelSlot) -> ModelVariant:
        slot = ModelSlot(slot)
        level = allocation_level(slot)
        if level is BindingLevel.BUILDING:
            found = self.building.get(slot)
        elif level is BindingLevel.ZONE:
            found = self.zones.get(entity or "", {}).get(slot)
        else:
            found = self.components.get(entity or "", {}).get(slot)
        return found if found is not None else DEFAULTS[slot]

    def __getattr__(self, name: str) -> ModelVariant:
        # building-level shorthand, e.g. ``bindings.OUTDOOR_CONVECTION``
        try:
            slot = ModelSlot(name)
        except ValueError:
            raise AttributeError(name) from None
        return self.lookup(None, slot)

    def explicit(self) -> list[tuple[str, ModelVariant]]:
        out = [("building", v) for v in self.building.values()]
        for scope in (self.zones, self.components):
            for ent, slots in scope.items():
                out.extend((ent, v) for v in slots.values())
        return out

    def non_default(self) -> list[tuple[str, ModelVariant]]:
        return [(e, v) for e, v in self.explicit() if v != DEFAULTS[v.slot]]

    def uses_hvac(self, *variants: str) -> bool:
        return any(
            v.variant in variants for slots in self.components.values() for s, v in slots.items() if s is ModelSlot.HVAC_SYSTEM
        )


def defaults() -> ModelBindingSet:
    """Binding set where every slot resolves to its default variant."""
    return ModelBindingSet({s: v for s, v in DEFAULTS.items() if allocation_level(s) is BindingLevel.BUILDING})


Choice = tuple  # (entity id, slot, variant id | ModelVariant | (variant id, params))


def _entity_level(b: Building, entity: str) -> BindingLevel | None:
    # zone and component ids win over a building name that happens to match
    if any(z.id == entity for z in b.zones):
        return BindingLevel.ZONE
    if any(c.id == entity for c in b.components):
        return BindingLevel.COMPONENT
    if entity in ("building", b.name):
        return BindingLevel.BUILDING
    return None


def bind(b: Building, choices: Iterable[Choice]) -> ModelBindingSet:
    """Resolve explicit choices into a binding set; everything else is default.

    Collects every problem before raising :class:`BindingError`.
    """
    problems: list[BindingProblem] = []
    building: dict[ModelSlot, ModelVariant] = {s: v for s, v in DEFAULTS.items() if allocation_level(s) is BindingLevel.BUILDING}
    zones: dict[str, dict[ModelSlot, ModelVariant]] = {}
    comps: dict[str, dict[ModelSlot, ModelVariant]] = {}
    for entity, slot, choice in choices:
        try:
            slot = ModelSlot(slot)
        except ValueError:
            problems.append(BindingProblem("UNKNOWN_VARIANT", entity, ModelSlot.AIRFLOW_TRANSFER, f"unknown model slot {slot!r}"))
            continue
        level = _entity_level(b, entity)
        if level is None:
            problems.append(BindingProblem("UNKNOWN_ENTITY", entity, slot, f"no building, zone or component {entity!r}"))
            continue
        expected = allocation_level(slot)
        if level is not expected:
            problems.append(
                BindingProblem(
                    "LEVEL_MISMATCH",
                    entity,
                    slot,
                    f"{slot.value} binds at {expected.value} level, not {level.value} ({entity!r})",
                )
            )
            continue
        if level is BindingLevel.COMPONENT:
            kind = b.component(entity).kind
            if kind not in _TARGETS[slot]:
                problems.append(
                    BindingProblem("INCOMPATIBLE_COMPONENT", entity, slot, f"{slot.value} cannot apply to a {kind.value}")
                )
                continue
        try:
            if isinstance(choice, ModelVariant):
                mv = variant(slot, choice.variant, **dict(choice.params))
            elif isinstance(choice, tuple):
                mv = variant(slot, choice[0], **dict(choice[1]))
            else:
                mv = variant(slot, str(choice))
        except BindingError as exc:
            problems.extend(BindingProblem(p.code, entity, slot, p.message) for p in exc.problems)
            continue
        if level is BindingLevel.BUILDING:
            building[slot] = mv
        elif level is BindingLevel.ZONE:
            zones.setdefault(entity, {})[slot] = mv
        else:
            comps.setdefault(entity, {})[slot] = mv
    if problems:
        raise BindingError(problems)
    return ModelBindingSet(building, zones, comps)
