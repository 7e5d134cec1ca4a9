import itertools

import pytest

from zonesim import fixtures as fx
from zonesim.catalog import (
    VARIANTS,
    BindingError,
    BindingLevel,
    ModelSlot,
    allocation_level,
    bind,
    defaults,
)

TABLE = {
    "AIRFLOW_TRANSFER": "BUILDING",
    "SKY_TEMPERATURE": "BUILDING",
    "OUTDOOR_CONVECTION": "BUILDING",
    "DIFFUSE_RECONSTITUTION": "BUILDING",
    "INDOOR_CONVECTION": "ZONE",
    "INDOOR_LW": "ZONE",
    "INDOOR_SW": "ZONE",
    "HVAC_SYSTEM": "COMPONENT",
    "HEAT_CONDUCTION": "COMPONENT",
    "GROUND_COUPLING": "COMPONENT",
}


@pytest.mark.parametrize("slot", list(ModelSlot))
def test_allocation_level_table(slot):
    assert allocation_level(slot).value == TABLE[slot.value]


def entity_for(level: BindingLevel, slot: ModelSlot) -> str:
    if level is BindingLevel.BUILDING:
        return "building"
    if level is BindingLevel.ZONE:
        return "cell"
    return "cell-split" if slot is ModelSlot.HVAC_SYSTEM else "cell-wall-N"


def test_exhaustive_slot_level_matrix():
    b = fx.single_cell(unit=fx.oversized_unit())
    for slot, level in itertools.product(ModelSlot, BindingLevel):
        choice = (entity_for(level, slot), slot, next(reversed(VARIANTS[slot])))
        if level is allocation_level(slot):
            bind(b, [choice])
        else:
            with pytest.raises(BindingError) as err:
                bind(b, [choice])
            assert err.value.code == "LEVEL_MISMATCH"


def test_per_wall_conduction_difference():
    b = fx.single_cell()
    bs = bind(b, [("cell-wall-S", "HEAT_CONDUCTION", "3R2C")])
    assert bs.lookup("cell-wall-S", ModelSlot.HEAT_CONDUCTION).variant == "3R2C"
    assert bs.lookup("cell-wall-N", ModelSlot.HEAT_CONDUCTION).variant == "R2C"


def test_indoor_convection_on_wall_rejected():
    with pytest.raises(BindingError) as err:
        bind(fx.single_cell(), [("cell-wall-S", "INDOOR_CONVECTION", "CORRELATION")])
    assert err.value.code == "LEVEL_MISMATCH"
    assert "cell-wall-S" in str(err.value)


def test_unknown_variant_rejected():
    with pytest.raises(BindingError) as err:
        bind(fx.single_cell(), [("building", "SKY_TEMPERATURE", "MARTIAN")])
    assert err.value.code == "UNKNOWN_VARIANT"


def test_empty_choices_give_defaults():
    b = fx.single_cell()
    bs = bind(b, [])
    d = defaults()
    for slot in ModelSlot:
        for entity in ("building", "cell", "cell-wall-N"):
            assert bs.lookup(entity, slot) == d.lookup(entity, slot)
    assert bs.non_default() == []


def test_default_variants():
    d = defaults()
    assert d.OUTDOOR_CONVECTION.variant == "CONSTANT" and d.OUTDOOR_CONVECTION["h"] == 11.7
    assert d.SKY_TEMPERATURE.variant == "AIR"
    assert d.lookup("any-wall", ModelSlot.HEAT_CONDUCTION).variant == "R2C"
    assert d.AIRFLOW_TRANSFER.variant == "PRESCRIBED"
    assert d.lookup("z", ModelSlot.INDOOR_CONVECTION)["h"] == 3.0
    assert d.lookup("z", ModelSlot.INDOOR_LW).variant == "MRT_STAR"
    assert d.lookup("z", ModelSlot.INDOOR_SW).variant == "SIMPLE"
    assert d.lookup("u", ModelSlot.HVAC_SYSTEM).variant == "NONE"
    assert d.lookup("g", ModelSlot.GROUND_COUPLING).variant == "CONSTANT"


def test_lookup_total_for_every_entity():
    b = fx.five_zone()
    bs = b.bindings
    entities = [None] + [z.id for z in b.zones] + [c.id for c in b.components]
    for e, slot in itertools.product(entities, ModelSlot):
        assert bs.lookup(e, slot).slot is slot


def test_parameters_overlay_defaults():
    bs = bind(fx.single_cell(), [("building", "OUTDOOR_CONVECTION", ("CONSTANT", {"h": 20.0}))])
    assert bs.OUTDOOR_CONVECTION["h"] == 20.0
    with pytest.raises(BindingError):
        bind(fx.single_cell(), [("building", "OUTDOOR_CONVECTION", ("CONSTANT", {"k": 1.0}))])


def test_conduction_cannot_target_window():
    with pytest.raises(BindingError) as err:
        bind(fx.single_cell(), [("cell-win-S", "HEAT_CONDUCTION", "3R2C")])
    assert err.value.code == "INCOMPATIBLE_COMPONENT"


def test_unknown_entity():
    with pytest.raises(BindingError) as err:
        bind(fx.single_cell(), [("ghost", "HEAT_CONDUCTION", "3R2C")])
    assert err.value.code == "UNKNOWN_ENTITY"
