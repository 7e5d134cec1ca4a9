from datetime import datetime

import pytest
import yaml

from zonesim import fixtures as fx
from zonesim.io import write_map_csv
from zonesim.project import (
    SchemaError,
    SemanticError,
    config_dict,
    dump_project,
    load_project,
    loads_project,
    to_document,
)
from zonesim.simulation import Coupling, SimulationConfig

SIM = {"start": "2024-01-01T00:00:00", "end": "2024-01-02T00:00:00"}

FIXTURES = {
    "single_cell": fx.single_cell,
    "oversized_model2": lambda: fx.oversized_cell("MODEL2"),
    "five_zone": fx.five_zone,
    "five_zone_no_air": lambda: fx.five_zone(airflow=False),
    "glazed_box": fx.glazed_box,
}

MINIMAL = """\
name: tiny
zones:
  - id: z
    volume: 30
interambiances:
  - id: z-S
    zone_a: OUTSIDE
    zone_b: z
    azimuth: 180
components:
  - id: z-wall
    kind: WALL
    interambiance: z-S
    area: 10
    layers:
      - {thickness: 0.1, conductivity: 1.0, density: 2000, specific_heat: 900}
simulation:
  start: 2024-01-01T00:00:00
  end: 2024-01-02T00:00:00
"""


def by_id(building):
    return {c.id: c for c in building.components}


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_round_trip(name):
    b = FIXTURES[name]()
    p = loads_project(dump_project(b, b.bindings, SIM))
    assert p.building.zones == b.zones
    assert set(p.building.interambiances) == set(b.interambiances)
    assert by_id(p.building) == by_id(b)
    assert p.bindings.non_default() == (b.bindings.non_default() if b.bindings else [])
    assert p.building.site == b.site


@pytest.mark.parametrize("name", sorted(FIXTURES))
def test_dump_is_stable(name):
    b = FIXTURES[name]()
    text = dump_project(b, b.bindings, SIM)
    p = loads_project(text)
    assert dump_project(p.building, p.bindings, p.simulation | SIM) == text


def test_load_from_file(tmp_path):
    path = tmp_path / "tiny.yaml"
    path.write_text(MINIMAL, encoding="utf-8")
    p = load_project(path)
    assert p.source == path
    assert p.building.name == "tiny"
    cfg = p.config()
    assert cfg.start == datetime(2024, 1, 1) and cfg.end == datetime(2024, 1, 2)


def test_config_overrides_and_round_trip():
    p = loads_project(MINIMAL)
    cfg = p.config(step=1800.0, coupling=Coupling.ONION, end=None)
    assert cfg.step == 1800.0 and cfg.coupling is Coupling.ONION
    assert cfg.end == datetime(2024, 1, 2)
    assert SimulationConfig(**config_dict(cfg)) == cfg
    again = loads_project(dump_project(p.building, p.bindings, config_dict(cfg)))
    assert again.config() == cfg


def test_config_needs_period():
    p = loads_project(MINIMAL.split("simulation:")[0])
    with pytest.raises(SemanticError, match="period"):
        p.config()


def test_config_rejects_bad_step():
    p = loads_project(MINIMAL)
    with pytest.raises(SemanticError, match="simulation"):
        p.config(step=7.0)


def test_performance_map_from_csv(tmp_path):
    write_map_csv(fx.oversized_map_points(), tmp_path / "map.csv")
    text = MINIMAL + "units:\n  - {id: ac, zone: z, performance_map: {csv: map.csv}}\n"
    path = tmp_path / "p.yaml"
    path.write_text(text, encoding="utf-8")
    unit = by_id(load_project(path).building)["ac"].unit
    ref = fx.oversized_unit().performance_map
    for q, c in ref.coefficients.items():
        assert unit.performance_map.coefficients[q] == pytest.approx(c, rel=1e-9)


def test_map_csv_missing_is_semantic(tmp_path):
    path = tmp_path / "p.yaml"
    path.write_text(MINIMAL + "units:\n  - {id: ac, zone: z, performance_map: {csv: nope.csv}}\n", encoding="utf-8")
    with pytest.raises(SemanticError, match="ac"):
        load_project(path)


# -- schema errors ----------------------------------------------------------------


def line_of(text, needle):
    return next(k for k, l in enumerate(text.splitlines(), start=1) if needle in l)


def test_unknown_key_is_located():
    text = MINIMAL.replace("    volume: 30", "    volume: 30\n    colour: red")
    with pytest.raises(SchemaError) as err:
        loads_project(text)
    assert err.value.line == line_of(text, "colour")
    assert "colour" in str(err.value)


def test_wrong_type_is_located():
    text = MINIMAL.replace("area: 10", "area: large")
    with pytest.raises(SchemaError) as err:
        loads_project(text)
    assert err.value.line == line_of(text, "area: large")


def test_missing_required_key():
    text = MINIMAL.replace(", specific_heat: 900", "")
    with pytest.raises(SchemaError, match="specific_heat") as err:
        loads_project(text)
    assert err.value.line == line_of(text, "thickness")


def test_syntax_error_has_line():
    text = MINIMAL.replace("    volume: 30", "    volume: [30")
    with pytest.raises(SchemaError) as err:
        loads_project(text)
    assert err.value.line is not None


def test_truncated_file_has_line():
    text = MINIMAL[: MINIMAL.index("density")]
    with pytest.raises(SchemaError) as err:
        loads_project(text)
    assert err.value.line is not None


@pytest.mark.parametrize("name", ["five_zone", "oversized_model2"])
def test_every_truncation_fails_cleanly(name):
    b = FIXTURES[name]()
    text = dump_project(b, b.bindings, SIM)
    for n in range(1, len(text), len(text) // 40):
        try:
            loads_project(text[:n])
        except SchemaError as exc:
            assert exc.line is not None
        except SemanticError:
            pass


def test_empty_file():
    with pytest.raises(SchemaError):
        loads_project("")


def test_not_utf8(tmp_path):
    path = tmp_path / "bad.yaml"
    path.write_bytes(b"name: caf\xe9\n")
    with pytest.raises(SchemaError):
        load_project(path)


# -- semantic errors ------------------------------------------------------------------


def test_conduction_at_zone_level_cites_binding():
    text = MINIMAL + "bindings:\n  - {entity: z, slot: HEAT_CONDUCTION, variant: 3R2C}\n"
    with pytest.raises(SemanticError) as err:
        loads_project(text)
    msg = str(err.value)
    assert "z" in msg and "HEAT_CONDUCTION" in msg and "LEVEL_MISMATCH" in msg


def test_unknown_variant():
    text = MINIMAL + "bindings:\n  - {entity: building, slot: SKY_TEMPERATURE, variant: MAGIC}\n"
    with pytest.raises(SemanticError, match="MAGIC"):
        loads_project(text)


def test_dangling_interambiance():
    text = MINIMAL.replace("interambiance: z-S", "interambiance: z-N")
    with pytest.raises(SemanticError, match="z-N"):
        loads_project(text)


def test_unknown_surface_class():
    text = MINIMAL.replace("    area: 10", "    area: 10\n    surface_class: CEILINGISH")
    with pytest.raises(SemanticError, match="CEILINGISH"):
        loads_project(text)


def test_unknown_output_group():
    text = MINIMAL + "  outputs: [zones, everything]\n"
    with pytest.raises(SemanticError, match="everything"):
        loads_project(text)


def test_document_is_plain_yaml():
    b = fx.five_zone()
    doc = to_document(b, b.bindings, SIM)
    assert yaml.safe_load(yaml.safe_dump(doc)) == doc
    # defaults are implied, only the pressure airflow choice is written
    assert [(d["entity"], d["slot"], d["variant"]) for d in doc["bindings"]] == [("building", "AIRFLOW_TRANSFER", "PRESSURE")]
