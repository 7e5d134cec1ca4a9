import csv
import json
import subprocess
import sys
import xml.etree.ElementTree as ET
from dataclasses import replace
from datetime import datetime, timedelta

import pytest

from zonesim import __version__
from zonesim import fixtures as fx
from zonesim import io as zio
from zonesim.catalog import bind
from zonesim.cli import OUTPUT_ENV, main
from zonesim.project import dump_project
from zonesim.weather import WeatherSeries

T0 = datetime(2024, 1, 1)
SIM = {"start": "2024-01-01T00:00:00", "end": "2024-01-02T00:00:00"}


def write_project(path, building, bindings=None, sim=SIM):
    path.write_text(dump_project(building, bindings or building.bindings, sim), encoding="utf-8")
    return str(path)


@pytest.fixture
def files(tmp_path):
    weather = tmp_path / "weather.csv"
    zio.write_weather_csv(fx.synthetic_weather(T0, 2, t_mean=30.0), weather)
    return {
        "dir": tmp_path,
        "weather": str(weather),
        "cell": write_project(tmp_path / "cell.yaml", fx.single_cell(gain=200.0)),
        "model0": write_project(tmp_path / "model0.yaml", fx.oversized_cell("MODEL0")),
        "model1": write_project(tmp_path / "model1.yaml", fx.oversized_cell("MODEL1")),
        "five": write_project(tmp_path / "five.yaml", fx.five_zone()),
    }


def rows(path):
    with open(path, newline="", encoding="utf-8") as fh:
        return list(csv.reader(fh))


# -- validate -------------------------------------------------------------------------


def test_validate_ok(files, capsys):
    assert main(["validate", files["five"]]) == 0
    assert "ok" in capsys.readouterr().out


def test_validate_json_report(files, capsys):
    assert main(["validate", files["cell"], "--json-report"]) == 0
    report = json.loads(capsys.readouterr().out)
    assert report["ok"] is True and report["errors"] == []


def test_validate_level_mismatch(files, capsys):
    text = open(files["cell"], encoding="utf-8").read()
    text += "bindings:\n- {entity: cell, slot: HEAT_CONDUCTION, variant: 3R2C}\n"
    path = files["dir"] / "bad.yaml"
    path.write_text(text, encoding="utf-8")
    assert main(["validate", str(path), "--json-report"]) == 2
    report = json.loads(capsys.readouterr().out)
    assert not report["ok"]
    assert any("cell" in e["message"] and "HEAT_CONDUCTION" in e["message"] for e in report["errors"])


def test_validate_truncated(files, capsys):
    text = open(files["cell"], encoding="utf-8").read()
    path = files["dir"] / "cut.yaml"
    path.write_text(text[: text.index("conductivity")], encoding="utf-8")
    assert main(["validate", str(path)]) == 1
    err = capsys.readouterr().err
    assert f"{path}:" in err
    line = int(err.split(f"{path}:")[1].split(":")[0])
    assert 1 <= line <= text[: text.index("conductivity")].count("\n") + 1


def test_validate_missing_file(files):
    assert main(["validate", str(files["dir"] / "nope.yaml")]) == 1


def test_validate_accepts_every_serialized_fixture(tmp_path):
    for name, b in [("a", fx.glazed_box()), ("b", fx.oversized_cell("MODEL2")), ("c", fx.five_zone(False))]:
        assert main(["validate", write_project(tmp_path / f"{name}.yaml", b)]) == 0


# -- simulate -------------------------------------------------------------------------


def test_simulate_hourly_rows(files, capsys):
    out = files["dir"] / "out"
    assert main(["simulate", files["cell"], files["weather"], "-o", str(out)]) == 0
    assert len(rows(out / "zones.csv")) == 25
    line = capsys.readouterr().out
    assert "simulated 24 h" in line and "cell mean" in line and "HVAC energy" in line


def test_simulate_minute_rows(files):
    out = files["dir"] / "out"
    assert main(["simulate", files["model1"], files["weather"], "-o", str(out), "--expert"]) == 0
    assert len(rows(out / "zones.csv")) == 1441
    assert len(rows(out / "hvac.csv")) == 1441


def test_from_to_and_step_override(files):
    out = files["dir"] / "out"
    args = ["simulate", files["cell"], files["weather"], "-o", str(out), "--from", "2024-01-01T06:00:00", "--to", "2024-01-01T12:00:00", "--step", "900"]
    assert main(args) == 0
    r = rows(out / "zones.csv")
    assert len(r) == 25
    assert r[1][0] == "2024-01-01T06:15:00" and r[-1][0] == "2024-01-01T12:00:00"


def test_onion_identical_on_decoupled_fixture(files):
    a, b = files["dir"] / "a", files["dir"] / "b"
    assert main(["simulate", files["cell"], files["weather"], "-o", str(a)]) == 0
    assert main(["simulate", files["cell"], files["weather"], "-o", str(b), "--coupling", "onion"]) == 0
    for name in ("zones.csv", "surfaces.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_repeat_runs_byte_identical(files):
    a, b = files["dir"] / "a", files["dir"] / "b"
    for out in (a, b):
        assert main(["simulate", files["five"], files["weather"], "-o", str(out), "--expert", "--seedless"]) == 0
    for name in ("zones.csv", "surfaces.csv", "flows.csv"):
        assert (a / name).read_bytes() == (b / name).read_bytes()


def test_non_expert_warning(files, capsys):
    out = str(files["dir"] / "out")
    assert main(["simulate", files["model0"], files["weather"], "-o", out]) == 0
    err = capsys.readouterr().err
    assert "warning: non-default model bindings" in err and "HVAC_SYSTEM=MODEL0" in err
    assert main(["simulate", files["model0"], files["weather"], "-o", out, "--expert"]) == 0
    assert "non-default" not in capsys.readouterr().err


def test_default_bindings_do_not_warn(files, capsys):
    assert main(["simulate", files["cell"], files["weather"], "-o", str(files["dir"] / "o")]) == 0
    assert "non-default" not in capsys.readouterr().err


def test_output_dir_from_environment(files, monkeypatch):
    target = files["dir"] / "env-out"
    monkeypatch.setenv(OUTPUT_ENV, str(target))
    assert main(["simulate", files["cell"], files["weather"]]) == 0
    assert (target / "zones.csv").exists()


def test_no_output_dir(files, monkeypatch, capsys):
    monkeypatch.delenv(OUTPUT_ENV, raising=False)
    assert main(["simulate", files["cell"], files["weather"]]) == 2
    assert OUTPUT_ENV in capsys.readouterr().err


def test_solver_failure_exit_3(files, capsys):
    b = fx.five_zone()
    b = replace(b, bindings=bind(b, [("building", "AIRFLOW_TRANSFER", ("PRESSURE", {"max_iterations": 1}))]))
    path = write_project(files["dir"] / "stiff.yaml", b)
    assert main(["simulate", path, files["weather"], "-o", str(files["dir"] / "o"), "--expert"]) == 3
    assert "2024-01-01T" in capsys.readouterr().err


def test_weather_gap_exit_4(files, capsys):
    w = fx.synthetic_weather(T0, 2)
    gap = [r for r in w.records if not (T0 + timedelta(hours=3) <= r.timestamp <= T0 + timedelta(hours=8))]
    path = files["dir"] / "gappy.csv"
    zio.write_weather_csv(WeatherSeries(gap), path)
    assert main(["simulate", files["cell"], str(path), "-o", str(files["dir"] / "o")]) == 4
    assert "2024-01-01T03:00:00" in capsys.readouterr().err


def test_malformed_weather_exit_1(files):
    path = files["dir"] / "bad.csv"
    path.write_text("timestamp,dry_bulb_C\n2024-01-01T00:00:00,20\n", encoding="utf-8")
    assert main(["simulate", files["cell"], str(path), "-o", str(files["dir"] / "o")]) == 1


def test_missing_period_exit_2(files):
    path = write_project(files["dir"] / "noperiod.yaml", fx.single_cell(), sim={"thermal_step": 3600.0})
    assert main(["simulate", path, files["weather"], "-o", str(files["dir"] / "o")]) == 2


def test_variants_run_in_parallel(files):
    out = files["dir"] / "sweep"
    args = ["simulate", files["cell"], files["weather"], "-o", str(out), "--variant", files["model0"], "--jobs", "2", "--expert"]
    assert main(args) == 0
    assert len(rows(out / "cell" / "zones.csv")) == 25
    assert len(rows(out / "model0" / "hvac.csv")) == 25


# -- report -------------------------------------------------------------------------


def test_report_with_hvac_and_svg(files, capsys):
    out = files["dir"] / "out"
    assert main(["simulate", files["model0"], files["weather"], "-o", str(out), "--expert"]) == 0
    capsys.readouterr()
    assert main(["report", str(out), "--svg", "--series", "cell.air_temperature", "--series", "cell-split.electric"]) == 0
    text = capsys.readouterr().out
    assert "mean_COP" in text and "day  electric_kWh" in text
    svgs = sorted(out.glob("*.svg"))
    assert [p.name for p in svgs] == ["cell-split.electric.svg", "cell.air_temperature.svg"]
    for p in svgs:
        assert ET.parse(p).getroot().tag.endswith("svg")
    assert (out / zio.REPORT_FILE).read_text(encoding="utf-8") == text.split("wrote")[0]


def test_report_without_hvac(files, capsys):
    out = files["dir"] / "out"
    assert main(["simulate", files["cell"], files["weather"], "-o", str(out)]) == 0
    capsys.readouterr()
    assert main(["report", str(out), "--comfort-threshold", "26"]) == 0
    text = capsys.readouterr().out
    assert "COP" not in text and "comfort threshold 26 C" in text


def test_report_missing_series_exit_5(files, capsys):
    out = files["dir"] / "out"
    assert main(["simulate", files["cell"], files["weather"], "-o", str(out)]) == 0
    assert main(["report", str(out), "--svg", "--series", "ghost.temperature"]) == 5
    assert "ghost.temperature" in capsys.readouterr().err
    assert main(["report", str(files["dir"] / "empty")]) == 5


def test_cop_curve(files, capsys):
    out = files["dir"] / "out"
    assert main(["simulate", files["model1"], files["weather"], "-o", str(out), "--expert"]) == 0
    capsys.readouterr()
    assert main(["cop-curve", str(out), "--bins", "5"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert lines[0] == "unit,fractional_on_time,cop"
    vals = [tuple(map(float, l.split(",")[1:])) for l in lines[1:]]
    assert vals and all(0 < f <= 1 and c > 0 for f, c in vals)
    assert main(["cop-curve", str(out), "--unit", "nope"]) == 5
    assert main(["cop-curve", str(files["dir"] / "empty")]) == 5


# -- entry points ---------------------------------------------------------------------


def test_version_and_help():
    res = subprocess.run([sys.executable, "-m", "zonesim.cli", "--version"], capture_output=True, text=True)
    assert res.returncode == 0 and __version__ in res.stdout
    res = subprocess.run([sys.executable, "-m", "zonesim.cli", "--help"], capture_output=True, text=True)
    assert res.returncode == 0
    for cmd in ("validate", "simulate", "report", "cop-curve"):
        assert cmd in res.stdout


def test_bad_arguments_exit_nonzero():
    assert main(["simulate"]) != 0
