"""Reference buildings and synthetic weather used by the tests and the CLI demo."""
from __future__ import annotations

import math
from datetime import datetime, timedelta

from .airflow import Crack, LargeOpening, WindExposure
from .catalog import bind
from .hvac import MapPoint, SplitUnit, fit_performance_map
from .model import (
    OUTSIDE,
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
)
from .weather import WeatherRecord, WeatherSeries

CONCRETE = WallLayer(0.20, 1.75, 2300.0, 920.0)
INSULATION = WallLayer(0.06, 0.04, 30.0, 1400.0)
PLASTER = WallLayer(0.013, 0.35, 1200.0, 1000.0)
BRICK = WallLayer(0.10, 0.72, 1800.0, 840.0)

HEAVY_WALL = (PLASTER, CONCRETE, INSULATION, BRICK)
LIGHT_WALL = (WallLayer(0.012, 0.16, 950.0, 840.0), WallLayer(0.08, 0.04, 20.0, 1400.0), WallLayer(0.012, 0.16, 950.0, 840.0))
PARTITION = (WallLayer(0.10, 0.72, 1800.0, 840.0),)
ROOF = (WallLayer(0.15, 1.75, 2300.0, 920.0), WallLayer(0.08, 0.04, 30.0, 1400.0))
SLAB = (WallLayer(0.15, 1.75, 2300.0, 920.0),)

REUNION = Site(latitude=-20.9, longitude=55.5, altitude=10.0, albedo=0.2, time_zone_offset=4.0)

_FACADES = {"N": 0.0, "E": 90.0, "S": 180.0, "W": 270.0}


def _envelope(zone: str, tag: str, azimuth: float, tilt: float) -> Interambiance:
    return Interambiance(f"{zone}-{tag}", OUTSIDE, zone, Orientation(azimuth, tilt))


def _box(zone: Zone, w: float, d: float, h: float, walls=LIGHT_WALL, facades="NESW", window_south: float = 0.0):
    """Interambiances and components of a free-standing box zone."""
    ias, comps = [], []
    for f in facades:
        az = _FACADES[f]
        ia = _envelope(zone.id, f, az, 90.0)
        ias.append(ia)
        length = w if f in "NS" else d
        comps.append(Component(f"{zone.id}-wall-{f}", ComponentKind.WALL, ia.id, area=length * h, layers=walls))
        if f == "S" and window_south > 0:
            comps.append(
                Component(
                    f"{zone.id}-win-S",
                    ComponentKind.WINDOW,
                    ia.id,
                    area=window_south,
                    glazing=Glazing(),
                    host_id=f"{zone.id}-wall-S",
                )
            )
    roof = _envelope(zone.id, "roof", 0.0, 0.0)
    floor = _envelope(zone.id, "floor", 0.0, 180.0)
    ias += [roof, floor]
    comps.append(Component(f"{zone.id}-roof", ComponentKind.WALL, roof.id, area=w * d, layers=ROOF, surface_class=SurfaceClass.CEILING))
    comps.append(
        Component(
            f"{zone.id}-floor",
            ComponentKind.WALL,
            floor.id,
            area=w * d,
            layers=SLAB,
            surface_class=SurfaceClass.FLOOR,
            ground_contact=True,
        )
    )
    return ias, comps


def single_cell(volume_scale: float = 1.0, gain: float = 0.0, unit: SplitUnit | None = None, initial_temperature: float = 20.0) -> Building:
    """Single-zone 3 x 3 x 2.5 m cell with a south window and light walls."""
    zone = Zone("cell", "test cell", 22.5 * volume_scale, initial_temperature=initial_temperature, sensible_gain=gain)
    ias, comps = _box(zone, 3.0, 3.0, 2.5, window_south=1.5)
    if unit is not None:
        comps.append(Component("cell-split", ComponentKind.HVAC_SPLIT, zone_id="cell", unit=unit))
    return Building("single-cell", (zone,), tuple(ias), tuple(comps), REUNION)


def oversized_map_points() -> list[MapPoint]:
    """Synthetic manufacturer table around a 3 kW rating at 35 C outdoors, 27 C indoors."""
    points = []
    for t_out in (25.0, 30.0, 35.0, 40.0):
        for t_in in (22.0, 25.0, 28.0):
            for w_in in (0.008, 0.011, 0.014):
                q = 3000.0 * (1.0 - 0.01 * (t_out - 35.0)) * (1.0 + 0.02 * (t_in - 27.0))
                points.append(MapPoint(t_out, t_in, w_in, q, 0.75 * q, 1150.0 * (1.0 + 0.012 * (t_out - 35.0))))
    return points


def oversized_unit(tau: float = 300.0) -> SplitUnit:
    """3 kW unit, far larger than the cell's load, so it cycles with a short duty."""
    return SplitUnit(3000.0, 0.75, 1150.0, tau, 25.0, 1.0, fit_performance_map(oversized_map_points()))


def oversized_cell(variant: str = "MODEL1", gain: float = 175.0, tau: float = 300.0) -> Building:
    """single_cell with an oversized split unit bound to ``variant``.

    At the default gain under ``synthetic_weather(t_mean=30, t_swing=3)`` the
    ideal model runs about 16% of the time.
    """
    b = single_cell(gain=gain, unit=oversized_unit(tau))
    return Building(b.name, b.zones, b.interambiances, b.components, b.site, bind(b, [("cell-split", "HVAC_SYSTEM", variant)]))


def glazed_box(volume: float = 30.0, area: float = 12.0, initial_temperature: float = 20.0) -> Building:
    """Zone enclosed by one massless glazed element and nothing else.

    With no emissivity on either face its response is exactly first order.
    """
    zone = Zone("box", "glazed box", volume, initial_temperature=initial_temperature)
    ia = _envelope("box", "S", 180.0, 90.0)
    dark = SurfaceProps(sw_absorptance=1.0, sw_reflectance=0.0, lw_emissivity=0.0)
    win = Component("box-glass", ComponentKind.WINDOW, ia.id, area=area, glazing=Glazing(0.0, 5.8), face_a=dark, face_b=dark)
    return Building("glazed-box", (zone,), (ia,), (win,), REUNION)


def five_zone(airflow: bool = True) -> Building:
    """Five 4 x 5 x 2.7 m rooms in an east-west row, linked by doors and cracks."""
    h, w, d = 2.7, 4.0, 5.0
    zones = tuple(Zone(f"z{i}", f"room {i}", w * d * h, sensible_gain=150.0 * (i % 2), infiltration_ach=0.5) for i in range(1, 6))
    ias, comps = [], []
    for i, z in enumerate(zones):
        facades = "NS" + ("W" if i == 0 else "") + ("E" if i == len(zones) - 1 else "")
        a, c = _box(z, w, d, h, walls=HEAVY_WALL if i % 2 else LIGHT_WALL, facades=facades, window_south=3.0)
        ias += a
        comps += c
        if airflow:
            for f, cp, lee in (("S", 0.6, -0.3), ("N", 0.6, -0.3)):
                comps.append(
                    Component(
                        f"{z.id}-crack-{f}",
                        ComponentKind.AIRLINK_CRACK,
                        f"{z.id}-{f}",
                        link=Crack(0.004, 0.65, 1.0 if f == "S" else 2.2),
                        exposure=WindExposure(cp, lee),
                    )
                )
    for left, right in zip(zones, zones[1:]):
        ia = Interambiance(f"{left.id}-{right.id}", left.id, right.id, Orientation(90.0, 90.0))
        ias.append(ia)
        comps.append(Component(f"{ia.id}-wall", ComponentKind.WALL, ia.id, area=d * h, layers=PARTITION))
        if airflow:
            comps.append(Component(f"{ia.id}-door", ComponentKind.AIRLINK_LARGE_OPENING, ia.id, link=LargeOpening(0.8, 2.0)))
            comps.append(Component(f"{ia.id}-gap", ComponentKind.AIRLINK_CRACK, ia.id, link=Crack(0.002, 0.65, 0.1)))
    b = Building("five-zone", zones, tuple(ias), tuple(comps), REUNION)
    if airflow:
        b = Building(b.name, b.zones, b.interambiances, b.components, b.site, bind(b, [("building", "AIRFLOW_TRANSFER", "PRESSURE")]))
    return b


def synthetic_weather(
    start: datetime,
    days: float,
    step: float = 3600.0,
    t_mean: float = 26.0,
    t_swing: float = 4.0,
    ghi_peak: float = 900.0,
    wind: float = 3.0,
    humidity: float = 0.016,
    constant: bool = False,
) -> WeatherSeries:
    """Smooth diurnal weather: sinusoidal temperature peaking at 15:00, half-sine sun 06:00-18:00."""
    n = int(round(days * 86400.0 / step)) + 1
    out = []
    for k in range(n):
        t = start + timedelta(seconds=k * step)
        hour = t.hour + t.minute / 60.0 + t.second / 3600.0
        if constant:
            out.append(WeatherRecord(t, t_mean, humidity, wind, 135.0, 0.0, 0.0))
            continue
        temp = t_mean + t_swing * math.cos(2.0 * math.pi * (hour - 15.0) / 24.0)
        ghi = ghi_peak * math.sin(math.pi * (hour - 6.0) / 12.0) if 6.0 < hour < 18.0 else 0.0
        wdir = (135.0 + 30.0 * math.sin(2.0 * math.pi * hour / 24.0)) % 360.0
        out.append(WeatherRecord(t, temp, humidity, wind * (0.6 + 0.4 * math.sin(math.pi * hour / 24.0)), wdir, ghi))
    return WeatherSeries(out)
