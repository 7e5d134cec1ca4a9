import math
from datetime import datetime, timedelta

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zonesim.model import Site
from zonesim.weather import (
    MissingWeatherField,
    SolarPosition,
    WeatherGapError,
    WeatherRecord,
    WeatherSeries,
    diffuse_fraction,
    equation_of_time,
    extraterrestrial_normal,
    humidity_ratio,
    outdoor_film_coefficient,
    sky_temperature,
    solar_position,
    split_diffuse,
    surface_irradiance,
)

EQUATOR = Site(latitude=0.0, longitude=0.0, time_zone_offset=0.0)


def solar_noon(day: datetime) -> datetime:
    n = day.timetuple().tm_yday
    return day.replace(hour=12) - timedelta(minutes=equation_of_time(n))


def rec(**kw) -> WeatherRecord:
    base = dict(timestamp=datetime(2023, 6, 1, 12), dry_bulb=25.0, humidity_ratio=0.01)
    base.update(kw)
    return WeatherRecord(**base)


# -- solar geometry -----------------------------------------------------------


def test_equator_equinox_noon_overhead():
    pos = solar_position(EQUATOR, solar_noon(datetime(2023, 3, 22)))
    assert abs(pos.hour_angle) < 0.01
    assert pos.altitude == pytest.approx(90.0, abs=1.0)


def test_mid_latitude_winter_solstice_noon():
    site = Site(latitude=45.0, longitude=0.0)
    pos = solar_position(site, solar_noon(datetime(2023, 12, 21)))
    expected = 90.0 - abs(45.0 - pos.declination)
    assert pos.altitude == pytest.approx(expected, abs=1e-6)
    assert pos.altitude == pytest.approx(21.55, abs=0.5)


def test_midnight_below_horizon():
    for site in (EQUATOR, Site(latitude=45.0), Site(latitude=-20.9, longitude=55.5, time_zone_offset=4.0)):
        for day in (datetime(2023, 3, 22), datetime(2023, 6, 21), datetime(2023, 12, 21)):
            assert solar_position(site, day).altitude < 0


def test_south_sun_at_noon_in_north():
    pos = solar_position(Site(latitude=45.0), solar_noon(datetime(2023, 6, 21)))
    assert pos.azimuth == pytest.approx(180.0, abs=0.05)


# -- diffuse split ------------------------------------------------------------


def test_night_split_is_zero():
    pos = SolarPosition(-10.0, 0.0, 0.0, 180.0, 100)
    assert split_diffuse(rec(global_horizontal=0.0), pos, "CLEARNESS_INDEX") == (0.0, 0.0)
    assert split_diffuse(rec(global_horizontal=0.0), SolarPosition(30.0, 180.0, 0.0, 0.0, 100)) == (0.0, 0.0)


def test_overcast_diffuse_fraction():
    pos = SolarPosition(40.0, 180.0, 0.0, 0.0, 172)
    g0 = extraterrestrial_normal(172) * math.sin(math.radians(40.0))
    ghi = 0.15 * g0
    _, dhi = split_diffuse(rec(global_horizontal=ghi), pos, "CLEARNESS_INDEX")
    assert dhi / ghi >= 0.95
    assert diffuse_fraction(0.15) == pytest.approx(1 - 0.09 * 0.15)


def test_measured_split_arithmetic():
    pos = SolarPosition(30.0, 180.0, 0.0, 0.0, 100)
    dni, dhi = split_diffuse(rec(global_horizontal=600.0, diffuse_horizontal=200.0), pos, "MEASURED")
    assert dhi == 200.0
    assert dni == pytest.approx(800.0, rel=1e-12)


def test_measured_missing_diffuse_errors():
    pos = SolarPosition(30.0, 180.0, 0.0, 0.0, 100)
    with pytest.raises(MissingWeatherField, match="diffuse_horizontal"):
        split_diffuse(rec(global_horizontal=600.0), pos, "MEASURED")


def test_correlation_continuous_at_breakpoints():
    for k in (0.22, 0.80):
        assert diffuse_fraction(k - 1e-9) == pytest.approx(diffuse_fraction(k + 1e-9), abs=5e-3)


@given(
    st.floats(0.0, 1400.0),
    st.floats(-10.0, 90.0),
    st.integers(1, 365),
    st.sampled_from(["CLEARNESS_INDEX", "MEASURED", "AUTO"]),
    st.floats(0.0, 1.0),
)
def test_split_energy_consistency(ghi, alt, day, variant, share):
    r = rec(global_horizontal=ghi, diffuse_horizontal=share * ghi)
    pos = SolarPosition(alt, 180.0, 0.0, 0.0, day)
    dni, dhi = split_diffuse(r, pos, variant)
    assert dni >= 0 and dhi >= 0
    assert dni * max(math.sin(math.radians(alt)), 0.0) + dhi <= ghi + 1e-6


# -- surface irradiance -------------------------------------------------------

SUN = SolarPosition(50.0, 180.0, 0.0, 0.0, 100)


def test_horizontal_surface():
    s = surface_irradiance(500.0, 150.0, SUN, 0.0, 0.0, 0.3)
    assert s.diffuse_sky == pytest.approx(150.0)
    assert s.reflected_ground == pytest.approx(0.0, abs=1e-12)
    assert s.direct == pytest.approx(500.0 * math.sin(math.radians(50.0)))


def test_vertical_surface():
    s = surface_irradiance(500.0, 150.0, SUN, 90.0, 180.0, 0.2)
    assert s.diffuse_sky == pytest.approx(75.0)
    ghi = 500.0 * math.sin(math.radians(50.0)) + 150.0
    assert s.reflected_ground == pytest.approx(0.2 * ghi / 2)
    assert s.direct == pytest.approx(500.0 * math.cos(math.radians(50.0)))


def test_sun_behind_surface():
    assert surface_irradiance(800.0, 100.0, SUN, 90.0, 0.0, 0.2).direct == 0.0


@given(
    st.floats(0.0, 1200.0),
    st.floats(0.0, 600.0),
    st.floats(-90.0, 90.0),
    st.floats(0.0, 360.0),
    st.floats(0.0, 180.0),
    st.floats(0.0, 360.0),
    st.floats(0.0, 1.0),
)
def test_irradiance_components_non_negative(dni, dhi, alt, saz, tilt, az, albedo):
    pos = SolarPosition(alt, saz, 0.0, 0.0, 100)
    s = surface_irradiance(dni, dhi, pos, tilt, az, albedo)
    assert min(s.direct, s.diffuse_sky, s.reflected_ground) >= 0


# -- sky temperature ----------------------------------------------------------


def test_sky_air_identity():
    assert sky_temperature(rec(dry_bulb=30.0), "AIR") == pytest.approx(303.15)


def test_swinbank_value():
    t = sky_temperature(rec(dry_bulb=300.0 - 273.15), "SWINBANK")
    assert t == pytest.approx(0.0552 * 300.0**1.5, abs=1e-9)
    assert t == pytest.approx(286.8, abs=0.1)


def test_full_cloud_gives_air_temperature():
    r = rec(dry_bulb=20.0, dew_point=10.0, cloud_cover=1.0)
    for variant in ("SWINBANK", "DEW_POINT"):
        assert sky_temperature(r, variant, cloud_correction=True) == pytest.approx(293.15)


def test_dew_point_emissivity():
    r = rec(dry_bulb=20.0, dew_point=15.0)
    eps = 0.741 + 0.0062 * 15.0
    assert sky_temperature(r, "DEW_POINT") == pytest.approx(eps**0.25 * 293.15)


def test_swinbank_below_air_on_grid():
    for t_k in np.arange(200.0, 328.0, 0.5):
        assert sky_temperature(rec(dry_bulb=t_k - 273.15), "SWINBANK") < t_k


@pytest.mark.parametrize(
    "variant, cloud, record, field",
    [
        ("DEW_POINT", False, rec(), "dew_point"),
        ("SWINBANK", True, rec(), "cloud_cover"),
    ],
)
def test_missing_sky_fields(variant, cloud, record, field):
    with pytest.raises(MissingWeatherField) as err:
        sky_temperature(record, variant, cloud_correction=cloud)
    assert err.value.field_name == field and variant in str(err.value)


# -- outdoor convection -------------------------------------------------------


def test_constant_film():
    assert outdoor_film_coefficient("CONSTANT", 7.0) == 11.7


def test_linear_wind_film():
    assert outdoor_film_coefficient("LINEAR_WIND", 0.0) == pytest.approx(5.8)
    assert outdoor_film_coefficient("LINEAR_WIND", 1.0) == pytest.approx(9.8)


@given(st.floats(0.0, 30.0), st.floats(0.0, 30.0), st.floats(0.0, 1.0))
def test_linear_wind_affine(v1, v2, lam):
    h = lambda v: outdoor_film_coefficient("LINEAR_WIND", v)
    v = lam * v1 + (1 - lam) * v2
    assert h(v) == pytest.approx(lam * h(v1) + (1 - lam) * h(v2), rel=1e-12, abs=1e-12)


def test_ito_windward_exceeds_leeward():
    windward = outdoor_film_coefficient("ITO", 3.0, 180.0, 180.0)
    leeward = outdoor_film_coefficient("ITO", 3.0, 0.0, 180.0)
    assert windward == pytest.approx(18.63 * 0.75**0.605)
    assert leeward == pytest.approx(18.63 * 0.45**0.605)
    assert windward > leeward


def test_cole_sturrock():
    assert outdoor_film_coefficient("COLE_STURROCK", 2.0, 90.0, 100.0) == pytest.approx(22.8)
    assert outdoor_film_coefficient("COLE_STURROCK", 2.0, 270.0, 100.0) == pytest.approx(5.7)


def test_negative_wind_rejected():
    with pytest.raises(ValueError):
        outdoor_film_coefficient("LINEAR_WIND", -1.0)


# -- records and series -------------------------------------------------------


def test_record_invariants():
    with pytest.raises(ValueError):
        rec(wind_speed=-1.0)
    with pytest.raises(ValueError):
        rec(global_horizontal=100.0, diffuse_horizontal=200.0)


def test_humidity_ratio_at_saturation():
    # about 0.0147 kg/kg at 20 C and 101325 Pa
    assert float(humidity_ratio(20.0, 100.0)) == pytest.approx(0.0147, abs=2e-4)


def hourly(n, start=datetime(2024, 1, 1), skip=()):
    return WeatherSeries(
        [rec(timestamp=start + timedelta(hours=k), dry_bulb=float(k)) for k in range(n) if k not in skip]
    )


def test_series_interpolates_linearly():
    s = hourly(3)
    cols = s.sample([datetime(2024, 1, 1, 0, 30), datetime(2024, 1, 1, 1, 45)])
    assert cols["dry_bulb"].tolist() == pytest.approx([0.5, 1.75])


def test_gap_names_first_missing_timestamp():
    s = hourly(10, skip=(4, 5))
    with pytest.raises(WeatherGapError) as err:
        s.check_coverage(datetime(2024, 1, 1), datetime(2024, 1, 1, 9))
    assert err.value.missing == datetime(2024, 1, 1, 4)


def test_coverage_beyond_end():
    s = hourly(5)
    with pytest.raises(WeatherGapError) as err:
        s.check_coverage(datetime(2024, 1, 1), datetime(2024, 1, 1, 8))
    assert err.value.missing == datetime(2024, 1, 1, 5)
    with pytest.raises(WeatherGapError):
        s.check_coverage(datetime(2023, 12, 31, 23), datetime(2024, 1, 1, 2))
    s.check_coverage(datetime(2024, 1, 1), datetime(2024, 1, 1, 4))


def test_wind_direction_interpolates_across_north():
    recs = [
        rec(timestamp=datetime(2024, 1, 1), wind_direction=350.0),
        rec(timestamp=datetime(2024, 1, 1, 1), wind_direction=10.0),
    ]
    d = WeatherSeries(recs).sample([datetime(2024, 1, 1, 0, 30)])["wind_direction"][0]
    assert min(d, 360.0 - d) == pytest.approx(0.0, abs=1e-9)
