"""Weather records, solar geometry, irradiance on surfaces, sky temperature
and outdoor film coefficients.

Angles are degrees. Azimuths are measured clockwise from north, tilts from
the horizontal (0 = facing up). Temperatures are Celsius in records and
Kelvin for radiation laws.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from datetime import datetime

import numpy as np

SOLAR_CONSTANT = 1367.0  # W/m2
SIGMA = 5.670374419e-8
KELVIN = 273.15
P_ATM = 101325.0


class MissingWeatherField(ValueError):
    def __init__(self, field_name: str, variant: str):
        self.field_name = field_name
        self.variant = variant
        super().__init__(f"{variant} needs weather field {field_name!r}, which is missing")


@dataclass(frozen=True)
class WeatherRecord:
    timestamp: datetime
    dry_bulb: float  # C
    humidity_ratio: float  # kg/kg
    wind_speed: float = 0.0
    wind_direction: float = 0.0
    global_horizontal: float = 0.0
    diffuse_horizontal: float | None = None
    cloud_cover: float | None = None
    dew_point: float | None = None

    def __post_init__(self):
        if self.wind_speed < 0:
            raise ValueError("wind speed must be >= 0")
        if self.global_horizontal < 0:
            raise ValueError("global horizontal irradiance must be >= 0")
        if self.diffuse_horizontal is not None and self.diffuse_horizontal > self.global_horizontal + 1e-9:
            raise ValueError("diffuse horizontal exceeds global horizontal")


# -- psychrometrics -----------------------------------------------------------


def saturation_pressure(t_c):
    """Water vapour saturation pressure over liquid water (Magnus form), Pa."""
    return 610.94 * np.exp(17.625 * np.asarray(t_c) / (np.asarray(t_c) + 243.04))


def humidity_ratio(t_c, rh_pct, pressure: float = P_ATM):
    pw = np.asarray(rh_pct) / 100.0 * saturation_pressure(t_c)
    return 0.621945 * pw / (pressure - pw)


def saturation_humidity_ratio(t_c, pressure: float = P_ATM):
    return humidity_ratio(t_c, 100.0, pressure)


# -- solar geometry -----------------------------------------------------------


@dataclass(frozen=True)
class SolarPosition:
    altitude: float
    azimuth: float
    declination: float
    hour_angle: float
    day_of_year: int = 1

    @property
    def sin_altitude(self) -> float:
        return math.sin(math.radians(self.altitude))


def declination(day_of_year: float) -> float:
    return 23.45 * math.sin(math.radians(360.0 * (284 + day_of_year) / 365.0))


def equation_of_time(day_of_year: float) -> float:
    """Minutes, Spencer's Fourier fit."""
    b = 2 * math.pi * (day_of_year - 1) / 365.0
    return 229.18 * (
        0.000075
        + 0.001868 * math.cos(b)
        - 0.032077 * math.sin(b)
        - 0.014615 * math.cos(2 * b)
        - 0.04089 * math.sin(2 * b)
    )


def solar_time_hours(site, timestamp: datetime) -> float:
    n = timestamp.timetuple().tm_yday
    clock = timestamp.hour + timestamp.minute / 60.0 + timestamp.second / 3600.0
    correction = 4.0 * (site.longitude - 15.0 * site.time_zone_offset) + equation_of_time(n)
    return clock + correction / 60.0


def solar_position(site, timestamp: datetime) -> SolarPosition:
    """Sun position for a local-standard-time timestamp."""
    n = timestamp.timetuple().tm_yday
    dec = declination(n)
    omega = 15.0 * (solar_time_hours(site, timestamp) - 12.0)
    lat, d, w = (math.radians(x) for x in (site.latitude, dec, omega))
    sin_alt = math.sin(lat) * math.sin(d) + math.cos(lat) * math.cos(d) * math.cos(w)
    alt = math.asin(max(-1.0, min(1.0, sin_alt)))
    # azimuth clockwise from north
    y = -math.cos(d) * math.sin(w)
    x = math.sin(d) * math.cos(lat) - math.cos(d) * math.sin(lat) * math.cos(w)
    az = math.degrees(math.atan2(y, x)) % 360.0
    return SolarPosition(math.degrees(alt), az, dec, omega, n)


def extraterrestrial_normal(day_of_year: float) -> float:
    return SOLAR_CONSTANT * (1.0 + 0.033 * math.cos(math.radians(360.0 * day_of_year / 365.0)))


# -- diffuse reconstitution ---------------------------------------------------


class DiffuseModel(str, enum.Enum):
    MEASURED = "MEASURED"
    CLEARNESS_INDEX = "CLEARNESS_INDEX"
    AUTO = "AUTO"  # measured when present, clearness index otherwise


# Erbs-type piecewise diffuse fraction
KT_LOW, KT_HIGH = 0.22, 0.80
KT_POLY = (0.9511, -0.1604, 4.388, -16.638, 12.336)


def diffuse_fraction(kt: float) -> float:
    if kt <= KT_LOW:
        return 1.0 - 0.09 * kt
    if kt <= KT_HIGH:
        return sum(c * kt**i for i, c in enumerate(KT_POLY))
    return 0.165


def split_diffuse(record: WeatherRecord, pos: SolarPosition, variant=DiffuseModel.AUTO) -> tuple[float, float]:
    """Direct normal and diffuse horizontal irradiance, W/m2."""
    variant = DiffuseModel(variant)
    ghi = record.global_horizontal
    measured = record.diffuse_horizontal
    if variant is DiffuseModel.MEASURED and measured is None:
        raise MissingWeatherField("diffuse_horizontal", variant.value)
    use_measured = measured is not None and variant is not DiffuseModel.CLEARNESS_INDEX

    if pos.altitude <= 0.0 or ghi <= 0.0:
        return 0.0, (measured if use_measured else 0.0)

    sin_alt = pos.sin_altitude
    if use_measured:
        dhi = measured
    else:
        g0 = extraterrestrial_normal(pos.day_of_year) * sin_alt
        kt = min(max(ghi / g0, 0.0), 1.0)
        dhi = diffuse_fraction(kt) * ghi
    dni = max(0.0, (ghi - dhi) / sin_alt)
    # low sun: keep the beam physical
    dni = min(dni, extraterrestrial_normal(pos.day_of_year))
    return dni, dhi


@dataclass(frozen=True)
class SurfaceIrradiance:
    direct: float
    diffuse_sky: float
    reflected_ground: float

    @property
    def total(self) -> float:
        return self.direct + self.diffuse_sky + self.reflected_ground


def incidence_cosine(pos: SolarPosition, tilt, azimuth):
    """cos of the incidence angle on surfaces; vectorizes over tilt/azimuth."""
    alt = math.radians(pos.altitude)
    saz = math.radians(pos.azimuth)
    t = np.radians(tilt)
    a = np.radians(azimuth)
    return np.sin(alt) * np.cos(t) + np.cos(alt) * np.sin(t) * np.cos(saz - a)


def surface_irradiance(dni: float, dhi: float, pos: SolarPosition, tilt: float, azimuth: float, albedo: float) -> SurfaceIrradiance:
    """Isotropic-sky irradiance on a tilted plane."""
    if dni < 0 or dhi < 0:
        raise ValueError("irradiance must be >= 0")
    cos_t = math.cos(math.radians(tilt))
    ghi = dni * max(0.0, pos.sin_altitude) + dhi
    direct = dni * max(0.0, float(incidence_cosine(pos, tilt, azimuth))) if pos.altitude > 0 else 0.0
    return SurfaceIrradiance(direct, dhi * (1 + cos_t) / 2, albedo * ghi * (1 - cos_t) / 2)


# -- sky temperature ----------------------------------------------------------


class SkyModel(str, enum.Enum):
    AIR = "AIR"
    SWINBANK = "SWINBANK"
    DEW_POINT = "DEW_POINT"


SWINBANK_COEFF = 0.0552
DEW_POINT_EMISSIVITY = (0.741, 0.0062)


def sky_temperature(record: WeatherRecord, variant=SkyModel.AIR, cloud_correction: bool = False) -> float:
    """Effective sky temperature, K."""
    variant = SkyModel(variant)
    t_air = record.dry_bulb + KELVIN
    if variant is SkyModel.AIR:
        return t_air
    if variant is SkyModel.SWINBANK:
        eps = (SWINBANK_COEFF * math.sqrt(t_air)) ** 4
    else:
        if record.dew_point is None:
            raise MissingWeatherField("dew_point", variant.value)
        eps = DEW_POINT_EMISSIVITY[0] + DEW_POINT_EMISSIVITY[1] * record.dew_point
    if cloud_correction:
        if record.cloud_cover is None:
            raise MissingWeatherField("cloud_cover", variant.value + "+CLOUD")
        eps = eps + (1.0 - eps) * record.cloud_cover
    return eps**0.25 * t_air


# -- outdoor convection -------------------------------------------------------


class OutdoorConvection(str, enum.Enum):
    CONSTANT = "CONSTANT"
    LINEAR_WIND = "LINEAR_WIND"
    ITO = "ITO"
    COLE_STURROCK = "COLE_STURROCK"


def is_windward(surface_azimuth, wind_direction):
    diff = np.abs((np.asarray(surface_azimuth) - wind_direction + 180.0) % 360.0 - 180.0)
    return diff <= 90.0


def outdoor_film_coefficient(variant, wind_speed: float, surface_azimuth=0.0, wind_direction: float = 0.0, constant: float = 11.7):
    """Exterior convective coefficient, W/(m2K). Vectorizes over azimuth."""
    variant = OutdoorConvection(variant)
    if wind_speed < 0:
        raise ValueError("wind speed must be >= 0")
    v = wind_speed
    shape = np.shape(surface_azimuth)
    if variant is OutdoorConvection.CONSTANT:
        h = np.full(shape, float(constant))
    elif variant is OutdoorConvection.LINEAR_WIND:
        h = np.full(shape, 5.8 + 4.0 * v)
    else:
        windward = is_windward(surface_azimuth, wind_direction)
        if variant is OutdoorConvection.ITO:
            v_wind = 0.25 * v if v > 2.0 else 0.5 * v
            v_loc = np.where(windward, v_wind, 0.3 + 0.05 * v)
            h = 18.63 * np.power(v_loc, 0.605)
        else:
            h = np.where(windward, 11.4 + 5.7 * v, 5.7)
    return float(h) if h.ndim == 0 else h


# -- series -------------------------------------------------------------------

_SERIES_FIELDS = (
    "dry_bulb",
    "humidity_ratio",
    "wind_speed",
    "global_horizontal",
    "diffuse_horizontal",
    "cloud_cover",
    "dew_point",
)


class WeatherGapError(ValueError):
    def __init__(self, missing: datetime):
        self.missing = missing
        super().__init__(f"weather data missing at {missing.isoformat()}")


class WeatherSeries:
    """Time-ordered weather records with linear interpolation between them.

    Missing optional fields are stored as NaN and come back as None.
    """

    def __init__(self, records):
        records = sorted(records, key=lambda r: r.timestamp)
        if not records:
            raise ValueError("empty weather series")
        self.records = records
        self.times = np.array([_epoch(r.timestamp) for r in records])
        if np.any(np.diff(self.times) <= 0):
            raise ValueError("duplicate weather timestamps")
        self.columns = {
            f: np.array([np.nan if getattr(r, f) is None else getattr(r, f) for r in records], dtype=float)
            for f in _SERIES_FIELDS
        }
        rad = np.radians([r.wind_direction for r in records])
        self._wind_xy = (np.sin(rad), np.cos(rad))
        self.interval = float(np.median(np.diff(self.times))) if len(records) > 1 else 3600.0

    def __len__(self) -> int:
        return len(self.records)

    def check_coverage(self, start: datetime, end: datetime) -> None:
        """Raise WeatherGapError naming the first uncovered instant in [start, end]."""
        t0, t1 = _epoch(start), _epoch(end)
        if t0 < self.times[0]:
            raise WeatherGapError(start)
        if t1 > self.times[-1]:
            raise WeatherGapError(_from_epoch(max(self.times[-1] + self.interval, t0)))
        inside = (self.times >= t0 - self.interval) & (self.times <= t1 + self.interval)
        t = self.times[inside]
        gaps = np.flatnonzero(np.diff(t) > 1.5 * self.interval)
        for g in gaps:
            missing = t[g] + self.interval
            if missing <= t1 and t[g + 1] >= t0:
                raise WeatherGapError(_from_epoch(max(missing, t0)))

    def sample(self, times: list[datetime]) -> dict[str, np.ndarray]:
        """Interpolated columns at the given instants."""
        x = np.array([_epoch(t) for t in times])
        out = {f: np.interp(x, self.times, col) for f, col in self.columns.items()}
        # NaN in either neighbour propagates through np.interp as NaN
        sx = np.interp(x, self.times, self._wind_xy[0])
        cx = np.interp(x, self.times, self._wind_xy[1])
        out["wind_direction"] = np.degrees(np.arctan2(sx, cx)) % 360.0
        return out

    @staticmethod
    def record_at(columns: dict[str, np.ndarray], k: int, timestamp: datetime) -> WeatherRecord:
        def opt(name):
            v = columns[name][k]
            return None if math.isnan(v) else float(v)

        ghi = max(float(columns["global_horizontal"][k]), 0.0)
        dhi = opt("diffuse_horizontal")
        return WeatherRecord(
            timestamp,
            float(columns["dry_bulb"][k]),
            float(columns["humidity_ratio"][k]),
            max(float(columns["wind_speed"][k]), 0.0),
            float(columns["wind_direction"][k]),
            ghi,
            None if dhi is None else min(max(dhi, 0.0), ghi),
            opt("cloud_cover"),
            opt("dew_point"),
        )


_EPOCH = datetime(1970, 1, 1)


def _epoch(t: datetime) -> float:
    return (t.replace(tzinfo=None) - _EPOCH).total_seconds()


def _from_epoch(s: float) -> datetime:
    from datetime import timedelta

    return _EPOCH + timedelta(seconds=float(s))
