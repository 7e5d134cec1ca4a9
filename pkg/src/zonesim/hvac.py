"""Split-system air conditioner models at three levels of detail.

* model 0: ideal hourly control, delivers exactly the demand up to capacity;
* model 1: thermostat cycling with a single time constant start-up;
* model 2: model 1 dynamics on capacities and power from a fitted linear map.

All powers are in W and cooling is reported as a positive quantity.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np

MAP_QUANTITIES = ("q_total", "q_sensible", "p_elec")


class HvacError(ValueError):
    pass


class MapNotFittedError(HvacError):
    pass


class RankDeficientError(HvacError):
    pass


@dataclass(frozen=True)
class PerformanceMap:
    """Affine maps ``c0 + c1*T_out + c2*T_in + c3*w_in`` per quantity."""

    coefficients: dict[str, tuple[float, float, float, float]]
    rms: dict[str, float] = field(default_factory=dict)

    def evaluate(self, t_out: float, t_in: float, w_in: float) -> tuple[float, float, float]:
        x = (1.0, t_out, t_in, w_in)
        return tuple(sum(c * v for c, v in zip(self.coefficients[q], x)) for q in MAP_QUANTITIES)


@dataclass(frozen=True)
class MapPoint:
    t_out: float
    t_in: float
    w_in: float
    q_total: float
    q_sensible: float
    p_elec: float


def fit_performance_map(points: Sequence[MapPoint]) -> PerformanceMap:
    """Ordinary least squares per output quantity."""
    if len(points) < 4:
        raise RankDeficientError(f"need at least 4 points, got {len(points)}")
    x = np.array([[1.0, p.t_out, p.t_in, p.w_in] for p in points])
    if np.linalg.matrix_rank(x) < 4:
        raise RankDeficientError("manufacturer points do not span (T_out, T_in, w_in)")
    coefs, rms = {}, {}
    for q in MAP_QUANTITIES:
        y = np.array([getattr(p, q) for p in points])
        c, *_ = np.linalg.lstsq(x, y, rcond=None)
        coefs[q] = tuple(float(v) for v in c)
        rms[q] = float(np.sqrt(np.mean((x @ c - y) ** 2)))
    return PerformanceMap(coefs, rms)


@dataclass(frozen=True)
class SplitUnit:
    rated_total: float = 3000.0
    shr: float = 0.75
    rated_electric: float = 1150.0
    tau: float = 300.0
    setpoint: float = 25.0
    deadband: float = 1.0
    performance_map: PerformanceMap | None = None

    @property
    def nominal_cop(self) -> float:
        return self.rated_total / self.rated_electric

    @property
    def rated_sensible(self) -> float:
        return self.rated_total * self.shr

    def problems(self) -> list[str]:
        out = []
        if not self.rated_total > 0 or not self.rated_electric > 0:
            out.append("rated capacity and electric power must be > 0")
        if not 0.0 < self.shr <= 1.0:
            out.append(f"sensible heat ratio {self.shr} outside (0, 1]")
        if not self.tau > 0:
            out.append("time constant must be > 0")
        if not self.deadband > 0:
            out.append("thermostat deadband must be > 0")
        return out


@dataclass(frozen=True)
class HvacOutput:
    total: float = 0.0
    sensible: float = 0.0
    latent: float = 0.0
    electric: float = 0.0
    on_fraction: float = 0.0
    unmet: float = 0.0


OFF = HvacOutput()


@dataclass(frozen=True)
class CyclingState:
    on: bool = False
    t_since_on: float = 0.0
    on_time: float = 0.0


def model0_ideal(load: float, unit: SplitUnit, dt: float = 3600.0) -> HvacOutput:
    """Ideal control: the sensible demand is met instantly up to capacity."""
    if load <= 0.0:
        return OFF
    sensible = min(load, unit.rated_sensible)
    total = sensible / unit.shr
    return HvacOutput(
        total=total,
        sensible=sensible,
        latent=total - sensible,
        electric=total / unit.nominal_cop,
        on_fraction=total / unit.rated_total,
        unmet=load - sensible,
    )


def thermostat_step(on: bool, t_air: float, setpoint: float, deadband: float) -> bool:
    if t_air > setpoint + deadband / 2:
        return True
    if t_air < setpoint - deadband / 2:
        return False
    return on


def transient_capacity(q_ss, t, tau):
    """Single time constant start-up: ``q_ss * (1 - exp(-t/tau))``."""
    if np.ndim(t):
        return q_ss * (1.0 - np.exp(-np.asarray(t, dtype=float) / tau))
    return q_ss * (1.0 - math.exp(-t / tau))


def delivered_energy(q_ss: float, t: float, tau: float) -> float:
    """Closed-form integral of the start-up curve over [0, t], J."""
    return q_ss * (t - tau * (1.0 - math.exp(-t / tau)))


def _cycle(state: CyclingState, t_air: float, unit: SplitUnit, dt: float) -> tuple[CyclingState, float | None]:
    on = thermostat_step(state.on, t_air, unit.setpoint, unit.deadband)
    if not on:
        return CyclingState(False, 0.0, state.on_time), None
    t = state.t_since_on if state.on else 0.0
    return CyclingState(True, t + dt, state.on_time + dt), t


def model1_step(state: CyclingState, t_air: float, unit: SplitUnit, dt: float = 60.0) -> tuple[HvacOutput, CyclingState]:
    if dt > 300.0:
        raise HvacError("cycling models need a step of at most 300 s")
    new, t = _cycle(state, t_air, unit, dt)
    if t is None:
        return OFF, new
    total = transient_capacity(unit.rated_total, t, unit.tau)
    sensible = unit.shr * total
    return HvacOutput(total, sensible, total - sensible, unit.rated_electric, 1.0), new


def model2_step(
    state: CyclingState,
    t_air: float,
    w_air: float,
    t_out: float,
    unit: SplitUnit,
    dt: float = 60.0,
) -> tuple[HvacOutput, CyclingState]:
    if unit.performance_map is None:
        raise MapNotFittedError("model 2 needs a fitted performance map")
    if dt > 300.0:
        raise HvacError("cycling models need a step of at most 300 s")
    new, t = _cycle(state, t_air, unit, dt)
    if t is None:
        return OFF, new
    q_tot, q_sens, p_el = unit.performance_map.evaluate(t_out, t_air, w_air)
    factor = 1.0 - math.exp(-t / unit.tau)
    total = max(q_tot, 0.0) * factor
    sensible = min(max(q_sens, 0.0) * factor, total)
    return HvacOutput(total, sensible, total - sensible, max(p_el, 0.0), 1.0), new


# -- reporting ----------------------------------------------------------------


@dataclass(frozen=True)
class HvacSummary:
    daily_energy_kwh: tuple[float, ...]
    energy_kwh: float
    cooling_kwh: float
    mean_cop: float | None
    fractional_on_time: float


def summarize_arrays(total, electric, on_fraction, dt: float) -> HvacSummary:
    total = np.asarray(total, dtype=float)
    electric = np.asarray(electric, dtype=float)
    on_fraction = np.asarray(on_fraction, dtype=float)
    if total.size == 0:
        raise HvacError("empty HVAC series")
    per_day = max(1, int(round(86400.0 / dt)))
    e_steps = electric * dt / 3.6e6
    daily = tuple(float(e_steps[i : i + per_day].sum()) for i in range(0, e_steps.size, per_day))
    e_el = float(e_steps.sum())
    e_cool = float(total.sum() * dt / 3.6e6)
    cop = e_cool / e_el if e_el > 0 else None
    fot = float(on_fraction.sum() * dt / (on_fraction.size * dt))
    return HvacSummary(daily, e_el, e_cool, cop, fot)


def summarize(series: Sequence[HvacOutput], dt: float) -> HvacSummary:
    return summarize_arrays(
        [o.total for o in series], [o.electric for o in series], [o.on_fraction for o in series], dt
    )


@dataclass(frozen=True)
class CopCurve:
    """Mean COP as a function of fractional on-time, linear between bins."""

    fot: tuple[float, ...]
    cop: tuple[float, ...]

    def __call__(self, fot):
        return np.interp(fot, self.fot, self.cop)


def cop_curve(total, electric, on_fraction, dt: float, window: float = 3600.0, bins: int = 10) -> CopCurve:
    """COP versus fractional on-time from a short-step run, aggregated per window."""
    total, electric, on_fraction = (np.asarray(a, dtype=float) for a in (total, electric, on_fraction))
    per = max(1, int(round(window / dt)))
    n = total.size // per
    if n == 0:
        raise HvacError("series shorter than one aggregation window")
    shape = (n, per)
    cool = total[: n * per].reshape(shape).sum(axis=1)
    elec = electric[: n * per].reshape(shape).sum(axis=1)
    fot = on_fraction[: n * per].reshape(shape).mean(axis=1)
    keep = elec > 0
    if not np.any(keep):
        raise HvacError("no compressor operation in the reference series")
    cool, elec, fot = cool[keep], elec[keep], fot[keep]
    edges = np.linspace(0.0, 1.0, bins + 1)
    idx = np.clip(np.digitize(fot, edges) - 1, 0, bins - 1)
    xs, ys = [], []
    for b in range(bins):
        sel = idx == b
        if np.any(sel):
            xs.append(float(fot[sel].mean()))
            ys.append(float(cool[sel].sum() / elec[sel].sum()))
    return CopCurve(tuple(xs), tuple(ys))


def apply_cop_correction(outputs: Sequence[HvacOutput], curve: CopCurve) -> list[HvacOutput]:
    """Rescale electric power of an hourly series with the COP at each step's on-time."""
    out = []
    for o in outputs:
        if o.total > 0:
            out.append(replace(o, electric=o.total / float(curve(o.on_fraction))))
        else:
            out.append(o)
    return out
