"""Time loop: warm-up, thermal/airflow coupling and result collection."""
from __future__ import annotations

import enum
import logging
from dataclasses import dataclass, field
from datetime import datetime, timedelta

import numpy as np

from . import hvac as hv
from .airflow import AirflowError, FlowSolution, solve_pressures
from .catalog import ModelBindingSet
from .model import Building
from .thermal import BuildingState, StepResult, ThermalError, ThermalModel
from .weather import KELVIN, WeatherSeries, solar_position

log = logging.getLogger(__name__)

OUTPUT_GROUPS = ("zones", "surfaces", "flows", "hvac")


class Coupling(str, enum.Enum):
    PING_PONG = "PING_PONG"
    ONION = "ONION"


class StepError(RuntimeError):
    """A solver failure, tagged with the step it happened at."""

    def __init__(self, timestamp: datetime, cause: Exception):
        self.timestamp = timestamp
        self.cause = cause
        super().__init__(f"{timestamp.isoformat()}: {cause}")


@dataclass(frozen=True)
class SimulationConfig:
    start: datetime
    end: datetime
    thermal_step: float = 3600.0
    reduced_step: float = 60.0
    coupling: Coupling = Coupling.PING_PONG
    onion_tolerance: float = 0.05
    onion_max_iterations: int = 10
    outputs: tuple[str, ...] = OUTPUT_GROUPS
    step: float | None = None  # forces a step, bypassing selection
    warmup: bool = True

    def __post_init__(self):
        for s in (self.thermal_step, self.reduced_step) + ((self.step,) if self.step else ()):
            if s <= 0 or 86400 % s:
                raise ValueError(f"step {s} s does not divide a day")
        if self.thermal_step % self.reduced_step:
            raise ValueError("reduced step must divide the thermal step")
        if self.onion_tolerance <= 0:
            raise ValueError("onion tolerance must be > 0")
        if self.end <= self.start:
            raise ValueError("simulation end must follow its start")
        unknown = set(self.outputs) - set(OUTPUT_GROUPS)
        if unknown:
            raise ValueError(f"unknown output groups: {', '.join(sorted(unknown))}")


def select_timestep(bindings: ModelBindingSet, config: SimulationConfig) -> float:
    """One uniform step per run: reduced when a cycling HVAC model is bound."""
    if config.step is not None:
        return float(config.step)
    if bindings.uses_hvac("MODEL1", "MODEL2"):
        return float(config.reduced_step)
    return float(config.thermal_step)


@dataclass
class CouplingInfo:
    iterations: int = 1
    converged: bool = True
    max_change: float = 0.0


def _flows(model: ThermalModel, temps_c: np.ndarray, record, previous: FlowSolution | None) -> FlowSolution | None:
    if not model.uses_pressure_airflow:
        return None
    p = model.airflow_variant.params
    return solve_pressures(
        model.airflow_network,
        temps_c + KELVIN,
        record.dry_bulb + KELVIN,
        record.wind_speed,
        record.wind_direction,
        relaxation=p["relaxation"],
        tolerance=p["tolerance"],
        max_iterations=int(p["max_iterations"]),
    )


def couple_step(
    model: ThermalModel,
    state: BuildingState,
    record,
    pos,
    dt: float,
    strategy: Coupling = Coupling.PING_PONG,
    tolerance: float = 0.05,
    max_iterations: int = 10,
    previous_flows: FlowSolution | None = None,
) -> tuple[StepResult, FlowSolution | None, CouplingInfo]:
    """Advance one step with the chosen airflow/thermal coupling."""
    boundary = model.boundary(record, pos, state)
    air = model.air_nodes
    flows = _flows(model, state.temperatures[air], record, previous_flows)
    result = model.step(state, boundary, model.ventilation(flows, record.dry_bulb), dt)
    if Coupling(strategy) is Coupling.PING_PONG:
        return result, flows, CouplingInfo()

    info = CouplingInfo(converged=False)
    for it in range(2, max_iterations + 1):
        flows = _flows(model, result.state.temperatures[air], record, flows)
        again = model.step(state, boundary, model.ventilation(flows, record.dry_bulb), dt)
        change = float(np.max(np.abs(again.state.temperatures[air] - result.state.temperatures[air]), initial=0.0))
        result = again
        info.iterations, info.max_change = it, change
        if change < tolerance:
            info.converged = True
            break
    if not info.converged:
        log.warning("onion coupling did not converge at %s (change %.3f K)", record.timestamp, info.max_change)
    return result, flows, info


@dataclass
class ResultSet:
    times: list[datetime]  # end of each step
    dt: float
    zone_ids: list[str]
    air_temperature: np.ndarray  # (steps, zones), C
    humidity_ratio: np.ndarray
    unmet_load: np.ndarray  # W
    surface_ids: list[str] = field(default_factory=list)
    surface_temperature: np.ndarray | None = None  # (steps, surfaces, 2) faces a/b
    link_ids: list[str] = field(default_factory=list)
    link_flows: np.ndarray | None = None  # (steps, links, 2)
    hvac: dict[str, dict[str, np.ndarray]] = field(default_factory=dict)
    summaries: dict[str, hv.HvacSummary] = field(default_factory=dict)
    warnings: list[str] = field(default_factory=list)
    onion_iterations: np.ndarray | None = None

    @property
    def n_steps(self) -> int:
        return len(self.times)

    def zone_series(self, zone_id: str) -> np.ndarray:
        return self.air_temperature[:, self.zone_ids.index(zone_id)]

    def summary_line(self, wall_clock: float) -> str:
        hours = self.n_steps * self.dt / 3600.0
        parts = [f"simulated {hours:g} h in {wall_clock:.2f} s"]
        for k, z in enumerate(self.zone_ids):
            t = self.air_temperature[:, k]
            parts.append(f"{z} mean {t.mean():.2f} C max {t.max():.2f} C")
        energy = sum(s.energy_kwh for s in self.summaries.values())
        parts.append(f"HVAC energy {energy:.3f} kWh")
        return "; ".join(parts)


def _step_times(start: datetime, end: datetime, dt: float) -> list[datetime]:
    n = int(round((end - start).total_seconds() / dt))
    return [start + timedelta(seconds=k * dt) for k in range(n)]


def simulate(
    building: Building,
    bindings: ModelBindingSet | None,
    weather: WeatherSeries,
    config: SimulationConfig,
    model: ThermalModel | None = None,
) -> ResultSet:
    """Run the building over ``[config.start, config.end)``.

    Weather and sun for a step are sampled at its midpoint and results are
    stamped at its end. The first day is simulated once beforehand as warm-up
    and discarded.
    """
    model = model or ThermalModel(building, bindings)
    bindings = model.bindings
    dt = select_timestep(bindings, config)
    if (config.end - config.start).total_seconds() % dt:
        raise ValueError("simulation period is not a whole number of steps")
    times = _step_times(config.start, config.end, dt)
    mids = [t + timedelta(seconds=dt / 2) for t in times]
    weather.check_coverage(times[0], mids[-1])
    columns = weather.sample(mids)
    site = building.site

    state = model.initial_state()
    flows: FlowSolution | None = None
    coupling = Coupling(config.coupling)

    def run(k: int, state: BuildingState, flows):
        t = times[k]
        record = WeatherSeries.record_at(columns, k, t)
        pos = solar_position(site, mids[k])
        try:
            return couple_step(
                model,
                state,
                record,
                pos,
                dt,
                coupling,
                config.onion_tolerance,
                config.onion_max_iterations,
                flows,
            )
        except (AirflowError, ThermalError, hv.HvacError) as exc:
            raise StepError(t, exc) from exc

    if config.warmup:
        per_day = int(round(86400.0 / dt))
        first_day = min(per_day, len(times))
        for j in range(per_day):
            result, flows, _ = run(j % first_day, state, flows)
            state = result.state

    n = len(times)
    nz = len(model.zone_ids)
    air_t = np.empty((n, nz))
    hum = np.empty((n, nz))
    unmet = np.empty((n, nz))
    surf_ids = list(model.surface_nodes)
    surf_idx = np.array([model.surface_nodes[c] for c in surf_ids], dtype=int).reshape(-1, 2)
    surf_t = np.empty((n, len(surf_ids), 2))
    link_ids = list(model.link_ids)
    link_q = np.zeros((n, len(link_ids), 2))
    unit_ids = [cid for cid, *_ in model.units]
    hvac_cols = {cid: np.zeros((n, 5)) for cid in unit_ids}
    onion_its = np.ones(n, dtype=int)
    warnings: list[str] = []

    for k in range(n):
        result, flows, info = run(k, state, flows)
        state = result.state
        temps = state.temperatures
        air_t[k] = temps[model.air_nodes]
        hum[k] = state.humidity
        unmet[k] = result.unmet
        if surf_ids:
            surf_t[k] = temps[surf_idx]
        if flows is not None:
            link_q[k] = flows.flows
        for cid in unit_ids:
            o = result.hvac[cid]
            hvac_cols[cid][k] = (o.total, o.sensible, o.latent, o.electric, o.on_fraction)
        onion_its[k] = info.iterations
        if result.warnings:
            warnings.extend(f"{times[k].isoformat()} {w}" for w in result.warnings)
        if not info.converged:
            warnings.append(f"{times[k].isoformat()} onion coupling not converged (change {info.max_change:.3f} K)")

    hvac_series = {
        cid: dict(zip(("total", "sensible", "latent", "electric", "on_fraction"), cols.T.copy()))
        for cid, cols in hvac_cols.items()
    }
    summaries = {
        cid: hv.summarize_arrays(s["total"], s["electric"], s["on_fraction"], dt) for cid, s in hvac_series.items()
    }
    return ResultSet(
        times=[t + timedelta(seconds=dt) for t in times],
        dt=dt,
        zone_ids=list(model.zone_ids),
        air_temperature=air_t,
        humidity_ratio=hum,
        unmet_load=unmet,
        surface_ids=surf_ids,
        surface_temperature=surf_t,
        link_ids=link_ids,
        link_flows=link_q,
        hvac=hvac_series,
        summaries=summaries,
        warnings=warnings,
        onion_iterations=onion_its,
    )
