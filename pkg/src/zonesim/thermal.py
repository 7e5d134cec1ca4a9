"""Whole-building nodal thermal model: assembly and implicit time stepping.

Unknowns are the zone air nodes, one radiant star node per zone (MRT_STAR
long-wave model), and every RC node of every wall and window. Outdoor air,
sky and ground are fixed-temperature boundaries that enter through the
diagonal and the source vector.

Conventions: temperatures in C (K only inside radiation laws), heat flows in
W, conductances in W/K, capacities in J/K. Side ``a`` of an envelope
component faces its interambiance's ``zone_a``; side ``b`` faces ``zone_b``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
import scipy.linalg
from scipy.linalg.lapack import dgesv
import scipy.sparse
import scipy.sparse.csgraph
import scipy.sparse.linalg

from . import hvac as hv
from .airflow import OUTSIDE_NODE, AirflowNetwork, FlowSolution, Link, air_density
from .catalog import ModelBindingSet, ModelSlot, ModelVariant
from .conduction import ConductionScheme, discretize_wall, window_network
from .model import OUTSIDE, Building, ComponentKind, SurfaceClass
from .weather import (
    KELVIN,
    SIGMA,
    DiffuseModel,
    SkyModel,
    SolarPosition,
    WeatherRecord,
    incidence_cosine,
    outdoor_film_coefficient,
    saturation_humidity_ratio,
    sky_temperature,
    split_diffuse,
)

CP_AIR = 1006.0  # J/(kg K)
RHO_AIR = float(air_density(293.15))
H_FG = 2.45e6  # J/kg
DENSE_LIMIT = 400  # above this many nodes, advance() uses a sparse factorization
H_TOLERANCE = 0.01
H_MAX_ITERATIONS = 20


class ThermalError(RuntimeError):
    pass


class SingularSystemError(ThermalError):
    pass


class ConvergenceError(ThermalError):
    def __init__(self, max_dh: float, iterations: int):
        self.max_dh = max_dh
        super().__init__(f"film coefficient iteration did not converge after {iterations} passes (max dh {max_dh:.4f} W/m2K)")


# -- indoor convection --------------------------------------------------------

_VERTICAL, _FLOOR, _CEILING = 0, 1, 2


def _class_code(cls: SurfaceClass) -> int:
    if cls is SurfaceClass.FLOOR:
        return _FLOOR
    if cls is SurfaceClass.CEILING:
        return _CEILING
    return _VERTICAL


def _correlation(params, delta_t, codes):
    delta_t = np.asarray(delta_t, dtype=float)
    codes = np.asarray(codes)
    av, bv = params["vertical"]
    au, bu = params["unstable"]
    as_, bs = params["stable"]
    mag = np.abs(delta_t)
    # warm floor or cold ceiling: unstable (enhanced); the reverse is stratified
    unstable = ((codes == _FLOOR) & (delta_t > 0)) | ((codes == _CEILING) & (delta_t < 0))
    h = np.where(
        codes == _VERTICAL,
        av * mag**bv,
        np.where(unstable, au * mag**bu, as_ * mag**bs),
    )
    h = np.where(mag > 0, h, 0.0)
    return np.maximum(h, params["h_min"])


def indoor_film_coefficient(variant: ModelVariant | str, delta_t: float, surface_class: SurfaceClass) -> float:
    """Interior convective coefficient for ``delta_t = T_surface - T_air``."""
    mv = variant if isinstance(variant, ModelVariant) else _variant(ModelSlot.INDOOR_CONVECTION, variant)
    if mv.variant == "CONSTANT":
        return float(mv["h"])
    return float(_correlation(mv.params, delta_t, _class_code(SurfaceClass(surface_class))))


def _variant(slot: ModelSlot, name: str) -> ModelVariant:
    from .catalog import variant

    return variant(slot, name)


# -- zone surfaces ------------------------------------------------------------


@dataclass(frozen=True)
class ZoneSurface:
    component: str
    side: str
    area: float
    absorptance: float
    reflectance: float
    emissivity: float
    surface_class: SurfaceClass
    node: int = -1

    @property
    def is_window(self) -> bool:
        return self.surface_class is SurfaceClass.WINDOW


# -- indoor long-wave ---------------------------------------------------------


def radiative_coefficient(emissivity, t_ref: float = 293.15):
    return 4.0 * np.asarray(emissivity, dtype=float) * SIGMA * t_ref**3


@dataclass(frozen=True)
class LongwaveCoupling:
    kind: str
    star: np.ndarray | None = None  # W/K per surface to the star node
    pairwise: np.ndarray | None = None  # symmetric W/K between surfaces


def area_view_factors(areas: np.ndarray) -> np.ndarray:
    total = areas.sum()
    f = areas[None, :] / (total - areas[:, None])
    np.fill_diagonal(f, 0.0)
    return f


def longwave_indoor(surfaces: Sequence[ZoneSurface], variant: str = "MRT_STAR", t_ref: float = 293.15) -> LongwaveCoupling:
    """Linearized indoor long-wave exchange conductances for one zone."""
    areas = np.array([s.area for s in surfaces], dtype=float)
    eps = np.array([s.emissivity for s in surfaces], dtype=float)
    if variant == "MRT_STAR":
        return LongwaveCoupling("MRT_STAR", star=radiative_coefficient(eps, t_ref) * areas)
    if variant != "DETAILED":
        raise ValueError(f"unknown long-wave variant {variant!r}")
    if len(surfaces) < 2:
        raise ValueError("DETAILED long-wave exchange needs at least two surfaces")
    n = len(surfaces)
    if not eps.any():
        return LongwaveCoupling("DETAILED", pairwise=np.zeros((n, n)))
    h0 = 4.0 * SIGMA * t_ref**3
    f = area_view_factors(areas)
    # radiosity: (I - diag(1-eps) F) J = eps E ;  q = A (I - F) J
    m = np.eye(n) - (1.0 - eps)[:, None] * f
    k = h0 * (areas[:, None] * (np.eye(n) - f)) @ np.linalg.solve(m, np.diag(eps))
    g = -(k + k.T) / 2.0
    np.fill_diagonal(g, 0.0)
    return LongwaveCoupling("DETAILED", pairwise=np.maximum(g, 0.0))


# -- indoor short-wave --------------------------------------------------------

_GROUPS = {
    SurfaceClass.FLOOR: 0,
    SurfaceClass.VERTICAL_WALL: 1,
    SurfaceClass.CEILING: 1,
    SurfaceClass.WINDOW: 2,
    SurfaceClass.INTERIOR_SEPARATION: 3,
}


def _first_incidence(areas, classes, direct, diffuse):
    floors = np.array([c is SurfaceClass.FLOOR for c in classes])
    g0 = diffuse * areas / areas.sum()
    if direct > 0:
        if not floors.any():
            raise ValueError("direct solar enters a zone with no FLOOR surface")
        g0 = g0 + direct * np.where(floors, areas, 0.0) / areas[floors].sum()
    return g0


def shortwave_distribution(surfaces: Sequence[ZoneSurface], direct: float, diffuse: float, variant: str = "SIMPLE") -> np.ndarray:
    """Short-wave power absorbed by each surface, W.

    Reflected power is redistributed over the zone surfaces in proportion
    to their areas. Enclosures are lossless: whatever a surface does not
    reflect, it absorbs. SIMPLE and FULL agree exactly under this
    redistribution. GROUPED4 differs from FULL on surface i by exactly
    ``(rho_i - rho_group) * incident_i``, so it is exact on uniform groups.
    """
    areas = np.array([s.area for s in surfaces], dtype=float)
    rho = np.array([s.reflectance for s in surfaces], dtype=float)
    classes = [s.surface_class for s in surfaces]
    if direct == 0 and diffuse == 0:
        return np.zeros(len(surfaces))
    g0 = _first_incidence(areas, classes, direct, diffuse)
    weights = areas / areas.sum()
    rho_mean = float(weights @ rho)
    if rho_mean >= 1.0:
        raise ValueError("zone surfaces reflect everything; no absorption possible")

    if variant == "SIMPLE":
        reflected = float(rho @ g0)
        g = g0 + weights * reflected / (1.0 - rho_mean)
        return (1.0 - rho) * g
    if variant == "FULL":
        n = len(surfaces)
        d = np.outer(weights, np.ones(n))
        g = np.linalg.solve(np.eye(n) - d * rho[None, :], g0)
        return (1.0 - rho) * g
    if variant == "GROUPED4":
        gid = np.array([_GROUPS[c] for c in classes])
        a_g = np.bincount(gid, weights=areas, minlength=4)
        present = a_g > 0
        rho_g = np.zeros(4)
        rho_g[present] = np.bincount(gid, weights=areas * rho, minlength=4)[present] / a_g[present]
        g0_g = np.bincount(gid, weights=g0, minlength=4)
        w_g = a_g[present] / a_g.sum()
        k = int(present.sum())
        d = np.outer(w_g, np.ones(k))
        g_g = np.zeros(4)
        g_g[present] = np.linalg.solve(np.eye(k) - d * rho_g[present][None, :], g0_g[present])
        absorbed_g = (1.0 - rho_g) * g_g
        share = np.divide(areas, a_g[gid])
        return absorbed_g[gid] * share
    raise ValueError(f"unknown short-wave variant {variant!r}")


# -- assembled system ---------------------------------------------------------


@dataclass
class AssembledSystem:
    labels: list[str]
    conductance: np.ndarray  # K, W/K
    capacity: np.ndarray  # C, J/K
    source: np.ndarray  # S, W
    dt: float
    internal: np.ndarray | None = None  # part of S from gains, HVAC and solar, W

    def matrix(self) -> np.ndarray:
        return np.diag(self.capacity / self.dt) + self.conductance

    def rhs(self, t_old: np.ndarray) -> np.ndarray:
        return self.capacity / self.dt * t_old + self.source


def advance(system: AssembledSystem, t_old: np.ndarray) -> np.ndarray:
    """Backward Euler: ``(C/dt + K) T_new = C/dt T_old + S``."""
    a = system.matrix()
    b = system.rhs(np.asarray(t_old, dtype=float))
    if a.shape[0] > DENSE_LIMIT:
        lu = scipy.sparse.linalg.splu(scipy.sparse.csc_matrix(a))
        t_new = lu.solve(b)
    else:
        _, _, t_new, info = dgesv(a, b, overwrite_a=True)
        if info > 0:
            t_new = None
    if t_new is None or not np.isfinite(t_new).all():
        raise SingularSystemError(_singular_message(system))
    return t_new


def _singular_message(system: AssembledSystem) -> str:
    a = system.matrix()
    adj = scipy.sparse.csr_matrix((np.abs(a) > 0).astype(int))
    ncomp, lab = scipy.sparse.csgraph.connected_components(adj, directed=False)
    for c in range(ncomp):
        members = np.flatnonzero(lab == c)
        anchored = system.capacity[members].sum() > 0 or np.any(a[members][:, members].sum(axis=1) > 1e-12)
        if not anchored:
            return f"singular system: node {system.labels[members[0]]} is disconnected"
    return "singular system matrix"


# -- building state -----------------------------------------------------------


@dataclass(frozen=True)
class ZoneState:
    air_temperature: float
    humidity_ratio: float
    surface_temperatures: dict[str, float]


@dataclass(frozen=True)
class BuildingState:
    temperatures: np.ndarray  # every node, C
    humidity: np.ndarray  # per zone, kg/kg
    cycling: dict[str, hv.CyclingState] = field(default_factory=dict)


@dataclass(frozen=True)
class Ventilation:
    """Mass flows entering zones: ``mass[k]`` kg/s from ``upstream[k]`` into ``downstream[k]``.

    ``upstream == -1`` is outdoor air.
    """

    upstream: np.ndarray
    downstream: np.ndarray
    mass: np.ndarray

    @classmethod
    def none(cls) -> Ventilation:
        e = np.zeros(0, dtype=int)
        return cls(e, e.copy(), np.zeros(0))


@dataclass(frozen=True)
class StepBoundary:
    """Outdoor conditions mapped onto the model's exterior surfaces for one step."""

    t_out: float  # C
    w_out: float
    t_sky: float  # K
    h_out: np.ndarray  # per exterior face
    absorbed: np.ndarray  # W per exterior face
    zone_direct: np.ndarray  # W entering each zone through glazing
    zone_diffuse: np.ndarray
    t_ground: float  # C
    wind_speed: float = 0.0
    wind_direction: float = 0.0


@dataclass(frozen=True)
class StepResult:
    state: BuildingState
    hvac: dict[str, hv.HvacOutput]
    unmet: np.ndarray  # per zone, W
    h_iterations: int
    warnings: tuple[str, ...] = ()


# -- the model ----------------------------------------------------------------


class ThermalModel:
    """Nodal model of one building under one binding set.

    Everything that does not change between steps is computed here once.
    """

    def __init__(self, building: Building, bindings: ModelBindingSet | None = None):
        self.building = building
        self.bindings = bindings or building.bindings or _default_bindings()
        b, bs = building, self.bindings
        self.zone_ids = [z.id for z in b.zones]
        self.zone_index = {z: i for i, z in enumerate(self.zone_ids)}
        nz = len(self.zone_ids)
        ia_map = {ia.id: ia for ia in b.interambiances}
        comp_map = {c.id: c for c in b.components}

        labels: list[str] = []
        caps: list[float] = []
        rows: list[int] = []
        cols: list[int] = []
        vals: list[float] = []

        def add_node(label: str, cap: float) -> int:
            labels.append(label)
            caps.append(cap)
            return len(labels) - 1

        def couple(i: int, j: int, g: float) -> None:
            rows.extend((i, j, i, j))
            cols.extend((i, j, j, i))
            vals.extend((g, g, -g, -g))

        self.air_nodes = np.array(
            [add_node(f"{z.id}.air", RHO_AIR * CP_AIR * z.volume * z.air_capacitance_multiplier) for z in b.zones],
            dtype=int,
        )
        self.volumes = np.array([z.volume for z in b.zones])
        self.sensible_gains = np.array([z.sensible_gain for z in b.zones])
        self.latent_gains = np.array([z.latent_gain for z in b.zones])

        hosted: dict[str, float] = {}
        for c in b.components:
            if c.kind is ComponentKind.WINDOW and c.host_id:
                hosted[c.host_id] = hosted.get(c.host_id, 0.0) + c.area

        zone_surfaces: list[list[ZoneSurface]] = [[] for _ in range(nz)]
        ext = {"node": [], "area": [], "tilt": [], "azimuth": [], "alpha": [], "eps": [], "tau": [], "zone": []}
        ground = {"node": [], "g": [], "comp": []}
        self.surface_nodes: dict[str, tuple[int, int]] = {}

        for c in b.components:
            if not c.is_envelope:
                continue
            ia = ia_map[c.interambiance_id]
            if c.kind is ComponentKind.WALL:
                scheme = _scheme(bs.lookup(c.id, ModelSlot.HEAT_CONDUCTION))
                area = c.area - hosted.get(c.id, 0.0)
                net = discretize_wall(c.layers, area, scheme)
            else:
                area = c.area
                net = window_network(c.glazing.u_value, area)
            base = len(labels)
            for node in net.nodes:
                add_node(f"{c.id}.{node.id}", node.capacity)
            for br in net.branches:
                couple(base + br.a, base + br.b, br.conductance)
            node_a, node_b = base + net.outer, base + net.inner
            self.surface_nodes[c.id] = (node_a, node_b)

            for side, zone, node, other in (("a", ia.zone_a, node_a, ia.zone_b), ("b", ia.zone_b, node_b, ia.zone_a)):
                props = c.face(side)
                if zone != OUTSIDE:
                    zone_surfaces[self.zone_index[zone]].append(
                        ZoneSurface(c.id, side, area, props.sw_absorptance, props.sw_reflectance, props.lw_emissivity, c.face_class(side), node)
                    )
                elif c.ground_contact:
                    gv = bs.lookup(c.id, ModelSlot.GROUND_COUPLING)
                    ground["node"].append(node)
                    ground["g"].append(area / gv["resistance"])
                    ground["comp"].append(c.id)
                else:
                    ext["node"].append(node)
                    ext["area"].append(area)
                    ext["tilt"].append(ia.orientation.tilt)
                    ext["azimuth"].append(ia.orientation.azimuth)
                    ext["alpha"].append(props.sw_absorptance)
                    ext["eps"].append(props.lw_emissivity)
                    tau = c.glazing.transmittance if c.kind is ComponentKind.WINDOW else 0.0
                    ext["tau"].append(tau)
                    ext["zone"].append(self.zone_index[other] if other != OUTSIDE else -1)

        self.zone_surfaces = zone_surfaces
        self.ext = {k: np.array(v, dtype=int if k in ("node", "zone") else float) for k, v in ext.items()}
        self.ground_nodes = np.array(ground["node"], dtype=int)
        self.ground_g = np.array(ground["g"], dtype=float)
        self.ground_variants = [bs.lookup(cid, ModelSlot.GROUND_COUPLING) for cid in ground["comp"]]

        # indoor convection and long-wave, short-wave gain matrices
        conv_surf, conv_air, conv_area, conv_code, conv_dyn = [], [], [], [], []
        self.correlation_params: list[dict | None] = []
        sw_node, sw_zone, sw_dir, sw_dif = [], [], [], []
        self.star_nodes = np.full(nz, -1, dtype=int)
        for zi, zid in enumerate(self.zone_ids):
            surfs = zone_surfaces[zi]
            conv = bs.lookup(zid, ModelSlot.INDOOR_CONVECTION)
            dynamic = conv.variant != "CONSTANT"
            self.correlation_params.append(dict(conv.params) if dynamic else None)
            for s in surfs:
                if dynamic:
                    conv_surf.append(s.node)
                    conv_air.append(self.air_nodes[zi])
                    conv_area.append(s.area)
                    conv_code.append(_class_code(s.surface_class))
                    conv_dyn.append(zi)
                else:
                    couple(s.node, self.air_nodes[zi], conv["h"] * s.area)
            if not surfs:
                continue
            lw = bs.lookup(zid, ModelSlot.INDOOR_LW)
            if lw.variant == "DETAILED" and len(surfs) >= 2:
                g = longwave_indoor(surfs, "DETAILED", lw["t_ref"]).pairwise
                for i in range(len(surfs)):
                    for j in range(i + 1, len(surfs)):
                        if g[i, j] > 0:
                            couple(surfs[i].node, surfs[j].node, g[i, j])
            else:
                star = longwave_indoor(surfs, "MRT_STAR", lw["t_ref"]).star
                if star.sum() > 0:
                    sn = add_node(f"{zid}.mrt", 0.0)
                    self.star_nodes[zi] = sn
                    for s, g in zip(surfs, star):
                        if g > 0:
                            couple(s.node, sn, g)
            sw = bs.lookup(zid, ModelSlot.INDOOR_SW).variant
            has_floor = any(s.surface_class is SurfaceClass.FLOOR for s in surfs)
            per_dir = shortwave_distribution(surfs, 1.0, 0.0, sw) if has_floor else np.zeros(len(surfs))
            per_dif = shortwave_distribution(surfs, 0.0, 1.0, sw)
            for s, a1, a2 in zip(surfs, per_dir, per_dif):
                sw_node.append(s.node)
                sw_zone.append(zi)
                sw_dir.append(a1)
                sw_dif.append(a2)
        self._zone_has_floor = np.array([any(s.surface_class is SurfaceClass.FLOOR for s in zs) for zs in zone_surfaces])

        self.labels = labels
        self.capacity = np.array(caps, dtype=float)
        n = len(labels)
        self.n = n
        k = np.zeros((n, n))
        np.add.at(k, (np.array(rows, dtype=int), np.array(cols, dtype=int)), np.array(vals, dtype=float))
        self.k_static = k
        self.conv = {
            "surf": np.array(conv_surf, dtype=int),
            "air": np.array(conv_air, dtype=int),
            "area": np.array(conv_area, dtype=float),
            "code": np.array(conv_code, dtype=int),
            "zone": np.array(conv_dyn, dtype=int),
        }
        self.sw = {
            "node": np.array(sw_node, dtype=int),
            "zone": np.array(sw_zone, dtype=int),
            "direct": np.array(sw_dir, dtype=float),
            "diffuse": np.array(sw_dif, dtype=float),
        }

        # building-level variants
        self.sky = bs.lookup(None, ModelSlot.SKY_TEMPERATURE)
        self.outdoor_conv = bs.lookup(None, ModelSlot.OUTDOOR_CONVECTION)
        self.diffuse = bs.lookup(None, ModelSlot.DIFFUSE_RECONSTITUTION)
        self.airflow_variant = bs.lookup(None, ModelSlot.AIRFLOW_TRANSFER)
        ext_tilt = self.ext["tilt"]
        self.ext_sky_view = (1.0 + np.cos(np.radians(ext_tilt))) / 2.0 if ext_tilt.size else np.zeros(0)
        self._glazed = np.flatnonzero((self.ext["tau"] > 0) & (self.ext["zone"] >= 0))

        # air links
        links, self.link_ids = [], []
        for c in b.components:
            if c.is_airlink:
                ia = ia_map[c.interambiance_id]
                exposure = c.exposure
                if exposure is not None:
                    exposure = type(exposure)(exposure.cp, exposure.cp_leeward, ia.orientation.azimuth)
                links.append(
                    Link(c.id, c.link, self._node_of(ia.zone_a), self._node_of(ia.zone_b), exposure)
                )
                self.link_ids.append(c.id)
        self.airflow_network = AirflowNetwork(tuple(self.zone_ids), tuple(links))
        self.infiltration = np.array([z.infiltration_ach for z in b.zones])

        # split units
        self.units: list[tuple[str, int, hv.SplitUnit, str]] = []
        for c in b.components:
            if c.kind is ComponentKind.HVAC_SPLIT:
                v = bs.lookup(c.id, ModelSlot.HVAC_SYSTEM).variant
                if v != "NONE":
                    self.units.append((c.id, self.zone_index[c.zone_id], c.unit, v))
        del comp_map

    # -- helpers --------------------------------------------------------------

    def _node_of(self, zone: str) -> int:
        return OUTSIDE_NODE if zone == OUTSIDE else self.zone_index[zone]

    @property
    def uses_pressure_airflow(self) -> bool:
        return self.airflow_variant.variant == "PRESSURE"

    @property
    def nonlinear(self) -> bool:
        return self.conv["surf"].size > 0

    def initial_state(self) -> BuildingState:
        t = np.empty(self.n)
        zone_t = np.array([z.initial_temperature for z in self.building.zones])
        t[:] = zone_t.mean() if zone_t.size else 20.0
        t[self.air_nodes] = zone_t
        for zi, surfs in enumerate(self.zone_surfaces):
            for s in surfs:
                t[s.node] = zone_t[zi]
            if self.star_nodes[zi] >= 0:
                t[self.star_nodes[zi]] = zone_t[zi]
        w = np.array([z.initial_humidity_ratio for z in self.building.zones])
        cycling = {cid: hv.CyclingState() for cid, *_ in self.units}
        return BuildingState(t, w, cycling)

    def zone_state(self, state: BuildingState, zone_id: str) -> ZoneState:
        zi = self.zone_index[zone_id]
        surf = {f"{s.component}.{s.side}": float(state.temperatures[s.node]) for s in self.zone_surfaces[zi]}
        return ZoneState(float(state.temperatures[self.air_nodes[zi]]), float(state.humidity[zi]), surf)

    # -- boundary conditions --------------------------------------------------

    def boundary(self, record: WeatherRecord, pos: SolarPosition, state: BuildingState | None = None) -> StepBoundary:
        site = self.building.site
        t_sky = sky_temperature(record, SkyModel(self.sky.variant), bool(self.sky.params.get("cloud_correction", False)))
        ext = self.ext
        params = self.outdoor_conv.params
        h_out = outdoor_film_coefficient(
            self.outdoor_conv.variant, record.wind_speed, ext["azimuth"], record.wind_direction, params.get("h", 11.7)
        )
        nz = len(self.zone_ids)
        zone_direct = np.zeros(nz)
        zone_diffuse = np.zeros(nz)
        absorbed = np.zeros(ext["node"].size)
        if record.global_horizontal > 0 or record.diffuse_horizontal:
            dni, dhi = split_diffuse(record, pos, DiffuseModel(self.diffuse.variant))
            if ext["node"].size:
                cos_i = incidence_cosine(pos, ext["tilt"], ext["azimuth"]) if pos.altitude > 0 else np.zeros(ext["node"].size)
                direct = dni * np.maximum(cos_i, 0.0)
                ghi = dni * max(pos.sin_altitude, 0.0) + dhi
                diffuse = dhi * self.ext_sky_view + site.albedo * ghi * (1.0 - self.ext_sky_view)
                absorbed = ext["alpha"] * (direct + diffuse) * ext["area"]
                g = self._glazed
                if g.size:
                    ta = ext["tau"][g] * ext["area"][g]
                    zone_direct = np.bincount(ext["zone"][g], ta * direct[g], minlength=nz)
                    zone_diffuse = np.bincount(ext["zone"][g], ta * diffuse[g], minlength=nz)
        # beam into a zone without a floor lands on its surfaces as diffuse
        no_floor = ~self._zone_has_floor
        if (no_floor & (zone_direct > 0)).any():
            zone_diffuse = zone_diffuse + np.where(no_floor, zone_direct, 0.0)
            zone_direct = np.where(no_floor, 0.0, zone_direct)
        t_ground = self._ground_temperature(record)
        return StepBoundary(
            record.dry_bulb,
            record.humidity_ratio,
            t_sky,
            np.asarray(h_out, dtype=float),
            absorbed,
            zone_direct,
            zone_diffuse,
            t_ground,
            record.wind_speed,
            record.wind_direction,
        )

    def _ground_temperature(self, record: WeatherRecord) -> float:
        if not self.ground_variants:
            return 0.0
        gv = self.ground_variants[0]
        if gv.variant == "MONTHLY":
            return float(gv["temperatures"][record.timestamp.month - 1])
        return float(gv["temperature"])

    # -- ventilation ----------------------------------------------------------

    def ventilation(self, flows: FlowSolution | None, t_out: float) -> Ventilation:
        """Entering mass flows, from prescribed air change rates or a pressure solution."""
        if flows is None:
            m = RHO_AIR * self.volumes * self.infiltration / 3600.0
            keep = m > 0
            idx = np.flatnonzero(keep)
            return Ventilation(np.full(idx.size, -1, dtype=int), idx, m[keep])
        net = self.airflow_network._arrays
        frm, to = net["from"], net["to"]
        up = np.concatenate([frm, to])
        down = np.concatenate([to, frm])
        m = np.concatenate([flows.flows[:, 0], flows.flows[:, 1]])
        keep = (down != OUTSIDE_NODE) & (m > 0)
        return Ventilation(up[keep], down[keep], m[keep])

    # -- assembly -------------------------------------------------------------

    def film_coefficients(self, temperatures: np.ndarray) -> np.ndarray:
        """Correlation-based indoor coefficients at the given node temperatures."""
        c = self.conv
        if c["surf"].size == 0:
            return np.zeros(0)
        dt = temperatures[c["surf"]] - temperatures[c["air"]]
        h = np.empty(c["surf"].size)
        for zi in np.unique(c["zone"]):
            sel = c["zone"] == zi
            h[sel] = _correlation(self.correlation_params[zi], dt[sel], c["code"][sel])
        return h

    def assemble(
        self,
        state: BuildingState,
        boundary: StepBoundary,
        vent: Ventilation,
        dt: float,
        hvac_sensible: np.ndarray | None = None,
        h_in: np.ndarray | None = None,
    ) -> AssembledSystem:
        """Linear system for one step at fixed film coefficients."""
        k = self.k_static.copy()
        s = np.zeros(self.n)
        t_prev = state.temperatures
        diag = np.zeros(self.n)

        # exterior faces: film to outdoor air, long-wave to sky and to ground at air temperature
        ext = self.ext
        if ext["node"].size:
            nodes = ext["node"]
            ts = t_prev[nodes] + KELVIN
            ta = boundary.t_out + KELVIN
            tsky = boundary.t_sky
            g_sky = ext["eps"] * SIGMA * (ts**2 + tsky**2) * (ts + tsky) * ext["area"] * self.ext_sky_view
            g_gnd = ext["eps"] * SIGMA * (ts**2 + ta**2) * (ts + ta) * ext["area"] * (1.0 - self.ext_sky_view)
            g_air = boundary.h_out * ext["area"] + g_gnd
            # one exterior face per node
            diag[nodes] += g_air + g_sky
            s[nodes] += g_air * boundary.t_out + g_sky * (tsky - KELVIN) + boundary.absorbed

        if self.ground_nodes.size:
            diag[self.ground_nodes] += self.ground_g
            s[self.ground_nodes] += self.ground_g * boundary.t_ground

        # correlation-based indoor convection
        c = self.conv
        if c["surf"].size:
            h = self.film_coefficients(t_prev) if h_in is None else h_in
            g = h * c["area"]
            # each surface node appears once
            diag[c["surf"]] += g
            diag += np.bincount(c["air"], g, minlength=self.n)
            k[c["surf"], c["air"]] -= g
            k[c["air"], c["surf"]] -= g

        # upwind advection into air nodes
        if vent.mass.size:
            mc = vent.mass * CP_AIR
            down = self.air_nodes[vent.downstream]
            diag += np.bincount(down, mc, minlength=self.n)
            inside = vent.upstream >= 0
            if np.any(inside):
                np.add.at(k, (down[inside], self.air_nodes[vent.upstream[inside]]), -mc[inside])
            np.add.at(s, down[~inside], mc[~inside] * boundary.t_out)

        # short-wave absorbed on interior faces
        internal = np.zeros(self.n)
        if self.sw["node"].size:
            zi = self.sw["zone"]
            internal[self.sw["node"]] = self.sw["direct"] * boundary.zone_direct[zi] + self.sw["diffuse"] * boundary.zone_diffuse[zi]
        internal[self.air_nodes] += self.sensible_gains
        if hvac_sensible is not None:
            internal[self.air_nodes] -= hvac_sensible
        s += internal
        k.flat[:: self.n + 1] += diag
        return AssembledSystem(self.labels, k, self.capacity, s, dt, internal)

    # -- stepping -------------------------------------------------------------

    def step(self, state: BuildingState, boundary: StepBoundary, vent: Ventilation, dt: float) -> StepResult:
        """Advance one step, handling HVAC and the film coefficient iteration."""
        nz = len(self.zone_ids)
        # cycling units decide from the start-of-step air state
        outputs: dict[str, hv.HvacOutput] = {}
        cycling = dict(state.cycling)
        fixed = np.zeros(nz)
        ideal = []
        for cid, zi, unit, variant in self.units:
            t_air = float(state.temperatures[self.air_nodes[zi]])
            if variant == "MODEL0":
                ideal.append((cid, zi, unit))
                continue
            if variant == "MODEL1":
                out, cycling[cid] = hv.model1_step(state.cycling[cid], t_air, unit, dt)
            else:
                out, cycling[cid] = hv.model2_step(
                    state.cycling[cid], t_air, float(state.humidity[zi]), boundary.t_out, unit, dt
                )
            outputs[cid] = out
            fixed[zi] += out.sensible

        h = self.film_coefficients(state.temperatures) if self.nonlinear else None
        iterations = 0
        while True:
            iterations += 1
            system = self.assemble(state, boundary, vent, dt, fixed, h)
            unmet = np.zeros(nz)
            if ideal:
                t_new, ideal_out = self._ideal_control(system, state.temperatures, ideal)
                for (cid, zi, _), out in zip(ideal, ideal_out):
                    outputs[cid] = out
                    unmet[zi] += out.unmet
            else:
                t_new = advance(system, state.temperatures)
            if not self.nonlinear:
                break
            h_new = self.film_coefficients(t_new)
            dh = float(np.max(np.abs(h_new - h)))
            h = h_new
            if dh < H_TOLERANCE:
                break
            if iterations >= H_MAX_ITERATIONS:
                raise ConvergenceError(dh, iterations)

        latent_hvac = np.zeros(nz)
        for cid, zi, *_ in self.units:
            latent_hvac[zi] += outputs[cid].latent
        t_air = t_new[self.air_nodes]
        w_new, warnings = moisture_balance(
            self.volumes, state.humidity, vent, boundary.w_out, self.latent_gains, latent_hvac, dt, t_air, self.zone_ids
        )
        new_state = BuildingState(t_new, w_new, cycling)
        return StepResult(new_state, outputs, unmet, iterations, tuple(warnings))

    def _ideal_control(self, system: AssembledSystem, t_old: np.ndarray, units):
        """Free-floating solve plus the extraction that holds each set point."""
        a = system.matrix()
        b = system.rhs(t_old)
        try:
            lu = scipy.linalg.lu_factor(a, check_finite=True)
        except (ValueError, np.linalg.LinAlgError) as exc:
            raise SingularSystemError(_singular_message(system)) from exc
        rhs = np.zeros((self.n, len(units) + 1))
        rhs[:, 0] = b
        air = [self.air_nodes[zi] for _, zi, _ in units]
        for j, node in enumerate(air):
            rhs[node, j + 1] = -1.0  # 1 W extracted
        sol = scipy.linalg.lu_solve(lu, rhs)
        if not np.all(np.isfinite(sol)):
            raise SingularSystemError(_singular_message(system))
        t_free = sol[:, 0]
        resp = sol[:, 1:]  # dT per W extracted
        sens = resp[air, :]
        excess = np.array([t_free[node] - unit.setpoint for node, (_, _, unit) in zip(air, units)])
        # t_free + sens @ d = setpoint
        demand = np.linalg.solve(sens, -excess) if len(units) else np.zeros(0)
        outs = [hv.model0_ideal(max(float(d), 0.0), unit, system.dt) for d, (_, _, unit) in zip(demand, units)]
        delivered = np.array([o.sensible for o in outs])
        return t_free + resp @ delivered, outs

    def zone_air_balance(self, system: AssembledSystem, temperatures: np.ndarray) -> list[np.ndarray]:
        """Individual heat flows (W) into each zone air node, storage excluded.

        One entry per coupled node, then the boundary exchange (outdoor air
        advection) and the internal sources. At steady state each zone's terms
        sum to zero.
        """
        k = system.conductance
        out = []
        for zi, node in enumerate(self.air_nodes):
            row = k[node]
            nbrs = np.flatnonzero(row)
            nbrs = nbrs[nbrs != node]
            pair = -row[nbrs] * (temperatures[nbrs] - temperatures[node])
            internal = system.internal[node]
            boundary = system.source[node] - internal - row.sum() * temperatures[node]
            out.append(np.concatenate([pair, [boundary, internal]]))
        return out


def _scheme(mv: ModelVariant) -> ConductionScheme:
    if mv.variant == "PER_LAYER":
        return ConductionScheme("PER_LAYER", int(mv["nodes_per_layer"]))
    return ConductionScheme(mv.variant)


def _default_bindings() -> ModelBindingSet:
    from .catalog import defaults

    return defaults()


# -- moisture -----------------------------------------------------------------


def moisture_balance(
    volumes,
    w_old,
    vent: Ventilation,
    w_out: float,
    latent_sources,
    latent_extraction,
    dt: float,
    t_air=None,
    zone_ids: Sequence[str] | None = None,
) -> tuple[np.ndarray, list[str]]:
    """Implicit zone humidity balance, all zones solved together.

    ``rho V dw/dt = sum(m_in (w_up - w)) + (latent sources - extraction) / h_fg``.
    Results are clamped to ``[0, saturation]``; each clamp yields a warning.
    """
    volumes = np.asarray(volumes, dtype=float)
    w_old = np.asarray(w_old, dtype=float)
    nz = volumes.size
    store = RHO_AIR * volumes / dt
    a = np.diag(store)
    rows = np.arange(nz)
    rhs = store * w_old + (np.asarray(latent_sources, dtype=float) - np.asarray(latent_extraction, dtype=float)) / H_FG
    if vent.mass.size:
        a[rows, rows] += np.bincount(vent.downstream, vent.mass, minlength=nz)
        inside = vent.upstream >= 0
        np.add.at(a, (vent.downstream[inside], vent.upstream[inside]), -vent.mass[inside])
        np.add.at(rhs, vent.downstream[~inside], vent.mass[~inside] * w_out)
    w = dgesv(a, rhs, overwrite_a=True)[2] if nz else np.zeros(0)
    warnings = []
    names = list(zone_ids) if zone_ids is not None else [str(i) for i in range(nz)]
    if np.any(w < 0):
        for i in np.flatnonzero(w < 0):
            warnings.append(f"zone {names[i]}: humidity ratio {w[i]:.5f} clamped to 0")
        w = np.maximum(w, 0.0)
    if t_air is not None:
        w_sat = saturation_humidity_ratio(np.asarray(t_air, dtype=float))
        over = w > w_sat
        for i in np.flatnonzero(over):
            warnings.append(f"zone {names[i]}: humidity ratio {w[i]:.5f} clamped to saturation {w_sat[i]:.5f}")
        w = np.minimum(w, w_sat)
    return w, warnings
