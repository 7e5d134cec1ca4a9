"""Multizone pressure network: power-law cracks and two-way large openings.

Each zone has one unknown reference pressure at floor level (z = 0). The
pressure inside zone i at height z is ``P_i - rho_i g z``; outside it is
``-rho_out g z`` plus the wind pressure on the exposed face of a link.
Mass flows are in kg/s and positive from a link's ``from`` node to its
``to`` node.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np
from scipy.linalg.lapack import dgesv

GRAVITY = 9.81
DP_LIN = 1e-4  # Pa, power-law linearization threshold
_SQRT_DP_LIN = math.sqrt(DP_LIN)
RELAXATION = 0.75
TOLERANCE = 1e-6  # kg/s
MAX_ITERATIONS = 100

OUTSIDE_NODE = -1


class AirflowError(RuntimeError):
    pass


class NonConvergenceError(AirflowError):
    def __init__(self, iterations: int, worst_residual: float):
        self.iterations = iterations
        self.worst_residual = worst_residual
        super().__init__(
            f"pressure solve did not converge in {iterations} iterations "
            f"(worst residual {worst_residual:.3e} kg/s)"
        )


class SingularJacobianError(AirflowError):
    pass


@dataclass(frozen=True)
class Crack:
    coefficient: float  # kg/(s Pa^n)
    exponent: float = 0.65
    elevation: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if not self.coefficient > 0:
            out.append("crack coefficient must be > 0")
        if not 0.5 <= self.exponent <= 1.0:
            out.append(f"crack exponent {self.exponent} outside [0.5, 1]")
        return out


@dataclass(frozen=True)
class LargeOpening:
    width: float
    height: float
    cd: float = 0.78
    bottom_elevation: float = 0.0

    def problems(self) -> list[str]:
        out = []
        if not self.width > 0 or not self.height > 0:
            out.append("opening width and height must be > 0")
        if not 0.0 < self.cd <= 1.0:
            out.append(f"discharge coefficient {self.cd} outside (0, 1]")
        return out


@dataclass(frozen=True)
class WindExposure:
    """Wind pressure coefficient on the outside face of a link.

    When ``cp_leeward`` is given, ``cp`` applies only while the facade is
    windward (``azimuth`` within 90 degrees of the wind direction).
    """

    cp: float
    cp_leeward: float | None = None
    azimuth: float = 0.0

    def coefficient(self, wind_direction: float) -> float:
        if self.cp_leeward is None:
            return self.cp
        diff = abs((self.azimuth - wind_direction + 180.0) % 360.0 - 180.0)
        return self.cp if diff <= 90.0 else self.cp_leeward


@dataclass(frozen=True)
class Link:
    id: str
    element: Crack | LargeOpening
    from_node: int  # zone index, or OUTSIDE_NODE
    to_node: int
    exposure: WindExposure | None = None


@dataclass(frozen=True)
class FlowSolution:
    pressures: np.ndarray  # Pa, per zone
    flows: np.ndarray  # (n_links, 2): [from->to, to->from], both >= 0
    residuals: np.ndarray  # kg/s net inflow per zone
    iterations: int = 0

    @property
    def net_flows(self) -> np.ndarray:
        return self.flows[:, 0] - self.flows[:, 1]


# -- element laws -------------------------------------------------------------


def air_density(temperature_k):
    """Dry air density at 101325 Pa, kg/m3."""
    return 353.25 / temperature_k


def wind_pressure(cp: float, rho_out: float, speed: float) -> float:
    if speed < 0:
        raise ValueError("wind speed must be >= 0")
    return 0.5 * cp * rho_out * speed * speed


def _crack_terms(coefficient, exponent, dp):
    # below DP_LIN the power law is replaced by its secant through DP_LIN
    adp = np.abs(dp)
    g = coefficient * np.power(np.maximum(adp, DP_LIN), exponent - 1.0)
    return g * dp, np.where(adp < DP_LIN, g, g * exponent)


def crack_flow(coefficient, exponent, dp):
    """Signed power-law mass flow, linear below DP_LIN. Vectorizes over arrays."""
    out = _crack_terms(coefficient, exponent, np.asarray(dp, dtype=float))[0]
    return out if out.ndim else float(out)


def crack_flow_derivative(coefficient, exponent, dp):
    out = _crack_terms(coefficient, exponent, np.asarray(dp, dtype=float))[1]
    return out if out.ndim else float(out)


def _opening_scalar(width, height, cd, rho_a, rho_b, dp_bottom):
    """Flows a->b and b->a, d(net)/d(dp_bottom) and the neutral height (nan if none).

    Uses the exact integral of sqrt|p| over sub-intervals where the linear
    pressure difference keeps its sign, written in a cancellation-free form.
    """
    k_a = cd * width * math.sqrt(2.0 * rho_a)
    k_b = cd * width * math.sqrt(2.0 * rho_b)
    return _opening_law(k_a, k_b, (rho_b - rho_a) * GRAVITY, height, dp_bottom)


def _opening_law(k_a, k_b, slope, height, dp_bottom):
    # k = Cd W sqrt(2 rho) per side; slope is d(dp)/dz
    p_top = dp_bottom + slope * height
    if abs(dp_bottom) < DP_LIN and abs(p_top) < DP_LIN:
        # near-zero difference everywhere: linear law keeps the slope finite
        p_mid = 0.5 * (dp_bottom + p_top)
        k_up = k_a if p_mid >= 0 else k_b
        lin = k_up * height * p_mid / _SQRT_DP_LIN
        z_n = -dp_bottom / slope if dp_bottom * p_top < 0.0 else math.nan
        return max(lin, 0.0), max(-lin, 0.0), k_up * height / _SQRT_DP_LIN, z_n
    if dp_bottom * p_top < 0.0:
        z_n = -dp_bottom / slope
        pieces = ((dp_bottom, 0.0, z_n), (0.0, p_top, height - z_n))
    else:
        z_n = math.nan
        pieces = ((dp_bottom, p_top, height),)
    m_ab = m_ba = deriv = 0.0
    for p1, p2, length in pieces:
        a = math.sqrt(abs(p1))
        b = math.sqrt(abs(p2))
        s = a + b
        if length <= 0.0 or s <= 0.0:
            continue
        integral = (2.0 / 3.0) * length * (a * a + a * b + b * b) / s
        if p1 + p2 > 0.0:
            m_ab += k_a * integral
            deriv += k_a * length / s
        else:
            m_ba += k_b * integral
            deriv += k_b * length / s
    return m_ab, m_ba, deriv, z_n


def _opening_terms(width, height, cd, rho_a, rho_b, dp_bottom):
    """Vectorized wrapper over the scalar opening law; returns (m_ab, m_ba, deriv, z_neutral)."""
    args = np.broadcast_arrays(*(np.asarray(x, dtype=float) for x in (width, height, cd, rho_a, rho_b, dp_bottom)))
    shape = args[0].shape
    rows = [_opening_scalar(*v) for v in zip(*(a.ravel().tolist() for a in args))]
    out = np.array(rows, dtype=float).reshape(-1, 4)
    return tuple(out[:, j].reshape(shape) for j in range(4))


def large_opening_flow(width, height, cd, rho_a, rho_b, dp_bottom):
    """Two-way flow through a large vertical opening.

    ``dp_bottom`` is P_a - P_b at the bottom of the opening. Returns
    ``(m_ab, m_ba, z_neutral)``; ``z_neutral`` is measured from the bottom and
    is None when the pressure difference keeps one sign over the opening.
    """
    m_ab, m_ba, _, z_n = _opening_terms(width, height, cd, rho_a, rho_b, dp_bottom)
    z = float(z_n)
    return float(m_ab), float(m_ba), (None if math.isnan(z) else z)


def large_opening_derivative(width, height, cd, rho_a, rho_b, dp_bottom) -> float:
    """d(m_ab - m_ba)/d(dp_bottom)."""
    return float(_opening_terms(width, height, cd, rho_a, rho_b, dp_bottom)[2])


# -- network ------------------------------------------------------------------


@dataclass(frozen=True)
class AirflowNetwork:
    zones: tuple[str, ...]
    links: tuple[Link, ...] = field(default_factory=tuple)

    @cached_property
    def _arrays(self) -> dict:
        cracks = [k for k, l in enumerate(self.links) if isinstance(l.element, Crack)]
        opens = [k for k, l in enumerate(self.links) if isinstance(l.element, LargeOpening)]
        frm = np.array([l.from_node for l in self.links], dtype=int)
        to = np.array([l.to_node for l in self.links], dtype=int)
        elev = np.array(
            [l.element.elevation if isinstance(l.element, Crack) else l.element.bottom_elevation for l in self.links],
            dtype=float,
        )
        n, nl = len(self.zones), len(self.links)
        # incidence: +1 where a link flows into a zone, -1 where it leaves
        inc = np.zeros((n + 1, nl))
        inc[to, np.arange(nl)] += 1.0
        inc[frm, np.arange(nl)] -= 1.0
        order = np.array(cracks + opens, dtype=int)
        return {
            "order": order,
            "incidence_sorted": np.ascontiguousarray(inc[:n][:, order]),
            "incidence_sorted_t": np.ascontiguousarray(inc[:n][:, order].T),
            "cracks": np.array(cracks, dtype=int),
            "opens": np.array(opens, dtype=int),
            "from": frm,
            "to": to,
            "elev": elev,
            "incidence": inc[:n],
            "C": np.array([self.links[k].element.coefficient for k in cracks], dtype=float),
            "n": np.array([self.links[k].element.exponent for k in cracks], dtype=float),
            "W": [self.links[k].element.width for k in opens],
            "H": [self.links[k].element.height for k in opens],
            "Cd": [self.links[k].element.cd for k in opens],
            "exposed": [k for k, l in enumerate(self.links) if l.exposure is not None],
        }

    @cached_property
    def _disconnected(self) -> tuple[str, ...]:
        reached = set()
        frontier = [OUTSIDE_NODE]
        while frontier:
            v = frontier.pop()
            for l in self.links:
                for u, w in ((l.from_node, l.to_node), (l.to_node, l.from_node)):
                    if u == v and w not in reached and w != OUTSIDE_NODE:
                        reached.add(w)
                        frontier.append(w)
        return tuple(z for i, z in enumerate(self.zones) if i not in reached)

    def check_connected(self) -> None:
        """Every zone must reach OUTSIDE through links."""
        if self._disconnected:
            raise SingularJacobianError(f"zones not connected to OUTSIDE: {', '.join(self._disconnected)}")

    def wind_pressures(self, rho_out: float, wind_speed: float, wind_direction: float) -> np.ndarray:
        """Wind pressure on each link's exposed face, Pa."""
        pw = np.zeros(len(self.links))
        if wind_speed > 0:
            for k in self._arrays["exposed"]:
                exp = self.links[k].exposure
                pw[k] = wind_pressure(exp.coefficient(wind_direction), rho_out, wind_speed)
        return pw

    def _forcing(self, zone_rho, rho_out, pw):
        """Pressure-independent part of each link's dp, and link-end densities."""
        ar = self._arrays
        rho_ext = np.append(np.asarray(zone_rho, dtype=float), rho_out)
        frm, to, z = ar["from"], ar["to"], ar["elev"]
        rho_f, rho_t = rho_ext[frm], rho_ext[to]
        # wind acts on whichever side is outside
        pw = np.asarray(pw, dtype=float)
        offset = (rho_t - rho_f) * GRAVITY * z + np.where(frm == OUTSIDE_NODE, pw, 0.0) - np.where(to == OUTSIDE_NODE, pw, 0.0)
        o = ar["opens"]
        # per opening: (k_a, k_b, slope, height), fixed for the whole solve
        ra, rb = rho_f[o], rho_t[o]
        cw = np.asarray(ar["Cd"], dtype=float) * np.asarray(ar["W"], dtype=float)
        consts = list(zip(
            (cw * np.sqrt(2.0 * ra)).tolist(),
            (cw * np.sqrt(2.0 * rb)).tolist(),
            ((rb - ra) * GRAVITY).tolist(),
            ar["H"],
        ))
        return offset, consts, offset[ar["order"]]

    def _evaluate(self, pressures, forcing):
        ar = self._arrays
        offset, consts, _ = forcing
        # P_from - P_to, with outside at 0
        dp = offset - ar["incidence"].T @ np.asarray(pressures, dtype=float)
        nl = len(self.links)
        flows = np.zeros((nl, 2))
        deriv = np.zeros(nl)
        c = ar["cracks"]
        if c.size:
            m, deriv[c] = _crack_terms(ar["C"], ar["n"], dp[c])
            flows[c, 0] = np.maximum(m, 0.0)
            flows[c, 1] = np.maximum(-m, 0.0)
        o = ar["opens"]
        if o.size:
            for k, (ka, kb, sl, h), d in zip(o.tolist(), consts, dp[o].tolist()):
                flows[k, 0], flows[k, 1], deriv[k], _ = _opening_law(ka, kb, sl, h, d)
        return flows, deriv, dp

    def _net_deriv(self, pressures, forcing):
        # links ordered cracks first, then openings
        ar = self._arrays
        _, consts, offset = forcing
        dp = offset - ar["incidence_sorted_t"] @ pressures
        nc = ar["cracks"].size
        net = np.empty(dp.size)
        deriv = np.empty(dp.size)
        if nc:
            net[:nc], deriv[:nc] = _crack_terms(ar["C"], ar["n"], dp[:nc])
        for k, (ka, kb, sl, h), d in zip(range(nc, dp.size), consts, dp[nc:].tolist()):
            m_ab, m_ba, deriv[k], _ = _opening_law(ka, kb, sl, h, d)
            net[k] = m_ab - m_ba
        return net, deriv

    def link_flows(self, pressures, zone_rho, rho_out, pw):
        """Flows (n,2), d(net)/d(dp) per link, and the driving dp per link."""
        return self._evaluate(pressures, self._forcing(zone_rho, rho_out, pw))

    def residuals(self, pressures, zone_rho, rho_out, pw) -> np.ndarray:
        flows, _, _ = self.link_flows(pressures, zone_rho, rho_out, pw)
        return self._net_inflow(flows[:, 0] - flows[:, 1])

    def jacobian(self, pressures, zone_rho, rho_out, pw) -> np.ndarray:
        _, deriv, _ = self.link_flows(pressures, zone_rho, rho_out, pw)
        return self._jacobian(deriv)

    def _net_inflow(self, net: np.ndarray) -> np.ndarray:
        return self._arrays["incidence"] @ net

    def _jacobian(self, deriv: np.ndarray) -> np.ndarray:
        # residual_i = sum(net into i); net depends on P_from - P_to, so J = -A diag(d) A^T
        a = self._arrays["incidence"]
        return -(a * deriv) @ a.T


def solve_pressures(
    network: AirflowNetwork,
    zone_temps_k,
    outside_temp_k: float,
    wind_speed: float = 0.0,
    wind_direction: float = 0.0,
    *,
    initial=None,
    relaxation: float = RELAXATION,
    tolerance: float = TOLERANCE,
    max_iterations: int = MAX_ITERATIONS,
) -> FlowSolution:
    """Newton-Raphson on zone reference pressures with an analytic Jacobian."""
    n = len(network.zones)
    zone_rho = air_density(np.asarray(zone_temps_k, dtype=float))
    rho_out = air_density(outside_temp_k)
    pw = network.wind_pressures(rho_out, wind_speed, wind_direction)
    forcing = network._forcing(zone_rho, rho_out, pw)
    p = np.zeros(n) if initial is None else np.array(initial, dtype=float)
    if n == 0:
        flows, _, _ = network._evaluate(p, forcing)
        return FlowSolution(p, flows, np.zeros(0), 0)
    network.check_connected()

    a = network._arrays["incidence_sorted"]
    for it in range(max_iterations + 1):
        net, deriv = network._net_deriv(p, forcing)
        r = a @ net
        worst = float(np.abs(r).max())
        if worst < tolerance:
            flows, _, _ = network._evaluate(p, forcing)
            return FlowSolution(p, flows, network._net_inflow(flows[:, 0] - flows[:, 1]), it)
        if it == max_iterations:
            break
        # J = -A diag(d) A^T
        _, _, step, info = dgesv(-(a * deriv) @ a.T, -r)
        if info > 0:
            raise SingularJacobianError(f"singular Jacobian (pivot {info})")
        if not np.isfinite(step).all():
            raise SingularJacobianError("non-finite Newton step")
        p = p + relaxation * step
    raise NonConvergenceError(max_iterations, worst)
