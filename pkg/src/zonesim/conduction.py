"""Wall discretization into RC networks, plus analytic references.

A network's node 0 is the outer face (first layer) and its last surface node
is the inner face (last layer). Node capacities are in J/K, branch
conductances in W/K.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .model import WallLayer


@dataclass(frozen=True)
class RCNode:
    id: int
    capacity: float
    role: str  # "outer", "inner" or "internal"


@dataclass(frozen=True)
class RCBranch:
    a: int
    b: int
    conductance: float


@dataclass(frozen=True)
class RCNetwork:
    nodes: tuple[RCNode, ...]
    branches: tuple[RCBranch, ...]

    @property
    def outer(self) -> int:
        return next(n.id for n in self.nodes if n.role == "outer")

    @property
    def inner(self) -> int:
        return next(n.id for n in self.nodes if n.role == "inner")

    @property
    def capacities(self) -> np.ndarray:
        return np.array([n.capacity for n in self.nodes])

    @property
    def total_capacity(self) -> float:
        return float(sum(n.capacity for n in self.nodes))

    def conductance_matrix(self) -> np.ndarray:
        """Dense Laplacian of the branch conductances."""
        n = len(self.nodes)
        k = np.zeros((n, n))
        for br in self.branches:
            k[br.a, br.a] += br.conductance
            k[br.b, br.b] += br.conductance
            k[br.a, br.b] -= br.conductance
            k[br.b, br.a] -= br.conductance
        return k


_PER_LAYER_RE = re.compile(r"^PER_LAYER(?:\((\d+)\))?$")


@dataclass(frozen=True)
class ConductionScheme:
    kind: str  # "R2C", "3R2C" or "PER_LAYER"
    nodes_per_layer: int = 3

    def __post_init__(self):
        if self.kind not in ("R2C", "3R2C", "PER_LAYER"):
            raise ValueError(f"unknown conduction scheme {self.kind!r}")
        if self.nodes_per_layer < 1:
            raise ValueError("nodes_per_layer must be >= 1")

    @classmethod
    def parse(cls, text: str) -> ConductionScheme:
        text = text.strip().upper()
        if text in ("R2C", "3R2C"):
            return cls(text)
        if text == "R3C2":
            return cls("3R2C")
        m = _PER_LAYER_RE.match(text)
        if m:
            return cls("PER_LAYER", int(m.group(1) or 3))
        raise ValueError(f"unknown conduction scheme {text!r}")

    def __str__(self) -> str:
        if self.kind == "PER_LAYER":
            return f"PER_LAYER({self.nodes_per_layer})"
        return self.kind


R2C = ConductionScheme("R2C")
R3C2 = ConductionScheme("3R2C")


def per_layer(n: int = 3) -> ConductionScheme:
    return ConductionScheme("PER_LAYER", n)


def wall_ua(layers: Sequence[WallLayer], area: float) -> float:
    """Steady conductance of the layer stack, surface to surface, W/K."""
    return area / sum(layer.resistance for layer in layers)


def wall_capacity(layers: Sequence[WallLayer], area: float) -> float:
    return area * sum(layer.heat_capacity for layer in layers)


def discretize_wall(layers: Sequence[WallLayer], area: float, scheme: ConductionScheme = R2C) -> RCNetwork:
    if not layers:
        raise ValueError("a wall needs at least one layer")
    ua = wall_ua(layers, area)
    cap = wall_capacity(layers, area)

    if scheme.kind == "R2C":
        nodes = (RCNode(0, cap / 2, "outer"), RCNode(1, cap / 2, "inner"))
        return RCNetwork(nodes, (RCBranch(0, 1, ua),))

    if scheme.kind == "3R2C":
        nodes = (
            RCNode(0, 0.0, "outer"),
            RCNode(1, cap / 2, "internal"),
            RCNode(2, cap / 2, "internal"),
            RCNode(3, 0.0, "inner"),
        )
        branches = (RCBranch(0, 1, 4 * ua), RCBranch(1, 2, 2 * ua), RCBranch(2, 3, 4 * ua))
        return RCNetwork(nodes, branches)

    # PER_LAYER: n T-sections per layer, sections joined at massless nodes
    n = scheme.nodes_per_layer
    caps = [0.0]
    branches: list[RCBranch] = []
    for layer in layers:
        g_half = 2.0 * n * area / layer.resistance
        c_sec = area * layer.heat_capacity / n
        for _ in range(n):
            left = len(caps) - 1
            caps.append(c_sec)
            mid = len(caps) - 1
            caps.append(0.0)
            right = len(caps) - 1
            branches.append(RCBranch(left, mid, g_half))
            branches.append(RCBranch(mid, right, g_half))
    last = len(caps) - 1
    nodes = tuple(
        RCNode(i, c, "outer" if i == 0 else "inner" if i == last else "internal")
        for i, c in enumerate(caps)
    )
    return RCNetwork(nodes, tuple(branches))


def window_network(u_value: float, area: float) -> RCNetwork:
    """Glazing as a single massless conductance between its two faces."""
    return RCNetwork(
        (RCNode(0, 0.0, "outer"), RCNode(1, 0.0, "inner")),
        (RCBranch(0, 1, u_value * area),),
    )


def series_conductance(net: RCNetwork) -> float:
    """Surface-to-surface conductance by series/parallel reduction.

    Interior nodes of degree two are removed (series rule) and duplicate
    branches merged (parallel rule) until only the two surfaces remain.
    Raises ValueError if the graph is not series/parallel reducible.
    """
    keep = {net.outer, net.inner}
    edges: dict[frozenset, float] = {}
    for br in net.branches:
        key = frozenset((br.a, br.b))
        edges[key] = edges.get(key, 0.0) + br.conductance
    while True:
        degree: dict[int, list[frozenset]] = {}
        for key in edges:
            for v in key:
                degree.setdefault(v, []).append(key)
        victim = next((v for v, ks in degree.items() if v not in keep and len(ks) == 2), None)
        if victim is None:
            break
        k1, k2 = degree[victim]
        g1, g2 = edges.pop(k1), edges.pop(k2)
        (u,) = k1 - {victim}
        (w,) = k2 - {victim}
        key = frozenset((u, w))
        edges[key] = edges.get(key, 0.0) + g1 * g2 / (g1 + g2)
        # dangling interior nodes carry no steady flux
        for v, ks in list(degree.items()):
            if v not in keep and len(ks) == 1 and ks[0] in edges:
                edges.pop(ks[0])
    key = frozenset((net.outer, net.inner))
    if set(edges) != {key}:
        raise ValueError("network is not series/parallel reducible")
    return edges[key]


def _dirichlet_solve(net: RCNetwork, matrix: np.ndarray, t_outer: complex, t_inner: complex) -> np.ndarray:
    o, i = net.outer, net.inner
    n = len(net.nodes)
    free = [k for k in range(n) if k not in (o, i)]
    temps = np.zeros(n, dtype=matrix.dtype)
    temps[o], temps[i] = t_outer, t_inner
    if free:
        a = matrix[np.ix_(free, free)]
        rhs = -(matrix[free, o] * t_outer + matrix[free, i] * t_inner)
        temps[free] = np.linalg.solve(a, rhs)
    return temps


def steady_flux(net: RCNetwork, t_outer: float, t_inner: float) -> float:
    """Heat flow (W) from the outer face to the inner face at fixed surface temperatures."""
    k = net.conductance_matrix()
    temps = _dirichlet_solve(net, k, t_outer, t_inner)
    # flux arriving at the inner node from the network
    return float(-(k[net.inner] @ temps))


def network_transmittance(net: RCNetwork, period_s: float) -> complex:
    """Periodic flux arriving at the inner face per unit outer temperature amplitude, W/K.

    Both faces are held (inner at zero), so surface node capacities do not
    contribute.
    """
    omega = 2 * np.pi / period_s
    y = net.conductance_matrix().astype(complex) + 1j * omega * np.diag(net.capacities)
    temps = _dirichlet_solve(net, y, 1.0, 0.0)
    return complex(-(y[net.inner] @ temps))


@dataclass(frozen=True)
class PeriodicResponse:
    matrix: np.ndarray  # 2x2 transfer matrix, outer -> inner
    transmittance: complex  # W/(m2K), flux at inner face per outer amplitude
    admittance_outer: complex
    admittance_inner: complex


def layer_matrix(layer: WallLayer, omega: float) -> np.ndarray:
    if omega == 0.0:
        return np.array([[1.0, layer.resistance], [0.0, 1.0]], dtype=complex)
    k = np.sqrt(1j * omega / layer.diffusivity)
    kl = k * layer.thickness
    lk = layer.conductivity * k
    return np.array([[np.cosh(kl), np.sinh(kl) / lk], [lk * np.sinh(kl), np.cosh(kl)]])


def analytic_periodic_response(layers: Sequence[WallLayer], period_s: float | None) -> PeriodicResponse:
    """Exact unit-area response of a multilayer slab to a sinusoidal excitation.

    ``period_s=None`` gives the steady (zero frequency) limit.
    """
    omega = 0.0 if period_s is None else 2 * np.pi / period_s
    m = np.eye(2, dtype=complex)
    for layer in layers:
        m = m @ layer_matrix(layer, omega)
    a, b = m[0]
    _, d = m[1]
    return PeriodicResponse(m, 1.0 / b, d / b, a / b)
