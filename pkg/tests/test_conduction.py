import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from zonesim import fixtures as fx
from zonesim.conduction import (
    R2C,
    R3C2,
    ConductionScheme,
    analytic_periodic_response,
    discretize_wall,
    network_transmittance,
    per_layer,
    series_conductance,
    steady_flux,
    wall_capacity,
    wall_ua,
    window_network,
)
from zonesim.model import WallLayer

DAY = 86400.0
SCHEMES = [R2C, R3C2] + [per_layer(n) for n in (1, 2, 3, 4)]
THREE_LAYER = (WallLayer(0.02, 0.8, 1800.0, 900.0), WallLayer(0.10, 0.04, 30.0, 1400.0), WallLayer(0.015, 0.35, 1200.0, 1000.0))

layer_st = st.builds(
    WallLayer,
    st.floats(0.005, 0.4),
    st.floats(0.02, 3.0),
    st.floats(10.0, 3000.0),
    st.floats(500.0, 2000.0),
)
wall_st = st.lists(layer_st, min_size=1, max_size=5).map(tuple)


def chain_transmittance(net, omega: float) -> complex:
    """Two-port product along a chain network: branches in series, capacities shunting to ground."""
    order = [net.outer]
    adj = {}
    for br in net.branches:
        adj.setdefault(br.a, []).append((br.b, br.conductance))
        adj.setdefault(br.b, []).append((br.a, br.conductance))
    m = np.eye(2, dtype=complex)
    prev, node = None, net.outer
    while node != net.inner:
        (nxt, g), = [(v, g) for v, g in adj[node] if v != prev]
        m = m @ np.array([[1.0, 1.0 / g], [0.0, 1.0]])
        if nxt != net.inner:
            m = m @ np.array([[1.0, 0.0], [1j * omega * net.nodes[nxt].capacity, 1.0]])
        prev, node = node, nxt
        order.append(node)
    return 1.0 / m[0, 1]


def test_ua_single_layer():
    assert wall_ua((WallLayer(0.2, 1.0, 1.0, 1.0),), 10.0) == pytest.approx(50.0)


def test_ua_two_equal_layers_halves():
    layer = WallLayer(0.1, 0.5, 1.0, 1.0)
    assert wall_ua((layer, layer), 3.0) == pytest.approx(wall_ua((layer,), 3.0) / 2)


def test_ua_three_layer_fixture():
    assert wall_ua(THREE_LAYER, 1.0) == pytest.approx(1 / (0.025 + 2.5 + 0.015 / 0.35), abs=1e-12)
    assert wall_ua(THREE_LAYER, 1.0) == pytest.approx(0.3894, abs=1e-3)


def test_r2c_split():
    net = discretize_wall(THREE_LAYER, 4.0, R2C)
    half = 4.0 * sum(l.density * l.specific_heat * l.thickness for l in THREE_LAYER) / 2
    assert [n.capacity for n in net.nodes] == pytest.approx([half, half])
    assert len(net.branches) == 1 and net.branches[0].conductance == pytest.approx(wall_ua(THREE_LAYER, 4.0))


def test_3r2c_split():
    net = discretize_wall(THREE_LAYER, 2.0, R3C2)
    ua = wall_ua(THREE_LAYER, 2.0)
    assert [b.conductance for b in net.branches] == pytest.approx([4 * ua, 2 * ua, 4 * ua])
    caps = [n.capacity for n in net.nodes if n.role == "internal"]
    assert caps == pytest.approx([wall_capacity(THREE_LAYER, 2.0) / 2] * 2)


def test_per_layer_one_section():
    layer = (WallLayer(0.2, 1.0, 2000.0, 900.0),)
    net = discretize_wall(layer, 5.0, per_layer(1))
    assert sum(1 for n in net.nodes if n.capacity > 0) == 1
    assert [b.conductance for b in net.branches] == pytest.approx([2 * wall_ua(layer, 5.0)] * 2)


def test_scheme_parse():
    assert ConductionScheme.parse("r3c2") == R3C2
    assert ConductionScheme.parse("PER_LAYER(4)") == per_layer(4)
    assert ConductionScheme.parse("PER_LAYER") == per_layer(3)
    assert str(per_layer(2)) == "PER_LAYER(2)"
    with pytest.raises(ValueError):
        ConductionScheme.parse("R4C")
    with pytest.raises(ValueError):
        per_layer(0)


@given(wall_st, st.floats(0.5, 50.0), st.sampled_from(SCHEMES))
def test_series_conductance_equals_ua(layers, area, scheme):
    net = discretize_wall(layers, area, scheme)
    assert series_conductance(net) == pytest.approx(wall_ua(layers, area), rel=1e-9)


@given(wall_st, st.floats(0.5, 50.0), st.sampled_from(SCHEMES), st.floats(-30, 60), st.floats(-30, 60))
def test_steady_flux(layers, area, scheme, t_o, t_i):
    net = discretize_wall(layers, area, scheme)
    expected = area / sum(l.thickness / l.conductivity for l in layers) * (t_o - t_i)
    assert steady_flux(net, t_o, t_i) == pytest.approx(expected, rel=1e-9, abs=1e-9 * abs(expected) + 1e-12)


@given(wall_st, st.floats(0.5, 50.0), st.sampled_from(SCHEMES))
def test_capacity_conserved(layers, area, scheme):
    net = discretize_wall(layers, area, scheme)
    expected = area * sum(l.density * l.specific_heat * l.thickness for l in layers)
    assert net.total_capacity == pytest.approx(expected, rel=1e-12)
    assert net.capacities.min() >= 0
    assert sum(n.role == "outer" for n in net.nodes) == 1 and sum(n.role == "inner" for n in net.nodes) == 1


def test_window_is_massless_resistance():
    net = window_network(2.8, 1.5)
    assert net.total_capacity == 0
    assert series_conductance(net) == pytest.approx(4.2)


def test_zero_frequency_limit():
    r = analytic_periodic_response(fx.HEAVY_WALL, None)
    assert r.transmittance.real == pytest.approx(wall_ua(fx.HEAVY_WALL, 1.0), rel=1e-12)
    assert r.transmittance.imag == 0
    very_long = analytic_periodic_response(fx.HEAVY_WALL, 1e12)
    assert abs(very_long.transmittance) == pytest.approx(wall_ua(fx.HEAVY_WALL, 1.0), rel=1e-6)


def test_thick_concrete_attenuates():
    slab = (WallLayer(0.4, 1.75, 2300.0, 920.0),)
    assert abs(analytic_periodic_response(slab, DAY).transmittance) < wall_ua(slab, 1.0)


def test_single_layer_quadrupole_closed_form():
    layer = WallLayer(0.2, 1.4, 2100.0, 880.0)
    omega = 2 * np.pi / DAY
    k = np.sqrt(1j * omega / layer.diffusivity)
    expected = layer.conductivity * k / np.sinh(k * layer.thickness)
    assert analytic_periodic_response((layer,), DAY).transmittance == pytest.approx(expected, rel=1e-12)


@pytest.mark.parametrize("scheme", SCHEMES)
def test_network_transmittance_matches_two_port_chain(scheme):
    net = discretize_wall(fx.HEAVY_WALL, 1.0, scheme)
    omega = 2 * np.pi / DAY
    assert network_transmittance(net, DAY) == pytest.approx(chain_transmittance(net, omega), rel=1e-9)


def test_per_layer_three_within_five_percent():
    exact = abs(analytic_periodic_response(THREE_LAYER, DAY).transmittance)
    approx = abs(network_transmittance(discretize_wall(THREE_LAYER, 1.0, per_layer(3)), DAY))
    assert abs(approx - exact) / exact < 0.05


def test_fidelity_ordering_heavy_wall():
    exact = abs(analytic_periodic_response(fx.HEAVY_WALL, DAY).transmittance)
    err = {str(s): abs(abs(network_transmittance(discretize_wall(fx.HEAVY_WALL, 1.0, s), DAY)) - exact) for s in (R2C, R3C2, per_layer(3))}
    assert err["PER_LAYER(3)"] <= err["3R2C"] <= err["R2C"]


def test_per_layer_converges_with_refinement():
    exact = analytic_periodic_response(fx.HEAVY_WALL, DAY).transmittance
    errs = [abs(network_transmittance(discretize_wall(fx.HEAVY_WALL, 1.0, per_layer(n)), DAY) - exact) for n in (1, 2, 4, 8)]
    assert errs == sorted(errs, reverse=True)
