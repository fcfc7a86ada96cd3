import math

import numpy as np
import pytest

from triodflow import RegularizationParams, Topology, projected_gravity, solve_tension_bvp
from triodflow.errors import GeometryTooSlack
from triodflow.experiments import catenary_oracle, fit_catenary
from triodflow.network import state_from_nodes
from triodflow.tension_bvp import edge_to_nodes, node_derivatives

G = np.array([0.0, -1.0])


def vertical_cord(m=32):
    s = np.linspace(0, 1, m + 1)
    return state_from_nodes(Topology.CORD, np.stack([np.c_[0 * s, -s]]))


def catenary_state(m=128):
    pts = catenary_oracle([0, 0], [0.8, 0], samples=m)
    return state_from_nodes(Topology.CORD, pts[None])


def test_node_derivatives_exact_on_quadratics():
    m, h = 10, 0.1
    s = np.linspace(0, 1, m + 1)
    nodes = np.stack([np.c_[s**2, 3 * s - s**2]])
    d1, d2 = node_derivatives(nodes, h)
    np.testing.assert_allclose(d1[0], np.c_[2 * s, 3 - 2 * s], atol=1e-12)
    np.testing.assert_allclose(d2[0], np.tile([2.0, -2.0], (m + 1, 1)), atol=1e-9)


def test_edge_to_nodes_reproduces_linear_data():
    edges = 0.5 + np.arange(6.0)
    np.testing.assert_allclose(edge_to_nodes(edges[None])[0], np.arange(7.0))


def test_straight_vertical_cord_has_unit_slope():
    ts = solve_tension_bvp(vertical_cord(), gravity=G)
    slope = np.diff(ts.sigma[0]) * 32
    np.testing.assert_allclose(slope, -1.0, atol=1e-9)
    assert ts.residual_norm < 1e-9


def test_linear_in_gravity():
    state = catenary_state(64)
    g1, g2 = np.array([0.0, -1.0]), np.array([0.6, -0.8])
    s1 = solve_tension_bvp(state, gravity=g1).sigma
    s2 = solve_tension_bvp(state, gravity=g2).sigma
    s12 = solve_tension_bvp(state, gravity=g1 + g2).sigma
    np.testing.assert_allclose(s12, s1 + s2, atol=1e-9)


def test_catenary_tension_is_a_cosh():
    m = 128
    state = catenary_state(m)
    fit = fit_catenary([0, 0], [0.8, 0])
    s = np.linspace(0, 1, m + 1)
    u = np.arcsinh(s / fit.a + math.sinh(fit.u1))
    exact = fit.a * np.cosh(u)
    ts = solve_tension_bvp(state, gravity=G)
    assert np.linalg.norm(ts.sigma[0] - exact) / np.linalg.norm(exact) < 1e-3
    field, _ = projected_gravity(state, ts, G)
    assert np.max(np.linalg.norm(field, axis=-1)) < 1e-2


def test_zero_tension_projects_to_gravity():
    state = catenary_state(32)
    zero = type(solve_tension_bvp(state))(np.zeros((1, 33)), 0.0, 0.0)
    field, _ = projected_gravity(state, zero, G)
    np.testing.assert_allclose(field, np.broadcast_to(G, field.shape))


def test_slack_geometry_rejected():
    state = state_from_nodes(Topology.CORD, 0.9 * catenary_state(32).nodes)
    with pytest.raises(GeometryTooSlack):
        solve_tension_bvp(state)
    solve_tension_bvp(state, p_geometry_tol=0.2)


def test_triod_junction_balance():
    # Three straight arms at 120 degrees in zero gravity carry a common tension.
    m = 16
    s = np.linspace(0, 1, m + 1)
    angles = (np.pi / 2, np.pi / 2 + 2 * np.pi / 3, np.pi / 2 + 4 * np.pi / 3)
    nodes = np.stack([np.outer(s, [math.cos(a), math.sin(a)]) for a in angles])
    state = state_from_nodes(Topology.TRIOD, nodes)
    ts = solve_tension_bvp(state, gravity=np.zeros(2))
    assert ts.residual_norm < 1e-10
    assert np.ptp(ts.sigma[:, 0]) < 1e-10
