import numpy as np
import pytest

from triodflow import (
    Grid,
    RegularizationParams,
    Topology,
    build_initial,
    constraint_operator_pairing,
    energy_gradient,
    reference_triod_pins,
    total_energy,
)
from triodflow.energy import free_gradient
from triodflow.errors import TopologyMismatch
from triodflow.network import state_from_nodes
from triodflow.regularization import g_eps, q_eps

G = np.array([0.0, -1.0])


def random_state(rng, m=16, scale=0.02, topology=Topology.TRIOD):
    pins = reference_triod_pins() if topology is Topology.TRIOD else [[0, 0], [0.8, 0]]
    state = build_initial(topology, Grid(m), pins, gravity=G)
    x = state.free_vector()
    return state.with_free(x + scale * rng.normal(size=x.size))


def fd_gradient(state, p, h=1e-6):
    x = state.free_vector()
    out = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        out[k] = (
            total_energy(state.with_free(x + e), p, G).total
            - total_energy(state.with_free(x - e), p, G).total
        ) / (2 * h)
    return out


@pytest.mark.parametrize("topology", [Topology.TRIOD, Topology.CORD])
def test_gradient_matches_finite_differences(topology):
    rng = np.random.default_rng(10)
    p = RegularizationParams(0.1)
    for _ in range(5):
        state = random_state(rng, topology=topology)
        fd = fd_gradient(state, p)
        grad = free_gradient(state, p, G)
        assert np.linalg.norm(fd - grad) <= 1e-6 * np.linalg.norm(grad)


def test_gradient_layout():
    state = random_state(np.random.default_rng(0), m=8)
    gf = energy_gradient(state, RegularizationParams(0.1), G)
    assert gf.junction.shape == (2,)
    assert gf.interior.shape == (3, 7, 2)
    assert gf.n_nodes == 1 + 3 * 7
    assert gf.flat().shape == state.free_vector().shape


def test_straight_hanging_state_energy():
    # Three unit arms, gravity part from the trapezoid rule is exact for linear height.
    m = 8
    s = np.linspace(0, 1, m + 1)
    nodes = np.stack([np.outer(s, [np.cos(a), np.sin(a)]) for a in (0.3, 2.0, 4.0)])
    state = state_from_nodes(Topology.TRIOD, nodes)
    p = RegularizationParams(0.2)
    e = total_energy(state, p, G)
    expected_grav = sum(0.5 * np.sin(a) for a in (0.3, 2.0, 4.0))
    assert e.gravity_part == pytest.approx(expected_grav, abs=1e-14)
    assert e.q_part == pytest.approx(3 * float(q_eps(p, [1.0, 0.0])), rel=1e-14)
    assert e.total == e.q_part + e.gravity_part


def test_translation_changes_only_gravity():
    state = random_state(np.random.default_rng(1), topology=Topology.CORD)
    p = RegularizationParams(0.1)
    shift = np.array([0.3, 0.7])
    moved = state_from_nodes(Topology.CORD, state.nodes + shift)
    a, b = total_energy(state, p, G), total_energy(moved, p, G)
    assert b.q_part == pytest.approx(a.q_part, rel=1e-13)
    # total parameter length 1 carries the shift of the potential
    assert b.gravity_part - a.gravity_part == pytest.approx(shift[1], rel=1e-12)


def test_slack_state_has_small_stress_energy():
    p = RegularizationParams(0.05)
    state = build_initial(Topology.TRIOD, Grid(32), reference_triod_pins(), gravity=G)
    bound = 3 * float(q_eps(p, [1.0, 0.0]))
    assert 0 < total_energy(state, p, G).q_part < bound


def test_pairing_bounds():
    rng = np.random.default_rng(2)
    for eps in (0.5, 0.1, 0.01):
        p = RegularizationParams(eps)
        c0 = eps / (eps + eps**-0.5) ** 2
        for _ in range(100):
            a = random_state(rng, m=12, scale=0.1)
            b = random_state(rng, m=12, scale=0.1)
            pair = constraint_operator_pairing(a, b, p)
            da = np.diff(a.nodes, axis=1) / a.h
            db = np.diff(b.nodes, axis=1) / b.h
            dg = g_eps(p, da) - g_eps(p, db)
            assert pair >= eps * a.h * np.sum(dg * dg) - 1e-12
            assert pair >= c0 * a.h * np.sum((da - db) ** 2) - 1e-12


def test_pairing_rejects_mismatched_states():
    rng = np.random.default_rng(3)
    p = RegularizationParams(0.1)
    a = random_state(rng, m=8)
    with pytest.raises(TopologyMismatch):
        constraint_operator_pairing(a, random_state(rng, m=10), p)
    with pytest.raises(TopologyMismatch):
        constraint_operator_pairing(a, random_state(rng, m=8, topology=Topology.CORD), p)
