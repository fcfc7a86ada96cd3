"""Discrete approximating energy, its gradient, and the monotone stress pairing.

The energy of a network is

    E(x) = sum_i sum_j h Q(d_ij)  +  sum_i trapz_h(-g . x_i),

where ``d_ij`` are the edge difference quotients. Only free nodes (interior
nodes and, for a triod, the shared junction) are degrees of freedom.
"""

from dataclasses import dataclass

import numpy as np

from .errors import TopologyMismatch
from .network import edge_tangents
from .regularization import g_eps, q_eps

__all__ = [
    "EnergyBreakdown",
    "GradientField",
    "JUNCTION_GRAVITY_WEIGHT",
    "total_energy",
    "energy_gradient",
    "free_gradient",
    "constraint_operator_pairing",
]

# Trapezoid weight (in units of h) of the junction node: three half-edges.
JUNCTION_GRAVITY_WEIGHT = 1.5


@dataclass(frozen=True)
class EnergyBreakdown:
    q_part: float
    gravity_part: float

    @property
    def total(self):
        return self.q_part + self.gravity_part


@dataclass(frozen=True)
class GradientField:
    """Energy gradient on free nodes only.

    ``junction`` is ``None`` for a cord (no free junction); pinned nodes have
    no entry at all.
    """

    junction: np.ndarray
    interior: np.ndarray

    @property
    def n_nodes(self):
        n = self.interior.shape[0] * self.interior.shape[1]
        return n + (0 if self.junction is None else 1)

    def flat(self):
        parts = [self.interior.ravel()]
        if self.junction is not None:
            parts.insert(0, self.junction)
        return np.concatenate(parts)


def _trapezoid_potential(nodes, gravity, h):
    pot = -(nodes @ gravity)
    return h * float(np.sum(pot[:, 1:-1]) + 0.5 * np.sum(pot[:, 0] + pot[:, -1]))


def total_energy(state, p, gravity):
    """Evaluate the discrete energy of ``state``.

    Edge-midpoint quadrature for the stress potential, composite trapezoid
    for the gravitational potential.
    """
    gravity = np.asarray(gravity, dtype=float)
    q = q_eps(p, edge_tangents(state))
    return EnergyBreakdown(
        q_part=state.h * float(np.sum(q)),
        gravity_part=_trapezoid_potential(state.nodes, gravity, state.h),
    )


def _gradient_parts(state, psi, gravity):
    h = state.h
    interior = -(psi[:, 1:] - psi[:, :-1]) - h * gravity
    junction = None
    if state.has_free_junction:
        junction = -np.sum(psi[:, 0], axis=0) - JUNCTION_GRAVITY_WEIGHT * h * gravity
    return junction, interior


def energy_gradient(state, p, gravity, psi=None):
    """Gradient of :func:`total_energy` with respect to the free nodes.

    At an interior node the entry is ``-(psi_j - psi_{j-1}) - h g``; at the
    triod junction it is ``-sum_i psi_i0 - 1.5 h g``. Stationarity at the
    junction is therefore the discrete force balance with an explicit
    ``O(h)`` gravity load.
    """
    gravity = np.asarray(gravity, dtype=float)
    if psi is None:
        psi = g_eps(p, edge_tangents(state))
    junction, interior = _gradient_parts(state, psi, gravity)
    return GradientField(junction=junction, interior=interior)


def free_gradient(state, p, gravity, psi=None):
    """Flat gradient in the layout of :meth:`NetworkState.free_vector`."""
    return energy_gradient(state, p, gravity, psi=psi).flat()


def _check_compatible(a, b):
    if (
        a.topology is not b.topology
        or a.grid != b.grid
        or a.dim != b.dim
        or not np.array_equal(a.pins, b.pins)
        or (a.start_pin is None) != (b.start_pin is None)
        or (a.start_pin is not None and not np.array_equal(a.start_pin, b.start_pin))
    ):
        raise TopologyMismatch("states differ in topology, grid or pins")


def constraint_operator_pairing(state_a, state_b, p):
    """Discrete duality pairing ``<A(a) - A(b), a - b>`` of the stress operator.

    Equals ``sum h (G(d_a) - G(d_b)) . (d_a - d_b)`` over all edges, which is
    bounded below by ``eps * sum h |G(d_a) - G(d_b)|^2``.
    """
    _check_compatible(state_a, state_b)
    da = edge_tangents(state_a)
    db = edge_tangents(state_b)
    dpsi = g_eps(p, da) - g_eps(p, db)
    return state_a.h * float(np.sum(dpsi * (da - db)))
