"""Tension recovery from geometry alone via a linear two-point boundary value problem.

On a (nearly) unit-speed network the tension solves, arm by arm,

    sigma'' - |eta''|^2 sigma = 0,

together with force balance at the junction, continuity of the projected
gravity across arms at the junction, and vanishing projected gravity at the
pins. The boundary rows over-determine the ODE, so the discrete system is
solved in the least-squares sense and its residual is reported.

This route never touches the regularizing maps and serves as an independent
check on the tension obtained from a flow.
"""

from dataclasses import dataclass

import numpy as np

from .errors import GeometryTooSlack
from .network import Topology, edge_tangents

__all__ = [
    "TensionSolution",
    "solve_tension_bvp",
    "projected_gravity",
    "node_derivatives",
    "edge_to_nodes",
]


@dataclass(frozen=True)
class TensionSolution:
    """Nodal tension per arm, shape ``(n_arms, m + 1)``.

    ``residual_norm`` is the Euclidean norm of the boundary/junction rows of
    the least-squares system at the solution; ``ode_residual_norm`` that of the
    interior ODE rows (scaled by ``h**2``).
    """

    sigma: np.ndarray
    residual_norm: float
    ode_residual_norm: float


def node_derivatives(nodes, h):
    """First and second arclength derivatives at every node of each arm.

    Central differences inside, second-order one-sided stencils at the ends.
    ``nodes`` has shape ``(n_arms, m + 1, d)`` with ``m >= 3``.
    """
    x = np.asarray(nodes, dtype=float)
    d1 = np.empty_like(x)
    d2 = np.empty_like(x)
    d1[:, 1:-1] = (x[:, 2:] - x[:, :-2]) / (2 * h)
    d1[:, 0] = (-3 * x[:, 0] + 4 * x[:, 1] - x[:, 2]) / (2 * h)
    d1[:, -1] = (3 * x[:, -1] - 4 * x[:, -2] + x[:, -3]) / (2 * h)
    d2[:, 1:-1] = (x[:, 2:] - 2 * x[:, 1:-1] + x[:, :-2]) / h**2
    d2[:, 0] = (2 * x[:, 0] - 5 * x[:, 1] + 4 * x[:, 2] - x[:, 3]) / h**2
    d2[:, -1] = (2 * x[:, -1] - 5 * x[:, -2] + 4 * x[:, -3] - x[:, -4]) / h**2
    return d1, d2


def edge_to_nodes(values):
    """Interpolate per-edge values ``(n_arms, m)`` to nodes ``(n_arms, m + 1)``.

    Averages neighbouring edges inside and extrapolates linearly at the ends.
    """
    v = np.asarray(values, dtype=float)
    out = np.empty(v.shape[:-1] + (v.shape[-1] + 1,))
    out[..., 1:-1] = 0.5 * (v[..., 1:] + v[..., :-1])
    out[..., 0] = 1.5 * v[..., 0] - 0.5 * v[..., 1]
    out[..., -1] = 1.5 * v[..., -1] - 0.5 * v[..., -2]
    return out


def _end_rows(m, h, at_start):
    """Stencil weights (indices, coefficients) of sigma' at one end of an arm."""
    if at_start:
        return np.array([0, 1, 2]), np.array([-3.0, 4.0, -1.0]) / (2 * h)
    return np.array([m, m - 1, m - 2]), np.array([3.0, -4.0, 1.0]) / (2 * h)


def solve_tension_bvp(state, p_geometry_tol=0.05, gravity=None):
    """Recover nodal tensions of ``state`` by least squares.

    Parameters
    ----------
    state : NetworkState
        Must be close to unit speed: ``max ||d| - 1| <= p_geometry_tol``.
    p_geometry_tol : float
    gravity : array_like, shape (d,)
        Defaults to minus the last coordinate axis.

    Raises
    ------
    GeometryTooSlack
        If some edge stretch differs from 1 by more than ``p_geometry_tol``.
    """
    d = state.dim
    if gravity is None:
        gravity = np.zeros(d)
        gravity[-1] = -1.0
    gravity = np.asarray(gravity, dtype=float)
    stretch = np.linalg.norm(edge_tangents(state), axis=-1)
    worst = float(np.max(np.abs(stretch - 1.0)))
    if worst > p_geometry_tol:
        raise GeometryTooSlack(
            f"edge stretch deviates from 1 by {worst:.3g} > {p_geometry_tol:g}"
        )
    m, h, n_arms = state.m, state.h, state.n_arms
    if m < 3:
        raise ValueError("tension BVP needs m >= 3")
    nodes = state.nodes
    t, k = node_derivatives(nodes, h)
    kappa2 = np.sum(k * k, axis=-1)
    n_unk = n_arms * (m + 1)

    def col(i, j):
        return i * (m + 1) + j

    ode_rows = []
    for i in range(n_arms):
        for j in range(1, m):
            row = np.zeros(n_unk)
            # h^2 (sigma'' - kappa^2 sigma)
            row[col(i, j - 1)] += 1.0
            row[col(i, j + 1)] += 1.0
            row[col(i, j)] += -2.0 - h * h * kappa2[i, j]
            ode_rows.append(row)

    bc_rows, bc_rhs = [], []

    def flux_rows(i, at_start):
        """Rows of ``sigma' eta' + sigma eta''`` at one end, shape (d, n_unk)."""
        j = 0 if at_start else m
        idx, coef = _end_rows(m, h, at_start)
        rows = np.zeros((d, n_unk))
        for jj, c in zip(idx, coef):
            rows[:, col(i, jj)] += c * t[i, j]
        rows[:, col(i, j)] += k[i, j]
        return rows

    for i in range(n_arms):
        rows = flux_rows(i, at_start=False)
        bc_rows.extend(rows)
        bc_rhs.extend(-gravity)
    if state.topology is Topology.TRIOD:
        balance = np.zeros((d, n_unk))
        for i in range(n_arms):
            balance[:, col(i, 0)] = t[i, 0]
        bc_rows.extend(balance)
        bc_rhs.extend(np.zeros(d))
        first = flux_rows(0, at_start=True)
        for i in range(1, n_arms):
            bc_rows.extend(first - flux_rows(i, at_start=True))
            bc_rhs.extend(np.zeros(d))
    else:
        bc_rows.extend(flux_rows(0, at_start=True))
        bc_rhs.extend(-gravity)

    a_ode = np.array(ode_rows)
    a_bc = np.array(bc_rows)
    a = np.vstack([a_ode, a_bc])
    b = np.concatenate([np.zeros(len(ode_rows)), np.array(bc_rhs)])
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    return TensionSolution(
        sigma=sol.reshape(n_arms, m + 1),
        residual_norm=float(np.linalg.norm(a_bc @ sol - np.array(bc_rhs))),
        ode_residual_norm=float(np.linalg.norm(a_ode @ sol)),
    )


def projected_gravity(state, ts, gravity=None):
    """Projected gravity ``g + (sigma eta')'`` at every node.

    Returns
    -------
    field : ndarray, shape (n_arms, m + 1, d)
    tangency_defect : float
        ``max |(P g)' . eta'|`` over all nodes; small when the BVP fits well.
    """
    d = state.dim
    if gravity is None:
        gravity = np.zeros(d)
        gravity[-1] = -1.0
    gravity = np.asarray(gravity, dtype=float)
    h = state.h
    t, _ = node_derivatives(state.nodes, h)
    flux = ts.sigma[..., None] * t
    dflux, _ = node_derivatives(flux, h)
    field = gravity + dflux
    dfield, _ = node_derivatives(field, h)
    defect = float(np.max(np.abs(np.sum(dfield * t, axis=-1))))
    return field, defect
