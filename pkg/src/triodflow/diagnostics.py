"""Stress/tension fields and certificate quantities for computed flows."""

from dataclasses import dataclass, replace

import numpy as np

from .energy import JUNCTION_GRAVITY_WEIGHT
from .errors import WrongTopology
from .network import Topology, edge_tangents
from .regularization import g_eps

__all__ = [
    "EdgeFields",
    "CertificateReport",
    "edge_fields",
    "fields_from_tangents",
    "constraint_report",
    "junction_report",
    "energy_balance_report",
    "energy_balance_signed",
    "dissipation_inequality_report",
    "tail_max_positive",
    "certificate_report",
    "supported_stretch_excess",
]


@dataclass(frozen=True)
class EdgeFields:
    """Per-edge tangent, stress vector, tension and stretch, shape ``(n_arms, m, ...)``."""

    topology: Topology
    tangent: np.ndarray
    psi: np.ndarray
    sigma: np.ndarray
    stretch: np.ndarray


@dataclass(frozen=True)
class CertificateReport:
    max_stretch_minus_one: float = None
    relaxation_bound_residual: float = None
    min_sigma: float = None
    junction_force: np.ndarray = None
    junction_residual_corrected: float = None
    energy_balance_residual: float = None
    dissipation_inequality_slack: float = None

    def merged(self, other):
        """Fill unset fields of ``self`` from ``other``."""
        updates = {
            k: v
            for k, v in vars(other).items()
            if v is not None and getattr(self, k) is None
        }
        return replace(self, **updates)

    def as_dict(self):
        out = {}
        for k, v in vars(self).items():
            if isinstance(v, np.ndarray):
                v = [float(c) for c in v]
            elif v is not None:
                v = float(v)
            out[k] = v
        return out


def fields_from_tangents(topology, tangent, psi):
    sigma = np.sum(psi * tangent, axis=-1)
    stretch = np.sqrt(np.sum(tangent * tangent, axis=-1))
    return EdgeFields(topology=topology, tangent=tangent, psi=psi, sigma=sigma, stretch=stretch)


def edge_fields(state, p):
    """Tangents ``d``, stresses ``psi = G(d)``, tensions ``psi . d``, stretches ``|d|``."""
    tangent = edge_tangents(state)
    return fields_from_tangents(state.topology, tangent, g_eps(p, tangent))


def constraint_report(fields, p):
    """Stretch excess, the relaxed-constraint algebraic bound, and minimum tension.

    ``relaxation_bound_residual`` is the largest value over all edges of
    ``|psi| * ||d|^2 - 1| - (|d| + 1) * (eps |psi|^2 + sqrt(eps))``, which is
    nonpositive for every state.
    """
    stretch = fields.stretch
    psi_norm = np.sqrt(np.sum(fields.psi * fields.psi, axis=-1))
    lhs = psi_norm * np.abs(stretch * stretch - 1.0)
    rhs = (stretch + 1.0) * (p.eps * psi_norm * psi_norm + np.sqrt(p.eps))
    return CertificateReport(
        max_stretch_minus_one=float(np.max(stretch - 1.0)),
        relaxation_bound_residual=float(np.max(lhs - rhs)),
        min_sigma=float(np.min(fields.sigma)),
    )


def supported_stretch_excess(fields, p):
    """``max (|d| - 1)^+`` over edges whose tension exceeds ``sqrt(eps)``; 0 if none."""
    mask = fields.sigma > np.sqrt(p.eps)
    if not mask.any():
        return 0.0
    return float(max(0.0, np.max(fields.stretch[mask] - 1.0)))


def junction_report(fields, grid, gravity):
    """Net junction force ``sum_i psi_i`` on the junction edges and its corrected residual.

    The residual adds back the explicit junction gravity load ``1.5 h g``, so
    it vanishes to solver tolerance after a converged implicit step.

    Raises
    ------
    WrongTopology
        For a cord, which has no junction.
    """
    if fields.topology is not Topology.TRIOD:
        raise WrongTopology("junction diagnostics need a triod")
    gravity = np.asarray(gravity, dtype=float)
    force = np.sum(fields.psi[:, 0], axis=0)
    resid = np.linalg.norm(force + JUNCTION_GRAVITY_WEIGHT * grid.h * gravity)
    return force, float(resid)


def energy_balance_signed(trajectory):
    """``sum_k dt_k |v_k|_h^2 + E(end) - E(0)``; nonpositive up to solver slack."""
    reports = trajectory.reports
    if not reports:
        return 0.0
    dissipation = sum(r.displacement_sq / r.dt for r in reports)
    return dissipation + reports[-1].energy_after.total - reports[0].energy_before.total


def energy_balance_report(trajectory):
    """Absolute residual of the discrete energy identity; first order in dt."""
    return abs(energy_balance_signed(trajectory))


def dissipation_inequality_report(trajectory):
    """Per-step ``sum h |v|^2 - sum h g . v``.

    Nonpositive values mean the limiting dissipation inequality holds at
    that step. Reported, not asserted, for positive eps.
    """
    return np.array(
        [(r.displacement_sq / r.dt - r.gravity_work) / r.dt for r in trajectory.reports]
    )


def tail_max_positive(trajectory, t_start, t_stop=None):
    """Largest positive dissipation slack over steps ending in ``[t_start, t_stop]``."""
    slack = dissipation_inequality_report(trajectory)
    times = np.array([r.time for r in trajectory.reports])
    mask = times >= t_start - 1e-12
    if t_stop is not None:
        mask &= times <= t_stop + 1e-12
    if not mask.any():
        return 0.0
    return float(max(0.0, np.max(slack[mask])))


def certificate_report(trajectory, p, gravity):
    """All certificate quantities evaluated at the final recorded state."""
    state = trajectory.snapshots[-1]
    fields = edge_fields(state, p)
    report = constraint_report(fields, p)
    extra = {}
    if state.topology is Topology.TRIOD:
        force, resid = junction_report(fields, state.grid, gravity)
        extra.update(junction_force=force, junction_residual_corrected=resid)
    slack = dissipation_inequality_report(trajectory)
    extra.update(
        energy_balance_residual=energy_balance_report(trajectory),
        dissipation_inequality_slack=float(np.max(slack)) if slack.size else 0.0,
    )
    return replace(report, **extra)
