"""Minimizing-movement (implicit Euler) time stepping of the regularized flow.

Each step minimizes

    Phi(x) = sum_k w_k |x_k - x_k^old|^2 / (2 dt) + E(x)

over the free nodes, with lumped weights ``w = h`` on interior nodes and
``w = 0`` on the triod junction. The minimizer is found by Newton's method
with a backtracking line search. The Hessian is block tridiagonal on each
arm and the arms couple only through the junction, so every Newton system is
solved with banded Cholesky factorizations plus a small Schur complement.
"""

from dataclasses import dataclass, field, replace
import logging
import math

import numpy as np
from scipy.linalg import solveh_banded

from .diagnostics import constraint_report, fields_from_tangents
from .energy import JUNCTION_GRAVITY_WEIGHT, EnergyBreakdown
from .errors import RunAborted, StepNotConverged
from .regularization import g_and_q, grad_g_eps

__all__ = [
    "StepParams",
    "StepReport",
    "Trajectory",
    "implicit_step",
    "run_flow",
    "steady_detect",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class StepParams:
    """Controls for one implicit step.

    ``newton_tol`` bounds the Euclidean norm of the gradient of the step
    functional over the free nodes.
    """

    dt: float = 1e-3
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    shrink: float = 0.5
    armijo: float = 1e-4

    def __post_init__(self):
        if not self.dt > 0:
            raise ValueError("dt must be positive")
        if not self.newton_tol > 0:
            raise ValueError("newton_tol must be positive")
        if not 0 < self.shrink < 1:
            raise ValueError("shrink must lie in (0, 1)")


@dataclass
class StepReport:
    dt: float
    time: float
    newton_iters: int
    converged: bool
    energy_before: EnergyBreakdown
    energy_after: EnergyBreakdown
    step_functional_decrease: float
    displacement_sq: float
    gravity_work: float
    gradient_norm: float
    min_sigma: float = float("nan")
    max_stretch: float = float("nan")
    relaxation_residual: float = float("nan")
    junction_residual: float = float("nan")

    @property
    def velocity_norm(self):
        """Discrete L2 norm of ``(x_new - x_old) / dt``."""
        return math.sqrt(self.displacement_sq) / self.dt


@dataclass
class Trajectory:
    """Recorded snapshots and the report of every accepted step."""

    snapshots: list = field(default_factory=list)
    reports: list = field(default_factory=list)
    events: list = field(default_factory=list)
    eps: float = None

    @property
    def times(self):
        return [s.time for s in self.snapshots]

    @property
    def final(self):
        return self.snapshots[-1]


class _Layout:
    """Maps flat free vectors to full node arrays for one network."""

    def __init__(self, state):
        self.state = state
        self.n_arms = state.n_arms
        self.m = state.m
        self.d = state.dim
        self.h = state.h
        self.free_junction = state.has_free_junction
        self.offset = self.d if self.free_junction else 0
        self.nodes = state.nodes.copy()
        self.mass = state.free_mass()
        n_arm = (self.m - 1) * self.d
        self.n_arm = n_arm
        self._band_index = _band_indices(self.m - 1, self.d)

    def fill(self, x):
        nodes = self.nodes
        if self.free_junction:
            nodes[:, 0] = x[: self.d]
        nodes[:, 1:-1] = x[self.offset :].reshape(self.n_arms, self.m - 1, self.d)
        return nodes

    def tangents(self, x):
        return np.diff(self.fill(x), axis=1) / self.h


def _band_indices(nb, d):
    """Index arrays scattering diagonal/upper blocks into LAPACK upper band storage."""
    u = 2 * d - 1
    diag_rows, diag_cols, diag_src = [], [], []
    up_rows, up_cols, up_src = [], [], []
    kb = np.arange(nb)
    for r in range(d):
        for c in range(d):
            if r <= c:
                diag_rows.append(np.full(nb, u + r - c))
                diag_cols.append(kb * d + c)
                diag_src.append((r, c))
            up_rows.append(np.full(nb - 1, u + r - c - d))
            up_cols.append((kb[:-1] + 1) * d + c)
            up_src.append((r, c))
    return u, (diag_rows, diag_cols, diag_src), (up_rows, up_cols, up_src)


def _banded(diag, upper, index):
    u, (dr, dc, ds), (ur, uc, us) = index
    nb, d = diag.shape[0], diag.shape[1]
    ab = np.zeros((u + 1, nb * d))
    for rows, cols, (r, c) in zip(dr, dc, ds):
        ab[rows, cols] = diag[:, r, c]
    for rows, cols, (r, c) in zip(ur, uc, us):
        ab[rows, cols] = upper[:, r, c]
    return ab


def _energy(layout, tangent, q, gravity):
    nodes = layout.nodes
    pot = -(nodes @ gravity)
    grav = layout.h * (np.sum(pot[:, 1:-1]) + 0.5 * np.sum(pot[:, 0] + pot[:, -1]))
    return EnergyBreakdown(q_part=layout.h * float(np.sum(q)), gravity_part=float(grav))


def _energy_gradient(layout, psi, gravity):
    h = layout.h
    interior = -(psi[:, 1:] - psi[:, :-1]) - h * gravity
    parts = [interior.ravel()]
    if layout.free_junction:
        parts.insert(0, -np.sum(psi[:, 0], axis=0) - JUNCTION_GRAVITY_WEIGHT * h * gravity)
    return np.concatenate(parts)


def _newton_direction(layout, stiff, mass_over_dt, rhs):
    """Solve ``H p = rhs`` for the step-functional Hessian ``H``.

    ``stiff`` holds the per-edge matrices ``grad G(d)`` of shape
    ``(n_arms, m, d, d)``.
    """
    h, d, m = layout.h, layout.d, layout.m
    eye = np.eye(d)
    k = stiff / h
    n_arm = layout.n_arm
    off = layout.offset
    sols = []
    couplings = []
    for i in range(layout.n_arms):
        diag = k[i, :-1] + k[i, 1:] + mass_over_dt * eye
        upper = -k[i, 1:-1]
        ab = _banded(diag, upper, layout._band_index)
        r_i = rhs[off + i * n_arm : off + (i + 1) * n_arm]
        if layout.free_junction:
            coupling = np.zeros((n_arm, d))
            coupling[:d] = -k[i, 0]
            sol = solveh_banded(ab, np.column_stack([r_i, coupling]), check_finite=False)
            couplings.append((coupling, sol[:, 1:]))
            sols.append(sol[:, 0])
        else:
            sols.append(solveh_banded(ab, r_i, check_finite=False))
    if not layout.free_junction:
        return np.concatenate(sols)
    schur = np.sum(k[:, 0], axis=0) + layout.mass[0] / layout.dt * eye
    r_j = rhs[:d].copy()
    for (coupling, x_c), y in zip(couplings, sols):
        schur -= coupling.T @ x_c
        r_j -= coupling.T @ y
    dj = np.linalg.solve(schur, r_j)
    parts = [dj] + [y - x_c @ dj for (_, x_c), y in zip(couplings, sols)]
    return np.concatenate(parts)


def implicit_step(state, p, gravity, sp):
    """Advance ``state`` by one minimizing-movement step of size ``sp.dt``.

    Returns
    -------
    new_state : NetworkState
    report : StepReport

    Raises
    ------
    StepNotConverged
        If Newton's method exceeds ``sp.max_newton_iters``; the exception
        carries the best iterate and its report.
    """
    gravity = np.asarray(gravity, dtype=float)
    layout = _Layout(state)
    dt = layout.dt = sp.dt
    x_old = state.free_vector()
    mass = layout.mass
    mass_over_dt = layout.h / dt

    def evaluate(x):
        tangent = layout.tangents(x)
        psi, q = g_and_q(p, tangent)
        energy = _energy(layout, tangent, q, gravity)
        dx = x - x_old
        phi = energy.total + float(np.sum(mass * dx * dx)) / (2.0 * dt)
        return phi, energy, tangent, psi

    x = x_old.copy()
    phi, energy, tangent, psi = evaluate(x)
    phi0, energy0 = phi, energy
    grad = mass * (x - x_old) / dt + _energy_gradient(layout, psi, gravity)
    gnorm = float(np.linalg.norm(grad))
    iters = 0
    converged = gnorm <= sp.newton_tol
    while not converged and iters < sp.max_newton_iters:
        iters += 1
        stiff = grad_g_eps(p, tangent, psi=psi)
        direction = _newton_direction(layout, stiff, mass_over_dt, -grad)
        slope = float(grad @ direction)
        if not slope < 0:
            direction, slope = -grad, -float(grad @ grad)
        # Allow round-off-level increases once the iterate is essentially converged.
        fuzz = 64 * np.finfo(float).eps * (1.0 + abs(phi))
        alpha = 1.0
        accepted = False
        for _ in range(60):
            trial = evaluate(x + alpha * direction)
            if trial[0] <= phi + sp.armijo * alpha * slope + fuzz:
                accepted = True
                break
            alpha *= sp.shrink
        if not accepted:
            # Newton direction failed sufficient decrease: Armijo gradient step.
            direction, slope = -grad, -float(grad @ grad)
            alpha = 1.0 / max(1.0, gnorm)
            for _ in range(80):
                trial = evaluate(x + alpha * direction)
                if trial[0] <= phi + sp.armijo * alpha * slope + fuzz:
                    accepted = True
                    break
                alpha *= sp.shrink
        if not accepted:
            break
        x = x + alpha * direction
        phi, energy, tangent, psi = trial
        grad = mass * (x - x_old) / dt + _energy_gradient(layout, psi, gravity)
        gnorm = float(np.linalg.norm(grad))
        converged = gnorm <= sp.newton_tol

    dx = x - x_old
    layout.fill(x)
    free_grav = np.concatenate(
        [np.zeros(layout.offset), np.tile(gravity, layout.n_arms * (layout.m - 1))]
    )
    fields = fields_from_tangents(state.topology, tangent, psi)
    cert = constraint_report(fields, p)
    junction_residual = float("nan")
    if layout.free_junction:
        force = np.sum(psi[:, 0], axis=0)
        junction_residual = float(
            np.linalg.norm(force + JUNCTION_GRAVITY_WEIGHT * layout.h * gravity)
        )
    new_state = state.with_free(x, time=state.time + dt)
    report = StepReport(
        dt=dt,
        time=new_state.time,
        newton_iters=iters,
        converged=converged,
        energy_before=energy0,
        energy_after=energy,
        step_functional_decrease=phi0 - phi,
        displacement_sq=float(np.sum(mass * dx * dx)),
        gravity_work=float(np.sum(mass * dx * free_grav)),
        gradient_norm=gnorm,
        min_sigma=cert.min_sigma,
        max_stretch=cert.max_stretch_minus_one + 1.0,
        relaxation_residual=cert.relaxation_bound_residual,
        junction_residual=junction_residual,
    )
    if not converged:
        raise StepNotConverged(
            f"Newton stalled at gradient norm {gnorm:.3e} after {iters} iterations "
            f"(dt={dt:g}, t={state.time:g})",
            best_state=new_state,
            report=report,
        )
    return new_state, report


def run_flow(state0, p, gravity, sp, t_end, record_every=1, vel_tol=None, max_retries=10):
    """Integrate from ``state0`` until ``t_end`` (or steadiness).

    Parameters
    ----------
    record_every : int
        Keep a snapshot every this many accepted steps; the initial and final
        states are always kept. Every step contributes a :class:`StepReport`.
    vel_tol : float, optional
        Stop early after the first step whose discrete velocity norm falls
        below this value.
    max_retries : int
        A step that fails to converge is retried with half the timestep, at
        most this many times.

    Raises
    ------
    RunAborted
        When the retry budget for one step is exhausted.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if record_every < 1:
        raise ValueError("record_every must be >= 1")
    traj = Trajectory(snapshots=[state0], eps=p.eps)
    state = state0
    steps = 0
    while t_end - state.time > 1e-9 * sp.dt:
        remaining = t_end - state.time
        # absorb a final sliver instead of taking a vanishing step
        dt = remaining if remaining < 1.000001 * sp.dt else sp.dt
        for attempt in range(max_retries + 1):
            try:
                state, report = implicit_step(state, p, gravity, replace(sp, dt=dt))
                break
            except StepNotConverged as exc:
                msg = f"t={state.time:.6g}: {exc}; retrying with dt={dt / 2:g}"
                logger.warning(msg)
                traj.events.append(msg)
                dt /= 2.0
        else:
            raise RunAborted(
                f"step at t={state.time:g} failed after {max_retries} timestep halvings"
            )
        steps += 1
        traj.reports.append(report)
        steady = vel_tol is not None and report.velocity_norm < vel_tol
        if steps % record_every == 0 or steady:
            traj.snapshots.append(state)
        if steady:
            break
    if traj.snapshots[-1] is not state:
        traj.snapshots.append(state)
    return traj


def steady_detect(trajectory, vel_tol):
    """First step time at which the discrete velocity norm drops below ``vel_tol``."""
    if not vel_tol > 0:
        return None
    for r in trajectory.reports:
        if r.velocity_norm < vel_tol:
            return r.time
    return None
