"""Run configuration, epsilon-continuation sweeps, the catenary oracle, and export.

Configuration grammar
---------------------
Plain text, one ``key = value`` per line, ``#`` starts a comment. Vectors
are comma-separated reals; lists of vectors separate entries with ``;``::

    topology = cord
    pins = 0, 0 ; 0.8, 0
    gravity = 0, -1
    eps = 0.2, 0.1, 0.05, 0.025
    m = 64
"""

from dataclasses import dataclass, field, fields
import math
from pathlib import Path

import numpy as np

from . import io as tio
from .diagnostics import (
    certificate_report,
    edge_fields,
    supported_stretch_excess,
    tail_max_positive,
)
from .errors import InvalidPins, OracleNotConverged, ParseError, ValidationError
from .evolve import StepParams, run_flow
from .network import CircularArc, ExplicitPolyline, Grid, Topology, build_initial
from .regularization import RegularizationParams

__all__ = [
    "RunConfig",
    "reference_triod_pins",
    "parse_config",
    "load_config",
    "format_config",
    "initial_state",
    "SweepRow",
    "SweepTable",
    "epsilon_sweep",
    "CatenaryFit",
    "fit_catenary",
    "catenary_oracle",
    "polyline_distance",
    "export_series",
]


def reference_triod_pins(radius=0.8, angles_deg=(150.0, 30.0, 270.0)):
    """Planar pin layout used by the reference runs: equal radii at fixed angles."""
    a = np.deg2rad(np.asarray(angles_deg, dtype=float))
    return radius * np.column_stack([np.cos(a), np.sin(a)])


@dataclass(frozen=True)
class RunConfig:
    topology: Topology
    pins: np.ndarray
    gravity: np.ndarray = None
    eps: tuple = (0.05,)
    m: int = 64
    dt: float = 1e-3
    t_end: float = 2.0
    newton_tol: float = 1e-10
    max_newton_iters: int = 50
    vel_tol: float = 1e-6
    root_tol: float = 1e-12
    geometry_tol: float = 0.05
    record_every: int = 1
    out: str = None
    shape: str = "arc"

    @property
    def dimension(self):
        return self.pins.shape[1]

    def regularization(self, eps=None):
        return RegularizationParams(self.eps[0] if eps is None else eps, root_tol=self.root_tol)

    def step_params(self):
        return StepParams(dt=self.dt, newton_tol=self.newton_tol, max_newton_iters=self.max_newton_iters)

    def validate(self):
        """Raise :class:`ValidationError` naming the first violated invariant."""
        pins = self.pins
        if pins.ndim != 2 or pins.shape[1] not in (2, 3):
            raise ValidationError("pins must be vectors of dimension 2 or 3")
        want = 3 if self.topology is Topology.TRIOD else 2
        if pins.shape[0] != want:
            raise ValidationError(f"{self.topology.value} needs {want} pins, got {pins.shape[0]}")
        g = self.gravity
        if g.shape != (self.dimension,):
            raise ValidationError("gravity dimension does not match the pins")
        if abs(np.linalg.norm(g) - 1.0) > 1e-12:
            raise ValidationError(f"gravity must be a unit vector (|g| = {np.linalg.norm(g):.17g})")
        if self.topology is Topology.TRIOD:
            chords = np.linalg.norm(pins, axis=1)
        else:
            chords = np.array([np.linalg.norm(pins[1] - pins[0])])
        if np.any(chords >= 1.0):
            raise ValidationError(
                f"pin chord >= 1 ({chords.max():.17g}); arms must be strictly slack initially, |pin chord| < 1"
            )
        for e in self.eps:
            if not 0.0 < e <= 1.0:
                raise ValidationError(f"eps must lie in (0, 1], got {e!r}")
        if not self.eps:
            raise ValidationError("at least one eps value is required")
        if int(self.m) != self.m or self.m < 3:
            raise ValidationError("m must be an integer >= 3")
        for name in ("dt", "t_end", "newton_tol", "vel_tol", "root_tol", "geometry_tol"):
            if not getattr(self, name) > 0:
                raise ValidationError(f"{name} must be positive")
        if self.max_newton_iters < 1 or self.record_every < 1:
            raise ValidationError("iteration counts must be positive integers")
        if not (self.shape == "arc" or self.shape.startswith("snapshot:")):
            raise ValidationError("shape must be 'arc' or 'snapshot:<path>'")
        return self


_SCALARS = {
    "m": int,
    "dt": float,
    "t_end": float,
    "newton_tol": float,
    "max_newton_iters": int,
    "vel_tol": float,
    "root_tol": float,
    "geometry_tol": float,
    "record_every": int,
}


def _floats(text, lineno):
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise ParseError(f"expected comma-separated reals, got {text!r}", lineno) from None


def parse_config(text):
    """Parse configuration text into a validated :class:`RunConfig`.

    Raises
    ------
    ParseError
        For malformed lines, unknown keys, or unparsable values.
    ValidationError
        For values that violate an invariant.
    """
    values = {}
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().lower().replace("-", "_"), value.strip()
        if not sep or not key:
            raise ParseError(f"expected 'key = value', got {raw.strip()!r}", lineno)
        if key in seen:
            raise ParseError(f"duplicate key {key!r} (first on line {seen[key]})", lineno)
        seen[key] = lineno
        if key == "topology":
            try:
                values[key] = Topology(value.lower())
            except ValueError:
                raise ParseError(f"unknown topology {value!r}", lineno) from None
        elif key == "pins":
            vecs = [_floats(v, lineno) for v in value.split(";") if v.strip()]
            if not vecs or len({len(v) for v in vecs}) != 1:
                raise ParseError("pins must be vectors of equal dimension", lineno)
            values[key] = np.array(vecs)
        elif key == "gravity":
            values[key] = np.array(_floats(value, lineno))
        elif key == "eps":
            values[key] = tuple(_floats(value, lineno))
        elif key in ("dimension", "d"):
            try:
                values["dimension"] = int(value)
            except ValueError:
                raise ParseError(f"bad dimension {value!r}", lineno) from None
        elif key in _SCALARS:
            try:
                values[key] = _SCALARS[key](value)
            except ValueError:
                raise ParseError(f"bad value for {key}: {value!r}", lineno) from None
        elif key in ("out", "shape"):
            values[key] = value
        else:
            raise ParseError(f"unknown key {key!r}", lineno)
    if "topology" not in values:
        raise ValidationError("missing required key 'topology'")
    if "pins" not in values:
        raise ValidationError("missing required key 'pins'")
    dim = values.pop("dimension", None)
    pins = values["pins"]
    if dim is not None and dim != pins.shape[1]:
        raise ValidationError(f"dimension = {dim} but pins have dimension {pins.shape[1]}")
    if "gravity" not in values:
        g = np.zeros(pins.shape[1])
        g[-1] = -1.0
        values["gravity"] = g
    return RunConfig(**values).validate()


def load_config(path):
    return parse_config(Path(path).read_text())


def format_config(config):
    """Render a config in the grammar accepted by :func:`parse_config`."""
    vec = lambda v: ", ".join(repr(float(c)) for c in v)
    lines = [
        f"topology = {config.topology.value}",
        f"pins = {' ; '.join(vec(p) for p in config.pins)}",
        f"gravity = {vec(config.gravity)}",
        f"eps = {vec(config.eps)}",
    ]
    for f in fields(config):
        if f.name in ("topology", "pins", "gravity", "eps"):
            continue
        value = getattr(config, f.name)
        if value is None:
            continue
        lines.append(f"{f.name} = {value!r}" if isinstance(value, float) else f"{f.name} = {value}")
    return "\n".join(lines) + "\n"


def initial_state(config):
    """Build the time-0 network described by ``config``."""
    grid = Grid(config.m)
    shape = CircularArc()
    if config.shape.startswith("snapshot:"):
        snap, _ = tio.read_snapshot(config.shape.split(":", 1)[1].strip())
        shape = [ExplicitPolyline(arm) for arm in snap.nodes]
    try:
        return build_initial(config.topology, grid, config.pins, shape, config.gravity)
    except InvalidPins as exc:
        raise ValidationError(str(exc)) from exc


@dataclass
class SweepRow:
    eps: float
    supported_stretch_excess: float = math.nan
    max_stretch_minus_one: float = math.nan
    min_sigma: float = math.nan
    dissipation_tail_slack: float = math.nan
    junction_residual: float = math.nan
    relaxation_bound_residual: float = math.nan
    final_time: float = math.nan
    error: str = None


@dataclass
class SweepTable:
    rows: list = field(default_factory=list)
    trajectories: dict = field(default_factory=dict)

    def column(self, name):
        return np.array([getattr(r, name) for r in self.rows], dtype=float)

    def as_records(self):
        return [vars(r).copy() for r in self.rows]


def _sweep_row(state0, config, eps):
    p = config.regularization(eps)
    traj = run_flow(state0, p, config.gravity, config.step_params(), config.t_end, config.record_every)
    fields_ = edge_fields(traj.final, p)
    reports = traj.reports
    row = SweepRow(
        eps=eps,
        supported_stretch_excess=supported_stretch_excess(fields_, p),
        max_stretch_minus_one=float(np.max(fields_.stretch - 1.0)),
        min_sigma=min(r.min_sigma for r in reports),
        dissipation_tail_slack=tail_max_positive(traj, 0.5 * config.t_end),
        junction_residual=max((r.junction_residual for r in reports), default=math.nan),
        relaxation_bound_residual=max(r.relaxation_residual for r in reports),
        final_time=traj.final.time,
    )
    return row, traj


def epsilon_sweep(config, state0=None):
    """Run one flow per eps in ``config.eps`` from a common initial state.

    Measured at the final time: the stretch excess on tension-carrying edges
    (tension above ``sqrt(eps)``), the minimum tension over all steps, the
    largest positive dissipation-inequality slack over the second half of the
    run, the largest corrected junction residual, and the largest
    relaxed-constraint residual. Rows are sorted by eps, largest first. A
    failed run yields a row carrying its error message.
    """
    eps_list = list(config.eps)
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValidationError("sweep eps values must be strictly decreasing")
    if state0 is None:
        state0 = initial_state(config)
    table = SweepTable()
    for eps in eps_list:
        try:
            row, traj = _sweep_row(state0, config, eps)
            table.trajectories[eps] = traj
        except Exception as exc:  # one failed eps must not sink the sweep
            row = SweepRow(eps=eps, error=f"{type(exc).__name__}: {exc}")
        table.rows.append(row)
    table.rows.sort(key=lambda r: -r.eps)
    return table


@dataclass(frozen=True)
class CatenaryFit:
    """Catenary ``y = a cosh((x - x0)/a) + c`` in the vertical plane of the chord.

    ``u1``, ``u2`` are the end abscissae ``(x - x0)/a``; ``horizontal`` and
    ``up`` span the plane, with the first pin at the origin of ``x``.
    """

    a: float
    u1: float
    u2: float
    horizontal: np.ndarray
    up: np.ndarray
    origin: np.ndarray

    @property
    def sag(self):
        """Depth of the lowest point below the lower pin (0 if monotone)."""
        u_low = min(max(0.0, self.u1), self.u2)
        low = self.a * math.cosh(u_low)
        return self.a * min(math.cosh(self.u1), math.cosh(self.u2)) - low


def fit_catenary(pin_a, pin_b, length=1.0, gravity=None, tol=1e-14, max_iter=100):
    """Solve for the catenary of given length through two pins.

    Unknowns are ``u = span/(2a)`` and the mean abscissa ``mu = (u1+u2)/2``;
    the residuals ``span sinh(u)/u cosh(mu) - length`` and
    ``span sinh(u)/u sinh(mu) - rise`` are driven to zero by damped Newton
    from the symmetric guess ``mu = 0``.
    """
    pin_a = np.asarray(pin_a, dtype=float)
    pin_b = np.asarray(pin_b, dtype=float)
    d = pin_a.size
    if gravity is None:
        gravity = np.zeros(d)
        gravity[-1] = -1.0
    up = -np.asarray(gravity, dtype=float)
    up = up / np.linalg.norm(up)
    chord = pin_b - pin_a
    rise = float(chord @ up)
    horiz = chord - rise * up
    span = float(np.linalg.norm(horiz))
    if not np.linalg.norm(chord) < length:
        raise OracleNotConverged("pins must be closer than the cord length")
    if span < 1e-12:
        raise OracleNotConverged("pins are vertically aligned; no catenary exists")
    horiz = horiz / span
    target = math.sqrt(length * length - rise * rise) / span
    # sinh(u)/u ~ 1 + u^2/6 for the initial guess
    u = max(math.sqrt(6.0 * (target - 1.0)), 1e-3)
    mu = 0.0

    def resid(u, mu):
        k = span * math.sinh(u) / u
        return np.array([k * math.cosh(mu) - length, k * math.sinh(mu) - rise])

    r = resid(u, mu)
    for _ in range(max_iter):
        if np.max(np.abs(r)) <= tol * max(1.0, length):
            break
        dk = span * (math.cosh(u) / u - math.sinh(u) / (u * u))
        k = span * math.sinh(u) / u
        jac = np.array(
            [[dk * math.cosh(mu), k * math.sinh(mu)], [dk * math.sinh(mu), k * math.cosh(mu)]]
        )
        step = np.linalg.solve(jac, -r)
        lam = 1.0
        while lam > 1e-10:
            u_new, mu_new = u + lam * step[0], mu + lam * step[1]
            if u_new > 0:
                r_new = resid(u_new, mu_new)
                if np.linalg.norm(r_new) < (1 - 1e-4 * lam) * np.linalg.norm(r):
                    break
            lam *= 0.5
        else:
            raise OracleNotConverged("damped Newton line search failed")
        u, mu, r = u_new, mu_new, r_new
    else:
        raise OracleNotConverged("catenary Newton iteration did not converge")
    if np.max(np.abs(r)) > 1e-10 * max(1.0, length):
        raise OracleNotConverged("catenary residual too large")
    a = span / (2.0 * u)
    return CatenaryFit(a=a, u1=mu - u, u2=mu + u, horizontal=horiz, up=up, origin=pin_a)


def catenary_oracle(pin_a, pin_b, length=1.0, gravity=None, samples=1000):
    """Arclength-sampled catenary through two pins, ``samples + 1`` points.

    Raises
    ------
    OracleNotConverged
        If the pins are too far apart, vertically aligned, or the solve fails.
    """
    fit = fit_catenary(pin_a, pin_b, length, gravity)
    a, u1 = fit.a, fit.u1
    s = np.linspace(0.0, length, samples + 1)
    u = np.arcsinh(s / a + math.sinh(u1))
    x = a * (u - u1)
    y = a * (np.cosh(u) - math.cosh(u1))
    pts = fit.origin + x[:, None] * fit.horizontal + y[:, None] * fit.up
    pts[0] = np.asarray(pin_a, dtype=float)
    pts[-1] = np.asarray(pin_b, dtype=float)
    return pts


def polyline_distance(points, polyline):
    """Distance from each point to the nearest segment of ``polyline``."""
    points = np.atleast_2d(np.asarray(points, dtype=float))
    a = polyline[:-1]
    ab = polyline[1:] - a
    denom = np.maximum(np.sum(ab * ab, axis=1), 1e-300)
    out = np.empty(len(points))
    for k, pt in enumerate(points):
        t = np.clip(np.sum((pt - a) * ab, axis=1) / denom, 0.0, 1.0)
        out[k] = np.sqrt(np.min(np.sum((a + t[:, None] * ab - pt) ** 2, axis=1)))
    return out


def export_series(trajectory, out_dir, p=None, gravity=None, summary=None, snapshots=True):
    """Write the standard output set for one run into ``out_dir``.

    Files: ``trajectory.csv`` (one row per step), ``series_long.csv``
    (``t, series_name, value``), ``snapshots/snapshot_NNNNN.{csv,json}`` per
    recorded state, and ``report.json`` (final certificates, steady time,
    plus anything in ``summary``).
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = [
        tio.write_trajectory_csv(trajectory, out / "trajectory.csv"),
        tio.write_long_csv(trajectory, out / "series_long.csv"),
    ]
    eps = trajectory.eps
    if snapshots:
        for k, state in enumerate(trajectory.snapshots):
            written.extend(tio.write_snapshot(state, out / "snapshots" / f"snapshot_{k:05d}", eps))
    doc = {"steps": len(trajectory.reports), "events": list(trajectory.events), "eps": eps}
    if p is not None and gravity is not None and trajectory.snapshots:
        doc["certificates"] = certificate_report(trajectory, p, gravity).as_dict()
    if trajectory.reports:
        doc["final_time"] = trajectory.reports[-1].time
    doc["steady_time"] = None
    if summary:
        doc.update(summary)
    written.append(tio.write_json(doc, out / "report.json"))
    return written
