"""Discrete triod / single-cord networks on a uniform arclength grid.

Every arm carries ``m + 1`` nodes at arclength spacing ``h = 1/m``. For a
triod, node 0 of every arm is the free junction and node ``m`` is pinned. A
cord has a single arm pinned at both ends.

The junction is held in one array slot shared by all arms, so the three arms
meet exactly by construction rather than up to round-off.
"""

from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np
from scipy.optimize import brentq

from .errors import InvalidPins, ShapeMismatch

__all__ = [
    "Topology",
    "Grid",
    "NetworkState",
    "CircularArc",
    "ExplicitPolyline",
    "ValidationReport",
    "build_initial",
    "edge_tangents",
    "validate_state",
    "sag_direction",
    "state_from_nodes",
]


class Topology(Enum):
    TRIOD = "triod"
    CORD = "cord"

    @property
    def n_arms(self):
        return 3 if self is Topology.TRIOD else 1


@dataclass(frozen=True)
class Grid:
    """Uniform arclength grid with ``m`` edges per unit-length arm."""

    m: int

    def __post_init__(self):
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"grid needs an integer m >= 2, got {self.m!r}")

    @property
    def h(self):
        return 1.0 / self.m


@dataclass(frozen=True, eq=False)
class NetworkState:
    """Node positions of a network at one instant.

    Attributes
    ----------
    topology : Topology
    grid : Grid
    junction : ndarray, shape (d,)
        Node 0 shared by all arms. For a cord this is the start node, which
        is pinned to ``start_pin``.
    interior : ndarray, shape (n_arms, m - 1, d)
        Nodes 1 .. m-1 of each arm.
    ends : ndarray, shape (n_arms, d)
        Node m of each arm; equal to ``pins`` for any valid state.
    pins : ndarray, shape (n_arms, d)
    start_pin : ndarray or None
        Cord only.
    time : float
    """

    topology: Topology
    grid: Grid
    junction: np.ndarray
    interior: np.ndarray
    ends: np.ndarray
    pins: np.ndarray
    start_pin: np.ndarray = None
    time: float = 0.0

    @property
    def dim(self):
        return self.junction.shape[-1]

    @property
    def m(self):
        return self.grid.m

    @property
    def h(self):
        return self.grid.h

    @property
    def n_arms(self):
        return self.topology.n_arms

    @property
    def nodes(self):
        """All nodes as an array of shape ``(n_arms, m + 1, d)``."""
        n, d = self.n_arms, self.dim
        start = np.broadcast_to(self.junction, (n, 1, d))
        return np.concatenate([start, self.interior, self.ends[:, None, :]], axis=1)

    @property
    def has_free_junction(self):
        return self.topology is Topology.TRIOD

    def free_vector(self):
        """Flatten the free nodes: ``[junction, arm 0 interior, ...]`` (triod)."""
        parts = [self.interior.ravel()]
        if self.has_free_junction:
            parts.insert(0, self.junction)
        return np.concatenate(parts)

    def with_free(self, x, time=None):
        """Return a new state with free nodes replaced by the flat vector ``x``."""
        x = np.asarray(x, dtype=float)
        d = self.dim
        junction = self.junction
        if self.has_free_junction:
            junction, x = x[:d].copy(), x[d:]
        interior = x.reshape(self.interior.shape).copy()
        return replace(
            self,
            junction=junction,
            interior=interior,
            time=self.time if time is None else float(time),
        )

    def free_mass(self):
        """Lumped L2 weights of the free-vector entries.

        Interior nodes carry ``h``. The triod junction is a single point of
        the parameter domain and carries no weight.
        """
        w = np.full(self.interior.size, self.h)
        if self.has_free_junction:
            w = np.concatenate([np.zeros(self.dim), w])
        return w


@dataclass(frozen=True)
class CircularArc:
    """Arc of unit length spanning the chord, sagging along gravity."""


@dataclass(frozen=True)
class ExplicitPolyline:
    """User-supplied unit-speed arm, nodes of shape ``(m + 1, d)``."""

    nodes: np.ndarray


@dataclass
class ValidationReport:
    junction_consistent: bool
    pins_consistent: bool
    has_nan: bool
    min_edge: float
    max_edge: float
    messages: list = field(default_factory=list)

    @property
    def ok(self):
        return self.junction_consistent and self.pins_consistent and not self.has_nan


def sag_direction(chord, gravity):
    """Unit vector orthogonal to ``chord`` along which an arm should sag.

    Gravity projected off the chord; if that vanishes, the first coordinate
    axis with a nonzero component orthogonal to the chord.
    """
    chord = np.asarray(chord, dtype=float)
    gravity = np.asarray(gravity, dtype=float)
    c = np.linalg.norm(chord)
    u = chord / c if c > 0 else np.zeros_like(chord)
    n = gravity - np.dot(gravity, u) * u
    if np.linalg.norm(n) > 1e-12:
        return n / np.linalg.norm(n)
    for k in range(chord.size):
        e = np.zeros_like(chord)
        e[k] = 1.0
        n = e - np.dot(e, u) * u
        if np.linalg.norm(n) > 1e-8:
            return n / np.linalg.norm(n)
    raise ValueError("cannot choose a sag direction")  # pragma: no cover


def _discrete_arc(start, end, m, gravity):
    """Equilateral polygon of ``m`` edges of length ``1/m`` inscribed in a circle."""
    start = np.asarray(start, dtype=float)
    end = np.asarray(end, dtype=float)
    h = 1.0 / m
    chord = end - start
    c = np.linalg.norm(chord)
    n = sag_direction(chord, gravity)
    if c > 0:
        u = chord / c
    else:
        u = sag_direction(n, -np.asarray(gravity, dtype=float))
    # sin(m b) / (m sin b) decreases from 1 to 0 on (0, pi/m)
    f = lambda b: np.sin(m * b) / (m * np.sin(b)) - c
    if f(np.pi / m) >= 0.0:
        # chord below round-off: closed polygon
        beta = np.pi / m
    else:
        beta = brentq(f, 1e-15, np.pi / m, xtol=1e-16, rtol=4 * np.finfo(float).eps)
    radius = h / (2.0 * np.sin(beta))
    half = m * beta
    mid = 0.5 * (start + end)
    center = mid - radius * np.cos(half) * n
    phi = -half + 2.0 * beta * np.arange(m + 1)
    pts = center + radius * (np.sin(phi)[:, None] * u + np.cos(phi)[:, None] * n)
    pts[0], pts[-1] = start, end
    return pts


def _check_polyline(nodes, start, end, m):
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 2 or nodes.shape[0] != m + 1 or nodes.shape[1] != np.size(start):
        raise ShapeMismatch(
            f"polyline must have shape ({m + 1}, {np.size(start)}), got {nodes.shape}"
        )
    if not (np.allclose(nodes[0], start, atol=1e-10) and np.allclose(nodes[-1], end, atol=1e-10)):
        raise ShapeMismatch("polyline endpoints do not match the junction/pins")
    lengths = np.linalg.norm(np.diff(nodes, axis=0), axis=1)
    if np.max(np.abs(lengths - 1.0 / m)) > 1e-10:
        raise ShapeMismatch("polyline edges are not of uniform length 1/m")
    out = nodes.copy()
    out[0], out[-1] = start, end
    return out


def build_initial(topology, grid, pins, shape=None, gravity=None):
    """Construct a slack initial network at time 0.

    Parameters
    ----------
    topology : Topology
    grid : Grid
    pins : array_like
        Triod: the three end pins, shape ``(3, d)``, measured from a junction
        at the origin. Cord: start and end pins, shape ``(2, d)``.
    shape : CircularArc, ExplicitPolyline, or a sequence of these per arm
        Defaults to circular arcs.
    gravity : array_like, shape (d,)
        Unit vector; sets the sag direction of circular arcs. Defaults to
        minus the last coordinate axis.

    Raises
    ------
    InvalidPins
        If any chord is not strictly shorter than 1.
    ShapeMismatch
        If an explicit polyline is malformed.
    """
    topology = Topology(topology)
    pins = np.atleast_2d(np.asarray(pins, dtype=float))
    d = pins.shape[1]
    if d < 2:
        raise ValueError("networks live in dimension d >= 2")
    if gravity is None:
        gravity = np.zeros(d)
        gravity[-1] = -1.0
    gravity = np.asarray(gravity, dtype=float)
    if gravity.shape != (d,) or abs(np.linalg.norm(gravity) - 1.0) > 1e-12:
        raise ValueError("gravity must be a unit vector of the network dimension")

    if topology is Topology.TRIOD:
        if pins.shape[0] != 3:
            raise InvalidPins(f"a triod needs 3 pins, got {pins.shape[0]}")
        starts = np.zeros((3, d))
        ends = pins
        start_pin = None
    else:
        if pins.shape[0] != 2:
            raise InvalidPins(f"a cord needs 2 pins (start, end), got {pins.shape[0]}")
        starts = pins[:1]
        ends = pins[1:]
        start_pin = pins[0].copy()
    chords = np.linalg.norm(ends - starts, axis=1)
    if np.any(chords >= 1.0):
        raise InvalidPins(
            f"every pin chord must be strictly shorter than the unit arm length, got {chords.max():.17g}"
        )

    n_arms = topology.n_arms
    if shape is None:
        shape = CircularArc()
    shapes = list(shape) if isinstance(shape, (list, tuple)) else [shape] * n_arms
    if len(shapes) != n_arms:
        raise ShapeMismatch(f"expected {n_arms} arm shapes, got {len(shapes)}")

    m = grid.m
    arms = []
    for s, e, kind in zip(starts, ends, shapes):
        if isinstance(kind, ExplicitPolyline):
            arms.append(_check_polyline(kind.nodes, s, e, m))
        elif isinstance(kind, CircularArc):
            arms.append(_discrete_arc(s, e, m, gravity))
        else:
            raise TypeError(f"unknown initial shape {kind!r}")
    arms = np.stack(arms)
    return NetworkState(
        topology=topology,
        grid=grid,
        junction=starts[0].copy(),
        interior=arms[:, 1:-1].copy(),
        ends=ends.copy(),
        pins=ends.copy(),
        start_pin=start_pin,
        time=0.0,
    )


def state_from_nodes(topology, nodes, time=0.0):
    """Wrap full per-arm node arrays ``(n_arms, m + 1, d)`` as a state.

    The last node of every arm becomes its pin; for a cord the first node
    becomes the start pin. For a triod the junction is taken from arm 0.
    """
    topology = Topology(topology)
    nodes = np.asarray(nodes, dtype=float)
    if nodes.ndim != 3 or nodes.shape[0] != topology.n_arms:
        raise ShapeMismatch(f"expected nodes of shape ({topology.n_arms}, m+1, d)")
    grid = Grid(nodes.shape[1] - 1)
    return NetworkState(
        topology=topology,
        grid=grid,
        junction=nodes[0, 0].copy(),
        interior=nodes[:, 1:-1].copy(),
        ends=nodes[:, -1].copy(),
        pins=nodes[:, -1].copy(),
        start_pin=nodes[0, 0].copy() if topology is Topology.CORD else None,
        time=float(time),
    )


def edge_tangents(state):
    """Difference quotients ``(x[j+1] - x[j]) / h``, shape ``(n_arms, m, d)``."""
    return np.diff(state.nodes, axis=1) / state.h


def validate_state(state):
    """Check pin/junction consistency, edge lengths and finiteness."""
    nodes = state.nodes
    messages = []
    has_nan = not np.all(np.isfinite(nodes))
    if has_nan:
        messages.append("non-finite node coordinate")
    junction_ok = bool(np.all(nodes[:, 0] == nodes[0, 0]))
    if not junction_ok:
        messages.append("arms disagree at the junction")
    pins_ok = bool(np.array_equal(state.ends, state.pins))
    if state.topology is Topology.CORD:
        pins_ok = pins_ok and state.start_pin is not None and bool(
            np.array_equal(state.junction, state.start_pin)
        )
    if not pins_ok:
        messages.append("pinned node moved off its pin")
    with np.errstate(invalid="ignore"):
        lengths = np.linalg.norm(np.diff(nodes, axis=1), axis=-1)
    return ValidationReport(
        junction_consistent=junction_ok,
        pins_consistent=pins_ok,
        has_nan=has_nan,
        min_edge=float(np.nanmin(lengths)) if lengths.size else float("nan"),
        max_edge=float(np.nanmax(lengths)) if lengths.size else float("nan"),
        messages=messages,
    )
