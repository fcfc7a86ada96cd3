import filecmp
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from triodflow import (
    Grid,
    RegularizationParams,
    StepParams,
    Topology,
    Trajectory,
    build_initial,
    catenary_oracle,
    epsilon_sweep,
    export_series,
    format_config,
    parse_config,
    run_flow,
)
from triodflow import io as tio
from triodflow.errors import OracleNotConverged, ParseError, ValidationError
from triodflow.experiments import fit_catenary, initial_state, polyline_distance

G = np.array([0.0, -1.0])

# Symmetric catenary of length 1 on the chord 0.8: sinh(u)/u = 1.25, a = 0.4/u,
# sag = a (cosh u - 1). Frozen from a 30-digit mpmath root find.
CAT_U = 1.18272553979232921
CAT_A = 0.338201879085349464
CAT_SAG = 0.265437509139823711

TRIOD_TEXT = """
# reference triod, shortened
topology = triod
pins = -0.69282032302755092, 0.4 ; 0.69282032302755092, 0.4 ; 0, -0.8
eps = 0.2, 0.1
m = 16
dt = 0.01
t-end = 0.1
"""


def test_parse_defaults():
    cfg = parse_config(TRIOD_TEXT)
    assert cfg.topology is Topology.TRIOD
    assert cfg.dimension == 2
    np.testing.assert_array_equal(cfg.gravity, G)
    assert cfg.eps == (0.2, 0.1) and cfg.m == 16 and cfg.t_end == 0.1
    assert cfg.newton_tol == 1e-10 and cfg.vel_tol == 1e-6


def test_format_round_trip():
    cfg = parse_config(TRIOD_TEXT + "out = /tmp/x\n")
    again = parse_config(format_config(cfg))
    assert format_config(again) == format_config(cfg)
    np.testing.assert_array_equal(again.pins, cfg.pins)


@settings(max_examples=60, deadline=None)
@given(
    c=st.floats(0.01, 0.99),
    ang=st.floats(-math.pi, math.pi),
    eps=st.lists(st.floats(1e-4, 1.0), min_size=1, max_size=4, unique=True),
    m=st.integers(3, 500),
    dt=st.floats(1e-6, 1.0),
)
def test_format_round_trip_property(c, ang, eps, m, dt):
    text = format_config(
        parse_config(
            f"topology = cord\npins = 0, 0 ; {c * math.cos(ang)!r}, {c * math.sin(ang)!r}\n"
            f"eps = {', '.join(map(repr, sorted(eps, reverse=True)))}\nm = {m}\ndt = {dt!r}\n"
        )
    )
    assert format_config(parse_config(text)) == text


@pytest.mark.parametrize(
    "text, line",
    [
        ("topology = triod\nfoo = 1\n", 2),
        ("topology = cord\ntopology = cord\n", 2),
        ("topology = loop\n", 1),
        ("topology = cord\nm = many\n", 2),
        ("topology = cord\npins = 0, 0 ; 0.5\n", 2),
        ("topology = cord\n\njust words\n", 3),
        ("topology = cord\npins = 0, x ; 0.5, 0\n", 2),
    ],
)
def test_parse_errors_carry_line_numbers(text, line):
    with pytest.raises(ParseError) as info:
        parse_config(text)
    assert info.value.line == line
    assert str(info.value).startswith(f"line {line}:")


@pytest.mark.parametrize(
    "extra",
    [
        "pins = 0, 0 ; 1.0, 0",
        "pins = 0, 0 ; 0.5, 0\ngravity = 0, -2",
        "pins = 0, 0 ; 0.5, 0\neps = 0",
        "pins = 0, 0 ; 0.5, 0\neps = 1.5",
        "pins = 0, 0 ; 0.5, 0\nm = 2",
        "pins = 0, 0 ; 0.5, 0\ndt = -1",
        "pins = 0, 0 ; 0.5, 0 ; 0.1, 0.1",
        "pins = 0, 0, 0 ; 0.5, 0, 0\ndimension = 2",
        "pins = 0, 0 ; 0.5, 0\nshape = spiral",
    ],
)
def test_validation_errors(extra):
    with pytest.raises(ValidationError):
        parse_config("topology = cord\n" + extra + "\n")


def test_missing_keys():
    with pytest.raises(ValidationError):
        parse_config("topology = cord\n")
    with pytest.raises(ValidationError):
        parse_config("pins = 0, 0 ; 0.5, 0\n")


def test_three_dimensional_config():
    cfg = parse_config("topology = cord\npins = 0, 0, 0 ; 0.5, 0.2, 0\nm = 8\n")
    np.testing.assert_array_equal(cfg.gravity, [0, 0, -1])
    assert initial_state(cfg).dim == 3


def test_sweep_rows():
    cfg = parse_config(TRIOD_TEXT)
    table = epsilon_sweep(cfg)
    assert [r.eps for r in table.rows] == [0.2, 0.1]
    for r in table.rows:
        assert r.error is None
        assert r.min_sigma >= 0
        assert r.relaxation_bound_residual <= 1e-12
        assert r.junction_residual <= 1e-8
        assert r.final_time == pytest.approx(0.1)
    excess = table.column("supported_stretch_excess")
    assert excess[1] <= excess[0]
    assert set(table.trajectories) == {0.2, 0.1}


def test_sweep_rejects_unordered_eps():
    cfg = parse_config(TRIOD_TEXT.replace("eps = 0.2, 0.1", "eps = 0.1, 0.2"))
    with pytest.raises(ValidationError):
        epsilon_sweep(cfg)


def test_sweep_records_failures(monkeypatch):
    import triodflow.experiments as ex

    real = ex._sweep_row

    def fail_small(state0, config, eps):
        if eps < 0.15:
            raise RuntimeError("boom")
        return real(state0, config, eps)

    monkeypatch.setattr(ex, "_sweep_row", fail_small)
    table = epsilon_sweep(parse_config(TRIOD_TEXT))
    assert table.rows[0].error is None
    assert "boom" in table.rows[1].error


def test_symmetric_catenary_constants():
    fit = fit_catenary([0, 0], [0.8, 0])
    assert fit.a == pytest.approx(CAT_A, rel=1e-12)
    assert fit.u2 == pytest.approx(CAT_U, rel=1e-12)
    assert fit.u1 == pytest.approx(-CAT_U, rel=1e-12)
    assert fit.sag == pytest.approx(CAT_SAG, abs=1e-12)


def test_catenary_oracle_geometry():
    pts = catenary_oracle([0, 0], [0.8, 0], samples=1000)
    assert pts.shape == (1001, 2)
    length = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
    assert length == pytest.approx(1.0, abs=1e-6)
    # mirror symmetry about x = 0.4
    np.testing.assert_allclose(pts[::-1, 0], 0.8 - pts[:, 0], atol=1e-12)
    np.testing.assert_allclose(pts[::-1, 1], pts[:, 1], atol=1e-12)
    assert -pts[500, 1] == pytest.approx(CAT_SAG, abs=1e-12)


@settings(max_examples=40, deadline=None)
@given(dx=st.floats(0.05, 0.8), dy=st.floats(-0.5, 0.5), x0=st.floats(-2, 2), y0=st.floats(-2, 2))
def test_catenary_general_pins(dx, dy, x0, y0):
    if math.hypot(dx, dy) > 0.95:
        return
    a, b = np.array([x0, y0]), np.array([x0 + dx, y0 + dy])
    pts = catenary_oracle(a, b, samples=400)
    length = np.sum(np.linalg.norm(np.diff(pts, axis=0), axis=1))
    assert length == pytest.approx(1.0, abs=1e-4)
    np.testing.assert_array_equal(pts[0], a)
    np.testing.assert_array_equal(pts[-1], b)
    # swapping pins gives the same curve traversed backwards
    back = catenary_oracle(b, a, samples=400)
    np.testing.assert_allclose(back[::-1], pts, atol=1e-9)


def test_catenary_in_three_dimensions():
    pts = catenary_oracle([0, 0, 0], [0.3, 0.4, 0], samples=200)
    planar = catenary_oracle([0, 0], [0.5, 0], samples=200)
    np.testing.assert_allclose(pts[:, 2], planar[:, 1], atol=1e-12)


def test_catenary_rejects_bad_pins():
    with pytest.raises(OracleNotConverged):
        catenary_oracle([0, 0], [1.2, 0])
    with pytest.raises(OracleNotConverged):
        catenary_oracle([0, 0], [0, -0.5])


def test_polyline_distance():
    line = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 1.0]])
    d = polyline_distance([[0.5, 0.3], [2.0, 0.5], [-1.0, 0.0]], line)
    np.testing.assert_allclose(d, [0.3, 1.0, 1.0])


@pytest.fixture(scope="module")
def tiny_run():
    state = build_initial(Topology.TRIOD, Grid(8), parse_config(TRIOD_TEXT).pins, gravity=G)
    p = RegularizationParams(0.1)
    return p, run_flow(state, p, G, StepParams(dt=0.01), t_end=0.03)


def test_export_is_deterministic(tmp_path, tiny_run):
    p, traj = tiny_run
    a = export_series(traj, tmp_path / "a", p, G)
    b = export_series(traj, tmp_path / "b", p, G)
    assert len(a) == len(b) == 3 + 2 * 4
    for fa, fb in zip(a, b):
        assert filecmp.cmp(fa, fb, shallow=False)
    header = (tmp_path / "a" / "trajectory.csv").read_text().splitlines()[0]
    assert header == ",".join(tio.TRAJECTORY_COLUMNS)
    long = (tmp_path / "a" / "series_long.csv").read_text().splitlines()
    assert long[0] == "t,series_name,value"
    assert len(long) == 1 + 3 * (len(tio.TRAJECTORY_COLUMNS) - 1)


def test_snapshot_round_trip(tmp_path, tiny_run):
    _, traj = tiny_run
    state = traj.final
    csv_path, json_path = tio.write_snapshot(state, tmp_path / "snap", eps=0.1)
    for path in (csv_path, json_path):
        back, eps = tio.read_snapshot(path)
        assert eps == 0.1 and back.time == state.time
        np.testing.assert_array_equal(back.nodes, state.nodes)
    tio.write_snapshot(tio.read_snapshot(csv_path)[0], tmp_path / "again", eps=0.1)
    assert csv_path.read_text() == (tmp_path / "again.csv").read_text()


def test_snapshot_as_initial_shape(tmp_path):
    cfg = parse_config("topology = cord\npins = 0, 0 ; 0.6, 0\nm = 12\n")
    state = initial_state(cfg)
    csv_path, _ = tio.write_snapshot(state, tmp_path / "init")
    cfg2 = parse_config(f"topology = cord\npins = 0, 0 ; 0.6, 0\nm = 12\nshape = snapshot:{csv_path}\n")
    np.testing.assert_array_equal(initial_state(cfg2).nodes, state.nodes)


def test_empty_run_exports_headers_only(tmp_path):
    state = build_initial(Topology.CORD, Grid(4), [[0, 0], [0.5, 0]], gravity=G)
    export_series(Trajectory(snapshots=[state], eps=0.1), tmp_path)
    assert (tmp_path / "trajectory.csv").read_text() == ",".join(tio.TRAJECTORY_COLUMNS) + "\n"
    assert (tmp_path / "series_long.csv").read_text() == "t,series_name,value\n"


def test_json_writer_nulls_non_finite(tmp_path):
    path = tio.write_json({"b": float("nan"), "a": np.float64(1.5), "c": [np.inf]}, tmp_path / "r.json")
    assert path.read_text() == '{\n  "a": 1.5,\n  "b": null,\n  "c": [\n    null\n  ]\n}\n'
