"""CSV/JSON writers and readers for snapshots, trajectories and tension fields.

Floats in CSV files are written with 17 significant digits so every file
round-trips exactly and re-export is byte-identical.
"""

import csv
import io
import json
from pathlib import Path

import numpy as np

from .network import Topology, state_from_nodes

__all__ = [
    "TRAJECTORY_COLUMNS",
    "fmt",
    "snapshot_csv",
    "snapshot_json",
    "write_snapshot",
    "read_snapshot",
    "trajectory_rows",
    "write_trajectory_csv",
    "write_long_csv",
    "write_tension_csv",
    "write_json",
]

TRAJECTORY_COLUMNS = (
    "t",
    "energy_total",
    "q_part",
    "gravity_part",
    "dissipation_cum",
    "min_sigma",
    "max_stretch",
    "junction_residual",
    "newton_iters",
)

_COORDS = ("x", "y", "z")


def fmt(value):
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return "%.17g" % float(value)


def _to_text(rows, header, comments=()):
    buf = io.StringIO()
    for line in comments:
        buf.write(f"# {line}\n")
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([fmt(v) for v in row])
    return buf.getvalue()


def snapshot_csv(state, eps=None):
    """Snapshot as CSV text: header comments, then one row per node."""
    nodes = state.nodes
    d = state.dim
    header = ["arm_index", "node_index", *_COORDS[:d]]
    comments = [
        f"topology={state.topology.value}",
        f"m={state.m}",
        f"time={fmt(state.time)}",
        f"eps={'' if eps is None else fmt(eps)}",
    ]
    rows = (
        (i, j, *nodes[i, j])
        for i in range(nodes.shape[0])
        for j in range(nodes.shape[1])
    )
    return _to_text(rows, header, comments)


def snapshot_json(state, eps=None):
    """Snapshot as a single JSON document."""
    nodes = state.nodes
    d = state.dim
    records = [
        {"arm_index": i, "node_index": j, **{_COORDS[k]: float(nodes[i, j, k]) for k in range(d)}}
        for i in range(nodes.shape[0])
        for j in range(nodes.shape[1])
    ]
    doc = {
        "topology": state.topology.value,
        "m": state.m,
        "time": float(state.time),
        "eps": None if eps is None else float(eps),
        "dimension": d,
        "nodes": records,
    }
    return json.dumps(doc, indent=1) + "\n"


def write_snapshot(state, path_stem, eps=None):
    """Write ``<stem>.csv`` and ``<stem>.json``; return both paths."""
    stem = Path(path_stem)
    stem.parent.mkdir(parents=True, exist_ok=True)
    csv_path = stem.with_suffix(".csv")
    json_path = stem.with_suffix(".json")
    csv_path.write_text(snapshot_csv(state, eps))
    json_path.write_text(snapshot_json(state, eps))
    return csv_path, json_path


def _records_to_state(topology, m, time, records, d):
    n_arms = Topology(topology).n_arms
    nodes = np.full((n_arms, m + 1, d), np.nan)
    for arm, node, coords in records:
        nodes[arm, node] = coords
    return state_from_nodes(topology, nodes, time=time)


def read_snapshot(path):
    """Load a snapshot written by :func:`write_snapshot` (CSV or JSON).

    Returns ``(state, eps)``; pins are taken from the recorded end nodes.
    """
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".json":
        doc = json.loads(text)
        d = doc["dimension"]
        records = [
            (r["arm_index"], r["node_index"], [r[c] for c in _COORDS[:d]]) for r in doc["nodes"]
        ]
        state = _records_to_state(doc["topology"], doc["m"], doc["time"], records, d)
        return state, doc["eps"]
    meta = {}
    lines = text.splitlines()
    body = []
    for line in lines:
        if line.startswith("#"):
            key, _, value = line[1:].strip().partition("=")
            meta[key] = value
        else:
            body.append(line)
    reader = csv.reader(body)
    header = next(reader)
    d = len(header) - 2
    records = [(int(r[0]), int(r[1]), [float(v) for v in r[2:]]) for r in reader if r]
    state = _records_to_state(meta["topology"], int(meta["m"]), float(meta["time"]), records, d)
    eps = float(meta["eps"]) if meta.get("eps") else None
    return state, eps


def trajectory_rows(trajectory):
    """One tuple per step in the column order of :data:`TRAJECTORY_COLUMNS`."""
    rows = []
    dissipation = 0.0
    for r in trajectory.reports:
        dissipation += r.displacement_sq / r.dt
        e = r.energy_after
        rows.append(
            (
                r.time,
                e.total,
                e.q_part,
                e.gravity_part,
                dissipation,
                r.min_sigma,
                r.max_stretch,
                r.junction_residual,
                r.newton_iters,
            )
        )
    return rows


def write_trajectory_csv(trajectory, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_to_text(trajectory_rows(trajectory), TRAJECTORY_COLUMNS))
    return path


def write_long_csv(trajectory, path):
    """Plot-ready long format: ``t, series_name, value``."""
    rows = []
    for row in trajectory_rows(trajectory):
        t = row[0]
        for name, value in zip(TRAJECTORY_COLUMNS[1:], row[1:]):
            rows.append((t, name, value))
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("t", "series_name", "value"))
    for t, name, value in rows:
        writer.writerow((fmt(t), name, fmt(value)))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(buf.getvalue())
    return path


def write_tension_csv(sigma, path):
    """Nodal tension keyed by ``(arm_index, node_index)``."""
    sigma = np.asarray(sigma)
    rows = ((i, j, sigma[i, j]) for i in range(sigma.shape[0]) for j in range(sigma.shape[1]))
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(_to_text(rows, ("arm_index", "node_index", "sigma")))
    return path


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonable(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if np.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(doc, path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(_jsonable(doc), indent=2, sort_keys=True) + "\n")
    return path
