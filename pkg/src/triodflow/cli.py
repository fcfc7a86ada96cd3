"""Command-line entry point: ``triodflow {simulate,sweep,steady,tension-bvp,catenary}``.

Every subcommand reads ``--config <path>`` and accepts the overrides
``--eps``, ``--m``, ``--dt``, ``--t-end`` and ``--out``. Exit status is 0 on
success, 2 for invalid input, 3 when a solver fails.
"""

import argparse
from dataclasses import replace
import json
import logging
from pathlib import Path
import sys

import numpy as np

from . import io as tio
from .diagnostics import edge_fields
from .errors import (
    GeometryTooSlack,
    InvalidPins,
    OracleNotConverged,
    ParseError,
    RootNotConverged,
    RunAborted,
    ShapeMismatch,
    StepNotConverged,
    ValidationError,
)
from .evolve import run_flow, steady_detect
from .experiments import (
    catenary_oracle,
    epsilon_sweep,
    export_series,
    fit_catenary,
    initial_state,
    load_config,
    polyline_distance,
)
from .network import Topology
from .tension_bvp import edge_to_nodes, projected_gravity, solve_tension_bvp

EXIT_OK, EXIT_INVALID, EXIT_SOLVER = 0, 2, 3

logger = logging.getLogger("triodflow")


def _config(args):
    cfg = load_config(args.config)
    updates = {}
    if args.eps is not None:
        updates["eps"] = tuple(float(v) for v in args.eps.split(","))
    for name in ("m", "dt", "t_end", "out"):
        value = getattr(args, name)
        if value is not None:
            updates[name] = value
    return replace(cfg, **updates).validate() if updates else cfg


def _out_dir(cfg, default):
    return Path(cfg.out) if cfg.out else Path(default)


def _print(doc):
    print(json.dumps(tio._jsonable(doc), indent=2, sort_keys=True))


def cmd_simulate(cfg):
    p = cfg.regularization()
    traj = run_flow(initial_state(cfg), p, cfg.gravity, cfg.step_params(), cfg.t_end, cfg.record_every)
    out = _out_dir(cfg, "triodflow_simulate")
    export_series(traj, out, p, cfg.gravity, summary={"command": "simulate"})
    _print({"out": str(out), "steps": len(traj.reports), "final_time": traj.final.time})


def cmd_steady(cfg):
    p = cfg.regularization()
    traj = run_flow(
        initial_state(cfg), p, cfg.gravity, cfg.step_params(), cfg.t_end, cfg.record_every,
        vel_tol=cfg.vel_tol,
    )
    t_steady = steady_detect(traj, cfg.vel_tol)
    out = _out_dir(cfg, "triodflow_steady")
    summary = {"command": "steady", "steady_time": t_steady, "vel_tol": cfg.vel_tol}
    if cfg.topology is Topology.CORD:
        oracle = catenary_oracle(cfg.pins[0], cfg.pins[1], 1.0, cfg.gravity, samples=4 * cfg.m)
        summary["max_catenary_distance"] = float(np.max(polyline_distance(traj.final.nodes[0], oracle)))
    export_series(traj, out, p, cfg.gravity, summary=summary)
    _print({"out": str(out), **summary})
    return traj


def cmd_sweep(cfg):
    table = epsilon_sweep(cfg)
    out = _out_dir(cfg, "triodflow_sweep")
    for eps, traj in table.trajectories.items():
        export_series(
            traj, out / f"eps_{eps:g}", cfg.regularization(eps), cfg.gravity, snapshots=False
        )
    records = table.as_records()
    header = list(records[0].keys()) if records else []
    rows = [[r[k] for k in header] for r in records]
    lines = [",".join(header)] + [
        ",".join("" if v is None else (v if isinstance(v, str) else tio.fmt(v)) for v in row)
        for row in rows
    ]
    out.mkdir(parents=True, exist_ok=True)
    (out / "sweep.csv").write_text("\n".join(lines) + "\n")
    tio.write_json({"command": "sweep", "rows": records}, out / "sweep.json")
    _print({"out": str(out), "rows": records})
    return 0 if all(r.error is None for r in table.rows) else EXIT_SOLVER


def cmd_tension_bvp(cfg, snapshot=None):
    if snapshot:
        state, eps = tio.read_snapshot(snapshot)
        p = cfg.regularization(eps) if eps else cfg.regularization()
    else:
        p = cfg.regularization()
        traj = run_flow(
            initial_state(cfg), p, cfg.gravity, cfg.step_params(), cfg.t_end,
            record_every=10**9, vel_tol=cfg.vel_tol,
        )
        state = traj.final
    ts = solve_tension_bvp(state, cfg.geometry_tol, cfg.gravity)
    flow_sigma = edge_to_nodes(edge_fields(state, p).sigma)
    rel = float(np.linalg.norm(ts.sigma - flow_sigma) / np.linalg.norm(flow_sigma))
    field, defect = projected_gravity(state, ts, cfg.gravity)
    out = _out_dir(cfg, "triodflow_tension")
    tio.write_tension_csv(ts.sigma, out / "tension_bvp.csv")
    tio.write_tension_csv(flow_sigma, out / "tension_flow.csv")
    doc = {
        "command": "tension-bvp",
        "time": state.time,
        "residual_norm": ts.residual_norm,
        "ode_residual_norm": ts.ode_residual_norm,
        "relative_l2_vs_flow": rel,
        "max_projected_gravity": float(np.max(np.linalg.norm(field, axis=-1))),
        "tangency_defect": defect,
    }
    tio.write_json(doc, out / "report.json")
    _print({"out": str(out), **doc})


def cmd_catenary(cfg):
    if cfg.topology is not Topology.CORD:
        raise ValidationError("the catenary oracle applies to a cord configuration")
    samples = max(1000, 4 * cfg.m)
    pts = catenary_oracle(cfg.pins[0], cfg.pins[1], 1.0, cfg.gravity, samples=samples)
    fit = fit_catenary(cfg.pins[0], cfg.pins[1], 1.0, cfg.gravity)
    out = _out_dir(cfg, "triodflow_catenary")
    out.mkdir(parents=True, exist_ok=True)
    header = ["index", *("x", "y", "z")[: pts.shape[1]]]
    lines = [",".join(header)] + [
        ",".join([str(k), *(tio.fmt(c) for c in pt)]) for k, pt in enumerate(pts)
    ]
    (out / "catenary.csv").write_text("\n".join(lines) + "\n")
    doc = {"command": "catenary", "a": fit.a, "u1": fit.u1, "u2": fit.u2, "sag": fit.sag}
    tio.write_json(doc, out / "catenary.json")
    _print({"out": str(out), **doc})


def build_parser():
    parser = argparse.ArgumentParser(prog="triodflow", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in ("simulate", "sweep", "steady", "tension-bvp", "catenary"):
        sp = sub.add_parser(name)
        sp.add_argument("--config", required=True, help="key = value configuration file")
        sp.add_argument("--eps", help="eps value or comma-separated sweep list")
        sp.add_argument("--m", type=int)
        sp.add_argument("--dt", type=float)
        sp.add_argument("--t-end", dest="t_end", type=float)
        sp.add_argument("--out")
        if name == "tension-bvp":
            sp.add_argument("--snapshot", help="snapshot CSV/JSON to analyse instead of running")
    return parser


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        cfg = _config(args)
        if args.command == "simulate":
            cmd_simulate(cfg)
        elif args.command == "steady":
            cmd_steady(cfg)
        elif args.command == "sweep":
            return cmd_sweep(cfg)
        elif args.command == "tension-bvp":
            cmd_tension_bvp(cfg, args.snapshot)
        elif args.command == "catenary":
            cmd_catenary(cfg)
    except (ParseError, ValidationError, InvalidPins, ShapeMismatch, FileNotFoundError) as exc:
        print(f"triodflow: invalid input: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except (
        RunAborted, StepNotConverged, RootNotConverged, OracleNotConverged, GeometryTooSlack
    ) as exc:
        print(f"triodflow: solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
