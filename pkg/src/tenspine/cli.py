"""Command-line entry points.

Subcommands: generate, formfind, simulate, sweep, strainmap, explore, serve.
Failures print a machine-readable JSON object on stderr and exit 1; usage
errors exit 2.
"""

from __future__ import annotations

import argparse
import json
import math
import os
import sys

import numpy as np

from . import analysis, modelio
from .control import ControlGeometry, lengths_to_angles
from .dynamics import form_find
from .environment import Environment, SphereObstacle
from .errors import ParameterError, TenspineError
from .fdm import ForceDensitySet
from .materials import Materials
from .plant import run_script
from .topology import TopologyParams, generate_topology, validate_topology

DEFAULT_PORT = 8733


def _materials_from_args(args) -> Materials:
    kwargs = {}
    for name in ("cable_stiffness", "strut_stiffness", "tendon_stiffness",
                 "winder_radius", "stroke_limit", "prestress_stretch",
                 "prestress_high", "prestress_low"):
        value = getattr(args, name, None)
        if value is not None:
            kwargs[name] = value
    return Materials(**kwargs)


def _add_material_args(p):
    p.add_argument("--cable-stiffness", type=float, dest="cable_stiffness")
    p.add_argument("--strut-stiffness", type=float, dest="strut_stiffness")
    p.add_argument("--tendon-stiffness", type=float, dest="tendon_stiffness")
    p.add_argument("--winder-radius", type=float, dest="winder_radius")
    p.add_argument("--stroke-limit", type=float, dest="stroke_limit")
    p.add_argument("--prestress-stretch", type=float, dest="prestress_stretch")
    p.add_argument("--prestress-high", type=float, dest="prestress_high")
    p.add_argument("--prestress-low", type=float, dest="prestress_low")


def _load_rig(path):
    bundle = modelio.load_model(path)
    if bundle.rig is None:
        raise ParameterError(
            f"model file {path} carries no form-found rig; run "
            "`tenspine formfind` first")
    return bundle


def _stiffness_arg(value: str):
    if value in ("high", "low"):
        return value
    try:
        return float(value)
    except ValueError:
        raise argparse.ArgumentTypeError(
            f"stiffness must be high, low, or a number, got {value!r}")


def cmd_generate(args) -> int:
    params = TopologyParams(n=args.n, m=args.m, unit_height=args.unit_height,
                            base_radius=args.base_radius, twist=args.twist)
    model = generate_topology(params)
    report = validate_topology(model)
    if not report.ok:
        raise ParameterError("generated model failed validation: "
                             + "; ".join(report.violations))
    materials = _materials_from_args(args)
    q = ForceDensitySet.uniform(model)
    modelio.save_model(args.output, model, materials, q=q)
    print(f"wrote {args.output}: n={params.n} m={params.m} "
          f"nodes={model.node_count} members={len(model.members)}")
    return 0


def cmd_formfind(args) -> int:
    bundle = modelio.load_model(args.input)
    rig = form_find(bundle.model, bundle.materials)
    state = rig.rest_state()
    q = None
    from .dynamics import force_density_set
    q = force_density_set(rig)
    modelio.save_model(args.output, bundle.model, bundle.materials, q=q,
                       rig=rig, state=state)
    forces = rig.rest_forces
    cables = [f for f, mb in zip(forces, rig.model.members) if mb.is_cable]
    print(f"wrote {args.output}: converged={rig.formfind_converged} "
          f"cable force range [{min(cables):.3g}, {max(cables):.3g}]")
    return 0


def _trajectory_rows(results, rig):
    rows = []
    r = rig.materials.winder_radius
    fmt = modelio.fmt
    for res in results:
        theta = lengths_to_angles(res.delta_l, r).theta
        rows.append([fmt(res.time), *[fmt(v) for v in res.tip],
                     *[fmt(v) for v in res.delta_l],
                     *[fmt(v) for v in theta],
                     *[fmt(v) for v in res.strains],
                     fmt(res.stiffness_scale), fmt(res.residual)])
    return rows


def cmd_simulate(args) -> int:
    bundle = _load_rig(args.input)
    ticks, entries = modelio.load_script(args.script) if args.script else (0, [])
    if args.ticks is not None:
        ticks = args.ticks
    results, session = run_script(bundle.rig, ticks, entries,
                                  substeps=args.substeps)
    modelio.write_trajectory_csv(args.output, _trajectory_rows(results,
                                                               bundle.rig))
    if args.obj_dir:
        os.makedirs(args.obj_dir, exist_ok=True)
        for tick, coords in session.snapshots.items():
            modelio.export_obj(
                os.path.join(args.obj_dir, f"tick_{tick:05d}.obj"),
                bundle.rig.model, coords)
        modelio.export_obj(os.path.join(args.obj_dir, "final.obj"),
                           bundle.rig.model, session.coords)
    tip = session.tip()
    print(f"wrote {args.output}: {len(results)} rows, final tip "
          f"({tip[0]:.4f}, {tip[1]:.4f}, {tip[2]:.4f})")
    return 0


def cmd_sweep(args) -> int:
    bundle = _load_rig(args.input)
    grid = analysis.default_actuation_grid(
        bundle.rig.materials.stroke_limit, args.points)
    metrics = analysis.sweep_workspace(bundle.rig, args.stiffness, grid)
    modelio.write_metrics_csv(args.output, [metrics])
    print(f"wrote {args.output}: D={metrics.accessible_distance:.4f} "
          f"R={metrics.working_radius:.4f} "
          f"theta={math.degrees(metrics.reach_angle):.2f}deg "
          f"converged {metrics.converged}/{metrics.samples}")
    return 0


def cmd_strainmap(args) -> int:
    bundle = _load_rig(args.input)
    geometry = ControlGeometry.from_rig(bundle.rig)
    max_beta = min(geometry.bend_limit,
                   0.9 * bundle.rig.materials.stroke_limit
                   / geometry.pitch_radius)
    grid = analysis.default_pose_grid(max_beta, args.alpha_count,
                                      args.beta_count)
    samples = analysis.strain_map(bundle.rig, grid, args.stiffness, geometry)
    modelio.write_strain_csv(args.output, samples)
    print(f"wrote {args.output}: {len(samples)} samples")
    return 0


def _parse_sphere(spec: str) -> SphereObstacle:
    parts = [float(v) for v in spec.split(",")]
    if len(parts) not in (4, 5):
        raise argparse.ArgumentTypeError(
            "sphere spec must be x,y,z,radius[,thermal]")
    thermal = parts[4] if len(parts) == 5 else 1.0
    return SphereObstacle((parts[0], parts[1], parts[2]), parts[3], thermal)


def cmd_explore(args) -> int:
    bundle = _load_rig(args.input)
    env = Environment(list(args.sphere or []))
    geometry = ControlGeometry.from_rig(bundle.rig)
    max_beta = min(geometry.bend_limit,
                   0.9 * bundle.rig.materials.stroke_limit
                   / geometry.pitch_radius)
    poses = [(2.0 * math.pi * k / args.steps, max_beta * 0.8)
             for k in range(args.steps)]
    log = analysis.run_exploration(bundle.rig, env, poses, geometry,
                                   safety_threshold=args.safety_threshold)
    cmap = analysis.build_configuration_map(log, args.cell_size,
                                            args.safety_threshold)
    modelio.save_exploration_log(args.log_output, log)
    modelio.save_configuration_map(args.map_output, cmap)
    counts = cmap.counts()
    print(f"wrote {args.log_output} ({len(log.entries)} entries) and "
          f"{args.map_output} ({counts})")
    return 0


def cmd_serve(args) -> int:
    import uvicorn

    from .service import create_app

    bundle = _load_rig(args.input)
    env = Environment(list(args.sphere or []))
    app = create_app(bundle.rig, env=env, tick_hz=args.tick_hz,
                     substeps=args.substeps, record_path=args.record)
    port = args.port or int(os.environ.get("TENSPINE_PORT", DEFAULT_PORT))
    print(f"serving on port {port} (role=writer to command)")
    uvicorn.run(app, host=args.host, port=port, log_level="warning")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="tenspine",
        description="Spine-like tensegrity robot: modeling, simulation, control")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("generate", help="generate a parametric structure")
    p.add_argument("-n", type=int, default=3, help="polygon order (odd >= 3)")
    p.add_argument("-m", type=int, default=6, help="layer count (3p + 3)")
    p.add_argument("--unit-height", type=float, default=80.0)
    p.add_argument("--base-radius", type=float, default=60.0)
    p.add_argument("--twist", type=float, default=None)
    p.add_argument("-o", "--output", required=True)
    _add_material_args(p)
    p.set_defaults(func=cmd_generate)

    p = sub.add_parser("formfind", help="solve the prestressed equilibrium")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_formfind)

    p = sub.add_parser("simulate", help="replay an actuation script")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--script", default=None)
    p.add_argument("--ticks", type=int, default=None)
    p.add_argument("--substeps", type=int, default=600)
    p.add_argument("--obj-dir", default=None)
    p.add_argument("-o", "--output", required=True, help="trajectory CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("sweep", help="workspace metrics over a command grid")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--stiffness", type=_stiffness_arg, default="high")
    p.add_argument("--points", type=int, default=5, help="grid points per axis")
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("strainmap", help="strain-by-configuration table")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--stiffness", type=_stiffness_arg, default="high")
    p.add_argument("--alpha-count", type=int, default=13)
    p.add_argument("--beta-count", type=int, default=7)
    p.add_argument("-o", "--output", required=True)
    p.set_defaults(func=cmd_strainmap)

    p = sub.add_parser("explore", help="scripted spatial exploration")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--sphere", type=_parse_sphere, action="append",
                   help="obstacle x,y,z,radius[,thermal]; repeatable")
    p.add_argument("--steps", type=int, default=24)
    p.add_argument("--cell-size", type=float, default=40.0)
    p.add_argument("--safety-threshold", type=float, default=50.0)
    p.add_argument("--log-output", required=True)
    p.add_argument("--map-output", required=True)
    p.set_defaults(func=cmd_explore)

    p = sub.add_parser("serve", help="start the live-control session service")
    p.add_argument("-i", "--input", required=True)
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=None,
                   help=f"default from TENSPINE_PORT or {DEFAULT_PORT}")
    p.add_argument("--tick-hz", type=float, default=30.0)
    p.add_argument("--substeps", type=int, default=600)
    p.add_argument("--record", default=None,
                   help="write the applied-command script here on shutdown")
    p.add_argument("--sphere", type=_parse_sphere, action="append")
    p.set_defaults(func=cmd_serve)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except TenspineError as exc:
        json.dump({"error": type(exc).__name__, "message": str(exc)},
                  sys.stderr)
        sys.stderr.write("\n")
        return 1


if __name__ == "__main__":
    sys.exit(main())
