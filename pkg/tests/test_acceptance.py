"""Acceptance criteria, one test per criterion, each printing PASS/FAIL.

Run with `pytest tests/test_acceptance.py -v -s` for the per-criterion lines.
"""

import csv
import json
import math
import time

import numpy as np
import pytest

import tenspine as ts
from tenspine import modelio
from tenspine.analysis import default_actuation_grid
from tenspine.cli import main as cli_main
from tenspine.control import (ControlGeometry, PoseConfig, calibrated_gain,
                              fk_constant_curvature, ik_constant_curvature,
                              step_closed_loop)
from tenspine.kernels import backend_name
from tenspine.topology import cable_count_formulas


def report(name: str, ok: bool, detail: str = ""):
    tag = "PASS" if ok else "FAIL"
    print(f"[{tag}] {name}" + (f" -- {detail}" if detail else ""))
    assert ok, f"{name}: {detail}"


MATRIX = [(n, 3 * p + 3) for n in (3, 5, 7, 9) for p in (0, 1, 2, 3)]


def test_topology_counts():
    t0 = time.perf_counter()
    ok = True
    for n, m in MATRIX:
        model = ts.generate_topology(ts.TopologyParams(n=n, m=m))
        got = {k: len(model.members_of_kind(k))
               for k in ("horizontal", "saddle", "vertical", "diagonal",
                         "strut")}
        ok = ok and got == cable_count_formulas(n, m)
    elapsed = time.perf_counter() - t0
    report("topology counts (16 models, < 1 s)", ok and elapsed < 1.0,
           f"elapsed {elapsed:.3f} s")


def test_equilibrium_residual():
    worst = 0.0
    for n, m in MATRIX:
        model = ts.generate_topology(ts.TopologyParams(n=n, m=m))
        q = ts.ForceDensitySet.uniform(model)
        state = ts.solve_force_density(model, q, ts.AnchorSet.base_ring(model))
        worst = max(worst, state.residual_rel)
    report("equilibrium relative residual < 1e-9", worst < 1e-9,
           f"worst {worst:.3e}")


def test_solver_cross_oracle():
    t0 = time.perf_counter()
    worst = 0.0
    for m in (3, 6):
        model = ts.generate_topology(ts.TopologyParams(n=3, m=m))
        q = ts.ForceDensitySet.uniform(model)
        anchors = ts.AnchorSet.base_ring(model)
        fdm = ts.solve_force_density(model, q, anchors)
        dr = ts.relax_force_density(model, q, anchors)
        assert dr.converged
        worst = max(worst, float(np.abs(fdm.coords - dr.coords).max()))
    elapsed = time.perf_counter() - t0
    tol = 1e-4 * 60.0
    report("solver cross-oracle within 1e-4 * base_radius, < 30 s",
           worst < tol and elapsed < 30.0,
           f"worst gap {worst:.3e} (tol {tol:.1e}), {elapsed:.1f} s")


def test_ik_fk_round_trip():
    geo = ControlGeometry(pitch_radius=40.0, arc_length=400.0)
    rng = np.random.default_rng(20240817)
    worst_pose = 0.0
    worst_sum = 0.0
    worst_cyc = 0.0
    for _ in range(1000):
        alpha = float(rng.uniform(0.0, 2.0 * math.pi))
        beta = float(rng.uniform(1e-6, geo.bend_limit))
        cmd = ik_constant_curvature((alpha, beta), geo)
        worst_sum = max(worst_sum, abs(sum(cmd.delta_l)))
        pose = fk_constant_curvature(cmd, geo)
        da = (pose.alpha - alpha + math.pi) % (2.0 * math.pi) - math.pi
        worst_pose = max(worst_pose, abs(da), abs(pose.beta - beta))
        rot = ik_constant_curvature((alpha + 2.0 * math.pi / 3.0, beta), geo)
        worst_cyc = max(
            worst_cyc,
            abs(rot.delta_l[1] - cmd.delta_l[0]),
            abs(rot.delta_l[2] - cmd.delta_l[1]),
            abs(rot.delta_l[0] - cmd.delta_l[2]))
    report("IK/FK round-trip 1000 poses < 1e-9", worst_pose < 1e-9,
           f"worst {worst_pose:.2e}")
    report("IK sum-zero < 1e-12", worst_sum < 1e-12, f"worst {worst_sum:.2e}")
    report("IK cyclic equivariance < 1e-12", worst_cyc < 1e-12,
           f"worst {worst_cyc:.2e}")


def test_arc_formula_and_strain():
    angles = ts.lengths_to_angles((10.0, 0.0, -10.0), 5.0)
    ok = angles.theta == (10.0 / 5.0, 0.0, -10.0 / 5.0)
    angles2 = ts.lengths_to_angles((31.4159, 31.4159, 31.4159), 10.0)
    ok = ok and angles2.theta == (31.4159 / 10.0,) * 3
    ok = ok and ts.lengths_to_angles((0.0, 0.0, 0.0), 2.0).theta == (0.0,) * 3
    strains = ts.tendon_strain((5.0, 0.0, -20.0), (100.0, 100.0, 200.0))
    ok = ok and strains == (5.0 / 100.0, 0.0, -20.0 / 200.0)
    report("arc formula theta = dL/r and strain eps = dL/L exact", ok)


@pytest.fixture(scope="module")
def desk(desk_rig):
    return desk_rig


def test_stiffness_ordering(desk_rig):
    t0 = time.perf_counter()
    high = ts.sweep_workspace(desk_rig, "high")
    low = ts.sweep_workspace(desk_rig, "low")
    elapsed = time.perf_counter() - t0
    margins = {
        "D": low.accessible_distance / high.accessible_distance,
        "R": low.working_radius / high.working_radius,
        "theta": low.reach_angle / high.reach_angle,
    }
    ok = (all(v >= 1.10 for v in margins.values())
          and high.valid and low.valid and elapsed < 120.0)
    report("stiffness ordering D/R/theta low > high by >= 10%", ok,
           ", ".join(f"{k} x{v:.3f}" for k, v in margins.items())
           + f", {elapsed:.0f} s [{backend_name}]")


def test_closed_loop_convergence(desk_rig):
    geo = ControlGeometry.from_rig(desk_rig)
    gain = calibrated_gain(desk_rig, geo)
    params = ts.RelaxParams(tol=1e-8, max_steps=800_000)
    waypoint_commands = [(-25.0, 10.0, 15.0), (0.0, -30.0, 10.0),
                         (20.0, 0.0, -20.0), (-10.0, -10.0, 20.0)]
    waypoints = []
    for dl in waypoint_commands:
        st = ts.settle(desk_rig, ts.ActuationCommand(delta_l=dl),
                       params=params)
        waypoints.append(tuple(desk_rig.tip(st.coords)))

    state = desk_rig.rest_state()
    last_command = ts.ActuationCommand()
    all_monotone = True
    steps_per_waypoint = 12
    for waypoint in waypoints:
        ctl = ts.ControllerState(geometry=geo, target=(waypoint,), gain=gain,
                                 waypoint_tol=1e-9, stroke_limit=60.0,
                                 last_command=last_command)
        errors = []
        for _ in range(steps_per_waypoint):
            pose_est = fk_constant_curvature(ctl.last_command, geo,
                                             warn_inconsistent=False)
            achieved = PoseConfig(pose_est.alpha, pose_est.beta,
                                  tip=tuple(desk_rig.tip(state.coords)))
            cmd, ctl = step_closed_loop(ctl, achieved)
            state = ts.settle(desk_rig, cmd, state=state, params=params)
            errors.append(float(np.linalg.norm(
                np.asarray(waypoint) - desk_rig.tip(state.coords))))
        first10 = errors[:10]
        monotone = all(b < a for a, b in zip(first10, first10[1:]))
        all_monotone = all_monotone and monotone
        last_command = ctl.last_command
    final_error = float(np.linalg.norm(
        np.asarray(waypoints[-1]) - desk_rig.tip(state.coords)))
    limit = 0.05 * desk_rig.model.params.base_radius
    report("closed-loop error monotone over first 10 steps per waypoint",
           all_monotone)
    report("closed-loop final error < 5% of base radius",
           final_error < limit, f"{final_error:.4f} < {limit:.2f}")


def test_degradation_identities_and_monotonicity(desk_rig):
    ok_mu = ts.capstan_attenuate(12.34, 0.0, 1.7) == 12.34
    ok_wrap = ts.capstan_attenuate(9.9, 0.5, 0.0) == 9.9
    state = desk_rig.rest_state()
    out = ts.apply_prestress_decay(
        desk_rig, state, ts.DegradationState(elapsed=0.0, decay_rate=0.3))
    ok_decay_identity = out is state
    report("degradation identities exact (mu = 0, elapsed = 0)",
           ok_mu and ok_wrap and ok_decay_identity)

    params = ts.RelaxParams(tol=1e-9, max_steps=1_000_000)
    delta = (-35.0, 10.0, 10.0)
    friction_disps = []
    for mu in (0.0, 0.2, 0.4):
        deg = ts.DegradationState(friction_mu=mu, default_wrap=0.4)
        st = ts.settle(desk_rig, ts.ActuationCommand(delta_l=delta),
                       params=params, degradation=deg)
        friction_disps.append(float(np.linalg.norm(
            desk_rig.tip(st.coords) - desk_rig.rest_tip())))
    ok_friction = (friction_disps[0] >= friction_disps[1]
                   >= friction_disps[2])

    decay_disps = []
    for elapsed in (0.0, 5.0, 15.0):
        deg = ts.DegradationState(elapsed=elapsed, decay_rate=0.08)
        aged = ts.apply_prestress_decay(desk_rig, desk_rig.rest_state(), deg)
        st = ts.settle(desk_rig,
                       ts.ActuationCommand(delta_l=delta,
                                           stiffness=aged.prestress_scale),
                       params=params)
        decay_disps.append(float(np.linalg.norm(
            desk_rig.tip(st.coords) - desk_rig.rest_tip())))
    ok_decay = decay_disps[0] <= decay_disps[1] <= decay_disps[2]
    report("friction monotonicity (3 levels)", ok_friction,
           " -> ".join(f"{d:.3f}" for d in friction_disps))
    report("prestress decay monotonicity (3 levels)", ok_decay,
           " -> ".join(f"{d:.3f}" for d in decay_disps))


def test_safety_compliance(desk_rig):
    geo = ControlGeometry.from_rig(desk_rig)
    tip0 = desk_rig.rest_tip()
    env = ts.Environment([ts.SphereObstacle(
        (tip0[0], tip0[1], tip0[2] - 70.0), 30.0, thermal=1.0)])
    params = ts.RelaxParams(tol=3e-7, max_steps=400_000)
    threshold = 60.0

    ctl = ts.ControllerState(
        geometry=geo, target=((tip0[0], tip0[1], tip0[2] - 50.0),),
        gain=calibrated_gain(desk_rig, geo), waypoint_tol=0.5,
        safety_threshold=threshold, stroke_limit=60.0)
    state = desk_rig.rest_state()
    violations = 0
    sub_threshold_seen = 0
    from tenspine.analysis import _tip_direction
    for _ in range(14):
        pose_est = fk_constant_curvature(ctl.last_command, geo,
                                         warn_inconsistent=False)
        tip = desk_rig.tip(state.coords)
        achieved = PoseConfig(pose_est.alpha, pose_est.beta, tip=tuple(tip))
        reading = ts.sense_infrared(
            env, achieved, _tip_direction(desk_rig, state.coords))
        cmd, ctl = step_closed_loop(ctl, achieved, reading)
        if reading.hit and reading.distance < threshold:
            sub_threshold_seen += 1
            if cmd.stiffness != "low":
                violations += 1
        state = ts.settle(desk_rig, cmd, state=state, params=params)
    report("safety compliance: sub-threshold readings -> low stiffness",
           sub_threshold_seen > 0 and violations == 0,
           f"{sub_threshold_seen} sub-threshold readings, "
           f"{violations} violations")


def test_replay_determinism(desk_rig, tmp_path):
    from fastapi.testclient import TestClient

    from tenspine.service import create_app

    substeps = 1200
    tick_hz = 60.0
    app = create_app(desk_rig, tick_hz=tick_hz, substeps=substeps)
    with TestClient(app) as client:
        with client.websocket_connect("/session?role=writer") as ws:
            def recv_update():
                while True:
                    msg = json.loads(ws.receive_text())
                    if msg["kind"] == "state_update":
                        return msg

            recv_update()
            ws.send_text(json.dumps({"kind": "command", "seq": 1, "payload":
                                     {"delta_l": [-22.0, 6.0, 6.0]}}))
            for _ in range(5):
                recv_update()
            ws.send_text(json.dumps({"kind": "command", "seq": 2, "payload":
                                     {"stiffness": "low"}}))
            for _ in range(5):
                recv_update()
        record = client.get("/record").json()
        live_doc = client.get("/model").json()
    live_coords = np.asarray(live_doc["state"]["coords"])
    live_tip = desk_rig.tip(live_coords)
    live_tick = live_doc["state"]["tick"]

    # persist the session script and replay through the batch CLI
    script_path = tmp_path / "session_script.json"
    entries = [(c["tick"], ts.ActuationCommand(delta_l=tuple(c["delta_l"]),
                                               stiffness=c["stiffness"]))
               for c in record["commands"]]
    modelio.save_script(script_path, entries, ticks=live_tick)
    model_path = tmp_path / "rigged.json"
    modelio.save_model(model_path, desk_rig.model, desk_rig.materials,
                       q=ts.force_density_set(desk_rig), rig=desk_rig)
    csv_path = tmp_path / "replay.csv"
    code = cli_main(["simulate", "-i", str(model_path), "--script",
                     str(script_path), "--substeps", str(substeps),
                     "-o", str(csv_path)])
    assert code == 0
    with open(csv_path) as fh:
        rows = list(csv.DictReader(fh))
    replay_tip = np.array([float(rows[-1]["tip_x"]),
                           float(rows[-1]["tip_y"]),
                           float(rows[-1]["tip_z"])])
    gap = float(np.abs(replay_tip - live_tip).max())
    report("replay determinism: simulate matches live session < 1e-9",
           gap < 1e-9, f"gap {gap:.2e}")
