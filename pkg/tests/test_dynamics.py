import math

import numpy as np
import pytest

import tenspine as ts
from tenspine.dynamics import Rig

TIGHT = ts.RelaxParams(tol=1e-9, max_steps=1_500_000)


def tip_displacement(rig, command, state=None):
    st = ts.settle(rig, command, state=state, params=TIGHT)
    return rig.tip(st.coords) - rig.rest_tip(), st


def test_zero_actuation_is_fixed_point(desk_rig):
    states = ts.relax_dynamics(desk_rig, None, ts.ActuationCommand(),
                               params=TIGHT)
    final = states[-1]
    assert final.converged
    assert np.abs(final.coords - desk_rig.rest_coords).max() < 1e-6


def test_uniform_shortening_contracts(desk_rig):
    axis = desk_rig.axis_unit()
    pc = desk_rig.platform_center()
    rest_extent = float((desk_rig.rest_tip() - pc) @ axis)
    st = ts.settle(desk_rig, ts.ActuationCommand(delta_l=(-30, -30, -30)),
                   params=TIGHT)
    extent = float((desk_rig.tip(st.coords) - pc) @ axis)
    assert extent < rest_extent


def test_single_tendon_pull_bends_toward_tendon(desk_rig):
    disp, _ = tip_displacement(
        desk_rig, ts.ActuationCommand(delta_l=(-30, 0, 0)))
    lateral = math.hypot(disp[0], disp[1])
    assert lateral > 1.0
    azimuth = math.atan2(disp[1], disp[0])
    assert abs(azimuth) <= math.radians(30.0)


def test_cyclic_equivariance_of_plant(desk_rig):
    d1, _ = tip_displacement(desk_rig, ts.ActuationCommand(delta_l=(-25, 5, 20)))
    d2, _ = tip_displacement(desk_rig, ts.ActuationCommand(delta_l=(20, -25, 5)))
    rot = 2.0 * math.pi / 3.0
    R = np.array([[math.cos(rot), -math.sin(rot), 0.0],
                  [math.sin(rot), math.cos(rot), 0.0],
                  [0.0, 0.0, 1.0]])
    scale = max(np.linalg.norm(d1), 1.0)
    assert np.linalg.norm(R @ d1 - d2) / scale < 1e-6


def test_full_system_mirror_symmetry(desk_rig):
    """Reflecting structure and command together reflects the tip."""
    mirrored = Rig(model=desk_rig.model, materials=desk_rig.materials,
                   anchors=desk_rig.anchors,
                   rest_coords=desk_rig.rest_coords * np.array([1.0, -1.0, 1.0]),
                   rest_forces=desk_rig.rest_forces.copy(),
                   brace_pairs=desk_rig.brace_pairs.copy(),
                   tendon_paths=[p.copy() for p in desk_rig.tendon_paths],
                   brace_forces=desk_rig.brace_forces.copy())
    command = ts.ActuationCommand(delta_l=(-28, 11, 6))
    d, _ = tip_displacement(desk_rig, command)
    dm, _ = tip_displacement(mirrored, command)
    scale = max(np.linalg.norm(d), 1.0)
    assert np.linalg.norm(d * np.array([1.0, -1.0, 1.0]) - dm) / scale < 1e-6


def test_tension_only_and_strut_signs(desk_rig):
    for delta in ((-40, 0, 0), (-30, -30, -30), (10, -40, 10), (0, 0, 0)):
        st = ts.settle(desk_rig, ts.ActuationCommand(delta_l=delta),
                       params=TIGHT)
        for mb, force in zip(st.members, st.member_forces):
            if mb.is_cable:
                assert force >= 0.0
            else:
                assert force <= 0.0


def test_slack_cables_report_exactly_zero(desk_rig):
    st = ts.settle(desk_rig,
                   ts.ActuationCommand(delta_l=(-50, -50, 30),
                                       stiffness=0.05), params=TIGHT)
    cables = [f for mb, f in zip(st.members, st.member_forces) if mb.is_cable]
    slack = [f for f in cables if f < 1e-12]
    assert all(f == 0.0 for f in slack)


def test_prestress_monotonicity(desk_rig):
    command_deltas = (-35.0, 10.0, 10.0)
    disps = []
    for scale in (0.3, 0.65, 1.0):
        d, _ = tip_displacement(
            desk_rig, ts.ActuationCommand(delta_l=command_deltas,
                                          stiffness=scale))
        disps.append(np.linalg.norm(d))
    assert disps[0] >= disps[1] >= disps[2]


def test_friction_monotonicity(desk_rig):
    disps = []
    for mu in (0.0, 0.15, 0.3):
        deg = ts.DegradationState(friction_mu=mu, default_wrap=0.4)
        st = ts.settle(desk_rig, ts.ActuationCommand(delta_l=(-35, 0, 0)),
                       params=TIGHT, degradation=deg)
        disps.append(np.linalg.norm(desk_rig.tip(st.coords)
                                    - desk_rig.rest_tip()))
    assert disps[0] >= disps[1] >= disps[2]
    assert disps[2] < disps[0]


def test_strut_rigidity_under_load(desk_rig):
    st = ts.settle(desk_rig, ts.ActuationCommand(delta_l=(-50, 0, 0)),
                   params=TIGHT)
    pairs = desk_rig.model.member_index_pairs()
    rest_len = np.linalg.norm(
        desk_rig.rest_coords[pairs[:, 1]] - desk_rig.rest_coords[pairs[:, 0]],
        axis=1)
    cur_len = np.linalg.norm(
        st.coords[pairs[:, 1]] - st.coords[pairs[:, 0]], axis=1)
    for mb, l0, l1 in zip(desk_rig.model.members, rest_len, cur_len):
        if not mb.is_cable:
            assert abs(l1 - l0) / l0 < 1e-3


def test_snapshot_trajectory(desk_rig):
    params = ts.RelaxParams(tol=1e-8, snapshot_every=2000, max_steps=400_000)
    states = ts.relax_dynamics(desk_rig, None,
                               ts.ActuationCommand(delta_l=(-20, 0, 0)),
                               params=params)
    assert len(states) > 1
    assert states[-1].converged
    assert not states[0].converged


def test_integration_error_reports_last_stable_step(desk_rig):
    params = ts.RelaxParams(dt=50.0, damping=0.001, mass_mode="physical",
                            max_steps=200_000, check_every=10)
    with pytest.raises(ts.IntegrationError, match="smaller dt") as err:
        ts.relax_dynamics(desk_rig, None,
                          ts.ActuationCommand(delta_l=(-30, 0, 0)),
                          params=params)
    assert err.value.last_stable_step >= 0


def test_physical_mass_mode_converges(small_rig):
    params = ts.RelaxParams(mass_mode="physical", tol=1e-7,
                            max_steps=3_000_000, damping=0.02)
    states = ts.relax_dynamics(small_rig, None, ts.ActuationCommand(),
                               params=params)
    assert states[-1].converged
    assert np.abs(states[-1].coords - small_rig.rest_coords).max() < 1e-3


def test_stroke_limit_enforced(desk_rig):
    with pytest.raises(ts.ParameterError, match="stroke"):
        ts.settle(desk_rig, ts.ActuationCommand(delta_l=(-100, 0, 0)))


def test_formfind_rest_state_is_taut(desk_rig):
    state = desk_rig.rest_state()
    cables = [f for mb, f in zip(state.members, state.member_forces)
              if mb.is_cable]
    struts = [f for mb, f in zip(state.members, state.member_forces)
              if not mb.is_cable]
    assert min(cables) > 0.0
    assert max(struts) < 0.0
    assert desk_rig.formfind_converged
