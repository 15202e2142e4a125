import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import tenspine as ts


def test_capstan_frictionless_is_identity():
    assert ts.capstan_attenuate(12.5, 0.0, math.pi) == 12.5


def test_capstan_zero_wrap_is_identity():
    assert ts.capstan_attenuate(7.0, 0.35, 0.0) == 7.0


def test_capstan_reference_value():
    # mu = 0.2, wrap = pi: 10 * exp(-0.628318...) = 5.334880
    out = ts.capstan_attenuate(10.0, 0.2, math.pi)
    assert out == pytest.approx(10.0 * math.exp(-0.2 * math.pi), rel=1e-12)
    assert out == pytest.approx(5.33488, abs=5e-5)


def test_capstan_rejects_negative_tension():
    with pytest.raises(ts.ParameterError):
        ts.capstan_attenuate(-1.0, 0.1, 1.0)


@settings(max_examples=50, deadline=None)
@given(t=st.floats(0, 1e6), mu=st.floats(0, 2), wrap=st.floats(0, 2 * math.pi))
def test_capstan_never_amplifies(t, mu, wrap):
    assert ts.capstan_attenuate(t, mu, wrap) <= t


def test_decay_zero_elapsed_identity(desk_rig):
    state = desk_rig.rest_state()
    deg = ts.DegradationState(elapsed=0.0, decay_rate=0.2)
    out = ts.apply_prestress_decay(desk_rig, state, deg)
    assert out is state


def test_decay_zero_rate_identity(desk_rig):
    state = desk_rig.rest_state()
    deg = ts.DegradationState(elapsed=100.0, decay_rate=0.0)
    out = ts.apply_prestress_decay(desk_rig, state, deg)
    assert out is state


def test_decay_one_time_constant(desk_rig):
    state = desk_rig.rest_state()
    deg = ts.DegradationState(elapsed=4.0, decay_rate=0.25)
    out = ts.apply_prestress_decay(desk_rig, state, deg)
    assert out.prestress_scale == pytest.approx(math.exp(-1.0), rel=1e-12)
    assert out.prestress_scale == pytest.approx(0.36788, abs=5e-6)
    # prestress scaling preserves the form-found geometry
    assert np.abs(out.coords - desk_rig.rest_coords).max() < 1e-5


def test_decay_semigroup(desk_rig):
    state = desk_rig.rest_state()
    whole = ts.apply_prestress_decay(
        desk_rig, state, ts.DegradationState(elapsed=6.0, decay_rate=0.1))
    half = ts.apply_prestress_decay(
        desk_rig, state, ts.DegradationState(elapsed=3.0, decay_rate=0.1))
    twice = ts.apply_prestress_decay(
        desk_rig, half, ts.DegradationState(elapsed=3.0, decay_rate=0.1))
    assert twice.prestress_scale == pytest.approx(whole.prestress_scale,
                                                  rel=1e-12)


def test_decay_monotone_displacement(desk_rig):
    """Older structure (lower prestress) deflects at least as much."""
    command = ts.ActuationCommand(delta_l=(-35.0, 10.0, 10.0))
    params = ts.RelaxParams(tol=1e-9, max_steps=1_500_000)
    disps = []
    for elapsed in (0.0, 5.0, 12.0):
        deg = ts.DegradationState(elapsed=elapsed, decay_rate=0.1)
        aged = ts.apply_prestress_decay(desk_rig, desk_rig.rest_state(), deg)
        cmd = ts.ActuationCommand(delta_l=command.delta_l,
                                  stiffness=aged.prestress_scale)
        st = ts.settle(desk_rig, cmd, params=params)
        disps.append(float(np.linalg.norm(desk_rig.tip(st.coords)
                                          - desk_rig.rest_tip())))
    assert disps[0] <= disps[1] <= disps[2]


def test_degradation_state_validation():
    with pytest.raises(ts.ParameterError):
        ts.DegradationState(decay_rate=-0.1)
    with pytest.raises(ts.ParameterError):
        ts.DegradationState(friction_mu=-1.0)
    with pytest.raises(ts.ParameterError):
        ts.DegradationState(wrap_angles={ts.NodeId("A", 0, 0): 7.0})
