import numpy as np
import pytest

import tenspine as ts
from tenspine.kernels import load_backend


def _arrays(rig, delta_l=(-20.0, 5.0, 5.0)):
    src, dst, tension_only, ks, L0 = rig.spring_arrays(1.0)
    tendons = rig.tendon_arrays(delta_l)
    from tenspine.dynamics import _preconditioned_minv
    minv = _preconditioned_minv(rig.model.node_count, src, dst, ks, tendons,
                                1.0)
    fext = np.zeros((rig.model.node_count, 3))
    free = ~rig._fixed
    return src, dst, tension_only, ks, L0, free, minv, fext, tendons


@pytest.mark.parametrize("steps", [250, 2000])
def test_backends_agree_step_for_step(desk_rig, steps):
    results = {}
    for name in ("numba", "numpy"):
        backend = load_backend(name)
        (src, dst, tension_only, ks, L0, free, minv, fext,
         tendons) = _arrays(desk_rig)
        X = desk_rig.rest_coords.copy()
        V = np.zeros_like(X)
        member_force = np.zeros(len(src))
        tendon_tension = np.zeros(3)
        status, done, resid, vmax = backend.run_relax(
            X, V, src, dst, tension_only.astype(np.bool_), ks, L0,
            free.astype(np.bool_), minv, fext, *tendons,
            1.0, 0.03, steps, 0.0, 0.0, 50, member_force, tendon_tension)
        results[name] = (X, V, member_force.copy(), tendon_tension.copy(),
                         done)
    Xa, Va, Fa, Ta, da = results["numba"]
    Xb, Vb, Fb, Tb, db = results["numpy"]
    assert da == db == steps
    assert np.allclose(Xa, Xb, rtol=0, atol=1e-9)
    assert np.allclose(Va, Vb, rtol=0, atol=1e-9)
    assert np.allclose(Fa, Fb, rtol=0, atol=1e-7)
    assert np.allclose(Ta, Tb, rtol=0, atol=1e-9)


def test_backends_same_converged_state(desk_rig):
    finals = {}
    for name in ("numba", "numpy"):
        backend = load_backend(name)
        (src, dst, tension_only, ks, L0, free, minv, fext,
         tendons) = _arrays(desk_rig)
        X = desk_rig.rest_coords.copy()
        V = np.zeros_like(X)
        member_force = np.zeros(len(src))
        tendon_tension = np.zeros(3)
        fscale = desk_rig.force_scale()
        status, done, resid, vmax = backend.run_relax(
            X, V, src, dst, tension_only.astype(np.bool_), ks, L0,
            free.astype(np.bool_), minv, fext, *tendons,
            1.0, 0.03, 500_000, 1e-7 * fscale, 1e10, 50, member_force,
            tendon_tension)
        assert status == 0
        finals[name] = X
    assert np.abs(finals["numba"] - finals["numpy"]).max() < 1e-6


def test_env_flag_selects_backend():
    import subprocess
    import sys
    code = ("import tenspine.kernels as k; print(k.backend_name)")
    out = subprocess.run([sys.executable, "-c", code],
                         env={"TENSPINE_KERNEL": "numpy", "PATH": "/usr/bin:/bin"},
                         capture_output=True, text=True)
    assert out.stdout.strip() == "numpy"


def test_divergence_status(desk_rig):
    backend = load_backend("numpy")
    (src, dst, tension_only, ks, L0, free, minv, fext,
     tendons) = _arrays(desk_rig)
    X = desk_rig.rest_coords.copy()
    V = np.zeros_like(X)
    member_force = np.zeros(len(src))
    tendon_tension = np.zeros(3)
    status, done, resid, vmax = backend.run_relax(
        X, V, src, dst, tension_only.astype(np.bool_), ks, L0,
        free.astype(np.bool_), minv * 1e9, fext, *tendons,
        1.0, 0.001, 20_000, 0.0, 0.0, 10, member_force, tendon_tension)
    assert status == 2
