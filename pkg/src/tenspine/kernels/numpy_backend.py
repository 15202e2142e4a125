"""Pure-numpy fallback for the relaxation inner loop.

Mirrors the numba backend step for step; kept vectorised so the fallback
stays usable for tests and small models.
"""

import numpy as np

STATUS_CONVERGED = 0
STATUS_STEP_LIMIT = 1
STATUS_DIVERGED = 2

_DIVERGE_LIMIT = 1e14


def run_relax(X, V, src, dst, tension_only, ks, L0, free, minv, fext,
              tpath, toff, tk, trest, tatten,
              dt, damping, max_steps, tol_force, tol_vel, check_every,
              member_force, tendon_tension):
    """Advance the network in place; returns (status, steps, resid, vmax)."""
    nt = len(toff) - 1
    clamp = tension_only.astype(bool)
    seg_a = []
    seg_b = []
    seg_att = []
    seg_of = [0]
    for t in range(nt):
        i0, i1 = toff[t], toff[t + 1]
        seg_a.append(tpath[i0:i1 - 1])
        seg_b.append(tpath[i0 + 1:i1])
        seg_att.append(tatten[i0:i1 - 1])
        seg_of.append(seg_of[-1] + (i1 - 1 - i0))
    freev = free.astype(bool)
    rmax = np.inf
    vmax = np.inf
    step = 0
    while step < max_steps:
        step += 1
        F = fext.copy()
        d = X[dst] - X[src]
        L = np.sqrt((d * d).sum(axis=1))
        safe = L > 1e-12
        f = np.where(safe, ks * (L - L0), 0.0)
        f[clamp & (f < 0.0)] = 0.0
        member_force[:] = f
        s = np.where(safe, f / np.where(safe, L, 1.0), 0.0)
        fv = s[:, None] * d
        np.add.at(F, src, fv)
        np.add.at(F, dst, -fv)
        for t in range(nt):
            a, b, att = seg_a[t], seg_b[t], seg_att[t]
            sd = X[b] - X[a]
            sL = np.sqrt((sd * sd).sum(axis=1))
            T = tk[t] * (sL.sum() - trest[t])
            T = max(T, 0.0)
            tendon_tension[t] = T
            if T > 0.0:
                ssafe = sL > 1e-12
                sw = np.where(ssafe, T * att / np.where(ssafe, sL, 1.0), 0.0)
                sv = sw[:, None] * sd
                np.add.at(F, a, sv)
                np.add.at(F, b, -sv)
        V[freev] = (1.0 - damping) * V[freev] + dt * F[freev] * minv[freev, None]
        X[freev] += dt * V[freev]
        if step % check_every == 0 or step == max_steps:
            Ff = np.abs(F[freev])
            rmax = Ff.max() if Ff.size else 0.0
            Vf = np.abs(V[freev])
            vmax = Vf.max() if Vf.size else 0.0
            if not np.isfinite(rmax) or rmax > _DIVERGE_LIMIT:
                return STATUS_DIVERGED, step, rmax, vmax
            if rmax < tol_force and vmax < tol_vel:
                return STATUS_CONVERGED, step, rmax, vmax
    if not np.isfinite(rmax) or rmax > _DIVERGE_LIMIT:
        return STATUS_DIVERGED, step, rmax, vmax
    return STATUS_STEP_LIMIT, step, rmax, vmax
