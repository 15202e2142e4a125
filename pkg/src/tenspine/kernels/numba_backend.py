"""Numba-compiled inner loop for the spring-network relaxation."""

import numpy as np
from numba import njit

STATUS_CONVERGED = 0
STATUS_STEP_LIMIT = 1
STATUS_DIVERGED = 2

_DIVERGE_LIMIT = 1e14


@njit(cache=True)
def _relax_loop(X, V, src, dst, tension_only, ks, L0, free, minv, fext,
                tpath, toff, tk, trest, tatten,
                dt, damping, max_steps, tol_force, tol_vel, check_every,
                member_force, tendon_tension):
    nn = X.shape[0]
    nm = src.shape[0]
    nt = toff.shape[0] - 1
    F = np.zeros((nn, 3))
    rmax = 1e300
    vmax = 1e300
    step = 0
    while step < max_steps:
        step += 1
        for i in range(nn):
            F[i, 0] = fext[i, 0]
            F[i, 1] = fext[i, 1]
            F[i, 2] = fext[i, 2]
        for e in range(nm):
            a = src[e]
            b = dst[e]
            dx = X[b, 0] - X[a, 0]
            dy = X[b, 1] - X[a, 1]
            dz = X[b, 2] - X[a, 2]
            L = (dx * dx + dy * dy + dz * dz) ** 0.5
            if L < 1e-12:
                member_force[e] = 0.0
                continue
            f = ks[e] * (L - L0[e])
            if tension_only[e] and f < 0.0:
                f = 0.0
            member_force[e] = f
            s = f / L
            F[a, 0] += s * dx
            F[a, 1] += s * dy
            F[a, 2] += s * dz
            F[b, 0] -= s * dx
            F[b, 1] -= s * dy
            F[b, 2] -= s * dz
        for t in range(nt):
            i0 = toff[t]
            i1 = toff[t + 1]
            plen = 0.0
            for si in range(i0, i1 - 1):
                a = tpath[si]
                b = tpath[si + 1]
                dx = X[b, 0] - X[a, 0]
                dy = X[b, 1] - X[a, 1]
                dz = X[b, 2] - X[a, 2]
                plen += (dx * dx + dy * dy + dz * dz) ** 0.5
            T = tk[t] * (plen - trest[t])
            if T < 0.0:
                T = 0.0
            tendon_tension[t] = T
            if T > 0.0:
                for si in range(i0, i1 - 1):
                    a = tpath[si]
                    b = tpath[si + 1]
                    dx = X[b, 0] - X[a, 0]
                    dy = X[b, 1] - X[a, 1]
                    dz = X[b, 2] - X[a, 2]
                    L = (dx * dx + dy * dy + dz * dz) ** 0.5
                    if L < 1e-12:
                        continue
                    s = T * tatten[si] / L
                    F[a, 0] += s * dx
                    F[a, 1] += s * dy
                    F[a, 2] += s * dz
                    F[b, 0] -= s * dx
                    F[b, 1] -= s * dy
                    F[b, 2] -= s * dz
        rmax = 0.0
        vmax = 0.0
        for i in range(nn):
            if free[i]:
                V[i, 0] = (1.0 - damping) * V[i, 0] + dt * F[i, 0] * minv[i]
                V[i, 1] = (1.0 - damping) * V[i, 1] + dt * F[i, 1] * minv[i]
                V[i, 2] = (1.0 - damping) * V[i, 2] + dt * F[i, 2] * minv[i]
                X[i, 0] += dt * V[i, 0]
                X[i, 1] += dt * V[i, 1]
                X[i, 2] += dt * V[i, 2]
                r = abs(F[i, 0])
                if abs(F[i, 1]) > r:
                    r = abs(F[i, 1])
                if abs(F[i, 2]) > r:
                    r = abs(F[i, 2])
                if r > rmax:
                    rmax = r
                v = abs(V[i, 0])
                if abs(V[i, 1]) > v:
                    v = abs(V[i, 1])
                if abs(V[i, 2]) > v:
                    v = abs(V[i, 2])
                if v > vmax:
                    vmax = v
        if step % check_every == 0 or step == max_steps:
            if not np.isfinite(rmax) or rmax > _DIVERGE_LIMIT:
                return STATUS_DIVERGED, step, rmax, vmax
            if rmax < tol_force and vmax < tol_vel:
                return STATUS_CONVERGED, step, rmax, vmax
    if not np.isfinite(rmax) or rmax > _DIVERGE_LIMIT:
        return STATUS_DIVERGED, step, rmax, vmax
    return STATUS_STEP_LIMIT, step, rmax, vmax


def run_relax(X, V, src, dst, tension_only, ks, L0, free, minv, fext,
              tpath, toff, tk, trest, tatten,
              dt, damping, max_steps, tol_force, tol_vel, check_every,
              member_force, tendon_tension):
    """Advance the network in place; returns (status, steps, resid, vmax)."""
    return _relax_loop(
        X, V, src, dst, tension_only, ks, L0, free, minv, fext,
        tpath, toff, tk, trest, tatten,
        float(dt), float(damping), int(max_steps), float(tol_force),
        float(tol_vel), int(check_every), member_force, tendon_tension,
    )
