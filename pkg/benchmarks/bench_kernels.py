"""Benchmark the relaxation kernel backends (numba vs numpy).

Usage: python benchmarks/bench_kernels.py [--steps 20000] [--n 3] [--m 6]
"""

import argparse
import time

import numpy as np

import tenspine as ts
from tenspine.dynamics import _preconditioned_minv
from tenspine.kernels import load_backend


def build_workload(n, m, delta_l=(-30.0, 10.0, 10.0)):
    model = ts.generate_topology(ts.TopologyParams(n=n, m=m))
    rig = ts.form_find(model)
    src, dst, tension_only, ks, L0 = rig.spring_arrays(1.0)
    tendons = rig.tendon_arrays(delta_l)
    minv = _preconditioned_minv(rig.model.node_count, src, dst, ks, tendons,
                                1.0)
    fext = np.zeros((rig.model.node_count, 3))
    return rig, (src, dst, tension_only, ks, L0, ~rig._fixed, minv, fext,
                 tendons)


def run_backend(name, rig, arrays, steps):
    backend = load_backend(name)
    src, dst, tension_only, ks, L0, free, minv, fext, tendons = arrays
    X = rig.rest_coords.copy()
    V = np.zeros_like(X)
    member_force = np.zeros(len(src))
    tendon_tension = np.zeros(3)

    def once():
        Xw = X.copy()
        Vw = V.copy()
        t0 = time.perf_counter()
        backend.run_relax(Xw, Vw, src, dst, tension_only.astype(np.bool_),
                          ks, L0, free.astype(np.bool_), minv, fext,
                          *tendons, 1.0, 0.03, steps, 0.0, 0.0, 1000,
                          member_force, tendon_tension)
        return time.perf_counter() - t0, Xw

    once()  # warm-up (JIT compile for numba)
    best = min(once()[0] for _ in range(3))
    _, Xf = once()
    return best, Xf


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--steps", type=int, default=20000)
    parser.add_argument("--n", type=int, default=3)
    parser.add_argument("--m", type=int, default=6)
    args = parser.parse_args()

    rig, arrays = build_workload(args.n, args.m)
    n_elems = len(arrays[0]) + sum(len(p) - 1 for p in rig.tendon_paths)
    print(f"model n={args.n} m={args.m}: {rig.model.node_count} nodes, "
          f"{n_elems} force elements, {args.steps} steps\n")
    print(f"{'backend':<10} {'wall [s]':>10} {'steps/s':>14} {'speedup':>9}")
    results = {}
    for name in ("numpy", "numba"):
        try:
            wall, Xf = run_backend(name, rig, arrays, args.steps)
        except Exception as exc:   # backend unavailable
            print(f"{name:<10} unavailable ({exc})")
            continue
        results[name] = (wall, Xf)
        base = results.get("numpy", (wall,))[0]
        print(f"{name:<10} {wall:>10.3f} {args.steps / wall:>14.0f} "
              f"{base / wall:>8.1f}x")
    if len(results) == 2:
        gap = np.abs(results["numba"][1] - results["numpy"][1]).max()
        print(f"\nmax coordinate disagreement after {args.steps} steps: "
              f"{gap:.3e}")


if __name__ == "__main__":
    main()
