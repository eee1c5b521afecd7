"""Benchmark the compiled kernels against the pure-Python fallbacks.

Usage: python benchmarks/bench_kernels.py [--size 256] [--subdiv 4] [--repeat 3]

Reports wall time for the z-buffer rasterizer and the BFS disambiguation
pass on a synthetic sphere workload, plus the speedup of the compiled
backend when it is available.
"""
import argparse
import time

import numpy as np

import polarshape as ps
from polarshape import kernels


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t0)
    return min(times), out


def bench_rasterizer(impl, size, subdiv, repeat):
    intr = ps.CameraIntrinsics(fx=1.2 * size, fy=1.2 * size,
                               px=(size - 1) / 2, py=(size - 1) / 2,
                               width=size, height=size)
    mesh = ps.icosphere(subdiv, 1.0, (0.0, 0.0, 3.0))
    u, v = intr.project(mesh.vertices)
    z = mesh.vertices[:, 2]
    return best_of(lambda: impl.rasterize_depth(u, v, z, mesh.faces,
                                                intr.height, intr.width), repeat)


def bench_propagate(impl, size, repeat):
    intr = ps.CameraIntrinsics(fx=1.2 * size, fy=1.2 * size,
                               px=size // 2, py=size // 2,
                               width=size + 1, height=size + 1)
    scene = ps.SyntheticScene(kind="sphere", center=(0.0, 0.0, 3.0), radius=1.0)
    _, normals, gray = ps.render_scene(scene, intr)
    img = ps.synthesize_polarization(normals, gray, intr)
    phi, dop = ps.azimuth_dop(ps.stokes_decompose(img))
    theta = ps.zenith_from_dop(dop)
    n1, n2 = ps.ambiguous_normals(ps.AngleMaps(phi, theta, dop.valid))
    a1 = np.ascontiguousarray(n1.vectors)
    a2 = np.ascontiguousarray(n2.vectors)
    mask = np.ascontiguousarray(dop.valid, dtype=np.uint8)
    rows, cols = np.nonzero(dop.valid)
    seed = (int(rows[0]), int(cols[0]))
    return best_of(lambda: impl.propagate_choice(a1, a2, mask, *seed), repeat)


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--size", type=int, default=256)
    parser.add_argument("--subdiv", type=int, default=4)
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = kernels.available_backends()
    print(f"active backend: {kernels.BACKEND}; "
          f"available: {', '.join(backends)}")
    print(f"rasterizer: icosphere subdiv {args.subdiv} "
          f"({20 * 4 ** args.subdiv} faces) at {args.size}x{args.size}")
    print(f"propagate:  sphere foreground at {args.size + 1}x{args.size + 1}")
    print()

    results = {}
    outputs = {}
    for name, impl in backends.items():
        tr, out_r = bench_rasterizer(impl, args.size, args.subdiv, args.repeat)
        tp, out_p = bench_propagate(impl, args.size, args.repeat)
        results[name] = (tr, tp)
        outputs[name] = (out_r, out_p)
        print(f"{name:>8}: rasterize {tr * 1e3:9.2f} ms   propagate {tp * 1e3:9.2f} ms")

    if len(backends) == 2:
        same_r = np.array_equal(*(outputs[n][0] for n in ("python", "native")))
        same_p = np.array_equal(*(outputs[n][1] for n in ("python", "native")))
        sr = results["python"][0] / results["native"][0]
        sp = results["python"][1] / results["native"][1]
        print()
        print(f"speedup (native vs python): rasterize {sr:6.1f}x   propagate {sp:6.1f}x")
        print(f"outputs identical: rasterize {same_r}, propagate {same_p}")


if __name__ == "__main__":
    main()
