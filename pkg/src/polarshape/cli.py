"""Command-line front end wiring the modules into reproducible pipelines.

One command runs exactly one module pipeline; composition happens in the
shell. Every command writes a JSON report (synth writes a parameter
manifest instead, kept free of timings so reruns are byte-identical).
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys
import time

import numpy as np

from . import io as pio
from .core import (
    AngleMaps,
    CameraIntrinsics,
    DepthMap,
    NormalMap,
    PolarshapeError,
    TriMesh,
)
from .forward import (
    DEFAULT_REFRACTIVE_INDEX,
    SyntheticScene,
    add_noise_and_quantize,
    render_scene,
    synthesize_polarization,
)
from .inverse import (
    ambiguous_normals,
    azimuth_dop,
    disambiguate_oracle,
    disambiguate_propagate,
    generate_labels,
    mean_angular_error,
    stokes_decompose,
    zenith_from_dop,
)
from .integrate import IntegrationWeights, refine_depth
from .meshops import deform_to_depth, mpjpe, render_base_depth, scaled_rigid_icp, surface_error

DEFAULT_INTRINSICS = CameraIntrinsics(fx=150.0, fy=150.0, px=63.5, py=63.5,
                                      width=128, height=128)

SCENE_FIELDS = ("kind", "gray", "center", "radius", "plane_normal",
                "plane_depth", "base_depth", "amplitude", "cycles")


def _load_scene(scene_arg):
    if scene_arg in ("sphere", "plane", "heightfield"):
        return SyntheticScene(kind=scene_arg)
    with open(scene_arg) as f:
        data = json.load(f)
    unknown = set(data) - set(SCENE_FIELDS)
    if unknown:
        raise PolarshapeError(f"{scene_arg}: unknown scene fields {sorted(unknown)}")
    if "kind" not in data:
        raise PolarshapeError(f"{scene_arg}: scene file must name a 'kind'")
    for key in ("center", "plane_normal"):
        if key in data:
            data[key] = tuple(data[key])
    return SyntheticScene(**data)


def _load_intrinsics(path):
    return pio.read_intrinsics_json(path) if path else DEFAULT_INTRINSICS


def _scene_dict(scene):
    return {k: getattr(scene, k) for k in SCENE_FIELDS}


def _write_json(path, payload):
    with open(path, "w") as f:
        json.dump(payload, f, indent=2)
        f.write("\n")


def _report_path(out_path):
    stem, _ = os.path.splitext(out_path)
    return stem + "_report.json"


def _read_normal_map(path, unit=True):
    arr = pio.read_pfm(path)
    if arr.ndim != 3:
        raise PolarshapeError(f"{path}: expected a 3-channel normal map")
    return NormalMap(arr.astype(np.float64), unit=unit)


def _read_depth_map(path):
    arr = pio.read_pfm(path)
    if arr.ndim != 2:
        raise PolarshapeError(f"{path}: expected a single-channel depth map")
    return DepthMap(arr.astype(np.float64))


def cmd_synth(args):
    scene = _load_scene(args.scene)
    intr = _load_intrinsics(args.intrinsics)
    os.makedirs(args.out_dir, exist_ok=True)
    depth, normals, gray = render_scene(scene, intr)
    clean = synthesize_polarization(normals, gray, intr, args.refractive_index)
    noisy = add_noise_and_quantize(clean, args.noise_sigma, args.seed)

    out = lambda name: os.path.join(args.out_dir, name)
    pio.write_pfm(out("depth.pfm"), depth.depth)
    pio.write_pfm(out("normals.pfm"), normals.vectors)
    pio.write_pfm(out("gray.pfm"), gray)
    pio.write_polar_pfm(out("polar"), clean)
    pio.write_polar_png(out("polar"), noisy)
    pio.write_intrinsics_json(out("intrinsics.json"), intr)
    _write_json(out("manifest.json"), {
        "command": "synth",
        "scene": _scene_dict(scene),
        "intrinsics": {"fx": intr.fx, "fy": intr.fy, "px": intr.px,
                       "py": intr.py, "width": intr.width, "height": intr.height},
        "refractive_index": args.refractive_index,
        "noise_sigma": args.noise_sigma,
        "seed": args.seed,
        "outputs": {
            "depth": "depth.pfm",
            "normals": "normals.pfm",
            "gray": "gray.pfm",
            "polar_float_prefix": "polar",
            "polar_png_prefix": "polar",
            "intrinsics": "intrinsics.json",
        },
    })
    return 0


def cmd_normals(args):
    t0 = time.perf_counter()
    if args.polar_format == "png":
        img = pio.read_polar_png(args.polar_prefix)
    else:
        img = pio.read_polar_pfm(args.polar_prefix)
    stokes = stokes_decompose(img)
    phi, dop = azimuth_dop(stokes, args.refractive_index)
    theta = zenith_from_dop(dop, args.refractive_index)
    angles = AngleMaps(phi, theta, dop.valid)
    n1, n2 = ambiguous_normals(angles)

    target = _read_normal_map(args.target) if args.target else None
    if args.disambiguate == "oracle":
        selected = disambiguate_oracle(n1, n2, target)
    else:
        seed_pixel = None
        if args.seed_pixel:
            r, c = args.seed_pixel.split(",")
            seed_pixel = (int(r), int(c))
        selected = disambiguate_propagate(n1, n2, dop.valid, seed_pixel)

    os.makedirs(args.out_dir, exist_ok=True)
    out = lambda name: os.path.join(args.out_dir, name)
    pio.write_pfm(out("n1.pfm"), n1.vectors)
    pio.write_pfm(out("n2.pfm"), n2.vectors)
    pio.write_pfm(out("normal.pfm"), selected.vectors)
    metrics = {}
    if target is not None:
        metrics["mae_degrees"] = mean_angular_error(selected, target)
        print(f"MAE vs target: {metrics['mae_degrees']:.4f} degrees")
    _write_json(out("report.json"), {
        "command": "normals",
        "parameters": {
            "polar_prefix": args.polar_prefix,
            "polar_format": args.polar_format,
            "refractive_index": args.refractive_index,
            "disambiguate": args.disambiguate,
            "target": args.target,
            "seed_pixel": args.seed_pixel,
        },
        "outputs": {"n1": "n1.pfm", "n2": "n2.pfm", "normal": "normal.pfm"},
        "metrics": metrics,
        "timing_seconds": time.perf_counter() - t0,
    })
    return 0


def _parse_weights(text):
    parts = text.split(",")
    if len(parts) != 3:
        raise PolarshapeError("--weights expects three comma-separated values")
    return IntegrationWeights(*(float(p) for p in parts))


def cmd_integrate(args):
    t0 = time.perf_counter()
    intr = pio.read_intrinsics_json(args.intrinsics)
    normals = _read_normal_map(args.normals)
    base_path = None
    if args.mesh:
        mesh = pio.read_obj(args.mesh)
        base = render_base_depth(mesh, intr)
        base_path = os.path.splitext(args.out)[0] + "_base.pfm"
        pio.write_pfm(base_path, base.depth)
    else:
        base = _read_depth_map(args.base_depth)
    weights = _parse_weights(args.weights)
    solution = refine_depth(normals, base, intr, weights,
                            tol=args.tol, max_iter=args.max_iter)
    pio.write_pfm(args.out, solution.depth.depth)
    _write_json(_report_path(args.out), {
        "command": "integrate",
        "parameters": {
            "normals": args.normals,
            "base_depth": args.base_depth,
            "mesh": args.mesh,
            "intrinsics": args.intrinsics,
            "weights": [weights.lambda_n, weights.lambda_d, weights.lambda_s],
            "tol": args.tol,
            "max_iter": args.max_iter,
        },
        "outputs": {"refined": args.out, "rendered_base": base_path},
        "diagnostics": {
            "iterations": solution.iterations,
            "relative_residual": solution.relative_residual,
            "num_unknowns": int(base.valid.sum()),
        },
        "timing_seconds": time.perf_counter() - t0,
    })
    return 0


def cmd_deform(args):
    t0 = time.perf_counter()
    intr = pio.read_intrinsics_json(args.intrinsics)
    mesh = pio.read_obj(args.mesh)
    refined = _read_depth_map(args.refined)
    base = _read_depth_map(args.base)
    out_mesh = deform_to_depth(mesh, refined, base, intr, step=args.step)
    pio.write_obj(args.out, out_mesh)
    _write_json(_report_path(args.out), {
        "command": "deform",
        "parameters": {"mesh": args.mesh, "refined": args.refined,
                       "base": args.base, "intrinsics": args.intrinsics,
                       "step": args.step},
        "outputs": {"mesh": args.out},
        "diagnostics": {
            "num_vertices": out_mesh.num_vertices,
            "max_vertex_shift_m": float(
                np.linalg.norm(out_mesh.vertices - mesh.vertices, axis=1).max()),
        },
        "timing_seconds": time.perf_counter() - t0,
    })
    return 0


def cmd_eval(args):
    t0 = time.perf_counter()
    metrics = {}
    if args.mode == "normals":
        pred = _read_normal_map(args.pred)
        target = _read_normal_map(args.target)
        metrics["mae_degrees"] = mean_angular_error(pred, target)
    elif args.mode == "depth":
        pred = _read_depth_map(args.pred)
        truth = _read_depth_map(args.truth)
        metrics["rmse_pred_m"] = _depth_rmse(pred, truth)
        if args.base:
            metrics["rmse_base_m"] = _depth_rmse(_read_depth_map(args.base), truth)
    elif args.mode == "mesh":
        pred = pio.read_obj(args.pred)
        truth = pio.read_obj(args.truth)
        if args.no_icp:
            metrics["surface_error_mm"] = surface_error(pred, truth)
        else:
            s, R, t, aligned = scaled_rigid_icp(pred.vertices, truth.vertices)
            metrics["surface_error_mm"] = surface_error(
                TriMesh(aligned, pred.faces), truth)
            metrics["icp_scale"] = s
    else:  # joints
        pred = pio.read_skeleton_json(args.pred)
        truth = pio.read_skeleton_json(args.truth)
        metrics["mpjpe_24_mm"] = mpjpe(pred, truth, 24)
        metrics["mpjpe_20_mm"] = mpjpe(pred, truth, 20)
    for k, v in metrics.items():
        print(f"{k}: {v:.6f}" if isinstance(v, float) else f"{k}: {v}")
    _write_json(args.out, {
        "command": "eval",
        "parameters": {"mode": args.mode, "pred": args.pred,
                       "target": getattr(args, "target", None),
                       "truth": getattr(args, "truth", None),
                       "base": getattr(args, "base", None)},
        "metrics": metrics,
        "timing_seconds": time.perf_counter() - t0,
    })
    return 0


def _depth_rmse(pred, truth):
    both = pred.valid & truth.valid
    if not both.any():
        raise PolarshapeError("depth maps share no valid pixel")
    diff = pred.depth[both] - truth.depth[both]
    return float(np.sqrt(np.mean(diff ** 2)))


def cmd_labels(args):
    t0 = time.perf_counter()
    n1 = _read_normal_map(args.n1)
    n2 = _read_normal_map(args.n2)
    target = _read_normal_map(args.target)
    labels = generate_labels(n1, n2, target)
    pio.write_pfm(args.out, labels.labels.astype(np.float32))
    counts = {str(k): int((labels.labels == k).sum()) for k in (0, 1, 2)}
    _write_json(_report_path(args.out), {
        "command": "labels",
        "parameters": {"n1": args.n1, "n2": args.n2, "target": args.target},
        "outputs": {"labels": args.out},
        "metrics": {"category_counts": counts},
        "timing_seconds": time.perf_counter() - t0,
    })
    return 0


def build_parser():
    parser = argparse.ArgumentParser(
        prog="polarshape",
        description="Shape-from-polarization toolkit: synthesis, normal "
                    "recovery, depth integration, mesh refinement, evaluation.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="render a synthetic scene and synthesize "
                                     "its polarization stack")
    p.add_argument("--scene", required=True,
                   help="sphere | plane | heightfield, or a scene JSON file")
    p.add_argument("--intrinsics", help="intrinsics JSON (default: 128x128, f=150)")
    p.add_argument("--refractive-index", type=float, default=DEFAULT_REFRACTIVE_INDEX)
    p.add_argument("--noise-sigma", type=float, default=0.0,
                   help="Gaussian noise sigma in intensity units (default 0)")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("normals", help="recover normals from a polarization stack")
    p.add_argument("--polar-prefix", required=True,
                   help="path prefix of the channel files (… + _000.. _135)")
    p.add_argument("--polar-format", choices=("png", "pfm"), default="png")
    p.add_argument("--refractive-index", type=float, default=DEFAULT_REFRACTIVE_INDEX)
    p.add_argument("--disambiguate", choices=("oracle", "propagate"),
                   default="oracle")
    p.add_argument("--target", help="target normal map PFM (required for oracle)")
    p.add_argument("--seed-pixel", help="propagate seed as 'row,col' "
                                        "(default: foreground centroid)")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_normals)

    p = sub.add_parser("integrate", help="refine a base depth with a normal map")
    p.add_argument("--normals", required=True)
    group = p.add_mutually_exclusive_group(required=True)
    group.add_argument("--base-depth", help="base depth PFM")
    group.add_argument("--mesh", help="coarse mesh OBJ to rasterize into a base depth")
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--weights", default="1.0,0.06,0.55",
                   help="lambda_n,lambda_d,lambda_s (default 1.0,0.06,0.55)")
    p.add_argument("--tol", type=float, default=1e-8)
    p.add_argument("--max-iter", type=int, default=None)
    p.add_argument("--out", required=True, help="refined depth PFM")
    p.set_defaults(func=cmd_integrate)

    p = sub.add_parser("deform", help="deform a mesh toward a refined depth map")
    p.add_argument("--mesh", required=True)
    p.add_argument("--refined", required=True)
    p.add_argument("--base", required=True)
    p.add_argument("--intrinsics", required=True)
    p.add_argument("--step", type=float, default=1.0)
    p.add_argument("--out", required=True, help="output OBJ")
    p.set_defaults(func=cmd_deform)

    p = sub.add_parser("eval", help="evaluate normals, depth, meshes, or joints")
    p.add_argument("--mode", choices=("normals", "depth", "mesh", "joints"),
                   required=True)
    p.add_argument("--pred", required=True)
    p.add_argument("--target", help="target normal map (mode normals)")
    p.add_argument("--truth", help="ground truth (modes depth/mesh/joints)")
    p.add_argument("--base", help="base depth for comparison (mode depth)")
    p.add_argument("--no-icp", action="store_true",
                   help="skip ICP alignment in mesh mode")
    p.add_argument("--out", required=True, help="report JSON path")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("labels", help="generate classification labels from "
                                      "ambiguous normals and a target")
    p.add_argument("--n1", required=True)
    p.add_argument("--n2", required=True)
    p.add_argument("--target", required=True)
    p.add_argument("--out", required=True, help="label map PFM")
    p.set_defaults(func=cmd_labels)
    return parser


def _validate(parser, args):
    if args.command == "synth" and args.scene not in ("sphere", "plane", "heightfield") \
            and not os.path.exists(args.scene):
        parser.error(f"--scene must be sphere|plane|heightfield or an existing "
                     f"scene JSON file, got {args.scene!r}")
    if args.command == "normals" and args.disambiguate == "oracle" and not args.target:
        parser.error("--disambiguate oracle requires --target")
    if args.command == "eval":
        if args.mode == "normals" and not args.target:
            parser.error("--mode normals requires --target")
        if args.mode in ("depth", "mesh", "joints") and not args.truth:
            parser.error(f"--mode {args.mode} requires --truth")


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    _validate(parser, args)
    try:
        return args.func(args)
    except PolarshapeError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1
    except OSError as e:
        print(f"error: {e}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
