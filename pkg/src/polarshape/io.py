"""Bit-exact file formats for pipeline data.

Float maps (depth, normals, DoP, labels) travel as PFM; the quantized
polarization stack as four 8-bit grayscale PNGs; meshes as minimal OBJ;
intrinsics, skeletons, body parameters and reports as JSON. See
docs/formats.md for field names and units.
"""
from __future__ import annotations

import json
import os

import numpy as np
from PIL import Image

from .core import (
    BodyParams,
    CameraIntrinsics,
    PolarizationImage,
    PolarshapeError,
    POLARIZER_SUFFIXES,
    Skeleton,
    TriMesh,
    _require,
)

__all__ = [
    "read_pfm",
    "write_pfm",
    "read_polar_png",
    "write_polar_png",
    "read_polar_pfm",
    "write_polar_pfm",
    "read_obj",
    "write_obj",
    "read_intrinsics_json",
    "write_intrinsics_json",
    "read_skeleton_json",
    "write_skeleton_json",
    "read_body_params_json",
    "write_body_params_json",
]


def _read_token(f):
    tok = b""
    while True:
        c = f.read(1)
        if not c:
            raise PolarshapeError("unexpected end of PFM header")
        if c.isspace():
            if tok:
                return tok
            continue
        tok += c


def read_pfm(path):
    """Read a Portable Float Map; returns (H, W) or (H, W, 3) float32."""
    with open(path, "rb") as f:
        magic = _read_token(f)
        if magic == b"PF":
            channels = 3
        elif magic == b"Pf":
            channels = 1
        else:
            raise PolarshapeError(f"{path}: bad PFM magic {magic!r}")
        try:
            width = int(_read_token(f))
            height = int(_read_token(f))
            scale = float(_read_token(f))
        except ValueError as e:
            raise PolarshapeError(f"{path}: malformed PFM header: {e}") from None
        if width <= 0 or height <= 0 or scale == 0:
            raise PolarshapeError(f"{path}: malformed PFM header values")
        count = width * height * channels
        payload = f.read(4 * count)
        if len(payload) != 4 * count:
            raise PolarshapeError(
                f"{path}: truncated PFM payload, expected {4 * count} bytes, "
                f"got {len(payload)}")
        endian = "<" if scale < 0 else ">"
        data = np.frombuffer(payload, dtype=endian + "f4").astype(np.float32)
    if channels == 1:
        data = data.reshape(height, width)
    else:
        data = data.reshape(height, width, 3)
    return data[::-1].copy()  # PFM stores rows bottom-to-top


def write_pfm(path, data):
    """Write a float image as little-endian PFM (1 or 3 channels)."""
    arr = np.asarray(data, dtype=np.float32)
    if arr.ndim == 2:
        magic = b"Pf"
    elif arr.ndim == 3 and arr.shape[2] == 3:
        magic = b"PF"
    else:
        raise PolarshapeError(f"PFM supports (H, W) or (H, W, 3), got {arr.shape}")
    h, w = arr.shape[:2]
    with open(path, "wb") as f:
        f.write(magic + b"\n")
        f.write(f"{w} {h}\n".encode())
        f.write(b"-1.0\n")
        f.write(arr[::-1].astype("<f4").tobytes())


def _polar_paths(prefix):
    return [f"{prefix}_{s}.png" for s in POLARIZER_SUFFIXES]


def write_polar_png(prefix, img):
    """Write the four channels as 8-bit grayscale PNGs (suffix _000.._135).

    Intensity v is stored as round-half-away-from-zero(v * 255).
    """
    _require(isinstance(img, PolarizationImage), "expected a PolarizationImage")
    for k, path in enumerate(_polar_paths(prefix)):
        byte = np.floor(img.channel(k) * 255.0 + 0.5).astype(np.uint8)
        Image.fromarray(byte, mode="L").save(path)
    return _polar_paths(prefix)


def read_polar_png(prefix):
    """Read the four-channel stack written by write_polar_png."""
    arrays = []
    for path in _polar_paths(prefix):
        if not os.path.exists(path):
            raise PolarshapeError(f"missing polarization channel file {path}")
        arrays.append(np.asarray(Image.open(path).convert("L"), dtype=np.float64))
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise PolarshapeError(
            f"polarization channels at {prefix!r} have mismatched sizes: "
            f"{sorted(shapes)}")
    return PolarizationImage(np.stack(arrays, axis=-1) / 255.0)


def write_polar_pfm(prefix, img):
    """Write the four channels as float PFMs (suffix _000.._135), lossless
    up to float32; the unquantized companion of write_polar_png."""
    _require(isinstance(img, PolarizationImage), "expected a PolarizationImage")
    paths = [f"{prefix}_{s}.pfm" for s in POLARIZER_SUFFIXES]
    for k, path in enumerate(paths):
        write_pfm(path, img.channel(k))
    return paths


def read_polar_pfm(prefix):
    """Read the four-channel float stack written by write_polar_pfm."""
    arrays = []
    for s in POLARIZER_SUFFIXES:
        path = f"{prefix}_{s}.pfm"
        if not os.path.exists(path):
            raise PolarshapeError(f"missing polarization channel file {path}")
        arr = read_pfm(path)
        if arr.ndim != 2:
            raise PolarshapeError(f"{path}: expected a grayscale channel")
        arrays.append(arr.astype(np.float64))
    shapes = {a.shape for a in arrays}
    if len(shapes) > 1:
        raise PolarshapeError(
            f"polarization channels at {prefix!r} have mismatched sizes: "
            f"{sorted(shapes)}")
    return PolarizationImage(np.stack(arrays, axis=-1))


def write_obj(path, mesh):
    """Write a TriMesh as OBJ with v/f records only (1-based indices)."""
    _require(isinstance(mesh, TriMesh), "expected a TriMesh")
    with open(path, "w") as f:
        for x, y, z in mesh.vertices:
            # repr of Python floats round-trips bit-exactly
            f.write(f"v {float(x)!r} {float(y)!r} {float(z)!r}\n")
        for a, b, c in mesh.faces:
            f.write(f"f {a + 1} {b + 1} {c + 1}\n")


def read_obj(path):
    """Read a triangulated OBJ; non-triangular faces are rejected."""
    verts = []
    faces = []
    with open(path) as f:
        for lineno, line in enumerate(f, start=1):
            parts = line.split()
            if not parts or parts[0].startswith("#"):
                continue
            if parts[0] == "v":
                if len(parts) < 4:
                    raise PolarshapeError(f"{path}:{lineno}: malformed vertex record")
                verts.append([float(x) for x in parts[1:4]])
            elif parts[0] == "f":
                idx = [p.split("/")[0] for p in parts[1:]]
                if len(idx) != 3:
                    raise PolarshapeError(
                        f"{path}:{lineno}: face with {len(idx)} vertices; "
                        "only triangles are supported")
                faces.append([int(i) - 1 for i in idx])
            # other record types (vn, vt, comments, groups) are ignored
    return TriMesh(np.asarray(verts, dtype=np.float64).reshape(-1, 3),
                   np.asarray(faces, dtype=np.int64).reshape(-1, 3))


def _load_json_fields(path, required, kind):
    with open(path) as f:
        try:
            data = json.load(f)
        except json.JSONDecodeError as e:
            raise PolarshapeError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise PolarshapeError(f"{path}: expected a JSON object for {kind}")
    unknown = set(data) - set(required)
    if unknown:
        raise PolarshapeError(f"{path}: unknown {kind} fields {sorted(unknown)}")
    missing = set(required) - set(data)
    if missing:
        raise PolarshapeError(f"{path}: missing {kind} field {sorted(missing)[0]!r}")
    return data


def read_intrinsics_json(path):
    d = _load_json_fields(path, ("fx", "fy", "px", "py", "width", "height"),
                          "intrinsics")
    return CameraIntrinsics(fx=float(d["fx"]), fy=float(d["fy"]),
                            px=float(d["px"]), py=float(d["py"]),
                            width=int(d["width"]), height=int(d["height"]))


def write_intrinsics_json(path, intr):
    with open(path, "w") as f:
        json.dump({"fx": intr.fx, "fy": intr.fy, "px": intr.px, "py": intr.py,
                   "width": intr.width, "height": intr.height}, f, indent=2)
        f.write("\n")


def read_skeleton_json(path):
    d = _load_json_fields(path, ("joints",), "skeleton")
    return Skeleton(np.asarray(d["joints"], dtype=np.float64))


def write_skeleton_json(path, skeleton):
    with open(path, "w") as f:
        json.dump({"joints": skeleton.joints.tolist()}, f, indent=2)
        f.write("\n")


def read_body_params_json(path):
    d = _load_json_fields(path, ("beta", "pose", "translation"), "body params")
    return BodyParams(beta=np.asarray(d["beta"], dtype=np.float64),
                      pose=np.asarray(d["pose"], dtype=np.float64),
                      translation=np.asarray(d["translation"], dtype=np.float64))


def write_body_params_json(path, params):
    with open(path, "w") as f:
        json.dump({"beta": params.beta.tolist(), "pose": params.pose.tolist(),
                   "translation": params.translation.tolist()}, f, indent=2)
        f.write("\n")
