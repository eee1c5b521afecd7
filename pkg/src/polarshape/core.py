"""Domain types, camera geometry, and angle/normal conventions.

Conventions used throughout the package:

* Camera frame: x right, y down, z forward (optical axis into the scene).
  Pinhole projection is u = fx*X/Z + px, v = fy*Y/Z + py with pixel centers
  at integer coordinates.
* Normal maps store camera-facing normals with nz >= 0; a surface element
  looking straight at the camera is (0, 0, 1). Background pixels hold the
  zero vector.
* Azimuth phi is the in-plane orientation atan2(ny, nx); zenith theta is the
  angle between the normal and the viewing direction, so nz = cos(theta).
* Depth maps store the camera-space z coordinate in meters; entries <= 0
  mark invalid pixels.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "PolarshapeError",
    "CameraIntrinsics",
    "PolarizationImage",
    "AngleMaps",
    "DoPMap",
    "StokesMaps",
    "NormalMap",
    "ProbMaps",
    "LabelMap",
    "DepthMap",
    "TriMesh",
    "BodyParams",
    "Skeleton",
    "normal_from_angles",
    "angles_from_normal",
]

# norm below this threshold marks a background pixel in a NormalMap
BACKGROUND_NORM_EPS = 1e-6


class PolarshapeError(ValueError):
    """Raised on contract violations anywhere in the toolkit."""


def _freeze(arr, dtype=np.float64):
    out = np.array(arr, dtype=dtype, copy=True)
    out.setflags(write=False)
    return out


def _require(cond, msg):
    if not cond:
        raise PolarshapeError(msg)


@dataclass(frozen=True)
class CameraIntrinsics:
    """Pinhole camera parameters, all in pixels."""

    fx: float
    fy: float
    px: float
    py: float
    width: int
    height: int

    def __post_init__(self):
        _require(self.fx > 0 and self.fy > 0, "focal lengths must be positive")
        _require(0 <= self.px < self.width, f"px={self.px} outside [0, {self.width})")
        _require(0 <= self.py < self.height, f"py={self.py} outside [0, {self.height})")
        _require(self.width > 0 and self.height > 0, "image size must be positive")

    def ray_grid(self):
        """Per-pixel ray directions ((u-px)/fx, (v-py)/fy, 1), shape (H, W, 3)."""
        u = np.arange(self.width, dtype=np.float64)
        v = np.arange(self.height, dtype=np.float64)
        xx = (u[None, :] - self.px) / self.fx
        yy = (v[:, None] - self.py) / self.fy
        rays = np.empty((self.height, self.width, 3))
        rays[..., 0] = xx
        rays[..., 1] = yy
        rays[..., 2] = 1.0
        return rays

    def project(self, points):
        """Project camera-frame points (..., 3) to pixel coordinates (u, v)."""
        points = np.asarray(points, dtype=np.float64)
        z = points[..., 2]
        u = self.fx * points[..., 0] / z + self.px
        v = self.fy * points[..., 1] / z + self.py
        return u, v


# polarizer angles of the four channels, radians
POLARIZER_ANGLES = np.deg2rad([0.0, 45.0, 90.0, 135.0])
POLARIZER_SUFFIXES = ("000", "045", "090", "135")


@dataclass(frozen=True)
class PolarizationImage:
    """Four intensity channels at polarizer angles 0/45/90/135 degrees.

    channels has shape (H, W, 4) with values in [0, 1].
    """

    channels: np.ndarray

    def __post_init__(self):
        ch = _freeze(self.channels)
        _require(ch.ndim == 3 and ch.shape[2] == 4,
                 f"expected (H, W, 4) channels, got {ch.shape}")
        _require(np.isfinite(ch).all(), "intensities must be finite")
        _require(ch.min() >= 0.0 and ch.max() <= 1.0,
                 "intensities must lie in [0, 1]")
        object.__setattr__(self, "channels", ch)

    @property
    def height(self):
        return self.channels.shape[0]

    @property
    def width(self):
        return self.channels.shape[1]

    def channel(self, k):
        return self.channels[..., k]


@dataclass(frozen=True)
class AngleMaps:
    """Per-pixel azimuth in [0, pi) and zenith in [0, pi/2], with validity."""

    azimuth: np.ndarray
    zenith: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        az = _freeze(self.azimuth)
        ze = _freeze(self.zenith)
        va = _freeze(self.valid, dtype=bool)
        _require(az.shape == ze.shape == va.shape,
                 "azimuth, zenith and valid must share dimensions")
        _require(np.isfinite(az[va]).all() and np.isfinite(ze[va]).all(),
                 "angles must be finite on valid pixels")
        _require((az[va] >= 0).all() and (az[va] < np.pi).all(),
                 "azimuth must lie in [0, pi) on valid pixels")
        _require((ze[va] >= 0).all() and (ze[va] <= np.pi / 2 + 1e-12).all(),
                 "zenith must lie in [0, pi/2] on valid pixels")
        object.__setattr__(self, "azimuth", az)
        object.__setattr__(self, "zenith", ze)
        object.__setattr__(self, "valid", va)


@dataclass(frozen=True)
class DoPMap:
    """Per-pixel degree of polarization in [0, 1] with validity."""

    rho: np.ndarray
    valid: np.ndarray

    def __post_init__(self):
        rho = _freeze(self.rho)
        va = _freeze(self.valid, dtype=bool)
        _require(rho.shape == va.shape, "rho and valid must share dimensions")
        _require(np.isfinite(rho[va]).all(), "rho must be finite on valid pixels")
        _require((rho[va] >= 0).all() and (rho[va] <= 1).all(),
                 "rho must lie in [0, 1] on valid pixels")
        object.__setattr__(self, "rho", rho)
        object.__setattr__(self, "valid", va)


@dataclass(frozen=True)
class StokesMaps:
    """Linear Stokes components of the four-channel image.

    s0 = (I0 + I45 + I90 + I135) / 2, s1 = I0 - I90, s2 = I45 - I135.
    """

    s0: np.ndarray
    s1: np.ndarray
    s2: np.ndarray

    def __post_init__(self):
        s0 = _freeze(self.s0)
        s1 = _freeze(self.s1)
        s2 = _freeze(self.s2)
        _require(s0.shape == s1.shape == s2.shape,
                 "Stokes components must share dimensions")
        _require(np.isfinite(s0).all() and np.isfinite(s1).all()
                 and np.isfinite(s2).all(), "Stokes components must be finite")
        _require((s0 >= 0).all(), "s0 must be nonnegative")
        object.__setattr__(self, "s0", s0)
        object.__setattr__(self, "s1", s1)
        object.__setattr__(self, "s2", s2)


@dataclass(frozen=True)
class NormalMap:
    """Per-pixel camera-space normals, background encoded as the zero vector.

    With unit=True (hard normal maps) every non-background vector must be
    unit length within 1e-6. Probability-fused maps carry a soft magnitude
    equal to the foreground confidence and are constructed with unit=False;
    magnitudes then only need to stay in [0, 1].
    """

    vectors: np.ndarray
    unit: bool = field(default=True, compare=False)

    def __post_init__(self):
        vec = _freeze(self.vectors)
        _require(vec.ndim == 3 and vec.shape[2] == 3,
                 f"expected (H, W, 3) vectors, got {vec.shape}")
        _require(np.isfinite(vec).all(), "normals must be finite")
        norms = np.linalg.norm(vec, axis=2)
        fg = norms > BACKGROUND_NORM_EPS
        if self.unit:
            _require(np.abs(norms[fg] - 1.0).max(initial=0.0) <= 1e-6,
                     "non-background normals must be unit length within 1e-6")
        else:
            _require(norms[fg].max(initial=0.0) <= 1.0 + 1e-6,
                     "fused normal magnitudes must not exceed 1")
        _require((vec[..., 2][fg] >= -1e-12).all(),
                 "normals must face the camera (nz >= 0)")
        object.__setattr__(self, "vectors", vec)

    @property
    def height(self):
        return self.vectors.shape[0]

    @property
    def width(self):
        return self.vectors.shape[1]

    @property
    def foreground(self):
        """Boolean mask of non-background pixels."""
        return np.linalg.norm(self.vectors, axis=2) > BACKGROUND_NORM_EPS


@dataclass(frozen=True)
class ProbMaps:
    """Per-pixel probabilities for (background, n1, n2)."""

    p0: np.ndarray
    p1: np.ndarray
    p2: np.ndarray

    def __post_init__(self):
        p0 = _freeze(self.p0)
        p1 = _freeze(self.p1)
        p2 = _freeze(self.p2)
        _require(p0.shape == p1.shape == p2.shape,
                 "probability maps must share dimensions")
        for p in (p0, p1, p2):
            _require(np.isfinite(p).all() and (p >= 0).all() and (p <= 1).all(),
                     "probabilities must lie in [0, 1]")
        _require(np.abs(p0 + p1 + p2 - 1.0).max(initial=0.0) <= 1e-6,
                 "probabilities must sum to 1 within 1e-6")
        object.__setattr__(self, "p0", p0)
        object.__setattr__(self, "p1", p1)
        object.__setattr__(self, "p2", p2)


@dataclass(frozen=True)
class LabelMap:
    """Per-pixel category: 0 background, 1 -> n1, 2 -> n2."""

    labels: np.ndarray

    def __post_init__(self):
        lab = _freeze(self.labels, dtype=np.uint8)
        _require(lab.ndim == 2, f"expected (H, W) labels, got {lab.shape}")
        _require(np.isin(lab, (0, 1, 2)).all(), "labels must be in {0, 1, 2}")
        object.__setattr__(self, "labels", lab)


@dataclass(frozen=True)
class DepthMap:
    """Per-pixel depth in meters; entries <= 0 are invalid."""

    depth: np.ndarray

    def __post_init__(self):
        d = _freeze(self.depth)
        _require(d.ndim == 2, f"expected (H, W) depth, got {d.shape}")
        _require(np.isfinite(d).all(), "depth must be finite (use <= 0 for invalid)")
        object.__setattr__(self, "depth", d)

    @property
    def valid(self):
        return self.depth > 0.0

    @property
    def height(self):
        return self.depth.shape[0]

    @property
    def width(self):
        return self.depth.shape[1]


@dataclass(frozen=True)
class TriMesh:
    """Indexed triangle mesh, vertices in meters."""

    vertices: np.ndarray
    faces: np.ndarray

    def __post_init__(self):
        v = _freeze(self.vertices)
        f = _freeze(self.faces, dtype=np.int64)
        _require(v.ndim == 2 and v.shape[1] == 3,
                 f"expected (V, 3) vertices, got {v.shape}")
        _require(np.isfinite(v).all(), "vertices must be finite")
        _require(f.ndim == 2 and f.shape[1] == 3,
                 f"expected (F, 3) faces, got {f.shape}")
        if f.size:
            _require(f.min() >= 0 and f.max() < len(v),
                     "face indices out of range")
            e1 = v[f[:, 1]] - v[f[:, 0]]
            e2 = v[f[:, 2]] - v[f[:, 0]]
            areas2 = np.linalg.norm(np.cross(e1, e2), axis=1)
            _require((areas2 > 0).all(), "degenerate (zero-area) triangle")
        object.__setattr__(self, "vertices", v)
        object.__setattr__(self, "faces", f)

    @property
    def num_vertices(self):
        return len(self.vertices)

    @property
    def num_faces(self):
        return len(self.faces)


@dataclass(frozen=True)
class BodyParams:
    """85-dim body parameter vector: 10 shape + 72 pose + 3 translation."""

    beta: np.ndarray
    pose: np.ndarray
    translation: np.ndarray

    def __post_init__(self):
        beta = _freeze(self.beta)
        pose = _freeze(self.pose)
        t = _freeze(self.translation)
        _require(beta.shape == (10,), f"beta must have 10 entries, got {beta.shape}")
        _require(pose.shape == (72,), f"pose must have 72 entries, got {pose.shape}")
        _require(t.shape == (3,), f"translation must have 3 entries, got {t.shape}")
        for a in (beta, pose, t):
            _require(np.isfinite(a).all(), "body parameters must be finite")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "pose", pose)
        object.__setattr__(self, "translation", t)

    def as_vector(self):
        return np.concatenate([self.beta, self.pose, self.translation])


@dataclass(frozen=True)
class Skeleton:
    """24 joints x 3 coordinates, meters."""

    joints: np.ndarray

    def __post_init__(self):
        j = _freeze(self.joints)
        _require(j.shape == (24, 3), f"expected (24, 3) joints, got {j.shape}")
        _require(np.isfinite(j).all(), "joints must be finite")
        object.__setattr__(self, "joints", j)


def normal_from_angles(azimuth, zenith):
    """Unit normal from azimuth/zenith: (sin t cos p, sin t sin p, cos t).

    Accepts scalars or broadcasting arrays; azimuth must lie in [0, 2*pi)
    and zenith in [0, pi/2].
    """
    azimuth = np.asarray(azimuth, dtype=np.float64)
    zenith = np.asarray(zenith, dtype=np.float64)
    _require(np.isfinite(azimuth).all() and np.isfinite(zenith).all(),
             "angles must be finite")
    _require((azimuth >= 0).all() and (azimuth < 2 * np.pi).all(),
             "azimuth must lie in [0, 2*pi)")
    _require((zenith >= 0).all() and (zenith <= np.pi / 2 + 1e-12).all(),
             "zenith must lie in [0, pi/2]")
    st = np.sin(zenith)
    n = np.stack(np.broadcast_arrays(
        st * np.cos(azimuth), st * np.sin(azimuth), np.cos(zenith)), axis=-1)
    return n


def angles_from_normal(n):
    """Inverse of normal_from_angles; the azimuth of (0, 0, 1) is 0.

    Requires unit, camera-facing normals (nz >= 0). Returns (azimuth, zenith)
    with azimuth in [0, 2*pi).
    """
    n = np.asarray(n, dtype=np.float64)
    _require(n.shape[-1] == 3, "normals must have 3 components")
    norms = np.linalg.norm(n, axis=-1)
    _require(np.abs(norms - 1.0).max(initial=0.0) <= 1e-6,
             "normals must be unit length")
    _require((n[..., 2] >= -1e-12).all(), "normals must face the camera")
    sin_t = np.hypot(n[..., 0], n[..., 1])
    zenith = np.arctan2(sin_t, n[..., 2])
    azimuth = np.arctan2(n[..., 1], n[..., 0])
    azimuth = np.where(azimuth < 0, azimuth + 2 * np.pi, azimuth)
    # canonical azimuth at the pole
    azimuth = np.where(sin_t <= 1e-12, 0.0, azimuth)
    if n.ndim == 1:
        return float(azimuth), float(zenith)
    return azimuth, zenith
