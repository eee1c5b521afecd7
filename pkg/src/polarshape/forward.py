"""Physically-based polarization image synthesis from known geometry.

The diffuse model: intensity under a linear polarizer at angle a is

    I(a) = (Imax + Imin)/2 + (Imax - Imin)/2 * cos(2*(a - phi))

with phi the normal's azimuth. Writing S = Imax + Imin and the degree of
polarization rho = (Imax - Imin)/S gives I(a) = S/2 * (1 + rho*cos(2*(a-phi))).
The gray image is taken as the 0-degree channel, so S = 2*I(0)/(1 + rho*cos(2*phi)),
and rho follows from the zenith angle through the diffuse Fresnel relation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import (
    DepthMap,
    NormalMap,
    PolarizationImage,
    PolarshapeError,
    POLARIZER_ANGLES,
    _require,
)

__all__ = [
    "RefractiveIndex",
    "SyntheticScene",
    "dop_from_zenith",
    "dop_max",
    "synthesize_polarization",
    "add_noise",
    "quantize_8bit",
    "add_noise_and_quantize",
    "normals_from_depth",
    "render_scene",
]

DEFAULT_REFRACTIVE_INDEX = 1.5
SCENE_KINDS = ("sphere", "plane", "heightfield")


@dataclass(frozen=True)
class RefractiveIndex:
    """Refractive index of the surface material; must exceed 1."""

    n: float = DEFAULT_REFRACTIVE_INDEX

    def __post_init__(self):
        _require(np.isfinite(self.n) and self.n > 1.0,
                 f"refractive index must exceed 1, got {self.n}")


def _ri(n):
    if isinstance(n, RefractiveIndex):
        return n.n
    n = float(n)
    _require(np.isfinite(n) and n > 1.0, f"refractive index must exceed 1, got {n}")
    return n


@dataclass(frozen=True)
class SyntheticScene:
    """Analytic test scene: sphere, tilted plane, or sinusoidal heightfield.

    The heightfield is defined directly on the pixel grid:
    D(u, v) = base_depth + amplitude * sin(2*pi*cycles*u/W) * sin(2*pi*cycles*v/H),
    which makes depth, tangents and normals analytic per pixel.
    """

    kind: str
    gray: float = 0.4
    # sphere
    center: tuple = (0.0, 0.0, 3.0)
    radius: float = 1.0
    # plane (normal in camera-facing storage convention, nz > 0)
    plane_normal: tuple = (0.0, 0.0, 1.0)
    plane_depth: float = 2.0
    # heightfield
    base_depth: float = 2.0
    amplitude: float = 0.05
    cycles: float = 3.0

    def __post_init__(self):
        _require(self.kind in SCENE_KINDS,
                 f"unknown scene kind {self.kind!r}, expected one of {SCENE_KINDS}")
        _require(0.0 < self.gray <= 1.0, "gray level must lie in (0, 1]")
        _require(self.radius > 0, "sphere radius must be positive")
        _require(self.amplitude >= 0, "heightfield amplitude must be nonnegative")
        m = np.asarray(self.plane_normal, dtype=np.float64)
        _require(m.shape == (3,) and np.linalg.norm(m) > 0 and m[2] > 0,
                 "plane normal must be a camera-facing 3-vector (nz > 0)")


def dop_max(n):
    """Largest attainable degree of polarization for the diffuse model."""
    return float(dop_from_zenith(np.pi / 2, n))


def dop_from_zenith(zenith, n=DEFAULT_REFRACTIVE_INDEX):
    """Diffuse degree of polarization as a function of the zenith angle.

    rho = (n - 1/n)^2 sin^2 t / (2 + 2n^2 - (n + 1/n)^2 sin^2 t
                                 + 4 cos t sqrt(n^2 - sin^2 t))

    Strictly increasing on [0, pi/2] for any n > 1. Accepts scalars or arrays.
    """
    n = _ri(n)
    zenith = np.asarray(zenith, dtype=np.float64)
    _require(np.isfinite(zenith).all(), "zenith must be finite")
    _require((zenith >= -1e-12).all() and (zenith <= np.pi / 2 + 1e-12).all(),
             "zenith must lie in [0, pi/2]")
    t = np.clip(zenith, 0.0, np.pi / 2)
    s2 = np.sin(t) ** 2
    k1 = (n - 1.0 / n) ** 2
    k2 = (n + 1.0 / n) ** 2
    num = k1 * s2
    den = 2.0 + 2.0 * n * n - k2 * s2 + 4.0 * np.cos(t) * np.sqrt(n * n - s2)
    rho = num / den
    if zenith.ndim == 0:
        return float(rho)
    return rho


def synthesize_polarization(geometry, gray, intrinsics=None,
                            n=DEFAULT_REFRACTIVE_INDEX):
    """Synthesize the four polarizer channels from normals and a gray image.

    geometry is a NormalMap, or a DepthMap from which normals are derived
    (intrinsics required in that case). The gray image supplies the
    0-degree channel; S = Imax + Imin is solved in closed form and the
    45/90/135-degree channels follow from the sinusoid. Background pixels
    (zero normal) emit 0 in all channels. Outputs are clamped to [0, 1].

    Raises if 1 + rho*cos(2*phi) <= 1e-6 at any foreground pixel (the pixel
    coordinates are reported); this cannot happen for physical rho < 1.
    """
    if isinstance(geometry, DepthMap):
        _require(intrinsics is not None,
                 "intrinsics are required to derive normals from depth")
        geometry = normals_from_depth(geometry, intrinsics)
    _require(isinstance(geometry, NormalMap), "geometry must be NormalMap or DepthMap")
    gray = np.asarray(gray, dtype=np.float64)
    _require(gray.shape == geometry.vectors.shape[:2],
             "gray image and normals must share dimensions")
    _require(np.isfinite(gray).all() and (gray >= 0).all() and (gray <= 1).all(),
             "gray intensities must lie in [0, 1]")

    fg = geometry.foreground
    vec = geometry.vectors
    phi = np.arctan2(vec[..., 1], vec[..., 0])
    sin_t = np.hypot(vec[..., 0], vec[..., 1])
    theta = np.arctan2(sin_t, vec[..., 2])
    rho = np.zeros_like(gray)
    rho[fg] = dop_from_zenith(theta[fg], n)

    denom = 1.0 + rho * np.cos(2.0 * phi)
    bad = fg & (denom <= 1e-6)
    if bad.any():
        r, c = np.argwhere(bad)[0]
        raise PolarshapeError(
            f"degenerate synthesis denominator at pixel (row={r}, col={c}): "
            f"1 + rho*cos(2*phi) = {denom[r, c]:.3e}")
    s_total = np.where(fg, 2.0 * gray / np.where(fg, denom, 1.0), 0.0)

    channels = np.zeros(gray.shape + (4,))
    for k, a in enumerate(POLARIZER_ANGLES):
        ch = 0.5 * s_total * (1.0 + rho * np.cos(2.0 * (a - phi)))
        channels[..., k] = np.where(fg, ch, 0.0)
    return PolarizationImage(np.clip(channels, 0.0, 1.0))


def _row_rng(seed, row):
    return np.random.default_rng(np.random.SeedSequence((int(seed), int(row))))


def add_noise(img, sigma, seed):
    """Add per-pixel Gaussian noise (intensity units) and clamp to [0, 1].

    One RNG stream per row keyed by (seed, row), so results do not depend
    on how rows are partitioned across workers.
    """
    _require(sigma >= 0, "sigma must be nonnegative")
    ch = np.array(img.channels, copy=True)
    for r in range(ch.shape[0]):
        ch[r] += _row_rng(seed, r).normal(0.0, sigma, size=ch.shape[1:])
    return PolarizationImage(np.clip(ch, 0.0, 1.0))


def quantize_8bit(img):
    """Quantize intensities to 8 bits, rounding halves away from zero."""
    ch = np.floor(img.channels * 255.0 + 0.5) / 255.0
    return PolarizationImage(ch)


def add_noise_and_quantize(img, sigma, seed):
    """Gaussian noise, clamp, then 8-bit quantization; deterministic per seed."""
    return quantize_8bit(add_noise(img, sigma, seed))


def normals_from_depth(depth, intrinsics):
    """Derive camera-facing normals from a depth map.

    Central differences of the back-projected 3D surface, falling back to
    one-sided differences at validity boundaries. Pixels with no valid
    neighbor along either axis become background.
    """
    _require(isinstance(depth, DepthMap), "depth must be a DepthMap")
    valid = depth.valid
    rays = intrinsics.ray_grid()
    pts = rays * depth.depth[..., None]

    def _diff(axis):
        # per-pixel difference along axis with central/one-sided selection
        p_prev = np.roll(pts, 1, axis=axis)
        p_next = np.roll(pts, -1, axis=axis)
        v_prev = np.roll(valid, 1, axis=axis)
        v_next = np.roll(valid, -1, axis=axis)
        # roll wraps around: kill the wrapped border
        if axis == 0:
            v_prev[0, :] = False
            v_next[-1, :] = False
        else:
            v_prev[:, 0] = False
            v_next[:, -1] = False
        central = v_prev & v_next
        fwd = v_next & ~v_prev
        bwd = v_prev & ~v_next
        d = np.zeros_like(pts)
        d[central] = 0.5 * (p_next[central] - p_prev[central])
        d[fwd] = p_next[fwd] - pts[fwd]
        d[bwd] = pts[bwd] - p_prev[bwd]
        ok = central | fwd | bwd
        return d, ok

    du, oku = _diff(1)
    dv, okv = _diff(0)
    good = valid & oku & okv
    nrm = np.cross(du, dv)
    # orient camera-facing (storage convention nz >= 0)
    flip = nrm[..., 2] < 0
    nrm[flip] *= -1.0
    lens = np.linalg.norm(nrm, axis=2)
    good &= lens > 1e-12
    out = np.zeros_like(nrm)
    out[good] = nrm[good] / lens[good][:, None]
    return NormalMap(out)


def render_scene(scene, intrinsics):
    """Analytic depth, normals and gray image for a synthetic scene.

    Depth and normals are exact surface values along each pixel's ray;
    normals are unit and camera-facing, background pixels are invalid/zero.
    Raises if no pixel sees the scene.
    """
    _require(isinstance(scene, SyntheticScene), "scene must be a SyntheticScene")
    H, W = intrinsics.height, intrinsics.width
    rays = intrinsics.ray_grid()

    if scene.kind == "sphere":
        c = np.asarray(scene.center, dtype=np.float64)
        r = scene.radius
        dd = np.einsum("hwk,hwk->hw", rays, rays)
        dc = np.einsum("hwk,k->hw", rays, c)
        disc = dc * dc - dd * (np.dot(c, c) - r * r)
        hit = disc >= 0.0
        t = np.zeros((H, W))
        t[hit] = (dc[hit] - np.sqrt(disc[hit])) / dd[hit]
        hit &= t > 0
        pts = rays * np.where(hit, t, 0.0)[..., None]
        nrm = np.zeros((H, W, 3))
        nrm[hit] = (c - pts[hit]) / r
        # surface points tilted past 90 deg from the optical axis fall
        # outside the diffuse model's zenith domain; treat as background
        hit &= nrm[..., 2] >= 0.0
        nrm[~hit] = 0.0
        depth = np.where(hit, t, 0.0)
    elif scene.kind == "plane":
        m = np.asarray(scene.plane_normal, dtype=np.float64)
        m = m / np.linalg.norm(m)
        # plane through (0, 0, plane_depth) with camera-facing normal m
        q = np.array([0.0, 0.0, scene.plane_depth])
        dn = np.einsum("hwk,k->hw", rays, m)
        hit = np.abs(dn) > 1e-12
        t = np.zeros((H, W))
        t[hit] = np.dot(q, m) / dn[hit]
        hit &= t > 0
        depth = np.where(hit, t, 0.0)
        nrm = np.zeros((H, W, 3))
        nrm[hit] = m
    else:  # heightfield
        depth, nrm = _render_heightfield(scene, intrinsics)
        hit = depth > 0

    if not hit.any():
        raise PolarshapeError(f"scene {scene.kind!r} intersects no pixel ray")
    gray = np.where(hit, scene.gray, 0.0)
    return DepthMap(depth), NormalMap(nrm), gray


def heightfield_depth_gradients(scene, intrinsics):
    """Analytic D, dD/dx, dD/dy of the sinusoidal heightfield on the grid."""
    H, W = intrinsics.height, intrinsics.width
    u = np.arange(W, dtype=np.float64)[None, :]
    v = np.arange(H, dtype=np.float64)[:, None]
    wu = 2.0 * np.pi * scene.cycles / W
    wv = 2.0 * np.pi * scene.cycles / H
    su, cu = np.sin(wu * u), np.cos(wu * u)
    sv, cv = np.sin(wv * v), np.cos(wv * v)
    depth = scene.base_depth + scene.amplitude * su * sv
    ddx = scene.amplitude * wu * cu * sv
    ddy = scene.amplitude * wv * su * cv
    return depth, np.broadcast_to(ddx, (H, W)).copy(), np.broadcast_to(ddy, (H, W)).copy()


def _render_heightfield(scene, intrinsics):
    depth, ddx, ddy = heightfield_depth_gradients(scene, intrinsics)
    _require((depth > 0).all(), "heightfield must stay in front of the camera")
    H, W = depth.shape
    u = np.arange(W, dtype=np.float64)[None, :]
    v = np.arange(H, dtype=np.float64)[:, None]
    xr = np.broadcast_to((u - intrinsics.px) / intrinsics.fx, (H, W))
    yr = np.broadcast_to((v - intrinsics.py) / intrinsics.fy, (H, W))
    # perspective surface tangents of P(x, y) = (xr*D, yr*D, D)
    tx = np.stack([(ddx * xr * intrinsics.fx + depth) / intrinsics.fx,
                   ddx * yr, ddx], axis=-1)
    ty = np.stack([ddy * xr,
                   (ddy * yr * intrinsics.fy + depth) / intrinsics.fy, ddy], axis=-1)
    nrm = np.cross(tx, ty)
    flip = nrm[..., 2] < 0
    nrm[flip] *= -1.0
    nrm /= np.linalg.norm(nrm, axis=2)[..., None]
    return depth, nrm
