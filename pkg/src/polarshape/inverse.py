"""Recover surface normals from polarization images by inverting the diffuse model.

Pipeline: Stokes decomposition -> azimuth (mod pi) and degree of polarization
-> zenith angle -> the two ambiguous normals -> disambiguation (oracle or
propagation baseline). Also provides the probability fusion rule, label
generation, the classification+cosine loss, and the mean angular error metric.
"""
from __future__ import annotations

import numpy as np

from .core import (
    AngleMaps,
    DoPMap,
    LabelMap,
    NormalMap,
    PolarizationImage,
    PolarshapeError,
    ProbMaps,
    StokesMaps,
    _require,
    normal_from_angles,
)
from .forward import DEFAULT_REFRACTIVE_INDEX, _ri, dop_from_zenith, dop_max
from . import kernels

__all__ = [
    "stokes_decompose",
    "azimuth_dop",
    "zenith_from_dop",
    "ambiguous_normals",
    "generate_labels",
    "fuse_normals",
    "disambiguate_oracle",
    "disambiguate_propagate",
    "normal_loss",
    "mean_angular_error",
]

# intensity threshold below which a pixel counts as background
S0_EPS = 1e-6
# probability floor inside the cross-entropy
CE_PROB_FLOOR = 1e-12


def stokes_decompose(img):
    """Linear Stokes components from the four polarizer channels."""
    _require(isinstance(img, PolarizationImage), "expected a PolarizationImage")
    i0 = img.channel(0)
    i45 = img.channel(1)
    i90 = img.channel(2)
    i135 = img.channel(3)
    s0 = 0.5 * (i0 + i45 + i90 + i135)
    return StokesMaps(s0, i0 - i90, i45 - i135)


def azimuth_dop(stokes, n=DEFAULT_REFRACTIVE_INDEX):
    """Azimuth (mod pi) and degree of polarization from Stokes components.

    phi = atan2(s2, s1)/2 folded into [0, pi); rho = sqrt(s1^2+s2^2)/s0,
    clamped to the physical maximum for the given refractive index (noise
    and quantization can push the measured value above it). Pixels with
    s0 <= 1e-6 are marked invalid.
    """
    _require(isinstance(stokes, StokesMaps), "expected StokesMaps")
    valid = stokes.s0 > S0_EPS
    phi = 0.5 * np.arctan2(stokes.s2, stokes.s1)
    phi = np.where(phi < 0, phi + np.pi, phi)
    # atan2(0, 0) = 0 already yields the phi = 0 convention for rho = 0
    phi = np.where(valid, phi, 0.0)
    rho = np.zeros_like(stokes.s0)
    amp = np.hypot(stokes.s1, stokes.s2)
    rho[valid] = amp[valid] / stokes.s0[valid]
    rho = np.minimum(rho, dop_max(n))
    return phi, DoPMap(rho, valid)


def _zenith_closed_form(rho, n):
    """Root of the diffuse-DoP quadratic in sin^2(theta), then Newton-polished.

    Isolating the radical in the DoP relation and squaring gives
        a*s^2 + b*s + c = 0,   s = sin^2(theta),
    whose physical root is the one in [0, 1] that satisfies the unsquared
    equation. Two Newton steps on the monotone forward map remove the
    precision loss of arcsin(sqrt(s)) near theta = pi/2.
    """
    k1 = (n - 1.0 / n) ** 2
    k2 = (n + 1.0 / n) ** 2
    A = 2.0 + 2.0 * n * n
    B = k1 + rho * k2
    a = B * B - 16.0 * rho * rho
    b = 16.0 * rho * rho * (1.0 + n * n) - 2.0 * A * B * rho
    c = 4.0 * rho * rho * (n * n - 1.0) ** 2
    disc = np.maximum(b * b - 4.0 * a * c, 0.0)
    sq = np.sqrt(disc)
    q = -0.5 * (b + np.where(b >= 0, sq, -sq))
    with np.errstate(divide="ignore", invalid="ignore"):
        roots = (np.where(a != 0.0, q / a, 0.0), np.where(q != 0.0, c / q, 0.0))

    best_theta = None
    best_resid = None
    for r in roots:
        s = np.clip(r, 0.0, 1.0)
        theta = np.arcsin(np.sqrt(s))
        resid = np.abs(dop_from_zenith(theta, n) - rho)
        resid = np.where((r < -1e-9) | (r > 1.0 + 1e-9), np.inf, resid)
        if best_theta is None:
            best_theta, best_resid = theta, resid
        else:
            take = resid < best_resid
            best_theta = np.where(take, theta, best_theta)
            best_resid = np.where(take, resid, best_resid)

    theta = best_theta
    for _ in range(2):
        st, ct = np.sin(theta), np.cos(theta)
        rad = np.sqrt(n * n - st * st)
        num = k1 * st * st
        den = A - k2 * st * st + 4.0 * ct * rad
        f = num / den - rho
        dnum = 2.0 * k1 * st * ct
        dden = -2.0 * k2 * st * ct - 4.0 * st * rad - 4.0 * ct * ct * st / rad
        fp = (dnum * den - num * dden) / (den * den)
        fp = np.where(np.abs(fp) < 1e-300, 1.0, fp)
        theta = np.clip(theta - f / fp, 0.0, np.pi / 2)
    return theta + 0.0  # normalize -0.0


def zenith_from_dop(rho, n=DEFAULT_REFRACTIVE_INDEX):
    """Zenith angle whose diffuse DoP equals rho; inverse of dop_from_zenith.

    Accepts a DoPMap (invalid pixels map to zenith 0) or a scalar/array.
    rho above the physical maximum is rejected; callers must clamp first.
    """
    nv = _ri(n)
    rmax = dop_max(nv)
    if isinstance(rho, DoPMap):
        vals = np.where(rho.valid, rho.rho, 0.0)
        _require(vals.max(initial=0.0) <= rmax + 1e-12,
                 f"rho exceeds the physical maximum {rmax:.6f}; clamp first")
        return _zenith_closed_form(np.minimum(vals, rmax), nv)
    vals = np.asarray(rho, dtype=np.float64)
    _require(np.isfinite(vals).all() and (vals >= 0).all(), "rho must be in [0, rho_max]")
    _require(vals.max(initial=0.0) <= rmax + 1e-12,
             f"rho exceeds the physical maximum {rmax:.6f}; clamp first")
    out = _zenith_closed_form(np.minimum(vals, rmax), nv)
    if vals.ndim == 0:
        return float(out)
    return out


def ambiguous_normals(angles):
    """The two normals consistent with a measured azimuth (mod pi) and zenith.

    n1 = normal(phi, theta), n2 = normal(phi + pi, theta). Background (invalid)
    pixels are zero in both maps.
    """
    _require(isinstance(angles, AngleMaps), "expected AngleMaps")
    va = angles.valid
    phi = np.where(va, angles.azimuth, 0.0)
    theta = np.where(va, angles.zenith, 0.0)
    n1 = normal_from_angles(phi, theta)
    n2 = normal_from_angles(phi + np.pi, theta)
    n1[~va] = 0.0
    n2[~va] = 0.0
    return NormalMap(n1), NormalMap(n2)


def generate_labels(n1, n2, target):
    """Per-pixel category: 0 on background, else the candidate closer in cosine.

    Ties go to category 1 for determinism.
    """
    _require(n1.vectors.shape == n2.vectors.shape == target.vectors.shape,
             "normal maps must share dimensions")
    fg = target.foreground
    d1 = np.einsum("hwk,hwk->hw", n1.vectors, target.vectors)
    d2 = np.einsum("hwk,hwk->hw", n2.vectors, target.vectors)
    labels = np.where(fg, np.where(d1 >= d2, 1, 2), 0)
    return LabelMap(labels)


def fuse_normals(n1, n2, probs):
    """Probability-weighted fusion of the ambiguous normals.

    n3 = (1 - p0) * (p1*n1 + p2*n2) / ||p1*n1 + p2*n2||; pixels where the
    blend is shorter than 1e-12 become zero vectors. The output magnitude is
    1 - p0, a soft foreground mask, so the result is a non-unit NormalMap.
    """
    _require(isinstance(probs, ProbMaps), "expected ProbMaps")
    _require(n1.vectors.shape == n2.vectors.shape, "normal maps must share dimensions")
    _require(probs.p0.shape == n1.vectors.shape[:2],
             "probability maps must match the normal maps")
    blend = probs.p1[..., None] * n1.vectors + probs.p2[..., None] * n2.vectors
    norm = np.linalg.norm(blend, axis=2)
    ok = norm > 1e-12
    out = np.zeros_like(blend)
    scale = (1.0 - probs.p0[ok]) / norm[ok]
    out[ok] = blend[ok] * scale[:, None]
    return NormalMap(out, unit=False)


def disambiguate_oracle(n1, n2, target):
    """Pick, per pixel, the ambiguous normal closer (in cosine) to the target.

    An upper-bound baseline standing in for a trained classifier. Background
    pixels of the target map come out zero.
    """
    _require(n1.vectors.shape == n2.vectors.shape == target.vectors.shape,
             "normal maps must share dimensions")
    fg = target.foreground
    d1 = np.einsum("hwk,hwk->hw", n1.vectors, target.vectors)
    d2 = np.einsum("hwk,hwk->hw", n2.vectors, target.vectors)
    pick1 = (d1 >= d2)[..., None]
    out = np.where(pick1, n1.vectors, n2.vectors)
    out = np.where(fg[..., None], out, 0.0)
    return NormalMap(out)


def disambiguate_propagate(n1, n2, mask, seed_pixel=None):
    """Smoothness-based disambiguation: BFS from a seed over the foreground.

    The seed picks the candidate with the larger z component (tie -> n1);
    every later pixel picks the candidate with the larger dot product
    against the average of its already-assigned 4-neighbors. Deterministic.
    Pixels in 4-connected components not reachable from the seed stay zero.

    seed_pixel defaults to the foreground pixel nearest the foreground
    centroid; must be a foreground pixel when given.
    """
    _require(n1.vectors.shape == n2.vectors.shape, "normal maps must share dimensions")
    mask = np.asarray(mask, dtype=bool)
    _require(mask.shape == n1.vectors.shape[:2], "mask must match the normal maps")
    if not mask.any():
        raise PolarshapeError("empty foreground mask")
    if seed_pixel is None:
        rows, cols = np.nonzero(mask)
        cr, cc = rows.mean(), cols.mean()
        k = np.argmin((rows - cr) ** 2 + (cols - cc) ** 2)
        seed_pixel = (int(rows[k]), int(cols[k]))
    sr, sc = int(seed_pixel[0]), int(seed_pixel[1])
    if not (0 <= sr < mask.shape[0] and 0 <= sc < mask.shape[1]) or not mask[sr, sc]:
        raise PolarshapeError(f"seed pixel {(sr, sc)} is not in the foreground mask")

    choice = kernels.propagate_choice(
        np.ascontiguousarray(n1.vectors), np.ascontiguousarray(n2.vectors),
        np.ascontiguousarray(mask, dtype=np.uint8), sr, sc)
    out = np.zeros_like(n1.vectors)
    out[choice == 1] = n1.vectors[choice == 1]
    out[choice == 2] = n2.vectors[choice == 2]
    return NormalMap(out)


def normal_loss(pred, probs, labels, target, lambda_c=2.0, lambda_n=1.0):
    """Classification cross-entropy plus cosine loss, averaged over all pixels.

    (1/HW) * sum[ lambda_c * CE(y, p) + lambda_n * (1 - <pred, target>) ]
    with CE the 3-way natural-log cross-entropy -log p_y (probabilities
    floored at 1e-12). The cosine term is 0 where the target is background.
    """
    _require(lambda_c >= 0 and lambda_n >= 0, "loss weights must be nonnegative")
    _require(isinstance(probs, ProbMaps) and isinstance(labels, LabelMap),
             "expected ProbMaps and LabelMap")
    _require(pred.vectors.shape == target.vectors.shape
             and probs.p0.shape == pred.vectors.shape[:2]
             and labels.labels.shape == pred.vectors.shape[:2],
             "inputs must share dimensions")
    stacked = np.stack([probs.p0, probs.p1, probs.p2], axis=-1)
    p_y = np.take_along_axis(stacked, labels.labels[..., None].astype(np.int64),
                             axis=2)[..., 0]
    ce = -np.log(np.clip(p_y, CE_PROB_FLOOR, 1.0))
    cos = np.einsum("hwk,hwk->hw", pred.vectors, target.vectors)
    cos_term = np.where(target.foreground, 1.0 - cos, 0.0)
    return float(np.mean(lambda_c * ce + lambda_n * cos_term))


def mean_angular_error(pred, target):
    """Mean angle in degrees between two unit normal maps.

    Averaged over pixels valid (non-background) in both maps; raises when
    the valid sets do not intersect.
    """
    _require(pred.vectors.shape == target.vectors.shape,
             "normal maps must share dimensions")
    both = pred.foreground & target.foreground
    if not both.any():
        raise PolarshapeError("no pixel is valid in both normal maps")
    dots = np.einsum("hwk,hwk->hw", pred.vectors, target.vectors)[both]
    ang = np.arccos(np.clip(dots, -1.0, 1.0))
    return float(np.degrees(ang.mean()))
