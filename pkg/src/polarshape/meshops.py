"""Mesh-side pipeline: base-depth rasterization, subdivision, depth-guided
deformation, and the mesh/skeleton evaluation metrics.
"""
from __future__ import annotations

import numpy as np
from scipy.spatial import cKDTree

from .core import (
    BodyParams,
    DepthMap,
    PolarshapeError,
    Skeleton,
    TriMesh,
    _require,
)
from . import kernels

__all__ = [
    "render_base_depth",
    "upsample_mesh",
    "deform_to_depth",
    "scaled_rigid_icp",
    "umeyama_similarity",
    "surface_error",
    "mpjpe",
    "param_loss",
    "icosphere",
    "DEFAULT_EXCLUDED_JOINTS",
    "DEFAULT_PARAM_LOSS_WEIGHTS",
    "VISIBILITY_DEPTH_TOL",
]

# feet (10, 11) and hands (22, 23) in the common 24-joint body convention;
# a configuration default, overridable per call
DEFAULT_EXCLUDED_JOINTS = (10, 11, 22, 23)
DEFAULT_PARAM_LOSS_WEIGHTS = (0.2, 0.5, 100.0, 3.0)
# max |vertex depth - rasterized depth| for a vertex to count as visible
VISIBILITY_DEPTH_TOL = 5e-3


def render_base_depth(mesh, intrinsics):
    """Rasterize a camera-frame mesh into a z-buffer depth map.

    Perspective-correct depth interpolation; the nearest surface wins per
    pixel (ties by smaller triangle index); uncovered pixels are invalid.
    """
    _require(isinstance(mesh, TriMesh), "expected a TriMesh")
    if (mesh.vertices[:, 2] <= 0).any():
        raise PolarshapeError("mesh behind camera: all vertex depths must be > 0")
    u, v = intrinsics.project(mesh.vertices)
    buf = kernels.rasterize_depth(u, v, mesh.vertices[:, 2], mesh.faces,
                                  intrinsics.height, intrinsics.width)
    return DepthMap(np.where(np.isfinite(buf), buf, 0.0))


def upsample_mesh(mesh, levels):
    """Midpoint (1-to-4) subdivision applied `levels` times.

    Shared edges produce shared midpoints, so closed meshes stay closed.
    Edges with more than two incident faces are rejected.
    """
    _require(isinstance(levels, (int, np.integer)) and levels >= 0,
             "levels must be a nonnegative integer")
    verts = np.array(mesh.vertices)
    faces = np.array(mesh.faces)
    for _ in range(levels):
        edge_count = {}
        for tri in faces:
            for a, b in ((tri[0], tri[1]), (tri[1], tri[2]), (tri[2], tri[0])):
                key = (min(a, b), max(a, b))
                edge_count[key] = edge_count.get(key, 0) + 1
        bad = [e for e, n in edge_count.items() if n > 2]
        if bad:
            raise PolarshapeError(
                f"non-manifold edge {tuple(int(i) for i in bad[0])} with "
                f"{edge_count[bad[0]]} incident faces")
        midpoint = {}
        new_verts = [verts]
        next_idx = len(verts)
        for key in edge_count:
            midpoint[key] = next_idx
            next_idx += 1
        mids = 0.5 * (verts[[k[0] for k in midpoint]] + verts[[k[1] for k in midpoint]])
        new_verts.append(mids)
        verts = np.vstack(new_verts)
        new_faces = np.empty((4 * len(faces), 3), dtype=np.int64)
        for i, (a, b, c) in enumerate(faces):
            ab = midpoint[(min(a, b), max(a, b))]
            bc = midpoint[(min(b, c), max(b, c))]
            ca = midpoint[(min(c, a), max(c, a))]
            new_faces[4 * i] = (a, ab, ca)
            new_faces[4 * i + 1] = (ab, b, bc)
            new_faces[4 * i + 2] = (ca, bc, c)
            new_faces[4 * i + 3] = (ab, bc, ca)
        faces = new_faces
    return TriMesh(verts, faces)


def _bilinear_masked(values, valid, u, v):
    """Validity-weighted bilinear sampling at (u, v); returns (sample, ok)."""
    H, W = values.shape
    x0 = np.floor(u).astype(np.int64)
    y0 = np.floor(v).astype(np.int64)
    fx = u - x0
    fy = v - y0
    acc = np.zeros_like(u, dtype=np.float64)
    wacc = np.zeros_like(u, dtype=np.float64)
    for dy, dx, w in ((0, 0, (1 - fx) * (1 - fy)), (0, 1, fx * (1 - fy)),
                      (1, 0, (1 - fx) * fy), (1, 1, fx * fy)):
        xx = x0 + dx
        yy = y0 + dy
        inb = (xx >= 0) & (xx < W) & (yy >= 0) & (yy < H)
        xs = np.clip(xx, 0, W - 1)
        ys = np.clip(yy, 0, H - 1)
        wt = np.where(inb & valid[ys, xs], w, 0.0)
        acc += wt * values[ys, xs]
        wacc += wt
    ok = wacc > 1e-12
    out = np.zeros_like(acc)
    out[ok] = acc[ok] / wacc[ok]
    return out, ok


def _vertex_adjacency(num_vertices, faces):
    adj = [set() for _ in range(num_vertices)]
    for a, b, c in faces:
        adj[a].update((b, c))
        adj[b].update((a, c))
        adj[c].update((a, b))
    return [sorted(s) for s in adj]


def deform_to_depth(mesh, refined, base, intrinsics, step=1.0):
    """Displace mesh vertices along their viewing rays toward a refined depth.

    A vertex is visible when it projects inside the image, both depth maps
    sample validly at its projection, and its own depth agrees with the
    rasterized base depth within VISIBILITY_DEPTH_TOL. Visible vertices move
    so their depth changes by step * (refined - base) at their projection;
    invisible vertices receive the average depth displacement of their
    visible 1-ring neighbors (zero if none). Connectivity is unchanged.
    """
    _require(isinstance(mesh, TriMesh), "expected a TriMesh")
    _require(refined.depth.shape == base.depth.shape,
             "refined and base depth maps must share dimensions")
    verts = np.array(mesh.vertices)
    zv = verts[:, 2]
    _require((zv > 0).all(), "mesh must lie in front of the camera")
    u, v = intrinsics.project(verts)

    base_s, ok_b = _bilinear_masked(base.depth, base.valid, u, v)
    both = base.valid & refined.valid
    delta_s, ok_d = _bilinear_masked(refined.depth - base.depth, both, u, v)
    visible = ok_b & ok_d & (np.abs(zv - base_s) <= VISIBILITY_DEPTH_TOL)

    dz = np.zeros(len(verts))
    dz[visible] = step * delta_s[visible]
    if (~visible).any():
        adj = _vertex_adjacency(len(verts), mesh.faces)
        for i in np.nonzero(~visible)[0]:
            nb = [j for j in adj[i] if visible[j]]
            if nb:
                dz[i] = float(np.mean(dz[nb]))
    out = verts * (1.0 + dz / zv)[:, None]
    return TriMesh(out, mesh.faces)


def umeyama_similarity(source, target):
    """Closed-form similarity (s, R, t) minimizing sum ||s R x + t - y||^2."""
    x = np.asarray(source, dtype=np.float64)
    y = np.asarray(target, dtype=np.float64)
    _require(x.shape == y.shape and x.ndim == 2 and x.shape[1] == 3,
             "source and target must be matching (N, 3) arrays")
    mx = x.mean(axis=0)
    my = y.mean(axis=0)
    xc = x - mx
    yc = y - my
    cov = yc.T @ xc / len(x)
    U, d, Vt = np.linalg.svd(cov)
    S = np.eye(3)
    if np.linalg.det(U) * np.linalg.det(Vt) < 0:
        S[2, 2] = -1.0
    R = U @ S @ Vt
    var_x = (xc ** 2).sum() / len(x)
    s = float((d * np.diag(S)).sum() / var_x)
    t = my - s * R @ mx
    return s, R, t


def _principal_axes(points):
    """Right-handed eigenvector frame of the point covariance, eigenvalues
    descending."""
    c = points - points.mean(axis=0)
    w, E = np.linalg.eigh(c.T @ c / len(points))
    E = E[:, ::-1]
    if np.linalg.det(E) < 0:
        E[:, 2] *= -1.0
    return E


def scaled_rigid_icp(source, target, max_iter=50, tol=1e-10):
    """Iterative closest point with a similarity (scale+rigid) update.

    ICP is a local method, so the start matters: candidate initializations
    (centroid/spread alignment plus the four proper sign combinations of a
    principal-axes alignment) are scored by mean nearest-neighbor residual
    and the best seeds the loop. The loop alternates nearest-neighbor
    correspondence against the target with the closed-form similarity fit,
    stopping when the mean residual improves by less than tol or after
    max_iter rounds; everything is deterministic. Returns (scale, rotation,
    translation, aligned source points). Degenerate (collinear or
    coincident) sources are rejected.
    """
    src = np.asarray(source, dtype=np.float64)
    tgt = np.asarray(target, dtype=np.float64)
    _require(src.ndim == 2 and src.shape[1] == 3 and len(src) >= 3,
             "source must be an (N>=3, 3) point set")
    _require(tgt.ndim == 2 and tgt.shape[1] == 3 and len(tgt) >= 3,
             "target must be an (M>=3, 3) point set")
    sc = src - src.mean(axis=0)
    sing = np.linalg.svd(sc, compute_uv=False)
    if sing[1] <= 1e-12 * max(sing[0], 1.0):
        raise PolarshapeError("degenerate source: points are collinear or coincident")

    tree = cKDTree(tgt)
    ms = src.mean(axis=0)
    mt = tgt.mean(axis=0)
    spread_s = np.sqrt((sc ** 2).sum(axis=1).mean())
    spread_t = np.sqrt(((tgt - mt) ** 2).sum(axis=1).mean())
    s0 = spread_t / spread_s if spread_s > 0 else 1.0

    Es = _principal_axes(src)
    Et = _principal_axes(tgt)
    candidates = [np.eye(3)]
    for signs in ((1, 1, 1), (1, -1, -1), (-1, 1, -1), (-1, -1, 1)):
        candidates.append(Et @ np.diag(signs) @ Es.T)

    best = None
    for R0 in candidates:
        t0 = mt - s0 * R0 @ ms
        dist, _ = tree.query(s0 * src @ R0.T + t0)
        res = float(dist.mean())
        if best is None or res < best[0]:
            best = (res, R0, t0)
    s, R, t = s0, best[1], best[2]

    prev = None
    for _ in range(max_iter):
        moved = s * src @ R.T + t
        dist, idx = tree.query(moved)
        res = float(dist.mean())
        if prev is not None and prev - res < tol:
            break
        prev = res
        s, R, t = umeyama_similarity(src, tgt[idx])
    return s, R, t, s * src @ R.T + t


def surface_error(pred, truth):
    """Mean distance (mm) from each predicted vertex to its nearest truth vertex."""
    _require(isinstance(pred, TriMesh) and isinstance(truth, TriMesh),
             "expected TriMesh inputs")
    if pred.num_vertices == 0 or truth.num_vertices == 0:
        raise PolarshapeError("surface error of an empty mesh is undefined")
    dist, _ = cKDTree(truth.vertices).query(pred.vertices)
    return float(dist.mean() * 1000.0)


def mpjpe(pred, truth, joint_subset=24, excluded_joints=DEFAULT_EXCLUDED_JOINTS):
    """Mean per-joint position error in millimeters.

    joint_subset 24 uses every joint; 20 drops excluded_joints (by default
    the two hand and two foot joints of the 24-joint convention).
    """
    _require(isinstance(pred, Skeleton) and isinstance(truth, Skeleton),
             "expected Skeleton inputs")
    _require(joint_subset in (24, 20), "joint_subset must be 24 or 20")
    dist = np.linalg.norm(pred.joints - truth.joints, axis=1)
    if joint_subset == 20:
        _require(len(set(excluded_joints)) == 4
                 and all(0 <= j < 24 for j in excluded_joints),
                 "excluded_joints must be 4 distinct indices in [0, 24)")
        keep = np.setdiff1d(np.arange(24), np.asarray(excluded_joints))
        dist = dist[keep]
    return float(dist.mean() * 1000.0)


def param_loss(pred_params, truth_params, pred_joints, truth_joints,
               weights=DEFAULT_PARAM_LOSS_WEIGHTS):
    """Weighted squared-L2 loss over the 85-dim parameters and the joints.

    weights = (w_shape, w_pose, w_translation, w_joints), defaulting to
    (0.2, 0.5, 100, 3).
    """
    _require(isinstance(pred_params, BodyParams) and isinstance(truth_params, BodyParams),
             "expected BodyParams inputs")
    _require(isinstance(pred_joints, Skeleton) and isinstance(truth_joints, Skeleton),
             "expected Skeleton inputs")
    wb, wp, wt, wj = weights
    loss = wb * np.sum((pred_params.beta - truth_params.beta) ** 2)
    loss += wp * np.sum((pred_params.pose - truth_params.pose) ** 2)
    loss += wt * np.sum((pred_params.translation - truth_params.translation) ** 2)
    loss += wj * np.sum((pred_joints.joints - truth_joints.joints) ** 2)
    return float(loss)


def icosphere(subdivisions=2, radius=1.0, center=(0.0, 0.0, 0.0)):
    """Unit-style icosphere mesh: subdivided icosahedron projected to a sphere."""
    _require(radius > 0, "radius must be positive")
    phi = (1.0 + np.sqrt(5.0)) / 2.0
    verts = np.array([
        (-1, phi, 0), (1, phi, 0), (-1, -phi, 0), (1, -phi, 0),
        (0, -1, phi), (0, 1, phi), (0, -1, -phi), (0, 1, -phi),
        (phi, 0, -1), (phi, 0, 1), (-phi, 0, -1), (-phi, 0, 1),
    ], dtype=np.float64)
    verts /= np.linalg.norm(verts, axis=1)[:, None]
    faces = np.array([
        (0, 11, 5), (0, 5, 1), (0, 1, 7), (0, 7, 10), (0, 10, 11),
        (1, 5, 9), (5, 11, 4), (11, 10, 2), (10, 7, 6), (7, 1, 8),
        (3, 9, 4), (3, 4, 2), (3, 2, 6), (3, 6, 8), (3, 8, 9),
        (4, 9, 5), (2, 4, 11), (6, 2, 10), (8, 6, 7), (9, 8, 1),
    ], dtype=np.int64)
    mesh = TriMesh(verts, faces)
    for _ in range(subdivisions):
        mesh = upsample_mesh(mesh, 1)
        v = np.array(mesh.vertices)
        v /= np.linalg.norm(v, axis=1)[:, None]
        mesh = TriMesh(v, mesh.faces)
    v = np.array(mesh.vertices) * radius + np.asarray(center, dtype=np.float64)
    return TriMesh(v, mesh.faces)
