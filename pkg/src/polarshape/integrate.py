"""Depth-from-normal refinement as sparse linear least squares.

The objective over the pixel grid combines three residual groups:

* normal rows: the predicted normal must be perpendicular to the surface
  tangents T_x, T_y of the perspective depth surface
  P(x, y) = ((x-px) D / fx, (y-py) D / fy, D). Writing
  alpha = <n, ray> with ray = ((x-px)/fx, (y-py)/fy, 1), the dot products
  reduce to T_x . n = alpha * dD/dx + nx * D / fx and
  T_y . n = alpha * dD/dy + ny * D / fy, discretized with forward
  differences (a pixel with no valid forward neighbor contributes no
  residual in that direction);
* data rows: ||ray||^2 * (D - Dbase) per valid pixel;
* smoothness rows: D_i - D_j per 4-neighbor pair, each pair once.

Each group is scaled by the square root of its weight so the objective is a
true sum of squares, solved through the normal equations by Jacobi-
preconditioned conjugate gradient.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .core import DepthMap, NormalMap, PolarshapeError, _require

__all__ = [
    "IntegrationWeights",
    "SparseSystem",
    "DepthSolution",
    "assemble_system",
    "solve_depth",
    "refine_depth",
]

DEFAULT_WEIGHTS = (1.0, 0.06, 0.55)
DEFAULT_TOL = 1e-8


@dataclass(frozen=True)
class IntegrationWeights:
    """Weights of the normal, depth-data, and smoothness terms."""

    lambda_n: float = DEFAULT_WEIGHTS[0]
    lambda_d: float = DEFAULT_WEIGHTS[1]
    lambda_s: float = DEFAULT_WEIGHTS[2]

    def __post_init__(self):
        _require(self.lambda_n >= 0 and self.lambda_d >= 0 and self.lambda_s >= 0,
                 "weights must be nonnegative")
        _require(self.lambda_n + self.lambda_d + self.lambda_s > 0,
                 "at least one weight must be positive")


@dataclass
class SparseSystem:
    """Least-squares system ||A d - b||^2 over the valid pixels.

    Unknown ordering is row-major over valid pixels; index_map holds the
    unknown index per pixel (-1 where the pixel is not an unknown) and x0
    the base depth per unknown, used as the solver's initial guess.
    """

    A: sp.csr_matrix
    b: np.ndarray
    index_map: np.ndarray
    shape: tuple
    x0: np.ndarray

    @property
    def num_unknowns(self):
        return self.A.shape[1]


@dataclass(frozen=True)
class DepthSolution:
    """Refined depth plus solver diagnostics."""

    depth: DepthMap
    iterations: int
    relative_residual: float


def assemble_system(normals, base, intrinsics, weights=None):
    """Build the sparse least-squares system for one image.

    Unknowns are the pixels valid in the base depth. Pixels that are
    foreground in the normal map additionally contribute the two tangent
    residuals; background-in-normals pixels keep their data and smoothness
    rows only. Raises when the base depth has no valid pixel.
    """
    if weights is None:
        weights = IntegrationWeights()
    _require(isinstance(normals, NormalMap) and isinstance(base, DepthMap),
             "expected NormalMap and DepthMap")
    _require(normals.vectors.shape[:2] == base.depth.shape,
             "normals and base depth must share dimensions")
    H, W = base.depth.shape
    valid = base.valid
    n_unknown = int(valid.sum())
    if n_unknown == 0:
        raise PolarshapeError("base depth has no valid pixel")

    index_map = np.full((H, W), -1, dtype=np.int64)
    index_map[valid] = np.arange(n_unknown)

    u = np.arange(W, dtype=np.float64)[None, :]
    v = np.arange(H, dtype=np.float64)[:, None]
    xr = np.broadcast_to((u - intrinsics.px) / intrinsics.fx, (H, W))
    yr = np.broadcast_to((v - intrinsics.py) / intrinsics.fy, (H, W))
    nvec = normals.vectors
    alpha = nvec[..., 0] * xr + nvec[..., 1] * yr + nvec[..., 2]
    fg = normals.foreground & valid

    rows, cols, vals = [], [], []
    rhs_parts = []
    row_base = 0

    def _add(r, c, x):
        rows.append(r)
        cols.append(c)
        vals.append(x)

    sn = np.sqrt(weights.lambda_n)
    if weights.lambda_n > 0:
        # x-direction tangent rows: alpha*(D_E - D_P) + nx*D_P/fx
        mx = fg[:, :-1] & valid[:, 1:]
        rr, cc = np.nonzero(mx)
        m = len(rr)
        if m:
            ridx = row_base + np.arange(m)
            _add(ridx, index_map[rr, cc + 1], sn * alpha[rr, cc])
            _add(ridx, index_map[rr, cc],
                 sn * (nvec[rr, cc, 0] / intrinsics.fx - alpha[rr, cc]))
            rhs_parts.append(np.zeros(m))
            row_base += m
        # y-direction tangent rows: alpha*(D_S - D_P) + ny*D_P/fy
        my = fg[:-1, :] & valid[1:, :]
        rr, cc = np.nonzero(my)
        m = len(rr)
        if m:
            ridx = row_base + np.arange(m)
            _add(ridx, index_map[rr + 1, cc], sn * alpha[rr, cc])
            _add(ridx, index_map[rr, cc],
                 sn * (nvec[rr, cc, 1] / intrinsics.fy - alpha[rr, cc]))
            rhs_parts.append(np.zeros(m))
            row_base += m

    if weights.lambda_d > 0:
        sd = np.sqrt(weights.lambda_d)
        ray_sq = xr * xr + yr * yr + 1.0
        rr, cc = np.nonzero(valid)
        m = len(rr)
        ridx = row_base + np.arange(m)
        coef = sd * ray_sq[rr, cc]
        _add(ridx, index_map[rr, cc], coef)
        rhs_parts.append(coef * base.depth[rr, cc])
        row_base += m

    if weights.lambda_s > 0:
        ss = np.sqrt(weights.lambda_s)
        for pair in ((valid[:, :-1] & valid[:, 1:], 0, 1),
                     (valid[:-1, :] & valid[1:, :], 1, 0)):
            mk, dr, dc = pair
            rr, cc = np.nonzero(mk)
            m = len(rr)
            if m:
                ridx = row_base + np.arange(m)
                _add(ridx, index_map[rr, cc], np.full(m, ss))
                _add(ridx, index_map[rr + dr, cc + dc], np.full(m, -ss))
                rhs_parts.append(np.zeros(m))
                row_base += m

    A = sp.csr_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(row_base, n_unknown))
    b = np.concatenate(rhs_parts) if rhs_parts else np.zeros(0)
    return SparseSystem(A=A, b=b, index_map=index_map, shape=(H, W),
                        x0=base.depth[valid].astype(np.float64))


def solve_depth(system, tol=DEFAULT_TOL, max_iter=None):
    """Minimize ||A d - b||^2 by PCG on the normal equations.

    Jacobi preconditioner; initial guess is the base depth. Converged when
    ||A^T (A d - b)|| / ||A^T b|| <= tol. max_iter defaults to
    10 * sqrt(#unknowns). Raises on non-convergence, attaching the achieved
    relative residual to the message.
    """
    _require(tol > 0, "tol must be positive")
    A, b = system.A, system.b
    n = system.num_unknowns
    if max_iter is None:
        max_iter = max(int(10 * np.sqrt(n)), 25)
    G = (A.T @ A).tocsr()
    rhs = A.T @ b
    rhs_norm = np.linalg.norm(rhs)
    diag = G.diagonal()
    inv_diag = np.where(diag > 0, 1.0 / np.where(diag > 0, diag, 1.0), 1.0)

    x = system.x0.copy()
    if rhs_norm == 0.0:
        x[:] = 0.0
        return _solution(system, x, 0, 0.0)

    r = rhs - G @ x
    z = inv_diag * r
    p = z.copy()
    rz = float(r @ z)
    rel = np.linalg.norm(r) / rhs_norm
    it = 0
    while rel > tol and it < max_iter:
        Gp = G @ p
        denom = float(p @ Gp)
        if denom <= 0.0:
            break  # numerical null space direction; PSD system is converged
        a_step = rz / denom
        x += a_step * p
        it += 1
        if it % 50 == 0:
            r = rhs - G @ x  # periodic recompute against roundoff drift
        else:
            r -= a_step * Gp
        z = inv_diag * r
        rz_new = float(r @ z)
        p = z + (rz_new / rz) * p
        rz = rz_new
        rel = np.linalg.norm(r) / rhs_norm
    if rel > tol:
        raise PolarshapeError(
            f"depth solver did not converge: relative residual {rel:.3e} > "
            f"tol {tol:.3e} after {it} iterations")
    return _solution(system, x, it, float(rel))


def _solution(system, x, iterations, rel):
    depth = np.zeros(system.shape)
    depth[system.index_map >= 0] = x
    return DepthSolution(depth=DepthMap(depth), iterations=iterations,
                         relative_residual=rel)


def refine_depth(normals, base, intrinsics, weights=None, tol=DEFAULT_TOL,
                 max_iter=None):
    """Assemble and solve in one call; weights default to (1.0, 0.06, 0.55)."""
    system = assemble_system(normals, base, intrinsics, weights)
    return solve_depth(system, tol=tol, max_iter=max_iter)
