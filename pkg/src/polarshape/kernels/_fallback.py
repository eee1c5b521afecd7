"""Pure-Python/numpy implementations of the hot kernels.

Kept operation-for-operation identical to the compiled versions in
_native.pyx so that both backends return the same bits; any change here
must be mirrored there.
"""
from collections import deque

import numpy as np


def rasterize_depth(u, v, z, faces, height, width):
    """Z-buffer rasterization with perspective-correct depth interpolation.

    u, v are projected pixel coordinates per vertex, z the camera depth
    (> 0). Returns an (height, width) float64 buffer holding the nearest
    depth per covered pixel and +inf elsewhere. Triangles are processed in
    index order with a strict depth test, so depth ties go to the smaller
    triangle index.
    """
    u = np.asarray(u, dtype=np.float64)
    v = np.asarray(v, dtype=np.float64)
    iz = 1.0 / np.asarray(z, dtype=np.float64)
    faces = np.asarray(faces, dtype=np.int64)
    depth = np.full((height, width), np.inf)

    for a, b, c in faces:
        x0, y0 = u[a], v[a]
        x1, y1 = u[b], v[b]
        x2, y2 = u[c], v[c]
        den = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if den == 0.0:
            continue
        cmin = max(int(np.ceil(min(x0, x1, x2))), 0)
        cmax = min(int(np.floor(max(x0, x1, x2))), width - 1)
        rmin = max(int(np.ceil(min(y0, y1, y2))), 0)
        rmax = min(int(np.floor(max(y0, y1, y2))), height - 1)
        if cmin > cmax or rmin > rmax:
            continue
        px = np.arange(cmin, cmax + 1, dtype=np.float64)[None, :]
        py = np.arange(rmin, rmax + 1, dtype=np.float64)[:, None]
        w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
        w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
        w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
        if den > 0.0:
            inside = (w0 >= 0.0) & (w1 >= 0.0) & (w2 >= 0.0)
        else:
            inside = (w0 <= 0.0) & (w1 <= 0.0) & (w2 <= 0.0)
        if not inside.any():
            continue
        wsum = w0 + w1 + w2
        with np.errstate(divide="ignore", invalid="ignore"):
            izp = (w0 * iz[a] + w1 * iz[b] + w2 * iz[c]) / wsum
            d = 1.0 / izp
        sub = depth[rmin:rmax + 1, cmin:cmax + 1]
        upd = inside & (d < sub)
        sub[upd] = d[upd]
    return depth


def propagate_choice(n1, n2, mask, seed_r, seed_c):
    """BFS candidate selection over the 4-connected foreground.

    The seed picks the candidate with the larger z component (tie -> 1);
    every other pixel, when dequeued, picks the candidate whose dot product
    with the average of its already-assigned 4-neighbors is larger
    (tie -> 1). Returns a uint8 map: 0 unreached, 1 -> n1, 2 -> n2.
    """
    h, w = mask.shape
    choice = np.zeros((h, w), dtype=np.uint8)
    enq = np.zeros((h, w), dtype=np.uint8)
    queue = deque()
    queue.append((seed_r, seed_c))
    enq[seed_r, seed_c] = 1

    while queue:
        r, c = queue.popleft()
        if r == seed_r and c == seed_c:
            pick = 1 if n1[r, c, 2] >= n2[r, c, 2] else 2
        else:
            ax = ay = az = 0.0
            for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
                nr, nc = r + dr, c + dc
                if 0 <= nr < h and 0 <= nc < w and choice[nr, nc] != 0:
                    src = n1 if choice[nr, nc] == 1 else n2
                    ax += src[nr, nc, 0]
                    ay += src[nr, nc, 1]
                    az += src[nr, nc, 2]
            d1 = n1[r, c, 0] * ax + n1[r, c, 1] * ay + n1[r, c, 2] * az
            d2 = n2[r, c, 0] * ax + n2[r, c, 1] * ay + n2[r, c, 2] * az
            pick = 1 if d1 >= d2 else 2
        choice[r, c] = pick
        for dr, dc in ((-1, 0), (1, 0), (0, -1), (0, 1)):
            nr, nc = r + dr, c + dc
            if 0 <= nr < h and 0 <= nc < w and mask[nr, nc] and not enq[nr, nc]:
                enq[nr, nc] = 1
                queue.append((nr, nc))
    return choice
