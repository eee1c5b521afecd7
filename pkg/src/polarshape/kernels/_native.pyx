# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: z-buffer rasterizer and BFS disambiguation.

Operation-for-operation identical to _fallback.py; any change here must be
mirrored there so both backends return the same bits.
"""
import numpy as np

cimport numpy as cnp
from libc.math cimport ceil, floor

cnp.import_array()


def rasterize_depth(u, v, z, faces, int height, int width):
    """Z-buffer rasterization with perspective-correct depth interpolation.

    See the fallback implementation for the full contract.
    """
    u_arr = np.ascontiguousarray(u, dtype=np.float64)
    v_arr = np.ascontiguousarray(v, dtype=np.float64)
    iz_arr = 1.0 / np.ascontiguousarray(z, dtype=np.float64)
    f_arr = np.ascontiguousarray(faces, dtype=np.int64)
    depth = np.full((height, width), np.inf)

    cdef const double[:] uu = u_arr
    cdef const double[:] vv = v_arr
    cdef const double[:] iz = iz_arr
    cdef const long long[:, :] ff = f_arr
    cdef double[:, :] dep = depth

    cdef Py_ssize_t t, a, b, c
    cdef int cmin, cmax, rmin, rmax, r, col
    cdef double x0, y0, x1, y1, x2, y2, den
    cdef double px, py, w0, w1, w2, wsum, izp, d
    cdef double lo, hi
    cdef bint inside

    for t in range(ff.shape[0]):
        a = ff[t, 0]
        b = ff[t, 1]
        c = ff[t, 2]
        x0 = uu[a]; y0 = vv[a]
        x1 = uu[b]; y1 = vv[b]
        x2 = uu[c]; y2 = vv[c]
        den = (x1 - x0) * (y2 - y0) - (y1 - y0) * (x2 - x0)
        if den == 0.0:
            continue
        lo = x0
        if x1 < lo: lo = x1
        if x2 < lo: lo = x2
        hi = x0
        if x1 > hi: hi = x1
        if x2 > hi: hi = x2
        cmin = <int>ceil(lo)
        cmax = <int>floor(hi)
        if cmin < 0: cmin = 0
        if cmax > width - 1: cmax = width - 1
        lo = y0
        if y1 < lo: lo = y1
        if y2 < lo: lo = y2
        hi = y0
        if y1 > hi: hi = y1
        if y2 > hi: hi = y2
        rmin = <int>ceil(lo)
        rmax = <int>floor(hi)
        if rmin < 0: rmin = 0
        if rmax > height - 1: rmax = height - 1
        if cmin > cmax or rmin > rmax:
            continue
        for r in range(rmin, rmax + 1):
            py = <double>r
            for col in range(cmin, cmax + 1):
                px = <double>col
                w0 = (x2 - x1) * (py - y1) - (y2 - y1) * (px - x1)
                w1 = (x0 - x2) * (py - y2) - (y0 - y2) * (px - x2)
                w2 = (x1 - x0) * (py - y0) - (y1 - y0) * (px - x0)
                if den > 0.0:
                    inside = w0 >= 0.0 and w1 >= 0.0 and w2 >= 0.0
                else:
                    inside = w0 <= 0.0 and w1 <= 0.0 and w2 <= 0.0
                if not inside:
                    continue
                wsum = w0 + w1 + w2
                izp = (w0 * iz[a] + w1 * iz[b] + w2 * iz[c]) / wsum
                d = 1.0 / izp
                if d < dep[r, col]:
                    dep[r, col] = d
    return depth


def propagate_choice(n1, n2, mask, int seed_r, int seed_c):
    """BFS candidate selection over the 4-connected foreground.

    See the fallback implementation for the full contract.
    """
    n1_arr = np.ascontiguousarray(n1, dtype=np.float64)
    n2_arr = np.ascontiguousarray(n2, dtype=np.float64)
    m_arr = np.ascontiguousarray(mask, dtype=np.uint8)
    cdef int h = m_arr.shape[0]
    cdef int w = m_arr.shape[1]
    choice = np.zeros((h, w), dtype=np.uint8)
    enq = np.zeros((h, w), dtype=np.uint8)
    qr = np.empty(h * w, dtype=np.int32)
    qc = np.empty(h * w, dtype=np.int32)

    cdef const double[:, :, :] a1 = n1_arr
    cdef const double[:, :, :] a2 = n2_arr
    cdef const unsigned char[:, :] mm = m_arr
    cdef unsigned char[:, :] ch = choice
    cdef unsigned char[:, :] eq = enq
    cdef int[:] Qr = qr
    cdef int[:] Qc = qc

    cdef int head = 0, tail = 0
    cdef int r, c, nr, nc, k, pick
    cdef double ax, ay, az, d1, d2
    cdef int[4] dr
    cdef int[4] dc
    dr[0] = -1; dr[1] = 1; dr[2] = 0; dr[3] = 0
    dc[0] = 0; dc[1] = 0; dc[2] = -1; dc[3] = 1

    Qr[tail] = seed_r
    Qc[tail] = seed_c
    tail += 1
    eq[seed_r, seed_c] = 1

    while head < tail:
        r = Qr[head]
        c = Qc[head]
        head += 1
        if r == seed_r and c == seed_c:
            pick = 1 if a1[r, c, 2] >= a2[r, c, 2] else 2
        else:
            ax = 0.0; ay = 0.0; az = 0.0
            for k in range(4):
                nr = r + dr[k]
                nc = c + dc[k]
                if 0 <= nr < h and 0 <= nc < w and ch[nr, nc] != 0:
                    if ch[nr, nc] == 1:
                        ax += a1[nr, nc, 0]
                        ay += a1[nr, nc, 1]
                        az += a1[nr, nc, 2]
                    else:
                        ax += a2[nr, nc, 0]
                        ay += a2[nr, nc, 1]
                        az += a2[nr, nc, 2]
            d1 = a1[r, c, 0] * ax + a1[r, c, 1] * ay + a1[r, c, 2] * az
            d2 = a2[r, c, 0] * ax + a2[r, c, 1] * ay + a2[r, c, 2] * az
            pick = 1 if d1 >= d2 else 2
        ch[r, c] = <unsigned char>pick
        for k in range(4):
            nr = r + dr[k]
            nc = c + dc[k]
            if 0 <= nr < h and 0 <= nc < w and mm[nr, nc] and not eq[nr, nc]:
                eq[nr, nc] = 1
                Qr[tail] = nr
                Qc[tail] = nc
                tail += 1
    return choice
