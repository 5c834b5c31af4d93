"""Compiled inner loops (numba). Callers in the public modules validate inputs."""

import math

import numba as nb
import numpy as np

PARALLEL_DET = 1e-12
# how far (in voxels) outside the grid an intersection may land and still be
# snapped onto the boundary layer; absorbs rounding in o + t*d
_EDGE_SNAP = 1e-9


@nb.njit(cache=True, nogil=True)
def moller_trumbore(o, d, a, b, c):
    """Ray/triangle hit distance ``t``, or NaN on a miss."""
    e1x = b[0] - a[0]
    e1y = b[1] - a[1]
    e1z = b[2] - a[2]
    e2x = c[0] - a[0]
    e2y = c[1] - a[1]
    e2z = c[2] - a[2]
    px = d[1] * e2z - d[2] * e2y
    py = d[2] * e2x - d[0] * e2z
    pz = d[0] * e2y - d[1] * e2x
    det = e1x * px + e1y * py + e1z * pz
    if abs(det) < PARALLEL_DET:
        return np.nan
    inv = 1.0 / det
    tx = o[0] - a[0]
    ty = o[1] - a[1]
    tz = o[2] - a[2]
    u = (tx * px + ty * py + tz * pz) * inv
    if u < 0.0 or u > 1.0:
        return np.nan
    qx = ty * e1z - tz * e1y
    qy = tz * e1x - tx * e1z
    qz = tx * e1y - ty * e1x
    v = (d[0] * qx + d[1] * qy + d[2] * qz) * inv
    if v < 0.0 or u + v > 1.0:
        return np.nan
    t = (e2x * qx + e2y * qy + e2z * qz) * inv
    if t < 0.0:
        return np.nan
    return t


@nb.njit(cache=True, nogil=True)
def intersect_pairs(origins, dirs, tris):
    """Vectorized ``moller_trumbore`` over aligned arrays of rays and triangles."""
    n = origins.shape[0]
    out = np.empty(n)
    for i in range(n):
        out[i] = moller_trumbore(origins[i], dirs[i], tris[i, 0], tris[i, 1], tris[i, 2])
    return out


@nb.njit(cache=True, nogil=True)
def _cell(p, origin, h, n):
    f = (p - origin) / h
    if f < -_EDGE_SNAP or f > n + _EDGE_SNAP:
        return -1
    i = int(math.floor(f))
    if i < 0:
        i = 0
    if i > n - 1:
        i = n - 1
    return i


@nb.njit(cache=True, nogil=True)
def _mark(grid, p, origin, spacing, dims):
    i = _cell(p[0], origin[0], spacing[0], dims[0])
    j = _cell(p[1], origin[1], spacing[1], dims[1])
    k = _cell(p[2], origin[2], spacing[2], dims[2])
    if i >= 0 and j >= 0 and k >= 0:
        grid[i, j, k] = 1


@nb.njit(cache=True, nogil=True)
def voxelize_axis(corners, axis, origin, spacing, dims, start, grid):
    """Cast one ray per perpendicular cell-centre row along ``axis``.

    Triangles are binned to the rows their projected bounds overlap, which is
    equivalent to testing every row against every triangle.
    """
    b = (axis + 1) % 3
    c = (axis + 2) % 3
    o = np.zeros(3)
    d = np.zeros(3)
    d[axis] = 1.0
    p = np.zeros(3)
    for m in range(corners.shape[0]):
        tri = corners[m]
        lo_b = min(tri[0, b], tri[1, b], tri[2, b])
        hi_b = max(tri[0, b], tri[1, b], tri[2, b])
        lo_c = min(tri[0, c], tri[1, c], tri[2, c])
        hi_c = max(tri[0, c], tri[1, c], tri[2, c])
        j0 = max(int(math.ceil((lo_b - origin[b]) / spacing[b] - 0.5)), 0)
        j1 = min(int(math.floor((hi_b - origin[b]) / spacing[b] - 0.5)), dims[b] - 1)
        k0 = max(int(math.ceil((lo_c - origin[c]) / spacing[c] - 0.5)), 0)
        k1 = min(int(math.floor((hi_c - origin[c]) / spacing[c] - 0.5)), dims[c] - 1)
        for j in range(j0, j1 + 1):
            for k in range(k0, k1 + 1):
                o[axis] = start
                o[b] = origin[b] + (j + 0.5) * spacing[b]
                o[c] = origin[c] + (k + 0.5) * spacing[c]
                t = moller_trumbore(o, d, tri[0], tri[1], tri[2])
                if t == t:
                    for q in range(3):
                        p[q] = o[q] + t * d[q]
                    _mark(grid, p, origin, spacing, dims)


@nb.njit(cache=True, nogil=True)
def voxelize_axis_brute(corners, axis, origin, spacing, dims, start, grid):
    """Reference pass: every row ray against every triangle."""
    b = (axis + 1) % 3
    c = (axis + 2) % 3
    o = np.zeros(3)
    d = np.zeros(3)
    d[axis] = 1.0
    p = np.zeros(3)
    for j in range(dims[b]):
        for k in range(dims[c]):
            o[axis] = start
            o[b] = origin[b] + (j + 0.5) * spacing[b]
            o[c] = origin[c] + (k + 0.5) * spacing[c]
            for m in range(corners.shape[0]):
                tri = corners[m]
                t = moller_trumbore(o, d, tri[0], tri[1], tri[2])
                if t == t:
                    for q in range(3):
                        p[q] = o[q] + t * d[q]
                    _mark(grid, p, origin, spacing, dims)


@nb.njit(cache=True, nogil=True)
def _sq_edt_1d(f, n, out, v, z):
    # lower envelope of parabolas (q - v)^2 + f(v); +inf samples are skipped
    k = -1
    for q in range(n):
        fq = f[q]
        if fq == np.inf:
            continue
        if k < 0:
            k = 0
            v[0] = q
            z[0] = -np.inf
            z[1] = np.inf
            continue
        while True:
            vk = v[k]
            s = ((fq + q * q) - (f[vk] + vk * vk)) / (2.0 * q - 2.0 * vk)
            if s <= z[k]:
                k -= 1
                if k < 0:
                    break
            else:
                break
        k += 1
        v[k] = q
        z[k] = -np.inf if k == 0 else s
        z[k + 1] = np.inf
    if k < 0:
        for q in range(n):
            out[q] = np.inf
        return
    j = 0
    for q in range(n):
        while z[j + 1] < q:
            j += 1
        dq = q - v[j]
        out[q] = dq * dq + f[v[j]]


@nb.njit(cache=True, nogil=True)
def squared_edt_axis(a, axis):
    """Apply the 1-D squared transform along ``axis`` of a 3-D array in place."""
    n0, n1, n2 = a.shape
    n = a.shape[axis]
    f = np.empty(n)
    out = np.empty(n)
    v = np.empty(n, dtype=np.int64)
    z = np.empty(n + 1)
    if axis == 0:
        for j in range(n1):
            for k in range(n2):
                for q in range(n):
                    f[q] = a[q, j, k]
                _sq_edt_1d(f, n, out, v, z)
                for q in range(n):
                    a[q, j, k] = out[q]
    elif axis == 1:
        for i in range(n0):
            for k in range(n2):
                for q in range(n):
                    f[q] = a[i, q, k]
                _sq_edt_1d(f, n, out, v, z)
                for q in range(n):
                    a[i, q, k] = out[q]
    else:
        for i in range(n0):
            for j in range(n1):
                for q in range(n):
                    f[q] = a[i, j, q]
                _sq_edt_1d(f, n, out, v, z)
                for q in range(n):
                    a[i, j, q] = out[q]


@nb.njit(cache=True, nogil=True)
def render_depth(corners, origin, d, right, up, pitch, width, height, depth):
    """Orthographic first-hit rasterization into ``depth`` (``inf`` = no hit).

    Pixel ``(r, c)`` centre is ``origin + (c + .5) * pitch * right
    - (r + .5) * pitch * up``; rays leave it along ``d``.
    """
    o = np.zeros(3)
    for m in range(corners.shape[0]):
        tri = corners[m]
        cmin = np.inf
        cmax = -np.inf
        rmin = np.inf
        rmax = -np.inf
        for q in range(3):
            du = 0.0
            dv = 0.0
            for s in range(3):
                du += (tri[q, s] - origin[s]) * right[s]
                dv += (tri[q, s] - origin[s]) * up[s]
            cu = du / pitch - 0.5
            rv = -dv / pitch - 0.5
            cmin = min(cmin, cu)
            cmax = max(cmax, cu)
            rmin = min(rmin, rv)
            rmax = max(rmax, rv)
        c0 = max(int(math.ceil(cmin)), 0)
        c1 = min(int(math.floor(cmax)), width - 1)
        r0 = max(int(math.ceil(rmin)), 0)
        r1 = min(int(math.floor(rmax)), height - 1)
        for r in range(r0, r1 + 1):
            for c in range(c0, c1 + 1):
                for s in range(3):
                    o[s] = origin[s] + (c + 0.5) * pitch * right[s] - (r + 0.5) * pitch * up[s]
                t = moller_trumbore(o, d, tri[0], tri[1], tri[2])
                if t == t and t < depth[r, c]:
                    depth[r, c] = t
