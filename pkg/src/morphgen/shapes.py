"""Analytic test shapes: boxes and geodesic spheres."""

import numpy as np

from .mesh_io import TriangleMesh

# outward-oriented quads of the unit cube, corners indexed by bits (x, y, z)
_CUBE_QUADS = [
    (0, 2, 3, 1),  # x = 0
    (4, 5, 7, 6),  # x = 1
    (0, 1, 5, 4),  # y = 0
    (2, 6, 7, 3),  # y = 1
    (0, 4, 6, 2),  # z = 0
    (1, 3, 7, 5),  # z = 1
]


def box(lo=(0.0, 0.0, 0.0), hi=(1.0, 1.0, 1.0)):
    """Axis-aligned box as 12 outward-facing triangles on 8 shared vertices."""
    lo = np.asarray(lo, dtype=np.float64)
    hi = np.asarray(hi, dtype=np.float64)
    bits = np.array([[(c >> 2) & 1, (c >> 1) & 1, c & 1] for c in range(8)])
    verts = lo + bits * (hi - lo)
    tris = []
    for a, b, c, d in _CUBE_QUADS:
        tris += [(a, b, c), (a, c, d)]
    return TriangleMesh(verts, np.array(tris))


def _icosahedron():
    p = (1.0 + 5.0 ** 0.5) / 2.0
    v = np.array(
        [
            [-1, p, 0], [1, p, 0], [-1, -p, 0], [1, -p, 0],
            [0, -1, p], [0, 1, p], [0, -1, -p], [0, 1, -p],
            [p, 0, -1], [p, 0, 1], [-p, 0, -1], [-p, 0, 1],
        ],
        dtype=np.float64,
    )
    f = np.array(
        [
            [0, 11, 5], [0, 5, 1], [0, 1, 7], [0, 7, 10], [0, 10, 11],
            [1, 5, 9], [5, 11, 4], [11, 10, 2], [10, 7, 6], [7, 1, 8],
            [3, 9, 4], [3, 4, 2], [3, 2, 6], [3, 6, 8], [3, 8, 9],
            [4, 9, 5], [2, 4, 11], [6, 2, 10], [8, 6, 7], [9, 8, 1],
        ]
    )
    return v / np.linalg.norm(v, axis=1, keepdims=True), f


def icosphere(radius=1.0, center=(0.0, 0.0, 0.0), subdivisions=4):
    """Geodesic sphere; each subdivision splits every triangle into four."""
    verts, faces = _icosahedron()
    verts = list(verts)
    for _ in range(subdivisions):
        cache = {}

        def midpoint(a, b, cache=cache):
            key = (a, b) if a < b else (b, a)
            if key not in cache:
                m = verts[a] + verts[b]
                verts.append(m / np.linalg.norm(m))
                cache[key] = len(verts) - 1
            return cache[key]

        new = []
        for a, b, c in faces:
            ab, bc, ca = midpoint(a, b), midpoint(b, c), midpoint(c, a)
            new += [(a, ab, ca), (b, bc, ab), (c, ca, bc), (ab, bc, ca)]
        faces = np.array(new)
    v = np.asarray(verts) * radius + np.asarray(center, dtype=np.float64)
    return TriangleMesh(v, faces)


def ball_sdf(spec, radius, center):
    """Exact inside-positive signed distance to a sphere, in voxel pitches."""
    pts = spec.centers()
    d = radius - np.linalg.norm(pts - np.asarray(center, dtype=np.float64), axis=-1)
    return d / spec.spacing[0]
