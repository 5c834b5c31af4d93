"""Marching cubes with a face-consistent case table.

Table provenance: the 256-entry table is generated here rather than copied.
For every corner sign pattern, each cube face contributes iso-line segments
joining its sign-changing edges; on the ambiguous face pattern (diagonal
corners positive) the positive corners are always kept apart. Because this
rule only looks at the four values of a face, the two cubes sharing a face
always produce the same segments on it, so the extracted surface is a closed
2-manifold wherever it does not reach the grid boundary. Segments are
oriented consistently as boundaries of the positive region on the cube surface,
chained into loops and triangulated without any diagonal that joins two
vertices of one cube face; triangle normals point towards decreasing field
values.

Corner ``c`` of a cube sits at offset ``(c & 1, c >> 1 & 1, c >> 2 & 1)``.
"""

import numpy as np

from .errors import NoInterfaceError, ValidationError
from .mesh_io import TriangleMesh

__all__ = ["marching_cubes", "CASE_TRIANGLES", "CUBE_EDGES"]

DEFAULT_TIE_EPS = 1e-3

_CORNERS = np.array([[c & 1, (c >> 1) & 1, (c >> 2) & 1] for c in range(8)])


def _cube_edges():
    edges = []
    for c0 in range(8):
        for axis in range(3):
            if not (c0 >> axis) & 1:
                edges.append((c0, c0 | (1 << axis), axis))
    return edges


CUBE_EDGES = _cube_edges()
_EDGE_INDEX = {frozenset(e[:2]): n for n, e in enumerate(CUBE_EDGES)}


def _faces():
    faces = []
    for axis in range(3):
        b, c = (axis + 1) % 3, (axis + 2) % 3
        for side in (0, 1):
            base = side << axis
            ring = [base, base | 1 << b, base | 1 << b | 1 << c, base | 1 << c]
            normal = np.zeros(3)
            normal[axis] = 1.0 if side else -1.0
            faces.append((ring, normal))
    return faces


_FACES = _faces()


def _edge_mid(e):
    c0, c1, _ = CUBE_EDGES[e]
    return (_CORNERS[c0] + _CORNERS[c1]) / 2.0


def _oriented(a, b, positive_corner, normal):
    mid = (_edge_mid(a) + _edge_mid(b)) / 2.0
    left = np.cross(normal, _edge_mid(b) - _edge_mid(a))
    return (b, a) if np.dot(left, _CORNERS[positive_corner] - mid) > 0 else (a, b)


def _case_triangles(case):
    inside = [(case >> c) & 1 for c in range(8)]
    nxt = {}
    for ring, normal in _FACES:
        edges = [_EDGE_INDEX[frozenset((ring[q], ring[(q + 1) % 4]))] for q in range(4)]
        crossing = [q for q in range(4) if inside[ring[q]] != inside[ring[(q + 1) % 4]]]
        segments = []
        if len(crossing) == 2:
            q0, q1 = crossing
            pos = next(ring[q] for q in range(4) if inside[ring[q]])
            segments.append(_oriented(edges[q0], edges[q1], pos, normal))
        elif len(crossing) == 4:
            for q in range(4):
                if inside[ring[q]]:
                    # cut off this positive corner: its two incident face edges
                    segments.append(_oriented(edges[(q - 1) % 4], edges[q], ring[q], normal))
        for a, b in segments:
            nxt[a] = b
    tris = []
    while nxt:
        start = min(nxt)
        loop = [start]
        e = nxt.pop(start)
        while e != start:
            loop.append(e)
            e = nxt.pop(e)
        tris += _triangulate(loop)
    return tris


def _shares_face(a, b):
    (a0, a1, _), (b0, b1, _) = CUBE_EDGES[a], CUBE_EDGES[b]
    common = np.ones(3, dtype=bool)
    for c in (a1, b0, b1):
        common &= _CORNERS[c] == _CORNERS[a0]
    return bool(common.any())


def _triangulate(loop):
    """Triangulate a loop without diagonals between vertices on one cube face.

    Such a diagonal would cross the shared face, and the neighbouring cube can
    pick the same diagonal, leaving an edge with four incident triangles.
    """
    n = len(loop)
    cost = {}
    choice = {}

    def bad(i, j):
        return 0 if j - i == 1 or (i == 0 and j == n - 1) else int(_shares_face(loop[i], loop[j]))

    for span in range(2, n):
        for i in range(n - span):
            j = i + span
            best = None
            for k in range(i + 1, j):
                c = cost.get((i, k), 0) + cost.get((k, j), 0) + bad(i, k) + bad(k, j)
                if best is None or c < best:
                    best, choice[i, j] = c, k
            cost[i, j] = best
    if cost[0, n - 1]:
        raise AssertionError(f"no face-safe triangulation for loop {loop}")
    out = []
    stack = [(0, n - 1)]
    while stack:
        i, j = stack.pop()
        if j - i < 2:
            continue
        k = choice[i, j]
        out.append((loop[i], loop[k], loop[j]))
        stack += [(i, k), (k, j)]
    return out


def _build_table():
    cases = [_case_triangles(c) for c in range(256)]
    width = max(len(t) for t in cases)
    table = -np.ones((256, width, 3), dtype=np.int64)
    for c, tris in enumerate(cases):
        if tris:
            table[c, : len(tris)] = tris
    return table


CASE_TRIANGLES = _build_table()


def marching_cubes(field, iso=0.0, tie_eps=DEFAULT_TIE_EPS):
    """Extract the ``iso`` surface of a sampled field as a watertight mesh.

    Samples are cell centres of ``field.spec``; vertices are placed by linear
    interpolation along cell edges and returned in world coordinates. Each
    grid edge yields at most one vertex, shared by all cells around it.
    Samples within ``tie_eps`` of ``iso`` are moved to ``iso - tie_eps`` so no
    vertex lands on (or numerically next to) a sample point.
    """
    values = np.asarray(field.values, dtype=np.float64)
    if not np.all(np.isfinite(values)):
        raise ValidationError("marching cubes needs a finite field")
    lo, hi = values.min(), values.max()
    if not lo < iso < hi:
        raise NoInterfaceError(f"iso value {iso} outside field range [{lo}, {hi}]")
    if tie_eps > 0:
        values = np.where(np.abs(values - iso) < tie_eps, iso - tie_eps, values)
    inside = values > iso
    nx, ny, nz = values.shape

    # one vertex per sign-changing grid edge, numbered by (axis, C-order index)
    edge_ids = []
    positions = []
    count = 0
    for axis in range(3):
        lo_sl = [slice(None)] * 3
        hi_sl = [slice(None)] * 3
        lo_sl[axis] = slice(0, -1)
        hi_sl[axis] = slice(1, None)
        a, b = values[tuple(lo_sl)], values[tuple(hi_sl)]
        cross = inside[tuple(lo_sl)] != inside[tuple(hi_sl)]
        ids = -np.ones(cross.shape, dtype=np.int64)
        idx = np.nonzero(cross)
        ids[idx] = np.arange(count, count + len(idx[0]))
        count += len(idx[0])
        fa, fb = a[idx], b[idx]
        t = (iso - fa) / (fb - fa)
        pos = np.stack(idx, axis=1).astype(np.float64)
        pos[:, axis] += t
        edge_ids.append(ids)
        positions.append(pos)
    if count == 0:
        raise NoInterfaceError("field has no crossing of the iso value")
    positions = np.concatenate(positions)

    case = np.zeros((nx - 1, ny - 1, nz - 1), dtype=np.int64)
    for c, (dx, dy, dz) in enumerate(_CORNERS):
        case |= inside[dx : nx - 1 + dx, dy : ny - 1 + dy, dz : nz - 1 + dz].astype(np.int64) << c
    cells = np.nonzero((case != 0) & (case != 255))
    case = case[cells]
    ci, cj, ck = cells

    cube_vertex = np.empty((len(case), 12), dtype=np.int64)
    for e, (c0, _, axis) in enumerate(CUBE_EDGES):
        dx, dy, dz = _CORNERS[c0]
        cube_vertex[:, e] = edge_ids[axis][ci + dx, cj + dy, ck + dz]

    local = CASE_TRIANGLES[case]  # (cells, width, 3)
    valid = local[:, :, 0] >= 0
    rows = np.broadcast_to(np.arange(len(case))[:, None, None], local.shape)
    tris = cube_vertex[rows, np.where(local < 0, 0, local)][valid]

    spec = field.spec
    world = np.asarray(spec.origin) + (positions + 0.5) * np.asarray(spec.spacing)
    return TriangleMesh(world, tris)
