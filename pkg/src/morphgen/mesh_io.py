"""STL reading/writing and basic mesh diagnostics.

Meshes are kept as an indexed triangle list: ``vertices`` is an ``(V, 3)``
float64 array and ``triangles`` an ``(M, 3)`` integer array. STL files are
triangle soups, so a loaded mesh has ``V == 3 * M`` unless ``weld=True``.
"""

import re
import struct
from dataclasses import dataclass, field

import numpy as np
from scipy.sparse import coo_matrix
from scipy.sparse.csgraph import connected_components
from scipy.spatial import cKDTree

from .errors import FormatError, ValidationError

__all__ = [
    "TriangleMesh",
    "Aabb",
    "WatertightReport",
    "load_stl",
    "save_stl",
    "stl_bytes",
    "bounding_box",
    "watertight_check",
    "face_normals",
]

_HEADER = 80
_RECORD = 50
_RECORD_DTYPE = np.dtype(
    [("normal", "<f4", (3,)), ("verts", "<f4", (3, 3)), ("attr", "<u2")]
)


def _frozen(a):
    a = np.array(a, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TriangleMesh:
    """Indexed triangle mesh. Arrays are copied and made read-only."""

    vertices: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray = None

    def __post_init__(self):
        v = np.asarray(self.vertices, dtype=np.float64).reshape(-1, 3)
        t = np.asarray(self.triangles, dtype=np.int64).reshape(-1, 3)
        if not np.all(np.isfinite(v)):
            raise ValidationError("mesh has non-finite vertex coordinates")
        if t.size and (t.min() < 0 or t.max() >= len(v)):
            raise ValidationError("triangle index out of range")
        object.__setattr__(self, "vertices", _frozen(v))
        object.__setattr__(self, "triangles", _frozen(t))
        if self.normals is not None:
            n = np.asarray(self.normals, dtype=np.float64).reshape(-1, 3)
            if len(n) != len(t):
                raise ValidationError("need one normal per triangle")
            object.__setattr__(self, "normals", _frozen(n))

    @classmethod
    def from_soup(cls, corners, normals=None):
        """Build from an ``(M, 3, 3)`` array of triangle corners."""
        corners = np.asarray(corners, dtype=np.float64).reshape(-1, 3, 3)
        m = len(corners)
        return cls(corners.reshape(-1, 3), np.arange(3 * m).reshape(m, 3), normals)

    @property
    def n_triangles(self):
        return len(self.triangles)

    @property
    def corners(self):
        """``(M, 3, 3)`` array of triangle corner coordinates."""
        return self.vertices[self.triangles]

    def __len__(self):
        return self.n_triangles

    def welded(self, tol=0.0):
        """Return a copy whose coincident vertices share one index."""
        index, unique = _weld(self.vertices, tol)
        return TriangleMesh(unique, index[self.triangles], self.normals)

    def volume(self):
        """Signed enclosed volume (positive for outward-oriented closed meshes)."""
        c = self.corners
        return float(np.einsum("ij,ij->i", c[:, 0], np.cross(c[:, 1], c[:, 2])).sum() / 6.0)

    def area(self):
        c = self.corners
        return float(0.5 * np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1).sum())


@dataclass(frozen=True)
class Aabb:
    min: tuple
    max: tuple

    def __post_init__(self):
        lo = tuple(float(x) for x in self.min)
        hi = tuple(float(x) for x in self.max)
        if len(lo) != 3 or len(hi) != 3:
            raise ValidationError("Aabb corners must be 3D points")
        if any(a > b for a, b in zip(lo, hi)):
            raise ValidationError(f"Aabb min {lo} exceeds max {hi}")
        object.__setattr__(self, "min", lo)
        object.__setattr__(self, "max", hi)

    @property
    def extent(self):
        return tuple(b - a for a, b in zip(self.min, self.max))

    def union(self, other):
        return Aabb(
            tuple(min(a, b) for a, b in zip(self.min, other.min)),
            tuple(max(a, b) for a, b in zip(self.max, other.max)),
        )

    def contains(self, points):
        p = np.asarray(points, dtype=np.float64).reshape(-1, 3)
        return bool(np.all((p >= self.min) & (p <= self.max)))


def face_normals(corners):
    """Unit right-hand-rule normals; zero for degenerate triangles."""
    corners = np.asarray(corners, dtype=np.float64)
    n = np.cross(corners[:, 1] - corners[:, 0], corners[:, 2] - corners[:, 0])
    norm = np.linalg.norm(n, axis=1, keepdims=True)
    return np.divide(n, norm, out=np.zeros_like(n), where=norm > 0)


def bounding_box(mesh):
    """Tight axis-aligned bounds of the vertices referenced by triangles."""
    if mesh.n_triangles == 0:
        raise ValidationError("bounding box of an empty mesh is undefined")
    pts = mesh.vertices[np.unique(mesh.triangles)]
    return Aabb(tuple(pts.min(axis=0)), tuple(pts.max(axis=0)))


# -- reading -----------------------------------------------------------------


def load_stl(source, weld=False):
    """Read an ASCII or binary STL from a path, bytes, or binary stream.

    The format is binary when the 80-byte header plus declared triangle count
    exactly matches the payload length; otherwise an ASCII parse is tried.
    """
    data = _read_source(source)
    n = len(data)
    if n >= _HEADER + 4:
        (count,) = struct.unpack_from("<I", data, _HEADER)
        if _HEADER + 4 + _RECORD * count == n:
            mesh = _parse_binary(data, count)
            return mesh.welded() if weld else mesh
    if data.lstrip()[:5].lower() == b"solid" and _looks_textual(data):
        mesh = _parse_ascii(data)
    else:
        mesh = _parse_binary(data, None)
    return mesh.welded() if weld else mesh


def _read_source(source):
    if isinstance(source, (bytes, bytearray, memoryview)):
        return bytes(source)
    if hasattr(source, "read"):
        return source.read()
    with open(source, "rb") as fh:
        return fh.read()


def _looks_textual(data):
    head = data[:4096]
    return all(b in b"\t\n\r\f\v" or 32 <= b < 127 for b in head)


def _parse_binary(data, count):
    if len(data) < _HEADER + 4:
        raise FormatError("file too short for a binary STL header", offset=len(data))
    if count is None:
        (count,) = struct.unpack_from("<I", data, _HEADER)
        payload = len(data) - _HEADER - 4
        complete = payload // _RECORD
        if complete < count:
            raise FormatError(
                f"truncated binary STL: header declares {count} triangles, "
                f"only {complete} present",
                offset=_HEADER + 4 + _RECORD * complete,
            )
        raise FormatError(
            f"declared triangle count {count} does not match payload of "
            f"{payload} bytes",
            offset=_HEADER + 4 + _RECORD * count,
        )
    rec = np.frombuffer(data, dtype=_RECORD_DTYPE, count=count, offset=_HEADER + 4)
    corners = rec["verts"].astype(np.float64)
    return TriangleMesh.from_soup(corners, rec["normal"].astype(np.float64))


_TOKEN = re.compile(rb"\S+")


def _parse_ascii(data):
    tokens = [(m.group(), m.start()) for m in _TOKEN.finditer(data)]
    pos = 0

    def take(expected=None):
        nonlocal pos
        if pos >= len(tokens):
            raise FormatError("unexpected end of ASCII STL", offset=len(data))
        tok, off = tokens[pos]
        if expected is not None and tok.lower() != expected:
            raise FormatError(f"expected {expected.decode()!r}, got {tok[:32]!r}", offset=off)
        pos += 1
        return tok, off

    def number():
        tok, off = take()
        try:
            value = float(tok)
        except ValueError:
            raise FormatError(f"unparseable number {tok[:32]!r}", offset=off) from None
        if not np.isfinite(value):
            raise FormatError(f"non-finite number {tok[:32]!r}", offset=off)
        return value

    take(b"solid")
    # solid names are optional free text up to the first facet/endsolid
    while pos < len(tokens) and tokens[pos][0].lower() not in (b"facet", b"endsolid"):
        pos += 1
    corners, normals = [], []
    while True:
        if pos >= len(tokens):
            raise FormatError("missing 'endsolid'", offset=len(data))
        tok, off = tokens[pos]
        low = tok.lower()
        if low == b"endsolid":
            break
        if low != b"facet":
            raise FormatError(f"expected 'facet', got {tok[:32]!r}", offset=off)
        pos += 1
        take(b"normal")
        normals.append([number(), number(), number()])
        take(b"outer")
        take(b"loop")
        tri = []
        for _ in range(3):
            take(b"vertex")
            tri.append([number(), number(), number()])
        take(b"endloop")
        take(b"endfacet")
        corners.append(tri)
    if not corners:
        return TriangleMesh(np.zeros((0, 3)), np.zeros((0, 3), dtype=np.int64))
    return TriangleMesh.from_soup(np.array(corners), np.array(normals))


# -- writing -----------------------------------------------------------------


def stl_bytes(mesh, header=b"morphgen binary STL"):
    """Serialize ``mesh`` as binary STL with recomputed normals."""
    if not isinstance(mesh, TriangleMesh):
        raise ValidationError("expected a TriangleMesh")
    corners = mesh.corners
    if not np.all(np.isfinite(corners)):
        raise ValidationError("mesh has non-finite vertex coordinates")
    c32 = corners.astype(np.float32)
    rec = np.zeros(len(c32), dtype=_RECORD_DTYPE)
    rec["verts"] = c32
    rec["normal"] = face_normals(c32.astype(np.float64)).astype(np.float32)
    head = header[:_HEADER].ljust(_HEADER, b" ")
    return head + struct.pack("<I", len(rec)) + rec.tobytes()


def save_stl(mesh, sink):
    """Write ``mesh`` as binary STL to a path or binary stream.

    Coordinates are stored as float32, so saving a float32-representable mesh
    and loading it back reproduces it bit-for-bit.
    """
    payload = stl_bytes(mesh)
    if hasattr(sink, "write"):
        sink.write(payload)
    else:
        with open(sink, "wb") as fh:
            fh.write(payload)


# -- diagnostics -------------------------------------------------------------


@dataclass
class WatertightReport:
    n_vertices: int
    n_edges: int
    n_triangles: int
    boundary_edges: np.ndarray = field(repr=False)
    nonmanifold_edges: np.ndarray = field(repr=False)
    degenerate_triangles: np.ndarray = field(repr=False)

    @property
    def watertight(self):
        return len(self.boundary_edges) == 0 and len(self.nonmanifold_edges) == 0

    @property
    def euler_characteristic(self):
        return self.n_vertices - self.n_edges + self.n_triangles

    def as_dict(self):
        return {
            "watertight": self.watertight,
            "n_vertices": self.n_vertices,
            "n_edges": self.n_edges,
            "n_triangles": self.n_triangles,
            "boundary_edges": len(self.boundary_edges),
            "nonmanifold_edges": len(self.nonmanifold_edges),
            "degenerate_triangles": len(self.degenerate_triangles),
        }


def _weld(vertices, tol):
    if tol <= 0:
        unique, index = np.unique(vertices, axis=0, return_inverse=True)
        return index.reshape(-1), unique
    pairs = cKDTree(vertices).query_pairs(tol, output_type="ndarray")
    n = len(vertices)
    graph = coo_matrix((np.ones(len(pairs)), (pairs[:, 0], pairs[:, 1])), shape=(n, n))
    _, labels = connected_components(graph, directed=False)
    # representative = first vertex of each cluster, keeps results order-stable
    _, first = np.unique(labels, return_index=True)
    remap = np.empty(labels.max() + 1, dtype=np.int64)
    remap[labels[first]] = np.arange(len(first))
    return remap[labels], vertices[np.sort(first)]


def watertight_check(mesh, weld_tol=0.0):
    """Report boundary, non-manifold and degenerate elements after welding.

    ``weld_tol == 0`` merges only vertices with identical coordinates.
    """
    if mesh.n_triangles == 0:
        empty = np.zeros((0, 2), dtype=np.int64)
        return WatertightReport(0, 0, 0, empty, empty, np.zeros(0, dtype=np.int64))
    index, unique = _weld(mesh.vertices, weld_tol)
    tris = index[mesh.triangles]
    c = unique[tris]
    area2 = np.linalg.norm(np.cross(c[:, 1] - c[:, 0], c[:, 2] - c[:, 0]), axis=1)
    repeated = (tris[:, 0] == tris[:, 1]) | (tris[:, 1] == tris[:, 2]) | (tris[:, 0] == tris[:, 2])
    degenerate = np.flatnonzero(repeated | (area2 == 0))

    edges = np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]])
    edges = np.sort(edges, axis=1)
    edges = edges[edges[:, 0] != edges[:, 1]]
    uniq, counts = np.unique(edges, axis=0, return_counts=True)
    used = np.unique(tris)
    return WatertightReport(
        n_vertices=len(used),
        n_edges=len(uniq),
        n_triangles=len(tris),
        boundary_edges=uniq[counts == 1],
        nonmanifold_edges=uniq[counts > 2],
        degenerate_triangles=degenerate,
    )

