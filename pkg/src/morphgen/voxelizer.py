"""Surface voxelization by axis-aligned ray casting.

For each principal axis one ray is cast along every row of cell centres
perpendicular to it. Every intersection point of every ray with every triangle
marks the voxel that contains it (floor indexing on the grid), and the three
axis passes are OR-combined.
"""

import struct
import warnings
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import FormatError, ValidationError
from .mesh_io import Aabb, TriangleMesh, bounding_box

__all__ = [
    "GridSpec",
    "BinaryGrid",
    "Ray",
    "make_grid",
    "make_isotropic_grid",
    "ray_triangle_intersect",
    "voxelize",
    "save_grid",
    "load_grid",
]

GRID_MAGIC = b"MGVX"
GRID_VERSION = 1


@dataclass(frozen=True)
class GridSpec:
    """Structured Cartesian grid: ``dims`` cells of size ``spacing`` from ``origin``."""

    dims: tuple
    origin: tuple
    spacing: tuple

    def __post_init__(self):
        dims = tuple(int(n) for n in self.dims)
        origin = tuple(float(x) for x in self.origin)
        spacing = tuple(float(h) for h in self.spacing)
        if len(dims) != 3 or len(origin) != 3 or len(spacing) != 3:
            raise ValidationError("GridSpec needs three dims, origin and spacing entries")
        if min(dims) < 2:
            raise ValidationError(f"grid dims must be >= 2 per axis, got {dims}")
        if not all(np.isfinite(origin)) or not all(np.isfinite(spacing)) or min(spacing) <= 0:
            raise ValidationError(f"grid spacing must be finite and positive, got {spacing}")
        object.__setattr__(self, "dims", dims)
        object.__setattr__(self, "origin", origin)
        object.__setattr__(self, "spacing", spacing)

    @property
    def shape(self):
        return self.dims

    @property
    def size(self):
        return int(np.prod(self.dims))

    @property
    def upper(self):
        return tuple(o + n * h for o, n, h in zip(self.origin, self.dims, self.spacing))

    @property
    def box(self):
        return Aabb(self.origin, self.upper)

    @property
    def isotropic(self):
        h = self.spacing
        return abs(h[0] - h[1]) <= 1e-9 * h[0] and abs(h[0] - h[2]) <= 1e-9 * h[0]

    def axis_centers(self, axis):
        return self.origin[axis] + (np.arange(self.dims[axis]) + 0.5) * self.spacing[axis]

    def centers(self):
        """Cell-centre coordinates, shape ``dims + (3,)``."""
        return np.stack(np.meshgrid(*(self.axis_centers(a) for a in range(3)), indexing="ij"), axis=-1)

    def index_to_world(self, ijk):
        """Map (fractional) cell indices to world coordinates of cell centres."""
        ijk = np.asarray(ijk, dtype=np.float64)
        return np.asarray(self.origin) + (ijk + 0.5) * np.asarray(self.spacing)

    def to_dict(self):
        return {"dims": list(self.dims), "origin": list(self.origin), "spacing": list(self.spacing)}

    @classmethod
    def from_dict(cls, d):
        return cls(tuple(d["dims"]), tuple(d["origin"]), tuple(d["spacing"]))


@dataclass(frozen=True, eq=False)
class BinaryGrid:
    """Occupancy grid; ``bits`` is a read-only uint8 array of shape ``spec.dims``."""

    spec: GridSpec
    bits: np.ndarray

    def __post_init__(self):
        bits = np.array(self.bits, dtype=np.uint8, copy=True)
        if bits.shape != self.spec.dims:
            raise ValidationError(f"grid payload shape {bits.shape} != dims {self.spec.dims}")
        if bits.size and bits.max() > 1:
            raise ValidationError("binary grid values must be 0 or 1")
        bits.setflags(write=False)
        object.__setattr__(self, "bits", bits)

    @property
    def count(self):
        return int(self.bits.sum())

    def __eq__(self, other):
        return (
            isinstance(other, BinaryGrid)
            and self.spec == other.spec
            and np.array_equal(self.bits, other.bits)
        )


@dataclass(frozen=True)
class Ray:
    origin: tuple
    direction: tuple

    def __post_init__(self):
        o = np.asarray(self.origin, dtype=np.float64).reshape(3)
        d = np.asarray(self.direction, dtype=np.float64).reshape(3)
        if abs(np.linalg.norm(d) - 1.0) > 1e-12:
            raise ValidationError("ray direction must be a unit vector")
        object.__setattr__(self, "origin", tuple(o))
        object.__setattr__(self, "direction", tuple(d))

    def at(self, t):
        return np.asarray(self.origin) + t * np.asarray(self.direction)


def make_grid(box, resolution, padding=0.0):
    """Cover ``box`` (grown by ``padding`` on every side) with ``resolution`` cells."""
    dims = tuple(int(n) for n in resolution)
    if len(dims) != 3 or min(dims) < 2:
        raise ValidationError(f"resolution must be >= 2 per axis, got {resolution}")
    if padding < 0:
        raise ValidationError("padding must be non-negative")
    extent = np.asarray(box.extent) + 2.0 * padding
    if np.any(extent <= 0):
        raise ValidationError(f"degenerate bounding box {box} with padding {padding}")
    origin = np.asarray(box.min) - padding
    return GridSpec(dims, tuple(origin), tuple(extent / np.asarray(dims)))


def make_isotropic_grid(box, resolution, padding=0.0):
    """Like :func:`make_grid` but with one cubic pitch, centred on ``box``.

    The pitch is the largest per-axis requirement so the padded box still fits.
    """
    dims = tuple(int(n) for n in resolution)
    spec = make_grid(box, dims, padding)
    h = max(spec.spacing)
    center = (np.asarray(box.min) + np.asarray(box.max)) / 2.0
    origin = center - np.asarray(dims) * h / 2.0
    return GridSpec(dims, tuple(origin), (h, h, h))


def ray_triangle_intersect(ray, tri):
    """Möller–Trumbore test. Returns ``(t, p)`` for a hit with ``t >= 0``, else None."""
    tri = np.asarray(tri, dtype=np.float64).reshape(3, 3)
    if not np.all(np.isfinite(tri)):
        raise ValidationError("triangle vertices must be finite")
    o = np.asarray(ray.origin)
    d = np.asarray(ray.direction)
    t = _kernels.moller_trumbore(o, d, tri[0], tri[1], tri[2])
    if np.isnan(t):
        return None
    return float(t), o + t * d


def voxelize(mesh, spec, brute_force=False):
    """Ray-cast ``mesh`` onto ``spec`` and return the surface occupancy grid.

    ``brute_force=True`` tests every row ray against every triangle; it is
    meant as a reference for the binned default.
    """
    if not isinstance(mesh, TriangleMesh) or mesh.n_triangles == 0:
        raise ValidationError("voxelize needs a non-empty TriangleMesh")
    box = bounding_box(mesh)
    grid_box = spec.box
    if not (grid_box.contains(np.asarray(box.min)) and grid_box.contains(np.asarray(box.max))):
        warnings.warn("grid does not cover the mesh bounds; outside hits are dropped", stacklevel=2)
    corners = np.ascontiguousarray(mesh.corners)
    origin = np.asarray(spec.origin)
    spacing = np.asarray(spec.spacing)
    dims = np.asarray(spec.dims, dtype=np.int64)
    bits = np.zeros(spec.dims, dtype=np.uint8)
    kernel = _kernels.voxelize_axis_brute if brute_force else _kernels.voxelize_axis
    for axis in range(3):
        # start strictly before both the grid and the mesh on this axis
        start = min(origin[axis], box.min[axis]) - spacing[axis]
        kernel(corners, axis, origin, spacing, dims, start, bits)
    return BinaryGrid(spec, bits)


# -- MGVX files --------------------------------------------------------------

_GRID_HEAD = struct.Struct("<4sI3I3d3d")


def _spec_header(magic, spec):
    return _GRID_HEAD.pack(magic, GRID_VERSION, *spec.dims, *spec.origin, *spec.spacing)


def _read_spec_header(data, magic):
    if len(data) < _GRID_HEAD.size:
        raise FormatError("file too short for grid header", offset=len(data))
    m, version, *rest = _GRID_HEAD.unpack_from(data, 0)
    if m != magic:
        raise FormatError(f"bad magic {m!r}, expected {magic!r}", offset=0)
    if version != GRID_VERSION:
        raise FormatError(f"unsupported version {version}", offset=4)
    return GridSpec(tuple(rest[0:3]), tuple(rest[3:6]), tuple(rest[6:9]))


def grid_bytes(grid):
    flat = grid.bits.ravel(order="F")
    return _spec_header(GRID_MAGIC, grid.spec) + np.packbits(flat, bitorder="little").tobytes()


def save_grid(grid, path):
    """Write an MGVX file: header then bits packed x-fastest, LSB first."""
    with open(path, "wb") as fh:
        fh.write(grid_bytes(grid))


def load_grid(path):
    with open(path, "rb") as fh:
        data = fh.read()
    spec = _read_spec_header(data, GRID_MAGIC)
    need = (spec.size + 7) // 8
    payload = np.frombuffer(data, dtype=np.uint8, offset=_GRID_HEAD.size)
    if len(payload) != need:
        raise FormatError(f"expected {need} payload bytes, found {len(payload)}", offset=_GRID_HEAD.size)
    flat = np.unpackbits(payload, bitorder="little")[: spec.size]
    return BinaryGrid(spec, flat.reshape(spec.dims, order="F"))
