"""Hole filling, exact Euclidean distance transform and signed distance fields.

Distances are measured in voxel pitches. Signed distance fields are positive
inside the solid and negative outside.
"""

from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from . import _kernels
from .errors import FormatError, ValidationError
from .voxelizer import BinaryGrid, GridSpec, _read_spec_header, _spec_header, _GRID_HEAD

__all__ = [
    "ScalarField",
    "fill_holes",
    "edt",
    "signed_distance",
    "save_field",
    "load_field",
    "DEFAULT_DILATION_ITERS",
]

FIELD_MAGIC = b"MGSF"
DEFAULT_DILATION_ITERS = 2

# face neighbours only; diagonal moves would leak through one-voxel shells
_SIX = ndimage.generate_binary_structure(3, 1)


@dataclass(frozen=True, eq=False)
class ScalarField:
    spec: GridSpec
    values: np.ndarray

    def __post_init__(self):
        values = np.array(self.values, copy=True)
        if values.dtype not in (np.float32, np.float64):
            values = values.astype(np.float64)
        if values.shape != self.spec.dims:
            raise ValidationError(f"field shape {values.shape} != dims {self.spec.dims}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __eq__(self, other):
        return (
            isinstance(other, ScalarField)
            and self.spec == other.spec
            and np.array_equal(self.values, other.values)
        )


def _boundary_mask(shape):
    mask = np.zeros(shape, dtype=bool)
    mask[0, :, :] = mask[-1, :, :] = True
    mask[:, 0, :] = mask[:, -1, :] = True
    mask[:, :, 0] = mask[:, :, -1] = True
    return mask


def exterior(free):
    """Voxels of ``free`` reachable from the grid boundary through ``free``."""
    labels, _ = ndimage.label(free, structure=_SIX)
    touching = np.unique(labels[_boundary_mask(free.shape) & free])
    return np.isin(labels, touching[touching > 0])


def fill_holes(grid, dilation_iters=DEFAULT_DILATION_ITERS):
    """Make every region not reachable from the grid boundary solid.

    The shell is first dilated ``dilation_iters`` times so pinholes narrower
    than that cannot connect the inside to the outside. The exterior reached
    from the boundary is then dilated back by the same amount and the result
    is its complement. The output contains the input and the operation is
    idempotent.
    """
    if dilation_iters < 0:
        raise ValidationError("dilation_iters must be >= 0")
    shell = grid.bits.astype(bool)
    if dilation_iters:
        blocked = ndimage.binary_dilation(shell, _SIX, iterations=dilation_iters)
    else:
        blocked = shell
    outside = exterior(~blocked)
    if dilation_iters and outside.any():
        outside = ndimage.binary_dilation(outside, _SIX, iterations=dilation_iters)
    return BinaryGrid(grid.spec, ~outside)


def edt(grid):
    """Exact distance from each set voxel to the nearest unset voxel.

    Unset voxels get 0. If there is no unset voxel every value is ``inf``.
    Separable lower-envelope transform, one pass per axis.
    """
    bits = grid.bits if isinstance(grid, BinaryGrid) else np.asarray(grid)
    sq = np.where(bits.astype(bool), np.inf, 0.0)
    for axis in range(3):
        _kernels.squared_edt_axis(sq, axis)
    out = np.sqrt(sq)
    if isinstance(grid, BinaryGrid):
        return ScalarField(grid.spec, out)
    return out


def signed_distance(filled):
    """Signed distance of a filled solid, positive inside, in voxel pitches.

    Inside voxels hold the distance to the nearest outside voxel; outside
    voxels hold minus the distance to the nearest inside voxel. Values are
    float32 so a field written to an MGSF file reloads bit-identically.
    """
    if not filled.spec.isotropic:
        raise ValidationError(f"signed distance needs isotropic spacing, got {filled.spec.spacing}")
    solid = filled.bits.astype(bool)
    if solid.all() or not solid.any():
        raise ValidationError("signed distance needs both inside and outside voxels")
    inside = edt(solid)
    outside = edt(~solid)
    return ScalarField(filled.spec, (inside - outside).astype(np.float32))


# -- MGSF files --------------------------------------------------------------


def field_bytes(field):
    payload = np.asarray(field.values, dtype="<f4").ravel(order="F")
    return _spec_header(FIELD_MAGIC, field.spec) + payload.tobytes()


def save_field(field, path):
    """Write an MGSF file: header then float32 values x-fastest."""
    with open(path, "wb") as fh:
        fh.write(field_bytes(field))


def load_field(path):
    with open(path, "rb") as fh:
        data = fh.read()
    spec = _read_spec_header(data, FIELD_MAGIC)
    need = 4 * spec.size
    if len(data) - _GRID_HEAD.size != need:
        raise FormatError(
            f"expected {need} payload bytes, found {len(data) - _GRID_HEAD.size}",
            offset=_GRID_HEAD.size,
        )
    values = np.frombuffer(data, dtype="<f4", offset=_GRID_HEAD.size).astype(np.float32)
    return ScalarField(spec, values.reshape(spec.dims, order="F"))

