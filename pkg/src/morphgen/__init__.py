"""Geometry morphing toolkit.

Triangle meshes are voxelized and turned into signed distance fields, blended
over a barycentric simplex of basis shapes, reconstructed into watertight
meshes and rendered to quantized depth maps. Sampling plans over the simplex
and a Gaussian-process surrogate on the barycentric map complete the loop.
"""

__version__ = "0.1.0"

from .errors import (  # noqa: E402
    ConditioningError,
    EmptyProjectionError,
    FormatError,
    IntegrityError,
    MorphgenError,
    NoInterfaceError,
    ValidationError,
)
from .interp import BarycentricWeights, interpolate, validate_weights  # noqa: E402
from .mesh_io import TriangleMesh, load_stl, save_stl, watertight_check  # noqa: E402
from .reconstruct import ReconstructionConfig, reconstruct  # noqa: E402
from .sdf import ScalarField, edt, fill_holes, signed_distance  # noqa: E402
from .voxelizer import BinaryGrid, GridSpec, make_grid, voxelize  # noqa: E402

__all__ = [
    "__version__",
    "BarycentricWeights",
    "BinaryGrid",
    "ConditioningError",
    "EmptyProjectionError",
    "FormatError",
    "GridSpec",
    "IntegrityError",
    "MorphgenError",
    "NoInterfaceError",
    "ReconstructionConfig",
    "ScalarField",
    "TriangleMesh",
    "ValidationError",
    "edt",
    "fill_holes",
    "interpolate",
    "load_stl",
    "make_grid",
    "reconstruct",
    "save_stl",
    "signed_distance",
    "validate_weights",
    "voxelize",
    "watertight_check",
]
