"""Surface reconstruction from an interpolated signed distance field."""

from dataclasses import asdict, dataclass

import numpy as np
from scipy import sparse

from .errors import NoInterfaceError, ValidationError
from .marching import marching_cubes
from .mesh_io import TriangleMesh
from .sdf import ScalarField, fill_holes
from .voxelizer import BinaryGrid

__all__ = [
    "ReconstructionConfig",
    "extract_band",
    "laplacian_smooth",
    "reconstruct",
    "SMOOTH_SDF",
    "BINARY_BAND",
]

SMOOTH_SDF = "smooth-sdf"
BINARY_BAND = "binary-band"


@dataclass(frozen=True)
class ReconstructionConfig:
    epsilon: float = 1.0
    iso_mode: str = SMOOTH_SDF
    smoothing_lambda: float = 0.5
    smoothing_iters: int = 10

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValidationError("epsilon must be positive")
        if self.iso_mode not in (SMOOTH_SDF, BINARY_BAND):
            raise ValidationError(f"unknown iso_mode {self.iso_mode!r}")
        if not 0 <= self.smoothing_lambda < 1:
            raise ValidationError("smoothing_lambda must lie in [0, 1)")
        if int(self.smoothing_iters) != self.smoothing_iters or self.smoothing_iters < 0:
            raise ValidationError("smoothing_iters must be a non-negative integer")

    def to_dict(self):
        return asdict(self)


def extract_band(field, epsilon):
    """Voxels whose value lies in ``[-epsilon, epsilon]``."""
    if not epsilon > 0:
        raise ValidationError("epsilon must be positive")
    band = np.abs(np.asarray(field.values, dtype=np.float64)) <= epsilon
    if not band.any():
        raise NoInterfaceError(f"no interface found: no voxel within {epsilon} of zero")
    return BinaryGrid(field.spec, band)


def _neighbour_mean_operator(mesh):
    t = mesh.triangles
    edges = np.concatenate([t[:, [0, 1]], t[:, [1, 2]], t[:, [2, 0]]])
    edges = np.unique(np.sort(edges, axis=1), axis=0)
    edges = edges[edges[:, 0] != edges[:, 1]]
    n = len(mesh.vertices)
    rows = np.concatenate([edges[:, 0], edges[:, 1]])
    cols = np.concatenate([edges[:, 1], edges[:, 0]])
    adj = sparse.csr_matrix((np.ones(len(rows)), (rows, cols)), shape=(n, n))
    degree = np.asarray(adj.sum(axis=1)).ravel()
    inv = np.divide(1.0, degree, out=np.zeros(n), where=degree > 0)
    return sparse.diags(inv) @ adj, degree > 0


def laplacian_smooth(mesh, lam=0.5, iters=10):
    """Umbrella smoothing: each vertex moves ``lam`` of the way to its 1-ring mean.

    All vertices update together from the previous iterate. Connectivity comes
    from the triangle indices, so a raw STL soup should be welded first.
    """
    if not 0 <= lam < 1:
        raise ValidationError("lambda must lie in [0, 1)")
    if iters < 0:
        raise ValidationError("iters must be non-negative")
    if lam == 0 or iters == 0 or mesh.n_triangles == 0:
        return mesh
    mean_op, connected = _neighbour_mean_operator(mesh)
    v = mesh.vertices.copy()
    for _ in range(int(iters)):
        step = mean_op @ v - v
        step[~connected] = 0.0
        v = v + lam * step
    return TriangleMesh(v, mesh.triangles)


def reconstruct(field, cfg=None):
    """Rebuild a smoothed triangle mesh from a signed distance field.

    ``smooth-sdf`` contours the field itself at zero. ``binary-band`` keeps only
    the voxels within ``epsilon`` of zero, fills the solid they enclose and
    contours that 0/1 field at 0.5.
    """
    cfg = cfg or ReconstructionConfig()
    if cfg.iso_mode == SMOOTH_SDF:
        mesh = marching_cubes(field, 0.0)
    else:
        band = extract_band(field, cfg.epsilon)
        solid = fill_holes(band, 0)
        mesh = marching_cubes(ScalarField(field.spec, solid.bits.astype(np.float64)), 0.5)
    return laplacian_smooth(mesh, cfg.smoothing_lambda, cfg.smoothing_iters)
