"""scikit-learn style wrappers around the geometry stages.

Each stage is a transformer over a list of objects (meshes or fields), so the
stages can be configured with ``set_params`` and cloned like any estimator::

    enc = SdfEncoder(resolution=64).fit(bases)
    morph = ShapeInterpolator().fit(enc.transform(bases))
    meshes = SurfaceReconstructor().transform(morph.transform(weights))
    images = DepthProjector().transform(meshes)
"""

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import ValidationError
from .interp import interpolate
from .mesh_io import TriangleMesh
from .pipeline import shared_grid
from .projector import DEFAULT_SIZE, DEFAULT_VIEWS, stack_views
from .reconstruct import ReconstructionConfig, reconstruct
from .sdf import DEFAULT_DILATION_ITERS, ScalarField, fill_holes, signed_distance
from .voxelizer import voxelize

__all__ = ["SdfEncoder", "ShapeInterpolator", "SurfaceReconstructor", "DepthProjector"]


def _meshes(X):
    X = [X] if isinstance(X, TriangleMesh) else list(X)
    if not X or not all(isinstance(m, TriangleMesh) for m in X):
        raise ValidationError("expected a non-empty sequence of TriangleMesh")
    return X


def _fields(X):
    X = [X] if isinstance(X, ScalarField) else list(X)
    if not X or not all(isinstance(f, ScalarField) for f in X):
        raise ValidationError("expected a non-empty sequence of ScalarField")
    return X


class SdfEncoder(TransformerMixin, BaseEstimator):
    """Meshes to filled signed distance fields on one shared grid.

    ``fit`` fixes the grid from the union of the training meshes' bounds;
    ``transform`` reuses it, so every output field can be interpolated with
    every other.
    """

    def __init__(self, resolution=64, padding=None, dilation_iters=DEFAULT_DILATION_ITERS):
        self.resolution = resolution
        self.padding = padding
        self.dilation_iters = dilation_iters

    def fit(self, X, y=None):
        res = self.resolution
        res = (res,) * 3 if np.isscalar(res) else tuple(res)
        self.grid_spec_ = shared_grid(_meshes(X), res, self.padding)
        return self

    def transform(self, X):
        check_is_fitted(self, "grid_spec_")
        return [
            signed_distance(fill_holes(voxelize(m, self.grid_spec_), self.dilation_iters))
            for m in _meshes(X)
        ]


class ShapeInterpolator(TransformerMixin, BaseEstimator):
    """Barycentric blending of the basis fields seen in ``fit``.

    ``transform`` takes an ``(n_samples, n_bases)`` weight matrix.
    """

    def fit(self, X, y=None):
        fields = _fields(X)
        if len(fields) < 2:
            raise ValidationError("need at least 2 basis fields")
        spec = fields[0].spec
        if any(f.spec != spec for f in fields):
            raise ValidationError("basis fields must share one grid")
        self.bases_ = fields
        self.n_bases_ = len(fields)
        return self

    def transform(self, X):
        check_is_fitted(self, "bases_")
        W = check_array(X)
        if W.shape[1] != self.n_bases_:
            raise ValidationError(f"expected {self.n_bases_} weights per row, got {W.shape[1]}")
        return [interpolate(self.bases_, w) for w in W]


class SurfaceReconstructor(TransformerMixin, BaseEstimator):
    """Fields to smoothed watertight meshes; stateless."""

    def __init__(self, epsilon=1.0, iso_mode="smooth-sdf", smoothing_lambda=0.5, smoothing_iters=10):
        self.epsilon = epsilon
        self.iso_mode = iso_mode
        self.smoothing_lambda = smoothing_lambda
        self.smoothing_iters = smoothing_iters

    def fit(self, X=None, y=None):
        self.config_ = ReconstructionConfig(**self.get_params())
        return self

    def transform(self, X):
        cfg = ReconstructionConfig(**self.get_params())
        return [reconstruct(f, cfg) for f in _fields(X)]


class DepthProjector(TransformerMixin, BaseEstimator):
    """Meshes to ``(n, height, width, 3)`` uint8 stacked depth images; stateless."""

    def __init__(self, views=DEFAULT_VIEWS, width=DEFAULT_SIZE, height=DEFAULT_SIZE):
        self.views = views
        self.width = width
        self.height = height

    def fit(self, X=None, y=None):
        return self

    def transform(self, X):
        return np.stack(
            [stack_views(m, self.views, self.width, self.height).array for m in _meshes(X)]
        )
