import numpy as np
import pytest
from sklearn.base import clone

from morphgen import shapes
from morphgen.errors import ValidationError
from morphgen.estimators import DepthProjector, SdfEncoder, ShapeInterpolator, SurfaceReconstructor
from morphgen.mesh_io import load_stl, watertight_check
from morphgen.pipeline import PipelineConfig, basis_fields
from morphgen.projector import stack_views
from morphgen.reconstruct import reconstruct


@pytest.mark.parametrize(
    "est",
    [SdfEncoder(resolution=16, dilation_iters=1), ShapeInterpolator(), SurfaceReconstructor(smoothing_iters=3),
     DepthProjector(width=8, height=8)],
)
def test_clone_round_trips_params(est):
    c = clone(est)
    assert c.get_params() == est.get_params()
    assert type(c) is type(est)


def test_set_params():
    r = SurfaceReconstructor().set_params(iso_mode="binary-band", epsilon=1.5)
    assert r.fit().config_.iso_mode == "binary-band"


def test_chain_matches_pipeline(nested_spheres, tmp_path):
    meshes = [load_stl(p) for p in nested_spheres]
    enc = SdfEncoder(resolution=20).fit(meshes)
    fields = enc.transform(meshes)
    spec, ref, _ = basis_fields(PipelineConfig(nested_spheres, resolution=20, output_dir=str(tmp_path)))
    assert enc.grid_spec_ == spec
    assert all(a == b for a, b in zip(fields, ref))

    W = np.array([[1, 0, 0], [0.2, 0.3, 0.5]])
    blends = ShapeInterpolator().fit(fields).transform(W)
    np.testing.assert_array_equal(blends[0].values, fields[0].values)
    out = SurfaceReconstructor().fit().transform(blends)
    assert all(watertight_check(m).watertight for m in out)
    np.testing.assert_array_equal(out[0].vertices, reconstruct(fields[0]).vertices)

    imgs = DepthProjector(width=24, height=20).transform(out)
    assert imgs.shape == (2, 20, 24, 3) and imgs.dtype == np.uint8
    np.testing.assert_array_equal(imgs[1], stack_views(out[1], width=24, height=20).array)


def test_interpolator_rejects_bad_input(nested_spheres, tmp_path):
    _, fields, _ = basis_fields(PipelineConfig(nested_spheres, resolution=16, output_dir=str(tmp_path)))
    interp = ShapeInterpolator().fit(fields)
    with pytest.raises(ValidationError):
        interp.transform([[0.5, 0.5]])
    with pytest.raises(ValidationError):
        interp.transform([[0.5, 0.6, -0.1]])
    with pytest.raises(ValidationError):
        ShapeInterpolator().fit(fields[:1])
    with pytest.raises(ValidationError):
        SdfEncoder().fit([fields[0]])


def test_unfitted_encoder_raises():
    with pytest.raises(Exception, match="not fitted"):
        SdfEncoder().transform([shapes.box()])
