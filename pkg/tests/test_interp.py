import numpy as np
import pytest
from conftest import write_spheres
from hypothesis import given
from hypothesis import strategies as st
from scipy import ndimage

from morphgen import shapes
from morphgen.errors import ValidationError
from morphgen.interp import BarycentricWeights, interpolate, validate_weights
from morphgen.mesh_io import save_stl
from morphgen.pipeline import PipelineConfig, basis_fields
from morphgen.sampler import simplex_grid
from morphgen.sdf import ScalarField
from morphgen.voxelizer import GridSpec

SPEC = GridSpec((6, 5, 4), (0, 0, 0), (1, 1, 1))


def weights(n):
    return st.lists(st.floats(0, 1), min_size=n, max_size=n).filter(lambda w: sum(w) > 1e-3).map(
        lambda w: tuple(np.asarray(w) / sum(w))
    )


def random_fields(seed, n):
    rng = np.random.Generator(np.random.Philox(seed))
    return [ScalarField(SPEC, rng.normal(scale=5, size=SPEC.dims).astype(np.float32)) for _ in range(n)]


@pytest.mark.parametrize("w", [(1, 0, 0), (1 / 3, 1 / 3, 1 / 3)])
def test_valid_weights(w):
    assert isinstance(validate_weights(w), BarycentricWeights)


def test_negative_component_named():
    with pytest.raises(ValidationError, match=r"w\[2\]"):
        validate_weights((0.6, 0.6, -0.2))


def test_tiny_sum_error_renormalized():
    w = validate_weights((0.5, 0.5 + 5e-10))
    assert sum(w) == pytest.approx(1.0, abs=1e-15)


def test_sum_error_rejected():
    with pytest.raises(ValidationError, match="sum"):
        validate_weights((0.5, 0.6))
    with pytest.raises(ValidationError):
        validate_weights((0.5, 0.5 + 5e-10), renormalize=False)


def test_nan_rejected():
    with pytest.raises(ValidationError):
        validate_weights((np.nan, 1.0))


@pytest.mark.parametrize("k", [0, 1, 2])
def test_vertex_is_bit_identical(k):
    fields = random_fields(1, 3)
    w = np.zeros(3)
    w[k] = 1.0
    out = interpolate(fields, w)
    np.testing.assert_array_equal(out.values, fields[k].values)
    assert out.values.astype(np.float32).tobytes() == fields[k].values.tobytes()


def test_constant_fields_average():
    a, b = ScalarField(SPEC, np.full(SPEC.dims, 2.0)), ScalarField(SPEC, np.full(SPEC.dims, 4.0))
    out = interpolate([a, b], (0.5, 0.5))
    assert np.all(out.values == 3.0)


@given(st.integers(0, 2**32 - 1), weights(3))
def test_convex_bounds(seed, w):
    fields = random_fields(seed, 3)
    stack = np.stack([f.values.astype(np.float64) for f in fields])
    out = interpolate(fields, w).values
    assert np.all(stack.min(axis=0) <= out + 1e-12)
    assert np.all(out <= stack.max(axis=0) + 1e-12)


@given(st.integers(0, 2**32 - 1), weights(3), weights(3), st.floats(0, 1))
def test_affine_in_weights(seed, w1, w2, alpha):
    fields = random_fields(seed, 3)
    w = alpha * np.asarray(w1) + (1 - alpha) * np.asarray(w2)
    lhs = interpolate(fields, w).values
    rhs = alpha * interpolate(fields, w1).values + (1 - alpha) * interpolate(fields, w2).values
    np.testing.assert_allclose(lhs, rhs, rtol=0, atol=1e-12 * max(1.0, np.abs(rhs).max()))


def test_grid_mismatch_rejected():
    a = ScalarField(SPEC, np.zeros(SPEC.dims))
    b = ScalarField(GridSpec(SPEC.dims, (1, 0, 0), (1, 1, 1)), np.zeros(SPEC.dims))
    with pytest.raises(ValidationError, match="grid"):
        interpolate([a, b], (0.5, 0.5))


def test_count_mismatch_rejected():
    with pytest.raises(ValidationError):
        interpolate(random_fields(0, 2), (0.2, 0.3, 0.5))


@pytest.fixture(scope="module")
def nested_fields(tmp_path_factory):
    d = tmp_path_factory.mktemp("nested32")
    paths = write_spheres(d, (0.5, 0.65, 0.8))
    cfg = PipelineConfig(paths, resolution=32, output_dir=str(d / "out"))
    return basis_fields(cfg)[1]


@pytest.fixture(scope="module")
def translated_fields(tmp_path_factory):
    d = tmp_path_factory.mktemp("translated32")
    paths = []
    for i, c in enumerate([(-0.25, 0, 0), (0.25, 0, 0), (0, 0.3, 0.1)]):
        paths.append(str(d / f"t{i}.stl"))
        save_stl(shapes.icosphere(0.3, c), paths[-1])
    cfg = PipelineConfig(paths, resolution=32, output_dir=str(d / "out"))
    return basis_fields(cfg)[1]


def test_inclusion_on_nested_spheres(nested_fields):
    outer = nested_fields[-1].values
    for f in nested_fields:
        assert np.all(f.values <= outer)
    for p in simplex_grid(3, 5):
        phi = interpolate(nested_fields, p.weights).values
        assert np.all(outer[phi >= 0] >= 0)


@pytest.mark.parametrize("fixture", ["nested_fields", "translated_fields"])
def test_single_component_for_all_lattice_weights(fixture, request):
    fields = request.getfixturevalue(fixture)
    six = ndimage.generate_binary_structure(3, 1)
    for p in simplex_grid(3, 5):
        phi = interpolate(fields, p.weights).values
        _, n = ndimage.label(phi >= 0, structure=six)
        assert n == 1, p
