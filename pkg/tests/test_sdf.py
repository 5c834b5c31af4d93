import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays
from oracles import brute_edt
from scipy import ndimage

from morphgen import shapes
from morphgen.errors import FormatError, ValidationError
from morphgen.mesh_io import Aabb
from morphgen.sdf import ScalarField, edt, fill_holes, load_field, save_field, signed_distance
from morphgen.voxelizer import BinaryGrid, GridSpec, make_grid, voxelize

small_grids = arrays(
    np.uint8,
    st.tuples(st.integers(2, 9), st.integers(2, 9), st.integers(2, 9)),
    elements=st.integers(0, 1),
)


def spec_for(shape, h=1.0):
    return GridSpec(shape, (0, 0, 0), (h, h, h))


def grid(bits):
    bits = np.asarray(bits, dtype=np.uint8)
    return BinaryGrid(spec_for(bits.shape), bits)


def hollow_block():
    b = np.zeros((12, 12, 12), dtype=np.uint8)
    b[4:7, 4:7, 4:7] = 1
    b[5, 5, 5] = 0
    return b


# -- fill_holes --------------------------------------------------------------


@pytest.mark.parametrize("n", [0, 1, 2])
def test_enclosed_void_is_filled(n):
    out = fill_holes(grid(hollow_block()), n).bits
    assert out[5, 5, 5] == 1
    assert out.sum() == 27


def test_enclosed_void_is_filled_on_tight_grid():
    b = np.zeros((8, 8, 8), dtype=np.uint8)
    b[2:5, 2:5, 2:5] = 1
    b[3, 3, 3] = 0
    assert fill_holes(grid(b), 0).count == 27


def test_channel_to_boundary_stays_open():
    b = np.zeros((8, 8, 8), dtype=np.uint8)
    b[1:6, 1:6, 1:6] = 1
    b[2:5, 2:5, 2:5] = 0
    b[3, 3, 0:3] = 0  # one-voxel tunnel from the void through the wall
    out = fill_holes(grid(b), 0).bits
    assert out[3, 3, 3] == 0 and out[3, 3, 1] == 0
    np.testing.assert_array_equal(out, b)


def test_narrow_channel_closed_by_dilation():
    b = np.zeros((12, 12, 12), dtype=np.uint8)
    b[2:10, 2:10, 2:10] = 1
    b[4:8, 4:8, 4:8] = 0
    b[5, 5, 2:4] = 0
    out = fill_holes(grid(b), 1).bits
    assert out[5, 5, 5] == 1


def test_all_zero_stays_zero():
    assert fill_holes(grid(np.zeros((5, 5, 5))), 2).count == 0


def test_one_voxel_shell_sphere_fills_solid():
    mesh = shapes.icosphere(0.4, (0.5, 0.5, 0.5), subdivisions=4)
    spec = make_grid(Aabb((0, 0, 0), (1, 1, 1)), (32, 32, 32))
    filled = fill_holes(voxelize(mesh, spec), 2).bits.astype(bool)
    inside = np.linalg.norm(spec.centers() - 0.5, axis=-1) < 0.4
    assert filled[inside].all()
    assert filled.sum() == pytest.approx(inside.sum(), rel=0.25)


@given(small_grids, st.integers(0, 3))
def test_fill_is_idempotent_superset(bits, n):
    g = grid(bits)
    once = fill_holes(g, n)
    assert np.all(once.bits >= g.bits)
    assert fill_holes(once, n) == once


def test_negative_iterations_rejected():
    with pytest.raises(ValidationError):
        fill_holes(grid(np.zeros((3, 3, 3))), -1)


# -- EDT ---------------------------------------------------------------------


def test_single_voxel():
    b = np.zeros((5, 5, 5))
    b[2, 2, 2] = 1
    out = edt(grid(b)).values
    assert out[2, 2, 2] == 1.0
    assert out.sum() == 1.0


def test_half_space_ramp():
    b = np.zeros((8, 8, 8))
    b[:4] = 1
    out = edt(grid(b)).values
    for i, v in enumerate([4, 3, 2, 1, 0, 0, 0, 0]):
        assert np.all(out[i] == v)


def test_random_grids_match_brute_force(rng):
    for _ in range(10):
        b = rng.random((16, 16, 16)) < rng.uniform(0.3, 0.95)
        np.testing.assert_array_equal(edt(b), brute_edt(b))


@given(small_grids)
def test_edt_exact_on_small_grids(bits):
    np.testing.assert_array_equal(edt(bits), brute_edt(bits))


def test_all_set_is_infinite():
    assert np.all(np.isinf(edt(np.ones((3, 4, 5), dtype=bool))))


# -- signed distance ---------------------------------------------------------


def ball(n, radius):
    c = (n - 1) / 2.0
    i, j, k = np.indices((n, n, n))
    return ((i - c) ** 2 + (j - c) ** 2 + (k - c) ** 2) <= radius**2


def test_ball_center_and_corner():
    phi = signed_distance(grid(ball(32, 8))).values
    assert phi.dtype == np.float32
    assert phi[15:17, 15:17, 15:17].max() == pytest.approx(8, abs=1)
    corner = np.sqrt(3) * 15.5
    assert phi[0, 0, 0] == pytest.approx(-(corner - 8), abs=1)


def test_interface_voxels_are_unit_distance():
    solid = ball(24, 7)
    phi = signed_distance(grid(solid)).values
    six = ndimage.generate_binary_structure(3, 1)
    inner_rim = solid & ~ndimage.binary_erosion(solid, six, border_value=1)
    outer_rim = ~solid & ndimage.binary_dilation(solid, six)
    assert np.all(phi[inner_rim] == 1)
    assert np.all(phi[outer_rim] == -1)


@given(small_grids)
def test_sign_matches_solid(bits):
    if bits.all() or not bits.any():
        return
    phi = signed_distance(grid(bits)).values
    np.testing.assert_array_equal(np.sign(phi), np.where(bits, 1, -1))


@given(small_grids)
def test_eikonal_bound(bits):
    if bits.all() or not bits.any():
        return
    phi = signed_distance(grid(bits)).values.astype(np.float64)
    for axis in range(3):
        step = np.abs(np.diff(phi, axis=axis))
        assert step.max() <= 1 + 2


def test_zero_crossing_near_input_shell():
    mesh = shapes.icosphere(0.35, (0.5, 0.5, 0.5), subdivisions=4)
    spec = make_grid(Aabb((0, 0, 0), (1, 1, 1)), (40, 40, 40))
    shell = voxelize(mesh, spec)
    phi = signed_distance(fill_holes(shell, 2)).values
    near_shell = edt(~shell.bits.astype(bool))
    for axis in range(3):
        a = [slice(None)] * 3
        b = [slice(None)] * 3
        a[axis], b[axis] = slice(0, -1), slice(1, None)
        cross = np.sign(phi[tuple(a)]) != np.sign(phi[tuple(b)])
        assert near_shell[tuple(a)][cross].max() <= 1
        assert near_shell[tuple(b)][cross].max() <= 1


def test_anisotropic_rejected():
    g = BinaryGrid(GridSpec((4, 4, 4), (0, 0, 0), (1, 1, 2)), np.eye(4)[:, :, None].repeat(4, 2))
    with pytest.raises(ValidationError, match="isotropic"):
        signed_distance(g)


@pytest.mark.parametrize("value", [0, 1])
def test_uniform_grid_rejected(value):
    with pytest.raises(ValidationError):
        signed_distance(grid(np.full((4, 4, 4), value)))


# -- MGSF --------------------------------------------------------------------


def test_field_round_trip_bit_exact(tmp_path):
    phi = signed_distance(grid(ball(12, 4)))
    save_field(phi, tmp_path / "f.mgsf")
    back = load_field(tmp_path / "f.mgsf")
    assert back == phi


def test_field_file_wrong_magic(tmp_path):
    phi = signed_distance(grid(ball(6, 2)))
    save_field(phi, tmp_path / "f.mgsf")
    data = bytearray((tmp_path / "f.mgsf").read_bytes())
    data[:4] = b"MGVX"
    (tmp_path / "g.mgsf").write_bytes(bytes(data))
    with pytest.raises(FormatError):
        load_field(tmp_path / "g.mgsf")


def test_field_shape_checked():
    with pytest.raises(ValidationError):
        ScalarField(spec_for((3, 3, 3)), np.zeros((3, 3, 4)))
