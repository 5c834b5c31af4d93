import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from morphgen.errors import ConditioningError, ValidationError
from morphgen.gpr import (
    GaussianProcessSurrogate,
    GprHyperparams,
    fit,
    kernel_matrix,
    predict,
    r2_score,
    rbf_kernel,
    read_xy_csv,
    write_predictions_csv,
)
from morphgen.sampler import simplex_grid, to_cartesian


def quadratic(xy):
    x, y = xy[:, 0], xy[:, 1]
    return 0.3 + 0.8 * x - 0.5 * y + 1.1 * x**2 - 0.7 * x * y + 0.9 * y**2


def lattice_xy(spd):
    return np.array([to_cartesian(w) for w in simplex_grid(3, spd).weights])


def dense_posterior(X, y, Xs, ell, sf2, alpha):
    """Textbook GP posterior through an explicit inverse in float64."""
    def k(a, b):
        d2 = ((a[:, None, :] - b[None, :, :]) ** 2).sum(-1)
        return sf2 * np.exp(-d2 / (2 * ell**2))

    m = y.mean()
    Kinv = np.linalg.inv(k(X, X) + alpha * np.eye(len(X)))
    Ks = k(Xs, X)
    mean = m + Ks @ Kinv @ (y - m)
    var = sf2 - np.einsum("ij,jk,ik->i", Ks, Kinv, Ks)
    return mean, var


def test_kernel_examples():
    assert rbf_kernel((0.3, 0.1), (0.3, 0.1)) == 1.0
    assert rbf_kernel((0, 0), (1.2, 0)) == pytest.approx(np.exp(-0.5), rel=1e-14)
    vals = [rbf_kernel((0, 0), (r, 0)) for r in np.linspace(0, 5, 30)]
    assert all(b < a for a, b in zip(vals, vals[1:]))


@given(st.lists(st.floats(-3, 3), min_size=4, max_size=4), st.floats(0.05, 10), st.floats(1e-3, 1e3))
def test_kernel_symmetric_and_bounded(p, ell, sf2):
    h = GprHyperparams(ell, sf2)
    a, b = p[:2], p[2:]
    assert rbf_kernel(a, b, h) == rbf_kernel(b, a, h)
    assert 0 <= rbf_kernel(a, b, h) <= sf2


def test_bad_hyperparameters():
    with pytest.raises(ValidationError):
        GprHyperparams(length_scale=0)
    with pytest.raises(ValidationError):
        GprHyperparams(alpha=-1)


def test_duplicate_inputs_with_different_targets():
    X = np.array([[0.1, 0.2], [0.1, 0.2], [0.5, 0.5]])
    with pytest.raises(ConditioningError):
        GaussianProcessSurrogate().fit(X, [0.0, 1.0, 2.0])
    # identical targets at a repeated input are consistent
    GaussianProcessSurrogate(optimize=False).fit(X, [1.0, 1.0, 2.0])


def test_single_point_rejected():
    with pytest.raises(ConditioningError):
        GaussianProcessSurrogate().fit([[0.2, 0.2]], [1.0])


@pytest.fixture(scope="module")
def quad_model():
    X = lattice_xy(12)
    return fit(X, quadratic(X))


def test_training_miss_is_exactly_noise_times_dual(quad_model):
    m = quad_model
    mean, std = m.predict(m.X_train_, return_std=True)
    y = m.y_train_ + m.y_mean_
    # K d = y - jitter d, so the posterior mean misses the data by jitter * d
    np.testing.assert_allclose(mean - y, -m.jitter_ * m.dual_, rtol=0, atol=1e-8)
    assert std.max() <= 1e-4


def test_interpolates_training_data_at_fixed_hyperparameters():
    X = lattice_xy(12)
    m = GaussianProcessSurrogate(0.1, 1.0, optimize=False).fit(X, quadratic(X))
    mean, std = m.predict(X, return_std=True)
    assert np.abs(mean - quadratic(X)).max() <= 1e-6
    assert std.max() <= 1e-4


@pytest.mark.xfail(strict=True, reason="ML pushes the length scale to the conditioning limit; miss = alpha*|dual| ~ 2e-6")
def test_interpolates_training_data_after_ml_fit(quad_model):
    m = quad_model
    mean = m.predict(m.X_train_)
    assert np.abs(mean - m.y_train_ - m.y_mean_).max() <= 1e-6


def test_far_field_reverts_to_prior(quad_model):
    m = quad_model
    mean, std = predict(m, [[1e3, -1e3]])
    assert mean[0] == pytest.approx(m.y_mean_, abs=1e-12)
    assert std[0] == pytest.approx(np.sqrt(m.hyper_.signal_variance), rel=1e-12)


def test_hyperparameters_within_bounds_and_improve_lml(quad_model):
    m = quad_model
    assert 1e-2 <= m.hyper_.length_scale <= 1e2
    assert 1e-4 <= m.hyper_.signal_variance <= 1e4
    init = m.log_marginal_likelihood(1.2, 1.0)
    assert m.log_marginal_likelihood() >= init
    assert m.log_marginal_likelihood() == pytest.approx(m.log_marginal_likelihood_value_)


def test_factor_and_dual_invariants(quad_model):
    m = quad_model
    h = m.hyper_
    A = kernel_matrix(m.X_train_, m.X_train_, h.length_scale, h.signal_variance) + m.jitter_ * np.eye(len(m.X_train_))
    assert np.abs(m.L_ @ m.L_.T - A).max() <= 1e-8 * np.abs(A).max()
    assert np.abs(A @ m.dual_ - m.y_train_).max() <= 1e-6
    assert m.jitter_ in (h.alpha, 10 * h.alpha, 100 * h.alpha)


def test_matches_dense_oracle():
    X = lattice_xy(8)
    y = np.sin(3 * X[:, 0]) + X[:, 1] ** 2
    ell, sf2, alpha = 0.2, 1.5, 1e-8
    m = GaussianProcessSurrogate(ell, sf2, alpha, optimize=False).fit(X, y)
    rng = np.random.Generator(np.random.Philox(5))
    Xs = rng.uniform(-0.2, 1.2, (50, 2))
    mean, std = m.predict(Xs, return_std=True)
    ref_mean, ref_var = dense_posterior(X, y, Xs, ell, sf2, alpha)
    np.testing.assert_allclose(mean, ref_mean, atol=1e-8)
    np.testing.assert_allclose(std**2, np.clip(ref_var, 0, None), atol=1e-8)


def test_variance_nonnegative(quad_model):
    rng = np.random.Generator(np.random.Philox(9))
    _, std = quad_model.predict(rng.uniform(-1, 2, (500, 2)), return_std=True)
    assert np.all(std >= 0) and np.all(np.isfinite(std))


def test_training_order_invariance():
    X = lattice_xy(7)
    y = quadratic(X)
    perm = np.random.Generator(np.random.Philox(2)).permutation(len(X))
    a = fit(X, y, restarts=3)
    b = fit(X[perm], y[perm], restarts=3)
    Xs = np.array([[0.2, 0.3], [0.7, 0.1], [0.5, 0.8]])
    # equal up to optimizer termination tolerance
    assert a.hyper_.length_scale == pytest.approx(b.hyper_.length_scale, rel=1e-3)
    np.testing.assert_allclose(a.predict(Xs), b.predict(Xs), atol=1e-6)


def test_seeded_fit_is_deterministic():
    X = lattice_xy(6)
    y = quadratic(X) + 0.1 * np.cos(7 * X[:, 0])
    a, b = fit(X, y, seed=4), fit(X, y, seed=4)
    assert a.hyper_ == b.hyper_


def test_no_optimize_keeps_init():
    X = lattice_xy(5)
    m = GaussianProcessSurrogate(0.7, 2.0, optimize=False).fit(X, quadratic(X))
    assert (m.hyper_.length_scale, m.hyper_.signal_variance) == (0.7, 2.0)


def test_predict_interval(quad_model):
    mean, lo, hi = quad_model.predict_interval([[0.3, 0.3], [2.0, 2.0]])
    assert np.all(lo <= mean) and np.all(mean <= hi)
    _, std = quad_model.predict([[2.0, 2.0]], return_std=True)
    assert hi[1] - lo[1] == pytest.approx(2 * 1.96 * std[0])


def test_clone_and_params():
    m = GaussianProcessSurrogate(length_scale=0.5, n_restarts=3)
    c = clone(m)
    assert c.get_params() == m.get_params()
    with pytest.raises(NotFittedError):
        c.predict([[0, 0]])


@pytest.mark.parametrize(
    "y, p, expected",
    [([1, 2, 3], [1, 2, 3], 1.0), ([1, 2, 3], [2, 2, 2], 0.0), ([0, 2], [0.5, 1.5], 0.75)],
)
def test_r2_examples(y, p, expected):
    assert r2_score(y, p) == pytest.approx(expected)


def test_r2_hand_computed():
    assert r2_score([1, 2, 3], [1, 2, 4]) == pytest.approx(0.5)


def test_r2_undefined_for_constant_targets():
    with pytest.raises(ValidationError):
        r2_score([2, 2, 2], [1, 2, 3])


def test_json_round_trip(quad_model, tmp_path):
    quad_model.save(tmp_path / "m.json")
    back = GaussianProcessSurrogate.load(tmp_path / "m.json")
    Xs = np.array([[0.1, 0.1], [0.9, 0.4]])
    a, sa = quad_model.predict(Xs, return_std=True)
    b, sb = back.predict(Xs, return_std=True)
    np.testing.assert_array_equal(a, b)
    np.testing.assert_array_equal(sa, sb)
    json.loads((tmp_path / "m.json").read_text())


def test_csv_helpers(tmp_path):
    p = tmp_path / "d.csv"
    p.write_text("x,y,value\n0,0,1\n1,0,2\n0.5,0.5,3\n")
    pts, vals = read_xy_csv(p)
    assert pts.shape == (3, 2) and list(vals) == [1, 2, 3]
    q = tmp_path / "q.csv"
    q.write_text("x,y\n0.2,0.3\n")
    pts, vals = read_xy_csv(q)
    assert vals is None and pts.tolist() == [[0.2, 0.3]]
    bad = tmp_path / "bad.csv"
    bad.write_text("x,y\n0.2,abc\n")
    with pytest.raises(ValidationError):
        read_xy_csv(bad)
    out = tmp_path / "o.csv"
    write_predictions_csv(out, [[0.2, 0.3]], [1.0], [0.5])
    lines = out.read_text().splitlines()
    assert lines[0] == "x,y,mean,std,ci_low,ci_high"
    assert [float(v) for v in lines[1].split(",")] == pytest.approx([0.2, 0.3, 1.0, 0.5, 0.02, 1.98])


@settings(max_examples=15)
@given(st.integers(0, 2**31))
def test_random_data_posterior_sane(seed):
    rng = np.random.Generator(np.random.Philox(seed))
    X = rng.uniform(0, 1, (15, 2))
    y = rng.normal(size=15)
    m = GaussianProcessSurrogate(n_restarts=2, random_state=seed).fit(X, y)
    _, std = m.predict(rng.uniform(-1, 2, (20, 2)), return_std=True)
    assert np.all(np.isfinite(std)) and np.all(std >= 0)
    assert np.all(std <= np.sqrt(m.hyper_.signal_variance) * (1 + 1e-12))
