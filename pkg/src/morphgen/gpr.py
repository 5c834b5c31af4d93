"""Gaussian-process regression over barycentric map coordinates.

Kernel: ``k(a, b) = signal_variance * exp(-|a - b|^2 / (2 length_scale^2))``
with a fixed diagonal noise ``alpha``. Targets are mean-centred before fitting.
"""

import csv
import json
import warnings
from dataclasses import asdict, dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_solve, cholesky, solve_triangular
from scipy.optimize import minimize
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .errors import ConditioningError, ValidationError

__all__ = [
    "GprHyperparams",
    "GaussianProcessSurrogate",
    "rbf_kernel",
    "kernel_matrix",
    "fit",
    "predict",
    "r2_score",
    "read_xy_csv",
    "write_predictions_csv",
    "CI95",
]

CI95 = 1.96
LENGTH_SCALE_BOUNDS = (1e-2, 1e2)
SIGNAL_VARIANCE_BOUNDS = (1e-4, 1e4)
JITTER_FACTORS = (1.0, 10.0, 100.0)
# a factorization counts as successful only if it reproduces the targets to
# this relative accuracy; beyond it the kernel system is numerically singular
SOLVE_RTOL = 1e-8
# restarts start from init * 10**U(-1, 1) per hyperparameter
RESTART_DECADES = 1.0


@dataclass(frozen=True)
class GprHyperparams:
    length_scale: float = 1.2
    signal_variance: float = 1.0
    alpha: float = 1e-10

    def __post_init__(self):
        if not self.length_scale > 0 or not self.signal_variance > 0 or not self.alpha >= 0:
            raise ValidationError(f"invalid GP hyperparameters {self}")


def rbf_kernel(x_i, x_j, hyper=GprHyperparams()):
    d = np.asarray(x_i, dtype=np.float64) - np.asarray(x_j, dtype=np.float64)
    return float(hyper.signal_variance * np.exp(-np.dot(d, d) / (2.0 * hyper.length_scale**2)))


def kernel_matrix(a, b, length_scale, signal_variance):
    sq = cdist(a, b, "sqeuclidean")
    return signal_variance * np.exp(-sq / (2.0 * length_scale**2))


def _solve_tol(y):
    return SOLVE_RTOL * max(1.0, float(np.abs(y).max()))


def _checked_solve(K, jitter, y):
    """Cholesky solve of ``(K + jitter I) d = y``; None if it fails or is inaccurate."""
    A = K + jitter * np.eye(len(K))
    try:
        L = cholesky(A, lower=True)
    except LinAlgError:
        return None
    d = cho_solve((L, True), y)
    if not np.abs(A @ d - y).max() <= _solve_tol(y):
        return None
    return L, d


def _factor(K, alpha, y):
    """Factor ``K + alpha I``, escalating the jitter; returns (L, dual, jitter)."""
    for f in JITTER_FACTORS:
        out = _checked_solve(K, alpha * f, y)
        if out is not None:
            return out + (alpha * f,)
    raise ConditioningError(
        f"kernel system not solvable to {SOLVE_RTOL:g} relative accuracy even with "
        f"jitter {alpha * JITTER_FACTORS[-1]:g}"
    )


class GaussianProcessSurrogate(RegressorMixin, BaseEstimator):
    """RBF Gaussian-process regressor with multi-start marginal-likelihood fitting.

    Parameters
    ----------
    length_scale, signal_variance : float
        Initial kernel hyperparameters (also the first optimizer start).
    alpha : float
        Noise added to the kernel diagonal; never optimized.
    n_restarts : int
        Total optimizer starts. Starts after the first are drawn log-uniformly
        within a decade of the initial values from a Philox stream seeded with
        ``random_state``.
    optimize : bool
        If False the initial hyperparameters are used as-is.
    """

    def __init__(
        self,
        length_scale=1.2,
        signal_variance=1.0,
        alpha=1e-10,
        n_restarts=10,
        random_state=0,
        optimize=True,
    ):
        self.length_scale = length_scale
        self.signal_variance = signal_variance
        self.alpha = alpha
        self.n_restarts = n_restarts
        self.random_state = random_state
        self.optimize = optimize

    # -- likelihood ----------------------------------------------------------

    def _lml(self, log_theta, X, y, eval_gradient=False):
        ell, sf2 = np.exp(log_theta)
        sq = cdist(X, X, "sqeuclidean")
        K = sf2 * np.exp(-sq / (2.0 * ell**2))
        out = _checked_solve(K, self.alpha, y)
        if out is None:
            return (-np.inf, np.zeros(2)) if eval_gradient else -np.inf
        L, a = out
        lml = -0.5 * y @ a - np.log(np.diag(L)).sum() - 0.5 * len(X) * np.log(2 * np.pi)
        if not eval_gradient:
            return lml
        inner = np.outer(a, a) - cho_solve((L, True), np.eye(len(X)))
        dK_dlog_ell = K * sq / ell**2
        grad = 0.5 * np.array([np.sum(inner * dK_dlog_ell), np.sum(inner * K)])
        return lml, grad

    def log_marginal_likelihood(self, length_scale=None, signal_variance=None):
        """LML of the training data at the given (default: fitted) hyperparameters."""
        check_is_fitted(self, "X_train_")
        ell = self.hyper_.length_scale if length_scale is None else length_scale
        sf2 = self.hyper_.signal_variance if signal_variance is None else signal_variance
        return float(self._lml(np.log([ell, sf2]), self.X_train_, self.y_train_))

    # -- estimator API -------------------------------------------------------

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        GprHyperparams(self.length_scale, self.signal_variance, self.alpha)
        if len(np.unique(X, axis=0)) < 2:
            raise ConditioningError("need at least 2 distinct input points")
        _, inverse = np.unique(X, axis=0, return_inverse=True)
        inverse = inverse.reshape(-1)
        for g in np.flatnonzero(np.bincount(inverse) > 1):
            ys = y[inverse == g]
            if np.ptp(ys) > 0:
                raise ConditioningError(
                    "kernel matrix is singular: repeated inputs carry different targets"
                )
        self.y_mean_ = float(y.mean())
        yc = y - self.y_mean_
        init = np.log([self.length_scale, self.signal_variance])
        best_theta, best_lml = init, self._lml(init, X, yc)
        if self.optimize:
            bounds = np.log([LENGTH_SCALE_BOUNDS, SIGNAL_VARIANCE_BOUNDS])
            rng = np.random.Generator(np.random.Philox(self.random_state))
            for start in range(max(int(self.n_restarts), 1)):
                theta0 = init.copy()
                if start:
                    theta0 += rng.uniform(-1.0, 1.0, 2) * RESTART_DECADES * np.log(10.0)
                theta0 = np.clip(theta0, bounds[:, 0], bounds[:, 1])
                # an unsolvable start gives the optimizer nothing to follow;
                # shorter length scales are better conditioned
                while not np.isfinite(self._lml(theta0, X, yc)) and theta0[0] > bounds[0, 0]:
                    theta0[0] = max(theta0[0] - np.log(2.0), bounds[0, 0])
                res = minimize(
                    lambda t: tuple(-v for v in self._lml(t, X, yc, eval_gradient=True)),
                    theta0,
                    jac=True,
                    method="L-BFGS-B",
                    bounds=bounds,
                )
                lml = self._lml(res.x, X, yc)
                if lml > best_lml:
                    best_theta, best_lml = res.x, lml
        ell, sf2 = (float(v) for v in np.exp(best_theta))
        self.hyper_ = GprHyperparams(ell, sf2, self.alpha)
        self.X_train_ = X
        self.y_train_ = yc
        self._refactor()
        self.log_marginal_likelihood_value_ = float(best_lml)
        return self

    def _refactor(self):
        h = self.hyper_
        K = kernel_matrix(self.X_train_, self.X_train_, h.length_scale, h.signal_variance)
        self.L_, self.dual_, self.jitter_ = _factor(K, h.alpha, self.y_train_)

    def predict(self, X, return_std=False):
        check_is_fitted(self, "X_train_")
        X = check_array(X)
        h = self.hyper_
        Ks = kernel_matrix(X, self.X_train_, h.length_scale, h.signal_variance)
        mean = Ks @ self.dual_ + self.y_mean_
        if not return_std:
            return mean
        v = solve_triangular(self.L_, Ks.T, lower=True)
        var = h.signal_variance - np.einsum("ij,ij->j", v, v)
        if var.min() < -1e-10 * max(1.0, h.signal_variance):
            warnings.warn(f"posterior variance {var.min():g} clipped to 0", RuntimeWarning, stacklevel=2)
        return mean, np.sqrt(np.clip(var, 0.0, None))

    def predict_interval(self, X, z=CI95):
        """Mean with lower/upper bounds of the ``z``-sigma (default 95%) interval."""
        mean, std = self.predict(X, return_std=True)
        return mean, mean - z * std, mean + z * std

    # -- persistence ---------------------------------------------------------

    def to_dict(self):
        check_is_fitted(self, "X_train_")
        return {
            "hyperparameters": asdict(self.hyper_),
            "y_mean": self.y_mean_,
            "x": self.X_train_.tolist(),
            "y": (self.y_train_ + self.y_mean_).tolist(),
            "log_marginal_likelihood": self.log_marginal_likelihood_value_,
            "params": self.get_params(),
        }

    @classmethod
    def from_dict(cls, d):
        model = cls(**d.get("params", {}))
        model.hyper_ = GprHyperparams(**d["hyperparameters"])
        model.y_mean_ = float(d["y_mean"])
        model.X_train_ = np.asarray(d["x"], dtype=np.float64)
        model.y_train_ = np.asarray(d["y"], dtype=np.float64) - model.y_mean_
        model.log_marginal_likelihood_value_ = d.get("log_marginal_likelihood")
        model._refactor()
        return model

    def save(self, path):
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=2)

    @classmethod
    def load(cls, path):
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit(x, y, init=GprHyperparams(), restarts=10, seed=0):
    return GaussianProcessSurrogate(
        init.length_scale, init.signal_variance, init.alpha, n_restarts=restarts, random_state=seed
    ).fit(x, y)


def predict(model, x_star):
    """Posterior mean and standard deviation at ``x_star``."""
    return model.predict(x_star, return_std=True)


def r2_score(y_true, y_pred):
    y_true = np.asarray(y_true, dtype=np.float64)
    y_pred = np.asarray(y_pred, dtype=np.float64)
    if y_true.shape != y_pred.shape or y_true.size < 2:
        raise ValidationError("need two equally sized arrays with at least 2 entries")
    ss_tot = np.sum((y_true - y_true.mean()) ** 2)
    if ss_tot == 0:
        raise ValidationError("R^2 is undefined for constant targets")
    return float(1.0 - np.sum((y_true - y_pred) ** 2) / ss_tot)


def read_xy_csv(path):
    """Read ``x,y[,value]`` rows (header required); returns (points, values or None)."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValidationError(f"{path}: no data rows")
    try:
        pts = np.array([[float(r["x"]), float(r["y"])] for r in rows])
        if "value" in rows[0] and rows[0]["value"] not in (None, ""):
            return pts, np.array([float(r["value"]) for r in rows])
    except (KeyError, TypeError, ValueError) as exc:
        raise ValidationError(f"{path}: expected numeric columns x,y[,value] ({exc!r})") from None
    return pts, None


def write_predictions_csv(path, points, mean, std, z=CI95):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["x", "y", "mean", "std", "ci_low", "ci_high"])
        for (px, py), m, s in zip(points, mean, std):
            w.writerow([repr(float(px)), repr(float(py)), repr(float(m)), repr(float(s)),
                        repr(float(m - z * s)), repr(float(m + z * s))])
