"""Gaussian-process regression with grid-searched hyperparameters.

Used both to estimate the structural equations from observational data and as
the surrogate model inside the optimisers. The prior mean is a first-class
input so the optimisers can inject causal priors.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.linalg import cholesky, solve_triangular
from scipy.spatial.distance import cdist
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_array, check_X_y

LENGTHSCALE_GRID = tuple(np.geomspace(0.05, 5.0, 7))
VARIANCE_GRID = tuple(np.geomspace(0.1, 100.0, 4))
NOISE_GRID = tuple(np.geomspace(1e-6, 1.0, 4))

_BASE_JITTER = 1e-8
_MAX_JITTER = 1e-2

PriorMean = Callable[[np.ndarray], np.ndarray]


class GpFitError(RuntimeError):
    """Raised when no hyperparameter candidate yields a positive definite Gram."""


@dataclass(frozen=True)
class KernelParams:
    variance: float
    lengthscales: tuple[float, ...]
    noise: float

    def validate(self) -> "KernelParams":
        if self.variance <= 0 or any(l <= 0 for l in self.lengthscales) or self.noise < 0:
            raise ValueError("variance and lengthscales must be positive, noise nonnegative")
        return self


def kernel_eval(params: KernelParams, x: np.ndarray, y: np.ndarray) -> float:
    """Squared-exponential covariance between two points."""
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    ls = np.asarray(params.lengthscales, dtype=float)
    if x.shape != y.shape or x.shape[0] != ls.shape[0]:
        raise ValueError("dimension mismatch between inputs and lengthscales")
    z = (x - y) / ls
    return params.variance * math.exp(-0.5 * float(z @ z))


def kernel_matrix(params: KernelParams, X: np.ndarray, Y: np.ndarray | None = None) -> np.ndarray:
    X = np.asarray(X, dtype=float)
    Y = X if Y is None else np.asarray(Y, dtype=float)
    ls = np.asarray(params.lengthscales, dtype=float)
    d2 = cdist(X / ls, Y / ls, metric="sqeuclidean")
    return params.variance * np.exp(-0.5 * d2)


def _zero_prior(X: np.ndarray) -> np.ndarray:
    return np.zeros(X.shape[0])


def _chol_with_jitter(K: np.ndarray, variance: float) -> tuple[np.ndarray, float]:
    """Cholesky of K with escalating relative diagonal jitter."""
    n = K.shape[0]
    jitter = _BASE_JITTER
    while jitter <= _MAX_JITTER * (1 + 1e-12):
        try:
            L = cholesky(K + jitter * variance * np.eye(n), lower=True)
            return L, jitter * variance
        except np.linalg.LinAlgError:
            jitter *= 10.0
    raise GpFitError("Gram matrix not positive definite after maximal jitter")


class GaussianProcessRegressor(BaseEstimator, RegressorMixin):
    """Exact GP regression with a squared-exponential kernel.

    Hyperparameters are selected by exhaustive log marginal likelihood
    maximisation over log-spaced grids; `shared_lengthscale` restricts the
    search to isotropic kernels (used for the small per-trial surrogates).
    """

    def __init__(
        self,
        lengthscale_grid=None,
        variance_grid=None,
        noise_grid=None,
        prior_mean: PriorMean | None = None,
        shared_lengthscale: bool = False,
    ):
        self.lengthscale_grid = lengthscale_grid
        self.variance_grid = variance_grid
        self.noise_grid = noise_grid
        self.prior_mean = prior_mean
        self.shared_lengthscale = shared_lengthscale

    def _prior(self, X: np.ndarray) -> np.ndarray:
        fn = self.prior_mean if self.prior_mean is not None else _zero_prior
        return np.asarray(fn(X), dtype=float).reshape(X.shape[0])

    def _lengthscale_combos(self, d: int):
        grid = self.lengthscale_grid if self.lengthscale_grid is not None else LENGTHSCALE_GRID
        if self.shared_lengthscale or d == 1:
            return [((float(l),) * d) for l in grid]
        return [tuple(map(float, c)) for c in itertools.product(grid, repeat=d)]

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=1)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        n, d = X.shape
        resid = y - self._prior(X)
        vgrid = self.variance_grid if self.variance_grid is not None else VARIANCE_GRID
        ngrid = self.noise_grid if self.noise_grid is not None else NOISE_GRID

        d2 = np.square(X[:, None, :] - X[None, :, :])  # (n, n, d)
        eye = np.eye(n)
        best = None
        for ls in self._lengthscale_combos(d):
            base = np.exp(-0.5 * (d2 / np.square(np.asarray(ls))).sum(axis=-1))
            for var in vgrid:
                K0 = float(var) * base
                for noise in ngrid:
                    try:
                        L, jitter = _chol_with_jitter(K0 + float(noise) * eye, float(var))
                    except GpFitError:
                        continue
                    alpha = solve_triangular(
                        L.T, solve_triangular(L, resid, lower=True), lower=False
                    )
                    lml = (
                        -0.5 * float(resid @ alpha)
                        - float(np.log(np.diag(L)).sum())
                        - 0.5 * n * math.log(2.0 * math.pi)
                    )
                    if best is None or lml > best[0]:
                        params = KernelParams(float(var), ls, float(noise))
                        best = (lml, params, L, alpha, jitter)
        if best is None:
            raise GpFitError("no hyperparameter candidate produced a valid fit")
        self.X_, self.y_ = X, y
        self.lml_, self.kernel_params_, self.L_, self.alpha_, self.jitter_ = best
        # Precompute the Gram inverse so predictive variances at large test
        # batches are a single matrix product instead of a triangular solve.
        Linv = solve_triangular(self.L_, np.eye(n), lower=True)
        self.K_inv_ = Linv.T @ Linv
        return self

    def predict(self, X, return_var: bool = False):
        X = check_array(np.asarray(X, dtype=float))
        k = kernel_matrix(self.kernel_params_, X, self.X_)
        mean = self._prior(X) + k @ self.alpha_
        if not return_var:
            return mean
        var = np.maximum(
            self.kernel_params_.variance - np.einsum("ij,ij->i", k @ self.K_inv_, k), 0.0
        )
        return mean, var

    def log_marginal_likelihood(self) -> float:
        return self.lml_


class StandardisedGp(BaseEstimator, RegressorMixin):
    """GP on standardised inputs/targets; predictions are mapped back.

    Keeps the fixed hyperparameter grids adequate when raw variables span
    very different scales (e.g. costs versus probabilities).
    """

    def __init__(self, **gp_kwargs):
        self.gp_kwargs = gp_kwargs

    def fit(self, X, y):
        X, y = check_X_y(X, y, ensure_min_samples=1)
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float)
        self.x_mean_ = X.mean(axis=0)
        self.x_scale_ = np.where(X.std(axis=0) > 0, X.std(axis=0), 1.0)
        self.y_mean_ = float(y.mean())
        self.y_scale_ = float(y.std()) or 1.0
        self.gp_ = GaussianProcessRegressor(**self.gp_kwargs)
        self.gp_.fit((X - self.x_mean_) / self.x_scale_, (y - self.y_mean_) / self.y_scale_)
        return self

    def predict(self, X, return_var: bool = False):
        X = np.asarray(X, dtype=float)
        Xs = (X - self.x_mean_) / self.x_scale_
        if not return_var:
            return self.gp_.predict(Xs) * self.y_scale_ + self.y_mean_
        mean, var = self.gp_.predict(Xs, return_var=True)
        return mean * self.y_scale_ + self.y_mean_, var * self.y_scale_**2
