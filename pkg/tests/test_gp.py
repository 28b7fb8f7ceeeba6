import itertools
import math

import numpy as np
import pytest

from causalblue.gp import (
    LENGTHSCALE_GRID,
    NOISE_GRID,
    VARIANCE_GRID,
    GaussianProcessRegressor,
    KernelParams,
    StandardisedGp,
    kernel_eval,
    kernel_matrix,
)


def dense_posterior(X, y, params, query, jitter, prior=None):
    """Independent conditional-GP oracle via plain dense linear algebra."""
    X = np.asarray(X, float)
    query = np.atleast_2d(np.asarray(query, float))
    n = X.shape[0]
    prior_vals = np.zeros(n) if prior is None else prior(X)
    K = kernel_matrix(params, X) + (params.noise + jitter) * np.eye(n)
    Kinv = np.linalg.inv(K)
    ks = kernel_matrix(params, query, X)
    resid = np.asarray(y, float) - prior_vals
    mean = (np.zeros(query.shape[0]) if prior is None else prior(query)) + ks @ Kinv @ resid
    var = params.variance - np.einsum("ij,jk,ik->i", ks, Kinv, ks)
    return mean, var


def dense_lml(X, y, params, jitter, prior=None):
    X = np.asarray(X, float)
    n = X.shape[0]
    resid = np.asarray(y, float) - (np.zeros(n) if prior is None else prior(X))
    K = kernel_matrix(params, X) + (params.noise + jitter) * np.eye(n)
    sign, logdet = np.linalg.slogdet(K)
    assert sign > 0
    return float(
        -0.5 * resid @ np.linalg.solve(K, resid) - 0.5 * logdet - 0.5 * n * math.log(2 * math.pi)
    )


class TestKernelEval:
    def test_zero_distance_gives_variance(self):
        params = KernelParams(2.5, (1.0, 1.0), 0.0)
        assert kernel_eval(params, [0.3, 0.7], [0.3, 0.7]) == pytest.approx(2.5)

    def test_vanishes_at_twenty_lengthscales(self):
        params = KernelParams(1.0, (1.0,), 0.0)
        assert kernel_eval(params, [0.0], [20.0]) < 1e-10

    def test_unit_distance_closed_form(self):
        params = KernelParams(1.0, (1.0,), 0.0)
        assert kernel_eval(params, [0.0], [1.0]) == pytest.approx(math.exp(-0.5), abs=1e-12)

    def test_symmetric(self):
        params = KernelParams(1.3, (0.4, 2.0), 0.1)
        rng = np.random.default_rng(0)
        for _ in range(50):
            x, y = rng.normal(size=(2, 2))
            assert kernel_eval(params, x, y) == pytest.approx(kernel_eval(params, y, x))

    def test_gram_matrices_positive_semidefinite(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            d = int(rng.integers(1, 4))
            params = KernelParams(
                float(rng.uniform(0.1, 5.0)),
                tuple(rng.uniform(0.1, 3.0, size=d)),
                0.0,
            )
            X = rng.normal(size=(12, d))
            eigs = np.linalg.eigvalsh(kernel_matrix(params, X))
            assert eigs.min() >= -1e-8

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            kernel_eval(KernelParams(1.0, (1.0,), 0.0), [0.0, 1.0], [0.0, 1.0])


class TestFit:
    def test_constant_targets_recovered(self):
        X = np.linspace(0, 1, 8)[:, None]
        gp = GaussianProcessRegressor().fit(X, np.full(8, 3.7) - 3.7)  # centred constant
        query = np.linspace(0, 1, 20)[:, None]
        assert np.allclose(gp.predict(query), 0.0, atol=1e-3)

    def test_single_point_interpolation(self):
        gp = GaussianProcessRegressor(noise_grid=[1e-8]).fit([[0.0]], [1.0])
        assert gp.predict([[0.0]])[0] == pytest.approx(1.0, abs=1e-6)

    def test_grid_maximum_matches_exhaustive_oracle(self):
        rng = np.random.default_rng(42)
        X = rng.uniform(size=(5, 1))
        y = np.sin(3 * X[:, 0]) + 0.1 * rng.normal(size=5)
        gp = GaussianProcessRegressor().fit(X, y)
        best = -np.inf
        for ls, var, noise in itertools.product(LENGTHSCALE_GRID, VARIANCE_GRID, NOISE_GRID):
            params = KernelParams(float(var), (float(ls),), float(noise))
            best = max(best, dense_lml(X, y, params, jitter=1e-8 * var))
        assert gp.log_marginal_likelihood() == pytest.approx(best, abs=1e-6)

    def test_selected_params_come_from_grids(self):
        rng = np.random.default_rng(1)
        X = rng.uniform(size=(6, 2))
        y = rng.normal(size=6)
        gp = GaussianProcessRegressor().fit(X, y)
        params = gp.kernel_params_
        assert params.variance in [float(v) for v in VARIANCE_GRID]
        assert params.noise in [float(n) for n in NOISE_GRID]
        for ls in params.lengthscales:
            assert ls in [float(l) for l in LENGTHSCALE_GRID]


class TestPosterior:
    def test_interpolates_training_targets(self):
        rng = np.random.default_rng(7)
        X = rng.uniform(size=(6, 1))
        y = np.cos(4 * X[:, 0])
        gp = GaussianProcessRegressor(noise_grid=[1e-8]).fit(X, y)
        assert np.allclose(gp.predict(X), y, atol=1e-3)

    def test_prior_reversion_far_from_data(self):
        prior = lambda Z: np.full(Z.shape[0], 2.0)
        gp = GaussianProcessRegressor(
            lengthscale_grid=[1.0], variance_grid=[1.5], noise_grid=[1e-6], prior_mean=prior
        ).fit([[0.0]], [3.0])
        mean, var = gp.predict([[40.0]], return_var=True)
        assert mean[0] == pytest.approx(2.0, abs=1e-9)
        assert var[0] == pytest.approx(1.5, abs=1e-9)

    def test_three_point_dense_oracle(self):
        rng = np.random.default_rng(11)
        X = rng.uniform(size=(3, 2))
        y = rng.normal(size=3)
        gp = GaussianProcessRegressor().fit(X, y)
        query = rng.uniform(size=(7, 2))
        mean, var = gp.predict(query, return_var=True)
        dmean, dvar = dense_posterior(X, y, gp.kernel_params_, query, gp.jitter_)
        assert np.allclose(mean, dmean, atol=1e-8)
        assert np.allclose(var, np.maximum(dvar, 0.0), atol=1e-8)

    def test_posterior_variance_never_exceeds_prior(self):
        rng = np.random.default_rng(2)
        X = rng.uniform(size=(9, 1))
        y = rng.normal(size=9)
        gp = GaussianProcessRegressor().fit(X, y)
        _, var = gp.predict(rng.uniform(-1, 2, size=(200, 1)), return_var=True)
        assert np.all(var <= gp.kernel_params_.variance + 1e-12)

    def test_noiseless_observation_collapses_variance(self):
        gp = GaussianProcessRegressor(noise_grid=[1e-8]).fit([[0.5]], [1.0])
        _, var = gp.predict([[0.5]], return_var=True)
        assert var[0] <= 1e-6 * gp.kernel_params_.variance

    def test_invariant_to_training_order(self):
        rng = np.random.default_rng(5)
        X = rng.uniform(size=(6, 1))
        y = rng.normal(size=6)
        perm = rng.permutation(6)
        gp1 = GaussianProcessRegressor().fit(X, y)
        gp2 = GaussianProcessRegressor().fit(X[perm], y[perm])
        query = rng.uniform(size=(10, 1))
        m1, v1 = gp1.predict(query, return_var=True)
        m2, v2 = gp2.predict(query, return_var=True)
        assert np.allclose(m1, m2, atol=1e-8)
        assert np.allclose(v1, v2, atol=1e-8)


class TestLogMarginalLikelihood:
    def test_scalar_closed_form(self):
        # one observation of 0 with unit prior covariance: -0.5 log(2 pi)
        gp = GaussianProcessRegressor(
            lengthscale_grid=[1.0], variance_grid=[1.0 - 1e-6], noise_grid=[1e-6]
        ).fit([[0.0]], [0.0])
        assert gp.log_marginal_likelihood() == pytest.approx(-0.9189, abs=1e-4)

    def test_zero_targets_leave_only_determinant_terms(self):
        X = np.linspace(0, 1, 4)[:, None]
        gp = GaussianProcessRegressor().fit(X, np.zeros(4))
        params = gp.kernel_params_
        expected = dense_lml(X, np.zeros(4), params, gp.jitter_)
        assert gp.log_marginal_likelihood() == pytest.approx(expected, abs=1e-8)

    def test_four_point_dense_oracle(self):
        rng = np.random.default_rng(21)
        X = rng.uniform(size=(4, 1))
        y = rng.normal(size=4)
        gp = GaussianProcessRegressor().fit(X, y)
        assert gp.log_marginal_likelihood() == pytest.approx(
            dense_lml(X, y, gp.kernel_params_, gp.jitter_), abs=1e-8
        )


class TestStandardisedGp:
    def test_recovers_linear_function_on_large_scale(self):
        rng = np.random.default_rng(4)
        X = rng.uniform(0, 30, size=(40, 2))
        y = X[:, 0] + X[:, 1]
        gp = StandardisedGp().fit(X, y)
        query = rng.uniform(2, 28, size=(20, 2))
        pred = gp.predict(query)
        assert np.allclose(pred, query.sum(axis=1), rtol=0.05, atol=0.2)

    def test_variance_mapped_back_to_data_scale(self):
        rng = np.random.default_rng(8)
        X = rng.uniform(0, 100, size=(15, 1))
        y = 50 + 10 * np.sin(X[:, 0] / 20)
        gp = StandardisedGp().fit(X, y)
        _, var = gp.predict([[1000.0]], return_var=True)
        # far from data: prior variance on the standardised scale, rescaled
        assert var[0] == pytest.approx(
            gp.gp_.kernel_params_.variance * gp.y_scale_**2, rel=1e-6
        )
