import numpy as np
import pytest

from ife.exceptions import DegeneracyError
from ife.ifee import ifee_fit, start_beta


def planted_panel(rng, T=40, N=30, p=2, r=2, noise=0.0, beta=None):
    X = rng.standard_normal((T, N, p))
    F = rng.standard_normal((T, r))
    L = rng.standard_normal((N, r))
    if beta is None:
        beta = rng.standard_normal(p)
    Y = X @ beta + F @ L.T + noise * rng.standard_normal((T, N))
    return Y, X, beta, F, L


class TestStartBeta:
    def test_exact_proportional_outcome(self):
        rng = np.random.default_rng(0)
        X = rng.standard_normal((10, 5, 1))
        Y = 2.0 * X[:, :, 0]
        np.testing.assert_allclose(start_beta(Y, X), [2.0], atol=1e-12)

    def test_projection_recovers_planted_beta(self):
        rng = np.random.default_rng(1)
        X = rng.standard_normal((20, 8, 3))
        beta = np.array([1.0, -2.0, 0.5])
        Y = X @ beta
        np.testing.assert_allclose(start_beta(Y, X), beta, atol=1e-10)

    def test_zero_regressors_rejected(self):
        with pytest.raises(DegeneracyError, match="singular Gram"):
            start_beta(np.ones((4, 3)), np.zeros((4, 3, 2)))


class TestIfeeFit:
    @pytest.mark.parametrize("seed", range(5))
    def test_noise_free_recovery(self, seed):
        rng = np.random.default_rng(seed)
        Y, X, beta, _, _ = planted_panel(rng, beta=np.array([1.0, -2.0]))
        res = ifee_fit(Y, X, 2)
        assert res.converged
        assert np.linalg.norm(res.beta - beta) <= 1e-6

    def test_r_zero_is_pooled_ols(self):
        rng = np.random.default_rng(7)
        X = rng.standard_normal((12, 6, 1))
        Y = 2.0 * X[:, :, 0]
        res = ifee_fit(Y, X, 0)
        assert res.converged and res.iterations == 1
        np.testing.assert_allclose(res.beta, [2.0], atol=1e-12)
        assert res.factors.shape == (12, 0)

    def test_factor_orthonormality(self):
        rng = np.random.default_rng(8)
        Y, X, *_ = planted_panel(rng, noise=0.3)
        res = ifee_fit(Y, X, 2)
        T = Y.shape[0]
        np.testing.assert_allclose(
            res.factors.T @ res.factors / T, np.eye(2), atol=1e-8
        )

    def test_objective_monotone(self):
        for seed in range(10):
            rng = np.random.default_rng(seed)
            Y, X, *_ = planted_panel(rng, noise=1.0)
            res = ifee_fit(Y, X, 2)
            path = np.array(res.objective_path)
            assert np.all(np.diff(path) <= 1e-8 * max(1.0, path[0]))

    def test_rotation_invariance_of_beta(self):
        rng = np.random.default_rng(11)
        T, N, p, r = 30, 20, 2, 2
        X = rng.standard_normal((T, N, p))
        F = rng.standard_normal((T, r))
        L = rng.standard_normal((N, r))
        beta = np.array([0.7, -1.1])
        E = 0.2 * rng.standard_normal((T, N))
        Q, _ = np.linalg.qr(rng.standard_normal((r, r)))
        Y1 = X @ beta + F @ L.T + E
        Y2 = X @ beta + (F @ Q) @ (L @ Q).T + E
        b1 = ifee_fit(Y1, X, r).beta
        b2 = ifee_fit(Y2, X, r).beta
        np.testing.assert_allclose(b1, b2, atol=1e-8)

    def test_tolerance_tightening_stability(self):
        rng = np.random.default_rng(13)
        Y, X, *_ = planted_panel(rng, noise=1.0)
        loose = ifee_fit(Y, X, 2, tol=1e-4).beta
        tight = ifee_fit(Y, X, 2, tol=1e-8).beta
        assert np.linalg.norm(loose - tight) < 1e-3

    def test_nonconvergence_flagged_not_raised(self):
        rng = np.random.default_rng(14)
        Y, X, *_ = planted_panel(rng, noise=1.0)
        res = ifee_fit(Y, X, 2, tol=1e-15, max_iter=3)
        assert not res.converged
        assert res.iterations == 3
        assert res.final_step >= 1e-15

    def test_converged_step_below_tol(self):
        rng = np.random.default_rng(15)
        Y, X, *_ = planted_panel(rng, noise=0.5)
        res = ifee_fit(Y, X, 2, tol=1e-6)
        assert res.converged
        assert res.final_step < 1e-6
