import numpy as np
import pytest
from scipy.stats import norm

from hazardssm import (
    ModelParams,
    NumericalError,
    exact_joint_loglik,
    ffbs_sample,
    kalman_filter,
)

A = np.array([[1.0, 1.0], [0.0, 1.0]])

# fixed T=3 instance used across the oracle tests
Y3 = np.array([-3.7, -3.9, -3.4])
X3 = np.array([[0.5, 0.0], [1.2, -0.3], [0.0, 2.1]])
PARAMS3 = ModelParams(beta=np.array([0.4, 0.25]), sigma_y2=0.25,
                      sigma_mu2=0.01, sigma_nu2=0.01, alpha0=(-4.0, 0.0))
# log density of Y3 under the dense joint Gaussian, computed by explicit
# covariance propagation (frozen)
LOGLIK3 = -1.092781183042509


def smoother_moments(params, y, X):
    """Joint-Gaussian smoother: independent of the filter recursions."""
    T = len(y)
    Q = np.diag([params.sigma_mu2, params.sigma_nu2])
    Apow = [np.linalg.matrix_power(A, k) for k in range(T + 1)]
    a0 = np.array(params.alpha0)
    mean_a = np.array([Apow[t] @ a0 for t in range(1, T + 1)])
    cov_a = np.zeros((T, T, 2, 2))
    for t in range(1, T + 1):
        for u in range(1, T + 1):
            c = np.zeros((2, 2))
            for s in range(1, min(t, u) + 1):
                c += Apow[t - s] @ Q @ Apow[u - s].T
            cov_a[t - 1, u - 1] = c
    resid = y - (X @ params.beta if X is not None else 0.0)
    mean_y = mean_a[:, 0]
    cov_y = cov_a[:, :, 0, 0] + params.sigma_y2 * np.eye(T)
    cov_ay = np.zeros((2 * T, T))
    for t in range(T):
        for u in range(T):
            cov_ay[2 * t:2 * t + 2, u] = cov_a[t, u][:, 0]
    sol = np.linalg.solve(cov_y, resid - mean_y)
    sm_mean = mean_a.reshape(-1) + cov_ay @ sol
    cov_aa = np.zeros((2 * T, 2 * T))
    for t in range(T):
        for u in range(T):
            cov_aa[2 * t:2 * t + 2, 2 * u:2 * u + 2] = cov_a[t, u]
    sm_cov = cov_aa - cov_ay @ np.linalg.solve(cov_y, cov_ay.T)
    return sm_mean.reshape(T, 2), sm_cov


def random_instance(rng):
    T = int(rng.integers(1, 11))
    p = int(rng.integers(0, 3))
    params = ModelParams(
        beta=rng.normal(size=p),
        sigma_y2=float(rng.uniform(0.05, 2.0)),
        sigma_mu2=float(rng.uniform(0.0, 1.0)),
        sigma_nu2=float(rng.uniform(0.0, 1.0)),
        alpha0=(float(rng.normal()), float(rng.normal())),
    )
    X = rng.normal(size=(T, p)) if p else None
    y = rng.normal(size=T)
    return params, y, X


class TestKalmanFilter:
    def test_degenerate_iid(self):
        params = ModelParams(sigma_y2=1.0)
        out = kalman_filter(params, np.zeros(2))
        assert out.loglik == pytest.approx(-np.log(2 * np.pi), abs=1e-12)

    def test_residual_invariance(self):
        # covariates shifting the mean by exactly y leave the loglik unchanged
        params0 = ModelParams(sigma_y2=1.0)
        y = np.array([0.7, -1.1])
        X = y[:, None]
        params1 = ModelParams(beta=np.array([1.0]), sigma_y2=1.0)
        assert kalman_filter(params1, y, X).loglik == pytest.approx(
            kalman_filter(params0, np.zeros(2)).loglik
        )

    def test_frozen_t3_instance(self):
        assert kalman_filter(PARAMS3, Y3, X3).loglik == pytest.approx(LOGLIK3, abs=1e-10)

    def test_shift_invariance(self):
        rng = np.random.default_rng(5)
        y = rng.normal(size=6)
        params = ModelParams(sigma_y2=0.4, sigma_mu2=0.1, sigma_nu2=0.02,
                             alpha0=(1.0, -0.5))
        shifted = ModelParams(sigma_y2=0.4, sigma_mu2=0.1, sigma_nu2=0.02,
                              alpha0=(1.0 + 3.7, -0.5))
        assert kalman_filter(shifted, y + 3.7).loglik == pytest.approx(
            kalman_filter(params, y).loglik, abs=1e-9
        )

    def test_covariances_psd(self):
        rng = np.random.default_rng(11)
        for _ in range(20):
            params, y, X = random_instance(rng)
            out = kalman_filter(params, y, X)
            for C in out.filtered_cov:
                assert np.allclose(C, C.T)
                assert np.linalg.eigvalsh(C).min() >= -1e-10

    def test_nonfinite_rejected(self):
        with pytest.raises(NumericalError):
            kalman_filter(ModelParams(sigma_y2=1.0), np.array([0.0, np.nan]))

    def test_bad_variance_rejected(self):
        with pytest.raises(NumericalError):
            ModelParams(sigma_y2=0.0)


class TestExactJointLoglik:
    def test_oracle_equivalence(self):
        rng = np.random.default_rng(42)
        for _ in range(60):
            params, y, X = random_instance(rng)
            a = kalman_filter(params, y, X).loglik
            b = exact_joint_loglik(params, y, X)
            assert abs(a - b) / abs(b) < 1e-8

    def test_degenerate_value(self):
        assert exact_joint_loglik(ModelParams(sigma_y2=1.0), np.zeros(2)) == pytest.approx(
            -np.log(2 * np.pi)
        )

    def test_t1_closed_form(self):
        params = ModelParams(beta=np.array([0.5]), sigma_y2=0.3, sigma_mu2=0.2,
                             sigma_nu2=0.7, alpha0=(1.0, 2.0))
        y = np.array([2.2])
        X = np.array([[1.4]])
        # one transition step: mean mu0+nu0 + x'b, var sigma_mu2 + sigma_y2
        expected = norm(loc=1.0 + 2.0 + 0.5 * 1.4,
                        scale=np.sqrt(0.2 + 0.3)).logpdf(2.2)
        assert exact_joint_loglik(params, y, X) == pytest.approx(float(expected))

    def test_refuses_large_t(self):
        with pytest.raises(NumericalError):
            exact_joint_loglik(ModelParams(sigma_y2=1.0), np.zeros(51))


class TestFfbs:
    def test_degenerate_path(self):
        params = ModelParams(sigma_y2=1.0)
        path = ffbs_sample(params, np.array([0.3, -0.4, 1.0]), rng=0)
        assert np.all(path == 0.0)

    def test_deterministic_given_seed(self):
        path1 = ffbs_sample(PARAMS3, Y3, X3, rng=123)
        path2 = ffbs_sample(PARAMS3, Y3, X3, rng=123)
        assert np.array_equal(path1, path2)
        path3 = ffbs_sample(PARAMS3, Y3, X3, rng=124)
        assert not np.array_equal(path1, path3)

    def test_moment_match_small(self):
        # lighter version of the acceptance check: 20k draws within 4 MC SE
        sm_mean, sm_cov = smoother_moments(PARAMS3, Y3, X3)
        n = 20_000
        rng = np.random.default_rng(7)
        acc = np.zeros((3, 2))
        for _ in range(n):
            acc += ffbs_sample(PARAMS3, Y3, X3, rng)
        mean = acc / n
        se = np.sqrt(np.diag(sm_cov).reshape(3, 2) / n)
        assert np.all(np.abs(mean - sm_mean) < 4 * se)

    def test_partially_degenerate_transition(self):
        # slope variance zero: nu stays at its initial value on every draw
        params = ModelParams(sigma_y2=0.5, sigma_mu2=0.2, sigma_nu2=0.0,
                             alpha0=(0.0, 0.25))
        path = ffbs_sample(params, np.array([0.2, 0.9, 0.1, 0.4]), rng=3)
        assert np.allclose(path[:, 1], 0.25, atol=1e-12)
        assert np.std(path[:, 0]) > 0
