import numpy as np
import pytest
from scipy.integrate import quad

from icmse.kernels import (
    KernelSpec,
    LengthscaleParams,
    corr_gaussian,
    corr_matrix,
    g_exp_integral,
    lambda_matrix,
    lambda_matrix_quadrature,
)
from icmse.gpmodel import Hyperparams


def make_params(theta, sigma2=1.0, sigma2_delta=0.0, theta_delta=None):
    return Hyperparams(
        mu=0.0, sigma2=sigma2, theta=LengthscaleParams(np.asarray(theta, dtype=float)),
        sigma2_eps=0.0, sigma2_delta=sigma2_delta,
        theta_delta=LengthscaleParams(np.asarray(theta_delta, dtype=float))
        if theta_delta is not None else None,
    )


class TestLengthscaleParams:
    def test_rate_identity(self):
        ls = LengthscaleParams(np.array([0.3, 0.8]))
        assert np.allclose(ls.theta_tilde, -4.0 * np.log(ls.theta), atol=1e-12)
        back = LengthscaleParams.from_rates(ls.theta_tilde)
        assert np.allclose(back.theta, ls.theta, atol=1e-14)

    @pytest.mark.parametrize("bad", [0.0, 1.0, -0.2, 1.5])
    def test_rejects_out_of_range(self, bad):
        with pytest.raises(ValueError):
            LengthscaleParams(np.array([bad]))


class TestCorrGaussian:
    def test_zero_distance_identity(self):
        ls = LengthscaleParams(np.array([0.2, 0.9]))
        assert corr_gaussian([0.3, 0.7], [0.3, 0.7], ls) == 1.0

    def test_1d_value(self):
        # theta^(4 * 0.25) = theta
        ls = LengthscaleParams(np.array([0.5]))
        assert corr_gaussian([0.0], [0.5], ls) == pytest.approx(0.5, abs=1e-15)

    def test_2d_product(self):
        ls = LengthscaleParams(np.array([0.5, 0.5]))
        assert corr_gaussian([0.0, 0.0], [0.5, 0.5], ls) == pytest.approx(0.25, abs=1e-15)

    def test_symmetry_and_range(self):
        rng = np.random.default_rng(0)
        ls = LengthscaleParams(np.array([0.3, 0.7, 0.5]))
        for _ in range(50):
            a, b = rng.uniform(0, 1, 3), rng.uniform(0, 1, 3)
            r1 = corr_gaussian(a, b, ls)
            r2 = corr_gaussian(b, a, ls)
            assert r1 == r2
            assert 0.0 < r1 <= 1.0
            assert (r1 == 1.0) == bool(np.all(a == b))

    def test_dimension_mismatch(self):
        ls = LengthscaleParams(np.array([0.5]))
        with pytest.raises(ValueError):
            corr_gaussian([0.1, 0.2], [0.3, 0.4], ls)


class TestCorrMatrix:
    def spec(self, variance=2.0):
        return KernelSpec(lengthscales=LengthscaleParams(np.array([0.5])), variance=variance)

    def test_single_point(self):
        k = corr_matrix([[0.3]], [[0.3]], self.spec(), nugget=0.0)
        assert k.shape == (1, 1) and k[0, 0] == pytest.approx(2.0)

    def test_nugget_on_diagonal(self):
        pts = [[0.1], [0.6]]
        k = corr_matrix(pts, pts, self.spec(), nugget=0.01)
        off = 2.0 * corr_gaussian([0.1], [0.6], LengthscaleParams(np.array([0.5])))
        assert k[0, 1] == pytest.approx(off)
        assert k[0, 0] == pytest.approx(2.01)

    def test_psd_after_nugget(self):
        rng = np.random.default_rng(1)
        pts = rng.uniform(0, 1, (3, 1))
        k = corr_matrix(pts, pts, self.spec(), nugget=1e-8)
        assert np.min(np.linalg.eigvalsh(k)) >= -1e-10


class TestGExpIntegral:
    def test_zero_rates(self):
        assert g_exp_integral(0.0, 0.3, 0.0, 0.9) == 1.0

    def test_against_quadrature(self):
        val = g_exp_integral(1.0, 0.5, 1.0, 0.5)
        ref = quad(lambda z: np.exp(-2.0 * (0.5 - z) ** 2), 0, 1, epsabs=1e-13)[0]
        assert val == pytest.approx(ref, abs=1e-10)

    def test_frozen_value(self):
        # adaptive quadrature of the integrand, frozen at 30 digits
        assert g_exp_integral(2.0, 0.3, 5.0, 0.8) == pytest.approx(
            0.418695043533463053634636022073, abs=1e-12)

    def test_symmetry_exact(self):
        assert g_exp_integral(2.0, 0.3, 5.0, 0.8) == g_exp_integral(5.0, 0.8, 2.0, 0.3)

    def test_random_against_quadrature(self):
        rng = np.random.default_rng(7)
        for _ in range(100):
            a, b = rng.uniform(0, 40, 2)
            x, y = rng.uniform(-0.5, 1.5, 2)
            val = g_exp_integral(a, x, b, y)
            ref = quad(lambda z: np.exp(-a * (x - z) ** 2 - b * (y - z) ** 2),
                       0, 1, epsabs=1e-12, limit=200)[0]
            assert val == pytest.approx(ref, abs=1e-8)

    def test_monotone_in_separation(self):
        a = 3.0
        vals = [g_exp_integral(a, 0.5 - d / 2, a, 0.5 + d / 2) for d in np.linspace(0, 2, 40)]
        assert all(v1 >= v2 - 1e-14 for v1, v2 in zip(vals, vals[1:]))

    def test_rejects_negative_rates(self):
        with pytest.raises(ValueError):
            g_exp_integral(-1.0, 0.0, 1.0, 0.0)

    def test_deep_tail_underflow_is_graceful(self):
        val = g_exp_integral(50.0, -4.0, 50.0, -4.0)
        ref = quad(lambda z: np.exp(-100.0 * (z + 4.0) ** 2), 0, 1, epsabs=1e-320)[0]
        assert val >= 0.0
        assert val == pytest.approx(ref, rel=1e-6, abs=1e-300)


class TestLambdaMatrix:
    def test_single_point_single_fidelity(self):
        params = make_params([0.4], sigma2=1.0)
        pts = np.array([[0.3]])
        lam = lambda_matrix(pts, params)
        rate = params.theta.theta_tilde[0]
        ref = quad(lambda z: np.exp(-2.0 * rate * (0.3 - z) ** 2), 0, 1, epsabs=1e-13)[0]
        assert lam[0, 0] == pytest.approx(ref, abs=1e-8)

    def test_constant_kernel_limit(self):
        # rates ~ 0: integrand ~ 1 everywhere
        params = Hyperparams(
            mu=0.0, sigma2=1.0,
            theta=LengthscaleParams.from_rates(np.array([1e-12])), sigma2_eps=0.0)
        lam = lambda_matrix(np.array([[0.1], [0.9]]), params)
        assert np.allclose(lam, 1.0, atol=1e-9)

    def test_matches_quadrature_random_configs(self):
        rng = np.random.default_rng(11)
        for trial in range(20):
            p = 1 + trial % 2
            n = rng.integers(2, 6)
            bifi = trial % 3 == 0
            params = make_params(
                rng.uniform(0.05, 0.95, p), sigma2=rng.uniform(0.5, 2.0),
                sigma2_delta=rng.uniform(0.1, 1.0) if bifi else 0.0,
                theta_delta=rng.uniform(0.05, 0.95, p) if bifi else None,
            )
            pts = rng.uniform(0, 1, (n, p))
            flags = rng.uniform(size=n) < 0.5 if bifi else None
            lam = lambda_matrix(pts, params, flags)
            ref = lambda_matrix_quadrature(pts, params, flags)
            assert np.allclose(lam, ref, rtol=1e-6, atol=1e-12)
            assert np.allclose(lam, lam.T)
            assert np.min(np.linalg.eigvalsh(lam)) >= -1e-8

    def test_bifidelity_two_points_quadrature(self):
        params = make_params([0.3, 0.6], sigma2=1.3, sigma2_delta=0.4,
                             theta_delta=[0.7, 0.2])
        pts = np.array([[0.2, 0.8], [0.6, 0.4]])
        flags = np.array([False, True])
        lam = lambda_matrix(pts, params, flags)
        ref = lambda_matrix_quadrature(pts, params, flags)
        assert np.allclose(lam, ref, rtol=1e-6)
