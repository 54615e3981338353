import numpy as np
import pytest

from sqrtslr.cubature import gauss_hermite, spherical_radial, transform
from sqrtslr.linalg import DowndateFailure, TriangularFactor
from sqrtslr.slr import (
    NonFiniteImage,
    SingularPrior,
    constant_noise,
    linearize,
    residual_factor_downdate,
    residual_factor_qr,
    slr_moments,
    state_dependent_noise,
)

from _oracles import random_spd
from conftest import lower_factor_of


def nodes_for(rule, mean, pi):
    return transform(rule, mean, lower_factor_of(pi))


def smooth_test_fn(h, alpha=0.3):
    """Linear map plus a bounded nonlinearity, for random SLR instances."""
    return lambda u: h @ u + alpha * np.sin(h @ u)


class TestSlrMoments:
    def test_linear_function_is_fixed_point(self, rng):
        h = rng.standard_normal((2, 3))
        d = rng.standard_normal(2)
        pi = random_spd(rng, 3)
        mean = rng.standard_normal(3)
        tn = nodes_for(spherical_radial(3), mean, pi)
        a_bar, slope, offset, d_images, resid = slr_moments(
            tn, lambda u: h @ u + d, lower_factor_of(pi)
        )
        assert np.allclose(slope, h)
        assert np.allclose(offset, d)
        assert np.abs(resid).max() <= 1e-10

    def test_scalar_quadratic(self):
        tn = nodes_for(gauss_hermite(1, 3), np.zeros(1), np.eye(1))
        a_bar, slope, offset, _, _ = slr_moments(
            tn, lambda u: u**2, TriangularFactor(np.eye(1), "lower")
        )
        assert a_bar == pytest.approx(1.0)
        assert slope == pytest.approx(0.0, abs=1e-14)
        assert offset == pytest.approx(1.0)

    def test_slope_solves_cross_equation(self, rng):
        pi = random_spd(rng, 3)
        tn = nodes_for(gauss_hermite(3, 3), rng.standard_normal(3), pi)
        fn = smooth_test_fn(rng.standard_normal((2, 3)))
        _, slope, _, d_images, _ = slr_moments(tn, fn, lower_factor_of(pi))
        cross = (d_images * tn.weights) @ tn.centered.T
        assert np.linalg.norm(slope @ pi - cross) <= 1e-12 * np.linalg.norm(cross)

    def test_offset_reconstruction(self, rng):
        pi = random_spd(rng, 2)
        mean = rng.standard_normal(2)
        tn = nodes_for(spherical_radial(2), mean, pi)
        fn = smooth_test_fn(rng.standard_normal((2, 2)))
        a_bar, slope, offset, _, _ = slr_moments(tn, fn, lower_factor_of(pi))
        assert np.allclose(offset, a_bar - slope @ mean)

    def test_nonfinite_image_rejected(self):
        tn = nodes_for(spherical_radial(1), np.zeros(1), np.eye(1))
        with pytest.raises(NonFiniteImage):
            slr_moments(
                tn, lambda u: np.full(1, np.inf), TriangularFactor(np.eye(1), "lower")
            )

    def test_singular_prior_rejected(self):
        tn = nodes_for(spherical_radial(2), np.zeros(2), np.eye(2))
        bad = TriangularFactor(np.diag([1.0, 0.0]), "lower")
        with pytest.raises(SingularPrior):
            slr_moments(tn, lambda u: u, bad)


class TestResidualFactorQr:
    def test_exact_linearization_returns_noise(self, rng):
        omega = random_spd(rng, 2)
        tn = nodes_for(spherical_radial(3), np.zeros(3), np.eye(3))
        noise = constant_noise(lower_factor_of(omega))
        factor = residual_factor_qr(np.zeros((2, tn.nodes.shape[1])), tn.weight_sqrt, noise, tn)
        assert np.allclose(factor.full(), omega)

    def test_scalar_quadratic_residual_variance(self):
        # residual var of u^2 under N(0,1) is E[u^4] - 1 = 2; with Omega = 1
        # the total is 3 (order-3 Gauss-Hermite integrates u^4 exactly)
        tn = nodes_for(gauss_hermite(1, 3), np.zeros(1), np.eye(1))
        pi = TriangularFactor(np.eye(1), "lower")
        approx = linearize(lambda u: u**2, tn, pi, constant_noise(pi), "qr")
        assert approx.residual_factor.full()[0, 0] == pytest.approx(3.0)

    def test_state_dependent_noise_averages_factors(self):
        # Omega(u) = u^2 over spherical_radial(1): nodes +-1, so the average is 1
        tn = nodes_for(spherical_radial(1), np.zeros(1), np.eye(1))
        noise = state_dependent_noise(
            lambda u: TriangularFactor(np.abs(u).reshape(1, 1), "lower")
        )
        factor = residual_factor_qr(np.zeros((1, 2)), tn.weight_sqrt, noise, tn)
        assert factor.full()[0, 0] == pytest.approx(1.0)

    def test_residual_dominates_averaged_noise(self, rng):
        # Omega_bar - sum_i w_i Omega(u_i) = E W E^T is PSD
        pi = random_spd(rng, 2)
        tn = nodes_for(spherical_radial(2), rng.standard_normal(2), pi)
        noise = constant_noise(lower_factor_of(random_spd(rng, 2)))
        fn = smooth_test_fn(rng.standard_normal((2, 2)), alpha=1.0)
        approx = linearize(fn, tn, lower_factor_of(pi), noise, "qr")
        gap = approx.residual_factor.full() - noise.factor_at(None).full()
        assert np.linalg.eigvalsh(gap).min() >= -1e-12


class TestProposition1Identity:
    @pytest.mark.parametrize("make_rule", [
        lambda n: spherical_radial(n),
        lambda n: gauss_hermite(n, 3),
    ])
    def test_identity_random_instances(self, make_rule, rng):
        for _ in range(20):
            n = int(rng.integers(1, 5))
            d = int(rng.integers(1, 4))
            pi = random_spd(rng, n)
            tn = nodes_for(make_rule(n), rng.standard_normal(n), pi)
            fn = smooth_test_fn(rng.standard_normal((d, n)), alpha=1.0)
            _, slope, _, d_images, resid = slr_moments(tn, fn, lower_factor_of(pi))
            w = tn.weights
            lhs = (resid * w) @ resid.T
            t1 = (d_images * w) @ d_images.T
            t2 = slope @ pi @ slope.T
            bound = 256 * np.finfo(float).eps * (np.linalg.norm(t1) + np.linalg.norm(t2))
            assert np.linalg.norm(lhs - (t1 - t2)) <= bound


class TestRouteEquivalence:
    def test_linear_function_downdates_cancel_exactly(self, rng):
        pi = random_spd(rng, 3)
        omega = random_spd(rng, 2)
        tn = nodes_for(spherical_radial(3), rng.standard_normal(3), pi)
        noise = constant_noise(lower_factor_of(omega))
        h = rng.standard_normal((2, 3))
        approx = linearize(lambda u: h @ u, tn, lower_factor_of(pi), noise, "downdate")
        assert np.linalg.norm(approx.residual_factor.full() - omega) <= 1e-9 * np.linalg.norm(omega)

    def test_quadratic_matches_qr_route(self):
        tn = nodes_for(gauss_hermite(1, 3), np.zeros(1), np.eye(1))
        pi = TriangularFactor(np.eye(1), "lower")
        down = linearize(lambda u: u**2, tn, pi, constant_noise(pi), "downdate")
        assert down.residual_factor.full()[0, 0] == pytest.approx(3.0)

    def test_random_instances_agree(self, rng):
        for _ in range(10):
            n, d = 3, 2
            pi = random_spd(rng, n)
            tn = nodes_for(spherical_radial(n), rng.standard_normal(n), pi)
            noise = constant_noise(lower_factor_of(random_spd(rng, d)))
            fn = smooth_test_fn(rng.standard_normal((d, n)), alpha=0.5)
            qr = linearize(fn, tn, lower_factor_of(pi), noise, "qr")
            down = linearize(fn, tn, lower_factor_of(pi), noise, "downdate")
            a, b = qr.residual_factor.full(), down.residual_factor.full()
            assert np.linalg.norm(a - b) <= 1e-10 * np.linalg.norm(a)

    def test_downdate_fails_in_float32_where_qr_survives(self):
        # huge slope, tiny noise: the downdate must cancel ~1e8 against ~1e8
        # to recover ~1e-4, hopeless at float32 roundoff
        dtype = np.float32
        pi = TriangularFactor(np.eye(1, dtype=dtype), "lower")
        noise = constant_noise(TriangularFactor(np.full((1, 1), 1e-2, dtype=dtype), "lower"))
        tn = transform(spherical_radial(1), np.zeros(1, dtype=dtype), pi)
        fn = lambda u: 1e4 * u
        with pytest.raises(DowndateFailure) as info:
            linearize(fn, tn, pi, noise, "downdate")
        assert info.value.column is not None
        qr = linearize(fn, tn, pi, noise, "qr")
        assert np.isfinite(qr.residual_factor.data).all()
        # float64 run confirms the target matrix is PD, so the failure is
        # purely numerical
        pi64 = TriangularFactor(np.eye(1), "lower")
        tn64 = transform(spherical_radial(1), np.zeros(1), pi64)
        noise64 = constant_noise(TriangularFactor(np.full((1, 1), 1e-2), "lower"))
        down64 = linearize(fn, tn64, pi64, noise64, "downdate")
        assert down64.residual_factor.full()[0, 0] > 0

    def test_failure_records_column(self, rng):
        pi = lower_factor_of(random_spd(rng, 2)).data.astype(np.float32)
        pi = TriangularFactor(pi, "lower")
        noise = constant_noise(TriangularFactor(1e-3 * np.eye(2, dtype=np.float32), "lower"))
        tn = transform(spherical_radial(2), np.zeros(2, dtype=np.float32), pi)
        fn = lambda u: 1e4 * u
        with pytest.raises(DowndateFailure) as info:
            linearize(fn, tn, pi, noise, "downdate")
        assert 0 <= info.value.column < 2
        assert 0 <= info.value.index < 2


def test_unknown_route_rejected(rng):
    pi = TriangularFactor(np.eye(1), "lower")
    tn = transform(spherical_radial(1), np.zeros(1), pi)
    with pytest.raises(ValueError):
        linearize(lambda u: u, tn, pi, constant_noise(pi), "cholesky")
