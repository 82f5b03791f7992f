import math

import numpy as np
import pytest

from aggdiff import kernels

SQRT_PI = math.sqrt(math.pi)


@pytest.fixture(scope="module")
def gauss():
    return kernels.gaussian()


class TestGaussian:
    def test_value_at_origin(self, gauss):
        assert gauss(0.0) == pytest.approx(1.0 / SQRT_PI, abs=1e-15)

    def test_even(self, gauss):
        x = np.linspace(0.1, 5.0, 37)
        np.testing.assert_allclose(gauss(x), gauss(-x), rtol=0, atol=1e-16)

    def test_first_derivative_odd_and_matches_fd(self, gauss):
        x = np.linspace(-3.0, 3.0, 61)
        h = 1e-6
        fd = (gauss(x + h) - gauss(x - h)) / (2 * h)
        np.testing.assert_allclose(gauss.derivative(x, 1), fd, rtol=0, atol=1e-9)
        np.testing.assert_allclose(
            gauss.derivative(x, 1), -gauss.derivative(-x, 1), rtol=0, atol=1e-16
        )

    def test_second_derivative_matches_fd(self, gauss):
        x = np.linspace(-3.0, 3.0, 61)
        h = 1e-5
        fd = (gauss(x + h) - 2 * gauss(x) + gauss(x - h)) / (h * h)
        # atol floor covers the subtraction roundoff of the h^2 quotient
        np.testing.assert_allclose(gauss.derivative(x, 2), fd, rtol=0, atol=2e-5)

    def test_unsupported_derivative_order(self, gauss):
        with pytest.raises(ValueError):
            gauss.derivative(1.0, 3)

    def test_l1_norm_is_unit(self, gauss):
        assert gauss.l1_norm == 1.0
        # cross-check against direct quadrature of the profile
        from scipy.integrate import quad

        val, _ = quad(lambda x: float(gauss(np.array(x))), -30, 30)
        assert val == pytest.approx(1.0, abs=1e-12)

    def test_concave_radius(self, gauss):
        r = gauss.concave_radius
        assert r == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-15)
        # second derivative changes sign exactly at the radius
        assert gauss.derivative(r - 1e-8, 2) < 0
        assert gauss.derivative(r + 1e-8, 2) > 0

    def test_scale_and_width(self):
        k = kernels.gaussian(scale=2.0, width=3.0)
        assert k.l1_norm == 2.0
        assert k.concave_radius == pytest.approx(3.0 / math.sqrt(2.0), abs=1e-14)
        assert k(0.0) == pytest.approx(2.0 / (SQRT_PI * 3.0), abs=1e-15)

    def test_bad_parameters(self):
        with pytest.raises(ValueError):
            kernels.gaussian(scale=0.0)
        with pytest.raises(ValueError):
            kernels.gaussian(width=-1.0)


class TestFromCallable:
    def test_fd_derivatives_close_to_exact(self, gauss):
        wrapped = kernels.from_callable(lambda x: np.exp(-(x**2)) / SQRT_PI)
        x = np.linspace(-2.0, 2.0, 41)
        np.testing.assert_allclose(
            wrapped.derivative(x, 1), gauss.derivative(x, 1), rtol=0, atol=1e-8
        )
        np.testing.assert_allclose(
            wrapped.derivative(x, 2), gauss.derivative(x, 2), rtol=0, atol=1e-4
        )

    def test_l1_norm_filled_by_quadrature(self):
        wrapped = kernels.from_callable(lambda x: np.exp(-(x**2)) / SQRT_PI)
        assert wrapped.l1_norm == pytest.approx(1.0, abs=1e-8)

    def test_concave_radius_located(self):
        wrapped = kernels.from_callable(lambda x: np.exp(-(x**2)) / SQRT_PI)
        assert wrapped.concave_radius == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-4)

    def test_convex_profile_has_no_radius(self):
        flat = kernels.from_callable(
            lambda x: np.asarray(x) * 0.0,
            deriv1=lambda x: np.asarray(x) * 0.0,
            deriv2=lambda x: np.asarray(x) * 0.0 + 1.0,
            l1_norm=0.0,
        )
        assert flat.concave_radius is None


def test_concavity_interval(gauss):
    lo, hi = kernels.concavity_interval(gauss)
    assert lo == -hi
    assert hi == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-14)


def test_concavity_interval_none_for_nonconcave():
    flat = kernels.InteractionKernel(
        value=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        deriv1=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        deriv2=lambda x: np.zeros_like(np.asarray(x, dtype=float)),
        l1_norm=0.0,
        concave_radius=None,
    )
    assert kernels.concavity_interval(flat) is None


def test_contraction_rate_positive_inside_concavity(gauss):
    # -G'' at 0 is 2/sqrt(pi); the max of G'' over a small window is at the
    # endpoints but still negative, so the rate stays positive
    rate = kernels.contraction_rate(gauss, 0.3)
    assert 0.0 < rate < 2.0 / SQRT_PI + 1e-12
    # window reaching past the inflection point loses the sign guarantee
    assert kernels.contraction_rate(gauss, 2.0) <= 0.0
    with pytest.raises(ValueError):
        kernels.contraction_rate(gauss, -0.1)
