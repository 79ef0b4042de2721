import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate as sp_integrate
from scipy import special as sp

from tlsloss.numerics import EULER_GAMMA, DomainError, bessel_k0, bessel_k0e, digamma


def test_digamma_one():
    assert digamma(1.0).real == pytest.approx(-0.5772156649015329, abs=1e-11)
    assert -digamma(1.0).real == pytest.approx(EULER_GAMMA, abs=1e-15)


def test_digamma_half():
    assert digamma(0.5).real == pytest.approx(-EULER_GAMMA - 2 * math.log(2), abs=1e-12)


def test_digamma_recurrence_example():
    z = 3.7 + 2.1j
    assert abs(digamma(z + 1) - digamma(z) - 1 / z) < 1e-12


@settings(max_examples=100, deadline=None)
@given(st.floats(1e-3, 50.0), st.floats(-50.0, 50.0))
def test_digamma_recurrence_right_half_plane(x, y):
    z = complex(x, y)
    assert abs(digamma(z + 1) - digamma(z) - 1 / z) <= 1e-11 * max(1.0, abs(1 / z))


@pytest.mark.parametrize("x", [1e-6, 0.1, 0.5, 2.0, 9.99, 10.01, 123.4, 1e4, 1e6, -0.5, -3.7])
def test_digamma_real_against_scipy(x):
    assert digamma(x).real == pytest.approx(float(sp.digamma(x)), rel=1e-12, abs=1e-14)


@pytest.mark.parametrize("z", [0.5 + 3j, 0.5 - 40j, 2 + 1e5j, 1e6 + 1j, -2.5 + 0.3j, 0.5 + 1e-3j])
def test_digamma_complex_against_scipy(z):
    ref = complex(sp.psi(z))
    assert abs(digamma(z) - ref) <= 1e-12 * abs(ref) + 1e-14


@pytest.mark.parametrize("z", [0, -1, -7])
def test_digamma_poles(z):
    with pytest.raises(DomainError):
        digamma(z)


def test_digamma_vectorised():
    z = np.array([1.0, 2.0, 0.5 + 1j])
    np.testing.assert_allclose(digamma(z), sp.psi(z), rtol=1e-12)


def _k0_integral(x):
    # K0(x) = int_0^inf exp(-x cosh t) dt; truncate where x cosh t > 750
    top = math.acosh(max(750.0 / x, 1.0)) + 1.0
    v, _ = sp_integrate.quad(lambda t: math.exp(-x * math.cosh(t)), 0.0, top, epsabs=0, epsrel=1e-13, limit=200)
    return v


@pytest.mark.parametrize("x", [1e-6, 1e-3, 0.1, 0.5, 1.0, 1.9, 2.0, 2.1, 5.0, 20.0, 100.0, 300.0])
def test_k0_against_integral_representation(x):
    assert bessel_k0(x) == pytest.approx(_k0_integral(x), rel=1e-10)


def test_k0_at_one_is_golden():
    assert bessel_k0(1.0) == pytest.approx(0.42102443824070834, rel=1e-13)


@pytest.mark.parametrize("x", np.geomspace(1e-6, 700, 40))
def test_k0_against_scipy(x):
    assert bessel_k0(x) == pytest.approx(float(sp.k0(x)), rel=1e-10)
    assert bessel_k0e(x) == pytest.approx(float(sp.k0e(x)), rel=1e-10)


def test_k0_asymptote():
    x = 500.0
    assert bessel_k0(x) * math.exp(x) * math.sqrt(x) == pytest.approx(math.sqrt(math.pi / 2), rel=1e-3)


def test_k0_monotone_and_underflow():
    assert bessel_k0(0.5) > bessel_k0(1.0) > bessel_k0(2.0)
    assert bessel_k0(800.0) == 0.0
    assert bessel_k0e(800.0) > 0.0


@pytest.mark.parametrize("x", [0.0, -1.0])
def test_k0_domain(x):
    with pytest.raises(DomainError):
        bessel_k0(x)
