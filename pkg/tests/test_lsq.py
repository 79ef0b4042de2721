import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tlsloss.numerics import (
    DegenerateFitError,
    FitProblem,
    fit_polynomial,
    nlls_fit,
    numeric_jacobian,
    polyfit,
    polyval,
)


def test_line_from_zero_start():
    x = np.arange(5.0)
    y = 3 * x + 1
    res = nlls_fit(FitProblem(lambda p: p[0] * x + p[1] - y, [0.0, 0.0]))
    np.testing.assert_allclose(res.params, [3.0, 1.0], atol=1e-10)
    assert res.converged
    assert res.residual_norm < 1e-8


def lorentz(x, p):
    a, c, w = p
    return a / (1 + ((x - c) / w) ** 2)


def test_lorentzian_exact():
    x = np.linspace(-10, 10, 201)
    truth = np.array([2.5, 0.7, 1.3])
    y = lorentz(x, truth)
    res = nlls_fit(FitProblem(lambda p: lorentz(x, p) - y, [2.0, 0.0, 1.0]))
    np.testing.assert_allclose(res.params, truth, rtol=1e-8)
    assert res.residual_norm < 1e-8


@settings(max_examples=30, deadline=None)
@given(st.floats(0.5, 5), st.floats(-3, 3), st.floats(0.3, 3))
def test_zero_residual_problems_converge(a, c, w):
    x = np.linspace(-10, 10, 121)
    y = lorentz(x, (a, c, w))
    res = nlls_fit(FitProblem(lambda p: lorentz(x, p) - y, [a * 1.2, c + 0.2, w * 0.8]))
    assert res.residual_norm < 1e-8


def test_noisy_line_monte_carlo():
    x = np.linspace(0, 1, 30)
    sigma = 0.05
    est, sig = [], []
    for seed in range(100):
        y = 2.0 * x - 0.5 + sigma * np.random.default_rng(seed).standard_normal(x.size)
        res = nlls_fit(FitProblem(lambda p: p[0] * x + p[1] - y, [0.0, 0.0], weights=np.full(x.size, 1 / sigma),
                                  absolute_sigma=True))
        est.append(res.params)
        sig.append(res.sigmas)
    est, sig = np.array(est), np.array(sig)
    assert np.all(np.abs(est - [2.0, -0.5]) < 5 * sig)
    scatter = est.std(axis=0, ddof=1)
    np.testing.assert_allclose(scatter, sig.mean(axis=0), rtol=0.3)


def test_each_accepted_step_lowers_cost():
    x = np.linspace(0, 3, 40)
    y = np.exp(-1.3 * x) * 2
    costs = []

    def fn(p):
        r = p[0] * np.exp(-p[1] * x) - y
        costs.append(float(r @ r))
        return r

    res = nlls_fit(FitProblem(fn, [1.0, 0.1]))
    assert res.converged
    assert res.residual_norm ** 2 <= costs[0]


def test_frozen_and_bounds():
    x = np.linspace(0, 1, 10)
    y = 2 * x + 1
    res = nlls_fit(FitProblem(lambda p: p[0] * x + p[1] - y, [0.0, 0.5], frozen_mask=[False, True]))
    assert res.params[1] == 0.5
    assert res.sigmas[1] == 0.0
    assert res.covariance.shape == (1, 1)
    res = nlls_fit(FitProblem(lambda p: p[0] * x + p[1] - y, [0.0, 0.0], bounds=([-1, -1], [1.5, 5])))
    assert res.params[0] <= 1.5


def test_degenerate_flag_not_crash():
    x = np.linspace(0, 1, 10)
    y = 3 * x
    res = nlls_fit(FitProblem(lambda p: (p[0] + p[1]) * x - y, [0.0, 0.0]))
    assert res.degenerate
    assert np.all(np.isfinite(res.params))
    assert (res.params[0] + res.params[1]) == pytest.approx(3.0)


def test_iteration_cap():
    x = np.linspace(-10, 10, 201)
    y = lorentz(x, (2.5, 0.7, 1.3))
    res = nlls_fit(FitProblem(lambda p: lorentz(x, p) - y, [1.0, 3.0, 4.0]), max_iter=1)
    assert not res.converged
    assert res.iterations == 1


def test_problem_validation():
    with pytest.raises(ValueError):
        FitProblem(lambda p: p, [2.0], bounds=([0.0], [1.0]))
    with pytest.raises(ValueError):
        FitProblem(lambda p: p, [0.5], weights=[0.0])
    with pytest.raises(ValueError):
        nlls_fit(FitProblem(lambda p: p, [0.5], weights=[1.0, 1.0]))


def test_covariance_psd_and_symmetric():
    x = np.linspace(0, 2, 50)
    y = 1.5 * np.sin(2.0 * x) + 0.01 * np.random.default_rng(0).standard_normal(50)
    res = nlls_fit(FitProblem(lambda p: p[0] * np.sin(p[1] * x) - y, [1.0, 1.8]))
    np.testing.assert_allclose(res.covariance, res.covariance.T)
    assert np.all(np.linalg.eigvalsh(res.covariance) >= 0)


def test_numeric_jacobian():
    f = lambda p: np.array([p[0] ** 2, p[0] * p[1], np.sin(p[1])])
    J = numeric_jacobian(f, np.array([1.5, 0.3]))
    np.testing.assert_allclose(J, [[3.0, 0.0], [0.3, 1.5], [0.0, np.cos(0.3)]], atol=1e-6)


def test_deterministic():
    x = np.linspace(-10, 10, 201)
    y = lorentz(x, (2.5, 0.7, 1.3)) + 0.01 * np.random.default_rng(3).standard_normal(201)
    a = nlls_fit(FitProblem(lambda p: lorentz(x, p) - y, [2.0, 0.0, 1.0]))
    b = nlls_fit(FitProblem(lambda p: lorentz(x, p) - y, [2.0, 0.0, 1.0]))
    assert np.array_equal(a.params, b.params)


# ---------------------------------------------------------------- polynomials

def test_quadratic_exact():
    x = np.linspace(-2, 3, 12)
    coef = polyfit(x, 1.0 - 2.0 * x + 0.5 * x ** 2, 2)
    np.testing.assert_allclose(coef, [1.0, -2.0, 0.5], atol=1e-12)


def test_constant_is_mean():
    y = np.array([1.0, 4.0, 2.0, 7.0])
    assert polyfit(np.arange(4.0), y, 0)[0] == pytest.approx(y.mean())


def test_residual_orthogonal_to_monomials():
    rng = np.random.default_rng(1)
    x = np.linspace(1000, 4000, 300)
    y = rng.standard_normal(300) + 1e-3 * x
    fit = fit_polynomial(x, y, 3)
    r = y - fit(x)
    u = (x - x.mean()) / np.ptp(x)
    for k in range(4):
        assert abs(r @ u ** k) <= 1e-9 * np.linalg.norm(r) * np.linalg.norm(u ** k)


def test_polyval_matches_fit():
    x = np.linspace(0, 5, 20)
    y = np.cos(x)
    fit = fit_polynomial(x, y, 4)
    np.testing.assert_allclose(polyval(fit.coefficients, x), fit(x), rtol=1e-9, atol=1e-12)


def test_degenerate_design():
    with pytest.raises(DegenerateFitError):
        polyfit(np.array([1.0, 1.0, 1.0]), np.array([1.0, 2.0, 3.0]), 2)
    with pytest.raises((DegenerateFitError, ValueError)):
        polyfit(np.array([0.0, 1.0]), np.array([1.0, 2.0]), 2)
