import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import special

from nwcollapse.errors import DivergentKernelError, DomainError, IntegrandNaNError
from nwcollapse.quadrature import (QuadratureSpec, bose_integral, exponential_cutoff, integrate,
                                   integrate_fourier, integrate_semi_infinite, wynn_epsilon)


def test_polynomial_is_exact():
    res = integrate(lambda x: 3 * x**2, 0.0, 2.0)
    assert res.converged
    assert res.value == pytest.approx(8.0, rel=1e-15)


def test_vector_valued_integrand_shares_mesh():
    a = np.array([1.0, 2.0, 3.0])
    res = integrate(lambda x: np.exp(-np.outer(a, x)), 0.0, 1.0)
    np.testing.assert_allclose(res.value, -np.expm1(-a) / a, rtol=1e-13)
    assert res.value.shape == (3,)


def test_breakpoints_handle_kinks():
    res = integrate(lambda x: np.abs(x - 0.3), 0.0, 1.0, breakpoints=[0.3])
    assert res.value == pytest.approx(0.3**2 / 2 + 0.7**2 / 2, rel=1e-14)


def test_singular_lower_endpoint():
    spec = QuadratureSpec(rel_tol=1e-10, singular_lower=True)
    res = integrate(lambda x: x**-0.5 * np.cos(x), 0.0, 1.0, spec)
    ref = sp_integrate.quad(lambda x: np.cos(x), 0, 1, weight="alg", wvar=(-0.5, 0))[0]
    assert res.converged
    assert res.value == pytest.approx(ref, rel=1e-9)


def test_semi_infinite_doubling_and_cutoff():
    res = integrate_semi_infinite(lambda x: np.exp(-x) * x**3, QuadratureSpec(rel_tol=1e-12))
    assert res.value == pytest.approx(6.0, rel=1e-11)
    res = integrate_semi_infinite(lambda x: np.exp(-x * x),
                                  QuadratureSpec(rel_tol=1e-12, upper=40.0))
    assert res.value == pytest.approx(math.sqrt(math.pi) / 2, rel=1e-12)


def test_nonconvergence_is_reported_not_promoted():
    res = integrate(lambda x: np.sin(1.0 / x), 1e-9, 1.0, QuadratureSpec(max_evals=300))
    assert not res.converged


def test_nan_integrand_raises():
    with pytest.raises(IntegrandNaNError):
        integrate(lambda x: np.where(x > 0.5, np.nan, x), 0.0, 1.0)


@pytest.mark.parametrize("t", [0.0, 3.0, 500.0, 1e4])
def test_fourier_cosine_against_closed_form(t):
    # int_0^inf e^{-x} cos(t x) dx = 1/(1+t^2), with an analytic cutoff.  The
    # result is ~1/t^2 of the absolute mass, so the tolerance is absolute.
    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=1e-13)
    res = integrate_fourier(lambda x: np.exp(-x), t, (0.0, 1.0, 0.0), 0.0, 60.0, spec)
    assert res.converged
    assert res.value == pytest.approx(1.0 / (1.0 + t * t), abs=1e-13)
    assert res.evals < 100_000


def test_fourier_cancellation_below_roundoff_is_flagged():
    spec = QuadratureSpec(rel_tol=1e-12, abs_tol=0.0)
    res = integrate_fourier(lambda x: np.exp(-x), 500.0, (0.0, 1.0, 0.0), 0.0, 60.0, spec)
    assert not res.converged
    assert res.evals < spec.max_evals // 4  # stops at the roundoff floor, not the budget


def test_fourier_one_minus_cos_with_stable_weight():
    t = 2000.0
    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)
    res = integrate_fourier(lambda x: np.exp(-x), t, (1.0, -1.0, 0.0), 0.0, 60.0, spec,
                            weight=lambda x: 2 * np.sin(0.5 * t * x) ** 2)
    assert res.value == pytest.approx(1.0 - 1.0 / (1.0 + t * t), rel=1e-10)


def test_fourier_vector_rows_with_zero_row():
    # A row that vanishes identically must not spoil the other rows.
    spec = QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)
    amp = np.array([0.0, 1.0, 2.0])
    res = integrate_fourier(lambda x: np.outer(amp, np.exp(-x)), 2500.0, (0.0, 0.0, 1.0),
                            0.0, 60.0, spec)
    assert res.converged
    expected = amp * 2500.0 / (1.0 + 2500.0**2)
    np.testing.assert_allclose(res.value, expected, rtol=1e-9, atol=0)


def test_fourier_needs_finite_cutoff():
    with pytest.raises(DomainError):
        integrate_fourier(lambda x: np.exp(-x), 1.0, upper=math.inf)


def test_wynn_epsilon_accelerates_alternating_series():
    partial = np.cumsum([(-1) ** k / (2 * k + 1) for k in range(20)])
    lim, err = wynn_epsilon(partial)
    assert lim == pytest.approx(math.pi / 4, abs=1e-12)
    assert err < 1e-10


def test_wynn_epsilon_columns_are_independent():
    partial = np.cumsum([(-1) ** k / (2 * k + 1) for k in range(20)])
    both = np.stack([np.zeros_like(partial), partial], axis=1)
    lim, _ = wynn_epsilon(both)
    assert lim[0] == 0.0
    assert lim[1] == pytest.approx(math.pi / 4, abs=1e-12)


@pytest.mark.parametrize("n", [0.5, 1.0, 2.5, 3.0])
def test_bose_integral_zero_chemical_potential(n):
    # int_0^inf x^n/(e^x - 1) dx = Gamma(n+1) zeta(n+1)
    ref = special.gamma(n + 1) * special.zeta(n + 1)
    assert bose_integral(n, 0.0, 1.0) == pytest.approx(ref, rel=1e-9)


def test_bose_integral_scaling_and_fugacity():
    # With zeta < 0 the integral is Gamma(n+1) Li_{n+1}(e^{zeta/T}) T^{n+1}.
    T, zeta = 0.3, -0.2
    z = math.exp(zeta / T)
    li = sum(z**k / k**4 for k in range(1, 200))
    assert bose_integral(3, zeta, T) == pytest.approx(6 * li * T**4, rel=1e-9)


def test_bose_integral_domain():
    with pytest.raises(DomainError):
        bose_integral(2, 0.1, 1.0)
    with pytest.raises(DivergentKernelError):
        bose_integral(0, 0.0, 1.0)


def test_exponential_cutoff_bounds_tail():
    x = exponential_cutoff(3.0, 1e-16)
    tail = special.gammaincc(4.0, x) * special.gamma(4.0)
    assert tail <= 1e-16 * special.gamma(4.0) * 10


def test_spec_validation():
    with pytest.raises(DomainError):
        QuadratureSpec(rel_tol=0.0)
    with pytest.raises(DomainError):
        QuadratureSpec(oscillation_period=-1.0)
