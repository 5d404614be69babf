"""Worked reference values, one test per value, grouped by module.

Values marked "independent" are recomputed here from elementary formulas
rather than through the package pipeline.
"""

import math

import numpy as np
import pytest
from scipy import integrate as sp_integrate
from scipy import special

from conftest import two_branch
from nwcollapse.config import quantity
from nwcollapse.correlators import (
    DiluteNR,
    Thermal,
    WhiteCSL,
    corr_F,
    corr_I,
    corr_I_diff,
    gaussian_kernel,
)
from nwcollapse.dynamics import (
    EnsembleSpec,
    covariance_matrix,
    expected_p1p2_closed,
    fp_diffusion_matrix,
    moment_rhs,
    p1p2_upper_bound,
    sample_reduction_ensemble,
)
from nwcollapse.observables import (
    ParticleSpecies,
    energy_rate,
    energy_total,
    gamma_spectrum,
    markov_diagnostic,
    suppression_exponent,
)
from nwcollapse.phenomenology import (
    DarkMatterScenario,
    dm_derived,
    dm_reduction_exponent,
    dm_required_density,
    fifth_force_bound,
    one_sig_fig,
)
from nwcollapse.quadrature import bose_integral
from nwcollapse.rates import (
    ParticleGroup,
    SuperpositionConfig,
    csl_matching,
    gamma_LM,
    gamma_matrix,
    gamma_pair,
    offdiag_decay,
    white_rate_closed,
)
from nwcollapse.units import CM, HBAR_GEV_S, K_B_GEV_PER_K, NUCLEON_MASS_GEV, SECOND

M_N = NUCLEON_MASS_GEV
NUCLEON = ParticleSpecies(M_N, M_N)


@pytest.fixture(scope="module")
def csl_nucleon():
    """White noise with gamma_CSL = 1e-30 cm^3/s, r_C = 1e-5 cm, coupled to one nucleon."""
    gamma_csl = quantity("1e-30 cm^3/s", -2)
    r_C = 1e-5 * CM
    return WhiteCSL(gamma=gamma_csl / M_N**2, r_C=r_C), gamma_csl, r_C


# ---------------------------------------------------------------------------
# quadrature
# ---------------------------------------------------------------------------

def test_bose_integral_with_fugacity_below_zeta_function_bound():
    value = bose_integral(3.0, -1.0, 1.0)
    # independent: sum_k e^{-k} Gamma(4) / k^4
    series = sum(math.exp(-k) * 6.0 / k**4 for k in range(1, 200))
    assert value == pytest.approx(series, rel=1e-10)
    assert value < special.gamma(4) * special.zeta(4)


# ---------------------------------------------------------------------------
# rates
# ---------------------------------------------------------------------------

def test_single_nucleon_csl_rate_after_one_second(csl_nucleon):
    model, _, r_C = csl_nucleon
    g = ParticleGroup.single(0.0, M_N)
    rate = gamma_pair(model, g, g.displaced([1e3 * r_C, 0, 0]), SECOND).gamma
    assert rate == pytest.approx(2.24e-17, rel=5e-3)


def test_far_separated_bunches_add(csl_nucleon):
    model, _, r_C = csl_nucleon
    R = 3.0 * r_C
    a = ParticleGroup([[0, 0, 0], [1e6 * r_C, 0, 0]], [M_N, M_N])
    b = ParticleGroup([[R, 0, 0], [1e6 * r_C + R, 0, 0]], [M_N, M_N])
    single = gamma_pair(model, ParticleGroup.single(0.0, M_N), ParticleGroup.single(R, M_N),
                        SECOND).gamma
    total = gamma_pair(model, a, b, SECOND).gamma
    assert total == pytest.approx(2 * single, rel=1e-6)


def test_two_branch_gamma_lm_is_gamma_pair(white, pair):
    assert gamma_LM(white, pair, 0, 1, 3.0).gamma == gamma_pair(white, *pair.groups, 3.0).gamma


def test_three_far_branches_have_equal_rates(white):
    g = ParticleGroup.single(0.0, 1.0)
    cfg = SuperpositionConfig((g, g.displaced([100.0, 0, 0]), g.displaced([0, 100.0, 0])),
                              (0.2, 0.3, 0.5))
    m = gamma_matrix(white, cfg, 2.0)
    off = m[~np.eye(3, dtype=bool)]
    np.testing.assert_allclose(off, off[0], rtol=1e-14)


def test_off_diagonal_decay_at_gamma_2_24(csl_nucleon):
    model, _, r_C = csl_nucleon
    g = ParticleGroup.single(0.0, M_N)
    t = 1e17 * SECOND
    decay = offdiag_decay(model, g, g.displaced([1e3 * r_C, 0, 0]), t)
    assert decay == pytest.approx(math.exp(-2.2448390265645813), rel=1e-10)
    assert round(decay, 3) == 0.106


def test_thermal_asymptotic_decay_uses_I_difference(thermal):
    m, R = 0.7, 2.0
    g = ParticleGroup.single(0.0, m)
    decay = offdiag_decay(thermal, g, g.displaced([R, 0, 0]), math.inf)
    idiff = float(corr_I_diff(thermal, R, math.inf))
    assert decay == pytest.approx(math.exp(-2 * thermal.gamma * m * m * idiff), rel=1e-12)


def test_csl_match_length_for_halo_dark_matter():
    mu, v = 1e-6, 7.3e-4
    model = DiluteNR(mu=mu, T=mu * v**2 / 3)
    r_C, _ = csl_matching(model)
    assert one_sig_fig(r_C / CM) == (3, -5)


def test_csl_rate_product_reproduces_dilute_asymptote():
    # independent route: CSL closed form with the matched parameters
    model = DiluteNR.from_chem(1e-6, 1e-6 * 7.3e-4**2 / 3, 4.8e-7, gamma=1e-6)
    r_C, rate_product = csl_matching(model)
    g = ParticleGroup.single(0.0, M_N)
    far = 1e4 * r_C
    dilute = gamma_pair(model, g, g.displaced([far, 0, 0]), math.inf).gamma
    csl = white_rate_closed(rate_product, r_C, far, 1.0)
    assert csl == pytest.approx(dilute, rel=1e-10)


def test_table3_density_gives_unit_exponent():
    # Inverting the exponent gives 2 Gamma(inf) n_out = 1 exactly; the printed
    # one-figure density reproduces it within its rounding.
    mu, n_out, gamma = 1e-6, 1e22, 1e-6
    _, rho = dm_required_density(mu, n_out, gamma)
    exact = DarkMatterScenario(mu=mu, v_rms=7.3e-4, rho_m=rho, gamma=gamma, n=1e11,
                               N_bunches=1.0)
    printed = DarkMatterScenario(mu=mu, v_rms=7.3e-4, rho_m=3.0, gamma=gamma, n=1e11,
                                 N_bunches=1.0)
    assert dm_reduction_exponent(exact, nucleon_mass=1.0) == pytest.approx(1.0, rel=1e-12)
    assert dm_reduction_exponent(printed, nucleon_mass=1.0) == pytest.approx(1.0, rel=0.1)


# ---------------------------------------------------------------------------
# dynamics
# ---------------------------------------------------------------------------

def test_white_covariance_for_far_branches(white):
    m, t = 1.3, 2.5
    g = ParticleGroup.single(0.0, m)
    cfg = SuperpositionConfig((g, g.displaced([100.0, 0, 0])), (0.5, 0.5))
    c = covariance_matrix(white, cfg, t).matrix
    f0 = float(corr_F(white, 0.0, t))
    np.testing.assert_allclose(np.diag(c), 2 * m * m * t * f0, rtol=1e-13)
    assert abs(c[0, 1]) < 1e-12 * c[0, 0]


def test_thermal_two_by_two_covariance(thermal):
    R, t = 1.5, 4.0
    cfg = two_branch(separation=R)
    c = covariance_matrix(thermal, cfg, t).matrix
    a = 2 * float(corr_I(thermal, 0.0, t))
    b = 2 * float(corr_I(thermal, R, t))
    assert c[0, 0] == pytest.approx(a, rel=1e-10)
    assert c[1, 1] == pytest.approx(a, rel=1e-10)
    assert c[0, 1] == pytest.approx(b, rel=1e-9)


def test_closed_form_respects_bound_at_gamma_5():
    value = expected_p1p2_closed(5.0, 0.5, 0.5)
    bound = 0.25 * (math.sqrt(math.pi) / 2) * 5**-0.5 * math.exp(-5)
    assert p1p2_upper_bound(5.0, 0.5, 0.5) == pytest.approx(bound, rel=1e-14)
    assert value <= bound


def test_closed_form_against_two_dimensional_quadrature():
    # independent: exponents y_J = x_J - s/2 with x_J ~ N(0, s) independent
    # under the raw measure, s = 4 Gamma; E_P[p1 p2] = E_Q[p1 p2 e^{y1+y2} / w].
    gamma, p1 = 1.0, 0.3
    p2 = 1 - p1
    s = 4 * gamma
    sd = math.sqrt(s)

    def integrand(x2, x1):
        y1, y2 = x1 - s / 2, x2 - s / 2
        w = p1 * math.exp(y1) + p2 * math.exp(y2)
        dens = math.exp(-(x1 * x1 + x2 * x2) / (2 * s)) / (2 * math.pi * s)
        return p1 * p2 * math.exp(y1 + y2) / w * dens

    lim = 12 * sd
    value, _ = sp_integrate.dblquad(integrand, -lim, lim, -lim, lim, epsabs=1e-13, epsrel=1e-11)
    assert expected_p1p2_closed(gamma, p1, p2) == pytest.approx(value, rel=1e-8)


def test_diffusion_vanishes_at_a_corner(white, quad):
    np.testing.assert_array_equal(fp_diffusion_matrix(white, quad, 1.0, p=[1, 0, 0, 0]), 0.0)


@pytest.mark.parametrize("p1", [0.5, 0.3])
def test_two_branch_drift_formula(white, p1):
    cfg = two_branch(p1=p1)
    h = 1e-4
    dg = (gamma_pair(white, *cfg.groups, 1.0 + h).gamma
          - gamma_pair(white, *cfg.groups, 1.0 - h).gamma) / (2 * h)
    p2 = 1 - p1
    expected = -8 * dg * p1**2 * p2**2
    assert moment_rhs(white, cfg, 1.0, 0, 0) == pytest.approx(expected, rel=1e-8)
    assert moment_rhs(white, cfg, 1.0, 1, 1) == pytest.approx(expected, rel=1e-8)


def test_ensemble_moment_derivative_matches_drift(white, pair):
    # Gamma(t) ~ 0.5 near t = 22.3 for the default pair.
    rate = gamma_pair(white, *pair.groups, 1.0).gamma
    t, h = 0.5 / rate, 1.0
    spec = EnsembleSpec(40000, 17, (t - h, t, t + h))
    batch = sample_reduction_ensemble(white, pair, spec)
    prod = batch.probabilities[:, :, 0] * batch.probabilities[:, :, 1]
    fd = (prod[2] - prod[0]) / (2 * h)
    fd_mean, fd_err = fd.mean(), fd.std(ddof=1) / math.sqrt(fd.size)
    drift = -8 * rate * prod[1] ** 2
    d_mean, d_err = drift.mean(), drift.std(ddof=1) / math.sqrt(drift.size)
    assert abs(fd_mean - d_mean) < 3 * math.hypot(fd_err, d_err)


# ---------------------------------------------------------------------------
# observables
# ---------------------------------------------------------------------------

def test_csl_nucleon_heating_rate(csl_nucleon):
    model, gamma_csl, r_C = csl_nucleon
    lam = gamma_csl * (4 * math.pi * r_C**2) ** -1.5
    # independent: 3 lambda hbar^2 / (4 m_N r_C^2), converted to eV/s
    expected_ev_s = 3 * lam / (4 * M_N * r_C**2) / HBAR_GEV_S * 1e9
    got_ev_s = energy_rate(model, NUCLEON, 1.0) / HBAR_GEV_S * 1e9
    assert got_ev_s == pytest.approx(expected_ev_s, rel=1e-12)
    assert one_sig_fig(got_ev_s) == (7, -26)


def test_thermal_rate_vanishes_at_late_times(thermal):
    assert energy_rate(thermal, NUCLEON, math.inf) == 0.0
    late = abs(energy_rate(thermal, NUCLEON, 200.0))
    assert late < 1e-3 * abs(energy_rate(thermal, NUCLEON, 0.5))


def test_dilute_asymptotic_heating_for_dark_matter():
    s = DarkMatterScenario(mu=1e-6, v_rms=220 / 299792.458, rho_m=3.0, gamma=1e-6)
    d = dm_derived(s)
    model = DiluteNR.from_chem(s.mu, d.T, d.chem_factor, gamma=s.gamma)
    total = energy_total(model, NUCLEON, math.inf)
    closed = 3 * M_N * s.gamma * s.rho_natural / (2 * d.r_C**2 * s.mu**4)
    assert total == pytest.approx(closed, rel=1e-8)
    assert total / K_B_GEV_PER_K < 1e-15


def test_gamma_suppression_between_11_and_12_keV():
    mu, v = 10e-6, 7.3e-4
    model = DiluteNR(mu=mu, T=mu * v**2 / 3)
    diff = suppression_exponent(12e-6, mu, v) - suppression_exponent(11e-6, mu, v)
    assert diff == pytest.approx(3 * 1e-6 / (mu * v**2), rel=1e-12)
    lo = gamma_spectrum(model, 11e-6).log_dP_dp
    hi = gamma_spectrum(model, 12e-6).log_dP_dp
    assert lo - hi == pytest.approx(diff, rel=1e-5)


def test_markov_ratio_with_table_length():
    ratio = markov_diagnostic(WhiteCSL(1.0, 3e-5 * CM), M_N).ratio
    assert ratio == pytest.approx(3.5e-10, rel=0.01)


def test_markov_ratio_with_exact_halo_length():
    s = DarkMatterScenario(mu=1e-6, v_rms=7.3e-4)
    d = dm_derived(s)
    ratio = markov_diagnostic(DiluteNR.from_chem(s.mu, d.T, d.chem_factor), M_N).ratio
    assert ratio == pytest.approx(3.1771988490257996e-10, rel=1e-12)


def test_white_lindblad_and_markov_identification(white):
    from nwcollapse.observables import lindblad_kernel
    k = np.array([0.0, 0.5, 2.0])
    got = lindblad_kernel(white, 1.0, k, 3.0)
    np.testing.assert_allclose(got, white.gamma * np.exp(-k**2 * white.r_C**2), rtol=1e-14)
    # equal to gamma m^2 times the Fourier transform of G
    g0 = gaussian_kernel(0.0, white.r_C) * (4 * math.pi * white.r_C**2) ** 1.5
    assert got[0] == pytest.approx(white.gamma * g0)


# ---------------------------------------------------------------------------
# phenomenology
# ---------------------------------------------------------------------------

def test_chemical_factor_with_rounded_length():
    s = DarkMatterScenario(mu=1e-6, v_rms=7.3e-4)
    rounded = s.rho_natural / s.mu * 8 * math.pi**1.5 * (3e-5 * CM) ** 3
    assert rounded == pytest.approx(3.6e-7, rel=0.01)


def test_chemical_factor_exact():
    d = dm_derived(DarkMatterScenario(mu=1e-6, v_rms=7.3e-4))
    assert d.chem_factor == pytest.approx(4.849351969087288e-07, rel=1e-12)


def test_fifth_force_at_one_keV():
    b = fifth_force_bound(1e-6)
    assert b.log10_M_min == pytest.approx(19 - 0.22e-6 / 1.4e-12, rel=1e-14)
    assert round(b.log10_M_min) == -157124
    assert b.M_min == 0.0


def test_fifth_force_crossover_mass():
    assert fifth_force_bound(1.4e-12 * 19 / 0.22).M_min == pytest.approx(1.0, rel=1e-12)


def test_thermal_dilute_model_consistency_for_exponent():
    # rates-side check: the thermal (Bose) model at halo parameters gives the
    # same asymptotic exponent as the dilute closed form, within 1%.
    s = DarkMatterScenario(mu=1e-5, v_rms=7.3e-4, M=1e3, n=1e11, N_bunches=1.0)
    d = dm_derived(s)
    model = Thermal.from_chem(s.mu, d.T, d.chem_factor, gamma=s.gamma)
    g = ParticleGroup.single(0.0, M_N)
    rate = gamma_pair(model, g, g.displaced([1e4 * d.r_C, 0, 0]), math.inf).gamma
    assert 2 * rate * s.n_out == pytest.approx(d.exponent_2Gamma, rel=0.01)
