import json
import math

import numpy as np
import pytest

from nwcollapse.correlators import DiluteNR
from nwcollapse.errors import DomainError
from nwcollapse.phenomenology import (
    DarkMatterScenario,
    dm_derived,
    dm_reduction_exponent,
    dm_required_density,
    fifth_force_bound,
    make_tables,
    minimum_gamma_exponent,
    one_sig_fig,
    round_sig,
    within_one_sig_fig,
)
from nwcollapse.rates import ParticleGroup, gamma_pair
from nwcollapse.units import NUCLEON_MASS_GEV
from printed_tables import PRINTED


@pytest.fixture
def scenario():
    return DarkMatterScenario(mu=1e-5, v_rms=7.3e-4, M=1e3, n=1e11, N_bunches=1.0)


class TestScenario:
    def test_gamma_and_M(self):
        s = DarkMatterScenario(mu=1e-6, v_rms=1e-3, M=1e3)
        assert s.gamma == pytest.approx(1e-6)
        s = DarkMatterScenario(mu=1e-6, v_rms=1e-3, gamma=4e-6)
        assert s.M == pytest.approx(500.0)

    def test_default_coupling(self):
        assert DarkMatterScenario(mu=1e-6, v_rms=1e-3).gamma == 1e-6

    def test_inconsistent_coupling(self):
        with pytest.raises(DomainError):
            DarkMatterScenario(mu=1e-6, v_rms=1e-3, gamma=1.0, M=2.0)

    @pytest.mark.parametrize("kw", [dict(mu=-1.0, v_rms=1e-3), dict(mu=1e-6, v_rms=1.5),
                                    dict(mu=1e-6, v_rms=1e-3, rho_m=0.0)])
    def test_invalid(self, kw):
        with pytest.raises(DomainError):
            DarkMatterScenario(**kw)

    def test_n_out(self, scenario):
        assert scenario.n_out == 1e22


class TestDerived:
    def test_frozen_scales(self, scenario):
        d = dm_derived(scenario)
        assert d.T == pytest.approx(1e-5 * 7.3e-4**2 / 3)
        assert d.t_R == pytest.approx(562957402889.848, rel=1e-12)
        assert d.chem_factor == pytest.approx(4.849351969087288e-11, rel=1e-10)
        assert not d.non_dilute

    def test_exponent_values(self, scenario):
        assert dm_reduction_exponent(scenario, nucleon_mass=1.0) == pytest.approx(
            9.220629967004397e-06, rel=1e-12)
        assert dm_derived(scenario).exponent_2Gamma == pytest.approx(
            8.112715952689015e-06, rel=1e-12)

    def test_exponent_scales_as_mass_to_minus_four(self, scenario):
        other = DarkMatterScenario(mu=2e-5, v_rms=7.3e-4, M=1e3, n=1e11, N_bunches=1.0)
        ratio = dm_reduction_exponent(scenario) / dm_reduction_exponent(other)
        assert ratio == pytest.approx(16.0)

    def test_exponent_matches_rate_kernel(self, scenario):
        # Twice the asymptotic pair rate of one nucleon, times n^2 N, is the exponent.
        d = dm_derived(scenario)
        model = DiluteNR.from_chem(scenario.mu, d.T, d.chem_factor, gamma=scenario.gamma)
        g = ParticleGroup.single(0.0, NUCLEON_MASS_GEV)
        far = g.displaced([1e4 * d.r_C, 0.0, 0.0])
        rate = gamma_pair(model, g, far, math.inf).gamma
        assert 2 * rate * scenario.n_out == pytest.approx(d.exponent_2Gamma, rel=1e-9)

    def test_non_dilute_flag(self):
        s = DarkMatterScenario(mu=1e-9, v_rms=1e-4, rho_m=1e6)
        assert dm_derived(s).non_dilute

    def test_lab_units(self):
        d = dm_derived(DarkMatterScenario(mu=1e-6, v_rms=220 / 299792.458))
        assert f"{d.r_C_cm:.1e}" == "3.3e-05"
        assert d.t_R_s > 0


class TestRequiredDensity:
    def test_values(self):
        gamma_rho, rho = dm_required_density(1e-6, 1e22, 1e-6)
        assert gamma_rho == pytest.approx(1.5e-21)
        assert rho == pytest.approx(3.253573791308577, rel=1e-12)

    def test_inverts_exponent(self):
        mu, n_out, gamma = 1e-5, 1e8, 1e-6
        _, rho = dm_required_density(mu, n_out, gamma)
        s = DarkMatterScenario(mu=mu, v_rms=1e-3, rho_m=rho, gamma=gamma, n=1e4, N_bunches=1.0)
        assert dm_reduction_exponent(s, nucleon_mass=1.0) == pytest.approx(1.0, rel=1e-12)

    def test_domain(self):
        with pytest.raises(DomainError):
            dm_required_density(0.0, 1e22, 1e-6)


class TestFifthForce:
    def test_massless_limit(self):
        assert fifth_force_bound(0.0).M_min == 1e19

    def test_exponent_linear_in_mass(self):
        b = fifth_force_bound(1e-5)
        assert b.log10_M_min == pytest.approx(19 - 0.22 * 1e-5 / 1.4e-12)
        assert b.log10_M_min == pytest.approx(-1571409.5714285714)
        assert b.M_min == 0.0

    def test_domain(self):
        with pytest.raises(DomainError):
            fifth_force_bound(-1.0)
        with pytest.raises(DomainError):
            fifth_force_bound(1.0, mu5=0.0)


class TestSignificantFigures:
    @pytest.mark.parametrize("x,expected", [
        (1.5e-21, (2, -21)), (2.5, (3, 0)), (3.25, (3, 0)), (9.6, (1, 1)),
        (0.95, (1, 0)), (562957.4, (6, 5)), (1.0, (1, 0)),
    ])
    def test_half_up(self, x, expected):
        assert one_sig_fig(x) == expected

    def test_round_sig(self):
        assert round_sig(562957.4) == 6e5
        assert round_sig(0.00449) == 0.004

    def test_within(self):
        assert within_one_sig_fig(3.3e-5, 3e-5)
        assert not within_one_sig_fig(3.6e-5, 3e-5)

    @pytest.mark.parametrize("x", [0.0, -1.0, math.inf, math.nan])
    def test_domain(self, x):
        with pytest.raises(DomainError):
            one_sig_fig(x)

    def test_minimum_gamma_exponent(self):
        assert minimum_gamma_exponent() == pytest.approx(562957.4028898474, rel=1e-12)
        assert round_sig(minimum_gamma_exponent()) >= 6e5


@pytest.fixture(scope="module")
def tables():
    return make_tables()


class TestTables:
    @pytest.mark.parametrize("name", ["table1", "table2", "table3", "table4"])
    def test_match_printed(self, tables, name):
        table = tables[name]
        printed = PRINTED[name]
        assert len(table.values) == len(printed)
        for row, ref in zip(table.values, printed):
            assert len(row) == len(ref)
            for v, p in zip(row, ref):
                assert within_one_sig_fig(v, p), (name, v, p)

    def test_display_and_text(self, tables):
        t = tables["table1"]
        assert t.display()[0] == ["3e-5", "3e-6", "3e-7", "3e-8", "3e-9", "3e-11"]
        text = t.to_text()
        assert t.caption in text and "3e-11" in text

    def test_csv_and_json(self, tables):
        t = tables["table2"]
        lines = t.to_csv().splitlines()
        assert lines[0] == "table,row,mu_keV,value,display,unit"
        assert len(lines) == 1 + np.size(t.values)
        doc = json.loads(t.to_json())
        assert doc["name"] == "table2" and doc["display"] == t.display()

    def test_custom_masses(self):
        out = make_tables(masses_kev=(1.0, 2.0))
        assert np.shape(out["table1"].values)[1] == 2
