"""Thermal dark matter as the noise source: derived scales and parameter tables.

A dilute Maxwellian relic of mass ``mu`` and r.m.s. velocity ``v`` fixes

* the correlation length ``r_C = sqrt(3/2) / (mu v)``,
* the temperature ``T = mu v^2 / 3`` and reduction time ``t_R = 1/T``,
* the chemical-potential factor ``exp(-(mu - zeta)/T) = (rho_m/mu) 8 pi^(3/2) r_C^3``.

The asymptotic reduction exponent for ``n_out = n^2 N`` displaced nucleons is
``2 Gamma(inf) = 4 (m_N/M)^2 rho_m / mu^4 * n_out``, with ``gamma = 1/M^2``.

Inputs use laboratory units where noted (``rho_m`` in GeV/cm^3); everything
else is natural units in GeV.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import DomainError
from .units import C_KM_S, CM, HBARC_GEV_CM, HBAR_GEV_S, NUCLEON_MASS_GEV

__all__ = [
    "DarkMatterScenario", "ScenarioDerived", "FifthForceBound", "Table",
    "dm_derived", "dm_reduction_exponent", "dm_required_density", "fifth_force_bound",
    "make_tables", "round_sig", "one_sig_fig", "within_one_sig_fig", "minimum_gamma_exponent",
    "TABLE_MASSES_KEV", "TABLE_VELOCITIES_KM_S", "TABLE_N_OUT",
    "HALO_DENSITY_GEV_CM3", "FIFTH_FORCE_SCALE_GEV",
]

KEV = 1e-6
TABLE_MASSES_KEV = (1.0, 10.0, 1e2, 1e3, 1e4, 1e6)
TABLE_VELOCITIES_KM_S = {"v_h": 220.0, "v_s": 30.0, "v_e": 8.0}
TABLE_N_OUT = (1e22, 1e8)
TABLE_GAMMA = 1e-6  # (1 TeV)^-2 in GeV^-2
HALO_DENSITY_GEV_CM3 = 0.3
FIFTH_FORCE_SCALE_GEV = 1.4e-12
# Prefactor of the printed closed-form density requirement (GeV cm^-1).
REQUIRED_GAMMA_RHO_PREFACTOR = 1.5e13
# Nucleon mass used when inverting the exponent for the density table; the
# printed table values follow from a 1 GeV nucleon.
TABLE_NUCLEON_MASS_GEV = 1.0

GEV4_PER_GEV_CM3 = HBARC_GEV_CM**3


@dataclass(frozen=True)
class DarkMatterScenario:
    """Dark-matter noise scenario.

    Parameters
    ----------
    mu : float
        Dark matter mass (GeV).
    v_rms : float
        R.m.s. velocity in units of c.
    rho_m : float
        Mass density (GeV cm^-3).
    gamma : float, optional
        Coupling (GeV^-2).  Exactly one of ``gamma`` and ``M`` is given.
    M : float, optional
        Coupling scale, ``gamma = 1/M^2`` (GeV).
    n : float
        Displaced nucleons per bunch.
    N_bunches : float
        Number of bunches.
    mu5 : float
        Fifth-force scale (GeV).
    """

    mu: float
    v_rms: float
    rho_m: float = HALO_DENSITY_GEV_CM3
    gamma: float | None = None
    M: float | None = None
    n: float = 1e9
    N_bunches: float = 1e4
    mu5: float = FIFTH_FORCE_SCALE_GEV

    def __post_init__(self):
        if (self.gamma is None) == (self.M is None):
            if self.gamma is None:
                object.__setattr__(self, "gamma", TABLE_GAMMA)
            else:
                g = 1.0 / self.M**2
                if not math.isclose(g, self.gamma, rel_tol=1e-12):
                    raise DomainError("gamma and M given but gamma != 1/M^2")
        if self.gamma is None:
            object.__setattr__(self, "gamma", 1.0 / self.M**2)
        if self.M is None:
            object.__setattr__(self, "M", 1.0 / math.sqrt(self.gamma))
        for name in ("mu", "v_rms", "rho_m", "gamma", "n", "N_bunches", "mu5"):
            v = getattr(self, name)
            if not (v > 0 and math.isfinite(v)):
                raise DomainError(f"{name} must be positive and finite")
        if not self.v_rms < 1:
            raise DomainError("v_rms must be below the speed of light")

    @property
    def n_out(self):
        """Effective number of displaced nucleons ``n^2 N``."""
        return self.n**2 * self.N_bunches

    @property
    def rho_natural(self):
        """Mass density in GeV^4."""
        return self.rho_m * GEV4_PER_GEV_CM3


@dataclass(frozen=True)
class ScenarioDerived:
    """Derived scales of a scenario (natural units) plus lab-unit views."""

    r_C: float
    T: float
    t_R: float
    chem_factor: float
    exponent_2Gamma: float
    non_dilute: bool = False

    @property
    def r_C_cm(self):
        return self.r_C * HBARC_GEV_CM

    @property
    def t_R_s(self):
        return self.t_R * HBAR_GEV_S


def dm_reduction_exponent(s, nucleon_mass=NUCLEON_MASS_GEV):
    """``2 Gamma(inf) = 4 (m_N / M)^2 (rho_m / mu^4) n^2 N`` (dimensionless).

    Examples
    --------
    >>> s = DarkMatterScenario(mu=1e-6, v_rms=7.3e-4, rho_m=3.0, M=1e3, n=1e11, N_bunches=1.0)
    >>> round(dm_reduction_exponent(s, nucleon_mass=1.0), 3)
    0.922
    """
    return 4.0 * (nucleon_mass / s.M) ** 2 * s.rho_natural / s.mu**4 * s.n_out


def dm_derived(s, nucleon_mass=NUCLEON_MASS_GEV):
    """Correlation length, temperature, reduction time, and dilution factor.

    Examples
    --------
    >>> d = dm_derived(DarkMatterScenario(mu=1e-6, v_rms=220 / 299792.458))
    >>> f"{d.r_C_cm:.1e}"
    '3.3e-05'
    """
    r_C = math.sqrt(1.5) / (s.mu * s.v_rms)
    T = s.mu * s.v_rms**2 / 3.0
    chem = s.rho_natural / s.mu * 8 * math.pi**1.5 * r_C**3
    return ScenarioDerived(r_C=r_C, T=T, t_R=1.0 / T, chem_factor=chem,
                           exponent_2Gamma=dm_reduction_exponent(s, nucleon_mass),
                           non_dilute=chem > 1.0)


def dm_required_density(mu, n_out, gamma, nucleon_mass=TABLE_NUCLEON_MASS_GEV):
    """Density needed for ``2 Gamma(inf) = 1``.

    Parameters
    ----------
    mu : float
        Dark matter mass (GeV).
    n_out : float
        ``n^2 N``.
    gamma : float
        Coupling (GeV^-2).

    Returns
    -------
    (gamma_rho_m, rho_m) : tuple of float
        ``gamma_rho_m`` in GeV cm^-1 from the printed closed form
        ``1.5e13 / n_out * (mu / GeV)^2``.  ``rho_m`` in GeV cm^-3 from
        inverting the exponent: ``mu^4 / (4 gamma m_N^2 n_out)``.  The two
        are not related by ``rho_m = gamma_rho_m / gamma``; they follow
        different printed tables (see README).
    """
    if not (mu > 0 and n_out > 0 and gamma > 0):
        raise DomainError("mu, n_out and gamma must be positive")
    gamma_rho = REQUIRED_GAMMA_RHO_PREFACTOR / n_out * mu**2
    rho_nat = mu**4 / (4.0 * gamma * nucleon_mass**2 * n_out)
    return gamma_rho, rho_nat / GEV4_PER_GEV_CM3


@dataclass(frozen=True)
class FifthForceBound:
    """Lower bound ``M >= 10^log10_M_min`` GeV.  ``M_min`` may underflow to 0."""

    log10_M_min: float

    @property
    def M_min(self):
        return 10.0 ** self.log10_M_min if self.log10_M_min > -300 else 0.0


def fifth_force_bound(mu, mu5=FIFTH_FORCE_SCALE_GEV):
    """Fifth-force lower bound ``M >= 10^(19 - 0.22 mu/mu5)`` GeV.

    Examples
    --------
    >>> fifth_force_bound(0.0).M_min
    1e+19
    """
    if not mu5 > 0:
        raise DomainError("mu5 must be positive")
    if mu < 0:
        raise DomainError("mu must be non-negative")
    return FifthForceBound(19.0 - 0.22 * mu / mu5)


def minimum_gamma_exponent(p=11e-6, masses=(1e-6, 10e-6), v_rms=7.3e-4):
    """Smallest ``3 (p - mu)/(mu v^2)`` over the given dark matter masses."""
    return min(3.0 * (p - mu) / (mu * v_rms**2) for mu in masses)


# ---------------------------------------------------------------------------
# significant figures and tables
# ---------------------------------------------------------------------------

def one_sig_fig(x):
    """Round to one significant figure, halves away from zero.

    Returns ``(digit, exponent)`` with ``x ~ digit * 10**exponent``.

    Examples
    --------
    >>> one_sig_fig(1.5e-21)
    (2, -21)
    >>> one_sig_fig(3.25)
    (3, 0)
    """
    if not (x > 0 and math.isfinite(x)):
        raise DomainError("one_sig_fig needs a positive finite value")
    e = math.floor(math.log10(x))
    m = x / 10.0**e
    d = math.floor(m + 0.5 + 1e-9)
    if d == 10:
        d, e = 1, e + 1
    return d, e


def round_sig(x):
    """Value of :func:`one_sig_fig` as a float."""
    d, e = one_sig_fig(x)
    return float(f"{d}e{e}")


def within_one_sig_fig(value, printed):
    """True when ``value`` rounds to the one-significant-figure ``printed``."""
    return one_sig_fig(value) == one_sig_fig(printed)


def _sci(x):
    d, e = one_sig_fig(x)
    return f"{d}e{e}"


@dataclass
class Table:
    """A parameter table laid out like the printed version.

    ``values[i][j]`` belongs to row ``row_labels[i]`` and mass column
    ``columns[j]`` (keV).
    """

    name: str
    caption: str
    row_labels: list
    columns: list
    values: np.ndarray
    unit: str
    notes: dict = field(default_factory=dict)

    def display(self):
        """One-significant-figure strings, same shape as ``values``."""
        return [[_sci(v) for v in row] for row in self.values]

    def to_text(self):
        """Aligned plain-text rendering."""
        disp = self.display()
        head = ["mu [keV] ->"] + [f"{c:g}" for c in self.columns]
        rows = [head] + [[str(lbl)] + r for lbl, r in zip(self.row_labels, disp)]
        widths = [max(len(r[i]) for r in rows) for i in range(len(head))]
        lines = [f"{self.caption} [{self.unit}]"]
        for k, r in enumerate(rows):
            lines.append("  ".join(c.rjust(w) for c, w in zip(r, widths)))
            if k == 0:
                lines.append("-" * len(lines[-1]))
        return "\n".join(lines) + "\n"

    def to_csv(self):
        """CSV with full-precision values and 1-s.f. display column."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["table", "row", "mu_keV", "value", "display", "unit"])
        disp = self.display()
        for i, lbl in enumerate(self.row_labels):
            for j, c in enumerate(self.columns):
                w.writerow([self.name, lbl, f"{c:g}", repr(float(self.values[i][j])),
                            disp[i][j], self.unit])
        return buf.getvalue()

    def to_dict(self):
        return {"name": self.name, "caption": self.caption, "unit": self.unit,
                "rows": list(map(str, self.row_labels)), "mu_keV": list(self.columns),
                "values": np.asarray(self.values).tolist(), "display": self.display(),
                "notes": self.notes}

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def make_tables(masses_kev=TABLE_MASSES_KEV, velocities=None, n_outs=TABLE_N_OUT,
                gamma=TABLE_GAMMA):
    """Correlation length, reduction time, and required-density tables.

    Returns
    -------
    dict
        ``{"table1": r_C [cm], "table2": t_R [s], "table3": gamma rho_m
        [GeV/cm], "table4": rho_m [GeV/cm^3]}``.
    """
    velocities = velocities or TABLE_VELOCITIES_KM_S
    mus = [m * KEV for m in masses_kev]
    t1 = np.empty((len(velocities), len(mus)))
    t2 = np.empty_like(t1)
    for i, v in enumerate(velocities.values()):
        for j, mu in enumerate(mus):
            d = dm_derived(DarkMatterScenario(mu=mu, v_rms=v / C_KM_S))
            t1[i, j] = d.r_C_cm
            t2[i, j] = d.t_R_s
    t3 = np.empty((len(n_outs), len(mus)))
    t4 = np.empty_like(t3)
    for i, n_out in enumerate(n_outs):
        for j, mu in enumerate(mus):
            t3[i, j], t4[i, j] = dm_required_density(mu, n_out, gamma)
    vel_labels = list(velocities)
    nout_labels = [f"{n:.0e}" for n in n_outs]
    cols = list(masses_kev)
    return {
        "table1": Table("table1", "Correlation length r_C", vel_labels, cols, t1, "cm"),
        "table2": Table("table2", "Reduction time t_R", vel_labels, cols, t2, "s"),
        "table3": Table("table3", "Required gamma*rho_m", nout_labels, cols, t3, "GeV/cm",
                        notes={"prefactor_GeV_per_cm": REQUIRED_GAMMA_RHO_PREFACTOR}),
        "table4": Table("table4", "Required rho_m", nout_labels, cols, t4, "GeV/cm^3",
                        notes={"gamma_GeV^-2": gamma,
                               "nucleon_mass_GeV": TABLE_NUCLEON_MASS_GEV,
                               "GeV^4_per_GeV_cm^-3": GEV4_PER_GEV_CM3}),
    }
