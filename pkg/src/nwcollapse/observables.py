"""Energy production, radiation, and Markovian-validity observables.

In the Markovian approximation the energy production rate of free or bound
particles depends only on the kinetic terms:

    dE/dt = gamma * sum_i m_i^2 / M_i * int d^3k/(2 pi)^3  k^2 Fhat(k, t),

with ``m_i`` the noise couplings and ``M_i`` the inertial masses.  Every
model has a closed form or one-dimensional energy integral for this.  The
generic momentum-space quadrature is kept as an independent check.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .correlators import (CutoffProduct, DiluteNR, ShiftedModel, Thermal, Unparticle,
                          WhiteCSL, correlation_length, default_spec, fourier_Fhat)
from .errors import DomainError, NonConvergenceError, UnboundedGrowthError
from .quadrature import (QuadratureSpec, exponential_cutoff, integrate, integrate_fourier,
                         integrate_semi_infinite)
from .units import BOHR_RADIUS_CM, CM, FINE_STRUCTURE

__all__ = [
    "ParticleSpecies", "SpectrumPoint", "MarkovDiagnostic", "energy_rate", "energy_total",
    "fit_growth_exponent", "gamma_spectrum", "atomic_factor", "suppression_exponent",
    "markov_diagnostic", "O_eval", "lindblad_kernel", "unparticle_energy_coefficient",
    "beta_moment", "write_spectrum_csv",
]

_TAIL = 1e-16
BOHR_RADIUS = BOHR_RADIUS_CM * CM


@dataclass(frozen=True)
class ParticleSpecies:
    """A kind of particle: noise coupling ``m``, inertial mass ``M``, multiplicity.

    Examples
    --------
    >>> ParticleSpecies(coupling=0.938, mass=0.938).weight
    0.938
    """

    coupling: float
    mass: float
    count: float = 1.0

    def __post_init__(self):
        if not (self.coupling > 0 and self.mass > 0):
            raise DomainError("coupling and mass must be positive")
        if not self.count >= 0:
            raise DomainError("count must be non-negative")

    @property
    def weight(self):
        """``count * m^2 / M``, the factor entering the energy rate."""
        return self.count * self.coupling**2 / self.mass


def _species_weight(species):
    if isinstance(species, ParticleSpecies):
        species = [species]
    return math.fsum(s.weight for s in species)


def _unwrap(model):
    # A uniform shift of F is a delta function at k = 0, killed by k^2.
    while isinstance(model, ShiftedModel):
        model = model.base
    return model


def _check(res, what):
    if not res.converged:
        raise NonConvergenceError(f"{what} did not converge "
                                  f"(estimate {res.value!r} +- {res.error_estimate!r})")
    return float(res.value)


def unparticle_energy_coefficient(d):
    """``3 Gamma(3/2) Gamma(d) / ((2 pi)^2 Gamma(3/2 + d))``."""
    return 3.0 * math.exp(special.gammaln(1.5) + special.gammaln(d) - special.gammaln(1.5 + d)) \
        / (2 * math.pi) ** 2


def beta_moment(d, omega=1.0):
    """``int_0^omega k^4 (omega^2 - k^2)^(d-2) dk`` by quadrature (``d > 1``).

    The closed form is ``omega^(2d+1) B(5/2, d-1) / 2``.  The integrable
    endpoint singularity is handled by the substitution ``k = omega sin(theta)``.
    """
    if d <= 1:
        raise DomainError("the k-moment converges only for d > 1")

    def f(th):
        c = np.cos(th)
        return np.sin(th) ** 4 * c ** (2 * d - 3)

    # Singular end at theta = pi/2: integrate in phi = pi/2 - theta.
    res = integrate(lambda p: f(0.5 * math.pi - p), 0.0, 0.5 * math.pi,
                    QuadratureSpec(rel_tol=1e-12, abs_tol=0.0, singular_lower=True))
    return omega ** (2 * d + 1) * _check(res, "k-moment")


# ---------------------------------------------------------------------------
# energy rate
# ---------------------------------------------------------------------------

def _dilute_parts(model):
    mu, T = model.mu, model.T
    c = (3 * math.sqrt(math.pi) / 8) * math.exp(model.log_chem) * (2 * mu * T) ** 2.5 \
        / (2 * math.pi**2)
    return c / mu**2, c / mu**3


def _mass_shell_energy(model, t, total, spec):
    """1-D energy integral for Thermal/DiluteNR in ``x = (omega - mu)/T``."""
    mu, T = model.mu, model.T
    chem = math.exp(model.log_chem)
    if isinstance(model, DiluteNR):
        kT = math.sqrt(2 * mu * T)
        pref = chem * kT**5 / (2 * mu ** (3 if total else 2)) / (2 * math.pi**2)
        g = lambda x: x**1.5 * np.exp(-x)
        xmax = exponential_cutoff(1.5, _TAIL) + 5.0
    else:
        kT = math.sqrt(T * (T + 2 * mu))
        wT = mu + T
        p = 2 if total else 1
        pref = T * kT**3 / wT**p / (2 * math.pi**2)

        def g(x):
            s = T * x
            k = np.sqrt(s * (s + 2 * mu))
            om = mu + s
            return (k / kT) ** 3 * (wT / om) ** p * chem / (np.exp(x) - chem)
        xmax = exponential_cutoff(3.0, _TAIL) + 5.0
    if t == math.inf:
        if not total:
            return 0.0
        weights, weight, tau = (1.0, 0.0, 0.0), None, 0.0
    else:
        tau = T * t
        ph = mu * t
        if total:
            weights = (1.0, -math.cos(ph), math.sin(ph))
            weight = lambda x: 2.0 * np.sin(0.5 * (ph + tau * x)) ** 2
        else:
            weights = (0.0, math.sin(ph), math.cos(ph))
            weight = lambda x: np.sin(ph + tau * x)
    res = integrate_fourier(g, tau, weights, 0.0, xmax, spec, weight=weight)
    return pref * _check(res, "energy integral")


def _unparticle_energy(model, t, total, spec):
    d, T = model.d, model.T
    y0 = -model.zeta / T
    coef = unparticle_energy_coefficient(d) * model.coupling_scale
    q = 2 * d - 1 if total else 2 * d
    pref = coef * T ** (q + 1)
    g = lambda x: x**q / np.expm1(x + y0)
    xmax = exponential_cutoff(q, _TAIL) + 5.0
    if t == math.inf:
        if not total:
            return 0.0
        if model.zeta == 0.0 and d <= 0.5:
            exponent, err = fit_growth_exponent(
                lambda s: _unparticle_energy(model, s, True, spec),
                np.logspace(4, 5, 11) / T)
            raise UnboundedGrowthError(
                "energy production grows without bound for zeta = 0, d <= 1/2",
                exponent=exponent, stderr=err)
        weights, weight, tau = (1.0, 0.0, 0.0), None, 0.0
    else:
        tau = T * t
        if total:
            weights = (1.0, -1.0, 0.0)
            weight = lambda x: 2.0 * np.sin(0.5 * tau * x) ** 2
        else:
            weights = (0.0, 0.0, 1.0)
            weight = lambda x: np.sin(tau * x)
    s = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=spec.abs_tol, max_evals=spec.max_evals,
                       singular_lower=True)
    res = integrate_fourier(g, tau, weights, 0.0, xmax, s, weight=weight)
    return pref * _check(res, "unparticle energy integral")


def _white_rate_density(r_C):
    """``(1/2pi^2) int k^4 e^{-k^2 r_C^2} dk``."""
    return 3 * math.sqrt(math.pi) / (16 * math.pi**2 * r_C**5)


def _fourier_rate(model, t, spec):
    lc = correlation_length(model)

    def f(kx):
        k = kx / lc
        return kx**4 * np.asarray(fourier_Fhat(model, k, t, spec))

    s = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=0.0, max_evals=spec.max_evals, scale=2.0)
    if isinstance(model, (Thermal, DiluteNR)) and t > 0:
        # Resolve the oscillation of sin(omega_k t) in k.
        s = QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=0.0, max_evals=spec.max_evals,
                           scale=2.0, upper=12.0 if isinstance(model, DiluteNR) else None)
    res = integrate_semi_infinite(f, s)
    return _check(res, "momentum-space energy integral") / (2 * math.pi**2 * lc**5)


def energy_rate(model, species, t, method="closed", spec=None):
    """Markovian energy production rate ``d Tr(H rho)/dt`` (GeV^2 in natural units).

    Parameters
    ----------
    model : NoiseModel
    species : ParticleSpecies or sequence of them
    t : float
        Time (``inf`` allowed).
    method : {"closed", "fourier"}
        ``"closed"`` uses the model's closed form or 1-D energy integral;
        ``"fourier"`` integrates ``k^4 Fhat(k, t)`` directly.

    Examples
    --------
    >>> m = WhiteCSL(gamma=1.0, r_C=1.0)
    >>> p = ParticleSpecies(1.0, 1.0)
    >>> abs(energy_rate(m, p, 3.0) / (3 / (32 * math.pi**1.5)) - 1) < 1e-14
    True
    """
    t = float(t)
    if t < 0 or math.isnan(t):
        raise DomainError("t must be non-negative")
    if method not in ("closed", "fourier"):
        raise DomainError(f"unknown method {method!r}")
    model = _unwrap(model)
    spec = spec or default_spec()
    S = _species_weight(species)
    if t == 0.0 and not isinstance(model, WhiteCSL):
        return 0.0
    if method == "fourier":
        return model.gamma * S * _fourier_rate(model, t, spec)
    if isinstance(model, WhiteCSL):
        return model.gamma * S * 0.5 * _white_rate_density(model.r_C)
    if isinstance(model, CutoffProduct):
        return model.gamma * S * _white_rate_density(model.r_C) * model.spectrum.first(t, spec)
    if isinstance(model, DiluteNR):
        if t == math.inf:
            return 0.0
        tau = model.T * t
        rate, _ = _dilute_parts(model)
        return model.gamma * S * rate * (1 + tau * tau) ** -1.25 \
            * math.sin(model.mu * t + 2.5 * math.atan(tau))
    if isinstance(model, Thermal):
        return model.gamma * S * _mass_shell_energy(model, t, False, spec)
    if isinstance(model, Unparticle):
        return model.gamma * S * _unparticle_energy(model, t, False, spec)
    raise DomainError(f"unsupported noise model {type(model).__name__}")


def energy_total(model, species, t, spec=None):
    """Energy ``Tr(H rho(t)) - Tr(H rho(0))`` delivered up to ``t`` (``inf`` allowed).

    Raises
    ------
    UnboundedGrowthError
        At ``t = inf`` when the total grows without bound.  The exception
        carries a fitted growth exponent.
    """
    t = float(t)
    if t < 0 or math.isnan(t):
        raise DomainError("t must be non-negative")
    model = _unwrap(model)
    spec = spec or default_spec()
    S = _species_weight(species)
    if t == 0.0:
        return 0.0
    if isinstance(model, WhiteCSL):
        if t == math.inf:
            raise UnboundedGrowthError("white noise heats at a constant rate",
                                       exponent=1.0, stderr=0.0)
        return model.gamma * S * 0.5 * _white_rate_density(model.r_C) * t
    if isinstance(model, CutoffProduct):
        second = model.spectrum.second(t, spec)
        if math.isinf(second):
            raise UnboundedGrowthError("product correlator with gamma(0) > 0 heats "
                                       "at a constant asymptotic rate", exponent=1.0, stderr=0.0)
        return model.gamma * S * _white_rate_density(model.r_C) * second
    if isinstance(model, DiluteNR):
        _, c = _dilute_parts(model)
        if t == math.inf:
            return model.gamma * S * c
        tau = model.T * t
        env = (1 + tau * tau) ** -1.25
        return model.gamma * S * c * (1 - env * math.cos(model.mu * t + 2.5 * math.atan(tau)))
    if isinstance(model, Thermal):
        return model.gamma * S * _mass_shell_energy(model, t, True, spec)
    if isinstance(model, Unparticle):
        return model.gamma * S * _unparticle_energy(model, t, True, spec)
    raise DomainError(f"unsupported noise model {type(model).__name__}")


def fit_growth_exponent(fn, times):
    """Least-squares slope of ``log fn(t)`` against ``log t``.

    Returns
    -------
    (exponent, stderr) : tuple of float
    """
    times = np.asarray(times, dtype=float)
    vals = np.array([fn(t) for t in times], dtype=float)
    if np.any(vals <= 0) or times.size < 3:
        raise DomainError("growth fit needs at least 3 positive samples")
    x, y = np.log(times), np.log(vals)
    A = np.vstack([x, np.ones_like(x)]).T
    coef, res, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    dof = max(x.size - 2, 1)
    s2 = float(resid @ resid) / dof
    se = math.sqrt(s2 / float(((x - x.mean()) ** 2).sum()))
    return float(coef[0]), se


# ---------------------------------------------------------------------------
# radiation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class SpectrumPoint:
    """Radiated power per unit photon energy at photon energy ``p``.

    ``log_dP_dp`` is the natural log of ``dP_dp`` and stays finite when the
    value underflows.  ``below_threshold`` marks ``p <= mu``.
    """

    p: float
    dP_dp: float
    log_dP_dp: float
    below_threshold: bool = False


def atomic_factor(p, a0=BOHR_RADIUS):
    """Hydrogen form factor ``2 [1 - 1/(1 + (p a0/2)^2)^2]``."""
    x = (np.asarray(p, dtype=float) * a0 / 2) ** 2
    # 1 - (1+x)^-2 = x (2 + x) / (1 + x)^2, exact near x = 0.
    return 2.0 * x * (2.0 + x) / (1.0 + x) ** 2


def suppression_exponent(p, mu, v_rms):
    """Boltzmann exponent ``3 (p - mu) / (mu v_rms^2)`` of the dilute occupation."""
    return 3.0 * (p - mu) / (mu * v_rms**2)


def gamma_spectrum(model, p, a0=BOHR_RADIUS, e2=FINE_STRUCTURE):
    """Gamma power per unit photon energy radiated by a hydrogen atom.

    ``dP/dp = atomic_factor(p) * gamma e^2 k^3 f(k) / (3 pi^2 p)`` with
    ``k = sqrt(p^2 - mu^2)``.  For :class:`Thermal` the occupation is the
    Bose factor of the photon energy.  For :class:`DiluteNR` it is
    ``exp(-(mu - zeta)/T) exp(-(p - mu)/T)``.

    Examples
    --------
    >>> m = Thermal(mu=1e-6, T=1e-7, zeta=0.0)
    >>> gamma_spectrum(m, 5e-7).below_threshold
    True
    """
    if not isinstance(model, (Thermal, DiluteNR)):
        raise DomainError("gamma spectrum is available for the thermal and dilute models only")
    p = float(p)
    if not p > model.mu:
        return SpectrumPoint(p, 0.0, -math.inf, True)
    k2 = (p - model.mu) * (p + model.mu)
    if isinstance(model, DiluteNR):
        log_f = model.log_chem - (p - model.mu) / model.T
    else:
        x = (p - model.zeta) / model.T
        log_f = -x - math.log(-math.expm1(-x))
    fac = float(atomic_factor(p, a0))
    if fac == 0.0:
        return SpectrumPoint(p, 0.0, -math.inf, False)
    log_val = (math.log(fac) + math.log(model.gamma * e2) + 1.5 * math.log(k2) + log_f
               - math.log(3 * math.pi**2 * p))
    return SpectrumPoint(p, math.exp(log_val), log_val, False)


def write_spectrum_csv(path, points):
    """Write spectrum points as CSV ``p,dP_dp,log_dP_dp``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["p", "dP_dp", "log_dP_dp"])
        for pt in points:
            w.writerow([repr(pt.p), repr(pt.dP_dp), repr(pt.log_dP_dp)])


# ---------------------------------------------------------------------------
# Markovian validity and master-equation kernel
# ---------------------------------------------------------------------------

def O_eval(k, p, s_minus_t, mass):
    """Free-particle time-shift factor of the energy integrand.

    ``k^2 cos(k.p tau/m) cos(k^2 tau/2m) - 2 p.k sin(k.p tau/m) sin(k^2 tau/2m)``
    with ``tau = s - t``; ``k`` and ``p`` are 3-vectors (last axis).

    Examples
    --------
    >>> float(O_eval([1.0, 2.0, 0.0], [0.3, 0.0, 0.1], 0.0, 1.0))
    5.0
    """
    k = np.asarray(k, dtype=float)
    p = np.asarray(p, dtype=float)
    k2 = np.sum(k * k, axis=-1)
    kp = np.sum(k * p, axis=-1)
    a = kp / mass * s_minus_t
    b = k2 / (2 * mass) * s_minus_t
    return k2 * np.cos(a) * np.cos(b) - 2 * kp * np.sin(a) * np.sin(b)


@dataclass(frozen=True)
class MarkovDiagnostic:
    """Ratio ``k_max / (2 m)`` (small means Markovian) and the ``O`` evaluator."""

    ratio: float
    k_max: float

    @staticmethod
    def O_eval(k, p, s_minus_t, mass):
        return O_eval(k, p, s_minus_t, mass)


def markov_diagnostic(model, particle_mass):
    """Markovian-validity ratio ``k_max^2/(2m) / k_max`` for a particle of mass ``m``.

    ``k_max`` is the inverse correlation length of the model.

    Raises
    ------
    DomainError
        For product correlators whose spectrum has no high-frequency cutoff.
    """
    model = _unwrap(model)
    if not particle_mass > 0:
        raise DomainError("particle mass must be positive")
    if isinstance(model, CutoffProduct) and not model.spectrum.bounded:
        raise DomainError("spectrum has no cutoff; the Markovian diagnostic is undefined")
    k_max = 1.0 / correlation_length(model)
    return MarkovDiagnostic(k_max / (2 * particle_mass), k_max)


def lindblad_kernel(model, m, k, t, spec=None):
    """Master-equation rate density ``2 m^2 gamma Fhat(k, t)``."""
    if np.any(np.asarray(k) < 0):
        raise DomainError("k must be non-negative")
    model = _unwrap(model)
    return 2 * m * m * model.gamma * fourier_Fhat(model, k, t, spec)
