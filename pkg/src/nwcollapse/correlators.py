"""Noise correlation kernels for the supported noise families.

For a classical Gaussian noise field with autocovariance ``D(x, t)`` the
dynamics only ever needs its time integrals

    F(x, t) = int_0^t D(x, s) ds,      I(x, t) = int_0^t F(x, s) ds,

and the spatial Fourier transform ``Fhat(k, t)`` of ``F``.  All kernels here
are per unit coupling: the coupling ``gamma`` carried by each model is
applied by the rate and observable modules.

Every function takes a separation ``r``, either a scalar or an array, and a
scalar time ``t``.  Isotropy is used throughout: angular averaging is done
analytically, which leaves one radial quadrature.  Units are natural
(hbar = c = k_B = 1) with energies in GeV.

Model families
--------------
``WhiteCSL``
    Gaussian in space, white in time (the standard CSL kernel).
``CutoffProduct``
    Gaussian in space times a frequency spectrum ``gamma0 * s(omega)``.
``Thermal``
    Relic thermal scalar of mass ``mu``, temperature ``T``, chemical
    potential ``zeta``.
``DiluteNR``
    Non-relativistic, Maxwellian limit of ``Thermal``.  It has closed forms.
``Unparticle``
    Scale-invariant thermal sector with scaling dimension ``d``.
"""

from __future__ import annotations

import csv
import math
import warnings
from dataclasses import dataclass, field, replace
from typing import Callable, Union

import numpy as np
from scipy import special

from .errors import (DistributionalKernelError, DivergentKernelError, DomainError,
                     NonConvergenceError)
from .quadrature import (QuadratureSpec, exponential_cutoff, integrate,
                         integrate_fourier)

__all__ = [
    "Spectrum", "WhiteCSL", "CutoffProduct", "Thermal", "DiluteNR", "Unparticle",
    "ShiftedModel", "NoiseModel", "DiluteValidityWarning",
    "gaussian_kernel", "corr_D", "corr_F", "corr_I", "corr_I_diff", "corr_F_diff",
    "corr_D_diff", "fourier_Fhat", "fourier_Ihat", "dilute_closed_forms",
    "unparticle_J", "unparticle_K", "unparticle_Fhat_raw", "unparticle_I_diff_raw",
    "default_spec", "correlation_length",
]

_TAIL = 1e-17


class DiluteValidityWarning(UserWarning):
    """The non-relativistic dilute expansion is used outside ``T/mu < 0.1``."""


def default_spec():
    """Quadrature settings used when callers pass none."""
    return QuadratureSpec(rel_tol=1e-9, abs_tol=1e-15, max_evals=2_000_000)


# ---------------------------------------------------------------------------
# model definitions
# ---------------------------------------------------------------------------

def _positive(name, value):
    if not (isinstance(value, (int, float, np.floating)) and value > 0 and math.isfinite(value)):
        raise DomainError(f"{name} must be a positive finite number, got {value!r}")


@dataclass(frozen=True)
class Spectrum:
    """Dimensionless frequency shape ``s(omega)`` of a product correlator.

    The time kernel is ``(1/pi) int_0^inf s(omega) cos(omega t) d omega``, so
    ``s = 1`` reproduces white noise, whose kernel is ``delta(t)``.

    Parameters
    ----------
    kind : {"constant", "step", "highpass", "table"}
    scale : float
        Overall factor ``s0``.
    omega_c : float
        Upper frequency of the ``step`` shape ``s0 * theta(omega_c - omega)``.
    omega_0 : float
        Infrared scale of ``highpass``: ``s0 * omega^2 / (omega^2 + omega_0^2)``.
    table_omega, table_value : tuple of float
        Nodes of the ``table`` shape.  It is linearly interpolated, and zero
        outside the nodes.
    """

    kind: str = "constant"
    scale: float = 1.0
    omega_c: float | None = None
    omega_0: float | None = None
    table_omega: tuple = ()
    table_value: tuple = ()

    def __post_init__(self):
        if self.kind not in ("constant", "step", "highpass", "table"):
            raise DomainError(f"unknown spectrum kind {self.kind!r}")
        if not self.scale >= 0:
            raise DomainError("spectrum scale must be non-negative")
        if self.kind == "step":
            _positive("omega_c", self.omega_c)
        if self.kind == "highpass":
            _positive("omega_0", self.omega_0)
        if self.kind == "table":
            w = np.asarray(self.table_omega, dtype=float)
            v = np.asarray(self.table_value, dtype=float)
            if w.ndim != 1 or w.size < 2 or w.shape != v.shape:
                raise DomainError("tabulated spectrum needs two equal-length columns (>= 2 rows)")
            if np.any(np.diff(w) <= 0) or w[0] < 0:
                raise DomainError("tabulated frequencies must be non-negative and increasing")
            if np.any(v < 0):
                raise DomainError("tabulated spectrum values must be non-negative")

    @classmethod
    def from_csv(cls, path, scale=1.0):
        """Read a two-column CSV ``omega [GeV], value`` (``#`` lines ignored)."""
        rows = []
        with open(path, newline="") as fh:
            for row in csv.reader(fh):
                if not row or row[0].lstrip().startswith("#"):
                    continue
                try:
                    rows.append((float(row[0]), float(row[1])))
                except (ValueError, IndexError):
                    if rows:
                        raise DomainError(f"malformed spectrum row {row!r} in {path}")
                    continue  # header line
        w, v = zip(*rows) if rows else ((), ())
        return cls(kind="table", scale=scale, table_omega=tuple(w), table_value=tuple(v))

    @property
    def bounded(self):
        """True when the spectrum has a finite high-frequency cutoff."""
        return self.kind in ("step", "table")

    def __call__(self, omega):
        omega = np.abs(np.asarray(omega, dtype=float))
        s0 = self.scale
        if self.kind == "constant":
            return np.full_like(omega, s0)
        if self.kind == "step":
            return np.where(omega < self.omega_c, s0, 0.0)
        if self.kind == "highpass":
            return s0 * omega**2 / (omega**2 + self.omega_0**2)
        return s0 * np.interp(omega, self.table_omega, self.table_value, left=0.0, right=0.0)

    @property
    def at_zero(self):
        return float(self(0.0))

    def _table_integral(self, weight, t, spec):
        w = np.asarray(self.table_omega)
        s = replace_period(spec, t)
        f = lambda om: self(om) * weight(om)
        r = integrate(f, 0.0, float(w[-1]), s, breakpoints=w)
        _check(r, "tabulated spectrum transform")
        return r.value / math.pi

    def kernel(self, t, spec=None):
        """``(1/pi) int s(omega) cos(omega t) d omega``, defined for ``t != 0``."""
        t = abs(float(t))
        s0 = self.scale
        if self.kind == "constant":
            raise DistributionalKernelError("a constant spectrum has a delta-function time kernel")
        if self.kind == "step":
            if t == 0.0:
                return s0 * self.omega_c / math.pi
            return s0 * math.sin(self.omega_c * t) / (math.pi * t)
        if self.kind == "highpass":
            if t == 0.0:
                raise DistributionalKernelError("the high-pass kernel contains delta(t)")
            return -0.5 * s0 * self.omega_0 * math.exp(-self.omega_0 * t)
        return self._table_integral(lambda om: np.cos(om * t), t, spec or default_spec())

    def first(self, t, spec=None):
        """``int_0^t kernel = (1/pi) int s(omega) sin(omega t)/omega d omega``."""
        s0 = self.scale
        if t == math.inf:
            return 0.5 * self.at_zero
        t = float(t)
        if t < 0:
            raise DomainError("t must be non-negative")
        if t == 0.0:
            return 0.0
        if self.kind == "constant":
            return 0.5 * s0
        if self.kind == "step":
            return s0 * float(special.sici(self.omega_c * t)[0]) / math.pi
        if self.kind == "highpass":
            return 0.5 * s0 * math.exp(-self.omega_0 * t)
        return self._table_integral(lambda om: t * np.sinc(om * t / math.pi), t,
                                    spec or default_spec())

    def second(self, t, spec=None):
        """``int_0^t first = (1/pi) int s(omega)(1 - cos omega t)/omega^2 d omega``."""
        s0 = self.scale
        if t == math.inf:
            if self.kind == "highpass":
                return 0.5 * s0 / self.omega_0
            if self.at_zero > 0:
                return math.inf
            if self.kind == "table":
                w0 = self.table_omega[0]
                if w0 == 0.0:
                    raise DivergentKernelError("tabulated spectrum integral diverges at omega = 0")
                r = integrate(lambda om: self(om) / om**2, float(w0), float(self.table_omega[-1]),
                              spec or default_spec(), breakpoints=self.table_omega)
                return r.value / math.pi
            return 0.0
        t = float(t)
        if t < 0:
            raise DomainError("t must be non-negative")
        if t == 0.0:
            return 0.0
        if self.kind == "constant":
            return 0.5 * s0 * t
        if self.kind == "step":
            x = self.omega_c * t
            si = float(special.sici(x)[0])
            return s0 * t / math.pi * (si - 2.0 * math.sin(0.5 * x) ** 2 / x)
        if self.kind == "highpass":
            w0 = self.omega_0
            return 0.5 * s0 * -math.expm1(-w0 * t) / w0
        return self._table_integral(lambda om: 0.5 * t * t * np.sinc(om * t / (2 * math.pi)) ** 2,
                                    t, spec or default_spec())


def replace_period(spec, t):
    """Copy of ``spec`` with panels aligned to the half periods of ``cos(omega t)``."""
    return replace(spec, oscillation_period=(2 * math.pi / t) if t > 0 else None, upper=None)


@dataclass(frozen=True)
class WhiteCSL:
    """White-in-time Gaussian noise (CSL).

    Parameters
    ----------
    gamma : float
        Coupling in GeV^-4 (``gamma * m_N^2`` is the CSL rate parameter).
    r_C : float
        Correlation length in GeV^-1.
    """

    gamma: float
    r_C: float

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("r_C", self.r_C)

    @classmethod
    def from_csl(cls, gamma_csl, r_C, nucleon_mass=0.938):
        """Build from ``gamma_CSL = gamma * m_N^2`` (GeV^-2) and ``r_C``."""
        return cls(gamma=gamma_csl / nucleon_mass**2, r_C=r_C)


@dataclass(frozen=True)
class CutoffProduct:
    """Gaussian spatial kernel times a frequency spectrum.

    The spectral function is ``gamma * s(omega)``, with ``gamma`` the full
    coupling and ``s`` the dimensionless :class:`Spectrum` shape.
    """

    gamma: float
    r_C: float
    spectrum: Spectrum = field(default_factory=Spectrum)

    def __post_init__(self):
        _positive("gamma", self.gamma)
        _positive("r_C", self.r_C)


def _check_mu_T_zeta(mu, T, zeta):
    _positive("mu", mu)
    _positive("T", T)
    if not math.isfinite(zeta) or not zeta < mu:
        raise DomainError("chemical potential must satisfy zeta < mu "
                          "(the occupation number would have a pole otherwise)")


@dataclass(frozen=True)
class Thermal:
    """Thermal relic scalar noise with Bose occupation and mass-shell energies.

    Parameters
    ----------
    mu : float
        Field mass (GeV).
    T : float
        Temperature (GeV).
    zeta : float
        Chemical potential (GeV), ``zeta < mu``.
    gamma : float
        Coupling (GeV^-2).
    """

    mu: float
    T: float
    zeta: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        _check_mu_T_zeta(self.mu, self.T, self.zeta)
        _positive("gamma", self.gamma)

    @property
    def log_chem(self):
        """``-(mu - zeta)/T``: log of the chemical/Boltzmann suppression factor."""
        return -(self.mu - self.zeta) / self.T

    @classmethod
    def from_chem(cls, mu, T, chem, gamma=1.0):
        """Build from the suppression factor ``exp(-(mu - zeta)/T)``."""
        return cls(mu=mu, T=T, zeta=mu + T * math.log(chem), gamma=gamma)

    def occupation(self, k):
        """Bose occupation ``N(k)`` at momentum ``k``."""
        k = np.asarray(k, dtype=float)
        omega = np.sqrt(k * k + self.mu**2)
        x = k * k / (omega + self.mu) / self.T
        return 1.0 / np.expm1(x - self.log_chem)


@dataclass(frozen=True)
class DiluteNR:
    """Non-relativistic dilute limit of :class:`Thermal`.

    The occupation is Maxwellian, ``exp(-(mu - zeta)/T) exp(-k^2/(2 mu T))``.
    Energies are expanded to ``mu + k^2/(2 mu)`` in phases and to ``mu`` in
    prefactors.  A :class:`DiluteValidityWarning` is issued unless
    ``T/mu < 0.1``.
    """

    mu: float
    T: float
    zeta: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        _check_mu_T_zeta(self.mu, self.T, self.zeta)
        _positive("gamma", self.gamma)
        if not self.T / self.mu < 0.1:
            warnings.warn(f"dilute non-relativistic expansion used at T/mu = {self.T / self.mu:.3g}",
                          DiluteValidityWarning, stacklevel=3)

    log_chem = Thermal.log_chem

    @property
    def chem(self):
        return math.exp(self.log_chem)

    @classmethod
    def from_chem(cls, mu, T, chem, gamma=1.0):
        return cls(mu=mu, T=T, zeta=mu + T * math.log(chem), gamma=gamma)

    def occupation(self, k):
        k = np.asarray(k, dtype=float)
        return np.exp(self.log_chem - k * k / (2 * self.mu * self.T))


@dataclass(frozen=True)
class Unparticle:
    """Thermal unparticle noise: a continuum of masses weighted by ``(mu^2)^(d-2)``.

    Parameters
    ----------
    d : float
        Scaling dimension, ``d > 0``.
    Lambda : float
        Scale of the effective theory (GeV).  It enters only through
        ``Lambda^(2(1-d))``.
    T : float
        Temperature (GeV).
    zeta : float
        Chemical potential, ``zeta <= 0``.
    gamma : float
        Coupling.
    """

    d: float
    Lambda: float
    T: float
    zeta: float = 0.0
    gamma: float = 1.0

    def __post_init__(self):
        _positive("d", self.d)
        _positive("Lambda", self.Lambda)
        _positive("T", self.T)
        _positive("gamma", self.gamma)
        if not self.zeta <= 0:
            raise DomainError("unparticle chemical potential must be <= 0 "
                              "(zeta > 0 is a pole in the physical region)")

    @property
    def coupling_scale(self):
        return self.Lambda ** (2.0 * (1.0 - self.d))

    def occupation_energy(self, omega):
        return 1.0 / np.expm1((np.asarray(omega, dtype=float) - self.zeta) / self.T)


@dataclass(frozen=True)
class ShiftedModel:
    """Wrap a model and add a spatially uniform ``xi(t)`` to its ``F`` kernel.

    ``xi_integral(t)`` must return ``int_0^t xi``.  It is added to ``I``.
    Uniform shifts never change observable rates; the wrapper exists to check
    that property.
    """

    base: object
    xi: Callable[[float], float]
    xi_integral: Callable[[float], float]

    @property
    def gamma(self):
        return self.base.gamma


NoiseModel = Union[WhiteCSL, CutoffProduct, Thermal, DiluteNR, Unparticle, ShiftedModel]


def correlation_length(model):
    """Spatial scale beyond which the kernel has decorrelated.

    This is ``r_C`` for the Gaussian families, ``1/sqrt(2 mu T)`` for the
    thermal and dilute families (the equivalent CSL length), and ``1/T`` for
    unparticles.
    """
    if isinstance(model, ShiftedModel):
        return correlation_length(model.base)
    if isinstance(model, (WhiteCSL, CutoffProduct)):
        return model.r_C
    if isinstance(model, (Thermal, DiluteNR)):
        return 1.0 / math.sqrt(2.0 * model.mu * model.T)
    if isinstance(model, Unparticle):
        return 1.0 / model.T
    raise DomainError(f"unsupported noise model {type(model).__name__}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------

def _check(res, what):
    if not res.converged:
        raise NonConvergenceError(
            f"{what}: quadrature did not converge (value={res.value!r}, "
            f"error estimate={res.error_estimate!r}, evals={res.evals})")


def _as_r(r):
    scalar = np.ndim(r) == 0
    arr = np.abs(np.atleast_1d(np.asarray(r, dtype=float)))
    if arr.ndim != 1:
        arr = arr.ravel()
    return arr, scalar


def _out(values, scalar):
    values = np.asarray(values, dtype=float)
    return float(values[0]) if scalar else values


def _check_t(t):
    t = float(t)
    if t < 0 or math.isnan(t):
        raise DomainError("time must be non-negative")
    return t


def gaussian_kernel(r, r_C):
    """Normalized Gaussian ``(4 pi r_C^2)^(-3/2) exp(-r^2 / (4 r_C^2))``."""
    r = np.asarray(r, dtype=float)
    return (4 * math.pi * r_C**2) ** -1.5 * np.exp(-r * r / (4 * r_C**2))


def _sinc(x):
    """``sin(x)/x``."""
    return np.sinc(x / math.pi)


def _one_minus_sinc(x):
    """``1 - sin(x)/x``, accurate for small ``x``."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 1e-2
    xs = np.where(small, x, 0.0)
    x2 = xs * xs
    series = x2 / 6.0 * (1.0 - x2 / 20.0 * (1.0 - x2 / 42.0))
    with np.errstate(invalid="ignore", divide="ignore"):
        direct = 1.0 - np.sin(x) / np.where(small, 1.0, x)
    return np.where(small, series, direct)


# ---------------------------------------------------------------------------
# thermal / dilute quadrature
# ---------------------------------------------------------------------------

_WEIGHTS = {
    # kind -> (weights as function of phase mu*t, stable full weight of the phase)
    "D": (lambda c, s: (0.0, c, -s), np.cos),
    "F": (lambda c, s: (0.0, s, c), np.sin),
    "I": (lambda c, s: (1.0, -c, s), lambda ph: 2.0 * np.sin(0.5 * ph) ** 2),
}


def _mass_shell_integral(model, r, t, kind, diff, spec):
    """Radial quadrature for Thermal and DiluteNR kernels.

    The integration variable is the kinetic energy in units of ``T``,
    ``x = (omega - mu)/T``.  In that variable the time dependence is
    ``exp(i (mu t + T t x))``: a fixed phase times a Fourier factor.
    """
    mu, T = model.mu, model.T
    p = {"D": 0, "F": 1, "I": 2}[kind]
    dilute = isinstance(model, DiluteNR)
    if dilute:
        kT = math.sqrt(2.0 * mu * T)
        chem = math.exp(model.log_chem)
        pref = chem * mu * T * kT / (2 * math.pi**2) / mu ** (p + 1)
    else:
        kT = math.sqrt(T * (T + 2.0 * mu))
        wT = mu + T
        chem = math.exp(model.log_chem)
        pref = chem * T * kT / wT**p / (2 * math.pi**2)

    scale_r = np.minimum(1.0, (kT * r) ** 2) if diff else np.ones_like(r)
    scale_r = np.where(scale_r > 0, scale_r, 1.0)

    def spatial(k):
        kr = np.outer(r, k)
        return (_one_minus_sinc(kr) if diff else _sinc(kr)) / scale_r[:, None]

    if dilute:
        def g(x):
            k = kT * np.sqrt(x)
            return spatial(k) * (np.sqrt(x) * np.exp(-x))
        xmax = exponential_cutoff(1.5, _TAIL) + 5.0
    else:
        def g(x):
            s = T * x
            k = np.sqrt(s * (s + 2.0 * mu))
            omega = mu + s
            amp = (k / kT) * (wT / omega) ** p / (np.exp(x) - chem)
            return spatial(k) * amp
        xmax = exponential_cutoff(2.0, _TAIL) + 5.0

    if t == math.inf:
        if kind != "I":
            return np.zeros_like(r)
        weights, weight, tau = (1.0, 0.0, 0.0), None, 0.0
    else:
        tau = T * t
        phase0 = mu * t
        wfun, stable = _WEIGHTS[kind]
        weights = wfun(math.cos(phase0), math.sin(phase0))
        weight = lambda x: stable(phase0 + tau * x)
    s = replace(spec, singular_lower=True)
    res = integrate_fourier(g, tau, weights, 0.0, xmax, s, weight=weight)
    _check(res, f"{type(model).__name__} {kind} kernel")
    return pref * np.asarray(res.value) * scale_r


# ---------------------------------------------------------------------------
# unparticle
# ---------------------------------------------------------------------------

def unparticle_J(a, d):
    """``int_0^1 cos(v a) (1 - v^2)^(d-1) dv`` via the Bessel closed form."""
    a = np.abs(np.asarray(a, dtype=float))
    nu = d - 0.5
    j0 = 0.5 * special.beta(0.5, d)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        big = 0.5 * math.sqrt(math.pi) * special.gamma(d) * (2.0 / a) ** nu * special.jv(nu, a)
    return np.where(a < 1e-8, j0, big)


def unparticle_K(a, d):
    """``int_0^1 [1 - cos(v a)] (1 - v^2)^(d-1) dv``, accurate for small ``a``."""
    a = np.abs(np.asarray(a, dtype=float))
    small = a < 1.0
    asm = np.where(small, a, 0.0)
    series = np.zeros_like(asm)
    term_pow = np.ones_like(asm)
    for n in range(1, 14):
        term_pow = term_pow * asm * asm / ((2 * n - 1) * (2 * n))
        series += (-1) ** (n + 1) * term_pow * 0.5 * special.beta(n + 0.5, d)
    direct = 0.5 * special.beta(0.5, d) - unparticle_J(np.where(small, 1.0, a), d)
    return np.where(small, series, direct)


def _unparticle_checks(model, kind, diff, t):
    d, zeta = model.d, model.zeta
    if t == math.inf and kind == "I":
        if diff:
            if zeta == 0.0 and d <= 0.5:
                return "inf"
        else:
            if (zeta < 0 and d <= 1.0) or (zeta == 0 and d <= 1.5):
                raise DivergentKernelError("I(r, t=inf) diverges for these unparticle parameters")
        return None
    if t == math.inf:
        if zeta == 0.0 and d <= 0.5 and not diff:
            raise DivergentKernelError("unparticle kernel diverges for zeta = 0, d <= 1/2")
        return "zero"
    if not diff and zeta == 0.0 and d <= 0.5 and not (kind != "D" and t == 0.0):
        raise DivergentKernelError(
            "undifferenced unparticle kernels diverge at omega -> 0 for zeta = 0 and d <= 1/2; "
            "use the differenced kernels")
    return None


def _unparticle_integral(model, r, t, kind, diff, spec):
    d, T = model.d, model.T
    y0 = -model.zeta / T
    p = {"D": 1, "F": 2, "I": 3}[kind]
    special_case = _unparticle_checks(model, kind, diff, t)
    if special_case == "inf":
        return np.where(r > 0, math.inf, 0.0)
    if special_case == "zero":
        return np.zeros_like(r)
    pref = 0.5 * model.coupling_scale * T ** (2 * d - p + 1) / math.pi**2
    scale_r = np.minimum(1.0, (T * r) ** 2) if diff else np.ones_like(r)
    scale_r = np.where(scale_r > 0, scale_r, 1.0)

    def g(x):
        a = np.outer(r, T * x)
        sp = unparticle_K(a, d) if diff else unparticle_J(a, d)
        return sp / scale_r[:, None] * (x ** (2 * d - p) / np.expm1(x + y0))

    xmax = exponential_cutoff(2 * d + 1, _TAIL) + 5.0
    if t == math.inf:
        weights, weight, tau = (1.0, 0.0, 0.0), None, 0.0
    else:
        tau = T * t
        weights = {"D": (0.0, 1.0, 0.0), "F": (0.0, 0.0, 1.0), "I": (1.0, -1.0, 0.0)}[kind]
        stable = _WEIGHTS[kind][1]
        weight = lambda x: stable(tau * x)
    s = replace(spec, singular_lower=True)
    res = integrate_fourier(g, tau, weights, 0.0, xmax, s, weight=weight)
    _check(res, f"unparticle {kind} kernel")
    return pref * np.asarray(res.value) * scale_r


def unparticle_I_diff_raw(model, r, t, spec=None):
    """``I(0,t) - I(r,t)`` evaluated from the uncontinued double integral.

    Uses the ``k``-space form ``2(d-1) Lambda^{2(1-d)} int d^3k/(2pi)^3
    [1 - cos(k.x)] int_k^inf dw (w^2-k^2)^{d-2} n(w) [1-cos(w t)]/w^2``.  It
    converges only for ``d > 1`` and serves as an independent check of the
    continued form.
    """
    if not model.d > 1:
        raise DivergentKernelError("the uncontinued unparticle integral needs d > 1")
    spec = spec or default_spec()
    r_arr, scalar = _as_r(r)
    d, T = model.d, model.T
    xmax = exponential_cutoff(2 * d + 1, _TAIL) + 5.0
    tau = T * t

    def inner(kx):
        # int_k^inf dw (w^2-k^2)^{d-2} n(w) (1-cos wt)/w^2 with w^2 = k^2 + u^2 (units of T)
        def f(u):
            w = np.sqrt(kx * kx + u * u)
            wt = 2.0 * np.sin(0.5 * tau * w) ** 2 if math.isfinite(tau) else 1.0
            return u ** (2 * d - 3) * model.occupation_energy(T * w) * wt / w**3
        res = integrate(f, 0.0, xmax, _with(spec, singular_lower=True))
        _check(res, "unparticle inner integral")
        return res.value

    def outer(kx):
        vals = np.array([inner(k) for k in kx])
        return (_one_minus_sinc(np.outer(r_arr * T, kx))) * (kx * kx * vals)

    res = integrate(outer, 0.0, xmax, _with(spec, singular_lower=False, rel_tol=max(spec.rel_tol, 1e-9)))
    _check(res, "unparticle outer integral")
    pref = 2 * (d - 1) * model.coupling_scale * T ** (2 * d - 3) / (2 * math.pi**2)
    return _out(pref * np.asarray(res.value), scalar)


def _with(spec, **kw):
    return replace(spec, **kw)


def _unparticle_Fhat(model, k, t, spec):
    """Fhat via ``-Lambda^{2(1-d)} int_k^inf (w^2-k^2)^{d-1} dH/dw dw``.

    Here ``H = n(w) sin(w t)/w^2``.  This is the integration-by-parts
    continuation of the spectral representation, valid for all ``d > 0``
    when ``k > 0``.
    """
    d, T = model.d, model.T
    y0 = -model.zeta / T
    if t == 0.0:
        return 0.0
    if k == 0.0:
        if (model.zeta < 0 and d <= 1.5) or (model.zeta == 0 and d <= 2.0):
            raise DivergentKernelError(
                "unparticle Fhat(k=0) diverges (needs d > 3/2 for zeta < 0, d > 2 for zeta = 0)")
    kx = k / T
    tau = T * t
    xmax = exponential_cutoff(2 * d + 1, _TAIL) + 5.0

    def f(u):
        w = np.sqrt(kx * kx + u * u)
        n = 1.0 / np.expm1(w + y0)
        dn = -n * (1.0 + n)
        sn, cs = np.sin(tau * w), np.cos(tau * w)
        dH = (dn * sn + n * tau * cs) / w**2 - 2.0 * n * sn / w**3
        return u ** (2 * d - 1) * dH / w

    upper = max(xmax, 2 * kx)
    s = _with(spec, singular_lower=True,
              oscillation_period=(2 * math.pi / tau) if tau > 0 else None)
    res = integrate(f, 0.0, upper, s)
    _check(res, "unparticle Fhat")
    return -model.coupling_scale * T ** (2 * d - 3) * float(res.value)


def unparticle_Fhat_raw(model, k, t, spec=None):
    """Fhat from the uncontinued spectral integral (valid for ``d > 1``)."""
    if not model.d > 1:
        raise DivergentKernelError("the uncontinued spectral integral needs d > 1")
    spec = spec or default_spec()
    d, T = model.d, model.T
    kx, tau = k / T, T * t
    xmax = exponential_cutoff(2 * d + 1, _TAIL) + 5.0

    def f(u):
        w = np.sqrt(kx * kx + u * u)
        return u ** (2 * d - 3) * model.occupation_energy(T * w) * np.sin(tau * w) / w**2

    s = _with(spec, singular_lower=True,
              oscillation_period=(2 * math.pi / tau) if tau > 0 else None)
    res = integrate(f, 0.0, max(xmax, 2 * kx), s)
    _check(res, "raw unparticle Fhat")
    return 2 * (d - 1) * model.coupling_scale * T ** (2 * d - 3) * float(res.value)


# ---------------------------------------------------------------------------
# public kernels
# ---------------------------------------------------------------------------

def _dispatch(model, r, t, kind, diff, spec):
    spec = spec or default_spec()
    r_arr, scalar = _as_r(r)
    if isinstance(model, ShiftedModel):
        base = _dispatch(model.base, r_arr, t, kind, diff, spec)
        if diff:
            return _out(base, scalar)
        shift = {"F": model.xi, "I": model.xi_integral}.get(kind)
        if shift is None:
            raise DomainError("ShiftedModel only shifts F and I")
        return _out(base + shift(t), scalar)
    if isinstance(model, WhiteCSL):
        if kind == "D":
            raise DistributionalKernelError(
                "white noise has D proportional to delta(t); use corr_F or corr_I")
        G = gaussian_kernel(r_arr, model.r_C)
        G0 = gaussian_kernel(0.0, model.r_C)
        base = (G0 - G) if diff else G
        if kind == "F":
            vals = 0.5 * base
        else:
            vals = np.where(base == 0, 0.0, 0.5 * base * t) if t == math.inf else 0.5 * base * t
        return _out(vals, scalar)
    if isinstance(model, CutoffProduct):
        G = gaussian_kernel(r_arr, model.r_C)
        G0 = gaussian_kernel(0.0, model.r_C)
        base = (G0 - G) if diff else G
        sp = model.spectrum
        if kind == "D":
            if t == math.inf:
                return _out(np.zeros_like(r_arr), scalar)
            tf = sp.kernel(t, spec)
        elif kind == "F":
            tf = sp.first(t, spec)
        else:
            tf = sp.second(t, spec)
        with np.errstate(invalid="ignore"):
            vals = np.where(base == 0, 0.0, base * tf)
        return _out(vals, scalar)
    if isinstance(model, (Thermal, DiluteNR)):
        return _out(_mass_shell_integral(model, r_arr, t, kind, diff, spec), scalar)
    if isinstance(model, Unparticle):
        return _out(_unparticle_integral(model, r_arr, t, kind, diff, spec), scalar)
    raise DomainError(f"unsupported noise model {type(model).__name__}")


def corr_D(model, r, t, spec=None):
    """Noise autocovariance ``D(r, t)`` (even in ``r`` and ``t``).

    Raises
    ------
    DistributionalKernelError
        For white noise, where ``D`` is proportional to ``delta(t)``.
    """
    t = float(t)
    return _dispatch(model, r, abs(t), "D", False, spec)


def corr_F(model, r, t, spec=None):
    """``F(r, t) = int_0^t D(r, s) ds`` for ``t >= 0`` (``t = inf`` allowed)."""
    return _dispatch(model, r, _check_t(t), "F", False, spec)


def corr_I(model, r, t, spec=None):
    """``I(r, t) = int_0^t F(r, s) ds``."""
    return _dispatch(model, r, _check_t(t), "I", False, spec)


def corr_I_diff(model, r, t, spec=None):
    """``I(0, t) - I(r, t)``: the combination that enters all rates.

    Examples
    --------
    >>> m = WhiteCSL(gamma=1.0, r_C=1.0)
    >>> corr_I_diff(m, 0.0, 3.0)
    0.0
    """
    return _dispatch(model, r, _check_t(t), "I", True, spec)


def corr_F_diff(model, r, t, spec=None):
    """``F(0, t) - F(r, t)``."""
    return _dispatch(model, r, _check_t(t), "F", True, spec)


def corr_D_diff(model, r, t, spec=None):
    """``D(0, t) - D(r, t)``."""
    return _dispatch(model, r, abs(float(t)), "D", True, spec)


def fourier_Fhat(model, k, t, spec=None):
    """Spatial Fourier transform ``Fhat(k, t)`` of ``F`` (isotropic, even in ``k``).

    Accepts scalar or array ``k``.  Unparticle values are computed one
    momentum at a time.
    """
    t = _check_t(t)
    k_arr, scalar = _as_r(k)
    if isinstance(model, ShiftedModel):
        raise DomainError("a uniform shift is a delta function in k; not representable")
    if isinstance(model, WhiteCSL):
        vals = 0.5 * np.exp(-(k_arr * model.r_C) ** 2)
    elif isinstance(model, CutoffProduct):
        vals = np.exp(-(k_arr * model.r_C) ** 2) * model.spectrum.first(t, spec)
    elif isinstance(model, Thermal):
        if t == math.inf:
            vals = np.zeros_like(k_arr)
        else:
            omega = np.sqrt(k_arr**2 + model.mu**2)
            vals = model.occupation(k_arr) / omega**2 * np.sin(omega * t)
    elif isinstance(model, DiluteNR):
        if t == math.inf:
            vals = np.zeros_like(k_arr)
        else:
            phase = model.mu * t + k_arr**2 / (2 * model.mu) * t
            vals = model.occupation(k_arr) / model.mu**2 * np.sin(phase)
    elif isinstance(model, Unparticle):
        if t == math.inf:
            vals = np.zeros_like(k_arr)
        else:
            sp = spec or default_spec()
            vals = np.array([_unparticle_Fhat(model, float(k), t, sp) for k in k_arr])
    else:
        raise DomainError(f"unsupported noise model {type(model).__name__}")
    return _out(vals, scalar)


def fourier_Ihat(model, k, t, spec=None):
    """``int_0^t Fhat(k, s) ds``, the Fourier transform of ``I``.

    Supported for the white, product, thermal and dilute families.
    """
    t = _check_t(t)
    k_arr, scalar = _as_r(k)
    if isinstance(model, WhiteCSL):
        vals = 0.5 * np.exp(-(k_arr * model.r_C) ** 2) * t
    elif isinstance(model, CutoffProduct):
        vals = np.exp(-(k_arr * model.r_C) ** 2) * model.spectrum.second(t, spec)
    elif isinstance(model, Thermal):
        omega = np.sqrt(k_arr**2 + model.mu**2)
        w = 1.0 if t == math.inf else 2.0 * np.sin(0.5 * omega * t) ** 2
        vals = model.occupation(k_arr) / omega**3 * w
    elif isinstance(model, DiluteNR):
        phase = model.mu * t + k_arr**2 / (2 * model.mu) * t
        w = 1.0 if t == math.inf else 2.0 * np.sin(0.5 * phase) ** 2
        vals = model.occupation(k_arr) / model.mu**3 * w
    else:
        raise DomainError(f"fourier_Ihat not available for {type(model).__name__}")
    return _out(vals, scalar)


def dilute_closed_forms(model, r, t):
    """Closed-form subtracted kernels of the dilute model.

    Returns
    -------
    (Ddiff, Fdiff, Idiff) : tuple
        ``X(0, t) - X(r, t)`` for ``X`` = ``D``, ``F``, ``I``, obtained from
        the complex Gaussian integral over momenta.  Scalars or arrays follow
        the shape of ``r``.  ``t = inf`` is allowed: ``D`` and ``F`` vanish.
    """
    if not isinstance(model, DiluteNR):
        raise TypeError("dilute_closed_forms requires a DiluteNR model")
    r_arr, scalar = _as_r(r)
    mu, T = model.mu, model.T
    chem = math.exp(model.log_chem)
    base = (mu * T / (2 * math.pi)) ** 1.5
    A = mu * T * r_arr**2 / 2.0
    if t == math.inf:
        idiff = chem / mu**3 * base * -np.expm1(-A)
        zeros = np.zeros_like(r_arr)
        return _out(zeros, scalar), _out(zeros, scalar), _out(idiff, scalar)
    t = _check_t(t)
    tau = t * T
    q = 1.0 + tau * tau
    env = q ** -0.75
    phi0 = mu * t + 1.5 * math.atan(tau)
    phi = phi0 - A * tau / q
    gauss = np.exp(-A / q)
    dcos = math.cos(phi0) - gauss * np.cos(phi)
    dsin = math.sin(phi0) - gauss * np.sin(phi)
    Ddiff = chem / mu * base * env * dcos
    Fdiff = chem / mu**2 * base * env * dsin
    Idiff = chem / mu**3 * base * (-np.expm1(-A) - env * dcos)
    return _out(Ddiff, scalar), _out(Fdiff, scalar), _out(Idiff, scalar)
