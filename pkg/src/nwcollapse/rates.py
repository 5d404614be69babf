"""Reduction and diagonalization rates for localized superpositions.

A branch of a superposition is a :class:`ParticleGroup`: point-like
particles with positions ``r_i`` and couplings ``m_i``.  For two branches the
integrated rate is

    Gamma(t) = gamma * sum_ij m_i m_j [I(r1_i - r1_j) + I(r2_i - r2_j)
                                       - I(r1_i - r2_j) - I(r2_i - r1_j)].

Writing ``I(r) = I(0) - Idiff(r)`` removes the ``I(0)`` terms exactly, so only
the subtracted kernel :func:`~nwcollapse.correlators.corr_I_diff` is needed.
Uniform shifts of the noise kernel therefore drop out.  The same rate
controls the decay of the off-diagonal density-matrix element and bounds the
reduction of ``E[p1 p2]``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .correlators import (DiluteNR, Thermal, corr_F_diff, corr_I, corr_I_diff,
                          correlation_length, fourier_Ihat, gaussian_kernel)
from .errors import ConfigError, DivergentKernelError, DomainError
from .quadrature import QuadratureSpec, integrate_semi_infinite
from .units import NUCLEON_MASS_GEV

__all__ = [
    "ParticleGroup", "SuperpositionConfig", "RateResult", "Bounds",
    "gamma_pair", "gamma_pair_fourier", "gamma_LM", "gamma_matrix", "offdiag_decay",
    "reduction_bounds", "corner_estimates", "rate_integrand_positive", "bounds_for",
    "csl_matching", "CSLMatch", "pair_distances",
]


@dataclass(frozen=True, eq=False)
class ParticleGroup:
    """Point particles of one branch.

    Parameters
    ----------
    positions : array_like, shape (n, 3)
        Particle positions (GeV^-1).
    couplings : array_like, shape (n,)
        Couplings ``m_i`` (GeV); positive.
    """

    positions: np.ndarray
    couplings: np.ndarray

    def __post_init__(self):
        pos = np.atleast_2d(np.asarray(self.positions, dtype=float))
        m = np.atleast_1d(np.asarray(self.couplings, dtype=float))
        if pos.ndim != 2 or pos.shape[1] != 3:
            raise ConfigError("positions must have shape (n, 3)")
        if m.shape != (pos.shape[0],):
            raise ConfigError("need exactly one coupling per particle")
        if np.any(~np.isfinite(pos)) or np.any(~(m > 0)):
            raise ConfigError("positions must be finite and couplings positive")
        pos.setflags(write=False)
        m.setflags(write=False)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "couplings", m)

    @classmethod
    def single(cls, position, coupling):
        """One particle at ``position`` (3-vector or scalar x-coordinate)."""
        p = np.zeros(3)
        p[:] = position if np.ndim(position) else (float(position), 0.0, 0.0)
        return cls(p[None, :], [coupling])

    def displaced(self, shift):
        """Rigidly translated copy."""
        return ParticleGroup(self.positions + np.asarray(shift, dtype=float), self.couplings)

    def __len__(self):
        return self.couplings.size

    def __eq__(self, other):
        return (isinstance(other, ParticleGroup)
                and np.array_equal(self.positions, other.positions)
                and np.array_equal(self.couplings, other.couplings))

    __hash__ = None


@dataclass(frozen=True)
class SuperpositionConfig:
    """Branches of a localized superposition and their probabilities ``p_J``."""

    groups: tuple
    amplitudes: tuple

    def __post_init__(self):
        groups = tuple(self.groups)
        amps = tuple(float(a) for a in self.amplitudes)
        if len(groups) < 1 or len(groups) != len(amps):
            raise ConfigError("need one probability per branch")
        if any(a < 0 for a in amps) or abs(math.fsum(amps) - 1.0) > 1e-12:
            raise ConfigError("branch probabilities must be non-negative and sum to 1")
        m0 = groups[0].couplings
        for g in groups[1:]:
            if not np.array_equal(g.couplings, m0):
                raise ConfigError("all branches must have the same particles and couplings")
        object.__setattr__(self, "groups", groups)
        object.__setattr__(self, "amplitudes", amps)

    @property
    def n_branches(self):
        return len(self.groups)

    @property
    def probabilities(self):
        return np.array(self.amplitudes)


@dataclass(frozen=True)
class RateResult:
    """Integrated rate ``Gamma(t)`` (dimensionless) and optional per-pair terms."""

    gamma: float
    t: float
    breakdown: np.ndarray | None = field(default=None, compare=False)

    def __float__(self):
        return float(self.gamma)


class Bounds(NamedTuple):
    lower: float
    upper: float


class CSLMatch(NamedTuple):
    r_C: float
    rate_product: float


def pair_distances(a, b):
    """Matrix of Euclidean distances ``|a_i - b_j|``."""
    diff = a[:, None, :] - b[None, :, :]
    return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))


def _check_pair(g1, g2):
    if not np.array_equal(g1.couplings, g2.couplings):
        raise ConfigError("branches must share particles and couplings")


def _kernel_on_distances(kernel, model, dist_blocks, t, spec, far_field):
    """Evaluate a subtracted kernel on several distance matrices in one call."""
    flat = np.concatenate([d.ravel() for d in dist_blocks])
    uniq, inv = np.unique(flat, return_inverse=True)
    vals = np.empty_like(uniq)
    near = np.ones(uniq.shape, dtype=bool)
    if far_field is not None:
        cut = far_field * correlation_length(model)
        near = uniq <= cut
        if np.any(~near):
            try:
                vals[~near] = _asymptote(kernel, model, t, spec)
            except DivergentKernelError:
                near[:] = True
    if np.any(near):
        vals[near] = np.atleast_1d(kernel(model, uniq[near], t, spec))
    out = vals[inv]
    blocks = []
    start = 0
    for d in dist_blocks:
        blocks.append(out[start:start + d.size].reshape(d.shape))
        start += d.size
    return blocks


def _asymptote(kernel, model, t, spec):
    """Large-separation value of ``X(0) - X(r)``, which is ``X(0)``."""
    if kernel is corr_I_diff:
        return corr_I(model, 0.0, t, spec)
    from .correlators import corr_F
    return corr_F(model, 0.0, t, spec)


def _structure(kernel, model, g1, g2, t, spec, far_field):
    _check_pair(g1, g2)
    p1, p2 = g1.positions, g2.positions
    d11, d22, d12 = pair_distances(p1, p1), pair_distances(p2, p2), pair_distances(p1, p2)
    k11, k22, k12 = _kernel_on_distances(kernel, model, [d11, d22, d12], t, spec, far_field)
    m = g1.couplings
    # I(r) = I(0) - Idiff(r); the I(0) terms cancel between the four blocks.
    combo = -k11 - k22 + k12 + k12.T
    terms = m[:, None] * m[None, :] * combo
    return terms


def gamma_pair(model, g1, g2, t, spec=None, far_field=None, breakdown=False):
    """Integrated reduction/diagonalization rate between two branches.

    Parameters
    ----------
    model : NoiseModel
    g1, g2 : ParticleGroup
        Branch geometries with identical couplings.
    t : float
        Elapsed time (``inf`` allowed where the kernel converges).
    far_field : float, optional
        Treat separations beyond ``far_field`` correlation lengths as
        infinite.  20 is a safe choice.
    breakdown : bool
        Attach the per-pair contribution matrix.

    Returns
    -------
    RateResult

    Examples
    --------
    >>> from nwcollapse.correlators import WhiteCSL
    >>> m = WhiteCSL(gamma=1.0, r_C=1.0)
    >>> g = ParticleGroup.single(0.0, 1.0)
    >>> gamma_pair(m, g, g, 5.0).gamma
    0.0
    """
    if t < 0:
        raise DomainError("t must be non-negative")
    terms = _structure(corr_I_diff, model, g1, g2, t, spec, far_field)
    with np.errstate(invalid="ignore"):
        value = model.gamma * float(np.sum(terms))
    if math.isnan(value):
        value = math.inf
    return RateResult(value, float(t), terms * model.gamma if breakdown else None)


def gamma_pair_fourier(model, g1, g2, t, spec=None):
    """Same rate from the momentum-space factorization.

    Computes ``gamma int d^3k/(2pi)^3 Ihat(k, t) |sum_i m_i (e^{ik.r1_i} -
    e^{ik.r2_i})|^2`` with the angular average done analytically.  It is an
    independent check on the kernel route.
    """
    _check_pair(g1, g2)
    spec = spec or QuadratureSpec(rel_tol=1e-10, abs_tol=0.0)
    m = g1.couplings
    p1, p2 = g1.positions, g2.positions
    dists = [pair_distances(p1, p1), pair_distances(p2, p2), pair_distances(p1, p2)]
    signs = [1.0, 1.0, -2.0]
    ww = m[:, None] * m[None, :]
    lc = correlation_length(model)

    def f(kx):
        k = kx / lc
        out = np.zeros_like(k)
        for dmat, sgn in zip(dists, signs):
            kr = np.multiply.outer(dmat, k)
            out += sgn * np.einsum("ij,ijk->k", ww, np.sinc(kr / math.pi))
        return k * k * np.asarray(fourier_Ihat(model, k, t)) * out

    res = integrate_semi_infinite(f, QuadratureSpec(rel_tol=spec.rel_tol, abs_tol=0.0,
                                                    scale=4.0, max_evals=spec.max_evals))
    return RateResult(model.gamma * float(res.value) / (2 * math.pi**2 * lc), float(t))


def gamma_LM(model, config, L, M, t, spec=None, far_field=None):
    """Pairwise rate ``Gamma^{LM}(t)`` between branches ``L`` and ``M``."""
    n = config.n_branches
    if not (0 <= L < n and 0 <= M < n):
        raise IndexError(f"branch index out of range for {n} branches")
    if L == M:
        return RateResult(0.0, float(t))
    return gamma_pair(model, config.groups[L], config.groups[M], t, spec, far_field)


def gamma_matrix(model, config, t, spec=None, far_field=None):
    """Symmetric matrix of all ``Gamma^{LM}(t)`` (zero diagonal)."""
    n = config.n_branches
    out = np.zeros((n, n))
    for L in range(n):
        for M in range(L + 1, n):
            out[L, M] = out[M, L] = gamma_LM(model, config, L, M, t, spec, far_field).gamma
    return out


def offdiag_decay(model, g1, g2, t, spec=None):
    """Ratio ``<1|rho(t)|2> / <1|rho(0)|2> = exp(-Gamma(t))``."""
    return math.exp(-gamma_pair(model, g1, g2, t, spec).gamma)


def reduction_bounds(gamma, e0):
    """Lower and upper bounds on ``E[p1 p2](t)`` given ``Gamma(t)``.

    The lower bound is ``e0 exp(-2 Gamma)``.  The upper bound,
    ``e0 / (1 + 8 e0 Gamma)``, comes from integrating
    ``dE/dt <= -8 Gamma'(t) E^2`` exactly.  Both assume the rate integrand is
    non-negative on ``[0, t]`` (see :func:`rate_integrand_positive`).

    Examples
    --------
    >>> lo, up = reduction_bounds(1.0, 0.25)
    >>> round(lo, 5), round(up, 5)
    (0.03383, 0.08333)
    """
    if not 0.0 <= e0 <= 0.25:
        raise DomainError("e0 = E[p1 p2] must lie in [0, 1/4]")
    if not gamma >= 0:
        raise DomainError("bounds require Gamma >= 0")
    if math.isinf(gamma):
        return Bounds(0.0, 0.0)
    return Bounds(e0 * math.exp(-2.0 * gamma), e0 / (1.0 + 8.0 * e0 * gamma))


def corner_estimates(gamma_lm, e0):
    """Near-corner estimates for ``E[p_L(t)]`` when some ``p_M`` is near 1.

    These are estimates, not rigorous bounds: ``e0 exp(-2 Gamma^{LM})`` and
    ``e0 / (1 + 8 e0 Gamma^{LM})``.
    """
    if not 0.0 <= e0 <= 1.0:
        raise DomainError("e0 must be a probability")
    if not gamma_lm >= 0:
        raise DomainError("Gamma^{LM} must be non-negative")
    return Bounds(e0 * math.exp(-2.0 * gamma_lm), e0 / (1.0 + 8.0 * e0 * gamma_lm))


def rate_integrand_positive(model, g1, g2, t, n_samples=65, spec=None):
    """Check that ``dGamma/ds >= 0`` on sampled ``s`` in ``(0, t]``.

    ``dGamma/ds`` is the same combination as the rate with ``F`` in place of
    ``I``.  Negative values beyond roundoff mean the differential inequalities
    behind :func:`reduction_bounds` do not apply.
    """
    if t == 0:
        return True
    t_end = t if math.isfinite(t) else 1e3 * correlation_length(model)
    for s in np.linspace(t_end / n_samples, t_end, n_samples):
        terms = _structure(corr_F_diff, model, g1, g2, float(s), spec, None)
        val = float(np.sum(terms))
        scale = float(np.sum(np.abs(terms))) + 1e-300
        if val < -1e-9 * scale:
            return False
    return True


def bounds_for(model, g1, g2, t, e0, spec=None):
    """Bounds plus the positivity flag for a concrete geometry.

    Returns
    -------
    dict
        Keys ``gamma``, ``lower``, ``upper`` and ``positivity``.  The bounds
        are guaranteed only when ``positivity`` is True.
    """
    g = gamma_pair(model, g1, g2, t, spec).gamma
    b = reduction_bounds(g, e0)
    return {"gamma": g, "lower": b.lower, "upper": b.upper,
            "positivity": rate_integrand_positive(model, g1, g2, t, spec=spec)}


def csl_matching(model, nucleon_mass=NUCLEON_MASS_GEV):
    """Equivalent CSL length and rate product for a dilute thermal model.

    Returns
    -------
    CSLMatch
        ``r_C = 1/sqrt(2 mu T)`` and ``rate_product = 2 gamma m_N^2
        exp(-(mu - zeta)/T) / mu^3``.  The rate product is the value of
        ``Delta t * gamma_CSL`` that gives the same asymptotic rate.
    """
    if not isinstance(model, (DiluteNR, Thermal)):
        raise DomainError("CSL matching needs a thermal or dilute model")
    r_C = 1.0 / math.sqrt(2.0 * model.mu * model.T)
    rate = 2.0 * model.gamma * nucleon_mass**2 * math.exp(model.log_chem) / model.mu**3
    return CSLMatch(r_C, rate)


def white_rate_closed(gamma_csl, r_C, R, t):
    """CSL closed form ``t gamma_CSL (4 pi r_C^2)^{-3/2} [1 - exp(-R^2/4r_C^2)]``."""
    return t * gamma_csl * (gaussian_kernel(0.0, r_C) - gaussian_kernel(R, r_C))
