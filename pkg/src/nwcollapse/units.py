"""Physical constants and unit handling.

All computation is done in natural units (hbar = c = k_B = 1) with energies
in GeV.  Lengths and times therefore carry dimension GeV^-1.  Quantities
entered by users are strings such as ``"1e-5 cm"`` or ``"220 km/s"`` and
are converted once, at parse time, by :func:`parse_quantity`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass

HBARC_GEV_CM = 1.9733e-14
"""hbar*c in GeV cm."""
HBAR_GEV_S = 6.5821e-25
"""hbar in GeV s."""
C_KM_S = 299792.458
"""Speed of light in km/s."""
K_B_GEV_PER_K = 8.617333e-14
"""Boltzmann constant in GeV per kelvin."""
NUCLEON_MASS_GEV = 0.938
FINE_STRUCTURE = 1.0 / 137.04
"""e^2 in Gaussian natural units."""
BOHR_RADIUS_CM = 0.529e-8

CM = 1.0 / HBARC_GEV_CM
"""One centimetre in GeV^-1."""
SECOND = 1.0 / HBAR_GEV_S
"""One second in GeV^-1."""

# name -> (value in GeV^power, power)
_UNITS = {
    "GeV": (1.0, 1), "MeV": (1e-3, 1), "keV": (1e-6, 1), "eV": (1e-9, 1),
    "TeV": (1e3, 1),
    "cm": (CM, -1), "m": (100.0 * CM, -1), "km": (1e5 * CM, -1),
    "mm": (0.1 * CM, -1), "um": (1e-4 * CM, -1), "nm": (1e-7 * CM, -1),
    "fm": (1e-13 * CM, -1),
    "s": (SECOND, -1), "ms": (1e-3 * SECOND, -1), "us": (1e-6 * SECOND, -1),
    "ns": (1e-9 * SECOND, -1),
    "K": (K_B_GEV_PER_K, 1),
    "c": (1.0, 0),
}

_NUMBER = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)\s*(.*?)\s*$")
_TOKEN = re.compile(r"^([A-Za-z]+)(?:\^([-+]?\d+))?$")


@dataclass(frozen=True)
class Quantity:
    """A value in natural units together with its GeV power."""

    value: float
    power: int


def _parse_unit(expr):
    factor, power = 1.0, 0
    sign = 1
    for tok in re.split(r"\s*(\*|/|\s)\s*", expr.strip()):
        if tok in ("", " ", "*"):
            continue
        if tok == "/":
            sign = -1
            continue
        m = _TOKEN.match(tok)
        if m is None or m.group(1) not in _UNITS:
            raise ValueError(f"unknown unit {tok!r}")
        base, p = _UNITS[m.group(1)]
        exp = sign * int(m.group(2) or 1)
        factor *= base**exp
        power += p * exp
    return factor, power


def parse_quantity(text):
    """Parse ``"<number> <unit expression>"`` into natural units.

    Unit expressions are products of known units with optional integer powers
    (``cm^3``); everything after a ``/`` is in the denominator.

    Examples
    --------
    >>> parse_quantity("1 keV").value
    1e-06
    >>> parse_quantity("0.3 GeV/cm^3").power
    4
    """
    if isinstance(text, (int, float)) and not isinstance(text, bool):
        return Quantity(float(text), 0)
    m = _NUMBER.match(str(text))
    if m is None:
        raise ValueError(f"cannot parse quantity {text!r}")
    number = float(m.group(1))
    unit = m.group(2)
    if not unit:
        return Quantity(number, 0)
    factor, power = _parse_unit(unit)
    return Quantity(number * factor, power)


def to_unit(value, unit):
    """Convert a natural-unit value into ``unit`` (e.g. ``"cm"``)."""
    factor, _ = _parse_unit(unit)
    return value / factor


def km_s_to_c(v_km_s):
    """Velocity in km/s expressed as a fraction of c."""
    return v_km_s / C_KM_S
