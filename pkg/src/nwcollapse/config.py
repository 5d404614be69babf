"""Run configuration: strict TOML sections with unit-suffixed values.

A configuration has four sections.

``[model]``
    ``family`` is one of ``white``, ``product``, ``thermal``, ``dilute`` and
    ``unparticle``.  The remaining keys are the family parameters.
``[geometry]``
    Superposition branches, given inline as ``[[geometry.branches]]`` or
    read from a CSV file.
``[run]``
    Command-specific settings such as times, grids and seeds.
``[output]``
    Format, output directory (``path``) and numeric precision.

Values carrying dimensions are strings such as ``"1e-5 cm"`` or ``"1 keV"``
and are converted to natural units when parsed.  A bare number is taken
to be in natural units (GeV powers).  Unknown keys are errors.

Examples
--------
>>> cfg = parse_config({"model": {"family": "white", "gamma_csl": "1e-30 cm^3/s",
...                               "r_C": "1e-5 cm"}})
>>> type(cfg.model).__name__
'WhiteCSL'
"""

from __future__ import annotations

import copy
import csv
import math
import os
from dataclasses import dataclass, field

import numpy as np
import tomli

from .correlators import (CutoffProduct, DiluteNR, Spectrum, Thermal, Unparticle, WhiteCSL)
from .errors import ConfigError
from .rates import ParticleGroup, SuperpositionConfig
from .units import NUCLEON_MASS_GEV, parse_quantity

__all__ = ["RunConfig", "parse_config", "load_config", "apply_overrides", "quantity",
           "grid", "COMMAND_RUN_KEYS"]

# key -> GeV power of the quantity (None: not a physical quantity)
_MODEL_KEYS = {
    "white": {"gamma": -4, "gamma_csl": -2, "r_C": -1},
    "product": {"gamma": -4, "gamma_csl": -2, "r_C": -1, "spectrum": None},
    "thermal": {"mu": 1, "T": 1, "zeta": 1, "chem": 0, "gamma": -2},
    "dilute": {"mu": 1, "T": 1, "zeta": 1, "chem": 0, "gamma": -2},
    "unparticle": {"d": 0, "Lambda": 1, "T": 1, "zeta": 1, "gamma": None},
}
_SPECTRUM_KEYS = {"kind": None, "scale": 0, "omega_c": 1, "omega_0": 1, "file": None}
_GEOMETRY_KEYS = {"length_unit", "coupling_unit", "file", "probabilities", "branches"}
_BRANCH_KEYS = {"probability", "particles", "shift"}
_OUTPUT_KEYS = {"format", "path", "precision", "figures"}

_COMMON_RUN = {"threads", "rel_tol"}
COMMAND_RUN_KEYS = {
    "kernel": {"times", "r", "k", "kernels"},
    "rate": {"times", "far_field", "e0"},
    "reduce-mc": {"times", "n_traj", "seed", "sampler", "block_size"},
    "fokker-planck": {"times", "p"},
    "energy": {"times", "species", "method", "growth_times"},
    "gamma-spectrum": {"photon_energies", "v_rms", "p_check"},
    "dm-scan": {"mu", "v_rms", "rho_m", "M", "gamma", "n", "N_bunches", "mu5"},
    "tables": {"masses_keV", "gamma"},
}
_RUN_POWERS = {
    "times": -1, "growth_times": -1, "r": -1, "k": 1, "photon_energies": 1, "mu": 1,
    "v_rms": 0, "rho_m": 4, "M": 1, "gamma": -2, "mu5": 1, "p_check": 1,
}


def quantity(value, power, name="value"):
    """Convert a config value to natural units, checking its dimension.

    Numbers pass through unchanged.  Strings must carry units of GeV power
    ``power``; ``"inf"`` is accepted.
    """
    if isinstance(value, bool):
        raise ConfigError(f"{name}: expected a number, got a boolean")
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        if value.strip().lower() in ("inf", "infinity"):
            return math.inf
        try:
            q = parse_quantity(value)
        except ValueError as exc:
            raise ConfigError(f"{name}: {exc}") from None
        if q.power != power and q.power != 0:
            raise ConfigError(f"{name}: {value!r} has GeV power {q.power}, expected {power}")
        return q.value
    raise ConfigError(f"{name}: cannot interpret {value!r}")


def grid(value, power, name="grid"):
    """A list of quantities, or a ``{start, stop, num, spacing}`` table."""
    if isinstance(value, dict):
        extra = set(value) - {"start", "stop", "num", "spacing"}
        if extra:
            raise ConfigError(f"{name}: unknown grid keys {sorted(extra)}")
        try:
            start = quantity(value["start"], power, name)
            stop = quantity(value["stop"], power, name)
            num = int(value["num"])
        except KeyError as exc:
            raise ConfigError(f"{name}: grid needs {exc.args[0]!r}") from None
        spacing = value.get("spacing", "linear")
        if num < 1:
            raise ConfigError(f"{name}: num must be >= 1")
        if spacing == "log":
            if start <= 0 or stop <= 0:
                raise ConfigError(f"{name}: log grid needs positive limits")
            return np.geomspace(start, stop, num)
        if spacing != "linear":
            raise ConfigError(f"{name}: spacing must be 'linear' or 'log'")
        return np.linspace(start, stop, num)
    if isinstance(value, (list, tuple)):
        return np.array([quantity(v, power, name) for v in value], dtype=float)
    return np.array([quantity(value, power, name)])


def _check_keys(section, allowed, where):
    unknown = set(section) - set(allowed)
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(sorted(unknown))}")


def _build_spectrum(spec, base_dir):
    if not isinstance(spec, dict):
        raise ConfigError("model.spectrum must be a table")
    _check_keys(spec, _SPECTRUM_KEYS, "model.spectrum")
    scale = quantity(spec.get("scale", 1.0), 0, "spectrum.scale")
    if "file" in spec:
        path = os.path.join(base_dir, spec["file"])
        if not os.path.exists(path):
            raise ConfigError(f"spectrum file not found: {path}")
        return Spectrum.from_csv(path, scale=scale)
    kw = {"kind": spec.get("kind", "constant"), "scale": scale}
    for k in ("omega_c", "omega_0"):
        if k in spec:
            kw[k] = quantity(spec[k], 1, f"spectrum.{k}")
    return Spectrum(**kw)


def _build_model(sec, base_dir):
    if "family" not in sec:
        raise ConfigError("model.family is required")
    fam = sec["family"]
    if fam not in _MODEL_KEYS:
        raise ConfigError(f"unknown model family {fam!r}; choose from {sorted(_MODEL_KEYS)}")
    keys = _MODEL_KEYS[fam]
    params = {k: v for k, v in sec.items() if k != "family"}
    _check_keys(params, keys, f"model ({fam})")
    q = {k: quantity(v, keys[k], f"model.{k}") for k, v in params.items()
         if keys[k] is not None}
    if fam in ("white", "product"):
        if "r_C" not in q:
            raise ConfigError("model.r_C is required")
        if ("gamma" in q) == ("gamma_csl" in q):
            raise ConfigError("give exactly one of model.gamma and model.gamma_csl")
        gamma = q["gamma"] if "gamma" in q else q["gamma_csl"] / NUCLEON_MASS_GEV**2
        if fam == "white":
            return WhiteCSL(gamma=gamma, r_C=q["r_C"])
        return CutoffProduct(gamma=gamma, r_C=q["r_C"],
                             spectrum=_build_spectrum(params.get("spectrum", {}), base_dir))
    if fam in ("thermal", "dilute"):
        cls = Thermal if fam == "thermal" else DiluteNR
        for k in ("mu", "T"):
            if k not in q:
                raise ConfigError(f"model.{k} is required")
        gamma = q.get("gamma", 1.0)
        if "chem" in q:
            if "zeta" in q:
                raise ConfigError("give at most one of model.zeta and model.chem")
            return cls.from_chem(q["mu"], q["T"], q["chem"], gamma=gamma)
        return cls(mu=q["mu"], T=q["T"], zeta=q.get("zeta", 0.0), gamma=gamma)
    for k in ("d", "Lambda", "T"):
        if k not in q:
            raise ConfigError(f"model.{k} is required")
    gamma = float(params.get("gamma", 1.0))
    return Unparticle(d=q["d"], Lambda=q["Lambda"], T=q["T"], zeta=q.get("zeta", 0.0),
                      gamma=gamma)


def _length_factor(unit):
    if unit in ("natural", "GeV^-1"):
        return 1.0
    q = parse_quantity(f"1 {unit}")
    if q.power != -1:
        raise ConfigError(f"geometry.length_unit {unit!r} is not a length")
    return q.value


def _coupling_factor(unit):
    if unit in ("natural", "GeV"):
        return 1.0
    if unit == "nucleon":
        return NUCLEON_MASS_GEV
    q = parse_quantity(f"1 {unit}")
    if q.power != 1:
        raise ConfigError(f"geometry.coupling_unit {unit!r} is not a mass")
    return q.value


def _read_geometry_csv(path):
    """Rows ``branch,x,y,z,m``; a header line is optional."""
    rows = []
    with open(path, newline="") as fh:
        for row in csv.reader(fh):
            if not row or row[0].lstrip().startswith("#"):
                continue
            try:
                rows.append((int(row[0]), *map(float, row[1:5])))
            except (ValueError, IndexError):
                if rows:
                    raise ConfigError(f"malformed geometry row {row!r} in {path}")
    if not rows:
        raise ConfigError(f"no particles in geometry file {path}")
    branches = sorted({r[0] for r in rows})
    if branches != list(range(len(branches))):
        raise ConfigError("geometry file branches must be numbered 0..N-1")
    return [[r[1:] for r in rows if r[0] == b] for b in branches]


def _build_geometry(sec, base_dir):
    _check_keys(sec, _GEOMETRY_KEYS, "geometry")
    lf = _length_factor(sec.get("length_unit", "cm"))
    mf = _coupling_factor(sec.get("coupling_unit", "GeV"))
    if "file" in sec:
        if "branches" in sec:
            raise ConfigError("give geometry.file or geometry.branches, not both")
        path = os.path.join(base_dir, sec["file"])
        if not os.path.exists(path):
            raise ConfigError(f"geometry file not found: {path}")
        parts = _read_geometry_csv(path)
        probs = sec.get("probabilities", [1.0 / len(parts)] * len(parts))
    else:
        if "probabilities" in sec:
            raise ConfigError("geometry.probabilities goes with geometry.file; "
                              "inline branches carry their own probability")
        branches = sec.get("branches")
        if not branches:
            raise ConfigError("geometry needs branches or a file")
        parts, probs = [], []
        for i, b in enumerate(branches):
            _check_keys(b, _BRANCH_KEYS, f"geometry.branches[{i}]")
            if ("particles" in b) == ("shift" in b):
                raise ConfigError(f"branch {i}: give exactly one of particles and shift")
            if "shift" in b:
                if i == 0:
                    raise ConfigError("the first branch must list its particles")
                sh = np.asarray(b["shift"], dtype=float)
                if sh.shape != (3,):
                    raise ConfigError(f"branch {i}: shift must have three components")
                parts.append([(p[0] + sh[0], p[1] + sh[1], p[2] + sh[2], p[3]) for p in parts[0]])
            else:
                parts.append([tuple(map(float, p)) for p in b["particles"]])
            probs.append(b.get("probability", None))
        if any(p is None for p in probs):
            if not all(p is None for p in probs):
                raise ConfigError("give a probability for every branch or for none")
            probs = [1.0 / len(parts)] * len(parts)
    groups = []
    for i, rows in enumerate(parts):
        arr = np.asarray(rows, dtype=float)
        if arr.ndim != 2 or arr.shape[1] != 4:
            raise ConfigError(f"branch {i}: particles must be [x, y, z, m] records")
        groups.append(ParticleGroup(arr[:, :3] * lf, arr[:, 3] * mf))
    return SuperpositionConfig(tuple(groups), tuple(float(p) for p in probs))


@dataclass
class RunConfig:
    """Validated configuration.

    Attributes
    ----------
    model : NoiseModel or None
    geometry : SuperpositionConfig or None
    run : dict
        Raw run settings; use :meth:`get_grid` / :meth:`get_quantity`.
    output : dict
    raw : dict
        Echo of the configuration after overrides.
    """

    model: object
    geometry: object
    run: dict
    output: dict
    raw: dict
    base_dir: str = "."
    command: str | None = None

    def get_grid(self, key, default=None):
        if key not in self.run:
            if default is None:
                raise ConfigError(f"run.{key} is required")
            return np.asarray(default, dtype=float)
        return grid(self.run[key], _RUN_POWERS[key], f"run.{key}")

    def get_quantity(self, key, default=None):
        if key not in self.run:
            if default is None:
                raise ConfigError(f"run.{key} is required")
            return default
        return quantity(self.run[key], _RUN_POWERS.get(key, 0), f"run.{key}")

    def require_model(self):
        if self.model is None:
            raise ConfigError("this command needs a [model] section")
        return self.model

    def require_geometry(self):
        if self.geometry is None:
            raise ConfigError("this command needs a [geometry] section")
        return self.geometry


def parse_config(doc, command=None, base_dir="."):
    """Validate a parsed TOML document and build model and geometry."""
    doc = copy.deepcopy(doc)
    _check_keys(doc, {"model", "geometry", "run", "output"}, "config")
    run = doc.get("run", {})
    # A config may be shared between commands, so a key is rejected only when
    # no command uses it; keys for other commands are ignored.
    if command is not None and command not in COMMAND_RUN_KEYS:
        raise ConfigError(f"unknown command {command!r}")
    _check_keys(run, set().union(*COMMAND_RUN_KEYS.values()) | _COMMON_RUN, "run")
    out = doc.get("output", {})
    _check_keys(out, _OUTPUT_KEYS, "output")
    fmt = out.get("format", "csv")
    if fmt not in ("csv", "json", "both"):
        raise ConfigError("output.format must be csv, json or both")
    if "path" in out and not (isinstance(out["path"], str) and out["path"]):
        raise ConfigError("output.path must be a non-empty string")
    prec = out.get("precision")
    if prec is not None and (not isinstance(prec, int) or not 1 <= prec <= 17):
        raise ConfigError("output.precision must be an integer in 1..17")
    model = _build_model(doc["model"], base_dir) if "model" in doc else None
    geometry = _build_geometry(doc["geometry"], base_dir) if "geometry" in doc else None
    return RunConfig(model, geometry, run, out, doc, base_dir, command)


def apply_overrides(doc, overrides):
    """Apply ``section.key=value`` overrides (values parsed as TOML when possible)."""
    doc = copy.deepcopy(doc)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} must look like section.key=value")
        path, text = item.split("=", 1)
        keys = path.strip().split(".")
        if len(keys) < 2 or not all(keys):
            raise ConfigError(f"override {item!r} must name section.key")
        try:
            value = tomli.loads(f"v = {text}")["v"]
        except tomli.TOMLDecodeError:
            value = text.strip()
        node = doc
        for k in keys[:-1]:
            node = node.setdefault(k, {})
            if not isinstance(node, dict):
                raise ConfigError(f"override {item!r} descends into a non-table")
        node[keys[-1]] = value
    return doc


def load_config(path=None, overrides=(), command=None):
    """Read a TOML file (optional), apply overrides, and validate."""
    doc = {}
    base_dir = "."
    if path is not None:
        if not os.path.exists(path):
            raise ConfigError(f"config file not found: {path}")
        with open(path, "rb") as fh:
            try:
                doc = tomli.load(fh)
            except tomli.TOMLDecodeError as exc:
                raise ConfigError(f"{path}: {exc}") from None
        base_dir = os.path.dirname(os.path.abspath(path))
    doc = apply_overrides(doc, overrides)
    return parse_config(doc, command=command, base_dir=base_dir)

