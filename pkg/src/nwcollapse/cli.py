"""Command-line front end.

Every command reads an optional TOML config (``--config``), applies
``--set section.key=value`` overrides, and validates everything before
computing.  Results go to CSV (and/or JSON) files in the output directory,
together with ``manifest.json``, which records the configuration echo, seed,
library versions, wall time and artifact hashes.

Exit status: 0 on success, 2 for validation errors, 3 for numerical
non-convergence, 4 for covariance (PSD) failures, 1 for anything else.  A
one-line JSON error record is written to stderr on failure.
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import hashlib
import json
import math
import os
import platform
import sys
import time

import numpy as np
import scipy

from . import __version__
from .config import load_config
from .correlators import (DiluteNR, Thermal, corr_D, corr_D_diff, corr_F, corr_F_diff, corr_I,
                          corr_I_diff, default_spec, fourier_Fhat, fourier_Ihat)
from .dynamics import (EnsembleSpec, expected_p1p2_closed, fp_diffusion_matrix, moment_rhs,
                       sample_reduction_ensemble)
from .errors import CollapseError, ConfigError, UnboundedGrowthError
from .observables import (ParticleSpecies, energy_rate, energy_total, fit_growth_exponent,
                          gamma_spectrum, suppression_exponent)
from .phenomenology import (GEV4_PER_GEV_CM3, HALO_DENSITY_GEV_CM3, TABLE_MASSES_KEV,
                            TABLE_VELOCITIES_KM_S, DarkMatterScenario, dm_derived,
                            fifth_force_bound, make_tables)
from .rates import gamma_pair, rate_integrand_positive, reduction_bounds
from .units import C_KM_S, NUCLEON_MASS_GEV

OUT_DIR_ENV = "NWCOLLAPSE_OUT"
EXIT_CODES = {"validation": 2, "nonconvergence": 3, "psd": 4}

_KERNELS = {"D": corr_D, "F": corr_F, "I": corr_I, "D_diff": corr_D_diff,
            "F_diff": corr_F_diff, "I_diff": corr_I_diff}
_FOURIER = {"Fhat": fourier_Fhat, "Ihat": fourier_Ihat}


class Output:
    """Collects artifacts written during one command."""

    def __init__(self, out_dir, fmt="csv", precision=None):
        self.out_dir = out_dir
        self.fmt = fmt
        self.precision = precision
        self.files = []
        os.makedirs(out_dir, exist_ok=True)

    def _num(self, x):
        if isinstance(x, (bool, np.bool_)):
            return "true" if x else "false"
        if isinstance(x, (int, np.integer)):
            return str(int(x))
        if isinstance(x, (float, np.floating)):
            x = float(x)
            if self.precision is None:
                return repr(x)
            return f"{x:.{self.precision}g}"
        return str(x)

    def path(self, name):
        p = os.path.join(self.out_dir, name)
        self.files.append(name)
        return p

    def table(self, stem, header, rows):
        """Write rows as ``stem.csv`` and/or ``stem.json``."""
        if self.fmt in ("csv", "both"):
            with open(self.path(stem + ".csv"), "w", newline="") as fh:
                w = csv.writer(fh, lineterminator="\n")
                w.writerow(header)
                for r in rows:
                    w.writerow([self._num(v) for v in r])
        if self.fmt in ("json", "both"):
            recs = [{h: _jsonable(v) for h, v in zip(header, r)} for r in rows]
            with open(self.path(stem + ".json"), "w") as fh:
                json.dump(recs, fh, indent=2)
                fh.write("\n")

    def text(self, name, content):
        with open(self.path(name), "w") as fh:
            fh.write(content)

    def hashes(self):
        out = []
        for name in self.files:
            with open(os.path.join(self.out_dir, name), "rb") as fh:
                out.append({"file": name, "sha256": hashlib.sha256(fh.read()).hexdigest()})
        return out


def _jsonable(v):
    if isinstance(v, (np.bool_, bool)):
        return bool(v)
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return v if math.isfinite(v) else str(v)
    return v


def _quad(cfg):
    """Quadrature settings with ``run.rel_tol`` applied, or None for the defaults."""
    if "rel_tol" not in cfg.run:
        return None
    tol = cfg.run["rel_tol"]
    if isinstance(tol, bool) or not isinstance(tol, (int, float)) or not 0 < tol < 1:
        raise ConfigError("run.rel_tol must be a number in (0, 1)")
    return dataclasses.replace(default_spec(), rel_tol=float(tol))


def _pairs(n):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_kernel(cfg, out, args):
    model = cfg.require_model()
    times = cfg.get_grid("times")
    r = cfg.get_grid("r", [0.0])
    names = cfg.run.get("kernels", ["I_diff"])
    unknown = set(names) - set(_KERNELS) - set(_FOURIER)
    if unknown:
        raise ConfigError(f"unknown kernel(s): {sorted(unknown)}")
    q = _quad(cfg)
    rows, frows = [], []
    for t in times:
        for name in names:
            if name in _KERNELS:
                vals = np.atleast_1d(_KERNELS[name](model, r, t, q))
                rows += [(t, ri, name, v) for ri, v in zip(r, vals)]
            else:
                k = cfg.get_grid("k")
                vals = np.atleast_1d(_FOURIER[name](model, k, t, q))
                frows += [(t, ki, name, v) for ki, v in zip(k, vals)]
    if rows:
        out.table("kernel", ["t", "r", "kernel", "value"], rows)
    if frows:
        out.table("fourier_kernel", ["t", "k", "kernel", "value"], frows)
    if args.figures and rows and len(r) > 1:
        from .plotting import line_figure
        for name in {row[2] for row in rows}:
            series = {f"t={t:.3g}": [v for (tt, _, n, v) in rows if tt == t and n == name]
                      for t in times}
            line_figure(out.out_dir, f"kernel_{name}.png", r, series, "r [GeV^-1]", name)
            out.files.append(f"kernel_{name}.png")
    return {}


def cmd_rate(cfg, out, args):
    model = cfg.require_model()
    geo = cfg.require_geometry()
    times = cfg.get_grid("times")
    far = cfg.run.get("far_field")
    p = geo.probabilities
    q = _quad(cfg)
    rows = []
    for t in times:
        for a, b in _pairs(geo.n_branches):
            ga, gb = geo.groups[a], geo.groups[b]
            G = gamma_pair(model, ga, gb, t, q, far_field=far).gamma
            e0 = float(cfg.run.get("e0", p[a] * p[b]))
            lo, up = reduction_bounds(G, e0)
            pos = rate_integrand_positive(model, ga, gb, t, spec=q)
            rows.append((t, a, b, G, math.exp(-G), e0, lo, up, pos))
    out.table("rate", ["t", "L", "M", "Gamma", "decay", "e0", "bound_lower", "bound_upper",
                       "positivity"], rows)
    if args.figures and len(times) > 1:
        from .plotting import line_figure
        series = {f"{a}-{b}": [r[3] for r in rows if (r[1], r[2]) == (a, b)]
                  for a, b in _pairs(geo.n_branches)}
        out.files.append(os.path.basename(
            line_figure(out.out_dir, "rate.png", times, series, "t [GeV^-1]", "Gamma")))
    return {}


def cmd_reduce_mc(cfg, out, args):
    model = cfg.require_model()
    geo = cfg.require_geometry()
    seed = args.seed if args.seed is not None else int(cfg.run.get("seed", 0))
    spec = EnsembleSpec(n_traj=int(cfg.run.get("n_traj", 10000)), seed=seed,
                        output_times=tuple(cfg.get_grid("times")),
                        sampler=cfg.run.get("sampler", "tilted"),
                        block_size=int(cfg.run.get("block_size", 4096)))
    q = _quad(cfg)
    batch = sample_reduction_ensemble(model, geo, spec, quad_spec=q,
                                      threads=_threads(cfg, args))
    if out.fmt in ("csv", "both"):
        batch.to_csv(out.path("reduce_mc.csv"))
    if out.fmt in ("json", "both"):
        batch.to_json(out.path("reduce_mc.json"), config=_echo(cfg))
    if geo.n_branches == 2:
        p1, p2 = geo.probabilities
        mean, err = batch.pair_product(0, 1)
        rows = []
        for i, t in enumerate(spec.output_times):
            G = gamma_pair(model, geo.groups[0], geo.groups[1], t, q).gamma
            closed = expected_p1p2_closed(G, p1, p2)
            z = (mean[i] - closed) / err[i] if err[i] > 0 else 0.0
            rows.append((t, G, closed, mean[i], err[i], z))
        out.table("reduce_mc_closed", ["t", "Gamma", "closed", "mc_mean", "mc_stderr", "z"],
                  rows)
        if args.figures:
            from .plotting import line_figure
            gam = [r[1] for r in rows]
            out.files.append(os.path.basename(line_figure(
                out.out_dir, "reduce_mc.png", gam,
                {"closed form": [r[2] for r in rows], "Monte Carlo": [r[3] for r in rows]},
                "Gamma", "E[p1 p2]", errors={"Monte Carlo": [r[4] for r in rows]})))
    return {"seed": seed, "n_traj": spec.n_traj, "sampler": spec.sampler,
            "block_size": spec.block_size}


def cmd_fokker_planck(cfg, out, args):
    model = cfg.require_model()
    geo = cfg.require_geometry()
    times = cfg.get_grid("times")
    p = cfg.run.get("p")
    n = geo.n_branches
    q = _quad(cfg)
    arows, mrows = [], []
    for t in times:
        A = fp_diffusion_matrix(model, geo, t, p, q)
        for a in range(n):
            for b in range(n):
                arows.append((t, a, b, A[a, b]))
        for a in range(n):
            for b in range(a, n):
                mrows.append((t, a, b, moment_rhs(model, geo, t, a, b, p, q)))
    out.table("fp_diffusion", ["t", "M", "T", "A"], arows)
    out.table("moment_drift", ["t", "M", "L", "drift"], mrows)
    return {}


def _species(cfg):
    recs = cfg.run.get("species")
    if recs is None:
        return [ParticleSpecies(NUCLEON_MASS_GEV, NUCLEON_MASS_GEV)]
    from .config import quantity
    out = []
    for i, r in enumerate(recs):
        extra = set(r) - {"coupling", "mass", "count"}
        if extra:
            raise ConfigError(f"run.species[{i}]: unknown keys {sorted(extra)}")
        out.append(ParticleSpecies(quantity(r["coupling"], 1, "species.coupling"),
                                   quantity(r["mass"], 1, "species.mass"),
                                   float(r.get("count", 1.0))))
    return out


def cmd_energy(cfg, out, args):
    model = cfg.require_model()
    species = _species(cfg)
    method = cfg.run.get("method", "closed")
    q = _quad(cfg)
    rows = []
    growth = []
    for t in cfg.get_grid("times"):
        rate = energy_rate(model, species, t, method=method, spec=q)
        try:
            total = energy_total(model, species, t, q)
        except UnboundedGrowthError as exc:
            total = math.inf
            growth.append(("t=inf", exc.exponent, exc.stderr))
        rows.append((t, rate, total))
    out.table("energy", ["t", "rate", "total"], rows)
    if "growth_times" in cfg.run:
        gt = cfg.get_grid("growth_times")
        e, s = fit_growth_exponent(lambda t: energy_total(model, species, t, q), gt)
        growth.append((f"[{float(gt[0])!r},{float(gt[-1])!r}]", e, s))
    if growth:
        out.table("energy_growth", ["window", "exponent", "stderr"], growth)
    if args.figures and len(rows) > 1:
        from .plotting import line_figure
        finite = [r for r in rows if math.isfinite(r[0])]
        out.files.append(os.path.basename(line_figure(
            out.out_dir, "energy.png", [r[0] for r in finite],
            {"total": [r[2] for r in finite]}, "t [GeV^-1]", "Delta E [GeV]")))
    return {}


def cmd_gamma_spectrum(cfg, out, args):
    model = cfg.require_model()
    if not isinstance(model, (Thermal, DiluteNR)):
        raise ConfigError("gamma-spectrum needs a thermal or dilute model")
    pts = [gamma_spectrum(model, p) for p in cfg.get_grid("photon_energies")]
    out.table("gamma_spectrum", ["p", "dP_dp", "log_dP_dp", "below_threshold"],
              [(s.p, s.dP_dp, s.log_dP_dp, s.below_threshold) for s in pts])
    extra = {}
    if "v_rms" in cfg.run:
        v = cfg.get_quantity("v_rms")
        pc = cfg.get_quantity("p_check", 11e-6)
        expo = suppression_exponent(pc, model.mu, v)
        out.table("suppression_exponent", ["p", "mu", "v_rms", "exponent"],
                  [(pc, model.mu, v, expo)])
        extra["suppression_exponent"] = expo
    if args.figures:
        from .plotting import line_figure
        above = [s for s in pts if not s.below_threshold]
        if len(above) > 1:
            out.files.append(os.path.basename(line_figure(
                out.out_dir, "gamma_spectrum.png", [s.p for s in above],
                {"log dP/dp": [s.log_dP_dp for s in above]}, "p [GeV]", "ln dP/dp")))
    return extra


def cmd_dm_scan(cfg, out, args):
    mus = cfg.get_grid("mu", [m * 1e-6 for m in TABLE_MASSES_KEV])
    vs = cfg.get_grid("v_rms", [v / C_KM_S for v in TABLE_VELOCITIES_KM_S.values()])
    rho = cfg.get_quantity("rho_m", HALO_DENSITY_GEV_CM3 * GEV4_PER_GEV_CM3) / GEV4_PER_GEV_CM3
    kw = {}
    if "M" in cfg.run:
        kw["M"] = cfg.get_quantity("M")
    if "gamma" in cfg.run:
        kw["gamma"] = cfg.get_quantity("gamma")
    for k in ("n", "N_bunches"):
        if k in cfg.run:
            kw[k] = float(cfg.run[k])
    if "mu5" in cfg.run:
        kw["mu5"] = cfg.get_quantity("mu5")
    rows = []
    for mu in mus:
        for v in vs:
            s = DarkMatterScenario(mu=mu, v_rms=v, rho_m=rho, **kw)
            d = dm_derived(s)
            ff = fifth_force_bound(mu, s.mu5)
            rows.append((mu, v, rho, d.r_C_cm, d.T, d.t_R_s, d.chem_factor, d.exponent_2Gamma,
                         d.non_dilute, ff.log10_M_min))
    out.table("dm_scan", ["mu", "v_rms", "rho_m_GeV_cm3", "r_C_cm", "T", "t_R_s",
                          "chem_factor", "exponent_2Gamma", "non_dilute",
                          "log10_M_min_GeV"], rows)
    return {}


def cmd_tables(cfg, out, args):
    kw = {}
    if "masses_keV" in cfg.run:
        kw["masses_kev"] = tuple(float(m) for m in cfg.run["masses_keV"])
    if "gamma" in cfg.run:
        kw["gamma"] = cfg.get_quantity("gamma")
    tables = make_tables(**kw)
    for name, tab in tables.items():
        if out.fmt in ("csv", "both"):
            out.text(f"{name}.csv", tab.to_csv())
        if out.fmt in ("json", "both"):
            out.text(f"{name}.json", tab.to_json() + "\n")
        out.text(f"{name}.txt", tab.to_text())
        if args.figures:
            from .plotting import heatmap_figure
            heatmap_figure(out.out_dir, f"{name}.png", tab.values, tab.row_labels,
                           tab.columns, f"{tab.caption} [{tab.unit}]")
            out.files.append(f"{name}.png")
    return {}


COMMANDS = {
    "kernel": (cmd_kernel, "correlation kernels D/F/I and their Fourier transforms"),
    "rate": (cmd_rate, "pairwise reduction rates, decay factors and bounds"),
    "reduce-mc": (cmd_reduce_mc, "Monte Carlo of branch probabilities vs closed form"),
    "fokker-planck": (cmd_fokker_planck, "diffusion matrix and moment drifts"),
    "energy": (cmd_energy, "energy production rate and total"),
    "gamma-spectrum": (cmd_gamma_spectrum, "hydrogen gamma emission spectrum"),
    "dm-scan": (cmd_dm_scan, "dark-matter scenario grid"),
    "tables": (cmd_tables, "dark-matter parameter tables"),
}


# ---------------------------------------------------------------------------
# driver
# ---------------------------------------------------------------------------

def _threads(cfg, args):
    n = args.threads if args.threads is not None else int(cfg.run.get("threads", 1))
    if n < 1:
        raise ConfigError("threads must be >= 1")
    return n


def _echo(cfg):
    return json.loads(json.dumps(cfg.raw, default=str))


def build_parser():
    parser = argparse.ArgumentParser(
        prog="nwcollapse",
        description="Non-white-noise collapse-model kinetics: kernels, rates, Monte Carlo, "
                    "observables and dark-matter scans.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True, metavar="command")
    for name, (_, helptext) in COMMANDS.items():
        p = sub.add_parser(name, help=helptext, description=helptext)
        p.add_argument("--config", metavar="PATH", help="TOML configuration file")
        p.add_argument("--set", dest="overrides", action="append", default=[],
                       metavar="SECTION.KEY=VALUE", help="override a config value (repeatable)")
        p.add_argument("--out", metavar="DIR",
                       help=f"output directory (default: output.path, ${OUT_DIR_ENV}, "
                            "or ./nwcollapse-out)")
        p.add_argument("--seed", type=int, help="random seed (reduce-mc)")
        p.add_argument("--threads", type=int, help="worker threads; never changes results")
        p.add_argument("--format", choices=("csv", "json", "both"), help="output format")
        p.add_argument("--figures", action="store_true",
                       help="also render PNG figures next to the tables (needs matplotlib)")
    return parser


def run(command, config_path=None, overrides=(), out_dir=None, seed=None, threads=None,
        fmt=None, figures=False):
    """Run one command and return the manifest dictionary.

    Raises the package exceptions unchanged; :func:`main` maps them to exit
    codes.
    """
    args = argparse.Namespace(command=command, config=config_path, overrides=list(overrides),
                              out=out_dir, seed=seed, threads=threads, format=fmt,
                              figures=figures)
    return _run(args)


def _out_dir(args, cfg=None):
    """``--out``, then ``output.path``, then ``$NWCOLLAPSE_OUT``, then ``./nwcollapse-out``."""
    path = cfg.output.get("path") if cfg is not None else None
    return args.out or path or os.environ.get(OUT_DIR_ENV) or "nwcollapse-out"


def _run(args):
    t0 = time.perf_counter()
    if args.command not in COMMANDS:
        raise ConfigError(f"unknown command {args.command!r}")
    cfg = load_config(args.config, args.overrides, command=args.command)
    out_dir = _out_dir(args, cfg)
    fmt = args.format or cfg.output.get("format", "csv")
    figures = args.figures or bool(cfg.output.get("figures", False))
    args.figures = figures
    out = Output(out_dir, fmt, cfg.output.get("precision"))
    fn, _ = COMMANDS[args.command]
    extra = fn(cfg, out, args) or {}
    manifest = {
        "command": args.command,
        "status": "ok",
        "config_path": os.path.abspath(args.config) if args.config else None,
        "overrides": list(args.overrides),
        "config": _echo(cfg),
        "seed": args.seed if args.seed is not None else cfg.run.get("seed"),
        "threads": args.threads if args.threads is not None else cfg.run.get("threads", 1),
        "format": fmt,
        "out_dir": out_dir,
        "units": "natural units, powers of GeV (hbar = c = k_B = 1) unless a column "
                 "name carries a unit suffix",
        "versions": {"nwcollapse": __version__, "numpy": np.__version__,
                     "scipy": scipy.__version__, "python": platform.python_version()},
        "artifacts": out.hashes(),
        "wall_time_s": time.perf_counter() - t0,
    }
    manifest.update(extra)
    with open(os.path.join(out_dir, "manifest.json"), "w") as fh:
        json.dump(manifest, fh, indent=2, sort_keys=True, default=str)
        fh.write("\n")
    return manifest


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        manifest = _run(args)
    except CollapseError as exc:
        category = getattr(exc, "category", "error")
        record = {"status": "error", "category": category, "type": type(exc).__name__,
                  "message": str(exc)}
        for attr in ("min_eigenvalue", "trace", "exponent", "stderr", "abscissa"):
            if hasattr(exc, attr):
                record[attr] = _jsonable(getattr(exc, attr))
        print(json.dumps(record), file=sys.stderr)
        return EXIT_CODES.get(category, 1)
    except ValueError as exc:
        print(json.dumps({"status": "error", "category": "validation",
                          "type": type(exc).__name__, "message": str(exc)}), file=sys.stderr)
        return 2
    print(f"{args.command}: wrote {len(manifest['artifacts'])} file(s) to "
          f"{os.path.abspath(manifest['out_dir'])}")
    return 0


if __name__ == "__main__":
    sys.exit(main())
