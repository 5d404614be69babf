"""Collapse statistics from the exact linear-gauge solution.

In the linear gauge the state of a superposition of sharply localized
branches ``J`` evolves multiplicatively.  The branch probabilities are

    p_J(t) = p_J(0) exp(X_J - V_J / 2) / sum_K p_K(0) exp(X_K - V_K / 2),

where ``X_J = 2 sqrt(gamma) sum_i m_i Phi(r_i^J, t)`` is Gaussian under the
reference measure ``Q``.  Its covariance is ``Sigma = 4 gamma C`` with
``C_JK = 2 sum_ij m_i m_j I(r_i^J - r_j^K, t)``, and ``V_J = Sigma_JJ``.  The
physical measure is ``dP/dQ = w = sum_J p_J(0) exp(X_J - V_J / 2)``.

Two samplers are available:

``"tilted"``
    Draws directly from ``P``.  Pick a branch ``J`` with probability
    ``p_J(0)``, then draw ``X ~ N(Sigma e_J, Sigma)``.  Plain averages are
    physical expectations.
``"raw"``
    Draws ``X ~ N(0, Sigma)`` under ``Q`` and reweights every statistic by
    ``w``.  Simple, but its variance grows like ``exp(Gamma)``.

Everything is computed in the log domain.  Random numbers come from blocks
of fixed size, each with its own counter-based substream, so results do not
depend on the number of worker threads.
"""

from __future__ import annotations

import csv
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import cholesky, eigvalsh
from scipy.special import logsumexp

from .correlators import corr_F_diff, corr_I, corr_I_diff
from .errors import ConfigError, DivergentKernelError, DomainError, PSDError
from .quadrature import QuadratureSpec, integrate
from .rates import pair_distances

__all__ = [
    "EnsembleSpec", "TrajectoryBatch", "CovarianceMatrix", "covariance_matrix",
    "sample_reduction_ensemble", "branch_probabilities", "expected_p1p2_closed",
    "p1p2_upper_bound", "fp_diffusion_matrix", "moment_rhs",
]

PSD_TOLERANCE = 1e-10
MAX_JITTER = 1e-12


@dataclass(frozen=True)
class EnsembleSpec:
    """Monte Carlo run description.

    Parameters
    ----------
    n_traj : int
        Number of trajectories.
    seed : int
        64-bit seed; fixes every draw.
    output_times : sequence of float
        Strictly increasing, non-negative times.  The same normal draws are
        reused at every time (common random numbers).
    sampler : {"tilted", "raw"}
    block_size : int
        Trajectories per random-number substream.
    """

    n_traj: int
    seed: int
    output_times: tuple
    sampler: str = "tilted"
    block_size: int = 4096

    def __post_init__(self):
        times = tuple(float(t) for t in np.atleast_1d(self.output_times))
        if int(self.n_traj) <= 0:
            raise ConfigError("n_traj must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ConfigError("seed must fit in 64 bits")
        if not times or times[0] < 0 or any(b <= a for a, b in zip(times, times[1:])):
            raise ConfigError("output_times must be non-negative and strictly increasing")
        if not all(math.isfinite(t) for t in times):
            raise ConfigError("output_times must be finite")
        if self.sampler not in ("tilted", "raw"):
            raise ConfigError(f"unknown sampler {self.sampler!r}")
        if int(self.block_size) <= 0:
            raise ConfigError("block_size must be positive")
        object.__setattr__(self, "output_times", times)
        object.__setattr__(self, "n_traj", int(self.n_traj))
        object.__setattr__(self, "seed", int(self.seed))


@dataclass(frozen=True)
class CovarianceMatrix:
    """Covariance ``C_JK`` of the branch noise sums, with its spectrum check."""

    matrix: np.ndarray
    t: float
    min_eigenvalue: float
    trace: float

    def factor(self):
        """Lower Cholesky factor, with a small diagonal jitter if needed."""
        return _cholesky_with_jitter(self.matrix, self.t)


def _cholesky_with_jitter(a, t):
    n = a.shape[0]
    tr = float(np.trace(a))
    if tr == 0.0:
        return np.zeros_like(a)
    for rel in (0.0, 1e-14, 1e-13, MAX_JITTER):
        try:
            return cholesky(a + rel * tr * np.eye(n), lower=True)
        except np.linalg.LinAlgError:
            pass
    # Rank-deficient but valid: fall back to the symmetric square root.
    w, v = np.linalg.eigh(a)
    if w.min() < -PSD_TOLERANCE * tr:
        raise PSDError(f"covariance not positive semidefinite at t={t}",
                       min_eigenvalue=float(w.min()), trace=tr)
    return v * np.sqrt(np.clip(w, 0.0, None))


def covariance_matrix(model, config, t, spec=None, validate=True):
    """Covariance ``C_JK = 2 sum_ij m_i m_j I(r_i^J - r_j^K, t)`` between branches.

    All separations go through one vectorized kernel call, so the matrix is
    built from a single quadrature mesh.  ``I(r)`` is assembled as
    ``I(0) - Idiff(r)``.

    Raises
    ------
    PSDError
        If an eigenvalue is below ``-1e-10 * trace``.
    DivergentKernelError
        If ``I(0, t)`` is infinite for the model.

    Examples
    --------
    >>> from nwcollapse.correlators import WhiteCSL
    >>> from nwcollapse.rates import ParticleGroup, SuperpositionConfig
    >>> g = ParticleGroup.single(0.0, 1.0)
    >>> cfg = SuperpositionConfig((g, g.displaced([100.0, 0, 0])), (0.5, 0.5))
    >>> covariance_matrix(WhiteCSL(1.0, 1.0), cfg, 0.0).matrix
    array([[0., 0.],
           [0., 0.]])
    """
    t = float(t)
    if t < 0:
        raise DomainError("t must be non-negative")
    n = config.n_branches
    pos = [g.positions for g in config.groups]
    m = config.groups[0].couplings
    blocks = [pair_distances(pos[a], pos[b]) for a in range(n) for b in range(a, n)]
    flat = np.concatenate([d.ravel() for d in blocks])
    uniq, inv = np.unique(flat, return_inverse=True)
    if t == 0.0:
        c = np.zeros((n, n))
    else:
        i0 = float(corr_I(model, 0.0, t, spec))
        if not math.isfinite(i0):
            raise DivergentKernelError("I(0, t) diverges; branch covariance is undefined")
        idiff = np.atleast_1d(corr_I_diff(model, uniq, t, spec))[inv]
        ww = np.outer(m, m)
        c = np.empty((n, n))
        start = 0
        k = 0
        for a in range(n):
            for b in range(a, n):
                d = blocks[k]
                vals = idiff[start:start + d.size].reshape(d.shape)
                c[a, b] = c[b, a] = 2.0 * float(np.sum(ww * (i0 - vals)))
                start += d.size
                k += 1
    tr = float(np.trace(c))
    lam = float(eigvalsh(c)[0]) if n > 0 else 0.0
    if validate and tr > 0 and lam < -PSD_TOLERANCE * tr:
        raise PSDError(f"branch covariance not PSD for {type(model).__name__} at t={t}",
                       min_eigenvalue=lam, trace=tr)
    return CovarianceMatrix(c, t, lam, tr)


def branch_probabilities(log_p0, exponents):
    """Softmax ``p_J ∝ p_J(0) exp(y_J)`` in the log domain.

    Parameters
    ----------
    log_p0 : ndarray, shape (N,)
        Log of the initial probabilities (``-inf`` allowed).
    exponents : ndarray, shape (..., N)

    Returns
    -------
    p : ndarray, shape (..., N)
    log_norm : ndarray, shape (...)
        ``log sum_J p_J(0) exp(y_J)``.
    """
    z = np.asarray(exponents, dtype=float) + log_p0
    log_norm = logsumexp(z, axis=-1)
    with np.errstate(invalid="ignore"):
        p = np.exp(z - log_norm[..., None])
    p = np.where(np.isneginf(z), 0.0, p)
    return p, log_norm


@dataclass
class TrajectoryBatch:
    """Sampled branch probabilities and measure weights.

    Attributes
    ----------
    times : ndarray, shape (n_t,)
    probabilities : ndarray, shape (n_t, n_traj, N)
    log_weights : ndarray, shape (n_t, n_traj)
        ``log w`` with ``w = dP/dQ``.
    sampler : str
    initial : ndarray, shape (N,)
    seed : int
    metadata : dict
        Free-form echo of the run configuration.
    """

    times: np.ndarray
    probabilities: np.ndarray
    log_weights: np.ndarray
    sampler: str
    initial: np.ndarray
    seed: int
    metadata: dict = field(default_factory=dict)

    @property
    def n_traj(self):
        return self.probabilities.shape[1]

    @property
    def weights(self):
        return np.exp(self.log_weights)

    def expectation(self, values):
        """Physical-measure mean and standard error of per-trajectory values.

        Parameters
        ----------
        values : ndarray, shape (n_t, n_traj)
        """
        v = np.asarray(values, dtype=float)
        if self.sampler == "raw":
            v = v * self.weights
        n = v.shape[1]
        return v.mean(axis=1), v.std(axis=1, ddof=1) / math.sqrt(n)

    def mean_probabilities(self):
        """``E_P[p_J]`` and standard errors, each of shape (n_t, N)."""
        means, errs = zip(*(self.expectation(self.probabilities[:, :, j])
                            for j in range(self.probabilities.shape[2])))
        return np.stack(means, axis=1), np.stack(errs, axis=1)

    def pair_product(self, j=0, k=1):
        """``E_P[p_j p_k]`` with standard error."""
        return self.expectation(self.probabilities[:, :, j] * self.probabilities[:, :, k])

    def measure_normalization(self):
        """Estimate of ``E_Q[w]`` (should be 1) with standard error.

        Under the tilted sampler this is ``E_P[1/w]``.
        """
        n = self.n_traj
        if self.sampler == "raw":
            v = self.weights
        else:
            v = np.exp(-self.log_weights)
        return v.mean(axis=1), v.std(axis=1, ddof=1) / math.sqrt(n)

    def summary(self):
        """Ordered mapping ``name -> (mean, stderr)`` of the standard statistics."""
        out = {}
        mp, ep = self.mean_probabilities()
        for j in range(mp.shape[1]):
            out[f"p{j}"] = (mp[:, j], ep[:, j])
        nb = self.probabilities.shape[2]
        for j in range(nb):
            for k in range(j + 1, nb):
                out[f"p{j}p{k}"] = self.pair_product(j, k)
        out["norm_Q"] = self.measure_normalization()
        return out

    def summary_rows(self):
        """Rows ``(time, statistic, mean, stderr)`` in deterministic order."""
        rows = []
        summ = self.summary()
        for i, t in enumerate(self.times):
            for name, (mean, err) in summ.items():
                rows.append((float(t), name, float(mean[i]), float(err[i])))
        return rows

    def to_csv(self, path):
        """Write the summary as CSV with header ``time,statistic,mean,stderr``."""
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["time", "statistic", "mean", "stderr"])
            for t, name, mean, err in self.summary_rows():
                w.writerow([repr(t), name, repr(mean), repr(err)])

    def to_json(self, path=None, config=None):
        """Full summary with run echo; returns the dict and optionally writes it."""
        doc = {
            "seed": self.seed,
            "n_traj": self.n_traj,
            "sampler": self.sampler,
            "initial_probabilities": self.initial.tolist(),
            "times": self.times.tolist(),
            "statistics": {k: {"mean": m.tolist(), "stderr": e.tolist()}
                           for k, (m, e) in self.summary().items()},
            "metadata": self.metadata,
        }
        if config is not None:
            doc["config"] = config
        if path is not None:
            with open(path, "w") as fh:
                json.dump(doc, fh, indent=2, sort_keys=True)
        return doc


def _block_draws(seed, block, size, n_branches):
    ss = np.random.SeedSequence(seed, spawn_key=(block,))
    rng = np.random.Generator(np.random.Philox(ss))
    u = rng.random(size)
    z = rng.standard_normal((size, n_branches))
    return u, z


def sample_reduction_ensemble(model, config, spec, quad_spec=None, threads=1):
    """Monte Carlo ensemble of branch probabilities at the output times.

    Parameters
    ----------
    model : NoiseModel
    config : SuperpositionConfig
    spec : EnsembleSpec
    quad_spec : QuadratureSpec, optional
        Passed to the kernel evaluations.
    threads : int
        Worker threads.  Results are bit-identical for any value.

    Returns
    -------
    TrajectoryBatch
    """
    if threads < 1:
        raise ConfigError("threads must be >= 1")
    p0 = config.probabilities
    nb = config.n_branches
    with np.errstate(divide="ignore"):
        log_p0 = np.log(p0)
    cdf = np.cumsum(p0)
    cdf[-1] = 1.0
    sigmas = [4.0 * model.gamma * covariance_matrix(model, config, t, quad_spec).matrix
              for t in spec.output_times]
    factors = [_cholesky_with_jitter(s, t) for s, t in zip(sigmas, spec.output_times)]
    n_t = len(sigmas)
    probs = np.empty((n_t, spec.n_traj, nb))
    logw = np.empty((n_t, spec.n_traj))
    bs = spec.block_size
    n_blocks = -(-spec.n_traj // bs)

    def run(block):
        lo = block * bs
        hi = min(spec.n_traj, lo + bs)
        u, z = _block_draws(spec.seed, block, hi - lo, nb)
        branch = np.minimum(np.searchsorted(cdf, u, side="right"), nb - 1)
        for i, (sig, fac) in enumerate(zip(sigmas, factors)):
            x = z @ fac.T
            if spec.sampler == "tilted":
                x = x + sig[branch]
            p, lw = branch_probabilities(log_p0, x - 0.5 * np.diag(sig))
            probs[i, lo:hi] = p
            logw[i, lo:hi] = lw

    if threads == 1:
        for b in range(n_blocks):
            run(b)
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            list(ex.map(run, range(n_blocks)))
    return TrajectoryBatch(np.array(spec.output_times), probs, logw, spec.sampler,
                           p0.copy(), spec.seed,
                           metadata={"model": type(model).__name__, "block_size": bs})


def expected_p1p2_closed(gamma, p1, p2, spec=None):
    """Exact ``E[p1 p2](t)`` for two branches in terms of ``Gamma(t)``.

    Evaluates

        p1 p2 e^{-Gamma} / (2 sqrt(pi Gamma)) int ds e^{-s^2/(4 Gamma)} / (p1 e^s + p2 e^{-s})

    after the substitution ``s = 2 sqrt(Gamma) u``, with the denominator
    combined in the log domain.

    Examples
    --------
    >>> expected_p1p2_closed(0.0, 0.5, 0.5)
    0.25
    """
    gamma = float(gamma)
    if gamma < 0 or math.isnan(gamma):
        raise DomainError("Gamma must be non-negative")
    if p1 < 0 or p2 < 0 or abs(p1 + p2 - 1.0) > 1e-12:
        raise DomainError("p1 and p2 must be non-negative and sum to 1")
    if gamma == 0.0 or p1 == 0.0 or p2 == 0.0:
        return float(p1 * p2)
    if math.isinf(gamma):
        return 0.0
    g = math.sqrt(gamma)
    lp1, lp2 = math.log(p1), math.log(p2)

    def f(u):
        den = np.logaddexp(lp1 + 2 * g * u, lp2 - 2 * g * u)
        return np.exp(-u * u - den)

    kink = (lp2 - lp1) / (4 * g)
    lo, hi = min(-12.0, kink - 12.0), max(12.0, kink + 12.0)
    brk = [b for b in (kink - 1 / g, kink, kink + 1 / g, 0.0) if lo < b < hi]
    res = integrate(f, lo, hi, spec or QuadratureSpec(rel_tol=1e-13, abs_tol=0.0),
                    breakpoints=sorted(set(brk)))
    return float(p1 * p2 * math.exp(-gamma) * res.value / math.sqrt(math.pi))


def p1p2_upper_bound(gamma, p1, p2):
    """Bound ``p1 p2 sqrt(pi) e^{-Gamma} / (4 min(p1, p2) sqrt(Gamma))``."""
    if gamma <= 0:
        return math.inf
    mbar = min(p1, p2)
    if mbar == 0:
        return 0.0
    return p1 * p2 * math.sqrt(math.pi) * math.exp(-gamma) / (4 * mbar * math.sqrt(gamma))


def _overlap_matrix(model, config, t, spec):
    """``Phi_QS = -sum_ij m_i m_j Fdiff(r_i^Q - r_j^S, t)`` (``F(0)`` dropped)."""
    n = config.n_branches
    pos = [g.positions for g in config.groups]
    m = config.groups[0].couplings
    ww = np.outer(m, m)
    blocks = [pair_distances(pos[a], pos[b]) for a in range(n) for b in range(a, n)]
    flat = np.concatenate([d.ravel() for d in blocks])
    uniq, inv = np.unique(flat, return_inverse=True)
    fd = np.atleast_1d(corr_F_diff(model, uniq, t, spec))[inv]
    phi = np.empty((n, n))
    start = 0
    k = 0
    for a in range(n):
        for b in range(a, n):
            d = blocks[k]
            phi[a, b] = phi[b, a] = -float(np.sum(ww * fd[start:start + d.size].reshape(d.shape)))
            start += d.size
            k += 1
    return phi


def _probabilities(config, p):
    if p is None:
        return config.probabilities
    p = np.asarray(p, dtype=float)
    if p.shape != (config.n_branches,) or np.any(p < 0) or abs(p.sum() - 1) > 1e-10:
        raise DomainError("p must be a probability vector over the branches")
    return p


def fp_diffusion_matrix(model, config, t, p=None, spec=None):
    """Fokker-Planck diffusion matrix ``A_MT`` at probabilities ``p``.

    ``A = 4 gamma diag(p) (I - 1 p^T) Phi (I - p 1^T) diag(p)`` where
    ``Phi_QS = sum_ij m_i m_j F(r_i^Q - r_j^S, t)``.  Constant shifts of
    ``F`` cancel, so only the subtracted kernel is evaluated.

    Parameters
    ----------
    p : array_like, optional
        Probability point; defaults to the configuration's amplitudes.
    """
    p = _probabilities(config, p)
    phi = _overlap_matrix(model, config, t, spec)
    n = len(p)
    proj = np.eye(n) - np.outer(np.ones(n), p)
    inner = proj @ phi @ proj.T
    a = 4.0 * model.gamma * p[:, None] * inner * p[None, :]
    return 0.5 * (a + a.T)


def moment_rhs(model, config, t, M, L, p=None, spec=None):
    """Drift of ``E[delta_ML p_M - p_M p_L]`` evaluated at probabilities ``p``.

    Equals ``-(A_ML + A_LM)``; for two branches with ``M = L = 0`` it is
    ``-8 p1^2 p2^2 dGamma/dt``.
    """
    n = config.n_branches
    if not (0 <= M < n and 0 <= L < n):
        raise IndexError(f"branch index out of range for {n} branches")
    a = fp_diffusion_matrix(model, config, t, p, spec)
    return float(-(a[M, L] + a[L, M]))
