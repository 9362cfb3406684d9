"""Bayesian estimation of the drive from binned homodyne records.

Pipeline: the homodyne density at the chosen angle is integrated over
uniform bins of width W, records are multinomial draws from those bin
probabilities, and the posterior over a grid of candidate drives is
``prior * prod_m P_m(drive)^{C_m}`` evaluated in log space.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from functools import partial
from pathlib import Path

import numpy as np
from scipy.special import logsumexp

from .errors import AllZeroPosterior, EdgeMismatch, RangeTooNarrow
from .metrology import fisher_triplet, partial_trace
from .model import MAX_CUTOFF, ModelParams, steady_state
from .operators import TruncationSpec
from .parallel import derive_seed, pmap
from .phase_space import QuadratureDistribution, auto_grid, optimize_homodyne_angle, quadrature_pdf

DEFAULT_WIDTH = 0.1
DEFAULT_TAIL_TOL = 1e-6
LOG_FLOOR = 1e-300


@dataclass(frozen=True, eq=False)
class BinnedDistribution:
    edges: np.ndarray
    probs: np.ndarray

    @property
    def bin_width(self) -> float:
        return float(self.edges[1] - self.edges[0])

    @property
    def n_bins(self) -> int:
        return self.probs.size


@dataclass(frozen=True, eq=False)
class MeasurementRecord:
    edges: np.ndarray
    counts: np.ndarray
    shots: int
    seed: int | None = None

    def __post_init__(self):
        if self.counts.sum() != self.shots:
            raise ValueError(f"counts sum to {self.counts.sum()}, expected {self.shots}")


@dataclass(frozen=True, eq=False)
class Posterior:
    candidates: np.ndarray
    log_weights: np.ndarray  # normalized: logsumexp == 0

    @property
    def weights(self) -> np.ndarray:
        return np.exp(self.log_weights)

    @property
    def map_estimate(self) -> float:
        return float(self.candidates[int(np.argmax(self.log_weights))])

    @property
    def posterior_mean(self) -> float:
        return float(np.sum(self.weights * self.candidates))

    @property
    def posterior_variance(self) -> float:
        w = self.weights
        mean = np.sum(w * self.candidates)
        return float(max(np.sum(w * (self.candidates - mean) ** 2), 0.0))


def uniform_edges(lo: float, hi: float, width: float) -> np.ndarray:
    if not width > 0:
        raise ValueError(f"bin width must be positive, got {width}")
    m = int(round((hi - lo) / width))
    if m < 1:
        raise ValueError(f"range ({lo}, {hi}) holds no bin of width {width}")
    return lo + width * np.arange(m + 1)


def discretize_pdf(
    dist: QuadratureDistribution,
    width: float,
    range_: tuple[float, float],
    tail_tol: float = DEFAULT_TAIL_TOL,
    subdivisions: int = 16,
    check_mass: bool = True,
) -> BinnedDistribution:
    """Bin probabilities by composite Simpson integration over each bin."""
    if subdivisions % 2:
        raise ValueError("Simpson integration needs an even number of subdivisions")
    edges = uniform_edges(range_[0], range_[1], width)
    m = edges.size - 1
    h = width / subdivisions
    nodes = edges[:-1, None] + h * np.arange(subdivisions + 1)[None, :]
    f = np.asarray(dist(nodes.ravel()), dtype=float).reshape(nodes.shape)
    w = np.ones(subdivisions + 1)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    probs = np.clip(h / 3.0 * (f @ w), 0.0, None)
    if check_mass and probs.sum() < 1.0 - 10.0 * tail_tol:
        raise RangeTooNarrow(f"bins cover mass {probs.sum():.8f} < 1 - 10 * {tail_tol:g}")
    return BinnedDistribution(edges, probs[:m])


def covering_range(dist: QuadratureDistribution, width: float, mass: float = 1.0 - DEFAULT_TAIL_TOL):
    """Bin-aligned (lo, hi) leaving at most (1 - mass)/2 of probability in each tail."""
    x = dist.grid
    p = dist.density
    cdf = np.concatenate([[0.0], np.cumsum(0.5 * (p[1:] + p[:-1]) * np.diff(x))])
    cdf /= cdf[-1]
    tail = 0.5 * (1.0 - mass)
    lo = x[max(np.searchsorted(cdf, tail) - 1, 0)]
    hi = x[min(np.searchsorted(cdf, 1.0 - tail) + 1, x.size - 1)]
    return width * math.floor(lo / width), width * math.ceil(hi / width)


def sample_counts(binned: BinnedDistribution, shots: int, seed: int) -> MeasurementRecord:
    """Multinomial record of ``shots`` outcomes; deterministic for a given seed."""
    if shots < 0:
        raise ValueError("shots must be non-negative")
    p = binned.probs / binned.probs.sum()
    rng = np.random.default_rng(seed)
    counts = rng.multinomial(shots, p).astype(np.int64)
    return MeasurementRecord(binned.edges.copy(), counts, int(shots), int(seed))


def _check_edges(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape or not np.allclose(a, b, rtol=0.0, atol=1e-12):
        raise EdgeMismatch("model bins and record use different edges")


def log_likelihood(model_bins: BinnedDistribution, record: MeasurementRecord) -> float:
    """sum_m C_m log(max(P_m, 1e-300))."""
    _check_edges(model_bins.edges, record.edges)
    return float(np.sum(record.counts * np.log(np.maximum(model_bins.probs, LOG_FLOOR))))


@dataclass(frozen=True, eq=False)
class CandidateModel:
    """Bin probabilities for every candidate drive, sharing one set of edges."""

    candidates: np.ndarray
    edges: np.ndarray
    probs: np.ndarray  # shape (candidates, bins)
    angle: float

    def bins(self, i: int) -> BinnedDistribution:
        return BinnedDistribution(self.edges, self.probs[i])

    def log_likelihoods(self, record: MeasurementRecord) -> np.ndarray:
        _check_edges(self.edges, record.edges)
        return np.log(np.maximum(self.probs, LOG_FLOOR)) @ record.counts


def posterior(model: CandidateModel, record: MeasurementRecord, prior=None) -> Posterior:
    """Grid posterior; ``prior`` defaults to flat over the candidates."""
    loglik = model.log_likelihoods(record)
    if prior is None:
        logprior = np.zeros_like(loglik)
    else:
        prior = np.asarray(prior, dtype=float)
        with np.errstate(divide="ignore"):
            logprior = np.log(prior)
    lw = loglik + logprior
    if not np.any(np.isfinite(lw)):
        raise AllZeroPosterior("every candidate has zero posterior weight")
    lw = lw - logsumexp(lw)
    return Posterior(model.candidates.copy(), lw)


def field_distribution(
    params: ModelParams, trunc: TruncationSpec, angle: float, max_cutoff: int = MAX_CUTOFF
) -> QuadratureDistribution:
    rho_f = partial_trace(steady_state(params, trunc, max_cutoff=max_cutoff).rho, "field")
    return quadrature_pdf(rho_f, angle, auto_grid(rho_f))


def _candidate_probs(drive, params, trunc, angle, edges, subdivisions, max_cutoff):
    dist = field_distribution(params.with_drive(drive), trunc, angle, max_cutoff)
    lo, hi = edges[0], edges[-1]
    width = edges[1] - edges[0]
    return discretize_pdf(dist, width, (lo, hi), subdivisions=subdivisions, check_mass=False).probs


def default_candidates(drive: float, points: int = 201, span: float = 0.1) -> np.ndarray:
    """Odd-sized grid spanning +/- span around the operating drive (which is its midpoint)."""
    return np.linspace((1.0 - span) * drive, (1.0 + span) * drive, points)


def build_candidate_model(
    params: ModelParams,
    trunc: TruncationSpec,
    angle: float,
    candidates=None,
    width: float = DEFAULT_WIDTH,
    tail_tol: float = DEFAULT_TAIL_TOL,
    subdivisions: int = 16,
    workers: int = 1,
    max_cutoff: int = MAX_CUTOFF,
) -> CandidateModel:
    """Precompute bin probabilities for each candidate drive at fixed g, kappa, detuning.

    The bin range covers 1 - tail_tol of the mass at the grid midpoint and at
    both grid ends, so every candidate shares the same edges.
    """
    cands = default_candidates(params.drive) if candidates is None else np.asarray(candidates, dtype=float)
    probes = sorted({cands[0], cands[len(cands) // 2], cands[-1]})
    lo, hi = np.inf, -np.inf
    for drive in probes:
        dist = field_distribution(params.with_drive(drive), trunc, angle, max_cutoff)
        a, b = covering_range(dist, width, 1.0 - tail_tol)
        lo, hi = min(lo, a), max(hi, b)
    edges = uniform_edges(lo, hi, width)
    fn = partial(
        _candidate_probs,
        params=params,
        trunc=trunc,
        angle=angle,
        edges=edges,
        subdivisions=subdivisions,
        max_cutoff=max_cutoff,
    )
    probs = np.array(pmap(fn, cands, workers))
    mid = probs[len(cands) // 2].sum()
    if mid < 1.0 - 10.0 * tail_tol:
        raise RangeTooNarrow(f"bins cover mass {mid:.8f} at the grid midpoint")
    return CandidateModel(cands, edges, probs, float(angle))


@dataclass(frozen=True, eq=False)
class ExperimentSummary:
    true_drive: float
    angle: float
    shots: int
    estimates: np.ndarray
    seeds: np.ndarray
    q_whole: float
    g: float

    @property
    def variance(self) -> float:
        return float(np.var(self.estimates, ddof=1))

    @property
    def variance_stderr(self) -> float:
        """Standard error of the sample variance, sqrt(2 / (n - 1)) * variance, for Gaussian estimates."""
        return self.variance * math.sqrt(2.0 / (self.estimates.size - 1))

    @property
    def qcrb(self) -> float:
        """1 / (M g^2 Q_whole), in units of g^2 (variance of drive / g^2)."""
        return 1.0 / (self.shots * self.g**2 * self.q_whole)

    @property
    def scaled_variance(self) -> float:
        """Var[drive estimate] / g^2, comparable with `qcrb`."""
        return self.variance / self.g**2


def run_experiments(
    params: ModelParams,
    trunc: TruncationSpec,
    n_experiments: int = 100,
    shots: int = 1000,
    seed: int = 0,
    angle: float | None = None,
    model: CandidateModel | None = None,
    width: float = DEFAULT_WIDTH,
    workers: int = 1,
    max_cutoff: int = MAX_CUTOFF,
) -> ExperimentSummary:
    """Repeat sample -> posterior -> MAP at the true drive ``params.drive``."""
    if angle is None:
        angle = model.angle if model is not None else optimize_homodyne_angle(params, trunc, max_cutoff=max_cutoff)[0]
    if model is None:
        model = build_candidate_model(params, trunc, angle, width=width, workers=workers, max_cutoff=max_cutoff)
    i_true = int(np.argmin(np.abs(model.candidates - params.drive)))
    truth = model.bins(i_true)
    seeds = np.array([derive_seed(seed, i) for i in range(n_experiments)], dtype=np.uint64)
    estimates = np.array([posterior(model, sample_counts(truth, shots, int(s))).map_estimate for s in seeds])
    q_whole = fisher_triplet(params, trunc, max_cutoff)["whole"]
    return ExperimentSummary(float(params.drive), float(angle), shots, estimates, seeds, q_whole, params.g)


def write_record(path, record: MeasurementRecord) -> None:
    """CSV with one row per bin: lower edge, upper edge, count."""
    with open(Path(path), "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["lower", "upper", "count"])
        for lo, hi, c in zip(record.edges[:-1], record.edges[1:], record.counts):
            w.writerow([repr(float(lo)), repr(float(hi)), int(c)])


def read_record(path) -> MeasurementRecord:
    with open(Path(path), newline="") as fh:
        rows = list(csv.DictReader(fh))
    if not rows:
        raise ValueError(f"{path}: no bins")
    lower = np.array([float(r["lower"]) for r in rows])
    upper = np.array([float(r["upper"]) for r in rows])
    if not np.allclose(lower[1:], upper[:-1], rtol=0.0, atol=1e-12):
        raise ValueError(f"{path}: bins are not contiguous")
    counts = np.array([int(r["count"]) for r in rows], dtype=np.int64)
    edges = np.append(lower, upper[-1])
    return MeasurementRecord(edges, counts, int(counts.sum()))
