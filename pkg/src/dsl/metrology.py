"""Fisher-information machinery for estimating the drive amplitude.

The steady-state derivative is obtained from a second linear solve with the
same factorization as the steady state, so no finite-difference step enters
production numbers.  QFI values are reported per subsystem ("whole", "field",
"qubit"), and the optimizers are deterministic grid searches followed by
golden-section refinement.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy.optimize import least_squares, minimize

from .errors import FitDiverged, FlatLandscape, NonConvergence
from .model import MAX_CUTOFF, ModelParams, steady_state
from .operators import TruncationSpec

log = logging.getLogger(__name__)

SUBSYSTEMS = ("whole", "field", "qubit")
EIG_FLOOR = 1e-12
PROB_FLOOR = 1e-14
GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class SpectralDecomposition:
    eigenvalues: np.ndarray  # descending
    eigenvectors: np.ndarray  # columns

    def reconstruct(self) -> np.ndarray:
        v = self.eigenvectors
        return (v * self.eigenvalues) @ v.conj().T


@dataclass(frozen=True)
class FisherPoint:
    params: ModelParams
    subsystem: str
    qfi: float

    @property
    def scaled_qfi(self) -> float:
        return self.params.g**2 * self.qfi


@dataclass(frozen=True)
class ScalingFit:
    A: float
    B: float
    C: float
    rms_residual: float
    n_min_used: float

    def __call__(self, N):
        return self.A * np.asarray(N, dtype=float) ** self.B + self.C


def spectral_decomposition(rho) -> SpectralDecomposition:
    w, v = np.linalg.eigh(np.asarray(rho))
    return SpectralDecomposition(w[::-1].copy(), v[:, ::-1].copy())


def partial_trace(rho, keep: str) -> np.ndarray:
    """Reduced state of a qubit (x) field operator; ``keep`` is "field" or "qubit"."""
    rho = np.asarray(rho)
    d = rho.shape[0]
    if rho.ndim != 2 or rho.shape != (d, d) or d % 2 or d < 4:
        raise ValueError(f"expected a composite (2*n_max)-square matrix, got shape {rho.shape}")
    t = rho.reshape(2, d // 2, 2, d // 2)
    if keep == "field":
        return np.einsum("ajak->jk", t)
    if keep == "qubit":
        return np.einsum("ajbj->ab", t)
    raise ValueError(f"keep must be 'field' or 'qubit', got {keep!r}")


def reduce(rho, subsystem: str) -> np.ndarray:
    return np.asarray(rho) if subsystem == "whole" else partial_trace(rho, subsystem)


def qfi(rho, drho, eig_floor: float = EIG_FLOOR) -> float:
    """Q = 2 sum_{mn} |<m|drho|n>|^2 / (l_m + l_n) over pairs with l_m + l_n > eig_floor."""
    w, v = np.linalg.eigh(np.asarray(rho))
    w = np.clip(w, 0.0, None)
    d = v.conj().T @ np.asarray(drho) @ v
    denom = w[:, None] + w[None, :]
    mask = denom > eig_floor
    num = np.abs(d) ** 2
    skipped = float(num[~mask].sum())
    if skipped > 0:
        log.debug("qfi: skipped %d eigenpairs carrying |drho|^2 mass %.3e", int((~mask).sum()), skipped)
    return float(2.0 * np.sum(num[mask] / denom[mask]))


def cfi_discrete(probs, dprobs, floor: float = PROB_FLOOR) -> float:
    """Classical Fisher information sum_k (dp_k)^2 / p_k, skipping p_k < floor."""
    p = np.asarray(probs, dtype=float)
    dp = np.asarray(dprobs, dtype=float)
    if p.shape != dp.shape:
        raise ValueError(f"probs and dprobs differ in shape: {p.shape} vs {dp.shape}")
    keep = p >= floor
    return float(np.sum(dp[keep] ** 2 / p[keep]))


def rho_derivative(params: ModelParams, trunc: TruncationSpec, *, max_cutoff: int = MAX_CUTOFF) -> np.ndarray:
    """d rho_ss / d(drive) on the composite space (Hermitian, traceless)."""
    return steady_state(params, trunc, derivative=True, max_cutoff=max_cutoff).drho


@lru_cache(maxsize=4096)
def fisher_triplet(params: ModelParams, trunc: TruncationSpec, max_cutoff: int = MAX_CUTOFF) -> dict:
    """QFI of the whole state and of both reduced states, from one solve.

    Also returns the cutoff and residual so sweeps can record provenance.
    """
    res = steady_state(params, trunc, derivative=True, max_cutoff=max_cutoff)
    out = {s: qfi(reduce(res.rho, s), reduce(res.drho, s)) for s in SUBSYSTEMS}
    out["cutoff_used"] = res.cutoff_used
    out["residual"] = res.residual
    return out


def fisher_point(params: ModelParams, trunc: TruncationSpec, subsystem: str = "whole") -> FisherPoint:
    if subsystem not in SUBSYSTEMS:
        raise ValueError(f"unknown subsystem {subsystem!r}")
    return FisherPoint(params, subsystem, fisher_triplet(params, trunc)[subsystem])


def golden_maximize(f, lo: float, hi: float, tol: float = 1e-5, max_iter: int = 200):
    """Maximize a unimodal scalar function on [lo, hi]; returns (x, f(x))."""
    a, b = float(lo), float(hi)
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc >= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (c, fc) if fc >= fd else (d, fd)


def _scan(f, points):
    """Evaluate ``f`` on grid points; points past the cutoff cap become -inf."""
    out, first_error = [], None
    for p in points:
        try:
            out.append(f(*p) if isinstance(p, tuple) else f(p))
        except NonConvergence as exc:
            out.append(-np.inf)
            first_error = first_error or exc
    return np.array(out, dtype=float), first_error


def _check_scan(values, error) -> None:
    """Reject a scan whose best point borders (or is) an unconverged one."""
    flat = values.reshape(-1)
    if not np.isfinite(flat).any():
        raise error
    if error is None:
        return
    idx = np.unravel_index(int(np.argmax(values)), values.shape)
    for axis in range(values.ndim):
        for step in (-1, 1):
            j = list(idx)
            j[axis] += step
            if 0 <= j[axis] < values.shape[axis] and not np.isfinite(values[tuple(j)]):
                raise NonConvergence(f"grid maximum borders an unconverged point: {error}")
    log.info("skipped unconverged grid points away from the maximum: %s", error)


def _check_flat(values) -> None:
    values = np.asarray(values, dtype=float)
    values = values[np.isfinite(values)]
    vmax, vmin = values.max(), values.min()
    if vmax <= 0 or (vmin > 0 and vmax / vmin < 1 + 1e-6):
        raise FlatLandscape(f"objective ratio max/min = {vmax / vmin if vmin > 0 else np.inf:.8g}")


def _refine_1d(f, grid, values, tol):
    """Golden-section refinement around the grid argmax (first index wins ties)."""
    i = int(np.argmax(values))
    best = (float(grid[i]), float(values[i]))
    if len(grid) < 2:
        return best
    lo = grid[max(i - 1, 0)]
    hi = grid[min(i + 1, len(grid) - 1)]
    x, fx = golden_maximize(f, lo, hi, tol=tol)
    return (x, fx) if fx > best[1] else best


DEFAULT_DRIVE_GRID = np.linspace(0.0, 0.8, 33)
DEFAULT_DETUNING_GRID = np.linspace(-1.0, 1.0, 21)


def optimize_drive(
    params: ModelParams,
    trunc: TruncationSpec,
    subsystem: str = "whole",
    grid=None,
    tol: float = 1e-4,
    max_cutoff: int = MAX_CUTOFF,
) -> tuple[float, float]:
    """Drive maximizing the QFI of ``subsystem`` at fixed g, kappa, detuning.

    ``grid`` is in units of g (drive/g values inside [0, 0.8]).  Returns
    ``(drive*, qfi*)`` with ``drive*`` in absolute units.
    """
    grid = DEFAULT_DRIVE_GRID if grid is None else np.asarray(grid, dtype=float)
    if grid.size == 0 or grid.min() < 0 or grid.max() > 0.8 + 1e-12:
        raise ValueError("drive grid must be non-empty and inside [0, 0.8] (units of g)")
    g = params.g

    def f(ratio):
        return fisher_triplet(params.with_drive(ratio * g), trunc, max_cutoff)[subsystem]

    values, error = _scan(f, grid)
    _check_scan(values, error)
    _check_flat(values)
    r, q = _refine_1d(f, grid, values, tol)
    return r * g, q


def optimize_drive_detuning(
    params: ModelParams,
    trunc: TruncationSpec,
    subsystem: str = "whole",
    detuning_grid=None,
    drive_grid=None,
    rounds: int = 3,
    tol: float = 1e-4,
    max_cutoff: int = MAX_CUTOFF,
) -> tuple[tuple[float, float], float]:
    """Joint maximizer of the QFI over (detuning, drive).

    Grids are in units of g.  The best grid point seeds a bounded Nelder-Mead
    search whose first simplex spans one grid step along each axis; the search
    is restarted from its result up to ``rounds`` times with the simplex
    halved each time, stopping early once a restart gains nothing.  Grid ties
    (within relative 1e-9, so mirror-image detunings count as tied) go to smaller |detuning|, then smaller drive, then negative detuning.
    Returns ``((detuning*, drive*), qfi*)`` in absolute units.
    """
    dgrid = DEFAULT_DETUNING_GRID if detuning_grid is None else np.asarray(detuning_grid, dtype=float)
    egrid = DEFAULT_DRIVE_GRID if drive_grid is None else np.asarray(drive_grid, dtype=float)
    if dgrid.size == 0 or np.abs(dgrid).max() > 1 + 1e-12:
        raise ValueError("detuning grid must be non-empty and inside [-1, 1] (units of g)")
    g = params.g
    if dgrid.size == 1:
        p0 = params.with_detuning(dgrid[0] * g)
        drive, q = optimize_drive(p0, trunc, subsystem, egrid, tol, max_cutoff)
        return (p0.detuning, drive), q
    if egrid.size == 0 or egrid.min() < 0 or egrid.max() > 0.8 + 1e-12:
        raise ValueError("drive grid must be non-empty and inside [0, 0.8] (units of g)")

    def f(delta, ratio):
        return fisher_triplet(ModelParams(g, params.kappa, ratio * g, delta * g), trunc, max_cutoff)[subsystem]

    flat, error = _scan(f, [(dl, e) for dl in dgrid for e in egrid])
    table = flat.reshape(dgrid.size, egrid.size)
    _check_scan(table, error)
    _check_flat(table)
    qmax = table.max()
    ties = [(abs(dl), e, dl) for i, dl in enumerate(dgrid) for j, e in enumerate(egrid) if table[i, j] >= qmax * (1 - 1e-9)]
    _, e_best, d_best = min(ties)

    def neg(x):
        try:
            return -f(x[0], x[1])
        except NonConvergence:
            return np.inf

    step = np.array([
        np.min(np.diff(np.sort(dgrid))),
        np.min(np.diff(np.sort(egrid))) if egrid.size > 1 else 0.05,
    ])
    best_x, best_q = np.array([d_best, e_best]), float(qmax)
    for _ in range(rounds):
        simplex = np.array([best_x, best_x + [step[0], 0.0], best_x + [0.0, step[1]]])
        res = minimize(
            neg,
            best_x,
            method="Nelder-Mead",
            bounds=[(-1.0, 1.0), (0.0, 0.8)],
            options={"initial_simplex": simplex, "xatol": tol, "fatol": 1e-10 * best_q, "maxfev": 400},
        )
        if -res.fun <= best_q * (1 + 1e-10):
            break
        best_x, best_q = np.asarray(res.x, dtype=float), float(-res.fun)
        step = 0.5 * step
    return (float(best_x[0]) * g, float(best_x[1]) * g), best_q


def fit_scaling(points, n_min: float = 20.0, max_nfev: int = 20000) -> ScalingFit:
    """Least-squares fit of value = A N^B + C using only points with N > n_min.

    Values are divided by their largest magnitude before fitting, so scaling
    every value by c scales A and C by c and leaves B unchanged.
    """
    pts = np.array([(float(n), float(v)) for n, v in points if n > n_min])
    if len(pts) < 4:
        raise ValueError(f"need at least 4 points with N > {n_min}, got {len(pts)}")
    N, v = pts[:, 0], pts[:, 1]
    scale = np.abs(v).max() or 1.0
    y = v / scale

    shifted = y - y.min()
    use = shifted > 0
    if use.sum() >= 2:
        slope, intercept = np.polyfit(np.log(N[use]), np.log(shifted[use]), 1)
    else:
        slope, intercept = 1.0, 0.0

    # Variable projection: for fixed B the best (A, C) is a linear solve, so
    # only B is iterated.  This keeps (A, C) well determined even when they
    # are strongly correlated.
    def linear_part(b):
        basis = np.column_stack([N**b, np.ones_like(N)])
        coef, *_ = np.linalg.lstsq(basis, y, rcond=None)
        return basis, coef

    def resid(theta):
        basis, coef = linear_part(theta[0])
        return basis @ coef - y

    sol = least_squares(resid, x0=[slope], method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev)
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitDiverged(f"least squares stopped: {sol.message}")
    b0 = float(sol.x[0])
    _, (a0, c0) = linear_part(b0)

    # Polish all three with the analytic Jacobian; finite-difference
    # Jacobians limit B to about sqrt(eps).
    def full_resid(theta):
        a, b, c = theta
        return a * N**b + c - y

    def full_jac(theta):
        a, b, _ = theta
        nb = N**b
        return np.column_stack([nb, a * nb * np.log(N), np.ones_like(N)])

    sol = least_squares(
        full_resid, x0=[a0, b0, c0], jac=full_jac, method="lm", xtol=1e-15, ftol=1e-15, gtol=1e-15, max_nfev=max_nfev
    )
    if sol.status <= 0 or not np.all(np.isfinite(sol.x)):
        raise FitDiverged(f"least squares stopped: {sol.message}")
    # The cost-based stopping rule leaves parameters accurate only to about
    # sqrt(ftol); a few Gauss-Newton steps settle them to rounding level.
    theta = sol.x.copy()
    for _ in range(50):
        step, *_ = np.linalg.lstsq(full_jac(theta), -full_resid(theta), rcond=None)
        if not np.all(np.isfinite(step)):
            break
        theta = theta + step
        if np.all(np.abs(step) <= 1e-14 * np.maximum(np.abs(theta), 1e-300)):
            break
    if np.sum(full_resid(theta) ** 2) > np.sum(full_resid(sol.x) ** 2) * (1 + 1e-12):
        theta = sol.x
    a, b, c = (float(t) for t in theta)
    rms = float(np.sqrt(np.mean((a * N**b + c - y) ** 2)) * scale)
    return ScalingFit(float(a * scale), float(b), float(c * scale), rms, float(n_min))
