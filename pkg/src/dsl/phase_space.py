"""Field phase-space functions and the homodyne / heterodyne Fisher information.

Quadratures are ``x = (a + a^dag) / sqrt(2)`` and, for homodyne angle phi,
``X_phi = (a e^{-i phi} + a^dag e^{i phi}) / sqrt(2)``.  With that convention
``<n|X_phi = x> = e^{i n phi} psi_n(x)`` and

    p_phi(x) = sum_{nm} rho_nm e^{-i (n - m) phi} psi_n(x) psi_m(x),

so a coherent state |alpha> has quadrature mean sqrt(2) |alpha| cos(arg alpha - phi).
The Wigner function and the heterodyne (Husimi) density use the same x, p axes;
the coherent state |alpha> peaks at (sqrt(2) Re alpha, sqrt(2) Im alpha) in W
and at Upsilon = alpha in the Husimi density.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.integrate import trapezoid

from .metrology import PROB_FLOOR, _check_flat, fisher_triplet, golden_maximize, partial_trace
from .model import MAX_CUTOFF, ModelParams, steady_state
from .operators import TruncationSpec

X_GUARD = 37.0  # psi_0 underflows beyond this
N_GUARD = 1200
DEFAULT_POINTS = 801
DEFAULT_POINTS_2D = 201


@dataclass(frozen=True)
class PhaseSpaceGrid:
    x_min: float
    x_max: float
    points: int

    def __post_init__(self):
        if self.points < 2 or not self.x_max > self.x_min:
            raise ValueError("grid needs points >= 2 and x_max > x_min")

    @property
    def spacing(self) -> float:
        return (self.x_max - self.x_min) / (self.points - 1)

    @property
    def axis(self) -> np.ndarray:
        return np.linspace(self.x_min, self.x_max, self.points)

    def refined(self) -> "PhaseSpaceGrid":
        return PhaseSpaceGrid(self.x_min, self.x_max, 2 * self.points - 1)


@dataclass(frozen=True, eq=False)
class QuadratureDistribution:
    angle: float
    grid: np.ndarray
    density: np.ndarray
    tail_mass: float
    evaluator: Callable | None = field(default=None, repr=False)

    def __call__(self, x) -> np.ndarray:
        """Density at arbitrary points (exact when built from a state)."""
        x = np.asarray(x, dtype=float)
        if self.evaluator is not None:
            return self.evaluator(x)
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)

    @classmethod
    def from_function(cls, pdf: Callable, grid, angle: float = 0.0) -> "QuadratureDistribution":
        grid = np.asarray(grid, dtype=float)
        dens = np.clip(np.asarray(pdf(grid), dtype=float), 0.0, None)
        return cls(angle, grid, dens, float(1.0 - trapezoid(dens, grid)), pdf)


def hermite_functions(n: int, x) -> np.ndarray:
    """Normalized oscillator eigenfunctions psi_0..psi_{n-1} at x, shape (n, len(x)).

    psi_{k+1} = sqrt(2/(k+1)) x psi_k - sqrt(k/(k+1)) psi_{k-1}.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    if n > N_GUARD:
        raise OverflowError(f"Fock dimension {n} beyond the stable recurrence range ({N_GUARD})")
    if x.size and np.abs(x).max() > X_GUARD:
        raise OverflowError(f"|x| = {np.abs(x).max():.3g} beyond the stable recurrence range ({X_GUARD})")
    psi = np.empty((n, x.size))
    psi[0] = math.pi**-0.25 * np.exp(-0.5 * x * x)
    if n > 1:
        psi[1] = math.sqrt(2.0) * x * psi[0]
    for k in range(1, n - 1):
        psi[k + 1] = math.sqrt(2.0 / (k + 1)) * x * psi[k] - math.sqrt(k / (k + 1)) * psi[k - 1]
    return psi


def field_moments(rho_field) -> tuple[complex, float]:
    """(<a>, <a^dag a>) of a field state."""
    rho = np.asarray(rho_field)
    n = rho.shape[0]
    k = np.arange(1, n)
    mean_a = complex(np.sum(np.sqrt(k) * np.diagonal(rho, 1)))
    nbar = float(np.real(np.sum(np.arange(n) * np.diagonal(rho))))
    return mean_a, nbar


def auto_half_width(rho_field, pad: float = 8.0) -> float:
    """Half-width in x covering every quadrature of the state.

    Any quadrature variance is at most 2 (<n> - |<a>|^2) + 1/2, and every
    quadrature mean is at most sqrt(2) |<a>| in magnitude.
    """
    mean_a, nbar = field_moments(rho_field)
    spread = math.sqrt(max(2.0 * (nbar - abs(mean_a) ** 2), 0.0) + 0.5)
    return min(math.sqrt(2.0) * abs(mean_a) + pad * spread, X_GUARD)


def auto_grid(rho_field, points: int = DEFAULT_POINTS) -> PhaseSpaceGrid:
    half = auto_half_width(rho_field)
    return PhaseSpaceGrid(-half, half, points)


def _as_axis(grid) -> np.ndarray:
    return grid.axis if isinstance(grid, PhaseSpaceGrid) else np.asarray(grid, dtype=float)


def _phase_matrix(n: int, angle: float) -> np.ndarray:
    k = np.arange(n)
    return np.exp(-1j * angle * (k[:, None] - k[None, :]))


def _quadrature_values(op, angle: float, psi: np.ndarray) -> np.ndarray:
    """sum_{nm} op_nm e^{-i(n-m) phi} psi_n psi_m for a Hermitian op; real part."""
    m = np.asarray(op) * _phase_matrix(op.shape[0], angle)
    return np.einsum("nx,nx->x", psi, (m @ psi).real)


def quadrature_values(op, angle: float, x) -> np.ndarray:
    op = np.asarray(op)
    psi = hermite_functions(op.shape[0], x)
    return _quadrature_values(op, angle, psi)


def quadrature_pdf(rho_field, angle: float, grid) -> QuadratureDistribution:
    """Homodyne outcome density p(X_phi = x) of a field state."""
    rho = np.asarray(rho_field)
    x = _as_axis(grid)

    def evaluate(pts):
        return np.clip(quadrature_values(rho, angle, pts), 0.0, None)

    raw = quadrature_values(rho, angle, x)
    if raw.min(initial=0.0) < -1e-10:
        raise ValueError(f"quadrature density is negative ({raw.min():.3e}); not a valid state")
    dens = np.clip(raw, 0.0, None)
    return QuadratureDistribution(float(angle), x, dens, float(1.0 - trapezoid(dens, x)), evaluate)


def homodyne_cfi_of(rho_field, drho_field, angle: float, x, psi=None) -> float:
    """Integral of (dp)^2 / p over the quadrature grid for one angle."""
    x = _as_axis(x)
    if psi is None:
        psi = hermite_functions(np.asarray(rho_field).shape[0], x)
    p = _quadrature_values(rho_field, angle, psi)
    dp = _quadrature_values(drho_field, angle, psi)
    keep = p >= PROB_FLOOR
    integrand = np.zeros_like(p)
    integrand[keep] = dp[keep] ** 2 / p[keep]
    return float(trapezoid(integrand, x))


@lru_cache(maxsize=32)
def solved_field(params: ModelParams, trunc: TruncationSpec, max_cutoff: int = MAX_CUTOFF):
    """Reduced field state and its drive derivative at the steady state."""
    res = steady_state(params, trunc, derivative=True, max_cutoff=max_cutoff)
    return partial_trace(res.rho, "field"), partial_trace(res.drho, "field")


def cfi_homodyne(params: ModelParams, trunc: TruncationSpec, angle: float, grid=None, max_cutoff: int = MAX_CUTOFF) -> float:
    rho_f, drho_f = solved_field(params, trunc, max_cutoff)
    x = auto_grid(rho_f).axis if grid is None else _as_axis(grid)
    return homodyne_cfi_of(rho_f, drho_f, angle, x)


def optimize_angle_of(rho_field, drho_field, angle_grid=None, x=None, tol: float = 1e-6):
    """(phi*, F(phi*)) for given field state and derivative; phi* in [0, pi)."""
    angles = np.linspace(0.0, math.pi, 64, endpoint=False) if angle_grid is None else np.asarray(angle_grid)
    x = auto_grid(rho_field).axis if x is None else _as_axis(x)
    psi = hermite_functions(np.asarray(rho_field).shape[0], x)

    def f(phi):
        return homodyne_cfi_of(rho_field, drho_field, phi, x, psi)

    values = np.array([f(a) for a in angles])
    _check_flat(values)
    i = int(np.argmax(values))
    step = (angles[1] - angles[0]) if angles.size > 1 else math.pi
    phi, val = golden_maximize(f, angles[i] - step, angles[i] + step, tol=tol)
    if val < values[i]:
        phi, val = angles[i], values[i]
    return float(phi % math.pi), float(val)


def optimize_homodyne_angle(
    params: ModelParams, trunc: TruncationSpec, angle_grid=None, grid=None, max_cutoff: int = MAX_CUTOFF
):
    """Homodyne angle in [0, pi) maximizing the classical Fisher information."""
    rho_f, drho_f = solved_field(params, trunc, max_cutoff)
    return optimize_angle_of(rho_f, drho_f, angle_grid, grid)


def wigner(rho_field, grid, p_grid=None) -> np.ndarray:
    """Wigner function W[i, j] = W(x_i, p_j) of a field state.

    Evaluated from the position representation,
    W(x, p) = (1/pi) int <x+y|rho|x-y> exp(-2ipy) dy, with the oscillator
    eigenfunctions from their stable recurrence.  The integrand is entire and
    decays like a Gaussian, so the trapezoid rule on a y grid finer than its
    highest wavenumber converges geometrically.  (The Fock-basis Laguerre
    recursion cancels catastrophically once |x + ip| and the cutoff are large.)
    """
    rho = np.asarray(rho_field)
    n = rho.shape[0]
    xs = _as_axis(grid)
    ps = xs if p_grid is None else _as_axis(p_grid)
    k_max = math.sqrt(2.0 * n + 1.0)
    # |<u|m>| is below 1e-17 once |u| > k_max + 9
    reach = min(k_max + 9.0, X_GUARD)
    dy = math.pi / (2.0 * (2.0 * k_max + 2.0 * np.abs(ps).max() + 1.0))
    y = np.arange(0.0, 2.0 * reach + dy, dy)
    wy = np.full(y.size, 2.0 * dy)
    wy[0] = dy  # the integrand at -y is the conjugate of that at y
    phase = 2.0 * np.outer(y, ps)
    cos_t, sin_t = np.cos(phase) * wy[:, None], np.sin(phase) * wy[:, None]
    out = np.empty((xs.size, ps.size))
    for i, x0 in enumerate(xs):
        k = _position_kernel(rho, x0 + y, x0 - y, reach)
        out[i] = (k.real @ cos_t + k.imag @ sin_t) / math.pi
    return out


def _position_kernel(rho: np.ndarray, u: np.ndarray, v: np.ndarray, reach: float) -> np.ndarray:
    """<u_k|rho|v_k> for paired points, zero where either point is out of reach."""
    n = rho.shape[0]
    keep = (np.abs(u) <= reach) & (np.abs(v) <= reach)
    k = np.zeros(u.size, dtype=complex)
    if keep.any():
        pu = hermite_functions(n, u[keep])
        pv = hermite_functions(n, v[keep])
        k[keep] = np.einsum("nk,nk->k", pu, rho @ pv)
    return k


def wigner_integral(W: np.ndarray, grid, p_grid=None) -> float:
    xs = _as_axis(grid)
    ps = xs if p_grid is None else _as_axis(p_grid)
    return float(trapezoid(trapezoid(W, ps, axis=1), xs))


def coherent_coefficients(beta, n: int) -> np.ndarray:
    """<beta|k> for k < n at each point beta, shape (len(beta), n)."""
    beta = np.atleast_1d(np.asarray(beta, dtype=complex))
    if beta.size and np.abs(beta).max() > X_GUARD:
        raise OverflowError("coherent amplitude beyond the stable recurrence range")
    c = np.empty((beta.size, n), dtype=complex)
    c[:, 0] = np.exp(-0.5 * np.abs(beta) ** 2)
    bc = np.conj(beta)
    for k in range(1, n):
        c[:, k] = c[:, k - 1] * bc / math.sqrt(k)
    return c


def husimi_values(op, beta) -> np.ndarray:
    """(1/pi) <beta|op|beta> for each beta."""
    op = np.asarray(op)
    c = coherent_coefficients(beta, op.shape[0])
    return np.real(np.einsum("bn,bn->b", c @ op, c.conj())) / math.pi


def auto_grid_2d(rho_field, points: int = DEFAULT_POINTS_2D, pad: float = 6.0) -> PhaseSpaceGrid:
    """Square grid in Re/Im Upsilon covering the Husimi density of the state."""
    mean_a, nbar = field_moments(rho_field)
    half = min(abs(mean_a) + pad * math.sqrt(max(nbar - abs(mean_a) ** 2, 0.0) + 1.0), X_GUARD)
    return PhaseSpaceGrid(-half, half, points)


def heterodyne_pdf(rho_field, grid2d, im_grid=None) -> np.ndarray:
    """Husimi density p[i, j] at Upsilon = u_i + i v_j."""
    us = _as_axis(grid2d)
    vs = us if im_grid is None else _as_axis(im_grid)
    U, V = np.meshgrid(us, vs, indexing="ij")
    beta = (U + 1j * V).ravel()
    out = np.empty(beta.size)
    chunk = 16384
    for s in range(0, beta.size, chunk):
        out[s : s + chunk] = husimi_values(rho_field, beta[s : s + chunk])
    return np.clip(out, 0.0, None).reshape(U.shape)


def heterodyne_cfi_of(rho_field, drho_field, grid2d) -> float:
    us = _as_axis(grid2d)
    U, V = np.meshgrid(us, us, indexing="ij")
    beta = (U + 1j * V).ravel()
    n = np.asarray(rho_field).shape[0]
    integrand = np.empty(beta.size)
    chunk = 16384
    for s in range(0, beta.size, chunk):
        c = coherent_coefficients(beta[s : s + chunk], n)
        p = np.real(np.einsum("bn,bn->b", c @ rho_field, c.conj())) / math.pi
        dp = np.real(np.einsum("bn,bn->b", c @ drho_field, c.conj())) / math.pi
        part = np.zeros_like(p)
        keep = p >= PROB_FLOOR
        part[keep] = dp[keep] ** 2 / p[keep]
        integrand[s : s + chunk] = part
    integrand = integrand.reshape(U.shape)
    return float(trapezoid(trapezoid(integrand, us, axis=1), us))


def cfi_heterodyne(params: ModelParams, trunc: TruncationSpec, grid2d=None, max_cutoff: int = MAX_CUTOFF) -> float:
    rho_f, drho_f = solved_field(params, trunc, max_cutoff)
    grid2d = auto_grid_2d(rho_f) if grid2d is None else grid2d
    return heterodyne_cfi_of(rho_f, drho_f, grid2d)


def performance_ratio(
    params: ModelParams, trunc: TruncationSpec, scheme: str = "homodyne", max_cutoff: int = MAX_CUTOFF
) -> float:
    """Classical Fisher information of a field measurement over the whole-system QFI."""
    q_whole = fisher_triplet(params, trunc, max_cutoff)["whole"]
    if scheme == "homodyne":
        _, f = optimize_homodyne_angle(params, trunc, max_cutoff=max_cutoff)
    elif scheme == "heterodyne":
        f = cfi_heterodyne(params, trunc, max_cutoff=max_cutoff)
    else:
        raise ValueError(f"scheme must be 'homodyne' or 'heterodyne', got {scheme!r}")
    return f / q_whole
