"""Driven-dissipative Jaynes-Cummings model: Hamiltonian, Liouvillian, steady state.

Units: hbar = 1 and every frequency is expressed in the same unit as ``g``.
Only dimensionless ratios (drive/g, detuning/g and N = (g / 2 kappa)^2) affect
the steady state, so sweeps fix ``g = 1`` and set ``kappa = 1 / (2 sqrt(N))``.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import lru_cache

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from . import operators as ops
from .errors import DomainError, NonConvergence, NonPhysicalState, SingularSystem, TruncationError
from .operators import TruncationSpec

log = logging.getLogger(__name__)

MAX_CUTOFF = 160
NEGATIVITY_TOL = 1e-9
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class ModelParams:
    """Physical parameters: coupling ``g``, field decay ``kappa``, drive amplitude, detuning."""

    g: float
    kappa: float
    drive: float = 0.0
    detuning: float = 0.0

    def __post_init__(self):
        if not self.kappa > 0:
            raise ValueError(f"kappa must be positive, got {self.kappa!r}")
        if self.g < 0:
            raise ValueError(f"g must be non-negative, got {self.g!r}")
        if self.drive < 0:
            raise ValueError(f"drive must be non-negative, got {self.drive!r}")
        for name in ("g", "kappa", "drive", "detuning"):
            object.__setattr__(self, name, float(getattr(self, name)))

    @classmethod
    def from_resource(cls, N: float, drive_ratio: float = 0.0, detuning_ratio: float = 0.0, g: float = 1.0):
        """Parameters at sensing resource ``N`` with drive and detuning given in units of ``g``."""
        if not N > 0:
            raise ValueError(f"N must be positive, got {N!r}")
        return cls(g=g, kappa=g / (2.0 * math.sqrt(N)), drive=drive_ratio * g, detuning=detuning_ratio * g)

    @classmethod
    def from_coupling_ratio(cls, g_over_kappa: float, drive_ratio: float = 0.0, detuning_ratio: float = 0.0):
        """Same as `from_resource` with N = (g/kappa)^2 / 4."""
        return cls.from_resource(0.25 * g_over_kappa**2, drive_ratio, detuning_ratio)

    @property
    def resource(self) -> float:
        """N = (g / 2 kappa)^2."""
        return (self.g / (2.0 * self.kappa)) ** 2

    @property
    def drive_ratio(self) -> float:
        return self.drive / self.g

    @property
    def detuning_ratio(self) -> float:
        return self.detuning / self.g

    def with_drive(self, drive: float) -> "ModelParams":
        return replace(self, drive=drive)

    def with_detuning(self, detuning: float) -> "ModelParams":
        return replace(self, detuning=detuning)

    def scaled(self, s: float) -> "ModelParams":
        return ModelParams(self.g * s, self.kappa * s, self.drive * s, self.detuning * s)


@dataclass(frozen=True, eq=False)
class SteadyStateResult:
    rho: np.ndarray
    residual: float
    tail_population: float
    cutoff_used: int
    drho: np.ndarray | None = None

    @property
    def n_max(self) -> int:
        return self.cutoff_used


def build_hamiltonian(params: ModelParams, trunc) -> sp.csr_matrix:
    """H = -detuning (a^dag a + s+ s-) + g (s+ a + s- a^dag) + drive (a + a^dag)."""
    c = ops.composite_operators(trunc)
    jc = c.sigma_plus @ c.a + c.sigma_minus @ c.a.conj().T
    quad = c.a + c.a.conj().T
    return (-params.detuning * c.excitations + params.g * jc + params.drive * quad).tocsr()


@lru_cache(maxsize=8)
def _liouvillian_terms(n_max: int):
    c = ops.composite_operators(n_max)
    jc = (c.sigma_plus @ c.a + c.sigma_minus @ c.a.conj().T).tocsr()
    quad = (c.a + c.a.conj().T).tocsr()
    return {
        "detuning": -ops.commutator_superop(c.excitations),
        "coupling": ops.commutator_superop(jc),
        "drive": ops.commutator_superop(quad),
        "decay": ops.dissipator(c.a),
    }


def drive_generator(trunc) -> sp.csc_matrix:
    """d L / d(drive): the superoperator of rho -> -i [a + a^dag, rho]."""
    return _liouvillian_terms(_cutoff(trunc))["drive"]


def _cutoff(trunc) -> int:
    return trunc.n_max if isinstance(trunc, TruncationSpec) else int(trunc)


def build_liouvillian(params: ModelParams, trunc) -> sp.csc_matrix:
    """Sparse generator L with d vec(rho)/dt = L vec(rho) (column stacking)."""
    n = _cutoff(trunc)
    if n < 2:
        raise TruncationError(f"n_max must be >= 2, got {n}")
    t = _liouvillian_terms(n)
    L = (
        params.detuning * t["detuning"]
        + params.g * t["coupling"]
        + params.drive * t["drive"]
        + params.kappa * t["decay"]
    ).tocsc()
    # trace preservation: vec(I)^dag L == 0
    leak = np.abs(ops.trace_row(2 * n) @ L).max(initial=0.0)
    if leak > 1e-10 * max(1.0, abs(L).max()):
        raise RuntimeError(f"Liouvillian is not trace preserving (leak {leak:.3e})")
    return L


def _field_populations(rho: np.ndarray) -> np.ndarray:
    n = rho.shape[0] // 2
    return np.real(np.diagonal(rho)).reshape(2, n).sum(axis=0)


def _repair_positivity(rho: np.ndarray) -> np.ndarray:
    w, v = np.linalg.eigh(rho)
    if w[0] < -NEGATIVITY_TOL:
        raise NonPhysicalState(f"steady state has eigenvalue {w[0]:.3e}")
    if w[0] >= 0:
        return rho
    w = np.clip(w, 0.0, None)
    rho = (v * w) @ v.conj().T
    return rho / np.trace(rho).real


@lru_cache(maxsize=16)
def _dissection_order(d: int, n: int) -> np.ndarray:
    """Geometric nested-dissection ordering of vec(rho) unknowns.

    Unknown ``k = j * d + i`` sits at grid point ``(i % n, j % n)`` (the
    Fock labels of row and column); the Liouvillian only couples neighbouring
    grid points, so bisecting the grid along alternating axes keeps the LU
    fill close to that of a 2D Laplacian.
    """
    k = np.arange(d * d)
    coords = (k % d % n, k // d % n)
    blocks = []

    def split(idx, box):
        (lo0, hi0), (lo1, hi1) = box
        if (hi0 - lo0) * (hi1 - lo1) <= 16:
            blocks.append(idx)
            return
        axis = 0 if hi0 - lo0 >= hi1 - lo1 else 1
        lo, hi = box[axis]
        mid = (lo + hi) // 2
        c = coords[axis][idx]
        left, right = list(box), list(box)
        left[axis], right[axis] = (lo, mid), (mid + 1, hi)
        split(idx[c < mid], left)
        split(idx[c > mid], right)
        blocks.append(idx[c == mid])

    split(k, [(0, n), (0, n)])
    return np.concatenate(blocks)


class _PermutedLU:
    """LU of ``A[p][:, p]`` solving systems in the original ordering."""

    def __init__(self, A: sp.csc_matrix, perm: np.ndarray):
        self.perm = perm
        self.lu = spla.splu(A[perm][:, perm].tocsc(), permc_spec="NATURAL", diag_pivot_thresh=0.1)

    def solve(self, b):
        x = np.empty_like(b)
        x[self.perm] = self.lu.solve(b[self.perm])
        return x


def _constrained_factor(L: sp.csc_matrix, d: int, n: int):
    """LU factors of L with its first row replaced by the trace functional."""
    keep = np.ones(d * d)
    keep[0] = 0.0
    diag = np.arange(0, d * d, d + 1)
    trace = sp.csr_matrix((np.ones(d), (np.zeros(d, dtype=int), diag)), shape=(d * d, d * d))
    A = (sp.diags(keep) @ L + trace).tocsr()
    try:
        return _PermutedLU(A, _dissection_order(d, n))
    except RuntimeError as exc:
        raise SingularSystem(str(exc)) from exc


def _null_state(L: sp.csc_matrix, generator: sp.csc_matrix, d: int, n: int, derivative: bool):
    lu = _constrained_factor(L, d, n)
    rhs = np.zeros(d * d, dtype=complex)
    rhs[0] = 1.0
    x = lu.solve(rhs)
    if not np.all(np.isfinite(x)):
        raise SingularSystem("non-finite steady-state solution")
    dx = None
    if derivative:
        b = -(generator @ x)
        b[0] = 0.0  # trace of the derivative vanishes
        dx = lu.solve(b)
    return x, dx


def _field_only_liouvillian(params: ModelParams, n: int):
    a = ops.annihilation(n)
    H = -params.detuning * ops.number(n) + params.drive * (a + a.conj().T)
    L = (ops.commutator_superop(H) + params.kappa * ops.dissipator(a)).tocsc()
    return L, ops.commutator_superop(a + a.conj().T)


def _hermitian(vec) -> np.ndarray:
    m = ops.devectorize(vec)
    return 0.5 * (m + m.conj().T)


def _solve_once(params: ModelParams, n: int, derivative: bool, tol: float):
    d = 2 * n
    L = build_liouvillian(params, n)
    if params.g == 0.0:
        # The qubit has no dynamics and its steady block is undetermined;
        # it is kept in |g>, the state it starts in.
        Lf, gen_f = _field_only_liouvillian(params, n)
        x, dx = _null_state(Lf, gen_f, n, n, derivative)
        ground = np.zeros((2, 2))
        ground[ops.GROUND, ops.GROUND] = 1.0
        raw = np.kron(ground, _hermitian(x))
        draw = None if dx is None else np.kron(ground, _hermitian(dx))
    else:
        x, dx = _null_state(L, drive_generator(n), d, n, derivative)
        raw = _hermitian(x)
        draw = None if dx is None else _hermitian(dx)

    rho = raw / np.trace(raw).real
    rho = _repair_positivity(rho)
    residual = float(np.linalg.norm(L @ ops.vectorize(rho)))
    scale = spla.norm(L)
    if residual > tol * scale:
        raise SingularSystem(f"residual {residual:.3e} exceeds {tol:g} * ||L|| = {tol * scale:.3e}")

    drho = None
    if draw is not None:
        drho = draw - np.trace(draw).real / d * np.eye(d)
    tail = float(max(_field_populations(rho)[-2:].sum(), 0.0))
    return SteadyStateResult(rho, residual, tail, n, drho)


def steady_state(
    params: ModelParams,
    trunc: TruncationSpec,
    *,
    derivative: bool = False,
    max_cutoff: int = MAX_CUTOFF,
    tol: float = RESIDUAL_TOL,
) -> SteadyStateResult:
    """Null state of the Liouvillian with unit trace.

    One row of L is replaced by the trace functional and the system is solved
    directly.  When more than ``trunc.tail_tol`` of the population sits in the
    top two Fock levels the cutoff grows by 50% and the solve is repeated, up
    to ``max_cutoff``.  With ``derivative=True`` the same factorization also
    gives d rho / d(drive) from ``L d_rho = -(dL/d drive) rho`` with zero trace.
    """
    n = trunc.n_max
    if n > max_cutoff:
        raise TruncationError(f"n_max={n} exceeds the cutoff cap {max_cutoff}")
    while True:
        result = _solve_once(params, n, derivative, tol)
        if result.tail_population <= trunc.tail_tol:
            return result
        if n >= max_cutoff:
            raise NonConvergence(
                f"tail population {result.tail_population:.3e} > {trunc.tail_tol:g} at cutoff cap {max_cutoff} "
                f"(N={params.resource:.4g}, drive/g={params.drive_ratio:.4g}, detuning/g={params.detuning_ratio:.4g})"
            )
        new_n = min(max_cutoff, int(math.ceil(1.5 * n)))
        log.debug("tail %.2e above %.1e at n_max=%d, retrying with %d", result.tail_population, trunc.tail_tol, n, new_n)
        n = new_n


def quasienergies(n: int, drive: float, g: float) -> tuple[float, float]:
    """Quasienergy doublet (+E, -E) of level n below the drive threshold 2*drive <= g."""
    if n < 1 or int(n) != n:
        raise DomainError(f"doublet index must be a positive integer, got {n!r}")
    if g <= 0 or drive < 0:
        raise DomainError("need g > 0 and drive >= 0")
    ratio = 2.0 * drive / g
    if ratio > 1.0 + 1e-12:
        raise DomainError(f"2*drive/g = {ratio:.6g} > 1: the quasienergy spectrum is continuous")
    e = math.sqrt(n) * g * max(0.0, 1.0 - ratio * ratio) ** 0.75
    return e, -e


def qubit_bloch(rho_qubit) -> tuple[float, float, float]:
    """Bloch components (<sx>, <sy>, <sz>) with sz = +1 on the excited state."""
    rho_qubit = np.asarray(rho_qubit)
    if rho_qubit.shape != (2, 2):
        raise ValueError(f"expected a 2x2 qubit state, got shape {rho_qubit.shape}")
    return tuple(
        float(np.real(np.trace(s.toarray() @ rho_qubit))) for s in (ops.SIGMA_X, ops.SIGMA_Y, ops.SIGMA_Z)
    )


def ground_state(trunc) -> np.ndarray:
    """|g, 0><g, 0| on the composite space."""
    n = _cutoff(trunc)
    rho = np.zeros((2 * n, 2 * n), dtype=complex)
    rho[ops.GROUND * n, ops.GROUND * n] = 1.0
    return rho


def coherent_amplitude(params: ModelParams) -> complex:
    """Steady field amplitude of the decoupled (g = 0) driven cavity."""
    return -1j * params.drive / (params.kappa - 1j * params.detuning)
