"""Operators and superoperators on the qubit (x) truncated-Fock space.

Conventions used everywhere in the package:

* composite ordering is ``|qubit> (x) |field>``, so composite index ``q * n_max + n``;
* qubit basis index 0 is the excited state ``|e>`` and index 1 the ground
  state ``|g>``, giving ``sigma_z = diag(+1, -1)`` and ``sigma_plus = |e><g|``;
* density matrices are vectorized by column stacking, so that
  ``vec(A @ rho @ B) == kron(B.T, A) @ vec(rho)``.  Every superoperator in the
  package is built from that identity.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import TruncationError

# Largest composite dimension `tensor` will build.
MAX_COMPOSITE_DIM = 4096


@dataclass(frozen=True)
class TruncationSpec:
    """Fock cutoff plus the population allowed in the top two Fock levels."""

    n_max: int
    tail_tol: float = 1e-8

    def __post_init__(self):
        if int(self.n_max) != self.n_max or self.n_max < 2:
            raise TruncationError(f"n_max must be an integer >= 2, got {self.n_max!r}")
        if not self.tail_tol > 0:
            raise TruncationError(f"tail_tol must be positive, got {self.tail_tol!r}")
        object.__setattr__(self, "n_max", int(self.n_max))

    @property
    def dim(self) -> int:
        return 2 * self.n_max

    def with_cutoff(self, n_max: int) -> "TruncationSpec":
        return TruncationSpec(n_max, self.tail_tol)


def _field_dim(trunc) -> int:
    n = trunc.n_max if isinstance(trunc, TruncationSpec) else trunc
    if int(n) != n or n < 2:
        raise TruncationError(f"field dimension must be >= 2, got {n!r}")
    return int(n)


# Qubit operators in the (|e>, |g>) basis.
SIGMA_PLUS = sp.csr_matrix(np.array([[0, 1], [0, 0]], dtype=complex))
SIGMA_MINUS = sp.csr_matrix(np.array([[0, 0], [1, 0]], dtype=complex))
SIGMA_X = sp.csr_matrix(np.array([[0, 1], [1, 0]], dtype=complex))
SIGMA_Y = sp.csr_matrix(np.array([[0, -1j], [1j, 0]], dtype=complex))
SIGMA_Z = sp.csr_matrix(np.array([[1, 0], [0, -1]], dtype=complex))
QUBIT_IDENTITY = sp.identity(2, dtype=complex, format="csr")

EXCITED = 0
GROUND = 1


def annihilation(trunc) -> sp.csr_matrix:
    """Truncated field lowering operator, ``a[n-1, n] = sqrt(n)``."""
    n = _field_dim(trunc)
    return sp.diags(np.sqrt(np.arange(1, n, dtype=float)), 1, shape=(n, n), format="csr", dtype=complex)


def creation(trunc) -> sp.csr_matrix:
    return annihilation(trunc).T.tocsr()


def number(trunc) -> sp.csr_matrix:
    n = _field_dim(trunc)
    return sp.diags(np.arange(n, dtype=float), 0, format="csr", dtype=complex)


def field_identity(trunc) -> sp.csr_matrix:
    return sp.identity(_field_dim(trunc), dtype=complex, format="csr")


def tensor(qubit_op, field_op) -> sp.csr_matrix:
    """Kronecker product with the qubit as the leading factor."""
    q = sp.csr_matrix(qubit_op)
    f = sp.csr_matrix(field_op)
    if q.shape != (2, 2):
        raise ValueError(f"left factor must be a 2x2 qubit operator, got shape {q.shape}")
    if f.shape[0] != f.shape[1]:
        raise ValueError(f"right factor must be square, got shape {f.shape}")
    if 2 * f.shape[0] > MAX_COMPOSITE_DIM:
        raise ValueError(f"composite dimension {2 * f.shape[0]} exceeds {MAX_COMPOSITE_DIM}")
    return sp.kron(q, f, format="csr")


@dataclass(frozen=True)
class CompositeOperators:
    """The composite-space operators entering the driven Jaynes-Cummings model."""

    a: sp.csr_matrix
    sigma_plus: sp.csr_matrix
    sigma_minus: sp.csr_matrix
    excitations: sp.csr_matrix  # a^dag a + sigma_plus sigma_minus
    identity: sp.csr_matrix


def composite_operators(trunc) -> CompositeOperators:
    n = _field_dim(trunc)
    a = tensor(QUBIT_IDENTITY, annihilation(n))
    splus = tensor(SIGMA_PLUS, field_identity(n))
    sminus = tensor(SIGMA_MINUS, field_identity(n))
    exc = (a.conj().T @ a + splus @ sminus).tocsr()
    return CompositeOperators(a, splus, sminus, exc, sp.identity(2 * n, dtype=complex, format="csr"))


def vectorize(rho) -> np.ndarray:
    """Column-stacked vector of a square matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2 or rho.shape[0] != rho.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    return rho.reshape(-1, order="F")


def devectorize(vec) -> np.ndarray:
    vec = np.asarray(vec)
    d = int(round(np.sqrt(vec.size)))
    if vec.ndim != 1 or d * d != vec.size:
        raise ValueError(f"vector length {vec.size} is not a perfect square")
    return vec.reshape((d, d), order="F")


def spre(op) -> sp.csc_matrix:
    """Superoperator of ``rho -> op @ rho``."""
    op = sp.csr_matrix(op)
    return sp.kron(sp.identity(op.shape[0], dtype=complex), op, format="csc")


def spost(op) -> sp.csc_matrix:
    """Superoperator of ``rho -> rho @ op``."""
    op = sp.csr_matrix(op)
    return sp.kron(op.T, sp.identity(op.shape[0], dtype=complex), format="csc")


def sprepost(left, right) -> sp.csc_matrix:
    """Superoperator of ``rho -> left @ rho @ right``."""
    return sp.kron(sp.csr_matrix(right).T, sp.csr_matrix(left), format="csc")


def commutator_superop(op) -> sp.csc_matrix:
    """Superoperator of ``rho -> -i [op, rho]``."""
    return (-1j * (spre(op) - spost(op))).tocsc()


def dissipator(c) -> sp.csc_matrix:
    """Superoperator of ``rho -> 2 c rho c^dag - rho c^dag c - c^dag c rho``."""
    c = sp.csr_matrix(c)
    cd = c.conj().T.tocsr()
    cdc = (cd @ c).tocsr()
    return (2 * sprepost(c, cd) - spost(cdc) - spre(cdc)).tocsc()


def trace_row(dim: int) -> np.ndarray:
    """Row vector ``t`` with ``t @ vec(rho) == trace(rho)``."""
    row = np.zeros(dim * dim, dtype=complex)
    row[:: dim + 1] = 1.0
    return row
