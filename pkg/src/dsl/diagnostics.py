"""Entanglement, purity and fidelity of steady states."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .metrology import partial_trace
from .model import NEGATIVITY_TOL, qubit_bloch
from .phase_space import field_moments


@dataclass(frozen=True)
class StateDiagnostics:
    log_negativity: float
    purity: float
    bloch: tuple[float, float, float]
    mean_photons: float


def partial_transpose(rho, transpose: str = "qubit") -> np.ndarray:
    rho = np.asarray(rho)
    d = rho.shape[0]
    if rho.shape != (d, d) or d % 2 or d < 4:
        raise ValueError(f"expected a composite (2*n_max)-square matrix, got shape {rho.shape}")
    t = rho.reshape(2, d // 2, 2, d // 2)
    if transpose == "qubit":
        t = t.transpose(2, 1, 0, 3)
    elif transpose == "field":
        t = t.transpose(0, 3, 2, 1)
    else:
        raise ValueError(f"transpose must be 'qubit' or 'field', got {transpose!r}")
    return t.reshape(d, d)


def log_negativity(rho, transpose: str = "qubit") -> float:
    """log2 of the trace norm of the partial transpose, clipped at 0."""
    ev = np.linalg.eigvalsh(partial_transpose(rho, transpose))
    return max(float(np.log2(np.abs(ev).sum())), 0.0)


def purity(rho) -> float:
    rho = np.asarray(rho)
    return float(np.real(np.vdot(rho.conj().T, rho)))


def _psd_sqrt(rho) -> np.ndarray:
    w, v = np.linalg.eigh(np.asarray(rho))
    if w[0] < -NEGATIVITY_TOL * max(1.0, w[-1]):
        raise ValueError(f"matrix is not positive semidefinite (eigenvalue {w[0]:.3e})")
    return (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T


def fidelity(rho, sigma) -> float:
    """Root fidelity Tr|sqrt(rho) sqrt(sigma)| (nuclear norm), in [0, 1]."""
    rho, sigma = np.asarray(rho), np.asarray(sigma)
    if rho.shape != sigma.shape:
        raise ValueError(f"shape mismatch {rho.shape} vs {sigma.shape}")
    s = np.linalg.svd(_psd_sqrt(rho) @ _psd_sqrt(sigma), compute_uv=False)
    return float(min(s.sum(), 1.0))


def diagnose(rho) -> StateDiagnostics:
    _, nbar = field_moments(partial_trace(rho, "field"))
    return StateDiagnostics(
        log_negativity=log_negativity(rho),
        purity=purity(rho),
        bloch=qubit_bloch(partial_trace(rho, "qubit")),
        mean_photons=nbar,
    )
