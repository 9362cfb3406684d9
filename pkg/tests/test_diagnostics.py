import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsl import operators as ops
from dsl.diagnostics import diagnose, fidelity, log_negativity, partial_transpose, purity
from dsl.metrology import fisher_triplet
from dsl.model import ModelParams, steady_state
from dsl.operators import TruncationSpec

from conftest import random_density, random_unitary


def bell_state(n=2):
    psi = np.zeros(2 * n, dtype=complex)
    psi[ops.EXCITED * n + 0] = psi[ops.GROUND * n + 1] = 1 / np.sqrt(2)
    return np.outer(psi, psi.conj())


def test_product_state_has_no_negativity(rng):
    rho = np.kron(random_density(2, rng), random_density(6, rng))
    assert log_negativity(rho) == pytest.approx(0, abs=1e-12)


def test_bell_pair_negativity():
    assert log_negativity(bell_state()) == pytest.approx(1, abs=1e-12)
    assert log_negativity(bell_state(5)) == pytest.approx(1, abs=1e-12)


@given(st.integers(0, 2**31))
def test_negativity_local_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(12, rng, rank=2)
    u = np.kron(random_unitary(2, rng), random_unitary(6, rng))
    assert log_negativity(u @ rho @ u.conj().T) == pytest.approx(log_negativity(rho), abs=1e-8)


@given(st.integers(0, 2**31))
def test_partial_transpose_factor_immaterial(seed):
    rho = random_density(10, np.random.default_rng(seed), rank=2)
    a = np.abs(np.linalg.eigvalsh(partial_transpose(rho, "qubit"))).sum()
    b = np.abs(np.linalg.eigvalsh(partial_transpose(rho, "field"))).sum()
    assert a == pytest.approx(b, rel=1e-10)


def test_partial_transpose_errors():
    with pytest.raises(ValueError):
        partial_transpose(np.eye(6), "both")
    with pytest.raises(ValueError):
        partial_transpose(np.eye(3))


def test_purity_limits(rng):
    psi = rng.normal(size=8) + 1j * rng.normal(size=8)
    psi /= np.linalg.norm(psi)
    assert purity(np.outer(psi, psi.conj())) == pytest.approx(1)
    assert purity(np.eye(8) / 8) == pytest.approx(1 / 8)


@given(st.integers(0, 2**31))
def test_purity_unitary_invariance(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(8, rng)
    u = random_unitary(8, rng)
    assert purity(u @ rho @ u.conj().T) == pytest.approx(purity(rho), abs=1e-10)


def test_fidelity_basics(rng):
    rho, sigma = random_density(6, rng), random_density(6, rng)
    assert fidelity(rho, rho) == pytest.approx(1, abs=1e-7)
    assert fidelity(rho, sigma) == pytest.approx(fidelity(sigma, rho), abs=1e-10)
    assert 0 <= fidelity(rho, sigma) <= 1
    e0, e1 = np.diag([1.0, 0, 0]), np.diag([0, 1.0, 0])
    assert fidelity(e0, e1) == pytest.approx(0, abs=1e-12)
    with pytest.raises(ValueError):
        fidelity(np.diag([1.2, -0.2]), np.eye(2) / 2)


def test_fidelity_of_pure_states_is_overlap(rng):
    a = rng.normal(size=5) + 1j * rng.normal(size=5)
    b = rng.normal(size=5) + 1j * rng.normal(size=5)
    a, b = a / np.linalg.norm(a), b / np.linalg.norm(b)
    assert fidelity(np.outer(a, a.conj()), np.outer(b, b.conj())) == pytest.approx(abs(np.vdot(a, b)), abs=1e-7)


def test_fidelity_qfi_matches_spectral_qfi():
    p = ModelParams.from_resource(10, 0.45)
    tr = TruncationSpec(40)
    d = 1e-4 * p.g
    a = steady_state(p.with_drive(p.drive - d / 2), tr).rho
    b = steady_state(p.with_drive(p.drive + d / 2), tr).rho
    estimate = 8 * (1 - fidelity(a, b)) / d**2
    assert estimate == pytest.approx(fisher_triplet(p, tr)["whole"], rel=0.01)


def test_diagnose_invariants():
    rho = steady_state(ModelParams.from_resource(10, 0.5), TruncationSpec(40)).rho
    d = diagnose(rho)
    assert 1 / rho.shape[0] - 1e-9 <= d.purity <= 1 + 1e-9
    assert d.log_negativity >= 0
    assert d.mean_photons >= 0
    assert np.linalg.norm(d.bloch) <= 1 + 1e-10
    assert abs(d.bloch[1]) < 1e-10


def test_purity_dips_near_critical_drive():
    drives = np.arange(0.1, 0.85, 0.1)
    values = [purity(steady_state(ModelParams.from_resource(10, e), TruncationSpec(40)).rho) for e in drives]
    i = int(np.argmin(values))
    assert 0.45 <= drives[i] <= 0.65
    assert values[-1] > values[i] and values[0] > values[i]


def test_negativity_smaller_at_larger_n_at_optimum():
    # whole-system optimal drives on resonance: 0.76 g at N = 10, 0.63 g at N = 40
    small = steady_state(ModelParams.from_resource(10, 0.76), TruncationSpec(60)).rho
    large = steady_state(ModelParams.from_resource(40, 0.63), TruncationSpec(60)).rho
    assert log_negativity(large) < log_negativity(small)
