import numpy as np
import pytest
from hypothesis import given, strategies as st

from dsl import operators as ops
from dsl.errors import DomainError, NonConvergence
from dsl.metrology import partial_trace
from dsl.model import (
    ModelParams,
    build_hamiltonian,
    build_liouvillian,
    coherent_amplitude,
    quasienergies,
    qubit_bloch,
    steady_state,
)
from dsl.operators import TruncationSpec, vectorize

from conftest import coherent_vector, random_density


def idx(q, n, n_max):
    return q * n_max + n


def test_resource_and_constructors():
    p = ModelParams.from_resource(25, 0.3, -0.1)
    assert p.resource == pytest.approx(25)
    assert p.kappa == pytest.approx(0.1)
    assert p.drive_ratio == pytest.approx(0.3)
    assert p.detuning_ratio == pytest.approx(-0.1)
    q = ModelParams.from_coupling_ratio(10.0)
    assert q.resource == pytest.approx(25)
    with pytest.raises(ValueError):
        ModelParams(g=1, kappa=0)
    with pytest.raises(ValueError):
        ModelParams.from_resource(0)


def test_hamiltonian_jc_element():
    n = 5
    H = build_hamiltonian(ModelParams(g=0.7, kappa=0.1), n).toarray()
    assert H[idx(ops.EXCITED, 0, n), idx(ops.GROUND, 1, n)] == pytest.approx(0.7)


def test_hamiltonian_detuning_term():
    n = 5
    H = build_hamiltonian(ModelParams(g=0.0, kappa=0.1, detuning=0.4), n).toarray()
    assert np.allclose(H, np.diag(np.diagonal(H)))
    assert H[idx(ops.GROUND, 1, n), idx(ops.GROUND, 1, n)] == pytest.approx(-0.4)
    assert H[idx(ops.EXCITED, 2, n), idx(ops.EXCITED, 2, n)] == pytest.approx(-0.4 * 3)


@given(
    st.floats(0.01, 5), st.floats(0.01, 5), st.floats(0, 5), st.floats(-5, 5), st.integers(2, 12)
)
def test_hamiltonian_hermitian(g, kappa, drive, detuning, n):
    H = build_hamiltonian(ModelParams(g, kappa, drive, detuning), n).toarray()
    assert np.abs(H - H.conj().T).max() <= 1e-12


def test_liouvillian_unitary_part_annihilates_identity():
    n = 6
    p = ModelParams(1.0, 0.8, 0.3, 0.2)
    unitary = build_liouvillian(p, n) - p.kappa * ops.dissipator(ops.composite_operators(n).a)
    H = build_hamiltonian(p, n)
    assert np.allclose(unitary.toarray(), ops.commutator_superop(H).toarray(), atol=1e-14)
    assert np.abs(unitary @ vectorize(np.eye(2 * n))).max() < 1e-12


def test_pure_decay_null_space():
    # composite: every null vector carries the field in vacuum
    L = build_liouvillian(ModelParams(0.0, 0.5), 2).toarray()
    _, s, vh = np.linalg.svd(L)
    null = vh[s < 1e-12].conj()
    assert null.shape[0] >= 1
    for v in null:
        rho = v.reshape(4, 4, order="F").reshape(2, 2, 2, 2)
        assert np.allclose(rho[:, 1, :, :], 0) and np.allclose(rho[:, :, :, 1], 0)
    # field only: the vacuum is the unique null state
    a = ops.annihilation(2)
    Lf = (0.5 * ops.dissipator(a)).toarray()
    _, s, vh = np.linalg.svd(Lf)
    assert np.sum(s < 1e-12) == 1
    v = vh[-1].conj()
    assert np.allclose(v / v[0], [1, 0, 0, 0])


def test_liouvillian_matvec_matches_direct_evaluation(rng):
    n = 4
    p = ModelParams(1.1, 0.3, 0.45, -0.2)
    H = build_hamiltonian(p, n).toarray()
    a = ops.composite_operators(n).a.toarray()
    ad = a.conj().T
    rho = random_density(2 * n, rng)
    direct = -1j * (H @ rho - rho @ H) + p.kappa * (2 * a @ rho @ ad - rho @ ad @ a - ad @ a @ rho)
    assert np.allclose(build_liouvillian(p, n) @ vectorize(rho), vectorize(direct), atol=1e-12)


def test_liouvillian_trace_preserving():
    L = build_liouvillian(ModelParams.from_resource(12, 0.4, 0.3), 9)
    assert np.abs(ops.trace_row(18) @ L).max() < 1e-10


def test_no_drive_decays_to_ground():
    res = steady_state(ModelParams.from_resource(10, 0.0), TruncationSpec(8))
    expected = np.zeros((16, 16))
    expected[idx(ops.GROUND, 0, 8), idx(ops.GROUND, 0, 8)] = 1.0
    assert np.allclose(res.rho, expected, atol=1e-12)
    assert res.residual <= 1e-12


@pytest.mark.parametrize("drive, detuning", [(0.3, 0.0), (0.25, 0.4), (0.5, -0.3)])
def test_decoupled_cavity_is_coherent(drive, detuning):
    p = ModelParams(g=0.0, kappa=0.5, drive=drive, detuning=detuning)
    n = 30
    res = steady_state(p, TruncationSpec(n))
    field = partial_trace(res.rho, "field")
    alpha = coherent_amplitude(p)
    psi = coherent_vector(alpha, n)
    assert np.allclose(field, np.outer(psi, psi.conj()), atol=1e-10)
    nbar = np.real(np.trace(field @ np.diag(np.arange(n))))
    assert nbar == pytest.approx(drive**2 / (p.kappa**2 + detuning**2), rel=1e-10)


@pytest.mark.parametrize("N, drive, detuning", [(10, 0.45, 0.0), (20, 0.38, -0.1), (5, 0.7, 0.2)])
def test_steady_state_invariants(N, drive, detuning):
    res = steady_state(ModelParams.from_resource(N, drive, detuning), TruncationSpec(40))
    rho = res.rho
    assert np.trace(rho).real == pytest.approx(1, abs=1e-10)
    assert np.abs(rho - rho.conj().T).max() <= 1e-10
    assert np.linalg.eigvalsh(rho).min() >= -1e-9
    L = build_liouvillian(ModelParams.from_resource(N, drive, detuning), res.cutoff_used)
    assert res.residual <= 1e-10 * np.linalg.norm(L.data)


def test_scale_invariance():
    p = ModelParams.from_resource(15, 0.42, -0.15)
    a = steady_state(p, TruncationSpec(30)).rho
    b = steady_state(p.scaled(1e3), TruncationSpec(30)).rho
    assert np.abs(a - b).max() < 1e-9


def test_cutoff_grows_until_tail_is_small():
    p = ModelParams.from_resource(10, 0.8)
    res = steady_state(p, TruncationSpec(6, tail_tol=1e-8))
    assert res.cutoff_used > 6
    assert res.tail_population <= 1e-8
    direct = steady_state(p, TruncationSpec(res.cutoff_used, tail_tol=1e-8))
    assert np.allclose(res.rho, direct.rho)


def test_cutoff_cap_raises():
    with pytest.raises(NonConvergence):
        steady_state(ModelParams.from_resource(10, 0.8), TruncationSpec(6, 1e-8), max_cutoff=12)


def test_quasienergies():
    assert quasienergies(1, 0.0, 1.0) == (1.0, -1.0)
    for n in range(1, 11):
        assert quasienergies(n, 0.5, 1.0) == (0.0, 0.0)
    up, down = quasienergies(1, 0.3, 1.0)
    assert up == pytest.approx(0.64**0.75) and down == pytest.approx(-(0.64**0.75))
    assert up == pytest.approx(0.7155, abs=1e-4)
    with pytest.raises(DomainError):
        quasienergies(1, 0.51, 1.0)


def test_bloch_ground():
    rho = np.zeros((2, 2))
    rho[ops.GROUND, ops.GROUND] = 1
    assert qubit_bloch(rho) == pytest.approx((0, 0, -1))
    with pytest.raises(ValueError):
        qubit_bloch(np.eye(3) / 3)


def test_bloch_on_resonance():
    sx = []
    for N in (10, 56):
        res = steady_state(ModelParams.from_resource(N, 0.45), TruncationSpec(60))
        b = qubit_bloch(partial_trace(res.rho, "qubit"))
        assert abs(b[1]) < 1e-10
        assert np.linalg.norm(b) <= 1 + 1e-10
        sx.append(b[0])
    # polarization along -x grows with N below threshold
    assert sx[1] < sx[0] < 0
