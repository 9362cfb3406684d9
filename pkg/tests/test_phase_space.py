import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.integrate import trapezoid

from dsl.metrology import cfi_discrete, fisher_triplet
from dsl.model import ModelParams
from dsl.operators import TruncationSpec
from dsl.phase_space import (
    PhaseSpaceGrid,
    auto_grid,
    cfi_heterodyne,
    cfi_homodyne,
    hermite_functions,
    heterodyne_cfi_of,
    heterodyne_pdf,
    homodyne_cfi_of,
    husimi_values,
    optimize_angle_of,
    optimize_homodyne_angle,
    performance_ratio,
    quadrature_pdf,
    quadrature_values,
    solved_field,
    wigner,
    wigner_integral,
)

from conftest import coherent_vector, random_density

X = np.linspace(-8, 8, 801)


def fock(k, n=12):
    rho = np.zeros((n, n), dtype=complex)
    rho[k, k] = 1
    return rho


def coherent(alpha, n=40):
    c = coherent_vector(alpha, n)
    return np.outer(c, c.conj())


def test_hermite_functions_orthonormal():
    x = np.linspace(-12, 12, 4001)
    psi = hermite_functions(20, x)
    gram = trapezoid(psi[:, None, :] * psi[None, :, :], x, axis=2)
    assert np.abs(gram - np.eye(20)).max() < 1e-10


def test_hermite_guards():
    with pytest.raises(OverflowError):
        hermite_functions(4, [50.0])
    with pytest.raises(OverflowError):
        hermite_functions(5000, [0.0])


@pytest.mark.parametrize("angle", [0.0, 0.7, 2.0])
def test_vacuum_and_fock_quadratures(angle):
    p0 = quadrature_pdf(fock(0), angle, X)
    assert np.allclose(p0.density, np.exp(-X**2) / math.sqrt(math.pi), atol=1e-14)
    p1 = quadrature_pdf(fock(1), angle, X)
    assert np.allclose(p1.density, 2 * X**2 * np.exp(-X**2) / math.sqrt(math.pi), atol=1e-14)
    assert abs(p1.tail_mass) < 1e-6


@pytest.mark.parametrize("alpha, angle", [(1.2, 0.0), (1.5j, 0.3), (-0.8 + 1.1j, 2.5), (2.0 * np.exp(0.4j), 0.4)])
def test_coherent_quadrature(alpha, angle):
    mean = math.sqrt(2) * abs(alpha) * math.cos(np.angle(alpha) - angle)
    expected = np.exp(-((X - mean) ** 2)) / math.sqrt(math.pi)  # variance 1/2
    dist = quadrature_pdf(coherent(alpha), angle, X)
    assert np.abs(dist.density - expected).max() < 1e-10
    assert trapezoid(X * dist.density, X) == pytest.approx(mean, abs=1e-8)


@given(st.floats(0, 2 * math.pi), st.floats(0, 2 * math.pi), st.integers(0, 2**31))
def test_rotation_covariance(theta, angle, seed):
    rng = np.random.default_rng(seed)
    rho = random_density(8, rng)
    u = np.exp(1j * theta * np.arange(8))
    rotated = u[:, None] * rho * u.conj()[None, :]
    a = quadrature_pdf(rotated, angle, X).density
    b = quadrature_pdf(rho, angle - theta, X).density
    assert np.abs(a - b).max() < 1e-10


@given(st.floats(0, math.pi), st.integers(0, 2**31))
def test_antipode_reflection(angle, seed):
    rho = random_density(8, np.random.default_rng(seed))
    a = quadrature_pdf(rho, angle + math.pi, X).density
    b = quadrature_pdf(rho, angle, -X).density
    assert np.abs(a - b).max() < 1e-10


def test_quadrature_pdf_rejects_invalid_state():
    bad = np.diag([1.5, -0.5, 0]).astype(complex)
    with pytest.raises(ValueError):
        quadrature_pdf(bad, 0.0, X)


def test_wigner_vacuum():
    g = PhaseSpaceGrid(-5, 5, 101)
    W = wigner(fock(0), g)
    x = g.axis
    assert W[50, 50] == pytest.approx(1 / math.pi)
    assert np.abs(W - np.exp(-x[:, None] ** 2 - x[None, :] ** 2) / math.pi).max() < 1e-14


@pytest.mark.parametrize("alpha", [1.0, -0.5 + 1.5j, 2.2j])
def test_wigner_coherent_is_displaced_gaussian(alpha):
    g = PhaseSpaceGrid(-7, 7, 141)
    x = g.axis
    a = complex(alpha)
    x0, p0 = math.sqrt(2) * a.real, math.sqrt(2) * a.imag
    expected = np.exp(-((x[:, None] - x0) ** 2) - (x[None, :] - p0) ** 2) / math.pi
    assert np.abs(wigner(coherent(a), g) - expected).max() < 1e-10


def test_wigner_fock_one_is_negative_at_origin():
    W = wigner(fock(1), [0.0])
    assert W[0, 0] == pytest.approx(-1 / math.pi)


def test_wigner_matches_defining_integral(rng):
    # W(x, p) = (1/pi) int <x+y|rho|x-y> exp(-2ipy) dy, at low cutoff
    rho = random_density(5, rng)
    y = np.linspace(-10, 10, 4001)
    pts = [(0.0, 0.0), (0.7, -0.4), (-1.3, 1.1), (2.0, 0.5)]
    W = wigner(rho, np.array([p[0] for p in pts]), np.array([p[1] for p in pts]))
    for i, (x0, p0) in enumerate(pts):
        a = hermite_functions(5, x0 + y)
        b = hermite_functions(5, x0 - y)
        kernel = np.einsum("ny,nm,my->y", a, rho, b)
        direct = trapezoid(kernel * np.exp(-2j * p0 * y), y).real / math.pi
        assert W[i, i] == pytest.approx(direct, abs=1e-10)


def test_wigner_marginal_is_quadrature_density(rng):
    rho = random_density(10, rng)
    g = PhaseSpaceGrid(-9, 9, 361)
    W = wigner(rho, g)
    marginal = trapezoid(W, g.axis, axis=1)
    assert np.abs(marginal - quadrature_pdf(rho, 0.0, g).density).max() < 1e-4
    assert wigner_integral(W, g) == pytest.approx(1, abs=1e-3)


def test_husimi_examples():
    beta = np.array([0, 0.5, 1 + 1j, -2j])
    assert np.allclose(husimi_values(fock(0), beta), np.exp(-np.abs(beta) ** 2) / math.pi)
    assert np.allclose(husimi_values(fock(1), beta), np.abs(beta) ** 2 * np.exp(-np.abs(beta) ** 2) / math.pi)


@given(st.integers(0, 2**31))
def test_husimi_bounded(seed):
    rng = np.random.default_rng(seed)
    rho = random_density(10, rng, rank=int(rng.integers(1, 4)))
    beta = rng.normal(scale=1.5, size=500) + 1j * rng.normal(scale=1.5, size=500)
    q = husimi_values(rho, beta)
    assert q.min() >= -1e-15
    assert q.max() <= 1 / math.pi + 1e-15


def test_heterodyne_pdf_normalized(rng):
    rho = random_density(8, rng)
    g = PhaseSpaceGrid(-7, 7, 201)
    p = heterodyne_pdf(rho, g)
    assert trapezoid(trapezoid(p, g.axis, axis=1), g.axis) == pytest.approx(1, abs=1e-3)


# Decoupled cavity: coherent state alpha = -i E / (kappa - i Delta).
@pytest.mark.parametrize("detuning", [0.0, 0.3, -0.6])
def test_decoupled_cavity_measurements(detuning):
    p = ModelParams(g=0.0, kappa=0.5, drive=0.4, detuning=detuning)
    tr = TruncationSpec(30)
    q = 4 / (p.kappa**2 + detuning**2)
    angle, f = optimize_homodyne_angle(p, tr)
    assert f == pytest.approx(q, rel=1e-6)
    assert angle == pytest.approx(np.angle(-1j / (p.kappa - 1j * detuning)) % math.pi, abs=1e-4)
    assert cfi_heterodyne(p, tr) == pytest.approx(q / 2, rel=1e-4)
    if detuning == 0.0:
        assert angle == pytest.approx(math.pi / 2, abs=1e-4)


@pytest.mark.parametrize("N, drive, detuning", [(6, 0.4, 0.0), (10, 0.45, -0.2), (15, 0.3, 0.2)])
def test_measurement_fisher_ordering(N, drive, detuning):
    p = ModelParams.from_resource(N, drive, detuning)
    tr = TruncationSpec(40)
    q = fisher_triplet(p, tr)
    for angle in np.linspace(0, math.pi, 7):
        assert cfi_homodyne(p, tr, angle) <= q["field"] * (1 + 1e-8)
    assert cfi_heterodyne(p, tr) <= q["field"] * (1 + 1e-8)
    for scheme in ("homodyne", "heterodyne"):
        assert 0 <= performance_ratio(p, tr, scheme) <= 1 + 1e-6


def test_binned_homodyne_cfi_below_qfi():
    p = ModelParams.from_resource(8, 0.45)
    tr = TruncationSpec(40)
    rho_f, drho_f = solved_field(p, tr)
    angle, f = optimize_homodyne_angle(p, tr)
    half = auto_grid(rho_f).x_max
    x = np.linspace(-half, half, 64 * 40 + 1).reshape(-1)
    dens = quadrature_values(rho_f, angle, x)
    ddens = quadrature_values(drho_f, angle, x)
    # 40 bins, each integrated over 65 nodes
    probs = np.array([trapezoid(dens[k * 64 : k * 64 + 65], x[k * 64 : k * 64 + 65]) for k in range(40)])
    dprobs = np.array([trapezoid(ddens[k * 64 : k * 64 + 65], x[k * 64 : k * 64 + 65]) for k in range(40)])
    binned = cfi_discrete(probs, dprobs)
    assert binned <= fisher_triplet(p, tr)["field"] * (1 + 1e-8)
    assert binned <= f * (1 + 1e-6)


def test_homodyne_antipode_cfi():
    p = ModelParams.from_resource(8, 0.45, -0.1)
    tr = TruncationSpec(40)
    for angle in (0.3, 1.2):
        assert cfi_homodyne(p, tr, angle + math.pi) == pytest.approx(cfi_homodyne(p, tr, angle), rel=1e-10)


def test_cfi_grid_convergence():
    p = ModelParams.from_resource(10, 0.45, -0.1)
    tr = TruncationSpec(40)
    rho_f, drho_f = solved_field(p, tr)
    grid = auto_grid(rho_f)
    for angle in (0.0, 1.0, 2.0):
        coarse = homodyne_cfi_of(rho_f, drho_f, angle, grid)
        fine = homodyne_cfi_of(rho_f, drho_f, angle, grid.refined())
        assert abs(fine - coarse) <= 5e-3 * fine
    g2 = PhaseSpaceGrid(-7, 7, 201)
    coarse = heterodyne_cfi_of(rho_f, drho_f, g2)
    fine = heterodyne_cfi_of(rho_f, drho_f, g2.refined())
    assert abs(fine - coarse) <= 5e-3 * fine


def test_optimal_angle_on_resonance_at_operating_point():
    # g / kappa = 10 is N = 25
    # the whole-system optimal drive at N = 25 is about 0.667 g
    p = ModelParams.from_coupling_ratio(10.0, drive_ratio=0.667)
    angle, _ = optimize_homodyne_angle(p, TruncationSpec(60))
    assert abs(angle - math.pi / 2) < 0.1


def test_homodyne_beats_heterodyne_small_n():
    p = ModelParams.from_resource(10, 0.4)
    tr = TruncationSpec(40)
    assert cfi_heterodyne(p, tr) < optimize_homodyne_angle(p, tr)[1]


def _local_maxima(W, rel=0.1):
    inner = W[1:-1, 1:-1]
    is_peak = np.ones_like(inner, dtype=bool)
    for dx in (-1, 0, 1):
        for dy in (-1, 0, 1):
            if dx or dy:
                is_peak &= inner > W[1 + dx : W.shape[0] - 1 + dx, 1 + dy : W.shape[1] - 1 + dy]
    idx = np.argwhere(is_peak & (inner > rel * W.max())) + 1
    return sorted((W[i, j], i, j) for i, j in idx)[::-1]


def test_bistable_field_wigner():
    p = ModelParams.from_resource(56, 0.5)
    rho_f, _ = solved_field(p, TruncationSpec(80))
    g = PhaseSpaceGrid(-8, 8, 161)
    W = wigner(rho_f, g)
    assert W.min() > -1e-10
    assert wigner_integral(W, g) == pytest.approx(1, abs=1e-3)
    # the two tallest maxima are the mirror-image bistable lobes x -> -x
    (w1, i1, j1), (w2, i2, j2) = _local_maxima(W)[:2]
    assert w1 == pytest.approx(w2, rel=1e-6)
    assert j1 == j2 and i1 + i2 == W.shape[0] - 1
    assert abs(g.axis[i1] - g.axis[i2]) > 3.0


def test_wigner_accurate_for_large_amplitude():
    g = PhaseSpaceGrid(-12, 12, 61)
    x = g.axis
    c = coherent_vector(6.5 * np.exp(0.3j), 160)
    a = 6.5 * np.exp(0.3j)
    W = wigner(np.outer(c, c.conj()), g)
    expected = np.exp(-((x[:, None] - math.sqrt(2) * a.real) ** 2) - (x[None, :] - math.sqrt(2) * a.imag) ** 2) / math.pi
    assert np.abs(W - expected).max() < 1e-12
