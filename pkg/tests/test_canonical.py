import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian
from nonmarkov.bloch import DimensionError, bloch_to_density, density_to_bloch, random_bloch
from nonmarkov.canonical import (SampledDecoherence, canonical_decomposition, canonical_rhs,
                                 decoherence_matrices_2level, decoherence_matrix_2level,
                                 effective_hamiltonian, hermitian_eigenvalues,
                                 read_decoherence_table, write_decoherence_table)
from nonmarkov.jacobi import NotHermitianError
from nonmarkov.models import (SpinBosonParams, amplitude_damping, bloch_generator, phase_damping,
                              spin_boson_coefficients, spin_boson_model)
from nonmarkov.propagation import MasterEquation2L

SIGMA3 = np.diag([1.0, -1.0])


def test_amplitude_damping_matrix():
    g = 0.7
    d = decoherence_matrix_2level(amplitude_damping(g), 0.0).matrix
    expected = np.array([[g / 2, 1j * g / 2, 0], [-1j * g / 2, g / 2, 0], [0, 0, 0]])
    np.testing.assert_allclose(d, expected, atol=1e-15)
    np.testing.assert_allclose(hermitian_eigenvalues(d).eigenvalues, [0, 0, g], atol=1e-14)


def test_phase_damping_matrix_and_operator():
    d = decoherence_matrix_2level(phase_damping(0.4), 1.0).matrix
    np.testing.assert_allclose(d, np.diag([0, 0, 0.8]), atol=1e-15)
    pairs = canonical_decomposition(d)
    assert len(pairs) == 1
    rate, L = pairs[0]
    assert rate == pytest.approx(0.8)
    # operator is sigma_3 / sqrt(2) up to a phase
    overlap = np.trace(L.conj().T @ SIGMA3) / np.sqrt(2)
    assert abs(overlap) == pytest.approx(1.0, abs=1e-14)


def test_zero_matrix_has_no_rates():
    assert canonical_decomposition(np.zeros((3, 3))) == []


def test_effective_hamiltonian_spin_boson():
    p = SpinBosonParams(alpha=0.01, omega_c=3.0)
    coeffs = spin_boson_coefficients(p, t_end=5.0)
    me = spin_boson_model(coeffs)
    for t in (0.5, 4.0):
        g, _ = coeffs(t)
        np.testing.assert_allclose(effective_hamiltonian(me, t).matrix,
                                   0.5 * (1.0 - g.imag) * SIGMA3, atol=1e-14)


def bloch_rhs(v, D, rho):
    lam = density_to_bloch(rho)
    return bloch_to_density(v + D @ lam).matrix - 0.5 * np.eye(2)


@given(st.integers(0, 10_000))
def test_reconstruction(seed):
    rng = np.random.default_rng(seed)
    v, D = rng.normal(size=3), rng.normal(size=(3, 3))
    me = MasterEquation2L(lambda t: v, lambda t: D)
    d = decoherence_matrix_2level(me, 0.0).matrix
    H = effective_hamiltonian(me, 0.0).matrix
    rates_ops = canonical_decomposition(d)
    Ls = np.array([L for _, L in rates_ops])
    gram = np.einsum("aij,bij->ab", Ls.conj(), Ls)
    np.testing.assert_allclose(gram, np.eye(len(Ls)), atol=1e-12)
    for lam in random_bloch(rng, 3):
        rho = bloch_to_density(lam).matrix
        lhs = canonical_rhs(rho, rates_ops, H)
        np.testing.assert_allclose(lhs, bloch_rhs(v, D, rho), atol=1e-9)


@given(st.integers(0, 10_000))
def test_bloch_generator_inverts(seed):
    rng = np.random.default_rng(seed)
    h = rng.normal(size=3)
    d = random_hermitian(rng, 3)
    v, D = bloch_generator(h, d)
    me = MasterEquation2L(lambda t: v, lambda t: D)
    np.testing.assert_allclose(decoherence_matrix_2level(me, 0.0).matrix, d, atol=1e-13)
    H = effective_hamiltonian(me, 0.0).matrix
    np.testing.assert_allclose(H, np.tensordot(h, np.array(
        [[[0, 1], [1, 0]], [[0, -1j], [1j, 0]], [[1, 0], [0, -1]]]), axes=1), atol=1e-13)


def test_batched_matches_single():
    me = amplitude_damping(lambda t: np.cos(t))
    ts = np.linspace(0, 3, 5)
    batch = decoherence_matrices_2level(me, ts)
    for t, m in zip(ts, batch):
        np.testing.assert_allclose(m, decoherence_matrix_2level(me, t).matrix)


def test_not_hermitian():
    with pytest.raises(NotHermitianError):
        hermitian_eigenvalues(np.array([[0, 1, 0], [0, 0, 0], [0, 0, 0]], dtype=complex))


def test_table_round_trip(tmp_path, rng):
    times = np.linspace(0, 1, 4)
    mats = random_hermitian(rng, 8, size=4)
    path = tmp_path / "d.txt"
    write_decoherence_table(path, times, mats)
    table = read_decoherence_table(path)
    assert table.n == 3
    np.testing.assert_array_equal(table.times, times)
    np.testing.assert_allclose(table.matrices, mats, atol=0)
    np.testing.assert_allclose(table(0.5 * (times[1] + times[2])),
                               0.5 * (mats[1] + mats[2]), atol=1e-15)


def test_table_errors():
    with pytest.raises(DimensionError):
        read_decoherence_table("0 1 0 2 0")
    with pytest.raises(ValueError):
        read_decoherence_table("# nothing\n")
    with pytest.raises(ValueError):
        SampledDecoherence([1.0, 0.0], np.zeros((2, 3, 3)))
