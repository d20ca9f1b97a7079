import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from nonmarkov.bloch import (PAULI, DimensionError, bloch_to_density, density_to_bloch,
                             generalized_basis, is_physical, random_bloch, trace_norm_difference)

coord = st.floats(-1, 1, allow_nan=False)
vec = st.tuples(coord, coord, coord).map(np.array).filter(lambda v: np.linalg.norm(v) <= 1)


def test_density_examples():
    np.testing.assert_allclose(bloch_to_density([0, 0, 0]).matrix, np.eye(2) / 2)
    np.testing.assert_allclose(bloch_to_density([0, 0, 1]).matrix, np.diag([1, 0]))
    np.testing.assert_allclose(bloch_to_density([1, 0, 0]).matrix, 0.5 * np.ones((2, 2)))


def test_unphysical_flagged_not_rejected():
    rho = bloch_to_density([0, 0, 1.5])
    assert not rho.physical
    assert bloch_to_density([0, 0, 1 + 1e-10]).physical
    assert not is_physical([0.8, 0.8, 0])


def test_bad_shape():
    with pytest.raises(DimensionError):
        bloch_to_density([1, 0])


def test_trace_distance_examples():
    assert trace_norm_difference([0.1, 0.2, 0.3], [0.1, 0.2, 0.3]) == 0
    assert trace_norm_difference([0, 0, 1], [0, 0, -1]) == pytest.approx(2)
    assert trace_norm_difference([1, 0, 0], [0, 1, 0]) == pytest.approx(np.sqrt(2))


@given(vec, vec)
def test_trace_distance_matches_eigensolve(l1, l2):
    diff = bloch_to_density(l1).matrix - bloch_to_density(l2).matrix
    oracle = np.sum(np.abs(np.linalg.eigvalsh(diff)))
    assert abs(trace_norm_difference(l1, l2) - oracle) <= 1e-12


@given(vec)
def test_round_trip(lam):
    rho = bloch_to_density(lam)
    np.testing.assert_allclose(density_to_bloch(rho.matrix), lam, atol=1e-14)
    assert rho.trace == pytest.approx(1.0, abs=1e-15)


def test_round_trip_from_density(rng):
    for lam in random_bloch(rng, 20):
        rho = bloch_to_density(lam).matrix
        np.testing.assert_allclose(bloch_to_density(density_to_bloch(rho)).matrix, rho, atol=1e-14)


def test_basis_two_level():
    np.testing.assert_allclose(generalized_basis(2), PAULI / np.sqrt(2))
    assert np.allclose(np.trace(generalized_basis(2), axis1=1, axis2=2), 0)


@pytest.mark.parametrize("n", [2, 3, 4, 5])
def test_basis_orthonormal(n):
    G = generalized_basis(n)
    assert G.shape == (n * n - 1, n, n)
    gram = np.einsum("aij,bji->ab", G, G)
    np.testing.assert_allclose(gram, np.eye(n * n - 1), atol=1e-12)
    np.testing.assert_allclose(G, np.conj(np.swapaxes(G, 1, 2)))
    np.testing.assert_allclose(np.trace(G, axis1=1, axis2=2), 0, atol=1e-15)


def test_basis_bad_dimension():
    with pytest.raises(DimensionError):
        generalized_basis(1)


def test_random_bloch_in_ball(rng):
    assert np.all(np.linalg.norm(random_bloch(rng, 100), axis=1) <= 1 + 1e-12)
    np.testing.assert_allclose(np.linalg.norm(random_bloch(rng, 10, pure=True), axis=1), 1)
