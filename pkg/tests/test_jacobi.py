import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import random_hermitian
from nonmarkov.jacobi import (NotHermitianError, check_hermitian, eigvalsh, jacobi_eigh,
                              max_eigenvalue, spectral_norm)


@pytest.mark.parametrize("k", [2, 3, 8, 15])
def test_against_lapack(rng, k):
    a = random_hermitian(rng, k, size=200)
    w, V = jacobi_eigh(a)
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12 * k)
    resid = np.abs(a @ V - V * w[:, None, :]).max()
    assert resid <= 1e-12 * k
    np.testing.assert_allclose(np.conj(np.swapaxes(V, 1, 2)) @ V,
                               np.broadcast_to(np.eye(k), (200, k, k)), atol=1e-12)


def test_real_input_stays_real(rng):
    a = rng.normal(size=(50, 4, 4))
    a = a + np.swapaxes(a, 1, 2)
    w, V = jacobi_eigh(a)
    assert V.dtype == float
    np.testing.assert_allclose(w, np.linalg.eigvalsh(a), atol=1e-12)


@given(st.integers(2, 6), st.integers(0, 10_000), st.floats(1e-8, 1e8))
def test_scaled_random(k, seed, scale):
    a = random_hermitian(np.random.default_rng(seed), k, scale=scale)
    np.testing.assert_allclose(eigvalsh(a), np.linalg.eigvalsh(a), atol=1e-12 * scale * k)


def test_small_eigenvalue_relative_accuracy():
    a = np.diag([1e-20, 1.0, 2.0])
    np.testing.assert_allclose(eigvalsh(a), [1e-20, 1.0, 2.0], rtol=1e-15)


def test_degenerate_and_zero():
    np.testing.assert_array_equal(eigvalsh(np.zeros((3, 3))), [0, 0, 0])
    np.testing.assert_allclose(eigvalsh(np.diag([-1.0, 0.0, 2.0])), [-1, 0, 2])
    w = eigvalsh(np.eye(4) * 3.0)
    np.testing.assert_allclose(w, 3.0)


def test_batch_shapes(rng):
    a = random_hermitian(rng, 3, size=12).reshape(3, 4, 3, 3)
    assert eigvalsh(a).shape == (3, 4, 3)
    assert max_eigenvalue(a).shape == (3, 4)


def test_spectral_norm(rng):
    m = rng.normal(size=(30, 3, 3))
    np.testing.assert_allclose(spectral_norm(m), np.linalg.norm(m, 2, axis=(1, 2)), rtol=1e-12)
    c, s = np.cos(0.7), np.sin(0.7)
    rot = np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])
    assert spectral_norm(rot) == pytest.approx(1.0, abs=1e-14)


def test_check_hermitian():
    check_hermitian(np.eye(3))
    with pytest.raises(NotHermitianError):
        check_hermitian(np.array([[0, 1], [0, 0]]))
    with pytest.raises(NotHermitianError):
        check_hermitian(np.ones((2, 3)))
