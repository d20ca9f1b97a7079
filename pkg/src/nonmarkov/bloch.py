"""Bloch-vector substrate for two-level systems and generalized Gell-Mann bases.

A two-level state is stored as its Bloch vector ``lam`` with
``rho = (I + lam . sigma) / 2``.  Vectors with norm above one are allowed
through (intermediate numerics overshoot) but are flagged as unphysical.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

PHYSICAL_TOL = 1e-9

IDENTITY2 = np.eye(2, dtype=complex)
SIGMA_X = np.array([[0, 1], [1, 0]], dtype=complex)
SIGMA_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
SIGMA_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI = np.stack([SIGMA_X, SIGMA_Y, SIGMA_Z])
SIGMA_MINUS = 0.5 * (SIGMA_X - 1j * SIGMA_Y)
SIGMA_PLUS = 0.5 * (SIGMA_X + 1j * SIGMA_Y)


class DimensionError(ValueError):
    """Raised when a matrix or basis dimension is invalid."""


@dataclass(frozen=True)
class DensityMatrix:
    """A density matrix together with a physicality flag."""

    matrix: np.ndarray
    physical: bool = True

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)

    @property
    def trace(self) -> complex:
        return complex(np.trace(self.matrix))


def is_physical(lam, tol: float = PHYSICAL_TOL) -> bool:
    return bool(np.linalg.norm(lam) <= 1.0 + tol)


def bloch_to_density(lam) -> DensityMatrix:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (3,):
        raise DimensionError(f"Bloch vector must have 3 components, got shape {lam.shape}")
    rho = 0.5 * (IDENTITY2 + np.tensordot(lam, PAULI, axes=1))
    return DensityMatrix(rho, is_physical(lam))


def density_to_bloch(rho) -> np.ndarray:
    """Inverse of :func:`bloch_to_density`: ``lam_i = Tr[rho sigma_i]``."""
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (2, 2):
        raise DimensionError(f"expected a 2x2 matrix, got shape {rho.shape}")
    return np.real(np.einsum("ij,kji->k", rho, PAULI))


def trace_norm_difference(lam1, lam2) -> float:
    """Trace norm ``||rho1 - rho2||_1`` of two qubit states.

    For two-level states this is the Euclidean distance of the Bloch vectors;
    the identity does not extend to more levels.
    """
    return float(np.linalg.norm(np.asarray(lam1, dtype=float) - np.asarray(lam2, dtype=float)))


def generalized_basis(n: int) -> np.ndarray:
    """Orthonormal traceless Hermitian basis of ``n x n`` matrices.

    Generalized Gell-Mann ordering: symmetric off-diagonal matrices, then
    antisymmetric ones, then the diagonal ones, all normalized so that
    ``Tr[G_i G_j] = delta_ij``.  For ``n = 2`` this is ``sigma_i / sqrt(2)``
    in the usual x, y, z order.

    Returns an array of shape ``(n**2 - 1, n, n)``.
    """
    if int(n) != n or n < 2:
        raise DimensionError(f"basis dimension must be an integer >= 2, got {n}")
    n = int(n)
    if n == 2:
        return PAULI / np.sqrt(2.0)

    sym, asym, diag = [], [], []
    for j in range(n):
        for k in range(j + 1, n):
            s = np.zeros((n, n), dtype=complex)
            s[j, k] = s[k, j] = 1.0
            sym.append(s / np.sqrt(2.0))
            a = np.zeros((n, n), dtype=complex)
            a[j, k] = -1j
            a[k, j] = 1j
            asym.append(a / np.sqrt(2.0))
    for l in range(1, n):
        h = np.zeros((n, n), dtype=complex)
        h[np.arange(l), np.arange(l)] = 1.0
        h[l, l] = -l
        diag.append(h / np.sqrt(l * (l + 1)))
    return np.array(sym + asym + diag)


def random_bloch(rng: np.random.Generator, size=None, pure: bool = False) -> np.ndarray:
    """Uniformly distributed Bloch vectors inside (or on) the unit ball."""
    shape = (3,) if size is None else (size, 3)
    x = rng.normal(size=shape)
    x /= np.linalg.norm(x, axis=-1, keepdims=True)
    if pure:
        return x
    r = rng.uniform(size=() if size is None else (size, 1)) ** (1.0 / 3.0)
    return x * r
