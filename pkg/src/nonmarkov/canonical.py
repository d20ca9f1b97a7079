"""Canonical form ingredients: decoherence matrix, effective Hamiltonian, rates.

For a two-level Bloch equation ``lam' = v + D lam`` the master equation can
be written as

    rho' = -i[H, rho] + sum_ij d_ij (G_i rho G_j - {G_j G_i, rho} / 2)

with ``G_i = sigma_i / sqrt(2)``.  Diagonalizing ``d = U gamma U^dag`` gives
the canonical rates ``gamma_i`` and decoherence operators
``L_i = sum_j U_ji G_j``.  For more levels, ``d(t)`` is supplied by the user
(evaluable or as a sampled table) and only its spectrum is used.
"""

from __future__ import annotations

import io
import os
from dataclasses import dataclass
from typing import Union

import numpy as np

from . import jacobi
from .bloch import PAULI, DimensionError, generalized_basis
from .jacobi import NotHermitianError
from .propagation import MasterEquation2L

__all__ = [
    "DecoherenceMatrix", "DecoherenceSpectrum", "EffectiveHamiltonian",
    "decoherence_matrix_2level", "decoherence_matrices_2level", "drift_matrix",
    "effective_hamiltonian", "hermitian_eigenvalues", "canonical_decomposition",
    "canonical_rhs", "SampledDecoherence", "read_decoherence_table",
    "write_decoherence_table", "NotHermitianError",
]

HERMITIAN_TOL = 1e-12


@dataclass(frozen=True)
class DecoherenceMatrix:
    """Hermitian ``(n^2-1) x (n^2-1)`` decoherence matrix at one time."""

    matrix: np.ndarray
    time: float = 0.0

    @property
    def n(self) -> int:
        return int(round(np.sqrt(self.matrix.shape[0] + 1)))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


@dataclass(frozen=True)
class DecoherenceSpectrum:
    eigenvalues: np.ndarray
    time: float = 0.0


@dataclass(frozen=True)
class EffectiveHamiltonian:
    matrix: np.ndarray
    time: float = 0.0

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.matrix, dtype=dtype)


def drift_matrix(v) -> np.ndarray:
    """``i * [[0, -v3, v2], [v3, 0, -v1], [-v2, v1, 0]]`` (batched)."""
    v = np.asarray(v, dtype=float)
    out = np.zeros(v.shape[:-1] + (3, 3), dtype=complex)
    out[..., 0, 1] = -1j * v[..., 2]
    out[..., 0, 2] = 1j * v[..., 1]
    out[..., 1, 0] = 1j * v[..., 2]
    out[..., 1, 2] = -1j * v[..., 0]
    out[..., 2, 0] = -1j * v[..., 1]
    out[..., 2, 1] = 1j * v[..., 0]
    return out


def _dmat(D, v):
    D = np.asarray(D, dtype=float)
    sym = D + np.swapaxes(D, -1, -2)
    tr = np.trace(D, axis1=-2, axis2=-1)[..., None, None]
    return 0.5 * (sym - tr * np.eye(3) + drift_matrix(v))


def decoherence_matrices_2level(me: MasterEquation2L, ts) -> np.ndarray:
    """Batched ``d(t) = (D + D^T - Tr[D] I + d_v) / 2`` on an array of times."""
    ts = np.asarray(ts, dtype=float)
    return _dmat(me.D(ts), me.v(ts))


def decoherence_matrix_2level(me: MasterEquation2L, t: float) -> DecoherenceMatrix:
    return DecoherenceMatrix(_dmat(me.D(t), me.v(t)), float(t))


def effective_hamiltonian(me: MasterEquation2L, t: float) -> EffectiveHamiltonian:
    D = me.D(t)
    coeff = np.array([D[1, 2] - D[2, 1], D[2, 0] - D[0, 2], D[0, 1] - D[1, 0]])
    return EffectiveHamiltonian(-0.25 * np.tensordot(coeff, PAULI, axes=1), float(t))


def hermitian_eigenvalues(d: Union[DecoherenceMatrix, np.ndarray]) -> DecoherenceSpectrum:
    """Real eigenvalues of ``d`` in ascending order (cyclic Jacobi)."""
    time = d.time if isinstance(d, DecoherenceMatrix) else 0.0
    m = np.asarray(d)
    jacobi.check_hermitian(m, HERMITIAN_TOL)
    return DecoherenceSpectrum(jacobi.eigvalsh(m), time)


def canonical_decomposition(d, basis=None, rate_tol: float = 1e-14):
    """Canonical rates and decoherence operators.

    Returns a list of ``(rate, L)`` pairs with ``L = sum_j U_ji G_j`` built
    from the Jacobi eigenvectors; pairs with ``|rate| <= rate_tol * ||d||`` are
    dropped, so ``d = 0`` gives an empty list.  The operators are orthonormal
    under ``Tr[L_i^dag L_j]``.
    """
    m = np.asarray(d)
    jacobi.check_hermitian(m, HERMITIAN_TOL)
    k = m.shape[0]
    if basis is None:
        n = int(round(np.sqrt(k + 1)))
        if n * n - 1 != k:
            raise DimensionError(f"{k} is not of the form n^2 - 1")
        basis = generalized_basis(n)
    basis = np.asarray(basis)
    if basis.shape[0] != k:
        raise DimensionError(f"basis has {basis.shape[0]} elements, d is {k}x{k}")
    w, U = jacobi.jacobi_eigh(m.astype(complex))
    scale = max(float(np.max(np.abs(m), initial=0.0)), np.finfo(float).tiny)
    out = []
    for i in range(k):
        if abs(w[i]) <= rate_tol * scale:
            continue
        out.append((float(w[i]), np.tensordot(U[:, i], basis, axes=1)))
    return out


def canonical_rhs(rho, rates_ops, hamiltonian=None) -> np.ndarray:
    """``-i[H, rho] + sum_i g_i (L_i rho L_i^dag - {L_i^dag L_i, rho}/2)``."""
    rho = np.asarray(rho, dtype=complex)
    out = np.zeros_like(rho)
    if hamiltonian is not None:
        h = np.asarray(hamiltonian)
        out += -1j * (h @ rho - rho @ h)
    for g, L in rates_ops:
        Ld = L.conj().T
        out += g * (L @ rho @ Ld - 0.5 * (Ld @ L @ rho + rho @ Ld @ L))
    return out


class SampledDecoherence:
    """Decoherence matrices sampled on a time grid, linearly interpolated."""

    def __init__(self, times, matrices):
        times = np.asarray(times, dtype=float)
        matrices = np.asarray(matrices, dtype=complex)
        if times.ndim != 1 or matrices.shape[0] != times.size:
            raise DimensionError("one matrix per time sample is required")
        if np.any(np.diff(times) <= 0):
            raise ValueError("sample times must be strictly increasing")
        k = matrices.shape[1]
        n = int(round(np.sqrt(k + 1)))
        if n * n - 1 != k or matrices.shape[2] != k:
            raise DimensionError(f"matrices of size {k} are not (n^2-1) x (n^2-1)")
        jacobi.check_hermitian(matrices, 1e-10)
        self.times = times
        self.matrices = 0.5 * (matrices + np.conj(np.swapaxes(matrices, -1, -2)))
        self.n = n

    @property
    def t_end(self) -> float:
        return float(self.times[-1])

    def __call__(self, ts):
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        if self.times.size == 1:
            out = np.broadcast_to(self.matrices[0], ts.shape + self.matrices.shape[1:]).copy()
        else:
            k = np.clip(np.searchsorted(self.times, ts, side="right") - 1, 0, self.times.size - 2)
            t0, t1 = self.times[k], self.times[k + 1]
            s = np.clip((ts - t0) / (t1 - t0), 0.0, 1.0)[..., None, None]
            out = (1 - s) * self.matrices[k] + s * self.matrices[k + 1]
        return out[0] if scalar else out

    def at(self, t: float) -> DecoherenceMatrix:
        return DecoherenceMatrix(self(t), float(t))


def read_decoherence_table(source) -> SampledDecoherence:
    """Parse the sampled decoherence-matrix text table.

    One row per time sample: the time, then the ``(n^2-1)^2`` entries of
    ``d(t)`` in row-major order as real, imaginary pairs.  Separators may be
    commas and/or whitespace; ``#`` starts a comment.
    """
    if isinstance(source, (str, os.PathLike)) and os.path.exists(source):
        with open(source) as fh:
            text = fh.read()
    elif isinstance(source, io.IOBase):
        text = source.read()
    else:
        text = str(source)
    times, mats = [], []
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        vals = np.array([float(x) for x in line.replace(",", " ").split()])
        m = (vals.size - 1) // 2
        k = int(round(np.sqrt(m)))
        if vals.size < 3 or (vals.size - 1) % 2 or k * k != m:
            raise DimensionError(f"line {lineno}: {vals.size - 1} matrix values is not 2*(n^2-1)^2")
        times.append(vals[0])
        pairs = vals[1:].reshape(k, k, 2)
        mats.append(pairs[..., 0] + 1j * pairs[..., 1])
    if not times:
        raise ValueError("empty decoherence table")
    if len({m.shape for m in mats}) != 1:
        raise DimensionError("rows have different matrix sizes")
    return SampledDecoherence(times, mats)


def write_decoherence_table(path, times, matrices) -> None:
    with open(path, "w") as fh:
        for t, m in zip(times, matrices):
            m = np.asarray(m, dtype=complex).ravel()
            fields = [repr(float(t))] + [f"{float(x.real)!r},{float(x.imag)!r}" for x in m]
            fh.write(" ".join(fields) + "\n")
