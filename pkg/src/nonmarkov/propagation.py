"""Affine dynamical map of a two-level master equation.

The Bloch equation ``lam' = v(t) + D(t) lam`` is solved through the map
``lam(t) = w(t) + N(t) lam(0)`` with

    w' = v + D w,   w(0) = 0
    N' = D N,       N(0) = I

integrated jointly as a 12 component state.  When a master equation declares
``constant_after``, the generator is constant from that time on and the map
is continued exactly with the matrix exponential of the augmented 4x4
generator instead of time stepping.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.linalg import expm

from . import jacobi
from .bloch import PAULI
from .ode import DenseOutput, IntegrationError, integrate

__all__ = [
    "MasterEquation2L", "MapTrajectory", "ChoiMatrix", "IntegrationError",
    "RangeError", "propagate", "apply_map", "matrix_norm", "choi_matrix",
    "choi_and_cp_check", "cp_trace", "extend_tail", "DEFAULT_CP_TOL",
]

DEFAULT_CP_TOL = 1e-8
DEFAULT_ODE_TOL = 1e-9


class RangeError(ValueError):
    """Requested time lies outside the propagated window."""


def _batch(fn, ts, shape):
    """Evaluate ``fn`` on an array of times, falling back to a loop."""
    ts = np.asarray(ts, dtype=float)
    try:
        out = np.asarray(fn(ts), dtype=float)
        if out.shape == ts.shape + shape:
            return out
    except (TypeError, ValueError):
        pass
    flat = [np.asarray(fn(float(t)), dtype=float) for t in ts.ravel()]
    return np.array(flat).reshape(ts.shape + shape)


@dataclass(frozen=True)
class MasterEquation2L:
    """Bloch-space master equation ``lam' = v(t) + D(t) lam``.

    ``drift`` and ``damping`` map a time (scalar or array) to ``v`` with shape
    ``(..., 3)`` and ``D`` with shape ``(..., 3, 3)``.  Scalar-only callables
    are accepted and looped over.  ``constant_after`` promises that both are
    constant for ``t >= constant_after``.  ``generator``, if given, returns
    ``(v, D)`` for one scalar time and is preferred by the ODE solver.
    """

    drift: Callable
    damping: Callable
    label: str = "custom"
    constant_after: Optional[float] = None
    params: dict = field(default_factory=dict, compare=False)
    generator: Optional[Callable] = field(default=None, compare=False, repr=False)

    def v(self, t):
        return _batch(self.drift, t, (3,))

    def D(self, t):
        return _batch(self.damping, t, (3, 3))

    def asymptote(self):
        if self.constant_after is None:
            return None
        t = self.constant_after
        return self.v(t), self.D(t)


@dataclass(frozen=True)
class _ExactTail:
    t0: float
    t_end: float
    start: np.ndarray  # augmented 4x4 map at t0
    generator: np.ndarray  # augmented 4x4 generator

    def __post_init__(self):
        w, V = np.linalg.eig(self.generator)
        eig = None
        if np.linalg.cond(V) < 1e6:
            eig = (w, V, np.linalg.solve(V, self.start.astype(complex)))
        object.__setattr__(self, "_eig", eig)

    def __call__(self, ts):
        tau = np.asarray(ts, dtype=float) - self.t0
        flat_tau = tau.ravel()
        if self._eig is not None:
            w, V, rest = self._eig
            # sum_j V[:, j] exp(w_j tau) rest[j, :] as one (t, 4) @ (4, 16) product
            outer = np.einsum("ij,jk->jik", V, rest).reshape(4, 16)
            out = (np.exp(np.multiply.outer(flat_tau, w)) @ outer).real
            return out.reshape(tau.shape + (4, 4))
        out = np.empty((flat_tau.size, 4, 4))
        for lo in range(0, flat_tau.size, 20000):
            chunk = flat_tau[lo:lo + 20000]
            out[lo:lo + chunk.size] = expm(self.generator[None] * chunk[:, None, None]) @ self.start
        return out.reshape(tau.shape + (4, 4))

    def cell_width(self) -> float:
        # one oscillation period, or two decay times, per cell
        ev = np.linalg.eigvals(self.generator[:3, :3])
        osc = float(np.max(np.abs(ev.imag)))
        rate = float(np.max(np.abs(ev.real)))
        width = self.t_end - self.t0
        if osc > 0:
            width = min(width, 2 * np.pi / osc)
        if rate > 0:
            width = min(width, 2.0 / rate)
        return max(width, (self.t_end - self.t0) / 2_000_000)


@dataclass(frozen=True)
class MapTrajectory:
    """Samples of ``w(t)`` and ``N(t)`` on ``[0, t_end]`` with dense output."""

    table: DenseOutput
    tol: float
    tail: Optional[_ExactTail] = None

    @property
    def t_end(self) -> float:
        return self.tail.t_end if self.tail is not None else float(self.table.t[-1])

    @property
    def t_switch(self) -> float:
        return float(self.table.t[-1])

    @property
    def step_grid(self) -> np.ndarray:
        """Accepted integrator steps (exact-tail part excluded)."""
        return self.table.t

    @property
    def grid(self) -> np.ndarray:
        """Accepted steps followed by the cell edges of the exact tail."""
        if self.tail is None:
            return self.table.t
        return np.concatenate([self.table.t, self.tail_edges()[1:]])

    def tail_edges(self) -> np.ndarray:
        if self.tail is None:
            return np.empty(0)
        n = int(np.ceil((self.tail.t_end - self.tail.t0) / self.tail.cell_width()))
        return np.linspace(self.tail.t0, self.tail.t_end, max(n, 1) + 1)

    @property
    def w_samples(self) -> np.ndarray:
        return self.table.y[:, :3]

    @property
    def N_samples(self) -> np.ndarray:
        return self.table.y[:, 3:].reshape(-1, 3, 3)

    def state(self, ts):
        """Return ``(w, N)`` at the requested times (vectorized)."""
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        if np.any(ts < -1e-12) or np.any(ts > self.t_end * (1 + 1e-12) + 1e-12):
            raise RangeError(f"time outside [0, {self.t_end:g}]")
        w = np.empty(ts.shape + (3,))
        N = np.empty(ts.shape + (3, 3))
        in_rk = ts <= self.t_switch
        if in_rk.any():
            if len(self.table.t) == 1:
                y = np.broadcast_to(self.table.y[0], (int(in_rk.sum()), 12))
            else:
                y = self.table(np.clip(ts[in_rk], 0.0, self.t_switch))
            w[in_rk] = y[:, :3]
            N[in_rk] = y[:, 3:].reshape(-1, 3, 3)
        if (~in_rk).any():
            m = self.tail(ts[~in_rk])
            w[~in_rk] = m[:, :3, 3]
            N[~in_rk] = m[:, :3, :3]
        if scalar:
            return w[0], N[0]
        return w, N

    def w(self, ts):
        return self.state(ts)[0]

    def N(self, ts):
        return self.state(ts)[1]

    def norm_N(self, ts):
        return matrix_norm(self.N(ts))


def _augmented(v, D):
    g = np.zeros((4, 4))
    g[:3, :3] = D
    g[:3, 3] = v
    return g


def propagate(me: MasterEquation2L, t_end: float, tol: float = DEFAULT_ODE_TOL,
              max_step: float = np.inf) -> MapTrajectory:
    """Solve for ``w(t)`` and ``N(t)`` on ``[0, t_end]``.

    Raises :class:`~nonmarkov.ode.IntegrationError` (carrying the failure time)
    when the step size underflows.
    """
    if not t_end > 0:
        raise ValueError("t_end must be positive")
    if not tol > 0:
        raise ValueError("tol must be positive")

    def rhs(t, y):
        if me.generator is not None:
            v, D = me.generator(t)
        else:
            v, D = me.drift(t), me.damping(t)
        D = np.asarray(D, dtype=float)
        N = y[3:].reshape(3, 3)
        out = np.empty(12)
        out[:3] = np.asarray(v, dtype=float) + D @ y[:3]
        out[3:] = (D @ N).ravel()
        return out

    t_rk = float(t_end)
    if me.constant_after is not None:
        t_rk = min(t_rk, max(float(me.constant_after), 0.0))
    y0 = np.concatenate([np.zeros(3), np.eye(3).ravel()])
    if t_rk > 0:
        table = integrate(rhs, y0, t_rk, tol, max_step=max_step)
    else:
        table = DenseOutput(np.array([0.0]), y0[None], np.empty((0, 4, 12)))

    tail = None
    if t_end > t_rk:
        v_inf, D_inf = me.asymptote()
        start = np.eye(4)
        start[:3, :3] = table.y[-1, 3:].reshape(3, 3)
        start[:3, 3] = table.y[-1, :3]
        tail = _ExactTail(t_rk, float(t_end), start, _augmented(v_inf, D_inf))
    return MapTrajectory(table, tol, tail)


def extend_tail(traj: MapTrajectory, t_end: float) -> MapTrajectory:
    """Same trajectory with the exact constant-generator tail moved to ``t_end``."""
    if traj.tail is None:
        raise ValueError("trajectory has no constant tail to extend")
    if not t_end >= traj.t_switch:
        raise ValueError("t_end precedes the switch to the exact tail")
    tail = _ExactTail(traj.tail.t0, float(t_end), traj.tail.start, traj.tail.generator)
    return MapTrajectory(traj.table, traj.tol, tail)


def apply_map(traj: MapTrajectory, t, lam0):
    """``lam(t) = w(t) + N(t) lam0`` with dense-output interpolation."""
    w, N = traj.state(t)
    return w + N @ np.asarray(lam0, dtype=float)


def matrix_norm(N):
    """Spectral norm via the largest eigenvalue of ``N^T N`` (batched)."""
    return jacobi.spectral_norm(np.asarray(N, dtype=float))


@dataclass(frozen=True)
class ChoiMatrix:
    matrix: np.ndarray
    min_eigenvalue: float
    cp_tol: float = DEFAULT_CP_TOL

    @property
    def is_cp(self) -> bool:
        return self.min_eigenvalue >= -self.cp_tol

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))


def choi_matrix(w, N) -> np.ndarray:
    """Normalized Choi matrix ``(Phi (x) I)(|phi><phi|)`` of the affine map.

    The map acts as ``Phi(I) = I + w.sigma`` and
    ``Phi(sigma_k) = sum_j N[j, k] sigma_j``.  Batched over leading axes;
    the ordering is (system, ancilla).
    """
    w = np.asarray(w, dtype=float)
    N = np.asarray(N, dtype=float)
    phi_id = np.eye(2) + np.einsum("...j,jab->...ab", w, PAULI)
    phi_sig = np.einsum("...jk,jab->...kab", N, PAULI)
    # Phi(E_ij) = (delta_ij Phi(I) + sum_k (sigma_k)_ji Phi(sigma_k)) / 2
    phi_e = 0.5 * (np.einsum("ij,...ab->...ijab", np.eye(2), phi_id)
                   + np.einsum("kji,...kab->...ijab", PAULI, phi_sig))
    choi = 0.5 * np.einsum("...ijab->...aibj", phi_e)
    return choi.reshape(choi.shape[:-4] + (4, 4))


def choi_and_cp_check(traj: MapTrajectory, t: float, cp_tol: float = DEFAULT_CP_TOL) -> ChoiMatrix:
    w, N = traj.state(t)
    c = choi_matrix(w, N)
    return ChoiMatrix(c, float(jacobi.eigvalsh(c)[0]), cp_tol)


def cp_trace(traj: MapTrajectory, times=None) -> tuple[np.ndarray, np.ndarray]:
    """Minimum Choi eigenvalue at each time (default: the trajectory grid)."""
    times = traj.grid if times is None else np.asarray(times, dtype=float)
    w, N = traj.state(times)
    return times, jacobi.eigvalsh(choi_matrix(w, N))[..., 0]
