"""Built-in master equations: phase damping, amplitude damping, spin-boson.

Spin-boson conventions
----------------------
The weak-coupling spin-boson model is driven by the noise and dissipation
kernels of an Ohmic bath with Lorentz-Drude cutoff,

    J(w)  = (alpha / pi) (w / w_A) Omega^2 / (Omega^2 + w^2)
    K1(s) = int_0^inf J(w) cos(w s) dw
    K(s)  = int_0^inf J(w) sin(w s) dw = alpha Omega^2 exp(-Omega s) / (2 w_A)

(vacuum bath), from which

    g(t)  = 2 int_0^t exp(-i w_A s) K1(s) ds
    v3(t) = -4 int_0^t sin(w_A s) K(s) ds.

``K1`` has the closed form ``c [e^x E1(x) - e^-x Ei(x)] / 2`` with
``x = Omega s`` and ``c = alpha Omega^2 / (pi w_A)``; it is used for
production, and a Gauss-Kronrod frequency quadrature is kept as an
independent cross-check.  The coefficients settle to their limits as
``1/t^2``; after ``settle_time`` the analytic limits are used and the
master equation is flagged constant so propagation can switch to the exact
exponential.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable, Optional, Union

import numpy as np
from scipy import integrate, special

from .propagation import MasterEquation2L, RangeError

__all__ = [
    "RateFunction", "as_rate", "phase_damping", "amplitude_damping",
    "from_canonical", "sampled_model", "SpinBosonParams", "SpinBosonCoefficients",
    "ohmic_lorentz_drude", "spin_boson_kernels", "noise_kernel",
    "dissipation_kernel", "spin_boson_coefficients", "spin_boson_model",
    "spin_boson_ndst_ub_approx", "ApproximationError",
]

WEAK_COUPLING_LIMIT = 0.1


class ApproximationError(ValueError):
    """The plateau approximation is undefined for these parameters."""


@dataclass(frozen=True)
class RateFunction:
    """Time-dependent rate ``t -> gamma(t)``, vectorized over ``t``."""

    func: Callable
    label: str = "rate"

    def __call__(self, t):
        t = np.asarray(t, dtype=float)
        return np.broadcast_to(np.asarray(self.func(t), dtype=float), t.shape).copy()


def as_rate(rate: Union[float, Callable, RateFunction]) -> RateFunction:
    if isinstance(rate, RateFunction):
        return rate
    if callable(rate):
        return RateFunction(rate, getattr(rate, "__name__", "rate"))
    c = float(rate)
    return RateFunction(lambda t: np.full(np.shape(t), c), f"{c:g}")


def phase_damping(gamma_p) -> MasterEquation2L:
    """``rho' = gamma_p (sigma_3 rho sigma_3 - rho)``."""
    rate = as_rate(gamma_p)

    def drift(t):
        return np.zeros(np.shape(t) + (3,))

    def damping(t):
        g = rate(t)
        out = np.zeros(g.shape + (3, 3))
        out[..., 0, 0] = out[..., 1, 1] = -2.0 * g
        return out

    return MasterEquation2L(drift, damping, label="phase", params={"gamma_p": rate.label})


def amplitude_damping(gamma_a) -> MasterEquation2L:
    """``rho' = gamma_a (sigma_- rho sigma_+ - {sigma_+ sigma_-, rho} / 2)``."""
    rate = as_rate(gamma_a)

    def drift(t):
        g = rate(t)
        out = np.zeros(g.shape + (3,))
        out[..., 2] = -g
        return out

    def damping(t):
        g = rate(t)
        out = np.zeros(g.shape + (3, 3))
        out[..., 0, 0] = out[..., 1, 1] = -0.5 * g
        out[..., 2, 2] = -g
        return out

    return MasterEquation2L(drift, damping, label="amplitude", params={"gamma_a": rate.label})


def bloch_generator(h, d):
    """``(v, D)`` of the Bloch equation for ``H = h . sigma`` and decoherence matrix ``d``.

    Inverse of the decoherence-matrix and effective-Hamiltonian construction;
    batched over leading axes.
    """
    h = np.asarray(h, dtype=float)
    d = np.asarray(d, dtype=complex)
    re, im = d.real, d.imag
    tr_re = np.trace(re, axis1=-2, axis2=-1)[..., None, None]
    sym = 2.0 * re - 2.0 * tr_re * np.eye(3)  # D + D^T
    v = np.stack([2 * im[..., 2, 1], 2 * im[..., 0, 2], 2 * im[..., 1, 0]], axis=-1)
    a = -4.0 * h  # (D23 - D32, D31 - D13, D12 - D21)
    anti = np.zeros(a.shape[:-1] + (3, 3))
    anti[..., 1, 2], anti[..., 2, 1] = a[..., 0] / 2, -a[..., 0] / 2
    anti[..., 2, 0], anti[..., 0, 2] = a[..., 1] / 2, -a[..., 1] / 2
    anti[..., 0, 1], anti[..., 1, 0] = a[..., 2] / 2, -a[..., 2] / 2
    return v, 0.5 * sym + anti


def from_canonical(h_fn: Callable, d_fn: Callable, label: str = "canonical") -> MasterEquation2L:
    """Master equation from a Hamiltonian vector ``h(t)`` and decoherence matrix ``d(t)``."""

    def drift(t):
        return bloch_generator(h_fn(t), d_fn(t))[0]

    def damping(t):
        return bloch_generator(h_fn(t), d_fn(t))[1]

    return MasterEquation2L(drift, damping, label=label)


def sampled_model(times, v, D, label: str = "sampled") -> MasterEquation2L:
    """Master equation from ``v`` and ``D`` sampled on ``times``, linearly interpolated.

    Requests outside ``[times[0], times[-1]]`` raise :class:`RangeError`.
    """
    times = np.asarray(times, dtype=float)
    v = np.asarray(v, dtype=float).reshape(-1, 3)
    D = np.asarray(D, dtype=float).reshape(-1, 3, 3)
    if times.ndim != 1 or v.shape[0] != times.size or D.shape[0] != times.size:
        raise ValueError("one drift vector and damping matrix per sample time is required")
    if times.size > 1 and np.any(np.diff(times) <= 0):
        raise ValueError("sample times must be strictly increasing")
    flat = np.concatenate([v, D.reshape(-1, 9)], axis=1)
    span = times[-1] - times[0]

    def interp(t):
        t = np.asarray(t, dtype=float)
        if np.any(t < times[0] - 1e-12 * max(1.0, span)) or np.any(t > times[-1] * (1 + 1e-12) + 1e-12):
            raise RangeError(f"time outside the sampled window [{times[0]:g}, {times[-1]:g}]")
        if times.size == 1:
            return np.broadcast_to(flat[0], t.shape + (12,))
        k = np.clip(np.searchsorted(times, t, side="right") - 1, 0, times.size - 2)
        s = np.clip((t - times[k]) / (times[k + 1] - times[k]), 0.0, 1.0)[..., None]
        return (1 - s) * flat[k] + s * flat[k + 1]

    def drift(t):
        return interp(t)[..., :3]

    def damping(t):
        y = interp(t)[..., 3:]
        return y.reshape(y.shape[:-1] + (3, 3))

    return MasterEquation2L(drift, damping, label=label)


# --------------------------------------------------------------------------
# spin-boson


@dataclass(frozen=True)
class SpinBosonParams:
    """Spin-boson parameters.

    Attributes
    ----------
    omega_a : float
        Level separation; the natural unit of frequency.
    alpha : float
        Dimensionless coupling strength.
    omega_c : float
        Cutoff frequency ``Omega`` of the Lorentz-Drude spectral density.
    omega_max_factor : float
        Frequency cutoff of the kernel quadrature, in units of ``omega_c``.
    settle_time : float, optional
        Time after which the coefficients are replaced by their limits.
        Default ``max(400 / omega_a, 40 / omega_c)``.
    step : float, optional
        Table spacing in the early region, default
        ``0.005 / max(omega_a, omega_c)``.
    occupation : float
        Bath mode occupation; only the vacuum (0) is supported.
    """

    omega_a: float = 1.0
    alpha: float = 0.01
    omega_c: float = 1.0
    omega_max_factor: float = 200.0
    settle_time: Optional[float] = None
    step: Optional[float] = None
    occupation: float = 0.0

    def __post_init__(self):
        if not (self.omega_a > 0 and self.omega_c > 0 and self.alpha >= 0):
            raise ValueError("need omega_a > 0, omega_c > 0 and alpha >= 0")
        if self.occupation != 0.0:
            raise ValueError("only the vacuum bath (occupation 0) is supported")
        if self.alpha / self.omega_a > WEAK_COUPLING_LIMIT:
            warnings.warn(
                f"alpha/omega_a = {self.alpha / self.omega_a:g} is outside the weak-coupling regime",
                stacklevel=2)

    @property
    def t_settle(self) -> float:
        if self.settle_time is not None:
            return float(self.settle_time)
        return max(400.0 / self.omega_a, 40.0 / self.omega_c)

    @property
    def h_fine(self) -> float:
        if self.step is not None:
            return float(self.step)
        return 0.005 / max(self.omega_a, self.omega_c)

    @property
    def prefactor(self) -> float:
        """``alpha Omega^2 / (pi omega_a)``, the scale of ``K1``."""
        return self.alpha * self.omega_c ** 2 / (np.pi * self.omega_a)

    @property
    def g_inf(self) -> complex:
        """Limit of ``g(t)``: ``pi J(w_A)`` plus the principal-value shift."""
        a, w, om = self.alpha, self.omega_a, self.omega_c
        den = om ** 2 + w ** 2
        return complex(a * om ** 2 / den, 2 * a * om ** 2 * np.log(om / w) / (np.pi * den))

    @property
    def v3_inf(self) -> float:
        return -2 * self.alpha * self.omega_c ** 2 / (self.omega_c ** 2 + self.omega_a ** 2)

    @property
    def tau_c(self) -> float:
        return 1.0 / self.omega_c

    @property
    def tau_r(self) -> float:
        return 1.0 / self.g_inf.real if self.g_inf.real > 0 else np.inf


def ohmic_lorentz_drude(p: SpinBosonParams) -> Callable:
    def J(w):
        w = np.asarray(w, dtype=float)
        return (p.alpha / np.pi) * (w / p.omega_a) * p.omega_c ** 2 / (p.omega_c ** 2 + w ** 2)

    return J


_ASYMPTOTIC_X = 50.0


def _cosine_transform(x):
    """``int_0^inf y cos(x y) / (1 + y^2) dy`` for ``x > 0``."""
    x = np.asarray(x, dtype=float)
    out = np.empty_like(x)
    small = x <= _ASYMPTOTIC_X
    xs = x[small]
    out[small] = 0.5 * (np.exp(xs) * special.exp1(xs) - np.exp(-xs) * special.expi(xs))
    out[~small] = -_odd_series(x[~small])
    return out


def _odd_series(x):
    """``sum_{k odd} k! / x^(k+1)``, asymptotic for large ``x`` (8 terms)."""
    inv2 = 1.0 / (x * x)
    total = np.zeros_like(x)
    term = inv2.copy()
    for k in range(1, 17, 2):
        total += term
        term = term * (k + 1) * (k + 2) * inv2
    return total


def noise_kernel(p: SpinBosonParams, s):
    """``K1(s)`` from its exponential-integral closed form (``s > 0``)."""
    s = np.asarray(s, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        x = np.where(s > 0, p.omega_c * s, 1.0)
        out = p.prefactor * _cosine_transform(x)
    return np.where(s > 0, out, np.inf)


def dissipation_kernel(p: SpinBosonParams, s):
    """``K(s) = alpha Omega^2 exp(-Omega s) / (2 w_A)`` for ``s > 0``, ``K(0) = 0``."""
    s = np.asarray(s, dtype=float)
    val = p.alpha * p.omega_c ** 2 * np.exp(-p.omega_c * np.abs(s)) / (2 * p.omega_a)
    return np.where(s > 0, val, 0.0)


def _kernel_quad(p: SpinBosonParams, s: float, weight: str):
    """One kernel value by frequency quadrature, with its error estimate.

    Adaptive Gauss-Kronrod with trigonometric weight on
    ``[0, omega_max_factor * Omega]``; the slowly decaying oscillatory
    remainder is a Fourier integral on ``[omega_max, inf)``.
    """
    J = ohmic_lorentz_drude(p)
    w_max = p.omega_max_factor * p.omega_c
    eps = 1e-14 * p.prefactor
    with warnings.catch_warnings():
        # QUADPACK flags roundoff at this demanding tolerance; the returned
        # error estimate is reported instead
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        head, e1 = integrate.quad(J, 0.0, w_max, weight=weight, wvar=s, limit=1000,
                                  epsabs=eps, epsrel=1e-12)
        tail, e2 = integrate.quad(J, w_max, np.inf, weight=weight, wvar=s, limlst=200, epsabs=eps)
    return head + tail, e1 + e2


def spin_boson_kernels(p: SpinBosonParams, method: str = "exact"):
    """Noise and dissipation kernels ``(K1, K)`` as vectorized callables.

    ``method="quadrature"`` evaluates both by frequency quadrature (slow,
    used as an independent check); each callable then also exposes the
    achieved error estimate through ``.last_error``.
    """
    if method == "exact":
        return (lambda s: noise_kernel(p, s)), (lambda s: dissipation_kernel(p, s))
    if method != "quadrature":
        raise ValueError(f"unknown kernel method {method!r}")

    class _Quad:
        def __init__(self, weight):
            self.weight = weight
            self.last_error = 0.0

        def __call__(self, s):
            s = np.asarray(s, dtype=float)
            out = np.empty(s.shape)
            err = 0.0
            for idx, si in np.ndenumerate(s):
                if si == 0.0:
                    out[idx] = np.inf if self.weight == "cos" else 0.0
                    continue
                out[idx], e = _kernel_quad(p, float(si), self.weight)
                err = max(err, e)
            self.last_error = err
            return out

    return _Quad("cos"), _Quad("sin")


# Gauss-Legendre rule for the per-cell integrals of the coefficient table
_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_GL4_X, _GL4_W = np.polynomial.legendre.leggauss(4)
_EULER = float(np.euler_gamma)


@dataclass(frozen=True)
class SpinBosonCoefficients:
    """Tabulated ``g(t)`` and ``v3(t)`` with their time derivatives.

    Between table points values are cubic Hermite interpolants; below the
    first table point the small-time expansion is used; after
    ``settle_time`` (when ``plateau`` is set) the analytic limits.
    """

    params: SpinBosonParams
    grid: np.ndarray
    g: np.ndarray
    v3: np.ndarray
    dg: np.ndarray
    dv3: np.ndarray
    plateau: bool
    error_estimate: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def g_real(self) -> np.ndarray:
        return self.g.real

    @property
    def g_imag(self) -> np.ndarray:
        return self.g.imag

    @property
    def t_table(self) -> float:
        return float(self.grid[-1])

    @property
    def settle_time(self) -> Optional[float]:
        return self.t_table if self.plateau else None

    @property
    def g_inf(self) -> complex:
        return self.params.g_inf

    @property
    def v3_inf(self) -> float:
        return self.params.v3_inf

    def __call__(self, t):
        """``(g(t), v3(t))`` for scalar or array ``t``."""
        t = np.asarray(t, dtype=float)
        scalar = t.ndim == 0
        t = np.atleast_1d(t)
        if np.any(t < 0):
            raise RangeError("negative time")
        if not self.plateau and np.any(t > self.t_table * (1 + 1e-12)):
            raise RangeError(f"time beyond the tabulated range {self.t_table:g}")
        g = np.empty(t.shape, dtype=complex)
        v3 = np.empty(t.shape)
        t0 = self.grid[0]
        early = t < t0
        late = (t >= self.t_table) if self.plateau else np.zeros(t.shape, dtype=bool)
        mid = ~(early | late)
        if early.any():
            g[early], v3[early] = _small_time(self.params, t[early])
        if late.any():
            g[late] = self.params.g_inf
            v3[late] = self.params.v3_inf
        if mid.any():
            g[mid], v3[mid] = self._hermite(t[mid])
        if scalar:
            return g[0], v3[0]
        return g, v3

    def at(self, t: float):
        """Scalar fast path of :meth:`__call__` (used inside the ODE RHS)."""
        grid = self.grid
        if t < grid[0] or t >= self.t_table:
            g, v3 = self(t)
            return complex(g), float(v3)
        k = min(int(np.searchsorted(grid, t, side="right")) - 1, grid.size - 2)
        t0 = grid[k]
        h = grid[k + 1] - t0
        s = (t - t0) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = (s3 - 2 * s2 + s) * h
        h01 = -2 * s3 + 3 * s2
        h11 = (s3 - s2) * h
        g = h00 * self.g[k] + h10 * self.dg[k] + h01 * self.g[k + 1] + h11 * self.dg[k + 1]
        v = h00 * self.v3[k] + h10 * self.dv3[k] + h01 * self.v3[k + 1] + h11 * self.dv3[k + 1]
        return complex(g), float(v)

    def _hermite(self, t):
        grid = self.grid
        k = np.clip(np.searchsorted(grid, t, side="right") - 1, 0, grid.size - 2)
        h = grid[k + 1] - grid[k]
        s = (t - grid[k]) / h
        s2 = s * s
        s3 = s2 * s
        h00 = 2 * s3 - 3 * s2 + 1
        h10 = s3 - 2 * s2 + s
        h01 = -2 * s3 + 3 * s2
        h11 = s3 - s2
        g = h00 * self.g[k] + h10 * h * self.dg[k] + h01 * self.g[k + 1] + h11 * h * self.dg[k + 1]
        v = h00 * self.v3[k] + h10 * h * self.dv3[k] + h01 * self.v3[k + 1] + h11 * h * self.dv3[k + 1]
        return g, v


def _small_time(p: SpinBosonParams, t):
    """Leading small-time behaviour from ``K1(s) ~ c (-gamma - ln(Omega s))``."""
    c = p.prefactor
    with np.errstate(divide="ignore", invalid="ignore"):
        lg = np.where(t > 0, np.log(p.omega_c * np.where(t > 0, t, 1.0)), 0.0)
    re = 2 * c * t * (1 - _EULER - lg)
    im = -2 * p.omega_a * c * t * t * (0.25 - 0.5 * _EULER - 0.5 * lg)
    v3 = -p.alpha * p.omega_c ** 2 * t * t
    return re + 1j * im, v3


def _table_grid(p: SpinBosonParams, t_end: float) -> np.ndarray:
    h = p.h_fine
    scale = min(1.0 / p.omega_c, 1.0 / p.omega_a)
    t_min = 1e-9 * scale
    geo = t_min * 1.05 ** np.arange(int(np.ceil(np.log(h / t_min) / np.log(1.05))))
    t_fine = max(20.0 / p.omega_c, 20.0 / p.omega_a)
    fine = np.arange(h, t_fine, h)
    coarse_h = 0.05 / p.omega_a
    coarse = np.arange(t_fine, t_end, coarse_h)
    grid = np.concatenate([geo[geo < h], fine, coarse, [t_end]])
    grid = grid[grid <= t_end]
    return np.unique(grid)


def _integrands(p: SpinBosonParams, s):
    k1 = noise_kernel(p, s)
    k = dissipation_kernel(p, s)
    return 2 * np.exp(-1j * p.omega_a * s) * k1, -4 * np.sin(p.omega_a * s) * k


def spin_boson_coefficients(p: SpinBosonParams, t_end: Optional[float] = None,
                            tol: float = 1e-10) -> SpinBosonCoefficients:
    """Tabulate ``g(t)`` and ``v3(t)``.

    The table runs to ``p.t_settle`` (the limits are used afterwards); when
    an explicit ``t_end`` shorter than that is given, the table stops there
    and evaluation beyond it is an error.  Each cell integral uses 8-point
    Gauss-Legendre; the difference to the embedded 4-point rule, summed over
    cells, is reported as ``error_estimate`` and compared against ``tol``.
    """
    if t_end is not None and not t_end > 0:
        raise ValueError("t_end must be positive")
    t_stop = p.t_settle if t_end is None else min(float(t_end), p.t_settle)
    plateau = t_end is None or t_end >= p.t_settle
    grid = _table_grid(p, t_stop)
    a, b = grid[:-1], grid[1:]
    c = 0.5 * (a + b)
    hw = 0.5 * (b - a)
    nodes = c[:, None] + hw[:, None] * _GL_X
    fg, fv = _integrands(p, nodes)
    cell_g = hw * (fg @ _GL_W)
    cell_v = hw * (fv @ _GL_W)
    nodes4 = c[:, None] + hw[:, None] * _GL4_X
    fg4, fv4 = _integrands(p, nodes4)
    err = float(np.sum(np.abs(cell_g - hw * (fg4 @ _GL4_W)))
                + np.sum(np.abs(cell_v - hw * (fv4 @ _GL4_W))))
    g0, v0 = _small_time(p, grid[:1])
    g = np.concatenate([g0, g0 + np.cumsum(cell_g)])
    v3 = np.concatenate([v0, v0 + np.cumsum(cell_v)])
    dg, dv3 = _integrands(p, grid)
    if err > tol:
        warnings.warn(f"spin-boson coefficient error estimate {err:.2e} exceeds tol {tol:.1e}",
                      stacklevel=2)
    return SpinBosonCoefficients(p, grid, g, v3, dg, dv3, plateau, err,
                                 {"cells": int(a.size)})


def spin_boson_model(coeffs: SpinBosonCoefficients, omega_a: Optional[float] = None,
                     zero_drift: bool = False) -> MasterEquation2L:
    """Bloch-form spin-boson master equation from tabulated coefficients.

    ``zero_drift`` forces ``v3 = 0`` (the unital variant).
    """
    w = coeffs.params.omega_a if omega_a is None else float(omega_a)

    def drift(t):
        _, v3 = coeffs(t)
        v3 = np.asarray(v3)
        out = np.zeros(v3.shape + (3,))
        if not zero_drift:
            out[..., 2] = v3
        return out

    def damping(t):
        g, _ = coeffs(t)
        g = np.asarray(g)
        out = np.zeros(g.shape + (3, 3))
        out[..., 0, 1] = -w
        out[..., 1, 0] = w - 2 * g.imag
        out[..., 1, 1] = -2 * g.real
        out[..., 2, 2] = -2 * g.real
        return out

    def generator(t):
        g, v3 = coeffs.at(float(t))
        v = np.array([0.0, 0.0, 0.0 if zero_drift else v3])
        D = np.array([[0.0, -w, 0.0],
                      [w - 2 * g.imag, -2 * g.real, 0.0],
                      [0.0, 0.0, -2 * g.real]])
        return v, D

    p = coeffs.params
    params = {"omega_a": w, "alpha": p.alpha, "omega_c": p.omega_c, "zero_drift": zero_drift}
    return MasterEquation2L(drift, damping, label="spin_boson",
                            constant_after=coeffs.settle_time, params=params,
                            generator=generator)


def spin_boson_ndst_ub_approx(coeffs: Union[SpinBosonCoefficients, SpinBosonParams]) -> float:
    """``sqrt(1 + nu^2) - 1`` with ``nu = g_i(inf) / g_r(inf)``."""
    g = coeffs.g_inf
    if not g.real > 0:
        raise ApproximationError("g_r(inf) must be positive")
    nu = g.imag / g.real
    return float(np.hypot(1.0, nu) - 1.0)
