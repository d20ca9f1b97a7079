"""Witnesses, non-Markovianity measures and their bounds.

Distinguishability side (two-level only)
    sigma(t)          rate of change of the trace distance for one pair
    gamma_max(t)      largest eigenvalue of D + D^T
    N_dst             max over antipodal pure pairs of int max(sigma, 0)
    N_dst^ub          1/4 int (|gamma_max| + gamma_max) ||N(t)||
    analytic N_dst    exact value when D commutes with itself and D^T at all
                      times, has an antisymmetric off-diagonal part and one
                      eigen-index carries both gamma_max and Gamma_min

Divisibility side (any dimension)
    g_div(t)          1/2 sum (|gamma_i^d| - gamma_i^d)
    g_div^lb(t)       1/2 (sqrt(Tr d^2) - Tr d), clipped at 0
    N_div, N_div^lb   time integrals of the two witnesses
    modified          the same integrands weighted by ||N(t)||

All time integrals split the integration range where the integrand changes
sign, so adaptive Gauss-Kronrod sees smooth pieces only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Optional

import numpy as np
from scipy.optimize import minimize

from . import jacobi, quadrature
from .canonical import DecoherenceMatrix, DecoherenceSpectrum, decoherence_matrices_2level
from .propagation import (DEFAULT_CP_TOL, DEFAULT_ODE_TOL, MapTrajectory, MasterEquation2L,
                          cp_trace, extend_tail, matrix_norm, propagate)

__all__ = [
    "WitnessTrace", "MeasureReport", "AnalyticConditions", "SearchSettings",
    "DstOptimum", "AnalyticDst", "DivisibilityValue", "PropagationTooShort",
    "ConditionsNotMet", "sigma_witness", "gamma_max_trace", "n_dst_upper_bound",
    "n_dst_optimized", "check_analytic_conditions", "n_dst_analytic", "n_dst_axis",
    "gdiv_witness", "gdiv_lower_bound", "gdiv_lb_two_level", "gdiv_from_spectrum",
    "gdiv_lb_from_matrix", "sigma_values",
    "nondivisibility_sufficient", "n_div", "n_div_modified", "auto_horizon",
    "analyze", "analyze_nlevel",
]

DEFAULT_QUAD_TOL = 1e-10
ZERO_TOL = 1e-12
ENVELOPE_TOL = 1e-10
MOD_ENVELOPE_TOL = 1e-12
DIVERGENCE_THRESHOLD = 1e-8
TRAILING_WINDOW = 0.2
MIN_NORM = 1e-14


class PropagationTooShort(RuntimeError):
    """The bound envelope has not decayed by the end of the trajectory."""


class ConditionsNotMet(ValueError):
    """The analytic formula was requested but its conditions do not hold."""


class InconsistentInput(ArithmeticError):
    """A quantity that is non-negative for valid input came out negative."""


@dataclass
class WitnessTrace:
    """Witness samples on a time grid.

    ``func`` evaluates the witness at arbitrary times (vectorized) and is
    what the measures integrate; ``flags`` marks samples that were set by
    convention (for ``sigma``, points where the difference vector vanished).
    """

    grid: np.ndarray
    values: np.ndarray
    kind: str
    func: Optional[Callable] = field(default=None, repr=False)
    flags: Optional[np.ndarray] = None


@dataclass(frozen=True)
class SearchSettings:
    """Pair search for the distinguishability measure.

    The half sphere of directions is scanned on an ``n_theta x n_phi`` grid
    of cell centres with a cheap objective (positive-part trapezoid on a
    subdivided trajectory grid); Nelder-Mead then refines the best
    ``n_starts`` cells and each refined direction is re-evaluated with the
    adaptive quadrature.
    """

    n_theta: int = 24
    n_phi: int = 48
    n_starts: int = 3
    maxiter: int = 400
    xatol: float = 1e-9
    fatol: float = 1e-14
    sub_steps: int = 4
    sub_tail: int = 8


class DstOptimum(NamedTuple):
    value: float
    delta: np.ndarray
    pair: tuple
    candidates: list


class AnalyticDst(NamedTuple):
    value: float
    intervals: np.ndarray
    pair: Optional[tuple]


class DivisibilityValue(NamedTuple):
    """Integrated divisibility witness; ``value`` is ``inf`` when divergent."""

    value: float
    partial: float
    divergent: bool
    error: float = 0.0

    def __float__(self):
        return float(self.value)


@dataclass
class AnalyticConditions:
    cond_i: bool
    cond_ii: bool
    cond_iii: bool
    k_index: Optional[int]
    vacuous: bool
    degenerate: tuple
    times: np.ndarray
    Gamma: np.ndarray  # (len(times), 3)
    me: MasterEquation2L = field(repr=False)
    edges: np.ndarray = field(repr=False)
    detail: dict = field(default_factory=dict)

    @property
    def all_hold(self) -> bool:
        return self.cond_i and self.cond_ii and self.cond_iii

    def gamma_fn(self, ts):
        """``Gamma_i(t) = -1/2 int_0^t gamma_i^{D+D^T}`` for arbitrary times."""
        return _accumulated_diagonal(self.me, self.edges, ts)


@dataclass
class MeasureReport:
    n_dst: Optional[float]
    n_dst_ub: Optional[float]
    n_dst_analytic: Optional[float]
    n_div: float
    n_div_lb: float
    n_div_mod: Optional[float]
    n_div_mod_lb: Optional[float]
    growth_intervals: np.ndarray
    optimal_pair: Optional[tuple]
    conditions: Optional[AnalyticConditions]
    cp_min_eig: Optional[float]
    t_end: float
    n_div_partial: float = 0.0
    n_div_lb_partial: float = 0.0
    n_div_divergent: bool = False
    n_div_lb_divergent: bool = False
    metadata: dict = field(default_factory=dict)


# ---------------------------------------------------------------------------
# distinguishability


def _sym(D):
    return D + np.swapaxes(D, -1, -2)


def gamma_max_values(me: MasterEquation2L, ts) -> np.ndarray:
    return jacobi.max_eigenvalue(_sym(me.D(np.asarray(ts, dtype=float))))


def gamma_max_trace(me: MasterEquation2L, grid) -> WitnessTrace:
    """Largest eigenvalue of ``D + D^T`` on ``grid``."""
    grid = np.asarray(grid, dtype=float)
    return WitnessTrace(grid, gamma_max_values(me, grid), "gamma_max",
                        lambda t: gamma_max_values(me, t))


def sigma_values(me, traj, delta, ts):
    """``sigma`` at ``ts`` for the initial difference ``delta``, and the vanishing-norm mask."""
    ts = np.asarray(ts, dtype=float)
    x = traj.N(ts) @ delta
    S = _sym(me.D(ts))
    nrm = np.linalg.norm(x, axis=-1)
    num = np.einsum("...i,...ij,...j->...", x, S, x)
    small = nrm < MIN_NORM
    out = np.where(small, 0.0, num / (4 * np.where(small, 1.0, nrm)))
    return out, small


def sigma_witness(me: MasterEquation2L, traj: MapTrajectory, delta0, grid=None) -> WitnessTrace:
    """``sigma(t) = dl^T (D + D^T) dl / (4 |dl|)`` with ``dl = N(t) delta0``."""
    delta = np.asarray(delta0, dtype=float)
    if not np.linalg.norm(delta) > 0:
        raise ValueError("initial difference must be nonzero")
    grid = traj.grid if grid is None else np.asarray(grid, dtype=float)
    vals, flags = sigma_values(me, traj, delta, grid)
    return WitnessTrace(grid, vals, "sigma", lambda t: sigma_values(me, traj, delta, t)[0], flags)


def _envelope_samples(traj: MapTrajectory, window: float = TRAILING_WINDOW) -> np.ndarray:
    t1 = traj.t_end
    t0 = (1 - window) * t1
    edges = traj.grid
    inside = edges[(edges >= t0) & (edges <= t1)]
    uniform = np.linspace(t0, t1, 257)
    sub = quadrature.sample_points(inside, 4) if inside.size > 1 else inside
    return np.unique(np.concatenate([uniform, sub]))


def dst_envelope(me, traj, ts) -> np.ndarray:
    """Bound integrand ``(|gamma_max| + gamma_max) ||N||`` at ``ts``."""
    g = gamma_max_values(me, ts)
    return (np.abs(g) + g) * matrix_norm(traj.N(ts))


def _check_dst_envelope(me, traj, tol=ENVELOPE_TOL):
    ts = _envelope_samples(traj)
    worst = float(np.max(dst_envelope(me, traj, ts)))
    if not worst < tol:
        raise PropagationTooShort(
            f"bound integrand still {worst:.3e} near t_end={traj.t_end:g}; extend the horizon")


def _growth_regions(me, traj, edges=None):
    edges = traj.grid if edges is None else edges
    return quadrature.positive_regions(lambda t: gamma_max_values(me, t), edges, ZERO_TOL)


def _ub_details(me, traj, quad_tol, regions=None):
    edges = traj.grid
    if regions is None:
        regions = _growth_regions(me, traj, edges)

    def f(t):
        return 0.5 * gamma_max_values(me, t) * matrix_norm(traj.N(t))

    res = quadrature.integrate_regions(f, edges, regions, quad_tol)
    res.extra["regions"] = regions
    return res


def n_dst_upper_bound(me: MasterEquation2L, traj: MapTrajectory,
                      quad_tol: float = DEFAULT_QUAD_TOL, check: bool = True) -> float:
    """``1/4 int (|gamma_max| + gamma_max) ||N(t)|| dt`` over the trajectory."""
    if check:
        _check_dst_envelope(me, traj)
    return _ub_details(me, traj, quad_tol).value


def _direction(theta, phi):
    st = np.sin(theta)
    return np.stack([st * np.cos(phi), st * np.sin(phi), np.cos(theta) * np.ones_like(phi)], axis=-1)


def _quad_coeffs(u):
    """Coefficients ``c`` with ``u^T A u = c . a`` for packed symmetric ``a``."""
    u = np.asarray(u)
    return np.stack([u[..., 0] ** 2, u[..., 1] ** 2, u[..., 2] ** 2,
                     2 * u[..., 0] * u[..., 1], 2 * u[..., 0] * u[..., 2],
                     2 * u[..., 1] * u[..., 2]], axis=-1)


def _pack(A):
    return np.stack([A[..., 0, 0], A[..., 1, 1], A[..., 2, 2],
                     A[..., 0, 1], A[..., 0, 2], A[..., 1, 2]], axis=-1)


def _positive_trapezoid(ts, f):
    """Exact integral of the positive part of the piecewise-linear interpolant."""
    f0, f1 = f[..., :-1], f[..., 1:]
    h = np.diff(ts)
    both = (f0 >= 0) & (f1 >= 0)
    mixed = (f0 > 0) != (f1 > 0)
    pos = np.where(both, 0.5 * (f0 + f1), 0.0)
    fp = np.maximum(f0, f1)
    with np.errstate(invalid="ignore", divide="ignore"):
        part = 0.5 * fp * fp / (np.abs(f0) + np.abs(f1))
    pos = np.where(mixed & ~both, part, pos)
    return np.sum(pos * h, axis=-1)


class _CheapObjective:
    """Positive part of sigma integrated on a fixed fine sample grid.

    ``N^T S N`` and ``N^T N`` are precomputed once, so each direction costs
    two small matrix-vector products.
    """

    def __init__(self, me, traj, search: SearchSettings):
        parts = [quadrature.sample_points(traj.step_grid, search.sub_steps)]
        if traj.tail is not None:
            parts.append(quadrature.sample_points(traj.tail_edges(), search.sub_tail))
        ts = np.unique(np.concatenate(parts))
        N = traj.N(ts)
        S = _sym(me.D(ts))
        Nt = np.swapaxes(N, -1, -2)
        self.ts = ts
        self.m = _pack(Nt @ S @ N)
        self.g = _pack(Nt @ N)

    def values(self, u):
        """Integral for each direction in ``u`` (shape (k, 3))."""
        c = _quad_coeffs(u)  # (k, 6)
        out = np.empty(c.shape[0])
        chunk = max(1, 4_000_000 // max(self.ts.size, 1))
        for lo in range(0, c.shape[0], chunk):
            cc = c[lo:lo + chunk]
            num = cc @ self.m.T
            den = cc @ self.g.T
            with np.errstate(invalid="ignore", divide="ignore"):
                f = np.where(den > MIN_NORM ** 2, num / (2 * np.sqrt(np.abs(den))), 0.0)
            out[lo:lo + chunk] = _positive_trapezoid(self.ts, f)
        return out


def _accurate_sigma_integral(me, traj, u, quad_tol):
    delta = 2.0 * np.asarray(u, dtype=float)
    f = lambda t: sigma_values(me, traj, delta, t)[0]  # noqa: E731
    return quadrature.positive_part_integral(f, traj.grid, quad_tol).value


def n_dst_optimized(me: MasterEquation2L, traj: MapTrajectory,
                    search: Optional[SearchSettings] = None,
                    quad_tol: float = DEFAULT_QUAD_TOL, check: bool = True,
                    regions=None) -> DstOptimum:
    """Maximize ``int max(sigma, 0)`` over antipodal pure pairs ``delta0 = 2u``.

    Returns the best value found (a lower bound on the supremum), the
    difference vector ``delta0`` and the pair ``(u, -u)``.  When
    ``gamma_max <= 0`` on the whole trajectory the measure vanishes for every
    pair and no search is done.
    """
    search = search or SearchSettings()
    if check:
        _check_dst_envelope(me, traj)
    if regions is None:
        regions = _growth_regions(me, traj)
    if regions.size == 0:
        u = np.array([0.0, 0.0, 1.0])
        return DstOptimum(0.0, 2 * u, (u, -u), [])
    obj = _CheapObjective(me, traj, search)
    dth = 0.5 * np.pi / search.n_theta
    dph = 2 * np.pi / search.n_phi
    th = (np.arange(search.n_theta) + 0.5) * dth
    ph = (np.arange(search.n_phi) + 0.5) * dph
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    scan = obj.values(_direction(TH.ravel(), PH.ravel()))
    order = np.argsort(-scan, kind="stable")[:search.n_starts]

    def neg(x):
        return -float(obj.values(_direction(np.array([x[0]]), np.array([x[1]])))[0])

    candidates = []
    for idx in order:
        x0 = np.array([TH.ravel()[idx], PH.ravel()[idx]])
        simplex = np.array([x0, x0 + [dth, 0.0], x0 + [0.0, dph]])
        res = minimize(neg, x0, method="Nelder-Mead",
                       options={"initial_simplex": simplex, "xatol": search.xatol,
                                "fatol": search.fatol, "maxiter": search.maxiter})
        u = _direction(np.array([res.x[0]]), np.array([res.x[1]]))[0]
        candidates.append((_accurate_sigma_integral(me, traj, u, quad_tol), u, -res.fun))
    best = max(candidates, key=lambda c: c[0])
    u = best[1]
    return DstOptimum(float(best[0]), 2 * u, (u, -u), candidates)


def _sample_times(grid, limit):
    grid = np.asarray(grid, dtype=float)
    if grid.size <= limit:
        return grid
    idx = np.unique(np.linspace(0, grid.size - 1, limit).round().astype(int))
    return grid[idx]


def _accumulated_diagonal(me, edges, ts):
    """``-1/2 int_0^t diag(D + D^T) = -int_0^t diag(D)`` at the times ``ts``."""
    edges = np.asarray(edges, dtype=float)
    ts = np.asarray(ts, dtype=float)
    out = np.empty(ts.shape + (3,))
    for i in range(3):
        f = lambda t, i=i: -me.D(t)[..., i, i]  # noqa: E731
        cum = quadrature.cumulative(f, edges)
        k = np.clip(np.searchsorted(edges, ts, side="right") - 1, 0, edges.size - 1)
        a = edges[k]
        part = np.zeros(ts.shape)
        nz = ts > a
        if nz.any():
            part[nz], _ = quadrature.gauss_kronrod(f, a[nz], ts[nz])
        out[..., i] = cum[k] + part
    return out


def check_analytic_conditions(me: MasterEquation2L, grid, max_pairs: int = 200,
                              tol: float = 1e-9) -> AnalyticConditions:
    """Test the three conditions under which ``N_dst`` has a closed form.

    (i)   ``[D(t), D(t')] = [D(t), D^T(t')] = 0`` on up to ``max_pairs^2``
          pairs of sampled times;
    (ii)  ``D_ij = -D_ji`` for ``i != j`` at every grid time, so that
          ``D + D^T`` is diagonal and its eigenvalues carry axis labels;
    (iii) one index ``k`` has ``gamma_k = gamma_max`` and ``Gamma_k = Gamma_min``
          at every grid time with ``gamma_max > 0``.  Without such times the
          condition holds vacuously (``vacuous`` is set, ``k_index`` is None).
    """
    grid = np.asarray(grid, dtype=float)
    D = me.D(grid)
    scale = max(float(np.max(np.abs(D))), np.finfo(float).tiny)

    sub = D[np.searchsorted(grid, _sample_times(grid, max_pairs))]
    comm = np.einsum("aij,bjk->abik", sub, sub) - np.einsum("bij,ajk->abik", sub, sub)
    DT = np.swapaxes(sub, -1, -2)
    comm_t = np.einsum("aij,bjk->abik", sub, DT) - np.einsum("bij,ajk->abik", DT, sub)
    worst_i = max(float(np.max(np.abs(comm))), float(np.max(np.abs(comm_t))))
    cond_i = worst_i < tol * scale * scale

    S = _sym(D)
    off = S * (1 - np.eye(3))
    worst_ii = float(np.max(np.abs(off)))
    cond_ii = worst_ii < tol * scale

    gmax = jacobi.max_eigenvalue(S)
    Gamma = _accumulated_diagonal(me, grid, grid)
    active = gmax > ZERO_TOL
    detail = {"commutator": worst_i, "asymmetry": worst_ii, "active_points": int(active.sum())}
    vacuous = not active.any()
    k_index, degenerate = None, ()
    if vacuous:
        cond_iii = True
    elif not cond_ii:
        cond_iii = False
    else:
        diag = np.diagonal(S, axis1=-2, axis2=-1)[active]
        G = Gamma[active]
        gscale = tol * scale
        Gscale = tol * np.maximum(1.0, np.abs(G).max(axis=-1))
        ok = [bool(np.all(np.abs(diag[:, k] - gmax[active]) <= gscale)
                   and np.all(np.abs(G[:, k] - G.min(axis=-1)) <= Gscale)) for k in range(3)]
        good = [k + 1 for k in range(3) if ok[k]]
        cond_iii = bool(good)
        if good:
            k_index = good[0]
            degenerate = tuple(good) if len(good) > 1 else ()
    return AnalyticConditions(cond_i, cond_ii, cond_iii, k_index, vacuous, degenerate,
                              grid, Gamma, me, grid, detail)


def n_dst_analytic(conds: AnalyticConditions, grid=None) -> AnalyticDst:
    """``sum_i exp(-Gamma_min(b_i)) - exp(-Gamma_min(a_i))`` over growth intervals.

    The intervals ``(a_i, b_i)`` are where ``gamma_max > 0``; the maximizing
    pair is ``+-`` the Bloch axis ``k``.
    """
    if not conds.all_hold:
        raise ConditionsNotMet(
            f"conditions (i, ii, iii) = ({conds.cond_i}, {conds.cond_ii}, {conds.cond_iii})")
    edges = conds.edges if grid is None else np.asarray(grid, dtype=float)
    if conds.vacuous:
        return AnalyticDst(0.0, np.empty((0, 2)), None)
    k = conds.k_index - 1
    regions = quadrature.positive_regions(lambda t: gamma_max_values(conds.me, t), edges, ZERO_TOL)
    if regions.size == 0:
        return AnalyticDst(0.0, regions, None)
    G = _accumulated_diagonal(conds.me, edges, regions.ravel())[:, k].reshape(-1, 2)
    value = float(np.sum(np.exp(-G[:, 1]) - np.exp(-G[:, 0])))
    e = np.zeros(3)
    e[k] = 1.0
    return AnalyticDst(value, regions, (e, -e))


def n_dst_axis(conds: AnalyticConditions, k: int, grid=None) -> AnalyticDst:
    """Closed-form ``int max(sigma, 0)`` for the axis pair ``+-e_k``.

    Needs only conditions (i) and (ii): then ``sigma = gamma_k exp(-Gamma_k) / 2``
    for this pair, and the integral is ``sum exp(-Gamma_k(b)) - exp(-Gamma_k(a))``
    over the intervals where ``gamma_k > 0``.  This is a lower bound on
    ``N_dst``; it equals ``N_dst`` when (iii) also holds with this ``k``.
    """
    if not (conds.cond_i and conds.cond_ii):
        raise ConditionsNotMet("axis formula needs conditions (i) and (ii)")
    if k not in (1, 2, 3):
        raise ValueError("k must be 1, 2 or 3")
    edges = conds.edges if grid is None else np.asarray(grid, dtype=float)
    me = conds.me
    regions = quadrature.positive_regions(lambda t: 2 * me.D(t)[..., k - 1, k - 1], edges, ZERO_TOL)
    e = np.zeros(3)
    e[k - 1] = 1.0
    if regions.size == 0:
        return AnalyticDst(0.0, regions, (e, -e))
    G = _accumulated_diagonal(me, edges, regions.ravel())[:, k - 1].reshape(-1, 2)
    return AnalyticDst(float(np.sum(np.exp(-G[:, 1]) - np.exp(-G[:, 0]))), regions, (e, -e))


# ---------------------------------------------------------------------------
# divisibility


def gdiv_from_spectrum(eigs) -> np.ndarray:
    eigs = np.asarray(eigs, dtype=float)
    return 0.5 * np.sum(np.abs(eigs) - eigs, axis=-1)


def gdiv_lb_from_matrix(d) -> np.ndarray:
    """``max(0, 1/2 (sqrt(Tr[d^2]) - Tr[d]))`` with ``Tr[d^2] = sum |d_ij|^2`` (batched).

    The bare expression is negative when ``d`` has several positive rates
    (``d = I`` gives ``(sqrt(n^2-1) - (n^2-1)) / 2``); since ``g_div >= 0`` the
    clipped value is still a lower bound and keeps the measure non-negative.
    """
    d = np.asarray(d)
    hs = np.sqrt(np.sum(np.abs(d) ** 2, axis=(-2, -1)))
    tr = np.real(np.trace(d, axis1=-2, axis2=-1))
    return np.maximum(0.5 * (hs - tr), 0.0)


def _vectorized(fn, ts, unpack):
    ts = np.asarray(ts, dtype=float)
    try:
        out = fn(ts)
        out = np.asarray(unpack(out))
        if out.shape[:ts.ndim] == ts.shape and ts.ndim > 0:
            return out
    except (TypeError, ValueError):
        pass
    return np.array([np.asarray(unpack(fn(float(t)))) for t in ts.ravel()]).reshape(
        ts.shape + np.asarray(unpack(fn(float(ts.ravel()[0])))).shape)


def _eigs_of(obj):
    if isinstance(obj, DecoherenceSpectrum):
        return obj.eigenvalues
    return obj


def _matrix_of(obj):
    if isinstance(obj, DecoherenceMatrix):
        return obj.matrix
    return obj


def gdiv_witness(spectrum_fn: Callable, grid) -> WitnessTrace:
    """``g_div(t) = 1/2 sum_i (|gamma_i^d(t)| - gamma_i^d(t))``.

    ``spectrum_fn`` maps a time (or an array of times) to the canonical
    rates, either as a :class:`DecoherenceSpectrum` or a plain array.
    """
    grid = np.asarray(grid, dtype=float)

    def f(t):
        return gdiv_from_spectrum(_vectorized(spectrum_fn, t, _eigs_of))

    return WitnessTrace(grid, f(grid), "gdiv", f)


def gdiv_lower_bound(d_fn: Callable, grid) -> WitnessTrace:
    """``max(0, 1/2 (sqrt(Tr[d^2]) - Tr[d]))`` from the entries of ``d``, no eigensolve."""
    grid = np.asarray(grid, dtype=float)

    def f(t):
        return gdiv_lb_from_matrix(_vectorized(d_fn, t, _matrix_of))

    return WitnessTrace(grid, f(grid), "gdiv_lb", f)


def gdiv_lb_two_level(me: MasterEquation2L, t):
    """``1/4 (sqrt(2Tr D^2 + 2Tr DD^T - (Tr D)^2 + 2|v|^2) + Tr D)``, clipped at 0.

    Same quantity as :func:`gdiv_lower_bound` applied to the two-level
    decoherence matrix, written in terms of ``D`` and ``v``.
    """
    D = me.D(t)
    v = me.v(t)
    trD = np.trace(D, axis1=-2, axis2=-1)
    trD2 = np.einsum("...ij,...ji->...", D, D)
    trDDt = np.einsum("...ij,...ij->...", D, D)
    rad = 2 * trD2 + 2 * trDDt - trD ** 2 + 2 * np.sum(v * v, axis=-1)
    scale = np.maximum(1.0, 2 * trDDt + trD ** 2)
    if np.any(rad < -1e-12 * scale):
        raise InconsistentInput(f"negative radicand {float(np.min(rad)):.3e}")
    out = np.maximum(0.25 * (np.sqrt(np.maximum(rad, 0.0)) + trD), 0.0)
    return float(out) if np.ndim(out) == 0 else out


def nondivisibility_sufficient(me: MasterEquation2L, t):
    """``Tr D > 0`` or ``|v|^2 > (Tr D)^2 - Tr D^2 - Tr DD^T``; implies ``g_div > 0``."""
    D = me.D(t)
    v = me.v(t)
    trD = np.trace(D, axis1=-2, axis2=-1)
    rhs = trD ** 2 - np.einsum("...ij,...ji->...", D, D) - np.einsum("...ij,...ij->...", D, D)
    out = (trD > 0) | (np.sum(v * v, axis=-1) > rhs)
    return bool(out) if np.ndim(out) == 0 else out


def _witness_integral(f, edges, tol):
    res = quadrature.positive_part_integral(f, edges, tol, ZERO_TOL)
    return res.value, res.error


def n_div(witness: WitnessTrace, auto: bool = False, quad_tol: float = DEFAULT_QUAD_TOL,
          threshold: float = DIVERGENCE_THRESHOLD, window: float = TRAILING_WINDOW) -> DivisibilityValue:
    """Time integral of a divisibility witness over its grid.

    With ``auto`` (the horizon was chosen automatically, standing in for an
    infinite one) the measure is declared divergent when the witness
    averages more than ``threshold`` over the trailing ``window`` fraction;
    the finite integral is kept as ``partial``.
    """
    grid = witness.grid
    if witness.func is None:
        f = lambda t: np.interp(t, grid, witness.values)  # noqa: E731
    else:
        f = witness.func
    value, err = _witness_integral(f, grid, quad_tol)
    divergent = False
    if auto:
        t1 = grid[-1]
        t0 = grid[0] + (1 - window) * (t1 - grid[0])
        inside = grid[(grid >= t0)]
        edges = np.unique(np.concatenate([[t0], inside, [t1]]))
        tail, _ = _witness_integral(f, edges, quad_tol)
        divergent = tail / (t1 - t0) > threshold
    return DivisibilityValue(np.inf if divergent else value, value, divergent, err)


def n_div_modified(witness: WitnessTrace, traj: MapTrajectory,
                   quad_tol: float = DEFAULT_QUAD_TOL) -> float:
    """``int g(t) ||N(t)|| dt`` for a divisibility witness ``g``."""
    if witness.func is None:
        raise ValueError("the modified measure needs an evaluable witness")
    grid = witness.grid
    if grid[-1] > traj.t_end * (1 + 1e-12):
        raise ValueError("trajectory does not cover the witness grid")
    g = witness.func
    regions = quadrature.positive_regions(g, grid, ZERO_TOL)
    res = quadrature.integrate_regions(lambda t: g(t) * matrix_norm(traj.N(t)), grid, regions, quad_tol)
    return res.value


# ---------------------------------------------------------------------------
# orchestration


def _spectra_2level(me):
    def spectrum(t):
        return jacobi.eigvalsh(decoherence_matrices_2level(me, t))

    return spectrum


def _dmat_2level(me):
    return lambda t: decoherence_matrices_2level(me, t)


def mod_envelope(me, traj, ts):
    """``max(g_div, g_div^lb) ||N||`` at ``ts``."""
    d = decoherence_matrices_2level(me, ts)
    g = np.maximum(gdiv_from_spectrum(jacobi.eigvalsh(d)), gdiv_lb_from_matrix(d))
    return g * matrix_norm(traj.N(ts))


def auto_horizon(me: MasterEquation2L, ode_tol: float = DEFAULT_ODE_TOL, t0: float = 10.0,
                 max_t: float = 1e7, envelope_tol: float = ENVELOPE_TOL,
                 mod_tol: Optional[float] = MOD_ENVELOPE_TOL) -> MapTrajectory:
    """Propagate until the bound envelopes have decayed on a trailing window.

    The distinguishability envelope ``(|gamma_max| + gamma_max) ||N||`` must
    drop below ``envelope_tol`` and, unless ``mod_tol`` is None, the
    modified-divisibility integrand ``max(g_div, g_div^lb) ||N||`` below
    ``mod_tol``.  The horizon doubles while time stepping; once the exact
    tail is available it grows by 25% per trial, since extending the tail
    costs nothing.
    """
    T = float(t0)
    base = None
    if me.constant_after is not None:
        T = max(T, 1.25 * float(me.constant_after))
        base = propagate(me, T, ode_tol)
    while True:
        if base is not None and base.tail is not None:
            traj = extend_tail(base, T)
        else:
            traj = propagate(me, T, ode_tol)
        ts = _envelope_samples(traj)
        if (np.max(dst_envelope(me, traj, ts)) < envelope_tol
                and (mod_tol is None or np.max(mod_envelope(me, traj, ts)) < mod_tol)):
            return traj
        T *= 1.25 if traj.tail is not None else 2.0
        if T > max_t:
            raise PropagationTooShort(f"envelopes have not decayed by t={max_t:g}")


def analyze(me: MasterEquation2L, t_end: Optional[float] = None, ode_tol: float = DEFAULT_ODE_TOL,
            quad_tol: float = DEFAULT_QUAD_TOL, cp_tol: float = DEFAULT_CP_TOL,
            search: Optional[SearchSettings] = None, optimize: bool = True,
            traj: Optional[MapTrajectory] = None) -> MeasureReport:
    """Every two-level measure and bound for one master equation.

    ``t_end=None`` selects the horizon automatically (and enables the
    divergence test of the divisibility measures); an explicit ``t_end``
    integrates over ``[0, t_end]`` as given, without the envelope check.
    A precomputed ``traj`` is used as is; pass ``t_end`` along with it
    unless it came from :func:`auto_horizon`.
    """
    auto = t_end is None
    if traj is None:
        traj = auto_horizon(me, ode_tol) if auto else propagate(me, float(t_end), ode_tol)
    grid = traj.grid
    ub = _ub_details(me, traj, quad_tol)
    growth = ub.extra["regions"]
    conds = check_analytic_conditions(me, traj.step_grid if traj.tail is None else grid)
    analytic = n_dst_analytic(conds, grid) if conds.all_hold else None
    axis = ([n_dst_axis(conds, k, grid).value for k in (1, 2, 3)]
            if conds.cond_i and conds.cond_ii else None)
    opt = n_dst_optimized(me, traj, search, quad_tol, False, growth) if optimize else None

    gd = gdiv_witness(_spectra_2level(me), grid)
    gl = gdiv_lower_bound(_dmat_2level(me), grid)
    nd = n_div(gd, auto, quad_tol)
    nl = n_div(gl, auto, quad_tol)
    mod = n_div_modified(gd, traj, quad_tol)
    mod_lb = n_div_modified(gl, traj, quad_tol)
    _, cp = cp_trace(traj)
    meta = {
        "t_end": traj.t_end, "auto_horizon": auto, "ode_tol": traj.tol, "quad_tol": quad_tol,
        "cp_tol": cp_tol, "rk_steps": int(traj.step_grid.size - 1),
        "exact_tail_from": traj.t_switch if traj.tail is not None else None,
        "ub_quad_error": ub.error, "ub_intervals": ub.intervals, "cp_ok": bool(cp.min() >= -cp_tol),
        "conditions_detail": conds.detail, "cond_iii_vacuous": conds.vacuous,
        "k_index": conds.k_index, "axis_dst": axis,
    }
    if opt is not None:
        meta["search"] = search or SearchSettings()
        meta["optimal_delta"] = opt.delta
    pair = opt.pair if opt is not None else (analytic.pair if analytic is not None else None)
    return MeasureReport(
        n_dst=opt.value if opt is not None else None,
        n_dst_ub=ub.value,
        n_dst_analytic=analytic.value if analytic is not None else None,
        n_div=nd.value, n_div_lb=nl.value, n_div_mod=mod, n_div_mod_lb=mod_lb,
        growth_intervals=growth, optimal_pair=pair, conditions=conds,
        cp_min_eig=float(cp.min()), t_end=traj.t_end,
        n_div_partial=nd.partial, n_div_lb_partial=nl.partial,
        n_div_divergent=nd.divergent, n_div_lb_divergent=nl.divergent, metadata=meta)


def analyze_nlevel(d_fn: Callable, grid, quad_tol: float = DEFAULT_QUAD_TOL) -> MeasureReport:
    """Divisibility measures from a user-supplied ``d(t)`` of any dimension.

    Only ``N_div`` and its lower bound are defined here; the
    distinguishability quantities and the ``||N||``-weighted variants need a
    two-level dynamical map and are reported absent.
    """
    grid = np.asarray(grid, dtype=float)

    def spectrum(t):
        d = _vectorized(d_fn, t, _matrix_of)
        jacobi.check_hermitian(d, 1e-10)
        return jacobi.eigvalsh(d)

    gd = gdiv_witness(spectrum, grid)
    gl = gdiv_lower_bound(d_fn, grid)
    nd = n_div(gd, False, quad_tol)
    nl = n_div(gl, False, quad_tol)
    return MeasureReport(
        n_dst=None, n_dst_ub=None, n_dst_analytic=None, n_div=nd.value, n_div_lb=nl.value,
        n_div_mod=None, n_div_mod_lb=None, growth_intervals=np.empty((0, 2)),
        optimal_pair=None, conditions=None, cp_min_eig=None, t_end=float(grid[-1]),
        n_div_partial=nd.partial, n_div_lb_partial=nl.partial,
        metadata={"quad_tol": quad_tol, "samples": int(grid.size)})
