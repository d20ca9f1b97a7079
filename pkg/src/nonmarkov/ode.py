"""Embedded Runge-Kutta 4(5) integrator with PI step control.

Dormand-Prince coefficients, local extrapolation (the 5th order solution is
propagated), FSAL reuse of the last stage.  Every accepted step stores the
coefficients of the free 4th order continuous extension, so
:class:`DenseOutput` interpolates between accepted points without extra
right-hand-side evaluations and with an error one order below the step error.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
E = B5 - B4
# continuous extension: y(t + s h) = y + h sum_j (K^T P)[j] s^(j+1)
P = np.array([
    [1, -8048581381 / 2820520608, 8663915743 / 2820520608, -12715105075 / 11282082432],
    [0, 0, 0, 0],
    [0, 131558114200 / 32700410799, -68118460800 / 10900136933, 87487479700 / 32700410799],
    [0, -1754552775 / 470086768, 14199869525 / 1410260304, -10690763975 / 1880347072],
    [0, 127303824393 / 49829197408, -318862633887 / 49829197408, 701980252875 / 199316789632],
    [0, -282668133 / 205662961, 2019193451 / 616988883, -1453857185 / 822651844],
    [0, 40617522 / 29380423, -110615467 / 29380423, 69997945 / 29380423],
])

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0
# Hairer-Wanner PI exponents for a 5th order error estimate
BETA1 = 0.7 / 5
BETA2 = 0.4 / 5


class IntegrationError(RuntimeError):
    """Step size underflow; ``time`` is where the integrator gave up."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} at t={time:.6g}")
        self.time = time


@dataclass
class DenseOutput:
    """Accepted steps ``t[k], y[k]`` with per-step interpolation polynomials.

    ``q[k]`` holds the coefficients of ``s, s^2, s^3, s^4`` (already scaled by
    the step size) on ``[t[k], t[k+1]]``.
    """

    t: np.ndarray
    y: np.ndarray
    q: np.ndarray  # (steps, 4, dim)

    def __call__(self, ts):
        ts = np.asarray(ts, dtype=float)
        scalar = ts.ndim == 0
        ts = np.atleast_1d(ts)
        if self.t.size == 1:
            out = np.broadcast_to(self.y[0], ts.shape + self.y.shape[1:]).copy()
            return out[0] if scalar else out
        k = np.clip(np.searchsorted(self.t, ts, side="right") - 1, 0, len(self.t) - 2)
        s = ((ts - self.t[k]) / (self.t[k + 1] - self.t[k]))[:, None]
        q = self.q[k]
        out = self.y[k] + s * (q[:, 0] + s * (q[:, 1] + s * (q[:, 2] + s * q[:, 3])))
        return out[0] if scalar else out


def _initial_step(rhs, t0, y0, f0, t_end, tol):
    scale = tol + tol * np.abs(y0)
    d0 = np.sqrt(np.mean((y0 / scale) ** 2))
    d1 = np.sqrt(np.mean((f0 / scale) ** 2))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    h0 = min(h0, t_end - t0)
    y1 = y0 + h0 * f0
    f1 = rhs(t0 + h0, y1)
    d2 = np.sqrt(np.mean(((f1 - f0) / scale) ** 2)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1, t_end - t0)


def integrate(rhs, y0, t_end, tol, t0: float = 0.0, max_step: float = np.inf,
              max_steps: int = 10_000_000) -> DenseOutput:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    The error test is the RMS of ``err / (tol + tol * max(|y_n|, |y_n+1|))``
    with the same ``tol`` as absolute and relative tolerance.
    """
    y = np.array(y0, dtype=float)
    t = float(t0)
    f = np.asarray(rhs(t, y), dtype=float)
    ts, ys, qs = [t], [y.copy()], []
    h = min(_initial_step(rhs, t, y, f, t_end, tol), max_step)
    err_prev = 1e-4
    k = np.empty((7,) + y.shape)
    for _ in range(max_steps):
        if t >= t_end:
            break
        h = min(h, t_end - t, max_step)
        if h < 1e-14 * max(1.0, abs(t)):
            raise IntegrationError("step size underflow", t)
        k[0] = f
        for i in range(1, 7):
            yi = y + h * np.tensordot(A[i], k[:i], axes=1)
            k[i] = rhs(t + C[i] * h, yi)
        y_new = y + h * np.tensordot(B5, k, axes=1)
        if not np.all(np.isfinite(y_new)):
            h *= MIN_FACTOR
            continue
        err_vec = h * np.tensordot(E, k, axes=1)
        scale = tol + tol * np.maximum(np.abs(y), np.abs(y_new))
        err = float(np.sqrt(np.mean((err_vec / scale) ** 2)))
        if err <= 1.0:
            if err == 0.0:
                factor = MAX_FACTOR
            else:
                factor = SAFETY * err ** -BETA1 * err_prev ** BETA2
                factor = min(MAX_FACTOR, max(MIN_FACTOR, factor))
            t = t + h if t + h < t_end * (1 - 1e-15) else float(t_end)
            y = y_new
            f = k[6].copy()
            qs.append(h * (P.T @ k.reshape(7, -1)).reshape((4,) + y.shape))
            ts.append(t)
            ys.append(y.copy())
            err_prev = max(err, 1e-4)
            h *= factor
        else:
            h *= max(MIN_FACTOR, SAFETY * err ** -(1 / 5))
    else:
        raise IntegrationError("maximum number of steps exceeded", t)
    q = np.array(qs) if qs else np.empty((0, 4) + y.shape)
    return DenseOutput(np.array(ts), np.array(ys), q)
