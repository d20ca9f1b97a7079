"""Shared model generators and closed-form oracles for the test suite."""

import numpy as np
from scipy.stats import unitary_group

from nonmarkov.models import from_canonical
from nonmarkov.propagation import cp_trace, propagate


def random_waveform_model(rng, t_end, ode_tol=1e-9):
    """Random two-level model with rates ``a + b cos(w t + phi)`` in a random basis.

    Returns ``(model, trajectory, min Choi eigenvalue)``; the caller decides
    whether the map is acceptably CP.
    """
    U = unitary_group.rvs(3, random_state=rng)
    h = rng.normal(scale=0.5, size=3)
    a = rng.uniform(0.0, 1.0, 3)
    b = rng.uniform(0.0, 1.5, 3)
    w = rng.uniform(0.5, 10.0, 3)
    phi = rng.uniform(0, 2 * np.pi, 3)

    def d_fn(t):
        t = np.asarray(t, dtype=float)
        g = a + b * np.cos(w * t[..., None] + phi)
        return (U * g[..., None, :]) @ U.conj().T

    def h_fn(t):
        return np.broadcast_to(h, np.shape(t) + (3,))

    me = from_canonical(h_fn, d_fn, label="random")
    traj = propagate(me, t_end, ode_tol)
    dense = np.union1d(traj.grid, np.linspace(0, t_end, 601))
    _, mins = cp_trace(traj, dense)
    return me, traj, float(mins.min())


def random_cp_models(seed, count, t_end=3.0, cp_tol=1e-8):
    rng = np.random.default_rng(seed)
    out = []
    while len(out) < count:
        me, traj, cp_min = random_waveform_model(rng, t_end)
        if cp_min >= -cp_tol:
            out.append((me, traj))
    return out


def amplitude_oracle(t_end=3.0):
    """Axis-3 value for ``gamma_a = 1 + 2 cos(10 t)`` from roots and the antiderivative.

    ``Gamma(t) = t + 0.2 sin(10 t)``; growth where ``cos(10 t) < -1/2``.
    """
    Gamma = lambda t: t + 0.2 * np.sin(10 * t)  # noqa: E731
    total = 0.0
    for m in range(int(10 * t_end / (2 * np.pi)) + 2):
        a = (2 * np.pi / 3 + 2 * np.pi * m) / 10
        b = min((4 * np.pi / 3 + 2 * np.pi * m) / 10, t_end)
        if b > a:
            total += np.exp(-Gamma(b)) - np.exp(-Gamma(a))
    return total


def amplitude_rate(t):
    return 1 + 2 * np.cos(10 * np.asarray(t, dtype=float))


# acceptance report lines, filled by test_acceptance and echoed in the terminal summary
ACCEPTANCE = {}
