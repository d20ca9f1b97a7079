import warnings

import numpy as np
import pytest
from scipy.integrate import quad

from nonmarkov.canonical import decoherence_matrices_2level
from nonmarkov.jacobi import eigvalsh, max_eigenvalue
from nonmarkov.models import (ApproximationError, SpinBosonParams, amplitude_damping,
                              ohmic_lorentz_drude, phase_damping, sampled_model,
                              spin_boson_coefficients, spin_boson_kernels, spin_boson_model,
                              spin_boson_ndst_ub_approx)
from nonmarkov.propagation import RangeError, propagate


def test_phase_damping_generator():
    me = phase_damping(lambda t: np.cos(t))
    np.testing.assert_allclose(me.D(1.0), -2 * np.diag([np.cos(1), np.cos(1), 0]))
    np.testing.assert_array_equal(me.v(np.linspace(0, 1, 3)), 0)


def test_amplitude_damping_generator_and_fixed_point():
    me = amplitude_damping(1.0)
    np.testing.assert_allclose(me.D(0.3), -np.diag([0.5, 0.5, 1.0]))
    np.testing.assert_allclose(me.v(0.3), [0, 0, -1])
    fixed = np.array([0, 0, -1.0])
    np.testing.assert_allclose(me.v(0) + me.D(0) @ fixed, 0)


@pytest.mark.parametrize("factory", [phase_damping, amplitude_damping])
def test_zero_rate_is_identity(factory):
    traj = propagate(factory(0.0), 2.0)
    w, N = traj.state(2.0)
    np.testing.assert_allclose(N, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(w, 0, atol=1e-14)


def test_sampled_model_interpolates():
    times = np.array([0.0, 1.0, 2.0])
    v = np.array([[0, 0, 0], [0, 0, -1], [0, 0, -2.0]])
    D = -np.eye(3)[None] * np.array([0.0, 1.0, 2.0])[:, None, None]
    me = sampled_model(times, v, D)
    np.testing.assert_allclose(me.v(1.5), [0, 0, -1.5])
    np.testing.assert_allclose(me.D(0.25), -0.25 * np.eye(3))
    with pytest.raises(RangeError):
        me.v(2.5)


def test_spectral_density():
    p = SpinBosonParams(alpha=0.02, omega_c=3.0)
    J = ohmic_lorentz_drude(p)
    assert J(0.0) == 0.0
    assert J(3.0) == pytest.approx(0.02 * 3.0 / (2 * np.pi))
    assert J(1e6) == pytest.approx(0.02 * 9 / (np.pi * 1e6), rel=1e-10)


@pytest.mark.parametrize("omega_c", [0.3, 1.0, 3.0])
def test_kernels_closed_form_vs_quadrature(omega_c):
    p = SpinBosonParams(alpha=0.01, omega_c=omega_c)
    K1, K = spin_boson_kernels(p)
    K1q, Kq = spin_boson_kernels(p, method="quadrature")
    s = np.linspace(0.05, 10 / omega_c, 12)
    np.testing.assert_allclose(K(s), Kq(s), rtol=1e-8)
    np.testing.assert_allclose(K1(s), K1q(s), rtol=1e-8, atol=1e-8 * p.prefactor)
    assert K(0.0) == 0.0


def test_noise_kernel_asymptotic_branch_continuous():
    p = SpinBosonParams(alpha=0.01, omega_c=1.0)
    K1, _ = spin_boson_kernels(p)
    x = np.array([50.0 - 1e-9, 50.0 + 1e-9])
    assert K1(x[0]) == pytest.approx(K1(x[1]), rel=1e-9)
    # independent value from the exponential-integral representation by quadrature
    ref, _ = quad(lambda y: y / (1 + y * y), 0, np.inf, weight="cos", wvar=80.0)
    assert K1(80.0) == pytest.approx(p.prefactor * ref, rel=1e-8)


def test_zero_coupling():
    p = SpinBosonParams(alpha=0.0, omega_c=1.0)
    K1, _ = spin_boson_kernels(p)
    assert np.all(K1(np.array([0.1, 1.0])) == 0)
    c = spin_boson_coefficients(p, t_end=5.0)
    g, v3 = c(np.linspace(0, 5, 7))
    assert np.all(g == 0) and np.all(v3 == 0)


@pytest.mark.parametrize("omega_c", [0.3, 3.0])
def test_plateau_values(omega_c):
    p = SpinBosonParams(alpha=0.01, omega_c=omega_c)
    c = spin_boson_coefficients(p)
    g0, v0 = c(0.0)
    assert g0 == 0 and v0 == 0
    g, v3 = c(c.t_table * (1 - 1e-9))
    gr_inf = 0.01 * omega_c ** 2 / (omega_c ** 2 + 1)
    assert g.real == pytest.approx(gr_inf, rel=1e-4)
    assert v3 == pytest.approx(-2 * gr_inf, rel=1e-4)
    assert p.g_inf.real == pytest.approx(np.pi * ohmic_lorentz_drude(p)(1.0))
    assert g.imag == pytest.approx(p.g_inf.imag, rel=1e-4)


def test_coefficients_against_direct_quadrature():
    p = SpinBosonParams(alpha=0.01, omega_c=2.0)
    c = spin_boson_coefficients(p, t_end=3.0)
    K1, K = spin_boson_kernels(p)
    t = 2.3
    re, _ = quad(lambda s: 2 * np.cos(s) * K1(s), 0, t, limit=200, epsabs=1e-13)
    im, _ = quad(lambda s: -2 * np.sin(s) * K1(s), 0, t, limit=200, epsabs=1e-13)
    v3, _ = quad(lambda s: -4 * np.sin(s) * K(s), 0, t, epsabs=1e-14)
    g, v = c(t)
    assert g.real == pytest.approx(re, abs=1e-9)
    assert g.imag == pytest.approx(im, abs=1e-9)
    assert v == pytest.approx(v3, abs=1e-10)
    with pytest.raises(RangeError):
        c(4.0)


@pytest.fixture(scope="module")
def sb():
    p = SpinBosonParams(alpha=0.01, omega_c=1.0)
    c = spin_boson_coefficients(p, t_end=40.0)
    return c, spin_boson_model(c)


def test_spin_boson_generator(sb):
    c, me = sb
    t = 1.7
    g, v3 = c(t)
    np.testing.assert_allclose(me.v(t), [0, 0, v3])
    np.testing.assert_allclose(me.D(t), [[0, -1, 0], [1 - 2 * g.imag, -2 * g.real, 0],
                                         [0, 0, -2 * g.real]])
    v, D = me.generator(t)
    np.testing.assert_allclose(D, me.D(t), atol=1e-15)


def test_spin_boson_spectrum_signs_and_closed_form(sb):
    c, me = sb
    ts = np.linspace(0.01, 40, 300)
    g, v3 = c(ts)
    w = eigvalsh(decoherence_matrices_2level(me, ts))
    root = np.sqrt(np.abs(g) ** 2 + 0.25 * v3 ** 2)
    np.testing.assert_allclose(w, np.column_stack([g.real - root, 0 * ts, g.real + root]),
                               atol=1e-12)
    gmax = max_eigenvalue(me.D(ts) + np.swapaxes(me.D(ts), 1, 2))
    np.testing.assert_allclose(gmax, 2 * (np.abs(g) - g.real), atol=1e-12)


def test_zero_drift_variant(sb):
    c, _ = sb
    me = spin_boson_model(c, zero_drift=True)
    np.testing.assert_array_equal(me.v(np.linspace(0, 5, 4)), 0)


def test_weak_coupling_warning():
    with pytest.warns(UserWarning, match="weak-coupling"):
        SpinBosonParams(alpha=0.5)
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        SpinBosonParams(alpha=0.05)


def test_ndst_approx():
    p = SpinBosonParams(alpha=0.01, omega_c=1.0)
    assert spin_boson_ndst_ub_approx(p) == pytest.approx(0.0, abs=1e-15)

    class Fake:
        g_inf = complex(0.2, 0.2)

    assert spin_boson_ndst_ub_approx(Fake) == pytest.approx(np.sqrt(2) - 1)
    with pytest.raises(ApproximationError):
        spin_boson_ndst_ub_approx(SpinBosonParams(alpha=0.0))
