import numpy as np
import pytest
from scipy.integrate import solve_ivp

from nonmarkov.ode import IntegrationError, integrate


def test_exponential_decay():
    table = integrate(lambda t, y: -y, np.array([1.0, 2.0]), 5.0, 1e-10)
    assert table.t[-1] == 5.0
    ts = np.linspace(0, 5, 37)
    np.testing.assert_allclose(table.y, np.exp(-table.t)[:, None] * [1, 2], atol=1e-9)
    np.testing.assert_allclose(table(ts), np.exp(-ts)[:, None] * [1, 2], atol=1e-9)


def test_dense_output_interpolates_steps():
    table = integrate(lambda t, y: np.cos(t) * y, np.array([1.0]), 6.0, 1e-10)
    np.testing.assert_allclose(table(table.t), table.y, atol=1e-15)
    mid = 0.5 * (table.t[1:] + table.t[:-1])
    np.testing.assert_allclose(table(mid)[:, 0], np.exp(np.sin(mid)), atol=1e-9)


def test_oscillator_against_scipy():
    def rhs(t, y):
        return np.array([y[1], -(1 + 0.5 * np.cos(t)) * y[0] - 0.1 * y[1]])

    table = integrate(rhs, np.array([1.0, 0.0]), 20.0, 1e-11)
    ref = solve_ivp(rhs, (0, 20), [1.0, 0.0], method="DOP853", rtol=1e-13, atol=1e-13,
                    dense_output=True)
    ts = np.linspace(0, 20, 101)
    np.testing.assert_allclose(table(ts), ref.sol(ts).T, atol=1e-8)


def test_tolerance_controls_error():
    errs = []
    for tol in (1e-6, 1e-9):
        table = integrate(lambda t, y: np.cos(t) * y, np.array([1.0]), 10.0, tol)
        errs.append(abs(table.y[-1, 0] - np.exp(np.sin(10.0))))
    assert errs[1] < errs[0]
    assert errs[1] < 1e-7


def test_dense_output_scalar():
    table = integrate(lambda t, y: np.ones_like(y), np.zeros(1), 2.0, 1e-10)
    assert table(1.3)[0] == pytest.approx(1.3, abs=1e-12)


def test_blowup_reports_time():
    with pytest.raises(IntegrationError) as exc:
        integrate(lambda t, y: y * y, np.array([1.0]), 2.0, 1e-8)
    assert exc.value.time == pytest.approx(1.0, abs=1e-6)
