import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.linalg import expm

from nonmarkov.bloch import bloch_to_density, random_bloch
from nonmarkov.models import amplitude_damping, phase_damping
from nonmarkov.propagation import (MasterEquation2L, RangeError, apply_map, choi_and_cp_check,
                                   choi_matrix, cp_trace, extend_tail, matrix_norm, propagate)


def constant(v, D, **kw):
    v, D = np.asarray(v, float), np.asarray(D, float)
    return MasterEquation2L(lambda t: v, lambda t: D, **kw)


def augmented_expm(v, D, t):
    g = np.zeros((4, 4))
    g[:3, :3], g[:3, 3] = D, v
    m = expm(g * t)
    return m[:3, 3], m[:3, :3]


def test_zero_generator_is_identity():
    traj = propagate(constant(np.zeros(3), np.zeros((3, 3))), 3.0)
    w, N = traj.state(2.0)
    np.testing.assert_allclose(N, np.eye(3), atol=1e-14)
    np.testing.assert_allclose(w, 0, atol=1e-14)


def test_uniform_decay():
    traj = propagate(constant(np.zeros(3), -np.eye(3)), 2.0)
    for t in (0.5, 1.0, 2.0):
        np.testing.assert_allclose(traj.N(t), np.exp(-t) * np.eye(3), atol=1e-8)


def test_amplitude_damping_closed_form():
    traj = propagate(amplitude_damping(1.0), 3.0)
    ts = np.linspace(0, 3, 13)
    w, N = traj.state(ts)
    np.testing.assert_allclose(w[:, 2], np.exp(-ts) - 1, atol=1e-8)
    np.testing.assert_allclose(w[:, :2], 0, atol=1e-12)
    np.testing.assert_allclose(apply_map(traj, 1.0, [0, 0, 1]), [0, 0, 2 / np.e - 1], atol=1e-8)


def test_phase_damping_closed_form():
    traj = propagate(phase_damping(1.0), 2.0)
    for t in (0.3, 2.0):
        w, N = traj.state(t)
        np.testing.assert_allclose(N, np.diag([np.exp(-2 * t), np.exp(-2 * t), 1]), atol=1e-8)
        np.testing.assert_allclose(w, 0, atol=1e-14)


def test_against_matrix_exponential(rng):
    for _ in range(5):
        v = rng.normal(size=3)
        D = rng.normal(size=(3, 3))
        traj = propagate(constant(v, D), 1.5, tol=1e-11)
        w_ref, N_ref = augmented_expm(v, D, 1.5)
        w, N = traj.state(1.5)
        np.testing.assert_allclose(N, N_ref, atol=1e-8 * np.abs(N_ref).max())
        np.testing.assert_allclose(w, w_ref, atol=1e-8 * max(1, np.abs(w_ref).max()))


def test_exact_tail_matches_expm():
    v, D = np.array([0, 0, -0.4]), np.array([[-0.2, -1, 0], [1, -0.3, 0], [0, 0, -0.4]])
    me = constant(v, D, constant_after=0.0)
    traj = propagate(me, 50.0)
    assert traj.tail is not None
    for t in (0.0, 7.3, 50.0):
        w_ref, N_ref = augmented_expm(v, D, t)
        w, N = traj.state(t)
        np.testing.assert_allclose(N, N_ref, atol=1e-13)
        np.testing.assert_allclose(w, w_ref, atol=1e-13)
    longer = extend_tail(traj, 80.0)
    np.testing.assert_allclose(longer.N(80.0), augmented_expm(v, D, 80.0)[1], atol=1e-13)


def test_tail_after_switch_continuous():
    rate = lambda t: np.where(np.asarray(t) < 2.0, 1 + np.sin(3 * np.asarray(t)), 1.0)
    base = amplitude_damping(rate)
    me = MasterEquation2L(base.drift, base.damping, constant_after=2.0)
    with_tail = propagate(me, 6.0, tol=1e-11)
    without = propagate(base, 6.0, tol=1e-11, max_step=0.05)
    np.testing.assert_allclose(with_tail.N(5.0), without.N(5.0), atol=1e-8)


def test_out_of_range():
    traj = propagate(amplitude_damping(1.0), 1.0)
    with pytest.raises(RangeError):
        traj.state(1.5)
    with pytest.raises(ValueError):
        propagate(amplitude_damping(1.0), 0.0)


def test_semigroup():
    v, D = np.array([0.1, 0, -0.3]), np.array([[-0.5, 0.2, 0], [-0.2, -0.5, 0.1], [0, 0, -0.3]])
    traj = propagate(constant(v, D), 3.0)
    s, t = 0.7, 1.9
    w_s, N_s = traj.state(s)
    w_t, N_t = traj.state(t)
    w_st, N_st = traj.state(s + t)
    np.testing.assert_allclose(N_st, N_t @ N_s, atol=1e-7)
    np.testing.assert_allclose(w_st, w_t + N_t @ w_s, atol=1e-7)


@given(st.integers(0, 10_000))
def test_difference_flow(seed):
    rng = np.random.default_rng(seed)
    traj = _AMP_TRAJ
    l1, l2 = random_bloch(rng, 2)
    t = rng.uniform(0, 3)
    diff = apply_map(traj, t, l1) - apply_map(traj, t, l2)
    np.testing.assert_allclose(diff, traj.N(t) @ (l1 - l2), atol=1e-10)


_AMP_TRAJ = propagate(amplitude_damping(lambda t: 1 + 2 * np.cos(10 * t)), 3.0)


def test_matrix_norm():
    assert matrix_norm(np.diag(np.exp([-1.0, -2.0, -3.0]))) == pytest.approx(np.exp(-1), rel=1e-14)
    c, s = np.cos(1.1), np.sin(1.1)
    assert matrix_norm(np.array([[c, -s, 0], [s, c, 0], [0, 0, 1]])) == pytest.approx(1, abs=1e-14)


def _choi_by_states(w, N):
    """Choi matrix built from the images of four pure states, linearly extended."""
    def phi(lam):
        return bloch_to_density(w + N @ np.asarray(lam, float)).matrix

    P0, P1, Pp, Pi = phi([0, 0, 1]), phi([0, 0, -1]), phi([1, 0, 0]), phi([0, 1, 0])
    E = {(0, 0): P0, (1, 1): P1,
         (1, 0): Pp - 1j * Pi - 0.5 * (1 - 1j) * (P0 + P1),
         (0, 1): Pp + 1j * Pi - 0.5 * (1 + 1j) * (P0 + P1)}
    out = np.zeros((4, 4), complex)
    for (i, j), img in E.items():
        unit = np.zeros((2, 2))
        unit[i, j] = 1
        out += 0.5 * np.kron(unit, img)
    return out


def test_choi_examples():
    c = choi_matrix(np.zeros(3), np.eye(3))
    np.testing.assert_allclose(np.linalg.eigvalsh(c), [0, 0, 0, 1], atol=1e-14)
    np.testing.assert_allclose(choi_matrix(np.zeros(3), np.zeros((3, 3))), np.eye(4) / 4, atol=1e-15)


@given(st.integers(0, 10_000))
def test_choi_against_state_construction(seed):
    rng = np.random.default_rng(seed)
    w, N = rng.normal(size=3) * 0.3, rng.normal(size=(3, 3)) * 0.5
    c = choi_matrix(w, N)
    assert np.real(np.trace(c)) == pytest.approx(1.0, abs=1e-14)
    np.testing.assert_allclose(c, c.conj().T, atol=1e-15)
    np.testing.assert_allclose(np.linalg.eigvalsh(c), np.linalg.eigvalsh(_choi_by_states(w, N)),
                               atol=1e-12)


def test_cp_check_flags_inflated_map():
    traj = propagate(amplitude_damping(1.0), 2.0)
    assert choi_and_cp_check(traj, 1.0).is_cp
    _, mins = cp_trace(traj)
    assert mins.min() >= -1e-10
    bad = choi_matrix(np.zeros(3), 1.5 * np.eye(3))
    assert np.linalg.eigvalsh(bad)[0] < -1e-3
