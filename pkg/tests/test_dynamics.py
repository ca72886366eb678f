import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from uavfuse.dynamics import (
    P_IDX,
    Q_IDX,
    MotionState,
    ProcessNoiseParams,
    generate_trajectory,
    kinematic_gamma,
    omega_matrix,
    process_noise_cov,
    propagate_state,
    quaternion_rate_map,
    sample_process_noise,
    transition_jacobian,
)

vec3 = st.lists(st.floats(-5, 5, allow_nan=False), min_size=3, max_size=3)


def random_state(rng, unit_q=True):
    q = rng.normal(size=4)
    if unit_q:
        q /= np.linalg.norm(q)
    return np.concatenate([rng.normal(0, 100, 3), rng.normal(0, 10, 3), rng.normal(0, 1, 3), q, rng.normal(0, 1, 3)])


def test_omega_matrix_printed_entries():
    assert np.array_equal(omega_matrix([0, 0, 0]), np.zeros((4, 4)))
    expected = np.zeros((4, 4))
    expected[0, 3], expected[3, 0] = 1, -1
    expected[1, 2], expected[2, 1] = 1, -1
    assert np.array_equal(omega_matrix([1, 0, 0]), expected)


@given(vec3)
def test_omega_antisymmetric(w):
    O = omega_matrix(w)
    assert np.array_equal(O + O.T, np.zeros((4, 4)))


@given(vec3, st.lists(st.floats(-1, 1, allow_nan=False), min_size=4, max_size=4))
def test_rate_map_identity(w, q):
    assert np.allclose(omega_matrix(w) @ q, quaternion_rate_map(q) @ w, atol=1e-12)


def test_propagate_stationary_and_kinematics():
    x = MotionState([1, 2, 3], [0, 0, 0], [0, 0, 0], [0, 0, 0, 1], [0, 0, 0]).to_vector()
    assert np.array_equal(propagate_state(x, ProcessNoiseParams(0, 0, 1e-3)), x)
    s = MotionState([0, 0, 0], [1, 0, 0], [2, 0, 0], [0, 0, 0, 1], [0, 0, 0])
    out = propagate_state(s, ProcessNoiseParams(0, 0, 1.0))
    assert isinstance(out, MotionState)
    assert np.array_equal(out.p, [2, 0, 0]) and np.array_equal(out.nu, [3, 0, 0])


def test_propagate_quaternion_first_order():
    x = MotionState([0, 0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0, 1], [0, 0, np.pi]).to_vector()
    q = propagate_state(x, ProcessNoiseParams(0, 0, 1e-3))[Q_IDX]
    assert np.allclose(q, [0, 0, 0.0015708, 1], atol=1e-7)
    assert np.linalg.norm(q) > 1  # not renormalized here


def test_transition_jacobian_finite_differences():
    rng = np.random.default_rng(0)
    params = ProcessNoiseParams(0.1, 0.1, 1e-3)
    h = 1e-6
    worst = 0.0
    for _ in range(100):
        x = random_state(rng)
        F = transition_jacobian(x, params)
        fd = np.empty((16, 16))
        for j in range(16):
            dx = np.zeros(16)
            dx[j] = h * max(1.0, abs(x[j]))
            fd[:, j] = (propagate_state(x + dx, params) - propagate_state(x - dx, params)) / (2 * dx[j])
        worst = max(worst, np.max(np.abs(F - fd)) / np.max(np.abs(F)))
    assert worst <= 1e-6


def test_transition_jacobian_structure():
    params = ProcessNoiseParams(0.1, 0.1, 1e-3)
    rng = np.random.default_rng(1)
    x = random_state(rng)
    F = transition_jacobian(x, params)
    y = x.copy()
    y[0:9] = rng.normal(size=9)
    assert np.array_equal(F, transition_jacobian(y, params))
    x[13:16] = 0
    assert np.array_equal(transition_jacobian(x, params)[Q_IDX, Q_IDX], np.eye(4))


def test_kinematic_gamma_unit_frame():
    expected = np.array([[1 / 20, 1 / 8, 1 / 6], [1 / 8, 1 / 3, 1 / 2], [1 / 6, 1 / 2, 1]])
    assert np.allclose(kinematic_gamma(1.0), expected, rtol=1e-15)


def test_process_noise_zero_and_psd():
    rng = np.random.default_rng(2)
    x = random_state(rng)
    assert np.array_equal(process_noise_cov(x, ProcessNoiseParams(0, 0, 1e-3)), np.zeros((16, 16)))
    for _ in range(50):
        U = process_noise_cov(random_state(rng), ProcessNoiseParams(2.24e-2, 0.1, 1e-3))
        assert np.allclose(U, U.T, atol=0)
        scale = np.sqrt(np.outer(np.diag(U), np.diag(U)))
        assert np.linalg.eigvalsh(U / np.where(scale > 0, scale, 1)).min() >= -1e-12


def test_sample_process_noise_zero_and_deterministic():
    x = random_state(np.random.default_rng(4))
    assert np.array_equal(sample_process_noise(x, ProcessNoiseParams(0, 0, 1e-3), np.random.default_rng(0)), np.zeros(16))
    p = ProcessNoiseParams(0.5, 0.3, 0.1)
    a = sample_process_noise(x, p, np.random.default_rng(7))
    b = sample_process_noise(x, p, np.random.default_rng(7))
    assert np.array_equal(a, b)


def test_sample_process_noise_covariance():
    x = random_state(np.random.default_rng(5))
    p = ProcessNoiseParams(0.5, 0.3, 0.1)
    rng = np.random.default_rng(6)
    draws = np.array([sample_process_noise(x, p, rng) for _ in range(100_000)])
    U = process_noise_cov(x, p)
    C = np.cov(draws.T)
    dominant = np.abs(U) >= 0.5 * np.sqrt(np.outer(np.diag(U), np.diag(U)))
    assert np.all(np.abs(C[dominant] - U[dominant]) <= 0.05 * np.abs(U[dominant]))


def test_trajectory_closed_form_when_noiseless():
    x0 = MotionState([-200, 0, 100], [19.0, 1.0, 0], [0.5, 0, -0.1], [0, 0, 0, 1], [0, 0, 0])
    traj = generate_trajectory(x0, ProcessNoiseParams(0, 0, 1e-3), 1000, np.random.default_rng(0))
    assert traj.shape == (1001, 16)
    t = np.arange(1001)[:, None] * 1e-3
    expected = x0.p + x0.nu * t + 0.5 * x0.a * t**2
    assert np.allclose(traj[:, P_IDX], expected, atol=1e-9)


def test_trajectory_frame_count_reference():
    x0 = MotionState([-200, 0, 100], [70 / 3.6, 0, 0], [0, 0, 0], [0, 0, 0, 1], [0, 0, 0])
    traj = generate_trajectory(x0, ProcessNoiseParams(0, 0, 1e-3), 30_000, None)
    assert traj.shape[0] - 1 == 30_000


def test_trajectory_quaternion_stays_unit():
    x0 = MotionState([-200, 0, 100], [70 / 3.6, 0, 0], [0, 0, 0], [0, 0, 0, 1], [0.1, -0.2, 0.3])
    traj = generate_trajectory(x0, ProcessNoiseParams(2.24e-2, 0.1, 1e-3), 10_000, np.random.default_rng(1))
    assert np.max(np.abs(np.sum(traj[:, Q_IDX] ** 2, axis=1) - 1)) <= 1e-9


def test_trajectory_rejects_bad_length():
    with pytest.raises(ValueError):
        generate_trajectory(np.r_[np.zeros(12), 1, 0, 0, 0], ProcessNoiseParams(0, 0, 1), 0, None)


def test_motion_state_validation():
    with pytest.raises(ValueError):
        MotionState([0, 0], [0, 0, 0], [0, 0, 0], [0, 0, 0, 1], [0, 0, 0])
    with pytest.raises(ValueError):
        MotionState([0, 0, np.inf], [0, 0, 0], [0, 0, 0], [0, 0, 0, 1], [0, 0, 0])
    v = np.arange(16.0)
    assert np.array_equal(MotionState.from_vector(v).to_vector(), v)
