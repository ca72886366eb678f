"""UAV motion model: state transition, Jacobian, process noise and trajectories.

State layout (16 entries, project-wide)::

    [p(3) m, nu(3) m/s, a(3) m/s^2, q(4) scalar-last, omega(3) rad/s body]
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .geometry import normalize_quaternion
from .linalg import psd_sqrt

STATE_DIM = 16
P_IDX = slice(0, 3)
NU_IDX = slice(3, 6)
A_IDX = slice(6, 9)
Q_IDX = slice(9, 13)
W_IDX = slice(13, 16)
KIN_IDX = slice(0, 9)


@dataclass
class MotionState:
    p: np.ndarray
    nu: np.ndarray
    a: np.ndarray
    q: np.ndarray
    omega: np.ndarray

    def __post_init__(self):
        for name, size in (("p", 3), ("nu", 3), ("a", 3), ("q", 4), ("omega", 3)):
            val = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if val.shape != (size,):
                raise ValueError(f"{name} must have {size} entries, got {val.shape}")
            if not np.all(np.isfinite(val)):
                raise ValueError(f"{name} has non-finite entries")
            setattr(self, name, val)

    def to_vector(self) -> np.ndarray:
        return np.concatenate([self.p, self.nu, self.a, self.q, self.omega])

    @classmethod
    def from_vector(cls, x) -> "MotionState":
        x = np.asarray(x, dtype=float)
        if x.shape != (STATE_DIM,):
            raise ValueError(f"state vector must have shape (16,), got {x.shape}")
        return cls(x[P_IDX].copy(), x[NU_IDX].copy(), x[A_IDX].copy(), x[Q_IDX].copy(), x[W_IDX].copy())


@dataclass(frozen=True)
class ProcessNoiseParams:
    """Jerk intensity ``sigma1`` (m/s^3), angular-acceleration intensity ``sigma2`` (rad/s^2), frame time ``t_f`` (s)."""

    sigma1: float
    sigma2: float
    t_f: float

    def __post_init__(self):
        if self.sigma1 < 0 or self.sigma2 < 0:
            raise ValueError("noise intensities must be non-negative")
        if not self.t_f > 0:
            raise ValueError("frame duration must be positive")


def as_vector(x) -> np.ndarray:
    if isinstance(x, MotionState):
        return x.to_vector()
    x = np.asarray(x, dtype=float)
    if x.shape != (STATE_DIM,):
        raise ValueError(f"state vector must have shape (16,), got {x.shape}")
    return x


def omega_matrix(omega) -> np.ndarray:
    """4x4 antisymmetric rate matrix such that dq/dt = 0.5 * Omega(omega) @ q."""
    w1, w2, w3 = np.asarray(omega, dtype=float)
    return np.array(
        [
            [0.0, w3, -w2, w1],
            [-w3, 0.0, w1, w2],
            [w2, -w1, 0.0, w3],
            [-w1, -w2, -w3, 0.0],
        ]
    )


def quaternion_rate_map(q) -> np.ndarray:
    """4x3 matrix E(q) with Omega(omega) @ q == E(q) @ omega."""
    q1, q2, q3, q4 = np.asarray(q, dtype=float)
    return np.array(
        [
            [q4, -q3, q2],
            [q3, q4, -q1],
            [-q2, q1, q4],
            [-q1, -q2, -q3],
        ]
    )


def _propagate_vec(x: np.ndarray, t_f: float) -> np.ndarray:
    out = x.copy()
    p, nu, a = x[P_IDX], x[NU_IDX], x[A_IDX]
    out[P_IDX] = p + nu * t_f + 0.5 * a * t_f * t_f
    out[NU_IDX] = nu + a * t_f
    out[Q_IDX] = x[Q_IDX] + 0.5 * t_f * (omega_matrix(x[W_IDX]) @ x[Q_IDX])
    return out


def propagate_state(x, params: ProcessNoiseParams):
    """Deterministic one-frame transition. The quaternion is not renormalized here.

    Accepts a MotionState or a 16-vector and returns the same kind.
    """
    out = _propagate_vec(as_vector(x), params.t_f)
    return MotionState.from_vector(out) if isinstance(x, MotionState) else out


def transition_jacobian(x, params: ProcessNoiseParams) -> np.ndarray:
    x = as_vector(x)
    t = params.t_f
    F = np.eye(STATE_DIM)
    i3 = np.eye(3)
    F[P_IDX, NU_IDX] = t * i3
    F[P_IDX, A_IDX] = 0.5 * t * t * i3
    F[NU_IDX, A_IDX] = t * i3
    F[Q_IDX, Q_IDX] += 0.5 * t * omega_matrix(x[W_IDX])
    F[Q_IDX, W_IDX] = 0.5 * t * quaternion_rate_map(x[Q_IDX])
    return F


def kinematic_gamma(t_f: float) -> np.ndarray:
    """Per-axis [p, nu, a] covariance of a white-jerk process over one frame, per unit intensity."""
    t = t_f
    return np.array(
        [
            [t**5 / 20, t**4 / 8, t**3 / 6],
            [t**4 / 8, t**3 / 3, t**2 / 2],
            [t**3 / 6, t**2 / 2, t],
        ]
    )


def attitude_noise_map(q, t_f: float) -> np.ndarray:
    """Xi_k: maps angular-acceleration noise into the quaternion (4x3)."""
    return 0.5 * t_f * quaternion_rate_map(q)


def process_noise_cov(x, params: ProcessNoiseParams) -> np.ndarray:
    x = as_vector(x)
    s1, s2, t = params.sigma1, params.sigma2, params.t_f
    U = np.zeros((STATE_DIM, STATE_DIM))
    U[KIN_IDX, KIN_IDX] = s1 * s1 * np.kron(kinematic_gamma(t), np.eye(3))
    xi = attitude_noise_map(x[Q_IDX], t)
    U[Q_IDX, Q_IDX] = s2 * s2 * t * (xi @ xi.T)
    U[W_IDX, W_IDX] = s2 * s2 * t * np.eye(3)
    return U


@lru_cache(maxsize=64)
def _kinematic_factor(sigma1: float, t_f: float) -> np.ndarray:
    return psd_sqrt(sigma1 * sigma1 * np.kron(kinematic_gamma(t_f), np.eye(3)))


def sample_process_noise(x, params: ProcessNoiseParams, rng: np.random.Generator) -> np.ndarray:
    """One draw from N(0, U_k), factorizing U_k block by block."""
    x = as_vector(x)
    s2, t = params.sigma2, params.t_f
    z = rng.standard_normal(STATE_DIM)
    u = np.zeros(STATE_DIM)
    if params.sigma1 > 0:
        u[KIN_IDX] = _kinematic_factor(params.sigma1, t) @ z[KIN_IDX]
    if s2 > 0:
        xi = attitude_noise_map(x[Q_IDX], t)
        u[Q_IDX] = psd_sqrt(s2 * s2 * t * (xi @ xi.T)) @ z[Q_IDX]
        u[W_IDX] = s2 * np.sqrt(t) * z[W_IDX]
    return u


def step_truth(x: np.ndarray, params: ProcessNoiseParams, rng: np.random.Generator | None) -> np.ndarray:
    """x_k = eta(x_{k-1}) + u_k followed by quaternion renormalization."""
    nxt = _propagate_vec(x, params.t_f)
    if rng is not None:
        nxt = nxt + sample_process_noise(x, params, rng)
    nxt[Q_IDX] = normalize_quaternion(nxt[Q_IDX])
    return nxt


def generate_trajectory(x0, params: ProcessNoiseParams, n_frames: int, rng: np.random.Generator) -> np.ndarray:
    """Ground-truth states for frames 0..n_frames as an (n_frames + 1, 16) array.

    Process noise is drawn at the state being propagated (Xi uses q_{k-1}).
    """
    if n_frames < 1 or int(n_frames) != n_frames:
        raise ValueError(f"n_frames must be a positive integer, got {n_frames}")
    traj = np.empty((n_frames + 1, STATE_DIM))
    x = as_vector(x0).copy()
    x[Q_IDX] = normalize_quaternion(x[Q_IDX])
    traj[0] = x
    noisy = params.sigma1 > 0 or params.sigma2 > 0
    for k in range(1, n_frames + 1):
        x = step_truth(x, params, rng if noisy else None)
        traj[k] = x
    return traj
