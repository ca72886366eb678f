"""GPS and IMU measurement synthesis.

The accelerometer reports ``R(q).T @ (a - a_g)`` with ``a_g = [0, 0, 9.81]``.
That sign convention is kept exactly; the filter's observation model uses the
same expression, so synthesis and estimation agree by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import A_IDX, NU_IDX, P_IDX, Q_IDX, W_IDX, as_vector
from .geometry import rotation_matrix

GRAVITY = np.array([0.0, 0.0, 9.81])


@dataclass(frozen=True)
class SensorNoiseParams:
    """White measurement noise standard deviations (m, m/s, m/s^2, rad/s)."""

    sigma_p: float
    sigma_nu: float
    sigma_a: float
    sigma_omega: float

    def __post_init__(self):
        if min(self.sigma_p, self.sigma_nu, self.sigma_a, self.sigma_omega) < 0:
            raise ValueError("sensor noise standard deviations must be >= 0")

    def covariance(self) -> np.ndarray:
        """12x12 diag(sp^2, snu^2, sa^2, sw^2) kron I3, ordered [p, nu, a_b, omega]."""
        stds = np.repeat([self.sigma_p, self.sigma_nu, self.sigma_a, self.sigma_omega], 3)
        return np.diag(stds**2)


@dataclass
class GpsMeasurement:
    p_hat: np.ndarray
    nu_hat: np.ndarray


@dataclass
class ImuMeasurement:
    a_b_hat: np.ndarray
    omega_hat: np.ndarray


def specific_force(a, q) -> np.ndarray:
    """Noise-free accelerometer output R(q).T @ (a - a_g)."""
    return rotation_matrix(q).T @ (np.asarray(a, dtype=float) - GRAVITY)


def synthesize_gps(x, noise: SensorNoiseParams, rng: np.random.Generator) -> GpsMeasurement:
    x = as_vector(x)
    z = rng.standard_normal(6)
    return GpsMeasurement(
        p_hat=x[P_IDX] + noise.sigma_p * z[:3],
        nu_hat=x[NU_IDX] + noise.sigma_nu * z[3:],
    )


def synthesize_imu(x, noise: SensorNoiseParams, rng: np.random.Generator) -> ImuMeasurement:
    x = as_vector(x)
    z = rng.standard_normal(6)
    return ImuMeasurement(
        a_b_hat=specific_force(x[A_IDX], x[Q_IDX]) + noise.sigma_a * z[:3],
        omega_hat=x[W_IDX] + noise.sigma_omega * z[3:],
    )
