"""Coordinate backbone: quaternions, LoS geometry and UPA steering vectors.

Quaternions are stored scalar-last, ``q = [q1, q2, q3, q4]`` with ``q4`` the
scalar part.  ``rotation_matrix(q)`` maps body-frame vectors into the
navigation frame.  ``q`` and ``-q`` describe the same attitude.

The BS array lies in the navigation y-z plane (horizontal axis = y, vertical
axis = z).  The UAV array axes in the body frame are x (horizontal) and
y (vertical).  Element spacing is half a wavelength throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateGeometryError

UAV_H_AXIS = np.array([1.0, 0.0, 0.0])
UAV_V_AXIS = np.array([0.0, 1.0, 0.0])

_MIN_RANGE = 1e-9  # m
_UNIT_TOL = 1e-6


@dataclass(frozen=True)
class ArraySpec:
    """Uniform planar array with ``n_h`` horizontal by ``n_v`` vertical elements."""

    n_h: int
    n_v: int

    def __post_init__(self):
        if int(self.n_h) != self.n_h or int(self.n_v) != self.n_v:
            raise ValueError("array dimensions must be integers")
        if self.n_h < 1 or self.n_v < 1:
            raise ValueError(f"array dimensions must be >= 1, got {self.n_h}x{self.n_v}")

    @property
    def n(self) -> int:
        return self.n_h * self.n_v


@dataclass(frozen=True)
class DirectionCosines:
    """Cosines of the LoS path against an array's vertical (theta) and horizontal (phi) axes."""

    theta: float
    phi: float

    def __post_init__(self):
        for name in ("theta", "phi"):
            val = getattr(self, name)
            if not np.isfinite(val) or abs(val) > 1.0 + 1e-12:
                raise ValueError(f"direction cosine {name}={val} outside [-1, 1]")

    @classmethod
    def clipped(cls, theta: float, phi: float) -> "DirectionCosines":
        """Build from possibly noisy estimates, clipping into [-1, 1]."""
        return cls(float(np.clip(theta, -1.0, 1.0)), float(np.clip(phi, -1.0, 1.0)))


def _check_finite(x, name):
    x = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite values: {x}")
    return x


def normalize_quaternion(q) -> np.ndarray:
    q = _check_finite(q, "quaternion")
    n = np.linalg.norm(q)
    if n == 0.0:
        raise ValueError("cannot normalize a zero quaternion")
    return q / n


def rotation_matrix(q) -> np.ndarray:
    """Body-to-navigation rotation matrix R(q).

    The element formulas are evaluated as written, without normalizing ``q``.
    For a unit quaternion the result is a proper rotation; for ``c * q`` it is
    ``c**2 * R(q)``, which the EKF relies on when it linearizes around a
    quaternion estimate that is slightly off the unit sphere.
    """
    q1, q2, q3, q4 = _check_finite(q, "quaternion")
    return np.array(
        [
            [q4 * q4 + q1 * q1 - q2 * q2 - q3 * q3, 2 * (q1 * q2 - q3 * q4), 2 * (q1 * q3 + q2 * q4)],
            [2 * (q1 * q2 + q3 * q4), q4 * q4 - q1 * q1 + q2 * q2 - q3 * q3, 2 * (q2 * q3 - q1 * q4)],
            [2 * (q1 * q3 - q2 * q4), 2 * (q2 * q3 + q1 * q4), q4 * q4 - q1 * q1 - q2 * q2 + q3 * q3],
        ]
    )


def rotation_matrix_jacobian(q) -> np.ndarray:
    """Partial derivatives dR/dq_i, stacked as an array of shape (4, 3, 3)."""
    q1, q2, q3, q4 = np.asarray(q, dtype=float)
    return 2.0 * np.array(
        [
            [[q1, q2, q3], [q2, -q1, -q4], [q3, q4, -q1]],
            [[-q2, q1, q4], [q1, q2, q3], [-q4, q3, -q2]],
            [[-q3, -q4, q1], [q4, -q3, q2], [q1, q2, q3]],
            [[q4, -q3, q2], [q3, q4, -q1], [-q2, q1, q4]],
        ]
    )


def los_unit_vector(p_uav, p_bs) -> tuple[np.ndarray, float]:
    """Unit vector from the BS to the UAV, and the BS-UAV distance in metres."""
    diff = _check_finite(p_uav, "p_uav") - _check_finite(p_bs, "p_bs")
    d = float(np.linalg.norm(diff))
    if d < _MIN_RANGE:
        raise DegenerateGeometryError(f"UAV and BS positions coincide (d={d:g} m)")
    return diff / d, d


def bs_direction_cosines(p_uav, p_bs) -> DirectionCosines:
    e, _ = los_unit_vector(p_uav, p_bs)
    return DirectionCosines.clipped(e[2], e[1])


def _uav_cosines_raw(e_bu, q):
    # no unit checks; used by the filter's observation function
    rot = rotation_matrix(q)
    return float(e_bu @ rot @ UAV_V_AXIS), float(e_bu @ rot @ UAV_H_AXIS)


def uav_direction_cosines(e_bu, q) -> DirectionCosines:
    """Direction cosines of the LoS path against the rotated UAV array axes."""
    e_bu = _check_finite(e_bu, "e_bu")
    q = _check_finite(q, "quaternion")
    if abs(np.linalg.norm(e_bu) - 1.0) > _UNIT_TOL:
        raise ValueError(f"e_bu must be unit-norm, |e_bu|={np.linalg.norm(e_bu)}")
    if abs(np.linalg.norm(q) - 1.0) > _UNIT_TOL:
        raise ValueError(f"quaternion must be unit-norm, |q|={np.linalg.norm(q)}")
    theta, phi = _uav_cosines_raw(e_bu, q)
    return DirectionCosines.clipped(theta, phi)


def _centered_index(n: int) -> np.ndarray:
    return np.arange(n) - (n - 1) / 2.0


def array_factor(cosine: float, n: int) -> np.ndarray:
    """Phase-centred linear response e^{j pi (i - (n-1)/2) cosine}, i = 0..n-1."""
    return np.exp(1j * np.pi * _centered_index(n) * cosine)


def steering_vector(dc: DirectionCosines, arr: ArraySpec) -> np.ndarray:
    """Unit-norm UPA response: vertical factor kron horizontal factor, over sqrt(N)."""
    v = np.kron(array_factor(dc.theta, arr.n_v), array_factor(dc.phi, arr.n_h))
    return v / np.sqrt(arr.n)


def steering_derivatives(dc: DirectionCosines, arr: ArraySpec) -> tuple[np.ndarray, np.ndarray]:
    """Analytic derivatives of ``steering_vector`` w.r.t. theta and phi."""
    b_v = array_factor(dc.theta, arr.n_v)
    b_h = array_factor(dc.phi, arr.n_h)
    db_v = 1j * np.pi * _centered_index(arr.n_v) * b_v
    db_h = 1j * np.pi * _centered_index(arr.n_h) * b_h
    scale = 1.0 / np.sqrt(arr.n)
    return scale * np.kron(db_v, b_h), scale * np.kron(b_v, db_h)
