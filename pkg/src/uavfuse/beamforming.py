"""Predictive beamformer/combiner construction and link scoring."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .channel import Arrays, ChannelParams, LinkBudget, snr_scale
from .dynamics import P_IDX, Q_IDX, as_vector
from .geometry import DirectionCosines, array_factor, steering_vector


@dataclass
class BeamPair:
    f: np.ndarray  # BS beamformer, length N_B
    w: np.ndarray  # UAV combiner, length N_U

    def __post_init__(self):
        for name in ("f", "w"):
            if abs(np.linalg.norm(getattr(self, name)) - 1.0) > 1e-12:
                raise ValueError(f"beam {name} must be unit-norm")


@dataclass(frozen=True)
class LinkScore:
    gamma: float
    se: float

    @classmethod
    def from_snr(cls, gamma: float) -> "LinkScore":
        return cls(float(gamma), float(np.log2(1.0 + gamma)))


def beams_from_cosines(dc_bs: DirectionCosines, dc_uav: DirectionCosines, arrays: Arrays) -> BeamPair:
    return BeamPair(steering_vector(dc_bs, arrays.bs), steering_vector(dc_uav, arrays.uav))


def state_cosines(states, p_bs) -> np.ndarray:
    """[theta_b, phi_b, theta_u, phi_u] for each row of an (n, 16) state array.

    Quaternions are normalized first so that an estimate slightly off the unit
    sphere still yields valid direction cosines.
    """
    X = np.atleast_2d(np.asarray(states, dtype=float))
    diff = X[:, P_IDX] - np.asarray(p_bs, dtype=float)
    e = diff / np.linalg.norm(diff, axis=1, keepdims=True)
    q = X[:, Q_IDX] / np.linalg.norm(X[:, Q_IDX], axis=1, keepdims=True)
    q1, q2, q3, q4 = q.T
    # columns of R(q) for the UAV array axes (body x and body y)
    col_h = np.stack([q4**2 + q1**2 - q2**2 - q3**2, 2 * (q1 * q2 + q3 * q4), 2 * (q1 * q3 - q2 * q4)], axis=1)
    col_v = np.stack([2 * (q1 * q2 - q3 * q4), q4**2 - q1**2 + q2**2 - q3**2, 2 * (q2 * q3 + q1 * q4)], axis=1)
    out = np.stack([e[:, 2], e[:, 1], np.sum(e * col_v, axis=1), np.sum(e * col_h, axis=1)], axis=1)
    return np.clip(out, -1.0, 1.0)


def predict_beams(belief, p_bs, arrays: Arrays) -> BeamPair:
    """Beam pair pointed at the direction cosines predicted from the belief's state."""
    x = as_vector(getattr(belief, "x_hat", belief))
    tb, pb, tu, pu = state_cosines(x, p_bs)[0]
    return beams_from_cosines(DirectionCosines(tb, pb), DirectionCosines(tu, pu), arrays)


def link_snr(true_params: ChannelParams, pair: BeamPair, arrays: Arrays, budget: LinkBudget) -> LinkScore:
    """SNR with the true channel and the given beams; the channel matrix is never formed."""
    v_u = steering_vector(true_params.dc_uav, arrays.uav)
    v_b = steering_vector(true_params.dc_bs, arrays.bs)
    gain = abs(np.vdot(pair.w, v_u)) ** 2 * abs(np.vdot(v_b, pair.f)) ** 2
    return LinkScore.from_snr(snr_scale(true_params, arrays, budget) * gain)


def genie_upper_bound(true_params: ChannelParams, arrays: Arrays, budget: LinkBudget) -> LinkScore:
    pair = beams_from_cosines(true_params.dc_bs, true_params.dc_uav, arrays)
    return link_snr(true_params, pair, arrays, budget)


def _factor_overlap(c_true, c_beam, n: int) -> np.ndarray:
    # |b(c_beam)^H b(c_true)|^2 / n^2 for each row
    b_t = array_factor(np.asarray(c_true)[:, None], n)
    b_b = array_factor(np.asarray(c_beam)[:, None], n)
    return np.abs(np.sum(np.conj(b_b) * b_t, axis=1)) ** 2 / n**2


def beam_gains(true_cos: np.ndarray, beam_cos: np.ndarray, arrays: Arrays) -> np.ndarray:
    """Per-frame |w^H v_U|^2 |v_B^H f|^2 for steering-vector beams, vectorized.

    Uses (A kron B)^H (C kron D) = (A^H C)(B^H D) on the vertical and
    horizontal factors; identical to ``link_snr`` up to round-off.
    """
    t, b = np.atleast_2d(true_cos), np.atleast_2d(beam_cos)
    g_bs = _factor_overlap(t[:, 0], b[:, 0], arrays.bs.n_v) * _factor_overlap(t[:, 1], b[:, 1], arrays.bs.n_h)
    g_uav = _factor_overlap(t[:, 2], b[:, 2], arrays.uav.n_v) * _factor_overlap(t[:, 3], b[:, 3], arrays.uav.n_h)
    return g_bs * g_uav


def snr_scales(states, p_bs, arrays: Arrays, budget: LinkBudget) -> np.ndarray:
    """lambda_k for each true state row."""
    X = np.atleast_2d(states)
    d2 = np.sum((X[:, P_IDX] - np.asarray(p_bs, dtype=float)) ** 2, axis=1)
    return budget.p_t * arrays.uav.n * arrays.bs.n * budget.beta0 / d2 / budget.sigma2


def spectral_efficiency(gamma) -> np.ndarray:
    return np.log2(1.0 + np.asarray(gamma))
