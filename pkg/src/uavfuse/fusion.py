"""Extended Kalman filter fusing GPS, IMU and channel-parameter observations.

Observation vector (17 entries)::

    [p(3), nu(3), a_b(3), omega(3), theta_b, phi_b, theta_u, phi_u, tau]

The GPS/IMU-only filter uses the first 12 entries.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy.stats import chi2

from .channel import LinkBudget
from .dynamics import (
    A_IDX,
    NU_IDX,
    P_IDX,
    Q_IDX,
    STATE_DIM,
    W_IDX,
    MotionState,
    ProcessNoiseParams,
    _propagate_vec,
    as_vector,
    process_noise_cov,
    transition_jacobian,
)
from .errors import FilterDivergenceError, NumericalError
from .geometry import UAV_H_AXIS, UAV_V_AXIS, los_unit_vector, rotation_matrix, rotation_matrix_jacobian
from .linalg import clamp_psd, spd_solve, symmetrize
from .sensors import GRAVITY, GpsMeasurement, ImuMeasurement, SensorNoiseParams

OBS_DIM = 17
NAV_DIM = 12
CH_IDX = slice(12, 17)


@dataclass(frozen=True)
class FilterConfig:
    """Filter options.

    renormalize_quaternion: project the quaternion estimate back onto the unit
        sphere after every prediction step and update, leaving P untouched.
    joseph_form: use the Joseph covariance update instead of (I - KG) P.
    divergence_trace: raise FilterDivergenceError once trace(P) exceeds this.
    gate_probability: if set, innovations whose NIS exceeds the chi-square
        quantile are flagged (diagnostics only, never rejected).
    """

    renormalize_quaternion: bool = True
    joseph_form: bool = False
    divergence_trace: float = 1e8
    gate_probability: float | None = None
    max_cond: float = 1e12


@dataclass
class EkfBelief:
    x_hat: np.ndarray
    P: np.ndarray
    frame_index: int
    innovation: np.ndarray | None = None
    innovation_cov: np.ndarray | None = None
    nis: float | None = None
    gated: bool = False

    @property
    def state(self) -> MotionState:
        return MotionState.from_vector(self.x_hat)


@dataclass
class ObservationBundle:
    """Measurements available at the first frame of a DFI.

    ``ch`` is None for the GPS/IMU-only filter, in which case ``noise_cov``
    is 12x12 instead of 17x17.
    """

    gps: GpsMeasurement
    imu: ImuMeasurement
    ch: np.ndarray | None
    noise_cov: np.ndarray

    def __post_init__(self):
        dim = NAV_DIM if self.ch is None else OBS_DIM
        if self.noise_cov.shape != (dim, dim):
            raise ValueError(f"noise covariance must be {dim}x{dim}, got {self.noise_cov.shape}")

    @property
    def dim(self) -> int:
        return NAV_DIM if self.ch is None else OBS_DIM

    def vector(self) -> np.ndarray:
        parts = [self.gps.p_hat, self.gps.nu_hat, self.imu.a_b_hat, self.imu.omega_hat]
        if self.ch is not None:
            parts.append(self.ch)
        return np.concatenate(parts)


def observation_noise_cov(sensor: SensorNoiseParams, V_ch: np.ndarray | None) -> np.ndarray:
    R_nav = sensor.covariance()
    if V_ch is None:
        return R_nav
    R = np.zeros((OBS_DIM, OBS_DIM))
    R[:NAV_DIM, :NAV_DIM] = R_nav
    R[CH_IDX, CH_IDX] = V_ch
    return R


def _check_belief(x, P, cfg: FilterConfig):
    tr = float(np.trace(P))
    if not np.isfinite(tr) or tr > cfg.divergence_trace or not np.all(np.isfinite(x)):
        raise FilterDivergenceError(f"EKF diverged: trace(P)={tr:.3e} exceeds {cfg.divergence_trace:.1e}")


def _renormalize(x: np.ndarray) -> np.ndarray:
    x = x.copy()
    x[Q_IDX] /= np.linalg.norm(x[Q_IDX])
    return x


def predict(belief: EkfBelief, params: ProcessNoiseParams, m_steps: int, cfg: FilterConfig = FilterConfig()) -> list[EkfBelief]:
    """m-step state/covariance predictions; returns the beliefs for steps 1..m_steps.

    F and U are re-evaluated at every intermediate prediction.  With
    ``m_steps == 0`` the input belief is returned unchanged.
    """
    if m_steps == 0:
        return [belief]
    if m_steps < 0:
        raise ValueError("m_steps must be non-negative")
    out = []
    x, P = belief.x_hat, belief.P
    for m in range(1, m_steps + 1):
        F = transition_jacobian(x, params)
        U = process_noise_cov(x, params)
        x = _propagate_vec(x, params.t_f)
        if cfg.renormalize_quaternion:
            x = _renormalize(x)
        P = symmetrize(F @ P @ F.T + U)
        _check_belief(x, P, cfg)
        out.append(EkfBelief(x, P, belief.frame_index + m))
    return out


def _channel_geometry(x: np.ndarray, p_bs):
    e, d = los_unit_vector(x[P_IDX], p_bs)
    rot = rotation_matrix(x[Q_IDX])
    return e, d, rot


def observation_function(x, p_bs, budget: LinkBudget, with_channel: bool = True) -> np.ndarray:
    """Noise-free g(x): 17 entries, or the 12 GPS/IMU entries if ``with_channel`` is False."""
    x = as_vector(x)
    e, d, rot = _channel_geometry(x, p_bs)
    nav = np.concatenate([x[P_IDX], x[NU_IDX], rot.T @ (x[A_IDX] - GRAVITY), x[W_IDX]])
    if not with_channel:
        return nav
    ch = np.array([e[2], e[1], e @ rot @ UAV_V_AXIS, e @ rot @ UAV_H_AXIS, d / budget.c])
    return np.concatenate([nav, ch])


def observation_jacobian(x, p_bs, budget: LinkBudget, with_channel: bool = True) -> np.ndarray:
    x = as_vector(x)
    e, d, rot = _channel_geometry(x, p_bs)
    dR = rotation_matrix_jacobian(x[Q_IDX])
    G = np.zeros((OBS_DIM, STATE_DIM))
    i3 = np.eye(3)
    G[0:3, P_IDX] = i3
    G[3:6, NU_IDX] = i3
    G[6:9, A_IDX] = rot.T
    G[6:9, Q_IDX] = np.einsum("iba,b->ai", dR, x[A_IDX] - GRAVITY)
    G[9:12, W_IDX] = i3
    if not with_channel:
        return G[:NAV_DIM]
    de_dp = (i3 - np.outer(e, e)) / d
    col_v = rot @ UAV_V_AXIS
    col_h = rot @ UAV_H_AXIS
    G[12, P_IDX] = de_dp[2]
    G[13, P_IDX] = de_dp[1]
    G[14, P_IDX] = col_v @ de_dp
    G[14, Q_IDX] = dR[:, :, 1] @ e
    G[15, P_IDX] = col_h @ de_dp
    G[15, Q_IDX] = dR[:, :, 0] @ e
    G[16, P_IDX] = e / budget.c
    return G


def update(belief: EkfBelief, obs: ObservationBundle, p_bs, budget: LinkBudget, cfg: FilterConfig = FilterConfig()) -> EkfBelief:
    """Kalman update at a DFI boundary.

    The innovation, its covariance S = V + G P G^T and the NIS are attached to
    the returned belief.  A belief with P == 0 is left unchanged (zero gain).
    """
    with_channel = obs.ch is not None
    x, P = belief.x_hat, belief.P
    r = obs.vector()
    innov = r - observation_function(x, p_bs, budget, with_channel)
    G = observation_jacobian(x, p_bs, budget, with_channel)
    S = symmetrize(obs.noise_cov + G @ P @ G.T)

    if not np.any(P):
        return EkfBelief(x.copy(), P.copy(), belief.frame_index, innov, S, None)

    # K = P G^T S^-1, via S K^T = G P
    K = spd_solve(S, G @ P, cfg.max_cond).T
    nis = float(innov @ spd_solve(S, innov, cfg.max_cond))
    x_new = x + K @ innov
    I_KG = np.eye(STATE_DIM) - K @ G
    if cfg.joseph_form:
        P_new = I_KG @ P @ I_KG.T + K @ obs.noise_cov @ K.T
    else:
        P_new = I_KG @ P
    P_new = clamp_psd(P_new)
    if cfg.renormalize_quaternion:
        x_new = _renormalize(x_new)
    _check_belief(x_new, P_new, cfg)
    gated = cfg.gate_probability is not None and nis > chi2.ppf(cfg.gate_probability, obs.dim)
    return EkfBelief(x_new, P_new, belief.frame_index, innov, S, nis, gated)


def initial_belief(
    x_true,
    sensor: SensorNoiseParams,
    attitude_std: float,
    rng: np.random.Generator,
    cfg: FilterConfig = FilterConfig(),
) -> EkfBelief:
    """Prior at frame 0 from an initialization reading independent of the DFI-0 measurements.

    Position, velocity and angular rate come from a GPS/IMU-grade reading,
    acceleration starts at zero, and the quaternion is the truth perturbed by
    ``attitude_std`` per component.  P0 is diagonal and matches those errors.
    """
    x_true = as_vector(x_true)
    z = rng.standard_normal(STATE_DIM)
    x = np.zeros(STATE_DIM)
    x[P_IDX] = x_true[P_IDX] + sensor.sigma_p * z[P_IDX]
    x[NU_IDX] = x_true[NU_IDX] + sensor.sigma_nu * z[NU_IDX]
    x[Q_IDX] = x_true[Q_IDX] + attitude_std * z[Q_IDX]
    x[W_IDX] = x_true[W_IDX] + sensor.sigma_omega * z[W_IDX]
    if cfg.renormalize_quaternion:
        x = _renormalize(x)
    std = np.concatenate(
        [
            np.full(3, sensor.sigma_p),
            np.full(3, sensor.sigma_nu),
            np.full(3, sensor.sigma_a),
            np.full(4, attitude_std),
            np.full(3, sensor.sigma_omega),
        ]
    )
    return EkfBelief(x, np.diag(std**2), 0)


def perfect_belief(x_true) -> EkfBelief:
    return EkfBelief(as_vector(x_true).copy(), np.zeros((STATE_DIM, STATE_DIM)), 0)


@dataclass
class FilterTrace:
    """Per-frame estimates plus the posterior belief at every DFI."""

    frame_states: np.ndarray
    posteriors: list[EkfBelief] = field(default_factory=list)


def run_filter(
    prior: EkfBelief,
    bundles: list[ObservationBundle],
    n_frames: int,
    dfi_len: int,
    params: ProcessNoiseParams,
    p_bs,
    budget: LinkBudget,
    cfg: FilterConfig = FilterConfig(),
) -> FilterTrace:
    """Alternate update and M-step prediction over a whole run.

    ``bundles[l]`` holds the measurements taken at frame ``l * dfi_len``.  The
    estimate used at frame ``l*M`` is the posterior; frames ``l*M + m`` for
    ``m = 1..M-1`` use the m-step predictions.
    """
    n_dfi = -(-n_frames // dfi_len)
    if len(bundles) < n_dfi:
        raise ValueError(f"need {n_dfi} observation bundles, got {len(bundles)}")
    states = np.empty((n_frames, STATE_DIM))
    trace = FilterTrace(states)
    belief = prior
    for ell in range(n_dfi):
        start = ell * dfi_len
        post = update(belief, bundles[ell], p_bs, budget, cfg)
        trace.posteriors.append(post)
        states[start] = post.x_hat
        last = ell == n_dfi - 1
        n_pred = n_frames - start - 1 if last else dfi_len
        if n_pred == 0:
            continue
        preds = predict(post, params, n_pred, cfg)
        for m, b in enumerate(preds[: dfi_len - 1], start=1):
            states[start + m] = b.x_hat
        belief = preds[-1]
    return trace


def nees(x_true, belief: EkfBelief, max_cond: float = 1e12) -> float:
    e = as_vector(x_true) - belief.x_hat
    try:
        return float(e @ spd_solve(belief.P, e, max_cond))
    except NumericalError:
        return float("nan")
