"""LoS channel parameters, pilot codebook, Fisher information and CRB-limited observations.

Two parameter orders appear here and must not be mixed up:

* FIM order ``[theta_u, phi_u, theta_b, phi_b, tau]`` (UAV block, BS block, delay),
* observation order ``[theta_b, phi_b, theta_u, phi_u, tau]`` used by the filter.

``FIM_TO_OBS`` converts the former into the latter.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dynamics import P_IDX, Q_IDX, as_vector
from .errors import DegenerateInformationError
from .geometry import (
    ArraySpec,
    DirectionCosines,
    bs_direction_cosines,
    los_unit_vector,
    steering_derivatives,
    steering_vector,
    uav_direction_cosines,
)
from .linalg import psd_sqrt, scaled_condition, symmetrize

SPEED_OF_LIGHT = 299_792_458.0
THERMAL_NOISE_DBM_HZ = -174.0
DEFAULT_BANDWIDTH = 100e6
DEFAULT_NOISE_FIGURE_DB = 8.0

FIM_TO_OBS = np.array([2, 3, 0, 1, 4])

# |v_B^H f|^2 at or below this is treated as an exact null of the pilot
_NULL_GAIN = 1e-24


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


def watt_to_dbm(w: float) -> float:
    return 10.0 * np.log10(w) + 30.0


def thermal_noise_power(bandwidth: float, noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB) -> float:
    """Receiver noise power in W: -174 dBm/Hz plus noise figure over the bandwidth."""
    return dbm_to_watt(THERMAL_NOISE_DBM_HZ + noise_figure_db + 10.0 * np.log10(bandwidth))


def flat_spectrum_b_eff(bandwidth: float) -> float:
    """RMS bandwidth of a unit-energy pulse with a flat spectrum over [-B/2, B/2]."""
    return bandwidth / np.sqrt(12.0)


@dataclass(frozen=True)
class LinkBudget:
    p_t: float
    sigma2: float
    beta0: float
    fc: float
    b_eff: float
    c: float = SPEED_OF_LIGHT

    def __post_init__(self):
        for name in ("p_t", "sigma2", "beta0", "fc", "b_eff", "c"):
            if not getattr(self, name) > 0:
                raise ValueError(f"link budget field {name} must be positive")

    @classmethod
    def from_dbm(
        cls,
        p_t_dbm: float,
        beta0: float,
        fc: float = 30e9,
        bandwidth: float = DEFAULT_BANDWIDTH,
        noise_power_dbm: float | None = None,
        noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB,
        b_eff: float | None = None,
    ) -> "LinkBudget":
        sigma2 = thermal_noise_power(bandwidth, noise_figure_db) if noise_power_dbm is None else dbm_to_watt(noise_power_dbm)
        return cls(
            p_t=dbm_to_watt(p_t_dbm),
            sigma2=sigma2,
            beta0=beta0,
            fc=fc,
            b_eff=flat_spectrum_b_eff(bandwidth) if b_eff is None else b_eff,
        )

    def with_power(self, p_t: float) -> "LinkBudget":
        return LinkBudget(p_t, self.sigma2, self.beta0, self.fc, self.b_eff, self.c)


@dataclass(frozen=True)
class ChannelParams:
    dc_bs: DirectionCosines
    dc_uav: DirectionCosines
    tau: float
    alpha: float

    def __post_init__(self):
        if not self.tau > 0 or not self.alpha > 0:
            raise ValueError("delay and path gain must be positive")

    def observation_vector(self) -> np.ndarray:
        return np.array([self.dc_bs.theta, self.dc_bs.phi, self.dc_uav.theta, self.dc_uav.phi, self.tau])


@dataclass(frozen=True)
class PilotConfig:
    """Pilot beamformers stored as the columns of an (N_B, n_p) matrix."""

    beamformers: np.ndarray

    def __post_init__(self):
        F = np.asarray(self.beamformers, dtype=complex)
        if F.ndim != 2 or F.shape[1] < 1:
            raise ValueError("beamformers must be an (N_B, n_p) matrix with n_p >= 1")
        norms = np.linalg.norm(F, axis=0)
        if np.max(np.abs(norms - 1.0)) > 1e-12:
            raise ValueError(f"pilot beamformers must be unit-norm (max deviation {np.max(np.abs(norms - 1)):.2e})")
        object.__setattr__(self, "beamformers", F)

    @property
    def n_p(self) -> int:
        return self.beamformers.shape[1]


@dataclass(frozen=True)
class Arrays:
    bs: ArraySpec
    uav: ArraySpec


def path_gain(d: float, beta0: float) -> float:
    if not d > 0:
        raise ValueError(f"distance must be positive, got {d}")
    return np.sqrt(beta0) / d


def snr_scale(params: ChannelParams, arrays: Arrays, budget: LinkBudget) -> float:
    """lambda = P_T N_U N_B alpha^2 / sigma^2: SNR of a perfectly aligned beam pair."""
    return budget.p_t * arrays.uav.n * arrays.bs.n * params.alpha**2 / budget.sigma2


def true_channel_params(x, p_bs, budget: LinkBudget) -> ChannelParams:
    x = as_vector(x)
    e, d = los_unit_vector(x[P_IDX], p_bs)
    return ChannelParams(
        dc_bs=bs_direction_cosines(x[P_IDX], p_bs),
        dc_uav=uav_direction_cosines(e, x[Q_IDX]),
        tau=d / budget.c,
        alpha=path_gain(d, budget.beta0),
    )


def _dft_basis(n: int) -> np.ndarray:
    idx = np.arange(n)
    return np.exp(2j * np.pi * np.outer(idx, idx) / n) / np.sqrt(n)


def dft_pilot_codebook(arr: ArraySpec) -> PilotConfig:
    """Orthonormal 2-D DFT codebook with one pilot per BS element (N_P = N_B)."""
    return PilotConfig(np.kron(_dft_basis(arr.n_v), _dft_basis(arr.n_h)))


def scrambled_pilot_codebook(arr: ArraySpec, seed: int = 0) -> PilotConfig:
    """DFT codebook with a fixed pseudo-random phase on every BS element.

    Still orthonormal, so delivered power and the delay/UAV-angle information
    are unchanged.  Unlike plain DFT beams (linear phase across the array),
    these pilots carry BS-angle information under the per-pilot EFIM: for any
    linear-phase pilot the AoD block is identically zero.
    """
    phases = np.exp(2j * np.pi * np.random.default_rng(seed).random(arr.n))
    return PilotConfig(phases[:, None] * dft_pilot_codebook(arr).beamformers)


def _fim_from_pilots(params: ChannelParams, F: np.ndarray, arrays: Arrays, budget: LinkBudget) -> np.ndarray:
    lam = snr_scale(params, arrays, budget)
    v_b = steering_vector(params.dc_bs, arrays.bs)
    k_b, phi_b = steering_derivatives(params.dc_bs, arrays.bs)
    k_u, phi_u = steering_derivatives(params.dc_uav, arrays.uav)

    g = F.conj().T @ v_b  # f_i^H v_B
    gain = np.abs(g) ** 2  # G_i = |v_B^H f_i|^2
    a = k_b.conj() @ F  # k_B^H f_i
    b = phi_b.conj() @ F  # phi_B^H f_i
    lit = gain > _NULL_GAIN
    g, gain, a, b = g[lit], gain[lit], a[lit], b[lit]

    xi_t = np.real(a * g)
    xi_p = np.real(b * g)
    chi = a * np.conj(b)

    J = np.zeros((5, 5))
    j_u = np.array(
        [
            [np.vdot(k_u, k_u).real, np.vdot(k_u, phi_u).real],
            [np.vdot(k_u, phi_u).real, np.vdot(phi_u, phi_u).real],
        ]
    )
    J[0:2, 0:2] = 2.0 * lam * gain.sum() * j_u
    j_tt = np.sum(np.abs(a) ** 2 - xi_t**2 / gain)
    j_pp = np.sum(np.abs(b) ** 2 - xi_p**2 / gain)
    j_tp = np.sum(np.real(chi) - xi_p * xi_t / gain)
    J[2:4, 2:4] = 2.0 * lam * np.array([[j_tt, j_tp], [j_tp, j_pp]])
    J[4, 4] = 8.0 * np.pi**2 * lam * budget.b_eff**2 * gain.sum()
    return symmetrize(J)


def fim_single_pilot(params: ChannelParams, f, arrays: Arrays, budget: LinkBudget) -> np.ndarray:
    """Equivalent FIM of one pilot, in FIM order.

    The beam-power factor G is |v_B^H f|^2.  A pilot whose beam has an exact
    null on the UAV contributes nothing.
    """
    f = np.asarray(f, dtype=complex).reshape(-1, 1)
    if abs(np.linalg.norm(f) - 1.0) > 1e-12:
        raise ValueError("pilot beamformer must be unit-norm")
    return _fim_from_pilots(params, f, arrays, budget)


def fim_total(params: ChannelParams, pilots: PilotConfig, arrays: Arrays, budget: LinkBudget) -> np.ndarray:
    """Sum of the per-pilot EFIMs over the pilot burst of one DFI."""
    return _fim_from_pilots(params, pilots.beamformers, arrays, budget)


def crb_covariance(J: np.ndarray, max_cond: float = 1e12) -> np.ndarray:
    """Inverse of the FIM (same parameter order).

    Conditioning is judged on the unit-free matrix D^-1/2 J D^-1/2, since the
    raw entries span ~25 orders of magnitude between cosines and delay.
    """
    J = symmetrize(np.asarray(J, dtype=float))
    diag = np.diag(J)
    if np.any(diag <= 0):
        raise DegenerateInformationError(
            f"no information on parameter(s) {np.flatnonzero(diag <= 0).tolist()}; "
            "increase transmit power or pilot count, or move the UAV off the pilot nulls"
        )
    cond = scaled_condition(J)
    if not np.isfinite(cond) or cond > max_cond:
        raise DegenerateInformationError(
            f"channel FIM is near-singular (scaled condition {cond:.3e}); "
            "increase transmit power or pilot count, or change the scenario geometry"
        )
    s = 1.0 / np.sqrt(diag)
    C = J * np.outer(s, s)
    return symmetrize(np.linalg.inv(C) * np.outer(s, s))


def channel_observation_cov(params: ChannelParams, pilots: PilotConfig, arrays: Arrays, budget: LinkBudget) -> np.ndarray:
    """CRB of the channel observables, permuted into observation order."""
    V = crb_covariance(fim_total(params, pilots, arrays, budget))
    return V[np.ix_(FIM_TO_OBS, FIM_TO_OBS)]


def synthesize_channel_observation(params: ChannelParams, V: np.ndarray, rng: np.random.Generator, z=None) -> np.ndarray:
    """Truth plus N(0, V) noise, in observation order.

    ``z`` optionally supplies the standard-normal draw so that several
    covariances (e.g. a power sweep) can share one noise realization.
    """
    if z is None:
        z = rng.standard_normal(5)
    return params.observation_vector() + psd_sqrt(V) @ np.asarray(z, dtype=float)
