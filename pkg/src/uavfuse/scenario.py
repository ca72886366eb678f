"""Monte Carlo runner: world generation, the four beamforming schemes and metrics.

One *world* per seed holds everything random that does not depend on the
transmit power: the true trajectory, the GPS/IMU readings, the standard-normal
draws behind the channel observations and the filter initialization.  Every
scheme and every power level of a sweep is evaluated on the same world, which
pairs the comparisons.
"""

from __future__ import annotations

import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats

from .beamforming import beam_gains, snr_scales, spectral_efficiency, state_cosines
from .channel import (
    LinkBudget,
    PilotConfig,
    dft_pilot_codebook,
    scrambled_pilot_codebook,
    true_channel_params,
    channel_observation_cov,
)
from .config import ScenarioConfig
from .dynamics import P_IDX, Q_IDX, generate_trajectory
from .errors import FilterDivergenceError
from .fusion import (
    EkfBelief,
    FilterTrace,
    ObservationBundle,
    initial_belief,
    nees,
    observation_noise_cov,
    perfect_belief,
    run_filter,
)
from .linalg import psd_sqrt
from .sensors import synthesize_gps, synthesize_imu

log = logging.getLogger(__name__)

FILTER_SCHEMES = ("fused", "gps_imu_only")


@dataclass
class World:
    seed: int
    truth: np.ndarray  # (n_frames, 16)
    gps: list
    imu: list
    channel_z: np.ndarray  # (n_dfi, 5) standard normals, observation order
    init_seq: np.random.SeedSequence

    def init_rng(self) -> np.random.Generator:
        # a fresh generator each call so every filter starts from the same prior
        return np.random.default_rng(self.init_seq)


@dataclass
class RunMetrics:
    scheme: str
    seed: int
    p_t_dbm: float
    pos_err: np.ndarray  # m, per frame
    att_mse: np.ndarray  # per frame
    se: np.ndarray  # bit/s/Hz, per frame
    nees: np.ndarray = field(default_factory=lambda: np.empty(0))  # per DFI, at the posterior
    nis: np.ndarray = field(default_factory=lambda: np.empty(0))
    diverged: bool = False
    error: str | None = None

    @property
    def mean_pos_err(self) -> float:
        return float(np.mean(self.pos_err))

    @property
    def mean_att_mse(self) -> float:
        return float(np.mean(self.att_mse))

    @property
    def mean_se(self) -> float:
        return float(np.mean(self.se))


@dataclass(frozen=True)
class SweepRow:
    power_dbm: float
    scheme: str
    mean_se: float
    ci95: float
    n_seeds: int


def pilot_codebook(cfg: ScenarioConfig) -> PilotConfig:
    if cfg.channel.pilot_codebook == "dft":
        return dft_pilot_codebook(cfg.arrays.bs)
    return scrambled_pilot_codebook(cfg.arrays.bs)


def build_world(cfg: ScenarioConfig, seed: int) -> World:
    traj_seq, sens_seq, ch_seq, init_seq = np.random.SeedSequence(seed).spawn(4)
    t = cfg.timing
    n_frames, dfi_len = t.n_frames, t.dfi_len
    truth = generate_trajectory(cfg.initial_state, cfg.process_noise, n_frames - 1, np.random.default_rng(traj_seq))
    rng_s = np.random.default_rng(sens_seq)
    gps, imu = [], []
    for ell in range(t.n_dfi):
        x = truth[ell * dfi_len]
        gps.append(synthesize_gps(x, cfg.sensor_noise, rng_s))
        imu.append(synthesize_imu(x, cfg.sensor_noise, rng_s))
    channel_z = np.random.default_rng(ch_seq).standard_normal((t.n_dfi, 5))
    return World(seed, truth, gps, imu, channel_z, init_seq)


def channel_observations(cfg: ScenarioConfig, world: World, budget: LinkBudget):
    """Per-DFI CRB covariances (observation order) and the noisy observations drawn from them."""
    pilots = pilot_codebook(cfg)
    dfi_len = cfg.timing.dfi_len
    covs, obs = [], []
    for ell, z in enumerate(world.channel_z):
        params = true_channel_params(world.truth[ell * dfi_len], cfg.p_bs, budget)
        V = channel_observation_cov(params, pilots, cfg.arrays, budget)
        noise = psd_sqrt(cfg.channel.obs_noise_scale * V) @ z if cfg.channel.obs_noise_scale > 0 else np.zeros(5)
        covs.append(V)
        obs.append(params.observation_vector() + noise)
    return covs, obs


def attitude_mse(q_hat, q_true) -> np.ndarray:
    """Per-row squared quaternion error after normalizing the estimate, sign ambiguity removed."""
    qh = np.atleast_2d(q_hat)
    qh = qh / np.linalg.norm(qh, axis=1, keepdims=True)
    qt = np.atleast_2d(q_true)
    return np.minimum(np.sum((qh - qt) ** 2, axis=1), np.sum((qh + qt) ** 2, axis=1))


def _prior(cfg: ScenarioConfig, world: World) -> EkfBelief:
    if cfg.filter.perfect_init:
        return perfect_belief(world.truth[0])
    return initial_belief(
        world.truth[0], cfg.sensor_noise, cfg.filter.init_attitude_std, world.init_rng(), cfg.filter.filter_config()
    )


def _run_ekf(cfg, world, budget, scheme, ch_covs, ch_obs):
    bundles = []
    for ell in range(cfg.timing.n_dfi):
        if scheme == "fused":
            V = cfg.channel.filter_cov_scale * ch_covs[ell]
            bundles.append(ObservationBundle(world.gps[ell], world.imu[ell], ch_obs[ell], observation_noise_cov(cfg.sensor_noise, V)))
        else:
            bundles.append(ObservationBundle(world.gps[ell], world.imu[ell], None, observation_noise_cov(cfg.sensor_noise, None)))
    return run_filter(
        _prior(cfg, world),
        bundles,
        cfg.timing.n_frames,
        cfg.timing.dfi_len,
        cfg.process_noise,
        cfg.p_bs,
        budget,
        cfg.filter.filter_config(),
    )


def filter_trace(cfg: ScenarioConfig, world: World, p_t_dbm: float, scheme: str = "fused") -> FilterTrace:
    """Full EKF trace of one filter scheme on one world."""
    if scheme not in FILTER_SCHEMES:
        raise ValueError(f"{scheme!r} is not a filter scheme")
    budget = cfg.link.budget(p_t_dbm)
    ch_covs, ch_obs = channel_observations(cfg, world, budget) if scheme == "fused" else (None, None)
    return _run_ekf(cfg, world, budget, scheme, ch_covs, ch_obs)


def _score(cfg, budget, truth, true_cos, beam_cos):
    gamma = snr_scales(truth, cfg.p_bs, cfg.arrays, budget) * beam_gains(true_cos, beam_cos, cfg.arrays)
    return spectral_efficiency(gamma)


def run_world(cfg: ScenarioConfig, world: World, p_t_dbm: float, schemes=None) -> list[RunMetrics]:
    """Evaluate the requested schemes on one world at one transmit power."""
    schemes = cfg.schemes if schemes is None else schemes
    budget = cfg.link.budget(p_t_dbm)
    n, dfi_len = cfg.timing.n_frames, cfg.timing.dfi_len
    truth = world.truth
    true_cos = state_cosines(truth, cfg.p_bs)
    need_ch = any(s in ("fused", "pilot_only") for s in schemes)
    ch_covs, ch_obs = channel_observations(cfg, world, budget) if need_ch else (None, None)
    nan = np.full(n, np.nan)

    out = []
    for scheme in schemes:
        if scheme in FILTER_SCHEMES:
            try:
                trace = _run_ekf(cfg, world, budget, scheme, ch_covs, ch_obs)
            except FilterDivergenceError as exc:
                log.warning("seed %d, %s at %.1f dBm diverged: %s", world.seed, scheme, p_t_dbm, exc)
                out.append(RunMetrics(scheme, world.seed, p_t_dbm, nan, nan, nan, diverged=True, error=str(exc)))
                continue
            est = trace.frame_states
            post = trace.posteriors
            out.append(
                RunMetrics(
                    scheme,
                    world.seed,
                    p_t_dbm,
                    pos_err=np.linalg.norm(est[:, P_IDX] - truth[:, P_IDX], axis=1),
                    att_mse=attitude_mse(est[:, Q_IDX], truth[:, Q_IDX]),
                    se=_score(cfg, budget, truth, true_cos, state_cosines(est, cfg.p_bs)),
                    nees=np.array([nees(truth[ell * dfi_len], b) for ell, b in enumerate(post)]),
                    nis=np.array([np.nan if b.nis is None else b.nis for b in post]),
                )
            )
        elif scheme == "pilot_only":
            # channel observation of each DFI held for all of its frames
            held = np.repeat(np.asarray(ch_obs)[:, :4], dfi_len, axis=0)[:n]
            beam_cos = np.clip(held, -1.0, 1.0)
            out.append(RunMetrics(scheme, world.seed, p_t_dbm, nan.copy(), nan.copy(), _score(cfg, budget, truth, true_cos, beam_cos)))
        elif scheme == "genie":
            zeros = np.zeros(n)
            out.append(RunMetrics(scheme, world.seed, p_t_dbm, zeros, zeros.copy(), _score(cfg, budget, truth, true_cos, true_cos)))
        else:
            raise ValueError(f"unknown scheme {scheme!r}")
    return out


def _seed_job(args):
    cfg, seed, powers, schemes = args
    world = build_world(cfg, seed)
    runs = []
    for p in powers:
        runs.extend(run_world(cfg, world, p, schemes))
    return runs


def _run_seeds(cfg, seeds, powers, schemes, workers):
    jobs = [(cfg, s, powers, schemes) for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_seed_job, jobs))
    else:
        results = [_seed_job(j) for j in jobs]
    runs = [r for batch in results for r in batch]
    order = {s: i for i, s in enumerate(schemes)}
    runs.sort(key=lambda r: (r.p_t_dbm, r.seed, order[r.scheme]))
    return runs


def run_scenario(cfg: ScenarioConfig, seeds=None, schemes=None, workers: int = 1) -> list[RunMetrics]:
    """All schemes over all seeds at the configured transmit power."""
    seeds = cfg.seeds if seeds is None else tuple(seeds)
    schemes = cfg.schemes if schemes is None else tuple(schemes)
    return _run_seeds(cfg, seeds, (cfg.link.p_t_dbm,), schemes, workers)


def ci95_half_width(values) -> float:
    """Half-width of the two-sided 95% t-interval of the mean (0 for a single value)."""
    v = np.asarray(values, dtype=float)
    if v.size < 2:
        return 0.0
    return float(stats.t.ppf(0.975, v.size - 1) * np.std(v, ddof=1) / np.sqrt(v.size))


def summarize(runs: list[RunMetrics], schemes) -> list[SweepRow]:
    rows = []
    for p in sorted({r.p_t_dbm for r in runs}):
        for s in schemes:
            vals = [r.mean_se for r in runs if r.p_t_dbm == p and r.scheme == s and not r.diverged]
            mean = float(np.mean(vals)) if vals else float("nan")
            rows.append(SweepRow(p, s, mean, ci95_half_width(vals), len(vals)))
    return rows


def power_sweep(cfg: ScenarioConfig, powers_dbm=None, seeds=None, schemes=None, workers: int = 1):
    """Mean spectral efficiency versus transmit power; returns (rows, runs)."""
    powers = cfg.powers_dbm if powers_dbm is None else tuple(float(p) for p in powers_dbm)
    if not powers:
        raise ValueError("no transmit powers given")
    seeds = cfg.seeds if seeds is None else tuple(seeds)
    schemes = cfg.schemes if schemes is None else tuple(schemes)
    runs = _run_seeds(cfg, seeds, powers, schemes, workers)
    return summarize(runs, schemes), runs
