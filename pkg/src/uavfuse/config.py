"""Scenario configuration: TOML ingestion, validation and serialization.

Every physical field is mandatory.  The only defaults are the receiver noise
power (thermal noise plus noise figure over the bandwidth), the effective
bandwidth (flat spectrum, B/sqrt(12)) and the optional ``[filter]`` and
``[channel]`` tuning sections documented in ``configs/reference.toml``.
"""

from __future__ import annotations

import math
import sys
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np

from .channel import DEFAULT_NOISE_FIGURE_DB, Arrays, LinkBudget
from .dynamics import MotionState, ProcessNoiseParams
from .errors import ConfigError
from .fusion import FilterConfig
from .geometry import ArraySpec
from .sensors import SensorNoiseParams

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

SCHEMES = ("fused", "gps_imu_only", "pilot_only", "genie")
PILOT_CODEBOOKS = ("scrambled", "dft")


@dataclass(frozen=True)
class LinkSettings:
    p_t_dbm: float
    beta0: float
    fc: float
    bandwidth: float
    noise_power_dbm: float | None = None
    noise_figure_db: float = DEFAULT_NOISE_FIGURE_DB
    b_eff: float | None = None

    def budget(self, p_t_dbm: float | None = None) -> LinkBudget:
        return LinkBudget.from_dbm(
            self.p_t_dbm if p_t_dbm is None else p_t_dbm,
            beta0=self.beta0,
            fc=self.fc,
            bandwidth=self.bandwidth,
            noise_power_dbm=self.noise_power_dbm,
            noise_figure_db=self.noise_figure_db,
            b_eff=self.b_eff,
        )


@dataclass(frozen=True)
class Timing:
    t_f: float
    t_dfi: float
    duration: float

    @property
    def dfi_len(self) -> int:
        return round(self.t_dfi / self.t_f)

    @property
    def n_frames(self) -> int:
        return round(self.duration / self.t_f)

    @property
    def n_dfi(self) -> int:
        return -(-self.n_frames // self.dfi_len)


@dataclass(frozen=True)
class FilterSettings:
    init_attitude_std: float = 1e-3
    perfect_init: bool = False
    renormalize_quaternion: bool = True
    joseph_form: bool = False
    divergence_trace: float = 1e8
    gate_probability: float | None = None

    def filter_config(self) -> FilterConfig:
        return FilterConfig(
            renormalize_quaternion=self.renormalize_quaternion,
            joseph_form=self.joseph_form,
            divergence_trace=self.divergence_trace,
            gate_probability=self.gate_probability,
        )


@dataclass(frozen=True)
class ChannelSettings:
    """pilot_codebook: "scrambled" (default) or "dft".
    obs_noise_scale: multiplies the CRB used to draw channel observations.
    filter_cov_scale: multiplies the CRB the fused filter assumes.
    """

    pilot_codebook: str = "scrambled"
    obs_noise_scale: float = 1.0
    filter_cov_scale: float = 1.0


@dataclass(frozen=True)
class ScenarioConfig:
    arrays: Arrays
    link: LinkSettings
    sensor_noise: SensorNoiseParams
    sigma1: float
    sigma2: float
    timing: Timing
    initial_state: np.ndarray
    p_bs: np.ndarray
    seeds: tuple[int, ...]
    powers_dbm: tuple[float, ...]
    schemes: tuple[str, ...]
    filter: FilterSettings = field(default_factory=FilterSettings)
    channel: ChannelSettings = field(default_factory=ChannelSettings)

    @property
    def process_noise(self) -> ProcessNoiseParams:
        return ProcessNoiseParams(self.sigma1, self.sigma2, self.timing.t_f)

    def with_overrides(self, **kw) -> "ScenarioConfig":
        cfg = replace(self, **kw)
        validate(cfg)
        return cfg


def _require(d: dict, key: str, section: str):
    if key not in d:
        raise ConfigError(f"missing required field [{section}].{key}")
    return d[key]


def _number(d, key, section, positive=False, nonneg=False):
    val = _require(d, key, section)
    if isinstance(val, bool) or not isinstance(val, (int, float)) or not math.isfinite(val):
        raise ConfigError(f"[{section}].{key} must be a finite number, got {val!r}")
    if positive and not val > 0:
        raise ConfigError(f"[{section}].{key} must be positive, got {val}")
    if nonneg and val < 0:
        raise ConfigError(f"[{section}].{key} must be >= 0, got {val}")
    return float(val)


def _vector(d, key, section, size):
    val = _require(d, key, section)
    try:
        arr = np.asarray(val, dtype=float)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"[{section}].{key} must be a list of numbers") from exc
    if arr.shape != (size,) or not np.all(np.isfinite(arr)):
        raise ConfigError(f"[{section}].{key} must be {size} finite numbers, got {val!r}")
    return arr


def _array_spec(d, key):
    val = _require(d, key, "arrays")
    if not isinstance(val, list) or len(val) != 2 or not all(isinstance(v, int) and not isinstance(v, bool) for v in val):
        raise ConfigError(f"[arrays].{key} must be [n_h, n_v] integers, got {val!r}")
    try:
        return ArraySpec(*val)
    except ValueError as exc:
        raise ConfigError(f"[arrays].{key}: {exc}") from exc


def _section(raw, name, optional=False):
    sec = raw.get(name)
    if sec is None:
        if optional:
            return {}
        raise ConfigError(f"missing required section [{name}]")
    if not isinstance(sec, dict):
        raise ConfigError(f"[{name}] must be a table")
    return sec


def _optional_section(raw, name, cls):
    sec = _section(raw, name, optional=True)
    known = set(cls.__dataclass_fields__)
    unknown = set(sec) - known
    if unknown:
        raise ConfigError(f"unknown field(s) in [{name}]: {sorted(unknown)}")
    try:
        return cls(**sec)
    except TypeError as exc:
        raise ConfigError(f"[{name}]: {exc}") from exc


def config_from_dict(raw: dict) -> ScenarioConfig:
    arrays_sec = _section(raw, "arrays")
    link_sec = _section(raw, "link")
    sens_sec = _section(raw, "sensor_noise")
    proc_sec = _section(raw, "process_noise")
    time_sec = _section(raw, "timing")
    init_sec = _section(raw, "initial_state")
    scen_sec = _section(raw, "scenario")

    link = LinkSettings(
        p_t_dbm=_number(link_sec, "p_t_dbm", "link"),
        beta0=_number(link_sec, "beta0", "link", positive=True),
        fc=_number(link_sec, "fc", "link", positive=True),
        bandwidth=_number(link_sec, "bandwidth", "link", positive=True),
        noise_power_dbm=_number(link_sec, "noise_power_dbm", "link") if "noise_power_dbm" in link_sec else None,
        noise_figure_db=_number(link_sec, "noise_figure_db", "link") if "noise_figure_db" in link_sec else DEFAULT_NOISE_FIGURE_DB,
        b_eff=_number(link_sec, "b_eff", "link", positive=True) if "b_eff" in link_sec else None,
    )
    sensor = SensorNoiseParams(*(_number(sens_sec, k, "sensor_noise", nonneg=True) for k in ("sigma_p", "sigma_nu", "sigma_a", "sigma_omega")))
    timing = Timing(*(_number(time_sec, k, "timing", positive=True) for k in ("t_f", "t_dfi", "duration")))
    x0 = MotionState(
        _vector(init_sec, "p", "initial_state", 3),
        _vector(init_sec, "nu", "initial_state", 3),
        _vector(init_sec, "a", "initial_state", 3),
        _vector(init_sec, "q", "initial_state", 4),
        _vector(init_sec, "omega", "initial_state", 3),
    ).to_vector()

    seeds = _require(scen_sec, "seeds", "scenario")
    if not isinstance(seeds, list) or not seeds or not all(isinstance(s, int) and not isinstance(s, bool) and s >= 0 for s in seeds):
        raise ConfigError(f"[scenario].seeds must be a non-empty list of non-negative integers, got {seeds!r}")
    powers = _require(scen_sec, "powers_dbm", "scenario")
    if not isinstance(powers, list) or not all(isinstance(p, (int, float)) and not isinstance(p, bool) for p in powers):
        raise ConfigError(f"[scenario].powers_dbm must be a list of numbers, got {powers!r}")
    schemes = _require(scen_sec, "schemes", "scenario")
    if not isinstance(schemes, list):
        raise ConfigError("[scenario].schemes must be a list")

    cfg = ScenarioConfig(
        arrays=Arrays(_array_spec(arrays_sec, "bs"), _array_spec(arrays_sec, "uav")),
        link=link,
        sensor_noise=sensor,
        sigma1=_number(proc_sec, "sigma1", "process_noise", nonneg=True),
        sigma2=_number(proc_sec, "sigma2", "process_noise", nonneg=True),
        timing=timing,
        initial_state=x0,
        p_bs=_vector(scen_sec, "p_bs", "scenario", 3),
        seeds=tuple(seeds),
        powers_dbm=tuple(float(p) for p in powers),
        schemes=tuple(schemes),
        filter=_optional_section(raw, "filter", FilterSettings),
        channel=_optional_section(raw, "channel", ChannelSettings),
    )
    validate(cfg)
    return cfg


def validate(cfg: ScenarioConfig) -> None:
    t = cfg.timing
    for name, ratio in (("t_dfi / t_f", t.t_dfi / t.t_f), ("duration / t_f", t.duration / t.t_f)):
        if abs(ratio - round(ratio)) > 1e-9 * max(1.0, ratio) or round(ratio) < 1:
            raise ConfigError(f"{name} must be a positive integer, got {ratio}")
    bad = [s for s in cfg.schemes if s not in SCHEMES]
    if bad or not cfg.schemes:
        raise ConfigError(f"unknown scheme(s) {bad}; choose from {list(SCHEMES)}")
    if len(set(cfg.schemes)) != len(cfg.schemes):
        raise ConfigError("duplicate schemes")
    if len(set(cfg.seeds)) != len(cfg.seeds):
        raise ConfigError("duplicate seeds")
    if np.linalg.norm(cfg.initial_state[9:13]) == 0:
        raise ConfigError("initial quaternion must be non-zero")
    if np.linalg.norm(cfg.initial_state[0:3] - cfg.p_bs) == 0:
        raise ConfigError("initial UAV position coincides with the BS")
    ch = cfg.channel
    if ch.pilot_codebook not in PILOT_CODEBOOKS:
        raise ConfigError(f"[channel].pilot_codebook must be one of {PILOT_CODEBOOKS}")
    if ch.obs_noise_scale < 0 or not ch.filter_cov_scale > 0:
        raise ConfigError("[channel] obs_noise_scale must be >= 0 and filter_cov_scale > 0")
    f = cfg.filter
    if f.init_attitude_std < 0 or not f.divergence_trace > 0:
        raise ConfigError("[filter] init_attitude_std must be >= 0 and divergence_trace > 0")
    if f.gate_probability is not None and not 0 < f.gate_probability < 1:
        raise ConfigError("[filter].gate_probability must lie in (0, 1)")


def load_config(path) -> ScenarioConfig:
    path = Path(path)
    try:
        raw = tomllib.loads(path.read_text())
    except FileNotFoundError as exc:
        raise ConfigError(f"config file not found: {path}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    return config_from_dict(raw)


def config_to_dict(cfg: ScenarioConfig) -> dict:
    """Plain-data form of a config (the inverse of ``config_from_dict``)."""
    x0 = cfg.initial_state
    link = {k: v for k, v in asdict(cfg.link).items() if v is not None}
    filt = {k: v for k, v in asdict(cfg.filter).items() if v is not None}
    return {
        "arrays": {"bs": [cfg.arrays.bs.n_h, cfg.arrays.bs.n_v], "uav": [cfg.arrays.uav.n_h, cfg.arrays.uav.n_v]},
        "link": link,
        "sensor_noise": asdict(cfg.sensor_noise),
        "process_noise": {"sigma1": cfg.sigma1, "sigma2": cfg.sigma2},
        "timing": asdict(cfg.timing),
        "initial_state": {
            "p": x0[0:3].tolist(),
            "nu": x0[3:6].tolist(),
            "a": x0[6:9].tolist(),
            "q": x0[9:13].tolist(),
            "omega": x0[13:16].tolist(),
        },
        "scenario": {
            "p_bs": cfg.p_bs.tolist(),
            "seeds": list(cfg.seeds),
            "powers_dbm": list(cfg.powers_dbm),
            "schemes": list(cfg.schemes),
        },
        "filter": filt,
        "channel": asdict(cfg.channel),
    }


def reference_config(
    n_antennas: int = 16,
    duration: float = 10.0,
    seeds=(0, 1, 2),
    p_t_dbm: float = 10.0,
    powers_dbm=(0.0, 5.0, 10.0, 15.0, 20.0),
    schemes=SCHEMES,
) -> ScenarioConfig:
    """The evaluation setup with square n x n arrays at both ends.

    The UAV starts at [-200, 0, 100] m flying at 70 km/h along +x, level and
    not rotating.
    """
    raw = {
        "arrays": {"bs": [n_antennas, n_antennas], "uav": [n_antennas, n_antennas]},
        "link": {"p_t_dbm": p_t_dbm, "beta0": 10**-6.2, "fc": 30e9, "bandwidth": 100e6},
        "sensor_noise": {"sigma_p": 3.0, "sigma_nu": 0.03, "sigma_a": 2e-3, "sigma_omega": 5.2e-4},
        "process_noise": {"sigma1": 2.24e-2, "sigma2": 0.1},
        "timing": {"t_f": 1e-3, "t_dfi": 0.2, "duration": duration},
        "initial_state": {
            "p": [-200.0, 0.0, 100.0],
            "nu": [70.0 / 3.6, 0.0, 0.0],
            "a": [0.0, 0.0, 0.0],
            "q": [0.0, 0.0, 0.0, 1.0],
            "omega": [0.0, 0.0, 0.0],
        },
        "scenario": {
            "p_bs": [0.0, 0.0, 0.0],
            "seeds": list(seeds),
            "powers_dbm": list(powers_dbm),
            "schemes": list(schemes),
        },
    }
    return config_from_dict(raw)
