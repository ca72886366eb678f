import dataclasses

import numpy as np
import pytest

from conftest import REFERENCE_TOML, small_config, to_toml
from uavfuse.config import config_from_dict, config_to_dict, load_config, reference_config
from uavfuse.errors import ConfigError


def test_reference_file_matches_factory():
    assert config_to_dict(load_config(REFERENCE_TOML)) == config_to_dict(reference_config())


def test_reference_cadence():
    t = reference_config(duration=30.0).timing
    assert (t.dfi_len, t.n_frames, t.n_dfi) == (200, 30_000, 150)
    t = reference_config(duration=1.0).timing
    assert (t.n_frames, t.n_dfi) == (1000, 5)


def test_dict_round_trip():
    cfg = small_config()
    again = config_from_dict(config_to_dict(cfg))
    assert config_to_dict(again) == config_to_dict(cfg)
    assert np.array_equal(again.initial_state, cfg.initial_state)


def test_toml_round_trip(tmp_path):
    path = tmp_path / "c.toml"
    path.write_text(to_toml(config_to_dict(small_config())))
    assert config_to_dict(load_config(path)) == config_to_dict(small_config())


def broken(mutate):
    raw = config_to_dict(small_config())
    mutate(raw)
    return raw


@pytest.mark.parametrize(
    "mutate",
    [
        lambda r: r.pop("timing"),
        lambda r: r["link"].pop("beta0"),
        lambda r: r["timing"].update(t_dfi=0.2005),
        lambda r: r["timing"].update(duration=1.0005),
        lambda r: r["timing"].update(t_f=0.0),
        lambda r: r["link"].update(fc="30 GHz"),
        lambda r: r["sensor_noise"].update(sigma_p=-1.0),
        lambda r: r["scenario"].update(schemes=["fused", "oracle"]),
        lambda r: r["scenario"].update(seeds=[]),
        lambda r: r["scenario"].update(seeds=[1, 1]),
        lambda r: r["scenario"].update(p_bs=[0, 0]),
        lambda r: r["initial_state"].update(q=[0, 0, 0, 0]),
        lambda r: r["initial_state"].update(p=[0, 0, 0]),
        lambda r: r["arrays"].update(bs=[0, 4]),
        lambda r: r["filter"].update(unknown_knob=1),
        lambda r: r["filter"].update(gate_probability=1.5),
        lambda r: r["channel"].update(pilot_codebook="random"),
        lambda r: r["channel"].update(filter_cov_scale=0.0),
    ],
)
def test_invalid_configs_raise(mutate):
    with pytest.raises(ConfigError):
        config_from_dict(broken(mutate))


def test_unreadable_files(tmp_path):
    with pytest.raises(ConfigError):
        load_config(tmp_path / "missing.toml")
    bad = tmp_path / "bad.toml"
    bad.write_text("[timing\nt_f = ")
    with pytest.raises(ConfigError):
        load_config(bad)


def test_optional_sections_default():
    raw = config_to_dict(small_config())
    raw.pop("filter")
    raw.pop("channel")
    cfg = config_from_dict(raw)
    assert cfg.filter.renormalize_quaternion and cfg.channel.pilot_codebook == "scrambled"


def test_noise_power_override():
    raw = config_to_dict(small_config())
    raw["link"]["noise_power_dbm"] = -90.0
    b = config_from_dict(raw).link.budget()
    assert b.sigma2 == pytest.approx(1e-12)


def test_with_overrides_validates():
    cfg = small_config()
    with pytest.raises(ConfigError):
        cfg.with_overrides(schemes=("nope",))
    assert cfg.with_overrides(seeds=(5,)).seeds == (5,)
    assert dataclasses.replace(cfg).seeds == cfg.seeds
