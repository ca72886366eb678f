import json

import numpy as np
import pytest

from conftest import small_config, to_toml
from uavfuse import __version__
from uavfuse.cli import main
from uavfuse.config import config_to_dict
from uavfuse.export import read_frames_csv, read_summary_csv, write_frames_csv, write_summary_csv
from uavfuse.scenario import power_sweep, run_scenario


def test_summary_round_trip(tmp_path):
    rows, _ = power_sweep(small_config(seeds=(0, 1)))
    path = tmp_path / "summary.csv"
    write_summary_csv(path, rows)
    back = read_summary_csv(path)
    assert [(r["power_dbm"], r["scheme"], r["mean_se"], r["ci95"]) for r in back] == [
        (r.power_dbm, r.scheme, r.mean_se, r.ci95) for r in rows
    ]


def test_frames_row_count_and_values(tmp_path):
    cfg = small_config(seeds=(0, 1))
    runs = run_scenario(cfg)
    path = tmp_path / "frames.csv"
    write_frames_csv(path, runs, cfg.timing.t_f)
    data = read_frames_csv(path)
    assert len(data["frame"]) == 1000 * 4 * 2
    fused0 = [r for r in runs if r.scheme == "fused" and r.seed == 0][0]
    sel = (data["scheme"] == "fused") & (data["seed"] == 0)
    assert np.array_equal(data["se_bpshz"][sel], fused0.se)
    assert np.array_equal(data["pos_err_m"][sel], fused0.pos_err)


def test_cli_validate(small_toml, capsys):
    assert main(["validate-config", "--config", str(small_toml)]) == 0
    assert "1000 frames" in capsys.readouterr().out


def test_cli_config_errors(tmp_path):
    assert main(["validate-config", "--config", str(tmp_path / "none.toml")]) == 2
    raw = config_to_dict(small_config())
    raw["timing"]["t_dfi"] = 0.2005
    bad = tmp_path / "bad.toml"
    bad.write_text(to_toml(raw))
    assert main(["run", "--config", str(bad), "--out", str(tmp_path / "o")]) == 2


def test_cli_bad_arguments_exit_2(small_toml, tmp_path):
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(small_toml), "--out", str(tmp_path), "--schemes", "fused,bogus"])
    assert exc.value.code == 2
    with pytest.raises(SystemExit) as exc:
        main(["run", "--config", str(small_toml), "--out", str(tmp_path), "--seeds", "a,b"])
    assert exc.value.code == 2


def test_cli_run_outputs_and_determinism(small_toml, tmp_path):
    args = ["run", "--config", str(small_toml), "--seeds", "3", "--schemes", "fused,genie"]
    assert main(args + ["--out", str(tmp_path / "a")]) == 0
    assert main(args + ["--out", str(tmp_path / "b")]) == 0
    for name in ("frames.csv", "dfi.csv", "summary.csv", "manifest.json"):
        assert (tmp_path / "a" / name).read_bytes() == (tmp_path / "b" / name).read_bytes()
    manifest = json.loads((tmp_path / "a" / "manifest.json").read_text())
    assert manifest["version"] == __version__
    assert manifest["seeds"] == [3] and manifest["schemes"] == ["fused", "genie"]
    assert manifest["config"] == config_to_dict(small_config())
    header = (tmp_path / "a" / "frames.csv").read_text().splitlines()[0]
    assert header == "frame,time_s,scheme,seed,pos_err_m,att_mse,se_bpshz"


def test_cli_sweep(small_toml, tmp_path):
    out = tmp_path / "s"
    assert main(["sweep", "--config", str(small_toml), "--out", str(out), "--powers-dbm", "0,20", "--seeds", "0"]) == 0
    rows = read_summary_csv(out / "summary.csv")
    assert {r["power_dbm"] for r in rows} == {0.0, 20.0}
    assert (out / "summary.csv").read_text().splitlines()[0] == "power_dbm,scheme,mean_se,ci95"
    assert len((out / "runs.csv").read_text().splitlines()) == 1 + 2 * 4


def test_cli_divergence_exit_3(tmp_path):
    raw = config_to_dict(small_config(seeds=(0,)))
    raw["filter"]["divergence_trace"] = 1e-9
    path = tmp_path / "div.toml"
    path.write_text(to_toml(raw))
    out = tmp_path / "o"
    assert main(["run", "--config", str(path), "--out", str(out)]) == 3
    assert (out / "frames.csv").exists()
    assert json.loads((out / "manifest.json").read_text())["diverged_runs"]


def test_cli_degenerate_information_exit_3(tmp_path):
    raw = config_to_dict(small_config(seeds=(0,)))
    raw["channel"]["pilot_codebook"] = "dft"
    path = tmp_path / "dft.toml"
    path.write_text(to_toml(raw))
    assert main(["run", "--config", str(path), "--out", str(tmp_path / "o"), "--schemes", "fused"]) == 3


def test_cli_duration_override(small_toml, tmp_path):
    out = tmp_path / "d"
    assert main(["run", "--config", str(small_toml), "--out", str(out), "--seeds", "0", "--schemes", "genie", "--duration", "0.4"]) == 0
    assert len((out / "frames.csv").read_text().splitlines()) == 1 + 400
    assert json.loads((out / "manifest.json").read_text())["config"]["timing"]["duration"] == 0.4
    assert main(["run", "--config", str(small_toml), "--out", str(out), "--duration", "0.0005"]) == 2
