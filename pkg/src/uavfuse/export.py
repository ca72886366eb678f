"""CSV and manifest writers.

Floats are written with ``repr`` so a file reads back to the exact values,
and rows are sorted before writing so output is byte-identical across runs.
"""

from __future__ import annotations

import csv
import json
import platform
from pathlib import Path

import numpy as np

from . import __version__
from .config import ScenarioConfig, config_to_dict

FRAME_COLUMNS = ("frame", "time_s", "scheme", "seed", "pos_err_m", "att_mse", "se_bpshz")
SUMMARY_COLUMNS = ("power_dbm", "scheme", "mean_se", "ci95")
DFI_COLUMNS = ("dfi", "frame", "scheme", "seed", "nees", "nis")


def _f(x) -> str:
    return repr(float(x))


def _scheme_order(runs):
    order = {}
    for r in runs:
        order.setdefault(r.scheme, len(order))
    return order


def write_frames_csv(path, runs, t_f: float) -> None:
    """Per-frame metrics of every run, sorted by (seed, scheme, frame)."""
    order = _scheme_order(runs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(FRAME_COLUMNS)
        for r in sorted(runs, key=lambda r: (r.seed, order[r.scheme])):
            for k in range(len(r.se)):
                w.writerow([k, _f(k * t_f), r.scheme, r.seed, _f(r.pos_err[k]), _f(r.att_mse[k]), _f(r.se[k])])


def write_dfi_csv(path, runs, dfi_len: int) -> None:
    """Per-DFI filter diagnostics (NEES at the posterior, NIS of the update)."""
    order = _scheme_order(runs)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(DFI_COLUMNS)
        for r in sorted(runs, key=lambda r: (r.seed, order[r.scheme])):
            for ell in range(len(r.nees)):
                w.writerow([ell, ell * dfi_len, r.scheme, r.seed, _f(r.nees[ell]), _f(r.nis[ell])])


def write_summary_csv(path, rows) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        for row in sorted(rows, key=lambda r: r.power_dbm):
            w.writerow([_f(row.power_dbm), row.scheme, _f(row.mean_se), _f(row.ci95)])


def read_summary_csv(path) -> list[dict]:
    with open(path, newline="") as fh:
        return [
            {"power_dbm": float(r["power_dbm"]), "scheme": r["scheme"], "mean_se": float(r["mean_se"]), "ci95": float(r["ci95"])}
            for r in csv.DictReader(fh)
        ]


def read_frames_csv(path) -> dict[str, np.ndarray]:
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = {}
    for col in FRAME_COLUMNS:
        vals = [r[col] for r in rows]
        out[col] = np.array(vals) if col == "scheme" else np.array(vals, dtype=float)
    return out


def write_manifest(path, cfg: ScenarioConfig, seeds, schemes, command: str, powers_dbm=None, diverged=()) -> None:
    manifest = {
        "package": "uavfuse",
        "version": __version__,
        "command": command,
        "seeds": list(seeds),
        "schemes": list(schemes),
        "powers_dbm": list(cfg.powers_dbm if powers_dbm is None else powers_dbm),
        "config": config_to_dict(cfg),
        "numpy": np.__version__,
        "python": platform.python_version(),
        "diverged_runs": [list(d) for d in diverged],
    }
    Path(path).write_text(json.dumps(manifest, indent=2, sort_keys=True) + "\n")
