"""Command-line entry point.

    uavfuse run --config scenario.toml --out results/ [--seeds 0,1,2] [--schemes fused,genie]
    uavfuse sweep --config scenario.toml --out results/ --powers-dbm 0,5,10,15,20
    uavfuse run --config scenario.toml --out results/ --duration 30
    uavfuse validate-config --config scenario.toml

Exit codes: 0 success, 2 configuration error, 3 numerical failure or a
diverged filter run (outputs are still written for the other runs).
"""

from __future__ import annotations

import argparse
import csv
import dataclasses
import logging
import sys
from pathlib import Path

from .config import SCHEMES, load_config
from .errors import ConfigError, DegenerateInformationError, NumericalError
from .export import write_dfi_csv, write_frames_csv, write_manifest, write_summary_csv
from .scenario import power_sweep, run_scenario, summarize

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_NUMERICAL = 3

log = logging.getLogger("uavfuse")


def _int_list(text: str) -> list[int]:
    try:
        vals = [int(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}") from exc
    if not vals or any(v < 0 for v in vals):
        raise argparse.ArgumentTypeError("seeds must be non-negative integers")
    return vals


def _float_list(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from exc
    if not vals:
        raise argparse.ArgumentTypeError("empty list")
    return vals


def _scheme_list(text: str) -> list[str]:
    vals = [t.strip() for t in text.split(",") if t.strip()]
    bad = [v for v in vals if v not in SCHEMES]
    if bad or not vals:
        raise argparse.ArgumentTypeError(f"unknown scheme(s) {bad}; choose from {','.join(SCHEMES)}")
    return vals


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="uavfuse", description="Sensor-aided predictive beamforming simulator")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--config", required=True, type=Path, help="scenario TOML file")
        p.add_argument("--out", required=True, type=Path, help="output directory (created if missing)")
        p.add_argument("--seeds", type=_int_list, help="comma-separated seeds (default: from config)")
        p.add_argument("--schemes", type=_scheme_list, help=f"comma-separated subset of {','.join(SCHEMES)}")
        p.add_argument("--workers", type=int, default=1, help="parallel processes over seeds")
        p.add_argument("--duration", type=float, help="override the flight time in seconds, e.g. 30 for the full-length run")

    common(sub.add_parser("run", help="simulate at the configured transmit power"))
    sw = sub.add_parser("sweep", help="mean spectral efficiency versus transmit power")
    common(sw)
    sw.add_argument("--powers-dbm", type=_float_list, help="comma-separated powers (default: from config)")
    va = sub.add_parser("validate-config", help="parse and check a scenario file")
    va.add_argument("--config", required=True, type=Path)
    return ap


def _write_runs_csv(path, runs) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["power_dbm", "scheme", "seed", "mean_pos_err_m", "mean_att_mse", "mean_se", "diverged"])
        for r in runs:
            w.writerow([repr(r.p_t_dbm), r.scheme, r.seed, repr(r.mean_pos_err), repr(r.mean_att_mse), repr(r.mean_se), int(r.diverged)])


def _cmd_run(args, cfg) -> int:
    seeds = tuple(args.seeds) if args.seeds else cfg.seeds
    schemes = tuple(args.schemes) if args.schemes else cfg.schemes
    runs = run_scenario(cfg, seeds, schemes, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    write_frames_csv(args.out / "frames.csv", runs, cfg.timing.t_f)
    write_dfi_csv(args.out / "dfi.csv", runs, cfg.timing.dfi_len)
    write_summary_csv(args.out / "summary.csv", summarize(runs, schemes))
    diverged = [(r.scheme, r.seed, r.p_t_dbm) for r in runs if r.diverged]
    write_manifest(args.out / "manifest.json", cfg, seeds, schemes, "run", (cfg.link.p_t_dbm,), diverged)
    for r in runs:
        log.info("seed %d %-12s pos %.4f m  att %.3e  se %.4f", r.seed, r.scheme, r.mean_pos_err, r.mean_att_mse, r.mean_se)
    return _divergence_status(diverged)


def _cmd_sweep(args, cfg) -> int:
    seeds = tuple(args.seeds) if args.seeds else cfg.seeds
    schemes = tuple(args.schemes) if args.schemes else cfg.schemes
    powers = tuple(args.powers_dbm) if args.powers_dbm else cfg.powers_dbm
    if not powers:
        raise ConfigError("no transmit powers given (config [scenario].powers_dbm is empty and --powers-dbm not set)")
    rows, runs = power_sweep(cfg, powers, seeds, schemes, workers=args.workers)
    args.out.mkdir(parents=True, exist_ok=True)
    write_summary_csv(args.out / "summary.csv", rows)
    _write_runs_csv(args.out / "runs.csv", runs)
    diverged = [(r.scheme, r.seed, r.p_t_dbm) for r in runs if r.diverged]
    write_manifest(args.out / "manifest.json", cfg, seeds, schemes, "sweep", powers, diverged)
    for row in rows:
        log.info("%6.1f dBm %-12s se %.4f +/- %.4f", row.power_dbm, row.scheme, row.mean_se, row.ci95)
    return _divergence_status(diverged)


def _divergence_status(diverged) -> int:
    if diverged:
        log.error("%d run(s) diverged: %s", len(diverged), diverged)
        return EXIT_NUMERICAL
    return EXIT_OK


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        cfg = load_config(args.config)
        if getattr(args, "duration", None) is not None:
            cfg = cfg.with_overrides(timing=dataclasses.replace(cfg.timing, duration=args.duration))
        if args.command == "validate-config":
            t = cfg.timing
            print(f"ok: {t.n_frames} frames, {t.n_dfi} DFIs of {t.dfi_len} frames, {len(cfg.seeds)} seed(s), schemes {','.join(cfg.schemes)}")
            return EXIT_OK
        if args.command == "run":
            return _cmd_run(args, cfg)
        return _cmd_sweep(args, cfg)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericalError, DegenerateInformationError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
