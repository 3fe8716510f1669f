"""Command-line entry point: ``cimdcsk {sweep,theory,compare,throughput,zeta}``.

Settings are resolved in three layers: a named preset, then an optional flat
``key = value`` config file, then command-line flags. Config keys use the
flag names with dashes replaced by underscores (``chip_len = 25``).

Exit codes: 0 success, 2 invalid parameter, 3 numerical failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import logging
import sys
from dataclasses import replace

import numpy as np

from . import harness
from .channel import ChannelProfile
from .errors import InvalidParameterError, NumericalFailureError
from .modem import SrParams, SystemParams

EXIT_INVALID = 2
EXIT_NUMERICAL = 3
EXIT_IO = 4

# config-file key -> converter
CONFIG_KEYS = {
    "preset": str,
    "system": str,
    "p1": int,
    "p2": int,
    "chip_len": int,
    "beta": int,
    "sr_p": int,
    "sr_beta": int,
    "zeta": float,
    "snr_start": float,
    "snr_stop": float,
    "snr_step": float,
    "trials": int,
    "min_errors": int,
    "seed": int,
    "workers": int,
    "batch_size": int,
    "np": int,
    "channel": str,
    "h": str,
    "f": str,
    "g": str,
    "delay_model": str,
    "out": str,
}


def read_config(path) -> dict:
    """Parse a flat ``key = value`` file (``#`` comments allowed)."""
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    try:
        with open(path) as fh:
            parser.read_string("[run]\n" + fh.read())
    except OSError as exc:
        raise OSError(f"cannot read config {path}: {exc}") from exc
    except configparser.Error as exc:
        raise InvalidParameterError(f"malformed config {path}: {exc}") from exc
    values = {}
    for key, raw in parser["run"].items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise InvalidParameterError(f"unknown config key {key!r} in {path}")
        try:
            values[key] = CONFIG_KEYS[key](raw)
        except ValueError as exc:
            raise InvalidParameterError(f"bad value for {key!r} in {path}: {raw!r}") from exc
    return values


def _profile(text: str) -> ChannelProfile | None:
    return None if text.strip().lower() in ("none", "awgn", "") else ChannelProfile.from_text(text)


def _grid(start: float, stop: float, step: float) -> tuple[float, ...]:
    if step <= 0:
        raise InvalidParameterError(f"snr step must be positive, got {step}")
    if stop < start:
        raise InvalidParameterError(f"snr stop {stop} is below start {start}")
    n = int(np.floor((stop - start) / step + 1e-9)) + 1
    return tuple(round(start + i * step, 10) for i in range(n))


def _cim_params(base: SystemParams, s: dict) -> SystemParams:
    P1 = s.get("p1", base.P1)
    P2 = s.get("p2", base.P2)
    zeta = s.get("zeta", base.zeta)
    if "beta" in s:
        if "chip_len" in s and s["chip_len"] * (P1 + P2) != s["beta"]:
            raise InvalidParameterError(f"beta={s['beta']} disagrees with (p1+p2)*chip_len={(P1 + P2) * s['chip_len']}")
        return SystemParams.from_beta(P1, P2, s["beta"], zeta)
    return SystemParams(P1, P2, s.get("chip_len", base.L), zeta)


def build_config(settings: dict) -> harness.ExperimentConfig:
    """Turn resolved settings into an :class:`~cimdcsk.harness.ExperimentConfig`."""
    s = dict(settings)
    cfg = harness.preset(s.get("preset") or "awgn")

    params = _cim_params(cfg.params, s)
    system = s.get("system", "cim").upper()
    if system == "SR":
        params = SrParams(s.get("beta", 297), s.get("sr_p", 8), params.zeta)
    elif system != "CIM":
        raise InvalidParameterError(f"system must be cim or sr, got {s['system']!r}")

    grid = cfg.eb_n0_db
    if any(k in s for k in ("snr_start", "snr_stop", "snr_step")):
        grid = _grid(s.get("snr_start", grid[0]), s.get("snr_stop", grid[-1]), s.get("snr_step", 2.0))

    profiles = dict(profile_h=cfg.profile_h, profile_f=cfg.profile_f, profile_g=cfg.profile_g)
    channel = s.get("channel")
    if channel == "awgn":
        profiles = dict(profile_h=None, profile_f=None, profile_g=None)
    elif channel == "paper":
        profiles = dict(profile_h=harness.PAPER_H, profile_f=harness.PAPER_F, profile_g=harness.PAPER_G)
    elif channel is not None:
        raise InvalidParameterError(f"channel must be paper or awgn, got {channel!r}")
    for key in ("h", "f", "g"):
        if key in s:
            profiles[f"profile_{key}"] = _profile(s[key])

    fields = dict(
        max_trials=s.get("trials", cfg.max_trials),
        min_errors=s.get("min_errors", cfg.min_errors),
        seed=s.get("seed", cfg.seed),
        workers=s.get("workers", cfg.workers),
        batch_size=s.get("batch_size", cfg.batch_size),
        n_p=s.get("np", cfg.n_p),
        delay_model=s.get("delay_model", cfg.delay_model),
        out=s.get("out", cfg.out),
    )
    return replace(cfg, params=params, eb_n0_db=grid, **profiles, **fields)


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--preset", choices=harness.PRESETS, help="start from a reference configuration")
    common.add_argument("--config", help="flat key = value settings file")
    common.add_argument("--system", choices=("cim", "sr"), help="system to simulate (sweep/theory)")
    common.add_argument("--p1", type=int, help="reference replicas")
    common.add_argument("--p2", type=int, help="information replicas (power of two)")
    common.add_argument("--chip-len", type=int, help="chips per replica L")
    common.add_argument("--beta", type=int, help="spreading factor; sets L = beta / (p1 + p2)")
    common.add_argument("--sr-p", type=int, help="benchmark information replicas P")
    common.add_argument("--sr-beta", type=int, help="benchmark spreading factor (default 297)")
    common.add_argument("--zeta", type=float, help="tag reflecting coefficient (amplitude)")
    common.add_argument("--snr-start", type=float)
    common.add_argument("--snr-stop", type=float)
    common.add_argument("--snr-step", type=float)
    common.add_argument("--trials", type=int, help="symbol cap per Eb/N0 point")
    common.add_argument("--min-errors", type=int, help="stop once every link has this many errors (0: run --trials)")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int, help="worker processes (results do not depend on it)")
    common.add_argument("--batch-size", type=int)
    common.add_argument("--channel", choices=("paper", "awgn"), help="reference multipath profiles or ideal links")
    common.add_argument("--h", help="direct channel as power@delay,... or 'none'")
    common.add_argument("--f", help="transmitter-to-tag channel")
    common.add_argument("--g", help="tag-to-receiver channel")
    common.add_argument("--delay-model", choices=harness.DELAY_MODELS)
    common.add_argument("--out", help="CSV output path")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="cimdcsk", description="CIM-DCSK ambient backscatter BER simulator")
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("sweep", parents=[common], help="simulated and theoretical BER over an Eb/N0 grid")
    sub.add_parser("theory", parents=[common], help="theoretical BER only")
    sub.add_parser("compare", parents=[common], help="CIM against the SR benchmark")
    p = sub.add_parser("throughput", parents=[common], help="backscatter throughput of both systems")
    p.add_argument("--np", type=int, dest="np", help="packet length in bits")
    p = sub.add_parser("zeta", parents=[common], help="backscatter BER for several reflecting coefficients")
    p.add_argument("--zetas", type=float, nargs="+", default=list(harness.FIG7_ZETAS))
    return parser


def resolve(args: argparse.Namespace) -> dict:
    settings = {}
    if args.preset:
        settings["preset"] = args.preset
    if args.config:
        settings.update(read_config(args.config))
    for key in CONFIG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            settings[key] = value
    return settings


def _emit(rows, fields, stream):
    writer = csv.DictWriter(stream, fieldnames=fields, lineterminator="\n")
    writer.writeheader()
    for row in rows:
        writer.writerow(row if isinstance(row, dict) else row.row())


def run(args: argparse.Namespace, stream=None) -> None:
    stream = stream or sys.stdout
    settings = resolve(args)
    config = build_config(settings)
    cmd = args.command
    if cmd == "sweep":
        _emit(harness.run_sweep(config), harness.CSV_FIELDS, stream)
    elif cmd == "theory":
        _emit(harness.run_theory(config), harness.CSV_FIELDS, stream)
    elif cmd == "zeta":
        _emit(harness.run_zeta_sweep(config, args.zetas), harness.CSV_FIELDS, stream)
    elif cmd in ("compare", "throughput"):
        cim = build_config({**settings, "system": "cim"})
        sr = harness.sr_counterpart(cim, settings.get("sr_beta", 297), settings.get("sr_p", 8))
        if cmd == "throughput":
            _emit(harness.run_throughput(cim, config_sr=sr), harness.THROUGHPUT_FIELDS, stream)
            return
        res = harness.run_comparison(cim, sr)
        _emit(res.records, harness.CSV_FIELDS, stream)
        bound = "" if res.direct_gain_exact else " (lower bound: a curve stops above the target)"
        print(f"# direct-link gain at BER 1e-4: {res.direct_gain_db:.2f} dB{bound}", file=stream)
        print(f"# theoretical direct-link gain: {res.theory_direct_gain_db:.2f} dB", file=stream)
        print(f"# backscatter gap at BER 1e-3: {res.backscatter_gap_db:.2f} dB", file=stream)


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        run(args)
    except InvalidParameterError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INVALID
    except NumericalFailureError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    return 0


if __name__ == "__main__":
    sys.exit(main())
