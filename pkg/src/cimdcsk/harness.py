"""Monte-Carlo BER experiments, reference presets and CSV output.

Symbols are simulated in fixed-size batches. Batch ``i`` of the point at
``Eb/N0 = e`` draws everything from its own generator seeded by
``(seed, e, i)``, and batches are always reduced in index order, so error
counts do not depend on how many worker processes ran them.
"""

from __future__ import annotations

import csv
import logging
import math
import time
from concurrent.futures import Executor, ProcessPoolExecutor
from contextlib import contextmanager
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import theory, walsh
from .channel import ChannelProfile, apply, apply_cyclic, draw
from .chaos import chebyshev_block
from .errors import InvalidParameterError
from .modem import (
    SrParams,
    SystemParams,
    apply_replica_pattern,
    backscatter_statistics,
    decide_direct,
    direct_replica_signs,
    direct_statistics,
    spread,
    sr_replica_signs,
    sr_statistics,
    sr_tag_pattern,
    tag_pattern,
)

log = logging.getLogger(__name__)

LINKS = ("direct", "backscatter")
DELAY_MODELS = ("replica", "linear")
CSV_FIELDS = ("eb_n0_db", "link", "system", "sim_ber", "theory_ber", "errors", "trials", "zeta")
THROUGHPUT_FIELDS = ("eb_n0_db", "system", "sim_ber", "theory_ber", "sim_throughput", "theory_throughput", "n_p")

# Multipath profiles of the reference experiments: h and f have two equal taps
# at chip delays 0 and 3, g has three equal taps at 0, 1, 2; the path losses
# 0.7 (f) and 0.6 (g) are folded into the tap powers.
PAPER_H = ChannelProfile.equal_gain((0, 3), 1.0)
PAPER_F = ChannelProfile.equal_gain((0, 3), 0.7)
PAPER_G = ChannelProfile.equal_gain((0, 1, 2), 0.6)


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything that determines a simulation run.

    A channel profile of ``None`` means an ideal unit-gain link (AWGN only).
    ``min_errors = 0`` disables adaptive stopping and runs exactly
    ``max_trials`` symbols per point. ``delay_model`` selects per-replica
    cyclic delays (``"replica"``) or a linear delay line over the whole
    symbol (``"linear"``); see :mod:`cimdcsk.channel`.
    """

    params: SystemParams | SrParams
    eb_n0_db: tuple[float, ...]
    profile_h: ChannelProfile | None = None
    profile_f: ChannelProfile | None = None
    profile_g: ChannelProfile | None = None
    max_trials: int = 10**8
    min_errors: int = 100
    seed: int = 1
    n_p: int = 12
    batch_size: int = 4096
    workers: int = 1
    stop_links: tuple[str, ...] = LINKS
    normalize_energy: bool = False
    delay_model: str = "replica"
    out: str | None = None

    def __post_init__(self):
        grid = tuple(float(v) for v in self.eb_n0_db)
        object.__setattr__(self, "eb_n0_db", grid)
        if not grid:
            raise InvalidParameterError("Eb/N0 grid is empty")
        if any(math.isnan(v) or v == -math.inf for v in grid):
            raise InvalidParameterError(f"Eb/N0 grid must be finite or +inf: {grid}")
        if any(b <= a for a, b in zip(grid, grid[1:])):
            raise InvalidParameterError(f"Eb/N0 grid must be strictly increasing: {grid}")
        if self.max_trials < 1:
            raise InvalidParameterError(f"max_trials must be >= 1, got {self.max_trials}")
        if self.min_errors != 0 and self.min_errors < 100:
            raise InvalidParameterError(f"adaptive stopping needs min_errors >= 100, got {self.min_errors}")
        if self.batch_size < 1 or self.workers < 1:
            raise InvalidParameterError("batch_size and workers must be >= 1")
        if self.n_p < 1:
            raise InvalidParameterError(f"n_p must be >= 1, got {self.n_p}")
        if not set(self.stop_links) <= set(LINKS) or not self.stop_links:
            raise InvalidParameterError(f"stop_links must be a non-empty subset of {LINKS}")
        if self.delay_model not in DELAY_MODELS:
            raise InvalidParameterError(f"delay_model must be one of {DELAY_MODELS}, got {self.delay_model!r}")
        if not isinstance(self.params, (SystemParams, SrParams)):
            raise InvalidParameterError(f"unsupported params {self.params!r}")

    @property
    def system(self) -> str:
        return "SR" if isinstance(self.params, SrParams) else "CIM"

    @property
    def fading(self) -> bool:
        return any(p is not None for p in (self.profile_h, self.profile_f, self.profile_g))

    def bits_per_symbol(self, link: str) -> int:
        return self.params.direct_bits if link == "direct" else self.params.blocks


@dataclass
class BerRecord:
    eb_n0_db: float
    link: str
    system: str
    sim_ber: float
    theory_ber: float
    trials: int
    error_count: int
    zeta: float
    wall_seconds: float = field(default=0.0, compare=False)

    def row(self) -> dict:
        return {
            "eb_n0_db": f"{self.eb_n0_db:g}",
            "link": self.link,
            "system": self.system,
            "sim_ber": "" if math.isnan(self.sim_ber) else f"{self.sim_ber:.10g}",
            "theory_ber": f"{self.theory_ber:.10g}",
            "errors": str(self.error_count),
            "trials": str(self.trials),
            "zeta": f"{self.zeta:g}",
        }


# -- simulation ----------------------------------------------------------------


def batch_rng(seed: int, eb_n0_db: float, batch: int) -> np.random.Generator:
    point = 2**32 if math.isinf(eb_n0_db) else int(round(eb_n0_db * 1000)) + 2**31
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(point, batch)))


def _propagate(signal, profile, rng, n, period):
    if profile is None:
        return signal
    real = draw(profile, rng, size=n)
    return apply(signal, real) if period is None else apply_cyclic(signal, real, period)


def _chaos(rng, n, length, normalize):
    x = chebyshev_block(rng, n, length)
    if normalize:
        x /= np.sqrt(np.mean(x * x, axis=1, keepdims=True))
    return x


def simulate_batch(config: ExperimentConfig, eb_n0_db: float, batch: int, n: int) -> tuple[int, int]:
    """Simulate ``n`` symbols and return (direct bit errors, backscatter bit errors)."""
    rng = batch_rng(config.seed, eb_n0_db, batch)
    p = config.params
    gamma_s = theory.SnrPoint.for_system(p, eb_n0_db).gamma_s
    sigma = math.sqrt(p.beta / gamma_s / 2.0)  # 0 when Eb/N0 is infinite

    if isinstance(p, SrParams):
        x = _chaos(rng, n, p.R, config.normalize_energy)
        mod = rng.integers(0, 2, n)
        bs = rng.integers(0, 2, n)
        tx = spread(sr_replica_signs(mod, p.P), x)
        pattern = sr_tag_pattern(bs, p.zeta, p.P)
    else:
        book = walsh.build(p.P2)
        x = _chaos(rng, n, p.L, config.normalize_energy)
        mod = rng.integers(0, 2, n)
        pos = rng.integers(0, p.M, n)
        bs = rng.integers(0, 2, (n, p.blocks))
        tx = spread(direct_replica_signs(mod, pos, p, book), x)
        pattern = tag_pattern(bs, p.zeta)

    period = x.shape[-1] if config.delay_model == "replica" else None
    direct = _propagate(tx, config.profile_h, rng, n, period)
    incident = _propagate(tx, config.profile_f, rng, n, period)
    reflected = _propagate(apply_replica_pattern(incident, pattern), config.profile_g, rng, n, period)
    r = direct + reflected + sigma * rng.standard_normal(tx.shape)

    if isinstance(p, SrParams):
        z, d = sr_statistics(r, p.R, p.P)
        return int(np.sum((z >= 0) != mod)), int(np.sum((d >= 0) != bs))

    pos_hat, mod_hat = decide_direct(direct_statistics(r, p, book))
    index_errors = np.sum(walsh.position_bits(pos_hat, p.m_c) != walsh.position_bits(pos, p.m_c))
    direct_errors = int(np.sum(mod_hat != mod) + index_errors)
    bc_errors = int(np.sum((backscatter_statistics(r, p) >= 0) != bs))
    return direct_errors, bc_errors


def _batch_sizes(config: ExperimentConfig):
    done, i = 0, 0
    while done < config.max_trials:
        n = min(config.batch_size, config.max_trials - done)
        yield i, n
        done += n
        i += 1


def _run_batches(config: ExperimentConfig, eb_n0_db: float, executor: Executor | None):
    """Accumulate (symbols, direct errors, backscatter errors) until the stop rule fires."""
    sizes = _batch_sizes(config)
    wave = config.workers * 2 if executor is not None else 1
    trials = 0
    errors = {"direct": 0, "backscatter": 0}
    while True:
        chunk = [b for _, b in zip(range(wave), sizes)]
        if not chunk:
            break
        if executor is None:
            results = [simulate_batch(config, eb_n0_db, i, n) for i, n in chunk]
        else:
            futures = [executor.submit(simulate_batch, config, eb_n0_db, i, n) for i, n in chunk]
            results = [f.result() for f in futures]
        for (_, n), (e_dir, e_bc) in zip(chunk, results):
            trials += n
            errors["direct"] += e_dir
            errors["backscatter"] += e_bc
            if config.min_errors and all(errors[k] >= config.min_errors for k in config.stop_links):
                return trials, errors
    return trials, errors


def theory_ber(config: ExperimentConfig, eb_n0_db: float) -> tuple[float, float]:
    """Analytical (direct, backscatter) BER for the configuration's channels."""
    if math.isinf(eb_n0_db):
        return 0.0, 0.0
    p = config.params
    gamma_s = theory.SnrPoint.for_system(p, eb_n0_db).gamma_s
    if isinstance(p, SrParams):
        cond_dir = lambda g: float(theory.sr_p_direct(p, g))  # noqa: E731
        cond_bc = lambda g: float(theory.sr_p_bc(p, g))  # noqa: E731
    else:
        cond_dir = lambda g: theory.p_edir(p, g)  # noqa: E731
        cond_bc = lambda g: float(theory.p_ebc(p, g))  # noqa: E731

    if config.profile_h is None:
        direct = cond_dir(gamma_s)
    else:
        direct = theory.fading_gain_average(cond_dir, gamma_s, config.profile_h)

    g_bc = gamma_s * p.zeta**2
    f, g = config.profile_f, config.profile_g
    if f is not None and g is not None:
        back = theory.cascade_gain_average(cond_bc, g_bc, f, g)
    elif f is not None or g is not None:
        back = theory.fading_gain_average(cond_bc, g_bc, f if f is not None else g)
    else:
        back = cond_bc(g_bc)
    return float(direct), float(back)


@contextmanager
def _executor(config: ExperimentConfig):
    if config.workers <= 1:
        yield None
        return
    with ProcessPoolExecutor(max_workers=config.workers) as pool:
        yield pool


def run_ber_point(config: ExperimentConfig, eb_n0_db: float, executor: Executor | None = None) -> tuple[BerRecord, BerRecord]:
    """Simulate one Eb/N0 point and pair the counts with theory."""
    start = time.perf_counter()
    if executor is None and config.workers > 1:
        with _executor(config) as pool:
            trials, errors = _run_batches(config, eb_n0_db, pool)
    else:
        trials, errors = _run_batches(config, eb_n0_db, executor)
    th = dict(zip(LINKS, theory_ber(config, eb_n0_db)))
    elapsed = time.perf_counter() - start
    records = []
    for link in LINKS:
        bits = trials * config.bits_per_symbol(link)
        records.append(
            BerRecord(eb_n0_db, link, config.system, errors[link] / bits, th[link], trials, errors[link], config.params.zeta, elapsed)
        )
    log.info(
        "%s Eb/N0=%g dB: %d symbols, direct %d err (%.3g), backscatter %d err (%.3g), %.1fs",
        config.system, eb_n0_db, trials, errors["direct"], records[0].sim_ber,
        errors["backscatter"], records[1].sim_ber, elapsed,
    )
    return records[0], records[1]


def write_csv(path, rows, fields=CSV_FIELDS) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=fields, lineterminator="\n")
            writer.writeheader()
            for row in rows:
                writer.writerow(row if isinstance(row, dict) else row.row())
    except OSError as exc:
        raise OSError(f"cannot write CSV to {path}: {exc}") from exc
    return path


def run_sweep(config: ExperimentConfig, links: tuple[str, ...] = LINKS) -> list[BerRecord]:
    records = []
    with _executor(config) as pool:
        for e in config.eb_n0_db:
            records.extend(r for r in run_ber_point(config, e, pool) if r.link in links)
    if config.out:
        write_csv(config.out, records)
    return records


def run_theory(config: ExperimentConfig) -> list[BerRecord]:
    """Theory-only curves in the sweep CSV layout (empty sim column)."""
    records = []
    for e in config.eb_n0_db:
        for link, value in zip(LINKS, theory_ber(config, e)):
            records.append(BerRecord(e, link, config.system, math.nan, value, 0, 0, config.params.zeta))
    if config.out:
        write_csv(config.out, records)
    return records


# -- comparison, throughput, reflection sweep -----------------------------------


def crossing_db(eb_n0_db, ber, target: float) -> tuple[float, bool]:
    """Eb/N0 where a BER curve falls to ``target``, interpolated in (dB, log10 BER).

    Points with zero errors are skipped. If the curve never reaches the target
    the last usable grid point is returned with ``reached=False``; it is then a
    lower bound on the crossing.
    """
    pts = [(float(e), float(b)) for e, b in zip(eb_n0_db, ber) if b > 0 and math.isfinite(b)]
    if not pts:
        raise InvalidParameterError("BER curve has no non-zero points")
    for (e0, b0), (e1, b1) in zip(pts, pts[1:]):
        if b0 >= target >= b1 and b0 != b1:
            t = (math.log10(b0) - math.log10(target)) / (math.log10(b0) - math.log10(b1))
            return e0 + t * (e1 - e0), True
    if pts[0][1] <= target:
        return pts[0][0], True
    return pts[-1][0], False


@dataclass
class ComparisonResult:
    records: list[BerRecord]
    direct_gain_db: float
    direct_gain_exact: bool
    backscatter_gap_db: float
    backscatter_gap_exact: bool
    theory_direct_gain_db: float


def _curve(records, system, link, attr="sim_ber"):
    rows = [r for r in records if r.system == system and r.link == link]
    return [r.eb_n0_db for r in rows], [getattr(r, attr) for r in rows]


def run_comparison(
    config_cim: ExperimentConfig, config_sr: ExperimentConfig, direct_target: float = 1e-4, bc_target: float = 1e-3
) -> ComparisonResult:
    """Sweep both systems and measure the direct-link gain and backscatter gap.

    The gain is ``Eb/N0(SR) - Eb/N0(CIM)`` at ``direct_target``; if a curve
    stops short of the target the figure is a bound and ``direct_gain_exact``
    is False.
    """
    if config_cim.system != "CIM" or config_sr.system != "SR":
        raise InvalidParameterError("run_comparison takes a CIM config and an SR config")
    records = run_sweep(replace(config_cim, out=None)) + run_sweep(replace(config_sr, out=None))

    def gap(link, target, attr="sim_ber"):
        c, c_ok = crossing_db(*_curve(records, "CIM", link, attr), target)
        s, s_ok = crossing_db(*_curve(records, "SR", link, attr), target)
        return s - c, c_ok and s_ok

    gain, gain_ok = gap("direct", direct_target)
    bc_gap, bc_ok = gap("backscatter", bc_target)
    th_gain, _ = gap("direct", direct_target, "theory_ber")
    out = config_cim.out or config_sr.out
    if out:
        write_csv(out, records)
    return ComparisonResult(records, gain, gain_ok, bc_gap, bc_ok, th_gain)


@dataclass
class ThroughputRow:
    eb_n0_db: float
    system: str
    sim_ber: float
    theory_ber: float
    sim_throughput: float
    theory_throughput: float
    n_p: int

    def row(self) -> dict:
        return {
            "eb_n0_db": f"{self.eb_n0_db:g}",
            "system": self.system,
            "sim_ber": f"{self.sim_ber:.10g}",
            "theory_ber": f"{self.theory_ber:.10g}",
            "sim_throughput": f"{self.sim_throughput:.10g}",
            "theory_throughput": f"{self.theory_throughput:.10g}",
            "n_p": str(self.n_p),
        }


def sr_counterpart(config: ExperimentConfig, beta: int = 297, P: int = 8) -> ExperimentConfig:
    """The benchmark configuration run against a CIM configuration."""
    return replace(config, params=SrParams(beta, P, config.params.zeta), out=None)


def run_throughput(config: ExperimentConfig, n_p: int | None = None, config_sr: ExperimentConfig | None = None) -> list[ThroughputRow]:
    """Backscatter throughput of CIM and the SR benchmark from simulated BER."""
    if config.system != "CIM":
        raise InvalidParameterError("run_throughput takes the CIM configuration")
    n_p = n_p or config.n_p
    config_sr = config_sr or sr_counterpart(config)
    n_bc = config.params.blocks
    rows = []
    for cfg in (config, config_sr):
        cfg = replace(cfg, stop_links=("backscatter",), out=None)
        for rec in run_sweep(cfg, links=("backscatter",)):
            rows.append(
                ThroughputRow(
                    rec.eb_n0_db, rec.system, rec.sim_ber, rec.theory_ber,
                    theory.throughput(rec.sim_ber, n_p, n_bc, rec.system),
                    theory.throughput(rec.theory_ber, n_p, n_bc, rec.system), n_p,
                )
            )
    if config.out:
        write_csv(config.out, rows, THROUGHPUT_FIELDS)
    return rows


def run_zeta_sweep(config: ExperimentConfig, zetas) -> list[BerRecord]:
    """Backscatter BER curve for each reflecting coefficient.

    Every curve reuses the same per-batch random streams, so the curves differ
    only through the reflection amplitude.
    """
    records = []
    for z in zetas:
        if not 0.0 < z <= 1.0:
            raise InvalidParameterError(f"zeta must lie in (0, 1], got {z}")
        cfg = replace(config, params=replace(config.params, zeta=float(z)), stop_links=("backscatter",), out=None)
        records.extend(run_sweep(cfg, links=("backscatter",)))
    if config.out:
        write_csv(config.out, records)
    return records


# -- presets -------------------------------------------------------------------


def preset(name: str, **overrides) -> ExperimentConfig:
    """Named reference configurations; keyword overrides replace fields."""
    fading = dict(profile_h=PAPER_H, profile_f=PAPER_F, profile_g=PAPER_G)
    grid = tuple(range(0, 32, 2))
    base = {
        "fig4": dict(params=SystemParams(4, 8, 25), eb_n0_db=grid, **fading),
        "fig5": dict(params=SystemParams(4, 8, 25), eb_n0_db=grid, **fading),
        "fig6": dict(params=SystemParams(4, 8, 25), eb_n0_db=grid, n_p=12, **fading),
        "fig7": dict(params=SystemParams(4, 8, 25), eb_n0_db=grid, **fading),
        "compare": dict(params=SystemParams(4, 8, 25), eb_n0_db=tuple(range(0, 36, 2)), **fading),
        "awgn": dict(params=SystemParams(4, 8, 25), eb_n0_db=tuple(range(0, 22, 2))),
    }
    if name not in base:
        raise InvalidParameterError(f"unknown preset {name!r}; choose from {sorted(base)}")
    return ExperimentConfig(**{**base[name], **overrides})


PRESETS = ("fig4", "fig5", "fig6", "fig7", "compare", "awgn")
FIG7_ZETAS = (1.0, 0.75, 0.5)
