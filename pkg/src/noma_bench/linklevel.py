"""Monte-Carlo BLER harness and the MCS/sum-SE table builder.

Drops are independent work items keyed by (seed, drop index): every
random draw inside a drop comes from streams derived from that key, so
results are bit-identical for any worker count.  The harness stops at
batch boundaries, accumulating batches strictly in index order; workers
that ran past the stopping batch are simply discarded.
"""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, replace

import numpy as np

from . import idma, musa, oma, scma
from .channel import ChannelModel, draw_channel
from .core import (STREAM_BITS, STREAM_CHANNEL, STREAM_NOISE, coded_bits_for,
                   STREAM_SIGNATURE, Modulation, SchemeConfig, SchemeKind,
                   crc_attach, crc_check, drop_stream, grid_dimensions,
                   rng_stream)
from .fec import fec_decode_siso, fec_encode, rate_match_plan
from .modem import constellation, modulate

__all__ = ["BlerPoint", "BlerCurve", "McsEntry", "McsTable", "run_bler",
           "build_mcs_table", "write_bler_csv", "write_mcs_csv",
           "resolve_threads"]

BATCH_DROPS = 16

OF_SET_DEFAULT = (1.5, 2.0, 3.0)
CR_SET_DEFAULT = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9)


@dataclass(frozen=True)
class BlerPoint:
    snr_db: float
    bler: float
    errors: int
    blocks: int


@dataclass(frozen=True)
class BlerCurve:
    config: SchemeConfig
    points: tuple[BlerPoint, ...]

    def bler_at(self, snr_db: float) -> float:
        for p in self.points:
            if p.snr_db == snr_db:
                return p.bler
        raise KeyError(snr_db)


@dataclass(frozen=True)
class McsEntry:
    snr_db: float
    overloading: float     # 0 when no candidate is feasible
    code_rate: float
    sum_se: float


@dataclass(frozen=True)
class McsTable:
    scheme: SchemeKind
    entries: tuple[McsEntry, ...]

    def entry_at(self, snr_db: float) -> McsEntry:
        return min(self.entries, key=lambda e: abs(e.snr_db - snr_db))


def resolve_threads(threads: int | None) -> int:
    if threads is None:
        threads = int(os.environ.get("NOMA_BENCH_THREADS", "0") or "0")
    if threads <= 0:
        threads = os.cpu_count() or 1
    return max(1, threads)


# ---------------------------------------------------------------------------
# signature caches (per process; rebuilt lazily in workers after fork/spawn)

_CODEBOOKS: dict[tuple, scma.ScmaCodebook] = {}
_POOLS: dict[tuple, np.ndarray] = {}
_INTERLEAVERS: dict[tuple, idma.InterleaverSet] = {}


def _codebook(config: SchemeConfig) -> scma.ScmaCodebook:
    key = (config.spreading_factor, config.num_users, config.seed)
    if key not in _CODEBOOKS:
        _CODEBOOKS[key] = scma.build_codebook(
            config.spreading_factor, config.num_users, seed=config.seed)
    return _CODEBOOKS[key]


def _sequences(config: SchemeConfig) -> np.ndarray:
    key = (config.spreading_factor, config.num_users, config.seed)
    if key not in _POOLS:
        stream = rng_stream(config.seed, STREAM_SIGNATURE)
        _POOLS[key] = musa.gen_sequences(
            config.spreading_factor, config.num_users, stream).sequences
    return _POOLS[key]


def _interleaver_set(config: SchemeConfig, rail_len: int) -> idma.InterleaverSet:
    key = (config.num_users, rail_len, config.seed)
    if key not in _INTERLEAVERS:
        _INTERLEAVERS[key] = idma.make_interleavers(
            config.seed, config.num_users, rail_len)
    return _INTERLEAVERS[key]


def run_link(config: SchemeConfig, payloads: list[np.ndarray],
             channels: np.ndarray, noise_var: float,
             noise_rng: np.random.Generator) -> list[bool]:
    """One transmission of K CRC-framed blocks: returns per-user CRC pass.

    ``channels`` is the shared (T, K) per-unit gain tensor; noise draws
    are unit-variance and scaled by sqrt(noise_var/2) per rail so a fixed
    stream yields coupled realizations across SNR points.
    """
    k_users = config.num_users
    n_re, t_units = grid_dimensions(config)
    payload_bits = config.payload_bits
    # effective rate lands the coded length exactly on the grid's symbol
    # budget (= nominal rate whenever ceil(k/rate) is already even)
    cr = payload_bits / coded_bits_for(payload_bits, config.code_rate,
                                       config.modulation.bits_per_symbol)

    if config.scheme is SchemeKind.SCMA:
        cb = _codebook(config)
        coded = np.stack([fec_encode(p, cr) for p in payloads])
        grid = scma.scma_encode(coded, cb, channels)
    elif config.scheme is SchemeKind.MUSA:
        seqs = _sequences(config)
        const = constellation(Modulation.QPSK)
        grid = np.zeros((n_re, t_units), dtype=complex)
        for u in range(k_users):
            syms = modulate(fec_encode(payloads[u], cr), const)
            grid += seqs[u][:, None] * (channels[:, u] * syms)[None, :]
    elif config.scheme is SchemeKind.IDMA:
        rail_len = rate_match_plan(payload_bits, cr).n_sent * config.spreading_factor
        ils = _interleaver_set(config, rail_len)
        grid = np.zeros((n_re, t_units), dtype=complex)
        for u in range(k_users):
            chips = idma.idma_encode(payloads[u], cr, config.spreading_factor,
                                     ils.perms[u]).reshape(n_re, t_units, order="F")
            grid += np.repeat(channels[:, u][None, :], n_re, axis=0) * chips
    elif config.scheme is SchemeKind.OMA:
        grid = oma.oma_transmit(payloads, config, channels)
    else:  # pragma: no cover - SchemeKind is total
        raise AssertionError(config.scheme)

    re_n = noise_rng.standard_normal(grid.shape)
    im_n = noise_rng.standard_normal(grid.shape)
    noisy = grid + (re_n + 1j * im_n) * np.sqrt(noise_var / 2.0)

    if config.scheme is SchemeKind.SCMA:
        llrs = scma.mpa_detect(noisy, channels, _codebook(config), noise_var,
                               config.mpa_iterations)
        out = []
        for u in range(k_users):
            decoded, _, _ = fec_decode_siso(llrs[u], None, cr, payload_bits)
            out.append(bool(crc_check(decoded)))
        return out
    if config.scheme is SchemeKind.MUSA:
        results = musa.mmse_sic_detect(noisy, _sequences(config), channels,
                                       noise_var, cr, payload_bits)
        return [r.crc_pass for r in results]
    if config.scheme is SchemeKind.IDMA:
        rail_len = rate_match_plan(payload_bits, cr).n_sent * config.spreading_factor
        results = idma.ese_pic_detect(noisy, channels, noise_var,
                                      config.esepic_iterations, cr,
                                      _interleaver_set(config, rail_len),
                                      payload_bits, config.spreading_factor)
        return [r.crc_pass for r in results]
    return [passed for passed, _ in oma.oma_detect(noisy, config, channels,
                                                   noise_var)]


def simulate_drop(config: SchemeConfig, snr_db: float, drop_index: int,
                  channel_model: ChannelModel) -> tuple[int, int]:
    """One drop: K transport blocks through the configured scheme.

    Returns (block errors, blocks).  Payload bits, channel tensor and
    noise come from purpose-split streams of (seed, drop_index), so all
    schemes and SNR points see common draws.
    """
    k_users = config.num_users
    n_re, t_units = grid_dimensions(config)
    bits_rng = drop_stream(config.seed, drop_index, STREAM_BITS)
    chan_rng = drop_stream(config.seed, drop_index, STREAM_CHANNEL)
    noise_rng = drop_stream(config.seed, drop_index, STREAM_NOISE)

    payloads = [crc_attach(bits_rng.integers(0, 2, config.info_block_bits)
                           .astype(np.uint8)).bits for _ in range(k_users)]
    channels = draw_channel(channel_model, k_users, n_re, t_units, chan_rng)
    sigma2 = 10.0 ** (-snr_db / 10.0)
    passes = run_link(config, payloads, channels, sigma2, noise_rng)
    return sum(not p for p in passes), k_users


def _drop_batch(config: SchemeConfig, snr_db: float, start: int, count: int,
                channel_model: ChannelModel) -> tuple[int, int]:
    errors = blocks = 0
    for drop in range(start, start + count):
        e, b = simulate_drop(config, snr_db, drop, channel_model)
        errors += e
        blocks += b
    return errors, blocks


def _wilson_lower(errors: int, blocks: int, z: float = 2.576) -> float:
    if blocks == 0:
        return 0.0
    p = errors / blocks
    z2 = z * z
    denom = 1 + z2 / blocks
    centre = p + z2 / (2 * blocks)
    rad = z * np.sqrt(p * (1 - p) / blocks + z2 / (4 * blocks ** 2))
    return (centre - rad) / denom


class _BatchRunner:
    """Runs drop batches for one SNR point with a deterministic stop rule.

    Batches accumulate strictly in index order; the stop decision after
    batch i uses only batches 0..i, so any worker count gives identical
    counts.
    """

    def __init__(self, pool: ProcessPoolExecutor | None, threads: int):
        self.pool = pool
        self.threads = threads

    def run(self, config: SchemeConfig, snr_db: float,
            channel_model: ChannelModel, max_blocks: int, min_errors: int,
            stop_above: float | None = None) -> tuple[int, int]:
        per_batch = BATCH_DROPS * config.num_users
        n_batches = -(-max_blocks // per_batch)
        errors = blocks = 0
        next_submit = 0
        pending: dict[int, object] = {}

        def want_more() -> bool:
            if errors >= min_errors or blocks >= max_blocks:
                return False
            if stop_above is not None and blocks >= 4 * per_batch and \
                    _wilson_lower(errors, blocks) > stop_above:
                return False
            return True

        batch = 0
        while batch < n_batches and want_more():
            if self.pool is None:
                e, b = _drop_batch(config, snr_db, batch * BATCH_DROPS,
                                   BATCH_DROPS, channel_model)
                errors += e
                blocks += b
                batch += 1
                continue
            while next_submit < min(batch + self.threads, n_batches):
                pending[next_submit] = self.pool.submit(
                    _drop_batch, config, snr_db, next_submit * BATCH_DROPS,
                    BATCH_DROPS, channel_model)
                next_submit += 1
            e, b = pending.pop(batch).result()
            errors += e
            blocks += b
            batch += 1
        for fut in pending.values():
            fut.cancel()
        pending.clear()
        return errors, blocks


def run_bler(config: SchemeConfig, snr_list: list[float],
             max_blocks: int = 20000, min_errors: int = 100,
             channel_model: ChannelModel = ChannelModel.RAYLEIGH_BLOCK,
             threads: int | None = None) -> BlerCurve:
    """BLER per SNR: simulate drops until min_errors or max_blocks."""
    if max_blocks < 1 or min_errors < 1:
        raise ValueError("max_blocks and min_errors must be positive")
    threads = resolve_threads(threads)
    points = []
    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    try:
        runner = _BatchRunner(pool, threads)
        for snr in snr_list:
            errors, blocks = runner.run(config, snr, channel_model,
                                        max_blocks, min_errors)
            points.append(BlerPoint(float(snr), errors / blocks, errors, blocks))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return BlerCurve(config, tuple(points))


def _config_for(scheme: SchemeKind, of: float, cr: float,
                base: SchemeConfig) -> SchemeConfig:
    k = round(of * base.spreading_factor)
    return replace(base, scheme=scheme, num_users=k, code_rate=cr)


def build_mcs_table(scheme: SchemeKind, snr_grid: list[float],
                    of_set: tuple[float, ...] = OF_SET_DEFAULT,
                    cr_set: tuple[float, ...] = CR_SET_DEFAULT,
                    target_bler: float = 0.1,
                    base: SchemeConfig | None = None,
                    channel_model: ChannelModel = ChannelModel.RAYLEIGH_BLOCK,
                    max_blocks: int = 20000, min_errors: int = 100,
                    threads: int | None = None) -> McsTable:
    """Best (overloading, code rate) per SNR under the BLER target.

    Per SNR the candidates are tried in descending nominal spectral
    efficiency; a candidate whose nominal SE cannot beat the best actual
    SE so far is skipped, and BLER-vs-SNR monotonicity prunes cells known
    infeasible at a higher SNR (or feasible at a lower one).  Ties break
    toward the lower overloading factor, then the lower code rate.
    """
    if base is None:
        base = SchemeConfig(scheme=scheme, num_users=6, code_rate=0.2)
    threads = resolve_threads(threads)
    cands = sorted(((of, cr) for of in of_set for cr in cr_set),
                   key=lambda c: (-c[0] * 2 * c[1], c[0], c[1]))
    infeasible_below: dict[tuple, float] = {}
    bler_cache: dict[tuple, tuple[int, int]] = {}

    pool = ProcessPoolExecutor(threads) if threads > 1 else None
    entries = []
    try:
        runner = _BatchRunner(pool, threads)
        for snr in snr_grid:
            best: tuple[float, float, float] | None = None
            for of, cr in cands:
                nominal = of * 2 * cr
                if best is not None and nominal <= best[0]:
                    break
                if snr <= infeasible_below.get((of, cr), -np.inf):
                    continue
                key = (of, cr, snr)
                if key not in bler_cache:
                    cfg = _config_for(scheme, of, cr, base)
                    bler_cache[key] = runner.run(cfg, snr, channel_model,
                                                 max_blocks, min_errors,
                                                 stop_above=target_bler)
                errors, blocks = bler_cache[key]
                bler = errors / blocks
                if bler > target_bler:
                    infeasible_below[(of, cr)] = max(
                        infeasible_below.get((of, cr), -np.inf), snr)
                    continue
                se = nominal * (1 - bler)
                if best is None or se > best[0] + 1e-12:
                    best = (se, of, cr)
            if best is None:
                entries.append(McsEntry(float(snr), 0.0, 0.0, 0.0))
            else:
                entries.append(McsEntry(float(snr), best[1], best[2], best[0]))
    finally:
        if pool is not None:
            pool.shutdown(cancel_futures=True)
    return McsTable(scheme, tuple(entries))


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def write_bler_csv(path: str, curves: list[BlerCurve],
                   provenance: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scheme,of,cr,snr_db,bler,blocks,errors\n")
        for curve in curves:
            cfg = curve.config
            for p in curve.points:
                fh.write(",".join([
                    cfg.scheme.value, _fmt(cfg.overloading),
                    _fmt(cfg.code_rate), _fmt(p.snr_db), _fmt(p.bler),
                    str(p.blocks), str(p.errors)]) + "\n")
        if provenance:
            fh.write(f"# {provenance}\n")


def write_mcs_csv(path: str, tables: list[McsTable],
                  provenance: str | None = None) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scheme,snr_db,of,cr,sum_se\n")
        for table in tables:
            for e in table.entries:
                fh.write(",".join([
                    table.scheme.value, _fmt(e.snr_db), _fmt(e.overloading),
                    _fmt(e.code_rate), _fmt(e.sum_se)]) + "\n")
        if provenance:
            fh.write(f"# {provenance}\n")
