"""Batch command-line surface: configs in, CSV artifacts out.

Subcommands map one-to-one onto the simulation campaigns: ``bler``
(error-rate curves), ``mcs`` (best overloading/rate tables with sum
spectral efficiency), ``syslevel`` (full-buffer throughput CDFs) and
``packets`` (small-packet sum-rate sweep).  Config files are INI-style
key=value text with one section per command plus ``[common]``; every
output CSV ends with a provenance comment recording the config hash and
seed, and reruns of the same config are byte-identical for any thread
count.
"""

from __future__ import annotations

import argparse
import configparser
import hashlib
import os
import sys

import numpy as np

from .channel import ChannelModel
from .core import SchemeConfig, SchemeKind, rng_stream
from .linklevel import (CR_SET_DEFAULT, OF_SET_DEFAULT, BlerCurve, McsEntry,
                        McsTable, build_mcs_table, run_bler, write_bler_csv,
                        write_mcs_csv)
from .syslevel import (ScheduleConfig, SinrModel, SinrScenario, packet_sweep,
                       run_full_buffer, synth_sinr, throughput_cdf,
                       load_sinr_trace)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_INFEASIBLE = 3


class ConfigError(Exception):
    """Raised with the offending section/key in the message."""


def _fmt(x: float) -> str:
    return f"{x:.6g}"


def _parse_float_list(text: str) -> list[float]:
    if ":" in text:
        lo, step, hi = (float(tok) for tok in text.split(":"))
        n = int(round((hi - lo) / step)) + 1
        return [lo + i * step for i in range(n)]
    return [float(tok) for tok in text.replace(",", " ").split()]


def _parse_schemes(text: str) -> list[SchemeKind]:
    out = []
    for tok in text.replace(",", " ").split():
        try:
            out.append(SchemeKind(tok.strip().lower()))
        except ValueError:
            raise ConfigError(f"unknown scheme {tok!r}") from None
    if not out:
        raise ConfigError("empty scheme list")
    return out


class _Section:
    """Typed accessors over one config section, erroring with key names."""

    def __init__(self, parser: configparser.ConfigParser, name: str):
        self.name = name
        self.data = dict(parser[name]) if parser.has_section(name) else {}

    def get(self, key: str, default=None, required: bool = False) -> str:
        if key in self.data:
            return self.data[key]
        if required:
            raise ConfigError(f"[{self.name}] missing required key '{key}'")
        return default

    def typed(self, key: str, conv, default=None, required: bool = False):
        raw = self.get(key, None, required)
        if raw is None:
            return default
        try:
            return conv(raw)
        except ConfigError:
            raise
        except Exception as exc:
            raise ConfigError(f"[{self.name}] bad value for '{key}': {exc}") \
                from None


def _load_config(path: str) -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return parser


def _config_hash(path: str) -> str:
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()[:16]


def _common(parser, seed_override, threads_override):
    sec = _Section(parser, "common")
    seed = seed_override if seed_override is not None else \
        sec.typed("seed", int, 12345)
    threads = threads_override if threads_override is not None else \
        sec.typed("threads", int, None)
    channel = sec.typed(
        "channel", lambda s: ChannelModel(s.strip().lower()),
        ChannelModel.RAYLEIGH_BLOCK)
    info_bits = sec.typed("info_bits", int, 128)
    spreading = sec.typed("spreading", int, 4)
    max_blocks = sec.typed("max_blocks", int, 20000)
    min_errors = sec.typed("min_errors", int, 100)
    return seed, threads, channel, info_bits, spreading, max_blocks, min_errors


def _provenance(path, seed):
    return f"config_hash={_config_hash(path)} seed={seed}"


def cmd_bler(config_path: str, out_path: str, seed_override=None,
             threads_override=None) -> int:
    parser = _load_config(config_path)
    seed, threads, channel, info_bits, spreading, max_blocks, min_errors = \
        _common(parser, seed_override, threads_override)
    sec = _Section(parser, "bler")
    schemes = sec.typed("schemes", _parse_schemes, required=True)
    of_list = sec.typed("overloading", _parse_float_list, required=True)
    cr_list = sec.typed("code_rates", _parse_float_list, required=True)
    snr_list = sec.typed("snr_db", _parse_float_list, required=True)
    max_blocks = sec.typed("max_blocks", int, max_blocks)
    min_errors = sec.typed("min_errors", int, min_errors)

    curves: list[BlerCurve] = []
    for of in of_list:
        k = round(of * spreading)
        for cr in cr_list:
            for scheme in schemes:
                cfg = SchemeConfig(scheme=scheme, num_users=k, code_rate=cr,
                                   spreading_factor=spreading,
                                   info_block_bits=info_bits, seed=seed)
                curves.append(run_bler(cfg, snr_list, max_blocks, min_errors,
                                       channel, threads))
    write_bler_csv(out_path, curves, _provenance(config_path, seed))
    return EXIT_OK


def cmd_mcs(config_path: str, out_path: str, seed_override=None,
            threads_override=None) -> int:
    parser = _load_config(config_path)
    seed, threads, channel, info_bits, spreading, max_blocks, min_errors = \
        _common(parser, seed_override, threads_override)
    sec = _Section(parser, "mcs")
    schemes = sec.typed("schemes", _parse_schemes, required=True)
    snr_list = sec.typed("snr_db", _parse_float_list, required=True)
    of_set = tuple(sec.typed("overloading_set", _parse_float_list,
                             list(OF_SET_DEFAULT)))
    cr_set = tuple(sec.typed("code_rate_set", _parse_float_list,
                             list(CR_SET_DEFAULT)))
    target = sec.typed("target_bler", float, 0.1)
    max_blocks = sec.typed("max_blocks", int, max_blocks)
    min_errors = sec.typed("min_errors", int, min_errors)

    tables = []
    for scheme in schemes:
        if scheme is SchemeKind.OMA:
            raise ConfigError("[mcs] tables are defined for NR-MA schemes only")
        base = SchemeConfig(scheme=scheme, num_users=max(spreading + 1, 6),
                            code_rate=0.2, spreading_factor=spreading,
                            info_block_bits=info_bits, seed=seed)
        tables.append(build_mcs_table(scheme, snr_list, of_set, cr_set,
                                      target, base, channel, max_blocks,
                                      min_errors, threads))
    write_mcs_csv(out_path, tables, _provenance(config_path, seed))
    return EXIT_OK


def read_mcs_csv(path: str) -> dict[SchemeKind, McsTable]:
    """Parse a mcs.csv produced by cmd_mcs back into tables."""
    tables: dict[SchemeKind, list[McsEntry]] = {}
    with open(path, encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "scheme,snr_db,of,cr,sum_se":
            raise ConfigError(f"{path}: unexpected mcs.csv header {header!r}")
        for line in fh:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            scheme_s, snr_s, of_s, cr_s, se_s = line.split(",")
            tables.setdefault(SchemeKind(scheme_s), []).append(
                McsEntry(float(snr_s), float(of_s), float(cr_s), float(se_s)))
    return {k: McsTable(k, tuple(v)) for k, v in tables.items()}


def _scenario_from(sec: _Section, seed: int) -> SinrScenario:
    spec = sec.get("scenario", required=True)
    users = sec.typed("users", int, 2000)
    if spec.startswith("trace:"):
        return load_sinr_trace(spec[len("trace:"):])
    try:
        model = SinrModel(spec.strip().lower())
    except ValueError:
        raise ConfigError(
            f"[{sec.name}] scenario must be 'urban', 'indoor' or 'trace:PATH',"
            f" got {spec!r}") from None
    return synth_sinr(model, users, rng_stream(seed, 0xD15C))


def cmd_syslevel(config_path: str, out_dir: str, seed_override=None,
                 threads_override=None) -> int:
    parser = _load_config(config_path)
    seed, threads, channel, info_bits, spreading, *_ = \
        _common(parser, seed_override, threads_override)
    sec = _Section(parser, "syslevel")
    schemes = sec.typed("schemes", _parse_schemes, required=True)
    ttis = sec.typed("ttis", int, 10000)
    scenario = _scenario_from(sec, seed)
    mcs_path = sec.get("mcs_csv")
    tables = read_mcs_csv(mcs_path) if mcs_path else {}
    for scheme in schemes:
        if scheme is not SchemeKind.OMA and scheme not in tables:
            raise ConfigError(
                f"[syslevel] mcs_csv with a {scheme.value} table is required")

    os.makedirs(out_dir, exist_ok=True)
    prov = _provenance(config_path, seed)
    cfg = ScheduleConfig(spreading_factor=spreading, seed=seed)
    rows = []
    for scheme in schemes:
        rates = run_full_buffer(scenario, scheme, tables.get(scheme), cfg,
                                ttis, threads)
        pct, samples, cdf = throughput_cdf(rates)
        cdf_path = os.path.join(out_dir, f"cdf_{scheme.value}.csv")
        with open(cdf_path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("sum_rate_bits,cdf\n")
            for s, c in zip(samples, cdf):
                fh.write(f"{_fmt(s)},{_fmt(c)}\n")
            fh.write(f"# {prov}\n")
        rows.append((scheme.value, scenario.provenance,
                     pct[10], pct[50], pct[90]))
    with open(os.path.join(out_dir, "percentiles.csv"), "w",
              encoding="utf-8", newline="\n") as fh:
        fh.write("scheme,scenario,p10,p50,p90\n")
        for row in rows:
            fh.write(",".join([row[0], row[1]] +
                              [_fmt(v) for v in row[2:]]) + "\n")
        fh.write(f"# {prov}\n")
    return EXIT_OK


def cmd_packets(config_path: str, out_path: str, seed_override=None,
                threads_override=None) -> int:
    parser = _load_config(config_path)
    seed, threads, channel, info_bits, spreading, *_ = \
        _common(parser, seed_override, threads_override)
    sec = _Section(parser, "packets")
    schemes = sec.typed("schemes", _parse_schemes, required=True)
    sizes = tuple(sec.typed("packet_bytes",
                            lambda s: [int(float(v)) for v in
                                       s.replace(",", " ").split()],
                            [20, 50, 100, 200]))
    ttis = sec.typed("ttis", int, 2000)
    scenario = _scenario_from(sec, seed)
    mcs_path = sec.get("mcs_csv")
    tables = read_mcs_csv(mcs_path) if mcs_path else {}
    nr_schemes = [s for s in schemes if s is not SchemeKind.OMA]
    for scheme in nr_schemes:
        if scheme not in tables:
            raise ConfigError(
                f"[packets] mcs_csv with a {scheme.value} table is required")

    cfg = ScheduleConfig(spreading_factor=spreading, seed=seed)
    oma_rates = packet_sweep(scenario, SchemeKind.OMA, None, cfg, sizes,
                             ttis, threads)
    with open(out_path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write("scheme,packet_bytes,avg_sum_rate_bits,"
                 "oma_avg_sum_rate_bits,ratio\n")
        for scheme in nr_schemes:
            rates = packet_sweep(scenario, scheme, tables[scheme], cfg,
                                 sizes, ttis, threads)
            for pb in sizes:
                oma_r = oma_rates[pb]
                ratio = rates[pb] / oma_r if oma_r > 0 else float("inf")
                fh.write(",".join([scheme.value, str(pb), _fmt(rates[pb]),
                                   _fmt(oma_r), _fmt(ratio)]) + "\n")
        fh.write(f"# {_provenance(config_path, seed)}\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="noma-bench",
        description="Link- and system-level NOMA simulation campaigns")
    ap.add_argument("command", choices=["bler", "mcs", "syslevel", "packets"])
    ap.add_argument("--config", required=True, help="INI config file")
    ap.add_argument("--out", required=True,
                    help="output CSV path (directory for syslevel)")
    ap.add_argument("--seed", type=int, default=None,
                    help="override the config seed")
    ap.add_argument("--threads", type=int, default=None,
                    help="worker processes; 0 = auto "
                         "(fallback: NOMA_BENCH_THREADS)")
    args = ap.parse_args(argv)

    handler = {"bler": cmd_bler, "mcs": cmd_mcs, "syslevel": cmd_syslevel,
               "packets": cmd_packets}[args.command]
    try:
        return handler(args.config, args.out, args.seed, args.threads)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ValueError, FileNotFoundError) as exc:
        print(f"infeasible experiment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE


if __name__ == "__main__":
    sys.exit(main())
