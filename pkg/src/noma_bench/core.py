"""Shared domain types, deterministic random streams and CRC framing.

Everything downstream (FEC, modems, detectors, the Monte-Carlo harness)
builds on the types and helpers defined here.  All randomness in the
package flows through :func:`rng_stream` so that a full simulation run is
reproducible from a single 64-bit seed regardless of execution order.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "SchemeKind",
    "Modulation",
    "SchemeConfig",
    "ResourceGrid",
    "CrcBlock",
    "overloading_factor",
    "rng_stream",
    "crc16",
    "crc_attach",
    "crc_check",
    "grid_dimensions",
]


class SchemeKind(enum.Enum):
    SCMA = "scma"
    MUSA = "musa"
    IDMA = "idma"
    OMA = "oma"


class Modulation(enum.Enum):
    QPSK = 4
    QAM16 = 16
    QAM64 = 64

    @property
    def bits_per_symbol(self) -> int:
        return self.value.bit_length() - 1


# Purpose tags used to carve independent sub-streams out of one
# (seed, drop) pair.  Keyed by drop index, never by execution order, so
# parallel runs stay bit-reproducible.
STREAMS_PER_DROP = 8
STREAM_BITS = 0
STREAM_CHANNEL = 1
STREAM_NOISE = 2
STREAM_SCHED = 3
STREAM_SIGNATURE = 4


def overloading_factor(num_users: int, spreading_factor: int) -> float:
    """Ratio of superposed user signals to orthogonal resource grids."""
    if num_users < 1:
        raise ValueError(f"num_users must be >= 1, got {num_users}")
    if spreading_factor < 1:
        raise ValueError(f"spreading_factor must be >= 1, got {spreading_factor}")
    return num_users / spreading_factor


def rng_stream(seed: int, stream_id: int) -> np.random.Generator:
    """Deterministic, independent random stream for (seed, stream_id).

    Identical arguments always return a generator producing identical
    draws; distinct stream ids give statistically independent streams.
    """
    mask = (1 << 64) - 1
    return np.random.default_rng([seed & mask, stream_id & mask])


def drop_stream(seed: int, drop_index: int, purpose: int) -> np.random.Generator:
    """Sub-stream for one Monte-Carlo drop, split by purpose tag."""
    return rng_stream(seed, drop_index * STREAMS_PER_DROP + purpose)


# ---------------------------------------------------------------------------
# CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xor-out.
# Used as block-error ground truth and to gate SIC cancellation.

_CRC_POLY = 0x1021
_CRC_INIT = 0xFFFF


def _build_crc_table() -> np.ndarray:
    table = np.zeros(256, dtype=np.uint16)
    for byte in range(256):
        reg = byte << 8
        for _ in range(8):
            reg = ((reg << 1) ^ _CRC_POLY) if reg & 0x8000 else (reg << 1)
            reg &= 0xFFFF
        table[byte] = reg
    return table


_CRC_TABLE = _build_crc_table()


def crc16(bits: np.ndarray) -> int:
    """CRC over a bit sequence, MSB-first."""
    bits = np.asarray(bits, dtype=np.uint8)
    if bits.size == 0:
        raise ValueError("CRC payload must be non-empty")
    reg = _CRC_INIT
    n_bytes, rem = divmod(bits.size, 8)
    if n_bytes:
        packed = np.packbits(bits[: n_bytes * 8])
        for byte in packed:
            reg = ((reg << 8) & 0xFFFF) ^ int(_CRC_TABLE[(reg >> 8) ^ byte])
    for bit in bits[n_bytes * 8 :]:
        reg ^= int(bit) << 15
        reg = ((reg << 1) ^ _CRC_POLY) if reg & 0x8000 else (reg << 1)
        reg &= 0xFFFF
    return reg


@dataclass(frozen=True)
class CrcBlock:
    """Payload bits plus the 16 CRC parity bits appended to them."""

    payload: np.ndarray
    parity: np.ndarray

    @property
    def bits(self) -> np.ndarray:
        return np.concatenate([self.payload, self.parity])


def crc_attach(bits: np.ndarray) -> CrcBlock:
    bits = np.ascontiguousarray(bits, dtype=np.uint8)
    reg = crc16(bits)
    parity = ((reg >> np.arange(15, -1, -1)) & 1).astype(np.uint8)
    return CrcBlock(payload=bits, parity=parity)


def crc_check(block: CrcBlock | np.ndarray) -> bool:
    """True iff the parity bits match the payload's CRC."""
    if isinstance(block, CrcBlock):
        bits = block.bits
    else:
        bits = np.asarray(block, dtype=np.uint8)
    if bits.size <= 16:
        return False
    return crc16(bits[:-16]) == int(
        np.packbits(bits[-16:]).view(">u2")[0]
    )


# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SchemeConfig:
    """One link-level experiment point.

    ``info_block_bits`` is the transport block size excluding the CRC-16
    appendix.  ``snr_db`` is the per-user average received symbol SNR
    referenced to one resource element (unit symbol energy over complex
    noise power).
    """

    scheme: SchemeKind
    num_users: int
    code_rate: float
    snr_db: float = 0.0
    spreading_factor: int = 4
    modulation: Modulation = Modulation.QPSK
    info_block_bits: int = 128
    mpa_iterations: int = 8
    esepic_iterations: int = 6
    seed: int = 0

    def __post_init__(self) -> None:
        if self.num_users < 1:
            raise ValueError("num_users must be >= 1")
        if self.spreading_factor < 1:
            raise ValueError("spreading_factor must be >= 1")
        if not 0.0 < self.code_rate <= 1.0:
            raise ValueError("code_rate must lie in (0, 1]")
        if self.info_block_bits < 8:
            raise ValueError("info_block_bits must be >= 8")
        if self.mpa_iterations < 1 or self.esepic_iterations < 1:
            raise ValueError("iteration counts must be >= 1")
        # No lower bound on num_users/spreading_factor: overloading > 1 is
        # the NR-MA operating regime, = 1 the degenerate case, and < 1
        # happens for partial groups at system level.  For OMA configs the
        # pair describes the NR-MA point the baseline is SE-matched
        # against; the baseline itself always serves users on exclusive
        # resources.

    @property
    def overloading(self) -> float:
        return overloading_factor(self.num_users, self.spreading_factor)

    @property
    def payload_bits(self) -> int:
        """Bits entering the FEC encoder: transport block plus CRC-16."""
        return self.info_block_bits + 16


def coded_bits_for(payload_bits: int, code_rate: float, bits_per_symbol: int = 2) -> int:
    """Coded-bit budget: ceil(payload/rate), rounded up to fill whole symbols.

    The ceil carries a 1e-9 slack so rates expressed as float ratios of
    the intended integer lengths round-trip exactly.
    """
    n = int(np.ceil(payload_bits / code_rate - 1e-9))
    if n % bits_per_symbol:
        n += bits_per_symbol - n % bits_per_symbol
    return n


def grid_dimensions(config: SchemeConfig) -> tuple[int, int]:
    """(resource elements per unit, spreading units) for one transport block.

    Depends only on block size, code rate, modulation and N, never on the
    scheme, so OMA and the NR-MA schemes consume identical physical
    resources for a given config.
    """
    coded = coded_bits_for(config.payload_bits, config.code_rate,
                           config.modulation.bits_per_symbol)
    symbols = coded // config.modulation.bits_per_symbol
    return config.spreading_factor, symbols


@dataclass(frozen=True)
class ResourceGrid:
    """Complex samples indexed (resource element within unit, unit)."""

    samples: np.ndarray = field(repr=False)

    def __post_init__(self) -> None:
        if self.samples.ndim != 2:
            raise ValueError("grid samples must be 2-D (re, unit)")

    @property
    def num_re(self) -> int:
        return self.samples.shape[0]

    @property
    def num_units(self) -> int:
        return self.samples.shape[1]

    @property
    def total_re(self) -> int:
        return self.samples.size
