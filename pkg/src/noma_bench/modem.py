"""Gray-mapped QAM modulation and max-log soft demapping.

Labeling convention: bits alternate I, Q, I, Q...; within one rail the
first bit picks the sign (0 = positive) and the remaining bits Gray-code
the magnitude.  For QPSK that reduces to "first bit -> I sign, second ->
Q sign, 0 -> +".
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from .core import Modulation

__all__ = ["Constellation", "constellation", "modulate", "demap_llr"]

_RAIL_NORM = {2: np.sqrt(2.0), 4: np.sqrt(10.0), 8: np.sqrt(42.0)}


class Constellation:
    """Gray-labeled unit-energy constellation of order 4, 16 or 64."""

    def __init__(self, modulation: Modulation):
        self.modulation = modulation
        self.order = modulation.value
        self.bits_per_symbol = modulation.bits_per_symbol
        rail_bits = self.bits_per_symbol // 2
        rail_m = 1 << rail_bits
        # rail levels descend from +(M-1) so the all-zero label is the
        # largest positive amplitude and the sign bit is 0 for positive
        idx = np.arange(rail_m)
        gray = idx ^ (idx >> 1)
        levels = np.empty(rail_m)
        levels[gray] = (rail_m - 1) - 2 * idx
        self._rail_levels = levels / _RAIL_NORM[rail_m]
        self._rail_bits = rail_bits

        labels = np.arange(self.order)
        i_label = np.zeros(self.order, dtype=np.int64)
        q_label = np.zeros(self.order, dtype=np.int64)
        for pos in range(rail_bits):
            i_bit = (labels >> (self.bits_per_symbol - 1 - 2 * pos)) & 1
            q_bit = (labels >> (self.bits_per_symbol - 2 - 2 * pos)) & 1
            i_label = (i_label << 1) | i_bit
            q_label = (q_label << 1) | q_bit
        self.points = self._rail_levels[i_label] + 1j * self._rail_levels[q_label]
        # bit value of each label, MSB (first transmitted bit) first
        shifts = np.arange(self.bits_per_symbol - 1, -1, -1)
        self.bit_table = ((labels[:, None] >> shifts[None, :]) & 1).astype(np.int8)

    def __repr__(self) -> str:
        return f"Constellation({self.modulation.name})"


@lru_cache(maxsize=None)
def constellation(modulation: Modulation) -> Constellation:
    return Constellation(modulation)


def modulate(bits: np.ndarray, const: Constellation) -> np.ndarray:
    """Map Gray-labeled bit groups to unit-energy complex symbols."""
    bits = np.asarray(bits)
    bps = const.bits_per_symbol
    if bits.size % bps:
        raise ValueError(f"bit count {bits.size} not divisible by {bps}")
    groups = bits.reshape(-1, bps)
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = groups @ weights
    return const.points[labels]


def demap_llr(symbols: np.ndarray, channel_gain: np.ndarray | complex,
              noise_var: float | np.ndarray, const: Constellation) -> np.ndarray:
    """Max-log per-bit LLRs, positive meaning bit 0 is more likely.

    llr_b = min over points labeled b=1 of |y - h s|^2 / sigma^2 minus the
    same minimum over points labeled b=0.  channel_gain may vary per
    symbol; noise_var may be scalar or per symbol.
    """
    symbols = np.asarray(symbols).ravel()
    noise_var = np.asarray(noise_var, dtype=np.float64)
    if np.any(noise_var <= 0):
        raise ValueError("noise_var must be positive")
    h = np.broadcast_to(np.asarray(channel_gain).ravel()
                        if np.ndim(channel_gain) else channel_gain,
                        symbols.shape)
    d2 = np.abs(symbols[:, None] - h[:, None] * const.points[None, :]) ** 2
    d2 = d2 / np.broadcast_to(noise_var, symbols.shape)[:, None]
    llr = np.empty((symbols.size, const.bits_per_symbol))
    for b in range(const.bits_per_symbol):
        mask1 = const.bit_table[:, b] == 1
        llr[:, b] = d2[:, mask1].min(axis=1) - d2[:, ~mask1].min(axis=1)
    return llr.ravel()
