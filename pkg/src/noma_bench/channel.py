"""Uplink channel realizations shared by all schemes under common draws.

SNR is referenced to per-user unit symbol energy over the complex noise
power per resource element, so overloading raises the total received
power K/N-fold while each user's own normalization never changes.
"""

from __future__ import annotations

import enum

import numpy as np

__all__ = ["ChannelModel", "draw_channel", "add_noise", "noise_var_for_snr"]


class ChannelModel(enum.Enum):
    AWGN = "awgn"
    RAYLEIGH_BLOCK = "rayleigh_block"


def draw_channel(model: ChannelModel, num_users: int, spreading_factor: int,
                 t_blocks: int, stream: np.random.Generator) -> np.ndarray:
    """Complex gains of shape (t_blocks, num_users), one per spreading unit.

    Gains are constant over the unit's resource elements.  AWGN returns
    all ones; RAYLEIGH_BLOCK draws i.i.d. unit-variance circularly
    symmetric gains, independent across users and units.
    """
    if model is ChannelModel.AWGN:
        return np.ones((t_blocks, num_users), dtype=complex)
    re = stream.standard_normal((t_blocks, num_users))
    im = stream.standard_normal((t_blocks, num_users))
    return (re + 1j * im) / np.sqrt(2.0)


def noise_var_for_snr(snr_db: float) -> float:
    return float(10.0 ** (-snr_db / 10.0))


def add_noise(grid: np.ndarray, snr_db: float,
              stream: np.random.Generator) -> tuple[np.ndarray, float]:
    """Add complex AWGN of total variance sigma^2 = 10^(-snr/10).

    Unit-variance draws are scaled afterwards, so a fixed stream yields
    noise realizations coupled across SNR points (common random numbers).
    """
    sigma2 = noise_var_for_snr(snr_db)
    re = stream.standard_normal(grid.shape)
    im = stream.standard_normal(grid.shape)
    noise = (re + 1j * im) * np.sqrt(sigma2 / 2.0)
    return grid + noise, sigma2
