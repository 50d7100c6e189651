"""Interleaver-based multiple access: low-rate coding, repetition and
user-specific bit interleaving with an iterative ESE-PIC receiver.

The chip alphabet is QPSK treated as two independent BPSK rails with
noise sigma^2/2 per rail.  The elementary signal estimator models the sum
of the other users' rails as Gaussian, chip by chip; its extrinsic LLRs
feed the SISO FEC decoder through de-interleaving and de-repetition, and
the decoder's coded-bit posteriors come back as the next iteration's
chip priors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import crc_check, rng_stream
from .fec import fec_decode_siso, fec_encode

__all__ = ["InterleaverSet", "make_interleavers", "idma_encode",
           "ese_pic_detect", "IdmaUserResult"]

LLR_CLIP = 30.0
VAR_FLOOR = 1e-12


@dataclass(frozen=True)
class InterleaverSet:
    """K chip-stream permutations drawn from per-user random streams."""

    perms: np.ndarray     # (K, J) int64
    inverse: np.ndarray   # (K, J) int64

    @property
    def num_users(self) -> int:
        return self.perms.shape[0]

    @property
    def length(self) -> int:
        return self.perms.shape[1]


def make_interleavers(seed: int, num_users: int, length: int) -> InterleaverSet:
    """Fisher-Yates permutations, one independent stream per user."""
    perms = np.empty((num_users, length), dtype=np.int64)
    inverse = np.empty_like(perms)
    for k in range(num_users):
        p = rng_stream(seed, k).permutation(length)
        perms[k] = p
        inverse[k][p] = np.arange(length)
    if num_users <= 64:
        assert len({tuple(p) for p in perms}) == num_users, \
            "interleaver collision"
    return InterleaverSet(perms, inverse)


def idma_encode(payload: np.ndarray, code_rate: float, spread_repeat: int,
                perm: np.ndarray) -> np.ndarray:
    """Encode, repeat, interleave and map to QPSK chips.

    The rail stream length must equal the permutation length: coded bits
    times spread_repeat.  Chips carry power 1/spread_repeat so one
    modulated symbol's unit energy is preserved across its repetitions.
    """
    coded = fec_encode(payload, code_rate)
    rails = np.repeat(coded, spread_repeat)
    if rails.size != perm.size:
        raise ValueError(
            f"chip budget mismatch: stream {rails.size} vs interleaver {perm.size}")
    interleaved = np.empty_like(rails)
    interleaved[perm] = rails           # coded rail i lands at position perm[i]
    amp = 1.0 / np.sqrt(2.0 * spread_repeat)
    bipolar = amp * (1.0 - 2.0 * interleaved.astype(float))
    return bipolar[0::2] + 1j * bipolar[1::2]


@dataclass
class IdmaUserResult:
    user: int
    crc_pass: bool
    bits: np.ndarray
    payload_llr: np.ndarray


def _ese_rail_llr(y_re, y_im, hr, hi, e_i, e_q, v_i, v_q, amp, sigma2_rail):
    """Extrinsic rail LLRs for all users at once.

    y_*: (J,) received rails; h*: (K, J) channel parts; e_*, v_*: (K, J)
    prior means/variances per rail.  Returns (llr_i, llr_q) of shape
    (K, J).  With a real channel this reduces to the scalar textbook form
    e = 2 h (r - m + h E) / (v - h^2 V) per rail.
    """
    a = amp * hr
    b = amp * hi
    m_i = (a * e_i - b * e_q).sum(axis=0)
    m_q = (b * e_i + a * e_q).sum(axis=0)
    v_tot_i = (a * a * v_i + b * b * v_q).sum(axis=0) + sigma2_rail
    v_tot_q = (b * b * v_i + a * a * v_q).sum(axis=0) + sigma2_rail

    den_ii = np.maximum(v_tot_i - a * a * v_i, VAR_FLOOR)
    den_iq = np.maximum(v_tot_q - b * b * v_i, VAR_FLOOR)
    llr_i = (2.0 * a * (y_re - m_i + a * e_i) / den_ii
             + 2.0 * b * (y_im - m_q + b * e_i) / den_iq)

    den_qi = np.maximum(v_tot_i - b * b * v_q, VAR_FLOOR)
    den_qq = np.maximum(v_tot_q - a * a * v_q, VAR_FLOOR)
    llr_q = (-2.0 * b * (y_re - m_i - b * e_q) / den_qi
             + 2.0 * a * (y_im - m_q + a * e_q) / den_qq)
    return llr_i, llr_q


def ese_pic_detect(grid: np.ndarray, channels: np.ndarray, noise_var: float,
                   outer_iterations: int, code_rate: float,
                   interleavers: InterleaverSet, payload_bits: int,
                   spread_repeat: int, trace: list | None = None
                   ) -> list[IdmaUserResult]:
    """Iterative chip-by-chip soft interference estimation and decoding.

    grid: (N, T) received samples, chips laid out column-major; channels:
    (T, K) per-unit gains.  When ``trace`` is a list, the per-iteration
    median |E[x]| per user is appended to it (convergence diagnostics).
    """
    n_re, t_units = grid.shape
    n_users = interleavers.num_users
    chips = grid.reshape(-1, order="F")           # chip j in unit j // N
    j_rails = 2 * chips.size
    if interleavers.length != j_rails:
        raise ValueError("interleaver length does not match the chip budget")
    y_re, y_im = chips.real, chips.imag
    h_chip = np.repeat(channels, n_re, axis=0).T   # (K, J_chips)
    hr, hi = h_chip.real, h_chip.imag
    amp = 1.0 / np.sqrt(2.0 * spread_repeat)
    sigma2_rail = noise_var / 2.0

    coded_len = interleavers.length // spread_repeat
    prior = np.zeros((n_users, j_rails))          # rail LLRs, interleaved order
    results: list[IdmaUserResult] = [None] * n_users  # type: ignore[list-item]

    for it in range(outer_iterations):
        e_all = np.tanh(np.clip(prior, -LLR_CLIP, LLR_CLIP) / 2.0)
        v_all = 1.0 - e_all ** 2
        if trace is not None:
            trace.append(np.median(np.abs(e_all), axis=1))
        e_i, e_q = e_all[:, 0::2], e_all[:, 1::2]
        v_i, v_q = v_all[:, 0::2], v_all[:, 1::2]
        llr_i, llr_q = _ese_rail_llr(y_re, y_im, hr, hi, e_i, e_q, v_i, v_q,
                                     amp, sigma2_rail)
        ese = np.empty((n_users, j_rails))
        ese[:, 0::2], ese[:, 1::2] = llr_i, llr_q

        for k in range(n_users):
            deint = ese[k][interleavers.perms[k]]
            llr_coded = deint.reshape(coded_len, spread_repeat).sum(axis=1)
            decoded, ext, payload_llr = fec_decode_siso(
                llr_coded, None, code_rate, payload_bits)
            post_coded = ext + llr_coded
            post_rails = np.repeat(post_coded, spread_repeat)
            prior[k] = (post_rails - deint)[interleavers.inverse[k]]
            if it == outer_iterations - 1:
                results[k] = IdmaUserResult(k, bool(crc_check(decoded)),
                                            decoded[:-16].copy(), payload_llr)
    return results
