"""Sequence-based multiple access: short complex spreading and MMSE-SIC.

Spreading sequences draw their element real/imaginary parts from
{-1, 0, 1}; the receiver runs codeword-level successive interference
cancellation: per round it MMSE-filters the remaining users, decodes the
one with the best post-MMSE SINR, and cancels its reconstruction only
when the CRC passes (failed users are dropped without cancellation so a
wrong reconstruction never propagates).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Modulation, crc_check
from .fec import fec_decode_siso, fec_encode
from .modem import constellation, demap_llr, modulate

__all__ = ["SequencePool", "gen_sequences", "musa_spread", "mmse_sic_detect",
           "SicUserResult", "save_sequences", "load_sequences"]


@dataclass(frozen=True)
class SequencePool:
    """Unit-norm spreading sequences plus their raw {-1,0,1} grid values."""

    spreading_length: int
    raw: np.ndarray         # (count, L) complex with integer parts
    sequences: np.ndarray   # (count, L) complex, unit L2 norm

    @property
    def count(self) -> int:
        return self.sequences.shape[0]


def _collinear(a: np.ndarray, b: np.ndarray, tol: float = 1e-9) -> bool:
    ip = np.vdot(a, b)
    return abs(abs(ip) ** 2 - (np.vdot(a, a).real * np.vdot(b, b).real)) < tol


def gen_sequences(spreading_length: int, count: int,
                  stream: np.random.Generator) -> SequencePool:
    """Rejection-sample pairwise non-collinear sequences from the ternary grid."""
    if spreading_length < 1 or count < 1:
        raise ValueError("spreading_length and count must be >= 1")
    raws: list[np.ndarray] = []
    attempts = 0
    max_attempts = 2000 * count + 1000
    while len(raws) < count:
        attempts += 1
        if attempts > max_attempts:
            raise ValueError(
                f"cannot draw {count} non-collinear sequences of length "
                f"{spreading_length}")
        cand = (stream.integers(-1, 2, spreading_length)
                + 1j * stream.integers(-1, 2, spreading_length)).astype(complex)
        if not np.any(cand):
            continue
        if any(_collinear(cand, r) for r in raws):
            continue
        raws.append(cand)
    raw = np.array(raws)
    seqs = raw / np.linalg.norm(raw, axis=1, keepdims=True)
    return SequencePool(spreading_length, raw, seqs)


def musa_spread(symbols: np.ndarray, seq: np.ndarray) -> np.ndarray:
    """Chips (L, T): every symbol times the unit-norm sequence."""
    symbols = np.asarray(symbols)
    return seq[:, None] * symbols[None, :]


@dataclass
class SicUserResult:
    user: int
    order: int          # SIC round in which the user was handled
    crc_pass: bool
    bits: np.ndarray    # decoded info bits (payload without CRC)


def _mmse_error_cov(a: np.ndarray, noise_var: float) -> np.ndarray:
    """Batched (T, K, K) MMSE error covariance (I + A^H A / sigma^2)^-1."""
    k = a.shape[2]
    gram = np.einsum("tlj,tlk->tjk", a.conj(), a)
    return np.linalg.inv(np.eye(k) + gram / noise_var)


def mmse_sic_detect(chips: np.ndarray, pool_sequences: np.ndarray,
                    channels: np.ndarray, noise_var: float, code_rate: float,
                    payload_bits: int) -> list[SicUserResult]:
    """Codeword-level MMSE-SIC over one received chip grid.

    chips: (L, T) received grid.  pool_sequences: (K, L) unit-norm rows.
    channels: (T, K) per-symbol-block gains.  Per SIC round the ordering
    metric is the mean post-MMSE SINR recomputed over the remaining set;
    demapping uses the residual interference-plus-noise variance implied
    by the MMSE error covariance (var = mu - mu^2 for unit-energy
    symbols with biased gain mu).

    Returns one SicUserResult per user; `order` records the round.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    n_users, length = pool_sequences.shape
    t_units = chips.shape[1]
    const = constellation(Modulation.QPSK)
    y = chips.astype(complex).copy()
    remaining = list(range(n_users))
    results: dict[int, SicUserResult] = {}
    static_channel = np.allclose(channels, channels[0:1, :])

    for rnd in range(n_users):
        idx = np.array(remaining)
        if static_channel:
            a = (channels[0:1, idx, None] * pool_sequences[idx][None]
                 ).transpose(0, 2, 1)  # (1, L, Kr)
            err = _mmse_error_cov(a, noise_var)            # (1, Kr, Kr)
        else:
            a = (channels[:, idx, None] * pool_sequences[idx][None]
                 ).transpose(0, 2, 1)  # (T, L, Kr)
            err = _mmse_error_cov(a, noise_var)
        e_diag = np.real(np.einsum("tkk->tk", err))
        e_diag = np.clip(e_diag, 1e-15, 1.0)
        sinr = 1.0 / e_diag - 1.0                           # (Tb, Kr)
        best = int(np.argmax(sinr.mean(axis=0)))
        user = remaining[best]

        # MMSE estimate of the chosen user's symbols: s_hat = e_row A^H y / s2
        if static_channel:
            w = (err[0, best, :][None, :, None] * a[0].conj().T[None]
                 ).sum(axis=1) / noise_var               # (1, L)
            filt = (w @ y).ravel()
            mu = np.full(t_units, 1.0 - e_diag[0, best])
        else:
            w = np.einsum("tk,tlk->tl", err[:, best, :], a.conj()) / noise_var
            filt = np.einsum("tl,lt->t", w, y)
            mu = 1.0 - e_diag[:, best]
        nu = np.clip(mu * (1.0 - mu), 1e-15, None)
        scale = 1.0 / np.sqrt(nu)
        llr = demap_llr(filt * scale, mu * scale, 1.0, const)

        decoded, _, _ = fec_decode_siso(llr, None, code_rate, payload_bits)
        passed = crc_check(decoded)
        results[user] = SicUserResult(user, rnd, bool(passed),
                                      decoded[:-16].copy())
        remaining.pop(best)
        if passed:
            re_syms = modulate(fec_encode(decoded, code_rate), const)
            recon = pool_sequences[user][:, None] * (channels[:, user] * re_syms)[None, :]
            y -= recon
    return [results[u] for u in range(n_users)]


def save_sequences(pool: SequencePool, path: str) -> None:
    """One sequence per line as L "re im" pairs (unit-norm values)."""
    with open(path, "w", encoding="utf-8") as fh:
        for row in pool.sequences:
            fh.write(" ".join(f"{v.real:.9g} {v.imag:.9g}" for v in row) + "\n")


def load_sequences(path: str) -> np.ndarray:
    rows = []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            vals = [float(tok) for tok in line.split()]
            if not vals:
                continue
            rows.append(np.array(vals[0::2]) + 1j * np.array(vals[1::2]))
    return np.array(rows)
