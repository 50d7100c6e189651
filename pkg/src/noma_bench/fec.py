"""Convolutional FEC with soft-input/soft-output decoding and rate matching.

The mother code is the rate-1/3, constraint-length-7 feed-forward code
with octal generators (133, 171, 165), zero-tail terminated.  Rates above
1/3 are reached by even puncturing, rates below by cyclic repetition;
repeated-bit LLRs are summed at de-rate-match (maximum-ratio combining).

Note on absolute performance: the mother code is a deliberate substitute
for whatever (unpublished) turbo/LDPC code produced the reference BLER
curves, so this package's curves match those only in trend, never in
absolute dB position.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from . import _kernels
from .core import coded_bits_for

__all__ = ["CodeSpec", "RateMatchPlan", "fec_encode", "fec_decode_siso",
           "mother_length", "rate_match_plan"]

GENERATORS_OCTAL = (0o133, 0o171, 0o165)
CONSTRAINT_LENGTH = 7
MEMORY = CONSTRAINT_LENGTH - 1
N_STATES = 1 << MEMORY
RATE_DEN = len(GENERATORS_OCTAL)


class CodeSpec:
    """Mother code parameters plus a target rate after matching."""

    def __init__(self, target_rate: float):
        if not 0.0 < target_rate <= 1.0:
            raise ValueError(f"unsupported rate {target_rate}: must be in (0, 1]")
        self.target_rate = float(target_rate)
        self.generators = GENERATORS_OCTAL
        self.constraint_length = CONSTRAINT_LENGTH

    def coded_length(self, payload_bits: int) -> int:
        """Exactly ceil(payload/rate), with the shared 1e-9 ratio slack."""
        return coded_bits_for(payload_bits, self.target_rate, 1)


def _parity(x: int) -> int:
    return bin(x).count("1") & 1


@lru_cache(maxsize=1)
def _trellis() -> tuple[np.ndarray, np.ndarray]:
    """(next_state, out_bits) tables for the mother code.

    State = last MEMORY input bits, newest in the MSB.  next_state[b][s]
    is the state after input bit b; out_bits[b][s][j] is generator j's
    output for that transition.
    """
    next_state = np.zeros((2, N_STATES), dtype=np.int32)
    out_bits = np.zeros((2, N_STATES, RATE_DEN), dtype=np.int8)
    for s in range(N_STATES):
        for b in (0, 1):
            reg = (b << MEMORY) | s  # current input + past bits
            next_state[b, s] = reg >> 1
            for j, g in enumerate(GENERATORS_OCTAL):
                out_bits[b, s, j] = _parity(reg & g)
    return next_state, out_bits


def mother_length(payload_bits: int) -> int:
    """Mother-code output length: 3 bits per payload and per tail step."""
    return RATE_DEN * (payload_bits + MEMORY)


def _encode_mother(payload: np.ndarray) -> np.ndarray:
    next_state, out_bits = _trellis()
    k = payload.size
    out = np.empty(RATE_DEN * (k + MEMORY), dtype=np.uint8)
    state = 0
    for t in range(k + MEMORY):
        b = int(payload[t]) if t < k else 0
        out[RATE_DEN * t: RATE_DEN * (t + 1)] = out_bits[b, state]
        state = next_state[b, state]
    return out


class RateMatchPlan:
    """Deterministic puncture/repeat map between mother and sent positions."""

    def __init__(self, payload_bits: int, target_rate: float):
        n_mother = mother_length(payload_bits)
        n_target = CodeSpec(target_rate).coded_length(payload_bits)
        if n_target >= n_mother:
            idx = np.arange(n_target) % n_mother  # cyclic repetition
        else:
            idx = (np.arange(n_target) * n_mother) // n_target  # even puncture
        self.payload_bits = payload_bits
        self.n_mother = n_mother
        self.n_sent = n_target
        self.mother_index = idx.astype(np.int64)

    def apply(self, mother_bits: np.ndarray) -> np.ndarray:
        return mother_bits[self.mother_index]

    def combine_llr(self, llr_sent: np.ndarray) -> np.ndarray:
        """Mother-order LLRs: repeats summed, punctured positions zero."""
        out = np.zeros(self.n_mother)
        np.add.at(out, self.mother_index, llr_sent)
        return out


@lru_cache(maxsize=64)
def _plan(payload_bits: int, target_rate: float) -> RateMatchPlan:
    return RateMatchPlan(payload_bits, target_rate)


def rate_match_plan(payload_bits: int, target_rate: float) -> RateMatchPlan:
    return _plan(payload_bits, float(target_rate))


def fec_encode(payload: np.ndarray, target_rate: float) -> np.ndarray:
    """Encode payload bits to exactly ceil(len/rate) coded bits."""
    payload = np.asarray(payload, dtype=np.uint8)
    if payload.size < 8:
        raise ValueError("payload must hold at least 8 bits")
    plan = rate_match_plan(payload.size, target_rate)
    return plan.apply(_encode_mother(payload))


def fec_decode_siso(llr_in: np.ndarray, a_priori: np.ndarray | None,
                    target_rate: float, payload_bits: int
                    ) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Max-log BCJR decode of a rate-matched block.

    llr_in holds one LLR per sent coded bit (positive = bit 0) and must
    match the fec_encode output length for the same parameters; a_priori
    holds priors on the payload bits (None = all zero).  Returns hard
    payload decisions, the extrinsic LLR per sent coded bit (posterior
    minus that position's own input), and the payload posterior LLRs.
    """
    llr_in = np.asarray(llr_in, dtype=np.float64)
    plan = rate_match_plan(payload_bits, target_rate)
    if llr_in.size != plan.n_sent:
        raise ValueError(
            f"llr_in length {llr_in.size} does not match coded length {plan.n_sent}")
    if a_priori is None:
        a_priori = np.zeros(payload_bits)
    else:
        a_priori = np.asarray(a_priori, dtype=np.float64)
        if a_priori.size != payload_bits:
            raise ValueError("a_priori length must equal payload length")

    next_state, out_bits = _trellis()
    llr_mother = plan.combine_llr(llr_in)
    post_payload, post_coded = _kernels.bcjr_siso(
        np.ascontiguousarray(llr_mother), np.ascontiguousarray(a_priori),
        next_state, out_bits, payload_bits)
    decoded = (post_payload < 0).astype(np.uint8)
    extrinsic = post_coded[plan.mother_index] - llr_in
    return decoded, extrinsic, post_payload
