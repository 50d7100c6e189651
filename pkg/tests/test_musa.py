import numpy as np
import pytest

from noma_bench import fec, musa
from noma_bench.core import Modulation, crc_attach, rng_stream
from noma_bench.modem import constellation, modulate


def _rayleigh(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / np.sqrt(2)


class TestSequencePool:
    def test_unit_norm_and_nonzero(self):
        pool = musa.gen_sequences(4, 12, rng_stream(1, 0))
        norms = np.linalg.norm(pool.sequences, axis=1)
        assert np.allclose(norms, 1.0)
        assert pool.count == 12
        parts = np.concatenate([pool.raw.real, pool.raw.imag])
        assert set(np.unique(parts)).issubset({-1.0, 0.0, 1.0})

    def test_pairwise_non_collinear_at_300_percent(self):
        pool = musa.gen_sequences(4, 12, rng_stream(2, 0))
        for i in range(12):
            for j in range(i + 1, 12):
                ip = abs(np.vdot(pool.sequences[i], pool.sequences[j]))
                assert ip < 1.0 - 1e-9

    def test_length_one_single_class(self):
        pool = musa.gen_sequences(1, 1, rng_stream(3, 0))
        assert pool.count == 1
        assert abs(abs(pool.sequences[0][0]) - 1.0) < 1e-12
        with pytest.raises(ValueError):
            musa.gen_sequences(1, 2, rng_stream(3, 0))

    def test_deterministic_given_stream(self):
        a = musa.gen_sequences(4, 8, rng_stream(9, 4)).sequences
        b = musa.gen_sequences(4, 8, rng_stream(9, 4)).sequences
        assert np.array_equal(a, b)


class TestSpread:
    def test_chip_power_one_eighth(self):
        pool = musa.gen_sequences(8, 1, rng_stream(4, 0))
        chips = musa.musa_spread(np.array([1.0 + 0j]), pool.sequences[0])
        total = np.sum(np.abs(chips) ** 2)
        assert total == pytest.approx(1.0)
        # a full-weight ternary sequence has exactly 1/8 per chip
        full = np.ones(8) / np.sqrt(8)
        chips = musa.musa_spread(np.array([1.0 + 0j]), full)
        assert np.allclose(np.abs(chips) ** 2, 1 / 8)

    def test_basis_sequence_is_resource_mapping(self):
        e1 = np.zeros(4, dtype=complex)
        e1[0] = 1.0
        syms = np.array([1 + 1j, -1 + 0j])
        chips = musa.musa_spread(syms, e1)
        assert np.array_equal(chips[0], syms)
        assert not chips[1:].any()

    def test_matched_filter_despread_identity(self):
        rng = np.random.default_rng(5)
        pool = musa.gen_sequences(4, 3, rng_stream(5, 0))
        syms = _rayleigh(rng, 10)
        chips = musa.musa_spread(syms, pool.sequences[1])
        back = pool.sequences[1].conj() @ chips
        assert np.allclose(back, syms, atol=1e-12)


def _tx_grid(pool, payloads, channels, code_rate):
    const = constellation(Modulation.QPSK)
    t = None
    grid = None
    for u, payload in enumerate(payloads):
        syms = modulate(fec.fec_encode(payload, code_rate), const)
        if grid is None:
            t = syms.size
            grid = np.zeros((pool.sequences.shape[1], t), dtype=complex)
        grid += pool.sequences[u][:, None] * (channels[:, u] * syms)[None, :]
    return grid


class TestMmseSic:
    def test_single_user_matched_filter_limit(self):
        # K=1: the MMSE filter is the matched filter scaled by 1/(1+s2)
        rng = np.random.default_rng(6)
        pool = musa.gen_sequences(4, 1, rng_stream(6, 0))
        sigma2 = 0.5
        t = 20
        h = np.ones((t, 1), dtype=complex)
        a = (h[0:1, [0], None] * pool.sequences[[0]][None]).transpose(0, 2, 1)
        err = musa._mmse_error_cov(a, sigma2)
        w = (err[0, 0, :][None, :, None] * a[0].conj().T[None]).sum(axis=1) / sigma2
        assert np.allclose(w, pool.sequences[0].conj() / (1 + sigma2))

    def test_orthonormal_sequences_equal_sinr(self):
        seqs = np.eye(4, dtype=complex)
        a = np.broadcast_to(seqs.T[None], (1, 4, 4))
        err = musa._mmse_error_cov(a, 0.25)
        diag = np.real(np.einsum("tkk->tk", err))
        assert np.allclose(diag, diag[0, 0])

    def test_zero_noise_limit_is_pseudo_inverse(self):
        rng = np.random.default_rng(7)
        pool = musa.gen_sequences(2, 2, rng_stream(7, 0))
        t = 30
        h = _rayleigh(rng, (t, 2))
        const = constellation(Modulation.QPSK)
        syms = np.stack([modulate(rng.integers(0, 2, 2 * t), const)
                         for _ in range(2)])
        grid = np.zeros((2, t), dtype=complex)
        for u in range(2):
            grid += pool.sequences[u][:, None] * (h[:, u] * syms[u])[None, :]
        sigma2 = 1e-10
        a = (h[:, [0, 1], None] * pool.sequences[[0, 1]][None]).transpose(0, 2, 1)
        err = musa._mmse_error_cov(a, sigma2)
        w = np.einsum("tk,tlk->tl", err[:, 0, :], a.conj()) / sigma2
        filt = np.einsum("tl,lt->t", w, grid)
        mu = 1.0 - np.real(err[:, 0, 0])
        assert np.abs(filt / mu - syms[0]).max() < 1e-6
        # W A -> I on both rows
        wa = np.einsum("tk,tlk,tlj->tj", err[:, 0, :], a.conj(), a) / sigma2
        assert np.abs(wa - np.array([1.0, 0.0])).max() < 1e-6

    def test_full_rank_all_users_decode_at_high_snr(self):
        rng = np.random.default_rng(8)
        pool = musa.gen_sequences(4, 4, rng_stream(8, 0))
        payloads = [crc_attach(rng.integers(0, 2, 128).astype(np.uint8)).bits
                    for _ in range(4)]
        t_units = fec.rate_match_plan(144, 0.5).n_sent // 2
        h = _rayleigh(rng, (t_units, 4))
        grid = _tx_grid(pool, payloads, h, 0.5)
        sigma2 = 10 ** (-2.5)
        noisy = grid + _rayleigh(rng, grid.shape) * np.sqrt(sigma2)
        results = musa.mmse_sic_detect(noisy, pool.sequences, h, sigma2,
                                       0.5, 144)
        assert all(r.crc_pass for r in results)
        orders = sorted(r.order for r in results)
        assert orders == [0, 1, 2, 3]

    def test_cancellation_reduces_residual_below_1e10(self):
        rng = np.random.default_rng(9)
        pool = musa.gen_sequences(4, 2, rng_stream(9, 0))
        payloads = [crc_attach(rng.integers(0, 2, 128).astype(np.uint8)).bits
                    for _ in range(2)]
        t_units = fec.rate_match_plan(144, 0.5).n_sent // 2
        h = _rayleigh(rng, (t_units, 2))
        grid = _tx_grid(pool, payloads, h, 0.5)
        sigma2 = 1e-6
        noisy = grid + _rayleigh(rng, grid.shape) * np.sqrt(sigma2)
        results = musa.mmse_sic_detect(noisy, pool.sequences, h, sigma2,
                                       0.5, 144)
        assert all(r.crc_pass for r in results)
        first = min(results, key=lambda r: r.order)
        # reconstruction from the decoded bits vs the true contribution
        const = constellation(Modulation.QPSK)
        block = crc_attach(first.bits).bits
        syms = modulate(fec.fec_encode(block, 0.5), const)
        recon = pool.sequences[first.user][:, None] \
            * (h[:, first.user] * syms)[None, :]
        true_syms = modulate(fec.fec_encode(payloads[first.user], 0.5), const)
        truth = pool.sequences[first.user][:, None] \
            * (h[:, first.user] * true_syms)[None, :]
        leftover = np.sum(np.abs(truth - recon) ** 2)
        assert leftover / np.sum(np.abs(truth) ** 2) < 1e-10

    def test_failed_crc_not_cancelled(self):
        # at very low SNR nothing decodes and nothing must be subtracted
        rng = np.random.default_rng(10)
        pool = musa.gen_sequences(4, 6, rng_stream(10, 0))
        payloads = [crc_attach(rng.integers(0, 2, 128).astype(np.uint8)).bits
                    for _ in range(6)]
        t_units = fec.rate_match_plan(144, 0.2).n_sent // 2
        h = _rayleigh(rng, (t_units, 6))
        grid = _tx_grid(pool, payloads, h, 0.2)
        noisy = grid + _rayleigh(rng, grid.shape) * np.sqrt(10 ** 1.5)
        results = musa.mmse_sic_detect(noisy, pool.sequences, h, 10 ** 1.5,
                                       0.2, 144)
        assert not any(r.crc_pass for r in results)
        assert sorted(r.order for r in results) == list(range(6))

    def test_bad_noise_var_rejected(self):
        pool = musa.gen_sequences(4, 2, rng_stream(11, 0))
        with pytest.raises(ValueError):
            musa.mmse_sic_detect(np.zeros((4, 2), dtype=complex),
                                 pool.sequences, np.ones((2, 2)), 0.0,
                                 0.5, 144)


class TestSequenceIo:
    def test_roundtrip(self, tmp_path):
        pool = musa.gen_sequences(4, 12, rng_stream(12, 0))
        path = tmp_path / "seq.txt"
        musa.save_sequences(pool, str(path))
        loaded = musa.load_sequences(str(path))
        assert np.allclose(loaded, pool.sequences, atol=1e-8)
        assert len(path.read_text().splitlines()) == 12
