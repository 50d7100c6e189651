import numpy as np
import pytest

from noma_bench import oma
from noma_bench.core import (Modulation, SchemeConfig, SchemeKind, crc_attach,
                             grid_dimensions)


class TestOmaMatch:
    def test_double_overloading_doubles_modulation(self):
        cfg = oma.oma_match(2.0, 0.4)
        assert cfg.modulation is Modulation.QAM16
        assert cfg.code_rate == pytest.approx(0.4)

    def test_identity(self):
        cfg = oma.oma_match(1.0, 0.5)
        assert cfg.modulation is Modulation.QPSK
        assert cfg.code_rate == pytest.approx(0.5)

    def test_fractional_loading_via_code_rate(self):
        cfg = oma.oma_match(1.5, 0.4)
        assert cfg.modulation is Modulation.QAM16
        assert cfg.code_rate == pytest.approx(0.3)

    def test_triple_overloading(self):
        cfg = oma.oma_match(3.0, 0.2)
        assert cfg.modulation is Modulation.QAM64
        assert cfg.code_rate == pytest.approx(0.2)

    def test_infeasible_match(self):
        with pytest.raises(ValueError):
            oma.oma_match(4.0, 0.9)

    def test_rate_cap_pushes_modulation_up(self):
        # of=2, cr=0.95 would need 16QAM at 0.95 > 0.93 -> 64QAM at 0.633
        cfg = oma.oma_match(2.0, 0.95)
        assert cfg.modulation is Modulation.QAM64
        assert cfg.code_rate == pytest.approx(2 * 2 * 0.95 / 6)


class TestResourceParity:
    @pytest.mark.parametrize("k,cr", [(6, 0.2), (8, 0.4), (12, 0.9), (6, 0.7)])
    def test_exact_integer_audit(self, k, cr):
        cfg = SchemeConfig(scheme=SchemeKind.OMA, num_users=k, code_rate=cr)
        n_re, t_units = grid_dimensions(cfg)
        _, res = oma.oma_user_allocation(cfg)
        assert sum(res) == n_re * t_units
        assert max(res) - min(res) <= 1


class TestOmaLink:
    def _drop(self, cfg, snr_db, rng):
        n_re, t_units = grid_dimensions(cfg)
        payloads = [crc_attach(rng.integers(0, 2, 128).astype(np.uint8)).bits
                    for _ in range(cfg.num_users)]
        channels = np.ones((t_units, cfg.num_users), dtype=complex)
        grid = oma.oma_transmit(payloads, cfg, channels)
        sigma2 = 10 ** (-snr_db / 10)
        noise = (rng.standard_normal(grid.shape)
                 + 1j * rng.standard_normal(grid.shape)) * np.sqrt(sigma2 / 2)
        return oma.oma_detect(grid + noise, cfg, channels, sigma2), payloads

    def test_high_snr_error_free(self):
        rng = np.random.default_rng(0)
        cfg = SchemeConfig(scheme=SchemeKind.OMA, num_users=4, code_rate=0.5)
        errs = 0
        for _ in range(50):
            results, payloads = self._drop(cfg, 40.0, rng)
            for (passed, bits), payload in zip(results, payloads):
                errs += not passed
                if passed:
                    assert np.array_equal(bits, payload[:128])
        assert errs == 0

    def test_huge_noise_always_fails(self):
        rng = np.random.default_rng(1)
        cfg = SchemeConfig(scheme=SchemeKind.OMA, num_users=4, code_rate=0.5)
        results, _ = self._drop(cfg, -40.0, rng)
        assert not any(p for p, _ in results)

    def test_transmit_power_unit_per_re(self):
        rng = np.random.default_rng(2)
        cfg = SchemeConfig(scheme=SchemeKind.OMA, num_users=6, code_rate=0.2)
        n_re, t_units = grid_dimensions(cfg)
        payloads = [crc_attach(rng.integers(0, 2, 128).astype(np.uint8)).bits
                    for _ in range(6)]
        channels = np.ones((t_units, 6), dtype=complex)
        grid = oma.oma_transmit(payloads, cfg, channels)
        assert np.mean(np.abs(grid) ** 2) == pytest.approx(1.0, rel=0.05)
