import numpy as np
import pytest

from noma_bench import syslevel as sl
from noma_bench.core import Modulation, SchemeKind, rng_stream
from noma_bench.linklevel import McsEntry, McsTable


def _table():
    entries = (McsEntry(-4.0, 1.5, 0.1, 0.28), McsEntry(0.0, 1.5, 0.2, 0.55),
               McsEntry(4.0, 2.0, 0.3, 1.1), McsEntry(8.0, 2.0, 0.5, 1.9),
               McsEntry(12.0, 3.0, 0.6, 3.4), McsEntry(16.0, 3.0, 0.8, 4.6))
    return McsTable(SchemeKind.MUSA, entries)


class TestSynthSinr:
    def test_urban_high_sinr_fraction(self):
        sc = sl.synth_sinr(sl.SinrModel.URBAN, 100_000, rng_stream(1, 0))
        frac = np.mean(sc.sinr_db > 20.0)
        assert 0.35 <= frac <= 0.45
        assert sc.sinr_db.min() >= -20.0
        assert sc.sinr_db.max() <= 70.0

    def test_indoor_concentration(self):
        sc = sl.synth_sinr(sl.SinrModel.INDOOR, 100_000, rng_stream(1, 1))
        inside = np.mean((sc.sinr_db >= -10.0) & (sc.sinr_db <= 15.0))
        assert inside >= 0.98

    def test_deterministic(self):
        a = sl.synth_sinr(sl.SinrModel.URBAN, 500, rng_stream(2, 7)).sinr_db
        b = sl.synth_sinr(sl.SinrModel.URBAN, 500, rng_stream(2, 7)).sinr_db
        assert np.array_equal(a, b)


class TestTraceIo:
    def test_basic_parse(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("0.0\n10.0\n")
        sc = sl.load_sinr_trace(str(p))
        assert np.array_equal(sc.sinr_db, [0.0, 10.0])
        assert sc.provenance == "file"

    def test_malformed_line_cites_line_number(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("0.0\n1.5\nabc\n")
        with pytest.raises(ValueError, match="line 3"):
            sl.load_sinr_trace(str(p))

    def test_empty_rejected(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("# only a comment\n")
        with pytest.raises(ValueError):
            sl.load_sinr_trace(str(p))

    def test_large_roundtrip(self, tmp_path):
        rng = rng_stream(3, 0)
        sc = sl.SinrScenario(np.round(rng.uniform(-20, 70, 1_000_000), 6),
                             "file")
        p = tmp_path / "big.txt"
        sl.save_sinr_trace(sc, str(p))
        back = sl.load_sinr_trace(str(p))
        assert np.array_equal(back.sinr_db, sc.sinr_db)

    def test_comments_allowed(self, tmp_path):
        p = tmp_path / "t.txt"
        p.write_text("# header\n-3.5\n# mid\n7.25\n")
        sc = sl.load_sinr_trace(str(p))
        assert np.array_equal(sc.sinr_db, [-3.5, 7.25])


class TestFormGroups:
    def test_identical_sinrs_one_level(self):
        sc = sl.SinrScenario(np.full(50, 9.0), "file")
        groups = sl.form_groups(sc, _table())
        # 9 dB floors to the 8 dB entry: of 2.0 -> K = 8
        assert all(g.overloading == 2.0 for g in groups)
        assert len(groups) == -(-50 // 8)
        assert sum(g.size for g in groups) == 50
        sizes = [g.size for g in groups]
        assert sizes.count(8) == 6 and sizes.count(2) == 1

    def test_below_grid_users_unscheduled(self):
        sc = sl.SinrScenario(np.array([-15.0, -10.0, 5.0]), "file")
        groups = sl.form_groups(sc, _table())
        assert sum(g.size for g in groups) == 1

    def test_members_share_level(self):
        sc = sl.SinrScenario(rng_stream(4, 0).uniform(-10, 20, 400), "file")
        groups = sl.form_groups(sc, _table())
        table_levels = {(e.overloading, e.code_rate)
                        for e in _table().entries}
        grid = np.array([e.snr_db for e in _table().entries])
        for g in groups:
            assert (g.overloading, g.code_rate) in table_levels
            for s in g.sinr_db:
                idx = int(np.searchsorted(grid, s, side="right")) - 1
                e = _table().entries[idx]
                assert (e.overloading, e.code_rate) == (g.overloading,
                                                        g.code_rate)


class TestCqi:
    def test_range_and_lookup(self):
        assert sl.cqi_lookup(-10.0) is None
        low = sl.cqi_lookup(-6.7)
        assert low == (Modulation.QPSK, 0.0762)
        top = sl.cqi_lookup(40.0)
        assert top == (Modulation.QAM64, 0.9258)
        assert len(sl.CQI_TABLE) == 15


class TestSimulateTti:
    def test_high_sinr_group_hits_ceiling(self):
        # full-rank group (K = L): at 45 dB every block must get through
        groups = [sl.UserGroup(1.0, 0.5, tuple([45.0] * 4))]
        cfg = sl.ScheduleConfig(seed=5)
        rate = sl.simulate_tti(groups, SchemeKind.MUSA, cfg,
                               rng_stream(5, 99), 0)
        info = int(2 * 336 * 0.5) - 16
        assert rate == pytest.approx(4 * info)

    def test_infeasible_rate_gives_zero(self):
        groups = [sl.UserGroup(1.5, 0.02, tuple([0.0] * 6))]
        cfg = sl.ScheduleConfig(seed=5)
        assert sl.simulate_tti(groups, SchemeKind.MUSA, cfg,
                               rng_stream(5, 1), 0) == 0.0

    def test_empty_groups_rejected(self):
        with pytest.raises(ValueError):
            sl.simulate_tti([], SchemeKind.MUSA, sl.ScheduleConfig(),
                            rng_stream(0, 0), 0)

    def test_scheduler_uniform_over_groups(self):
        # the per-TTI pick stream, exactly as run_full_buffer derives it
        counts = np.zeros(5)
        n = 10_000
        for t in range(n):
            pick = sl._tti_stream(0, t, 0)
            counts[pick.integers(5)] += 1
        expected = n / 5
        sigma = np.sqrt(n * 0.2 * 0.8)
        assert np.all(np.abs(counts - expected) <= 3 * sigma)

    def test_resource_conservation(self):
        groups = [sl.UserGroup(3.0, 0.8, tuple([30.0] * 12))]
        cfg = sl.ScheduleConfig(seed=6)
        rate = sl.simulate_tti(groups, SchemeKind.MUSA, cfg,
                               rng_stream(6, 0), 0)
        assert rate <= sl.TTI_RE * 2 * 3.0  # bits <= REs x peak bits/RE


class TestThroughputCdf:
    def test_constant_samples(self):
        pct, s, c = sl.throughput_cdf(np.full(2000, 5.0))
        assert pct == {10: 5.0, 50: 5.0, 90: 5.0}

    def test_nearest_rank_definition(self):
        pct, _, _ = sl.throughput_cdf(np.arange(1, 101))
        assert pct[10] == 10
        assert pct[50] == 50
        assert pct[90] == 90

    def test_cdf_monotone_and_normalized(self):
        pct, s, c = sl.throughput_cdf(rng_stream(7, 0).random(999))
        assert c[-1] == pytest.approx(1.0)
        assert np.all(np.diff(s) >= 0)
        assert np.all(np.diff(c) > 0)


class TestPacketHelpers:
    def test_nr_units_roundtrip(self):
        # 160-bit packet at rate 0.5 -> 176 payload bits, 352 coded, 176 units
        assert sl.nr_packet_units(160, 0.5) == 176

    def test_full_rb_packet_gain_equals_overloading(self):
        """SE-matched scenario: NR serves of x the OMA packet count."""
        n = 4
        for of, cr in ((1.5, 0.2), (2.0, 0.4), (3.0, 0.2)):
            k = round(of * n)
            # OMA QPSK at rate cr fills one RB with this packet
            p_bits = int(sl.RE_PER_RB * 2 * cr) - 16
            units = sl.nr_packet_units(p_bits, cr)
            occasions_per_tti = (sl.TTI_RE // n) / units
            nr_packets = occasions_per_tti * k
            oma_packets = sl.RBS_PER_GROUP
            assert nr_packets / oma_packets == pytest.approx(of, rel=0.02)

    def test_oma_rb_need(self):
        assert sl.oma_packet_rbs(160, Modulation.QPSK, 0.5) == 2
        assert sl.oma_packet_rbs(1600, Modulation.QAM64, 0.9258) == 2


class TestFullBuffer:
    def test_thread_determinism_and_shape(self):
        sc = sl.SinrScenario(rng_stream(8, 0).uniform(-5, 18, 120), "file")
        cfg = sl.ScheduleConfig(seed=11)
        a = sl.run_full_buffer(sc, SchemeKind.MUSA, _table(), cfg, 40,
                               threads=1)
        b = sl.run_full_buffer(sc, SchemeKind.MUSA, _table(), cfg, 40,
                               threads=2)
        assert a.shape == (40,)
        assert np.array_equal(a, b)

    def test_oma_runs_without_table(self):
        sc = sl.SinrScenario(rng_stream(8, 1).uniform(0, 25, 60), "file")
        cfg = sl.ScheduleConfig(seed=12)
        rates = sl.run_full_buffer(sc, SchemeKind.OMA, None, cfg, 20,
                                   threads=1)
        assert rates.shape == (20,)
        assert np.all(rates >= 0)
