import numpy as np
import pytest

from noma_bench import linklevel as ll
from noma_bench.channel import ChannelModel
from noma_bench.core import SchemeConfig, SchemeKind


def _cfg(scheme=SchemeKind.OMA, k=6, cr=0.2, seed=42):
    return SchemeConfig(scheme=scheme, num_users=k, code_rate=cr, seed=seed)


class TestRunBler:
    def test_total_noise_gives_bler_one(self):
        curve = ll.run_bler(_cfg(), [-40.0], max_blocks=120, min_errors=200,
                            threads=1)
        assert curve.points[0].bler == 1.0

    def test_monotone_in_snr(self):
        curve = ll.run_bler(_cfg(), [2.0, 6.0], max_blocks=400,
                            min_errors=60, threads=1)
        assert curve.points[0].bler > curve.points[1].bler

    def test_stops_on_min_errors(self):
        curve = ll.run_bler(_cfg(), [-40.0], max_blocks=5000, min_errors=50,
                            threads=1)
        p = curve.points[0]
        assert p.errors >= 50
        assert p.blocks < 5000

    def test_thread_count_does_not_change_results(self):
        a = ll.run_bler(_cfg(), [2.0, 4.0], max_blocks=600, min_errors=60,
                        threads=1)
        b = ll.run_bler(_cfg(), [2.0, 4.0], max_blocks=600, min_errors=60,
                        threads=2)
        assert a.points == b.points

    def test_estimator_precision_rule(self):
        # stopping at 100 errors bounds the relative standard error by 10 %
        errors = 100
        rel_se = np.sqrt((1 - 0.1) / errors)
        assert rel_se <= 0.10

    def test_common_channel_draws_across_schemes(self):
        from noma_bench.core import (STREAM_CHANNEL, drop_stream)
        from noma_bench.channel import draw_channel
        a = draw_channel(ChannelModel.RAYLEIGH_BLOCK, 6, 4, 10,
                         drop_stream(42, 3, STREAM_CHANNEL))
        b = draw_channel(ChannelModel.RAYLEIGH_BLOCK, 6, 4, 10,
                         drop_stream(42, 3, STREAM_CHANNEL))
        assert np.array_equal(a, b)


class TestMcsTable:
    def test_low_snr_no_transmission(self):
        table = ll.build_mcs_table(
            SchemeKind.MUSA, [-25.0], of_set=(1.5,), cr_set=(0.2, 0.4),
            base=_cfg(SchemeKind.MUSA), max_blocks=150, min_errors=30,
            threads=1)
        e = table.entries[0]
        assert e.sum_se == 0.0
        assert e.overloading == 0.0

    def test_selection_maximizes_actual_se(self):
        table = ll.build_mcs_table(
            SchemeKind.MUSA, [14.0], of_set=(1.5, 2.0),
            cr_set=(0.1, 0.3, 0.5), base=_cfg(SchemeKind.MUSA),
            max_blocks=250, min_errors=40, threads=1)
        e = table.entries[0]
        assert e.sum_se > 0
        assert e.sum_se <= e.overloading * 2 * e.code_rate

    def test_envelope_monotone_in_snr(self):
        table = ll.build_mcs_table(
            SchemeKind.MUSA, [0.0, 8.0, 16.0], of_set=(1.5, 2.0),
            cr_set=(0.1, 0.3, 0.5), base=_cfg(SchemeKind.MUSA),
            max_blocks=250, min_errors=40, threads=1)
        ses = [e.sum_se for e in table.entries]
        assert ses == sorted(ses)


class TestCsvOutput:
    def test_bler_csv_layout(self, tmp_path):
        curve = ll.run_bler(_cfg(), [0.0], max_blocks=100, min_errors=10,
                            threads=1)
        path = tmp_path / "bler.csv"
        ll.write_bler_csv(str(path), [curve], "config_hash=deadbeef seed=42")
        lines = path.read_text().splitlines()
        assert lines[0] == "scheme,of,cr,snr_db,bler,blocks,errors"
        assert lines[-1].startswith("# config_hash=")
        fields = lines[1].split(",")
        assert fields[0] == "oma"
        assert float(fields[1]) == 1.5

    def test_mcs_csv_layout(self, tmp_path):
        table = ll.McsTable(SchemeKind.SCMA, (ll.McsEntry(0.0, 1.5, 0.2, 0.55),))
        path = tmp_path / "mcs.csv"
        ll.write_mcs_csv(str(path), [table])
        lines = path.read_text().splitlines()
        assert lines[0] == "scheme,snr_db,of,cr,sum_se"
        assert lines[1] == "scma,0,1.5,0.2,0.55"
