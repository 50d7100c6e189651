"""Parity between the compiled kernels and the NumPy fallback."""

import numpy as np
import pytest

from noma_bench import _kernels, fec, scma
from noma_bench._kernels import _py


def _rayleigh(rng, shape):
    return (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) \
        / np.sqrt(2)


requires_compiled = pytest.mark.skipif(
    _kernels.BACKEND != "compiled",
    reason="compiled extension not built; fallback already under test")


@requires_compiled
class TestBackendParity:
    def test_bcjr_parity(self):
        from noma_bench._kernels import _fast
        rng = np.random.default_rng(0)
        next_state, out_bits = fec._trellis()
        for k in (16, 144):
            payload = rng.integers(0, 2, k).astype(np.uint8)
            coded = fec.fec_encode(payload, 1 / 3)
            llr = 2.0 * (1 - 2 * coded.astype(float)) \
                + rng.normal(0, 1.2, coded.size)
            plan = fec.rate_match_plan(k, 1 / 3)
            lm = np.ascontiguousarray(plan.combine_llr(llr))
            ap = np.ascontiguousarray(rng.normal(0, 0.4, k))
            p1, c1 = _py.bcjr_siso(lm, ap, next_state, out_bits, k)
            p2, c2 = _fast.bcjr_siso(lm, ap, next_state, out_bits, k)
            assert np.abs(p1 - p2).max() < 1e-9
            assert np.abs(c1 - c2).max() < 1e-9

    @pytest.mark.parametrize("k_users", [1, 6, 8, 12])
    def test_mpa_parity(self, k_users):
        rng = np.random.default_rng(k_users)
        cb = scma.build_codebook(4, k_users)
        t = 24
        h = _rayleigh(rng, (t, k_users))
        bits = rng.integers(0, 2, (k_users, 2 * t))
        grid = scma.scma_encode(bits, cb, h)
        noisy = grid + _rayleigh(rng, grid.shape) * np.sqrt(0.4)

        import os
        import importlib
        llr_fast = scma.mpa_detect(noisy, h, cb, 0.4, 8)
        os.environ["NOMA_BENCH_PURE_PYTHON"] = "1"
        try:
            importlib.reload(_kernels)
            llr_py = scma.mpa_detect(noisy, h, cb, 0.4, 8)
        finally:
            del os.environ["NOMA_BENCH_PURE_PYTHON"]
            importlib.reload(_kernels)
        assert np.abs(llr_fast - llr_py).max() < 1e-9


def test_backend_reports_identity():
    assert _kernels.BACKEND in ("compiled", "python")
