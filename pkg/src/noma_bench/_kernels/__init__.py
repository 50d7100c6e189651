"""Hot numerical kernels with a compiled core and a NumPy fallback.

The Cython extension ``_fast`` is preferred when it was built; otherwise
the pure NumPy twin in ``_py`` is used.  Set ``NOMA_BENCH_PURE_PYTHON=1``
to force the fallback (used by the benchmark and the parity tests).
"""

from __future__ import annotations

import os

from . import _py

BACKEND = "python"
bcjr_siso = _py.bcjr_siso
mpa_detect_full = _py.mpa_detect_full

if os.environ.get("NOMA_BENCH_PURE_PYTHON", "0") != "1":
    try:
        from . import _fast  # type: ignore[attr-defined]

        BACKEND = "compiled"
        bcjr_siso = _fast.bcjr_siso
        mpa_detect_full = _fast.mpa_detect_full
    except ImportError:
        pass

__all__ = ["BACKEND", "bcjr_siso", "mpa_detect_full", "_py"]
