"""noma-bench: fair link- and system-level comparison of uplink NOMA schemes.

Implements codebook-based (SCMA + max-log MPA), sequence-based
(MUSA + MMSE-SIC) and interleaver-based (IDMA + ESE-PIC) multiple access
together with a spectral-efficiency-matched orthogonal baseline, plus the
Monte-Carlo harnesses that produce BLER curves, MCS/sum-SE envelopes and
system-level throughput distributions as CSV artifacts.
"""

from ._kernels import BACKEND as KERNEL_BACKEND
from .core import Modulation, SchemeConfig, SchemeKind, overloading_factor

__version__ = "0.1.0"

__all__ = [
    "KERNEL_BACKEND",
    "Modulation",
    "SchemeConfig",
    "SchemeKind",
    "overloading_factor",
    "__version__",
]
