"""Codebook-based multiple access: sparse codebooks and max-log MPA detection.

Codebooks place a rotated QPSK mother constellation on d_v = 2 of the N
resource elements per spreading unit; the zero positions follow the
user's column of the sparsity pattern matrix F.  Detection runs log-domain
max-log message passing on the unit's bipartite factor graph.

Users that share an identical sparsity pattern (which only happens via
pattern reuse above C(N,2) users) are merged into one joint variable node
whose alphabet is the product of the members' codeword sets.  This keeps
the factor graph simple (no parallel edges), makes detection exact for an
isolated reused pair, and removes the reuse-induced short cycles.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from . import _kernels
from .core import Modulation
from .modem import constellation

__all__ = ["ScmaCodebook", "FactorGraph", "build_codebook", "scma_encode",
           "mpa_detect", "save_codebook", "load_codebook"]

D_V = 2


@dataclass(frozen=True)
class ScmaCodebook:
    """Per-user sparse codeword tables plus the pattern matrix F."""

    spreading_factor: int          # N: codeword dimension
    num_users: int                 # K
    num_codewords: int             # M codewords per user
    pattern: np.ndarray            # F: (N, K) 0/1, d_v ones per column
    codewords: np.ndarray          # (K, M, N) complex, unit energy per user

    @property
    def bits_per_codeword(self) -> int:
        return self.num_codewords.bit_length() - 1

    def occupied(self, user: int) -> np.ndarray:
        return np.flatnonzero(self.pattern[:, user])


class FactorGraph:
    """Clustered bipartite graph between variable nodes and resources.

    Variable nodes are groups of users with identical F columns, joint
    alphabet M^len(group); the edge set matches the non-zeros of the
    deduplicated pattern matrix.
    """

    def __init__(self, codebook: ScmaCodebook):
        n, k_users = codebook.pattern.shape
        m = codebook.num_codewords
        groups: dict[tuple[int, ...], list[int]] = {}
        for k in range(k_users):
            key = tuple(codebook.occupied(k))
            groups.setdefault(key, []).append(k)
        # deterministic order: by first member index
        items = sorted(groups.items(), key=lambda kv: kv[1][0])
        self.members = [tuple(v) for _, v in items]
        self.cluster_res = [np.array(key) for key, _ in items]
        self.cluster_of_user = {}
        for ci, mem in enumerate(self.members):
            for pos, u in enumerate(mem):
                self.cluster_of_user[u] = (ci, pos)
        n_clusters = len(self.members)
        self.alph = np.array([m ** len(mem) for mem in self.members], dtype=np.int64)

        max_df = 0
        res_clusters: list[list[int]] = [[] for _ in range(n)]
        for ci, res in enumerate(self.cluster_res):
            for r in res:
                res_clusters[r].append(ci)
        max_df = max((len(c) for c in res_clusters), default=0)
        self.adj = np.full((n, max(max_df, 1)), -1, dtype=np.int64)
        self.adj_len = np.zeros(n, dtype=np.int64)
        for r, cls in enumerate(res_clusters):
            self.adj_len[r] = len(cls)
            for s, ci in enumerate(cls):
                self.adj[r, s] = ci
        self.edge_of = np.full((n_clusters, 2), -1, dtype=np.int64)
        for ci, res in enumerate(self.cluster_res):
            for j, r in enumerate(res[:2]):
                self.edge_of[ci, j] = r

        self.n_combo = np.ones(n, dtype=np.int64)
        for r in range(n):
            for s in range(self.adj_len[r]):
                self.n_combo[r] *= self.alph[self.adj[r, s]]
        self.n_combo[self.adj_len == 0] = 0
        max_combo = max(int(self.n_combo.max()), 1)
        self.digit = np.zeros((n, max(max_df, 1), max_combo), dtype=np.int64)
        for r in range(n):
            c = np.arange(int(self.n_combo[r]))
            for s in range(self.adj_len[r]):
                a = int(self.alph[self.adj[r, s]])
                self.digit[r, s, : c.size] = c % a
                c = c // a
        self.num_codewords = m


def _reuse_layout(num_users: int, patterns: list[tuple[int, ...]]) -> tuple[list[int], int]:
    """(pattern index per user, number of reuse rounds)."""
    p = len(patterns)
    rounds = -(-num_users // p)
    return [k % p for k in range(num_users)], rounds


def build_codebook(spreading_factor: int, num_users: int, num_codewords: int = 4,
                   seed: int = 0, patterns: list[tuple[int, ...]] | None = None
                   ) -> ScmaCodebook:
    """Construct per-user sparse codebooks over a QPSK mother constellation.

    Default patterns are the 2-subsets of the N resource rows in
    lexicographic order; beyond C(N,2) users the patterns repeat
    round-robin and each reuse round r applies an extra phase
    exp(2j pi r / R) on top of the per-user rotation k pi / (2K).
    An explicit ``patterns`` list overrides the default (pattern
    subselection), assigned round-robin as well.
    """
    n, k_users, m = spreading_factor, num_users, num_codewords
    if n < 2:
        raise ValueError("spreading_factor must be >= 2")
    if m != 4:
        raise ValueError("only M = 4 (2-bit codewords) is supported")
    if patterns is None:
        patterns = list(combinations(range(n), D_V))[: min(k_users, _n_patterns(n))]
    else:
        patterns = [tuple(sorted(p)) for p in patterns]
        for p in patterns:
            if len(p) != D_V or not all(0 <= r < n for r in p):
                raise ValueError(f"invalid pattern {p}")

    assign, rounds = _reuse_layout(k_users, patterns)
    qpsk = constellation(Modulation.QPSK).points
    pattern_mat = np.zeros((n, k_users), dtype=np.int8)
    codewords = np.zeros((k_users, m, n), dtype=complex)
    for k in range(k_users):
        rows = patterns[assign[k]]
        pattern_mat[list(rows), k] = 1
        r = k // len(patterns)
        rot = np.exp(1j * (k * np.pi / (2 * k_users) + 2 * np.pi * r / rounds))
        for cw in range(m):
            codewords[k, cw, list(rows)] = qpsk[cw] * rot / np.sqrt(D_V)
    return ScmaCodebook(n, k_users, m, pattern_mat, codewords)


def _n_patterns(n: int) -> int:
    return n * (n - 1) // 2


def scma_encode(user_bits: np.ndarray, codebook: ScmaCodebook,
                channels: np.ndarray) -> np.ndarray:
    """Superpose all users' codewords as seen by the receiver.

    user_bits: (K, n_coded) coded bits, identical length across users and
        divisible by log2(M).  channels: (T, K) per-unit gains.
    Returns the noiseless received grid (N, T).
    """
    k_users = codebook.num_users
    bits = np.asarray(user_bits, dtype=np.int64)
    if bits.shape[0] != k_users:
        raise ValueError("user_bits must have one row per user")
    bps = codebook.bits_per_codeword
    if bits.shape[1] % bps:
        raise ValueError("coded-bit count not divisible by bits per codeword")
    t_units = bits.shape[1] // bps
    if channels.shape != (t_units, k_users):
        raise ValueError("channel tensor shape mismatch")
    weights = 1 << np.arange(bps - 1, -1, -1)
    labels = bits.reshape(k_users, t_units, bps) @ weights  # (K, T)
    grid = np.zeros((codebook.spreading_factor, t_units), dtype=complex)
    for k in range(k_users):
        cw = codebook.codewords[k][labels[k]]        # (T, N)
        grid += (channels[:, k, None] * cw).T
    return grid


def mpa_detect(grid: np.ndarray, channels: np.ndarray, codebook: ScmaCodebook,
               noise_var: float, iterations: int = 8) -> np.ndarray:
    """Per-user per-coded-bit LLRs from max-log message passing.

    grid: (N, T) received samples; channels: (T, K).  Returns LLRs of
    shape (K, T * log2(M)), positive meaning bit 0.
    """
    if noise_var <= 0:
        raise ValueError("noise_var must be positive")
    graph = FactorGraph(codebook)
    n, t_units = grid.shape
    m = codebook.num_codewords
    bps = codebook.bits_per_codeword
    max_alph = int(graph.alph.max())
    max_df = graph.adj.shape[1]

    contrib = np.zeros((t_units, n, max_df, max_alph), dtype=complex)
    for r in range(n):
        for s in range(int(graph.adj_len[r])):
            ci = int(graph.adj[r, s])
            mem = graph.members[ci]
            a = int(graph.alph[ci])
            sym = np.arange(a)
            acc = np.zeros((t_units, a), dtype=complex)
            for pos, u in enumerate(mem):
                digits = (sym // (m ** pos)) % m
                acc += channels[:, u, None] * codebook.codewords[u][:, r][digits][None, :]
            contrib[:, r, s, :a] = acc

    post = _kernels.mpa_detect_full(
        np.ascontiguousarray(grid.T), contrib, graph.adj, graph.adj_len,
        graph.alph, graph.edge_of, graph.digit, graph.n_combo,
        float(noise_var), int(iterations))

    llrs = np.empty((codebook.num_users, t_units * bps))
    for u in range(codebook.num_users):
        ci, pos = graph.cluster_of_user[u]
        a = int(graph.alph[ci])
        joint = np.arange(a)
        own = (joint // (m ** pos)) % m
        pk = post[:, ci, :a]
        for b in range(bps):
            bit = (own >> (bps - 1 - b)) & 1
            l0 = pk[:, bit == 0].max(axis=1)
            l1 = pk[:, bit == 1].max(axis=1)
            llrs[u, b::bps] = l0 - l1
    return llrs


def save_codebook(codebook: ScmaCodebook, path: str) -> None:
    """Plain-text export: header, F row-major, then per-user codewords."""
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(f"{codebook.spreading_factor} {codebook.num_users} "
                 f"{codebook.num_codewords} {D_V}\n")
        for row in codebook.pattern:
            fh.write(" ".join(str(int(v)) for v in row) + "\n")
        for k in range(codebook.num_users):
            for cw in range(codebook.num_codewords):
                pairs = []
                for v in codebook.codewords[k, cw]:
                    pairs.append(f"{v.real:.9g} {v.imag:.9g}")
                fh.write(" ".join(pairs) + "\n")


def load_codebook(path: str) -> ScmaCodebook:
    with open(path, encoding="utf-8") as fh:
        tokens = fh.read().split()
    it = iter(tokens)
    n, k_users, m, d_v = (int(next(it)) for _ in range(4))
    if d_v != D_V:
        raise ValueError(f"unsupported codeword weight {d_v}")
    pattern = np.array([[int(next(it)) for _ in range(k_users)]
                        for _ in range(n)], dtype=np.int8)
    codewords = np.zeros((k_users, m, n), dtype=complex)
    for k in range(k_users):
        for cw in range(m):
            for r in range(n):
                re_part = float(next(it))
                im_part = float(next(it))
                codewords[k, cw, r] = re_part + 1j * im_part
    return ScmaCodebook(n, k_users, m, pattern, codewords)
