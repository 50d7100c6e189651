"""Pure NumPy implementations of the hot kernels.

These are the reference implementations: the compiled extension in
``_fast.pyx`` must produce the same numbers (up to float summation
order).  Selected automatically at import when the extension is missing
or when ``NOMA_BENCH_PURE_PYTHON=1``.
"""

from __future__ import annotations

import numpy as np

NEG_INF = -1e30


def bcjr_siso(llr_mother: np.ndarray, apriori: np.ndarray,
              next_state: np.ndarray, out_bits: np.ndarray,
              n_payload: int) -> tuple[np.ndarray, np.ndarray]:
    """Max-log BCJR over a zero-tail terminated rate-1/3 trellis.

    llr_mother: (3*(n_payload+mem),) channel LLRs in mother-code order,
        positive means bit 0.
    apriori: (n_payload,) prior LLRs on the payload bits.
    next_state: (2, S) next state for input bit b from state s.
    out_bits: (2, S, 3) encoder output bits for (input, state).
    Returns (payload posterior LLRs, coded-bit posterior LLRs) where the
    coded posteriors are in mother-code order, length 3*(n_payload+mem).
    """
    n_out = out_bits.shape[2]
    n_states = next_state.shape[1]
    n_steps = llr_mother.size // n_out

    llr = llr_mother.reshape(n_steps, n_out)
    # branch metric for (step, input bit, state): sum of +-llr/2 over the
    # output bits plus the +-apriori/2 input term
    sgn = 1.0 - 2.0 * out_bits  # (2, S, n_out)
    gamma = 0.5 * np.einsum("tj,bsj->tbs", llr, sgn)
    half_ap = np.zeros(n_steps)
    half_ap[:n_payload] = 0.5 * apriori
    gamma[:, 0, :] += half_ap[:, None]
    gamma[:, 1, :] -= half_ap[:, None]

    alpha = np.full((n_steps + 1, n_states), NEG_INF)
    alpha[0, 0] = 0.0
    for t in range(n_steps):
        a_next = np.full(n_states, NEG_INF)
        n_in = 2 if t < n_payload else 1  # zero tail forces the flush input
        for b in range(n_in):
            np.maximum.at(a_next, next_state[b], alpha[t] + gamma[t, b])
        m = a_next.max()
        alpha[t + 1] = a_next - (m if m > NEG_INF / 2 else 0.0)

    beta = np.full(n_states, NEG_INF)
    beta_next = np.empty(n_states)
    beta[0] = 0.0
    post_payload = np.zeros(n_payload)
    post_coded = np.zeros(n_steps * n_out)
    for t in range(n_steps - 1, -1, -1):
        n_in = 2 if t < n_payload else 1
        metric = np.full((2, n_states), NEG_INF)
        for b in range(n_in):
            metric[b] = alpha[t] + gamma[t, b] + beta[next_state[b]]
        if t < n_payload:
            post_payload[t] = metric[0].max() - metric[1].max()
        for j in range(n_out):
            m0 = np.where(out_bits[:n_in, :, j] == 0, metric[:n_in], NEG_INF).max()
            m1 = np.where(out_bits[:n_in, :, j] == 1, metric[:n_in], NEG_INF).max()
            post_coded[t * n_out + j] = m0 - m1
        b_prev = np.full(n_states, NEG_INF)
        for b in range(n_in):
            np.maximum(b_prev, gamma[t, b] + beta[next_state[b]], out=b_prev)
        m = b_prev.max()
        beta = b_prev - (m if m > NEG_INF / 2 else 0.0)

    return post_payload, post_coded


def mpa_detect_full(y: np.ndarray, contrib: np.ndarray, adj: np.ndarray,
                    adj_len: np.ndarray, alph: np.ndarray,
                    edge_of: np.ndarray, digit: np.ndarray,
                    n_combo: np.ndarray, noise_var: float,
                    iterations: int) -> np.ndarray:
    """Max-log message passing over a batch of spreading units.

    y: (T, N) received samples per unit and resource element.
    contrib: (T, N, max_df, max_alph) complex channel-weighted codeword
        value of each adjacent cluster symbol at that resource.
    adj: (N, max_df) cluster index adjacent to each resource, -1 padded.
    adj_len: (N,) number of clusters per resource.
    alph: (n_clusters,) alphabet size per cluster.
    edge_of: (n_clusters, 2) resource indices of each cluster's edges
        (second column -1 when a cluster has a single edge).
    digit: (N, max_df, max_combo) mixed-radix decomposition of the joint
        combo index per resource (first slot = fastest digit).
    n_combo: (N,) number of joint combos per resource.
    Returns posteriors (T, n_clusters, max_alph), NEG_INF padded.
    """
    T, N = y.shape
    n_clusters = alph.size
    max_alph = int(alph.max())
    max_df = adj.shape[1]

    # channel metrics -|y - sum contrib|^2 / sigma^2, built once
    metric = np.full((T, N, int(n_combo.max())), NEG_INF)
    for n in range(N):
        d = int(adj_len[n])
        total = int(n_combo[n])
        if total == 0:
            continue
        s_sum = np.zeros((T, total), dtype=complex)
        for s in range(d):
            s_sum += contrib[:, n, s, :][:, digit[n, s, :total]]
        metric[:, n, :total] = -np.abs(y[:, n, None] - s_sum) ** 2 / noise_var

    R = np.zeros((T, N, max_df, max_alph))
    Q = np.zeros((T, N, max_df, max_alph))

    for _ in range(iterations):
        for n in range(N):
            d = int(adj_len[n])
            total = int(n_combo[n])
            if total == 0:
                continue
            qsum = np.zeros((T, total))
            for s in range(d):
                qsum += Q[:, n, s, :][:, digit[n, s, :total]]
            base = metric[:, n, :total] + qsum
            for s in range(d):
                own = Q[:, n, s, :][:, digit[n, s, :total]]
                contrib_s = base - own
                a = int(alph[adj[n, s]])
                out = np.full((T, max_alph), NEG_INF)
                dig = digit[n, s, :total]
                for m in range(a):
                    out[:, m] = contrib_s[:, dig == m].max(axis=1)
                out -= out[:, :a].max(axis=1, keepdims=True)
                R[:, n, s, :] = out
        for k in range(n_clusters):
            e0, e1 = int(edge_of[k, 0]), int(edge_of[k, 1])
            s0 = _slot(adj, adj_len, e0, k)
            if e1 < 0:
                Q[:, e0, s0, :] = 0.0
                continue
            s1 = _slot(adj, adj_len, e1, k)
            a = int(alph[k])
            q0 = R[:, e1, s1, :].copy()
            q1 = R[:, e0, s0, :].copy()
            q0 -= q0[:, :a].max(axis=1, keepdims=True)
            q1 -= q1[:, :a].max(axis=1, keepdims=True)
            Q[:, e0, s0, :] = q0
            Q[:, e1, s1, :] = q1

    post = np.full((T, n_clusters, max_alph), NEG_INF)
    for k in range(n_clusters):
        e0, e1 = int(edge_of[k, 0]), int(edge_of[k, 1])
        acc = R[:, e0, _slot(adj, adj_len, e0, k), :].copy()
        if e1 >= 0:
            acc = acc + R[:, e1, _slot(adj, adj_len, e1, k), :]
        a = int(alph[k])
        post[:, k, :a] = acc[:, :a]
    return post


def _slot(adj: np.ndarray, adj_len: np.ndarray, n: int, k: int) -> int:
    for s in range(int(adj_len[n])):
        if adj[n, s] == k:
            return s
    raise ValueError(f"cluster {k} not adjacent to resource {n}")
