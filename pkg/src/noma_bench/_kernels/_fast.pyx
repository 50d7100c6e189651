# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled twins of the NumPy kernels in _py.py.

Same contracts, same outputs (up to float summation order); see _py.py
for the documented reference semantics.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

DEF NEG_INF = -1e30


def bcjr_siso(double[::1] llr_mother, double[::1] apriori,
              next_state_arr, out_bits_arr, Py_ssize_t n_payload):
    cdef int[:, ::1] next_state = np.ascontiguousarray(next_state_arr, dtype=np.int32)
    cdef signed char[:, :, ::1] out_bits = np.ascontiguousarray(out_bits_arr, dtype=np.int8)
    cdef Py_ssize_t n_out = out_bits.shape[2]
    cdef Py_ssize_t n_states = next_state.shape[1]
    cdef Py_ssize_t n_steps = llr_mother.shape[0] // n_out
    cdef Py_ssize_t t, s, b, j, ns, n_in

    post_payload_arr = np.zeros(n_payload)
    post_coded_arr = np.zeros(n_steps * n_out)
    cdef double[::1] post_payload = post_payload_arr
    cdef double[::1] post_coded = post_coded_arr

    alpha_arr = np.full((n_steps + 1, n_states), NEG_INF)
    cdef double[:, ::1] alpha = alpha_arr
    cdef double[::1] beta = np.full(n_states, NEG_INF)
    cdef double[::1] beta_prev = np.empty(n_states)
    # gamma half-metrics per (step, input): built on the fly
    cdef double g0, g1, half_ap, m, cand, m0, m1, met0, met1
    cdef double[:, ::1] gamma = np.empty((2, n_states))

    alpha[0, 0] = 0.0
    for t in range(n_steps):
        n_in = 2 if t < n_payload else 1
        half_ap = 0.5 * apriori[t] if t < n_payload else 0.0
        for b in range(n_in):
            for s in range(n_states):
                g0 = half_ap if b == 0 else -half_ap
                for j in range(n_out):
                    if out_bits[b, s, j] == 0:
                        g0 += 0.5 * llr_mother[t * n_out + j]
                    else:
                        g0 -= 0.5 * llr_mother[t * n_out + j]
                gamma[b, s] = g0
        for s in range(n_states):
            alpha[t + 1, s] = NEG_INF
        for b in range(n_in):
            for s in range(n_states):
                if alpha[t, s] <= NEG_INF / 2:
                    continue
                ns = next_state[b, s]
                cand = alpha[t, s] + gamma[b, s]
                if cand > alpha[t + 1, ns]:
                    alpha[t + 1, ns] = cand
        m = NEG_INF
        for s in range(n_states):
            if alpha[t + 1, s] > m:
                m = alpha[t + 1, s]
        if m > NEG_INF / 2:
            for s in range(n_states):
                alpha[t + 1, s] -= m

    for s in range(n_states):
        beta[s] = NEG_INF
    beta[0] = 0.0
    for t in range(n_steps - 1, -1, -1):
        n_in = 2 if t < n_payload else 1
        half_ap = 0.5 * apriori[t] if t < n_payload else 0.0
        for b in range(n_in):
            for s in range(n_states):
                g0 = half_ap if b == 0 else -half_ap
                for j in range(n_out):
                    if out_bits[b, s, j] == 0:
                        g0 += 0.5 * llr_mother[t * n_out + j]
                    else:
                        g0 -= 0.5 * llr_mother[t * n_out + j]
                gamma[b, s] = g0
        met0 = NEG_INF
        met1 = NEG_INF
        for j in range(n_out):
            post_coded[t * n_out + j] = 0.0
        # posteriors over (input, state) transition metrics
        for b in range(n_in):
            for s in range(n_states):
                cand = alpha[t, s] + gamma[b, s] + beta[next_state[b, s]]
                if b == 0:
                    if cand > met0:
                        met0 = cand
                else:
                    if cand > met1:
                        met1 = cand
        if t < n_payload:
            post_payload[t] = met0 - met1
        for j in range(n_out):
            m0 = NEG_INF
            m1 = NEG_INF
            for b in range(n_in):
                for s in range(n_states):
                    cand = alpha[t, s] + gamma[b, s] + beta[next_state[b, s]]
                    if out_bits[b, s, j] == 0:
                        if cand > m0:
                            m0 = cand
                    else:
                        if cand > m1:
                            m1 = cand
            post_coded[t * n_out + j] = m0 - m1
        for s in range(n_states):
            beta_prev[s] = NEG_INF
        for b in range(n_in):
            for s in range(n_states):
                cand = gamma[b, s] + beta[next_state[b, s]]
                if cand > beta_prev[s]:
                    beta_prev[s] = cand
        m = NEG_INF
        for s in range(n_states):
            if beta_prev[s] > m:
                m = beta_prev[s]
        for s in range(n_states):
            beta[s] = beta_prev[s] - (m if m > NEG_INF / 2 else 0.0)

    return post_payload_arr, post_coded_arr


def mpa_detect_full(complex[:, ::1] y, complex[:, :, :, ::1] contrib,
                    adj_arr, adj_len_arr, alph_arr, edge_of_arr,
                    digit_arr, n_combo_arr, double noise_var,
                    Py_ssize_t iterations):
    # Unit-major layout: messages and metrics keep the unit axis (length T)
    # innermost so every per-combo update is a contiguous vector sweep.
    cdef long[:, ::1] adj = np.ascontiguousarray(adj_arr, dtype=np.int64)
    cdef long[::1] adj_len = np.ascontiguousarray(adj_len_arr, dtype=np.int64)
    cdef long[::1] alph = np.ascontiguousarray(alph_arr, dtype=np.int64)
    cdef long[:, ::1] edge_of = np.ascontiguousarray(edge_of_arr, dtype=np.int64)
    cdef long[:, :, ::1] digit = np.ascontiguousarray(digit_arr, dtype=np.int64)
    cdef long[::1] n_combo = np.ascontiguousarray(n_combo_arr, dtype=np.int64)

    cdef Py_ssize_t T = y.shape[0]
    cdef Py_ssize_t N = y.shape[1]
    cdef Py_ssize_t n_clusters = alph.shape[0]
    cdef Py_ssize_t max_df = adj.shape[1]
    cdef Py_ssize_t max_alph = 0
    cdef Py_ssize_t max_combo = 0
    cdef Py_ssize_t k, n, s, t, c, it, d, total, a, mm, e0, e1, s0, s1
    for k in range(n_clusters):
        if alph[k] > max_alph:
            max_alph = alph[k]
    for n in range(N):
        if n_combo[n] > max_combo:
            max_combo = n_combo[n]

    # slot of cluster k at resource n (-1 when not adjacent)
    slot_arr = np.full((N, n_clusters), -1, dtype=np.int64)
    cdef long[:, ::1] slot = slot_arr
    for n in range(N):
        for s in range(adj_len[n]):
            slot[n, adj[n, s]] = s

    # channel-weighted cluster contributions, resource-major
    cdef double[:, :, :, ::1] cre = np.zeros((N, max_df, max_alph, T))
    cdef double[:, :, :, ::1] cim = np.zeros((N, max_df, max_alph, T))
    for n in range(N):
        for s in range(adj_len[n]):
            a = alph[adj[n, s]]
            for mm in range(a):
                for t in range(T):
                    cre[n, s, mm, t] = contrib[t, n, s, mm].real
                    cim[n, s, mm, t] = contrib[t, n, s, mm].imag

    metric_arr = np.empty((N, max_combo, T))  # padding beyond n_combo[n] never read
    cdef double[:, :, ::1] metric = metric_arr
    cdef double dre, dim, m, q
    cdef double inv_nv = 1.0 / noise_var
    cdef Py_ssize_t ds, c0, c1, c2, a0, a1, a2, base_c
    cdef double[::1] yre = np.empty(T)
    cdef double[::1] yim = np.empty(T)
    cdef double[::1] t2re = np.empty(T)
    cdef double[::1] t2im = np.empty(T)
    cdef double[::1] t1re = np.empty(T)
    cdef double[::1] t1im = np.empty(T)
    for n in range(N):
        d = adj_len[n]
        total = n_combo[n]
        for t in range(T):
            yre[t] = y[t, n].real
            yim[t] = y[t, n].imag
        if d == 3:
            a0 = alph[adj[n, 0]]
            a1 = alph[adj[n, 1]]
            a2 = alph[adj[n, 2]]
            for c2 in range(a2):
                for t in range(T):
                    t2re[t] = yre[t] - cre[n, 2, c2, t]
                    t2im[t] = yim[t] - cim[n, 2, c2, t]
                for c1 in range(a1):
                    for t in range(T):
                        t1re[t] = t2re[t] - cre[n, 1, c1, t]
                        t1im[t] = t2im[t] - cim[n, 1, c1, t]
                    base_c = a0 * (c1 + a1 * c2)
                    for c0 in range(a0):
                        for t in range(T):
                            dre = t1re[t] - cre[n, 0, c0, t]
                            dim = t1im[t] - cim[n, 0, c0, t]
                            metric[n, base_c + c0, t] = -(dre * dre + dim * dim) * inv_nv
        else:
            for c in range(total):
                for t in range(T):
                    dre = yre[t]
                    dim = yim[t]
                    for s in range(d):
                        ds = digit[n, s, c]
                        dre -= cre[n, s, ds, t]
                        dim -= cim[n, s, ds, t]
                    metric[n, c, t] = -(dre * dre + dim * dim) * inv_nv

    cdef double[:, :, :, ::1] R = np.zeros((N, max_df, max_alph, T))
    cdef double[:, :, :, ::1] Q = np.zeros((N, max_df, max_alph, T))
    cdef double[:, :, ::1] W = np.empty((max_df, max_alph, T))
    cdef double[::1] tmp = np.empty(T)
    cdef double cand

    cdef double[::1] pre12 = np.empty(T)
    cdef double[::1] acc12 = np.empty(T)
    cdef double u, v, mt

    for it in range(iterations):
        for n in range(N):
            d = adj_len[n]
            total = n_combo[n]
            if total == 0:
                continue
            for s in range(d):
                a = alph[adj[n, s]]
                for mm in range(a):
                    for t in range(T):
                        W[s, mm, t] = NEG_INF
            if d == 3:
                # extrinsic maxima via shared partial sums:
                #   W0[c0] = max over (c1,c2) of metric + Q1 + Q2
                #   W1[c1] = max over (c0,c2) of metric + Q0 + Q2
                #   W2[c2] = max over (c0,c1) of metric + Q0 + Q1
                a0 = alph[adj[n, 0]]
                a1 = alph[adj[n, 1]]
                a2 = alph[adj[n, 2]]
                for c2 in range(a2):
                    for c1 in range(a1):
                        for t in range(T):
                            pre12[t] = Q[n, 1, c1, t] + Q[n, 2, c2, t]
                            acc12[t] = NEG_INF
                        base_c = a0 * (c1 + a1 * c2)
                        for c0 in range(a0):
                            for t in range(T):
                                mt = metric[n, base_c + c0, t]
                                u = mt + pre12[t]
                                v = mt + Q[n, 0, c0, t]
                                W[0, c0, t] = u if u > W[0, c0, t] else W[0, c0, t]
                                acc12[t] = v if v > acc12[t] else acc12[t]
                        for t in range(T):
                            u = acc12[t] + Q[n, 2, c2, t]
                            v = acc12[t] + Q[n, 1, c1, t]
                            W[1, c1, t] = u if u > W[1, c1, t] else W[1, c1, t]
                            W[2, c2, t] = v if v > W[2, c2, t] else W[2, c2, t]
            else:
                for c in range(total):
                    for t in range(T):
                        tmp[t] = metric[n, c, t]
                    for s in range(d):
                        ds = digit[n, s, c]
                        for t in range(T):
                            tmp[t] += Q[n, s, ds, t]
                    for s in range(d):
                        ds = digit[n, s, c]
                        for t in range(T):
                            cand = tmp[t] - Q[n, s, ds, t]
                            if cand > W[s, ds, t]:
                                W[s, ds, t] = cand
            for s in range(d):
                a = alph[adj[n, s]]
                for t in range(T):
                    m = NEG_INF
                    for mm in range(a):
                        if W[s, mm, t] > m:
                            m = W[s, mm, t]
                    for mm in range(a):
                        R[n, s, mm, t] = W[s, mm, t] - m
        for k in range(n_clusters):
            e0 = edge_of[k, 0]
            e1 = edge_of[k, 1]
            s0 = slot[e0, k]
            a = alph[k]
            if e1 < 0:
                for mm in range(a):
                    for t in range(T):
                        Q[e0, s0, mm, t] = 0.0
                continue
            s1 = slot[e1, k]
            for t in range(T):
                m = NEG_INF
                for mm in range(a):
                    if R[e1, s1, mm, t] > m:
                        m = R[e1, s1, mm, t]
                for mm in range(a):
                    Q[e0, s0, mm, t] = R[e1, s1, mm, t] - m
                m = NEG_INF
                for mm in range(a):
                    if R[e0, s0, mm, t] > m:
                        m = R[e0, s0, mm, t]
                for mm in range(a):
                    Q[e1, s1, mm, t] = R[e0, s0, mm, t] - m

    post_arr = np.full((T, n_clusters, max_alph), NEG_INF)
    cdef double[:, :, ::1] post = post_arr
    for k in range(n_clusters):
        e0 = edge_of[k, 0]
        e1 = edge_of[k, 1]
        s0 = slot[e0, k]
        a = alph[k]
        if e1 < 0:
            for t in range(T):
                for mm in range(a):
                    post[t, k, mm] = R[e0, s0, mm, t]
        else:
            s1 = slot[e1, k]
            for t in range(T):
                for mm in range(a):
                    post[t, k, mm] = R[e0, s0, mm, t] + R[e1, s1, mm, t]
    return post_arr
