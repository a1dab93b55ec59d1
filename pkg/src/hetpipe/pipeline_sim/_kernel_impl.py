"""Event-loop core shared by the compiled and pure-Python execution paths.

One function, array-in/array-out, no Python objects in the hot path, so the
identical source compiles under numba's nopython mode and also runs as plain
CPython. Both paths execute the same float64 operations in the same order,
which is what makes their outputs bit-identical.

Pipeline shape (stage indices):
    0 decoder -> reorder buffer -> 1 streammux -> 2 preprocess
      -> 3 detect -> 4 recognize -> 5 encode

Stages are pipelined servers: starting frame g on stage k occupies the
stage's resource for intv[g, k] (the initiation interval) while the frame
itself completes lat[g, k] later. comp[g, k] is the busy time charged to
the resource for power accounting. Queues in front of stages 2..5 are
bounded; a stage start reserves a slot in the next queue so a completed
frame always has somewhere to land. The decoder is fed per stream through
decode_next (decode order), and a per-stream reorder buffer releases frames
back in display order, stalling when the streammux input is full.
"""

import numpy as np


def simulate_events(arrival, decode_next, lat, intv, comp, res_tab,
                    n_streams, frames_per_stream, queue_cap, reorder_cap,
                    n_resources, horizon):
    n = arrival.shape[0]
    S = n_streams
    F = frames_per_stream
    INF = np.inf

    release_t = np.full(n, -1.0)
    comp_t = np.full((n, 6), -1.0)
    busy_work = np.zeros(n_resources)
    busy_intv = np.zeros(n_resources)

    next_free = np.zeros(n_resources)
    pending_poke = np.full(n_resources, INF)

    # Event heap ordered by (time, insertion sequence); kinds:
    # 0 arrival, 1 stage completion (frame, stage), 2 resource poke.
    ev_cap = 64 * n + 4096
    ev_t = np.empty(ev_cap)
    ev_seq = np.empty(ev_cap, np.int64)
    ev_kind = np.empty(ev_cap, np.int64)
    ev_a = np.empty(ev_cap, np.int64)
    ev_b = np.empty(ev_cap, np.int64)
    heap_n = np.zeros(1, np.int64)
    seq_n = np.zeros(1, np.int64)

    def ev_less(i, j):
        if ev_t[i] != ev_t[j]:
            return ev_t[i] < ev_t[j]
        return ev_seq[i] < ev_seq[j]

    def ev_swap(i, j):
        ev_t[i], ev_t[j] = ev_t[j], ev_t[i]
        ev_seq[i], ev_seq[j] = ev_seq[j], ev_seq[i]
        ev_kind[i], ev_kind[j] = ev_kind[j], ev_kind[i]
        ev_a[i], ev_a[j] = ev_a[j], ev_a[i]
        ev_b[i], ev_b[j] = ev_b[j], ev_b[i]

    def ev_push(t, kind, a, b):
        m = heap_n[0]
        if m >= ev_cap:
            raise RuntimeError("event heap capacity exceeded")
        ev_t[m] = t
        ev_seq[m] = seq_n[0]
        ev_kind[m] = kind
        ev_a[m] = a
        ev_b[m] = b
        seq_n[0] += 1
        heap_n[0] = m + 1
        i = m
        while i > 0:
            parent = (i - 1) // 2
            if ev_less(i, parent):
                ev_swap(i, parent)
                i = parent
            else:
                break

    def ev_pop():
        m = heap_n[0] - 1
        ev_swap(0, m)
        heap_n[0] = m
        i = 0
        while True:
            left = 2 * i + 1
            if left >= m:
                break
            child = left
            right = left + 1
            if right < m and ev_less(right, left):
                child = right
            if ev_less(child, i):
                ev_swap(i, child)
                i = child
            else:
                break
        return m  # popped entry now sits at index m

    def want_poke(r, t):
        if t < pending_poke[r]:
            pending_poke[r] = t
            ev_push(t, 2, r, 0)

    # Bounded FIFO queues feeding stages 2..5; q_occ counts waiting entries
    # plus slots reserved by frames still inside the upstream stage.
    q_buf = np.empty((4, n + 1), np.int64)
    q_head = np.zeros(4, np.int64)
    q_len = np.zeros(4, np.int64)
    q_occ = np.zeros(4, np.int64)
    ring = n + 1

    def q_push(j, g):
        q_buf[j, (q_head[j] + q_len[j]) % ring] = g
        q_len[j] += 1

    def q_take(j, idx):
        g = q_buf[j, (q_head[j] + idx) % ring]
        for i in range(idx, q_len[j] - 1):
            q_buf[j, (q_head[j] + i) % ring] = q_buf[j, (q_head[j] + i + 1) % ring]
        q_len[j] -= 1
        q_occ[j] -= 1
        return g

    # Decoder / reorder / streammux state.
    dptr = np.zeros(S, np.int64)       # next decode position per stream
    hold = np.zeros(S, np.int64)       # frames started but not yet released
    rel_cnt = np.zeros(S, np.int64)    # next display index to release
    mux_cnt = np.zeros(S, np.int64)    # next display index to mux
    decoded = np.zeros(n, np.uint8)
    rr = np.zeros(1, np.int64)         # streammux round-robin pointer
    n_done = np.zeros(1, np.int64)

    # An engine drains its execution queue serially, so completions on one
    # (stage, resource) pair never overtake their issue order even when a
    # later frame draws a shorter service time. 1us result emission gap.
    last_comp = np.zeros(6 * n_resources)
    emit_gap = 1e-6

    def start_frame(g, k, now):
        r = res_tab[g, k]
        busy_work[r] += comp[g, k]
        busy_intv[r] += intv[g, k]
        next_free[r] = now + intv[g, k]
        ct = now + lat[g, k]
        if ct < last_comp[k * n_resources + r] + emit_gap:
            ct = last_comp[k * n_resources + r] + emit_gap
        last_comp[k * n_resources + r] = ct
        ev_push(ct, 1, g, k)

    def try_stage(k, now):
        # k in 2..5; scan the input queue in FIFO order and start the first
        # frame whose resource is idle. Frames never pass one another on the
        # same resource, so per-stream order is preserved.
        j = k - 2
        started = False
        while q_len[j] > 0:
            if k < 5 and q_occ[k - 1] >= queue_cap:
                break
            pick = -1
            block_r = -1
            block_t = INF
            for idx in range(q_len[j]):
                g = q_buf[j, (q_head[j] + idx) % ring]
                r = res_tab[g, k]
                if next_free[r] <= now:
                    pick = idx
                    break
                if next_free[r] < block_t:
                    block_t = next_free[r]
                    block_r = r
            if pick < 0:
                if block_r >= 0:
                    want_poke(block_r, block_t)
                break
            g = q_take(j, pick)
            if k < 5:
                q_occ[k - 1] += 1
            start_frame(g, k, now)
            started = True
        return started

    def try_mux(now):
        started = False
        while q_occ[0] < queue_cap:
            s_pick = -1
            for i in range(S):
                s = (rr[0] + i) % S
                if rel_cnt[s] - mux_cnt[s] > 0:
                    s_pick = s
                    break
            if s_pick < 0:
                break
            g = s_pick * F + mux_cnt[s_pick]
            r = res_tab[g, 1]
            if next_free[r] > now:
                want_poke(r, next_free[r])
                break
            mux_cnt[s_pick] += 1
            rr[0] = (s_pick + 1) % S
            q_occ[0] += 1
            start_frame(g, 1, now)
            started = True
        return started

    def try_release(now):
        # Move decoded frames from the reorder buffer to the streammux input
        # in display order, while the per-stream input window has room.
        progressed = False
        for s in range(S):
            while rel_cnt[s] < F:
                g = s * F + rel_cnt[s]
                if decoded[g] == 0:
                    break
                if rel_cnt[s] - mux_cnt[s] >= queue_cap:
                    break
                release_t[g] = now
                rel_cnt[s] += 1
                hold[s] -= 1
                progressed = True
        return progressed

    def try_decode(now):
        started = False
        while True:
            best_s = -1
            best_arr = INF
            for s in range(S):
                if dptr[s] >= F or hold[s] >= reorder_cap:
                    continue
                g = decode_next[s * F + dptr[s]]
                a = arrival[g]
                if a <= now and a < best_arr:
                    best_arr = a
                    best_s = s
            if best_s < 0:
                break
            g = decode_next[best_s * F + dptr[best_s]]
            r = res_tab[g, 0]
            if next_free[r] > now:
                want_poke(r, next_free[r])
                break
            dptr[best_s] += 1
            hold[best_s] += 1
            start_frame(g, 0, now)
            started = True
        return started

    def sweep(now):
        while True:
            progressed = False
            for k in range(5, 1, -1):
                if try_stage(k, now):
                    progressed = True
            if try_mux(now):
                progressed = True
            if try_release(now):
                progressed = True
            if try_decode(now):
                progressed = True
            if not progressed:
                break

    for g in range(n):
        ev_push(arrival[g], 0, g, 0)

    while heap_n[0] > 0 and n_done[0] < n:
        slot = ev_pop()
        t = ev_t[slot]
        kind = ev_kind[slot]
        a = ev_a[slot]
        b = ev_b[slot]
        if t > horizon:
            break
        if kind == 1:
            comp_t[a, b] = t
            if b == 0:
                decoded[a] = 1
            elif b == 5:
                n_done[0] += 1
            else:
                q_push(b - 1, a)
        elif kind == 2:
            if pending_poke[a] != t:
                continue  # superseded by an earlier poke
            pending_poke[a] = INF
        sweep(t)

    return release_t, comp_t, busy_work, busy_intv, n_done[0]
