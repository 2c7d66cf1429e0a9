"""Integer network simplex kernels on a spanning tree with a dummy root.

Arc arrays hold real arcs first (source node -> target node), then one
artificial arc per non-root node to or from the root.  The spanning tree
is stored as parent / entering-arc / subtree-size arrays plus a circular
depth-first thread (next / prev / last), and all costs, flows and
potentials are 64-bit integers, so pivoting is exact.

The entering rule scans cyclic blocks of arcs and takes the most negative
reduced cost within a block; the leaving rule picks the smallest residual
scanning the cycle against its orientation, which preserves strongly
feasible trees.  After ``bland_after`` consecutive degenerate pivots the
entering rule switches to lowest-index-first until flow moves again.
"""

from __future__ import annotations

import numpy as np
from numba import njit

INF_RES = np.int64(4 * 10**18)

STATUS_OPTIMAL = 0
STATUS_UNBOUNDED = 1
STATUS_PIVOT_LIMIT = 2


@njit(cache=True)
def _remove_edge(s, t, parent, edge, size, nxt, prv, last):
    size_t = size[t]
    prev_t = prv[t]
    last_t = last[t]
    next_last_t = nxt[last_t]
    parent[t] = -1
    edge[t] = -1
    nxt[prev_t] = next_last_t
    prv[next_last_t] = prev_t
    nxt[last_t] = t
    prv[t] = last_t
    while s != -1:
        size[s] -= size_t
        if last[s] == last_t:
            last[s] = prev_t
        s = parent[s]


@njit(cache=True)
def _make_root(q, parent, edge, size, nxt, prv, last, anc):
    na = 0
    v = q
    while v != -1:
        anc[na] = v
        na += 1
        v = parent[v]
    for i in range(na - 1, 0, -1):
        pp = anc[i]
        qq = anc[i - 1]
        size_p = size[pp]
        last_p = last[pp]
        prev_q = prv[qq]
        last_q = last[qq]
        next_last_q = nxt[last_q]
        parent[pp] = qq
        parent[qq] = -1
        edge[pp] = edge[qq]
        edge[qq] = -1
        size[pp] = size_p - size[qq]
        size[qq] = size_p
        nxt[prev_q] = next_last_q
        prv[next_last_q] = prev_q
        nxt[last_q] = qq
        prv[qq] = last_q
        if last_p == last_q:
            last[pp] = prev_q
            last_p = prev_q
        prv[pp] = last_q
        nxt[last_q] = pp
        nxt[last_p] = qq
        prv[qq] = last_p
        last[qq] = last_p


@njit(cache=True)
def _add_edge(i, p, q, parent, edge, size, nxt, prv, last):
    last_p = last[p]
    next_last_p = nxt[last_p]
    size_q = size[q]
    last_q = last[q]
    parent[q] = p
    edge[q] = i
    nxt[last_p] = q
    prv[q] = last_p
    prv[next_last_p] = last_q
    nxt[last_q] = next_last_p
    while p != -1:
        size[p] += size_q
        if last[p] == last_p:
            last[p] = last_q
        p = parent[p]


@njit(cache=True)
def _update_potentials(i, p, q, S, T, C, pi, nxt, last):
    if q == T[i]:
        d = pi[p] - C[i] - pi[q]
    else:
        d = pi[p] + C[i] - pi[q]
    l = last[q]
    v = q
    while True:
        pi[v] += d
        if v == l:
            break
        v = nxt[v]


@njit(cache=True)
def simplex_loop(S, T, C, x, pi, parent, edge, size, nxt, prv, last,
                 m_real, block_size, bland_after, max_pivots):
    """Run pivots to optimality.  Returns (status, pivots, degenerate)."""
    n_nodes = parent.shape[0]
    Wn = np.empty(n_nodes + 2, dtype=np.int64)
    We = np.empty(n_nodes + 2, dtype=np.int64)
    tmpN = np.empty(n_nodes + 2, dtype=np.int64)
    tmpE = np.empty(n_nodes + 2, dtype=np.int64)
    anc = np.empty(n_nodes + 2, dtype=np.int64)

    pivots = 0
    degen = 0
    consec_degen = 0
    bland = False
    B = block_size
    M_blocks = (m_real + B - 1) // B if m_real > 0 else 0
    m_cnt = 0
    f = 0

    while True:
        if pivots >= max_pivots:
            return STATUS_PIVOT_LIMIT, pivots, degen
        # ---------------- entering arc
        enter = -1
        if bland:
            for i in range(m_real):
                if x[i] == 0 and C[i] - pi[S[i]] + pi[T[i]] < 0:
                    enter = i
                    break
            if enter == -1:
                return STATUS_OPTIMAL, pivots, degen
        else:
            while m_cnt < M_blocks:
                best = -1
                best_c = np.int64(0)
                hi = f + B
                if hi <= m_real:
                    for i in range(f, hi):
                        rc = C[i] - pi[S[i]] + pi[T[i]]
                        if rc < best_c:
                            best_c = rc
                            best = i
                    f = hi
                else:
                    hi -= m_real
                    for i in range(f, m_real):
                        rc = C[i] - pi[S[i]] + pi[T[i]]
                        if rc < best_c:
                            best_c = rc
                            best = i
                    for i in range(hi):
                        rc = C[i] - pi[S[i]] + pi[T[i]]
                        if rc < best_c:
                            best_c = rc
                            best = i
                    f = hi
                if best == -1:
                    m_cnt += 1
                else:
                    m_cnt = 0
                    enter = best
                    break
            if enter == -1:
                return STATUS_OPTIMAL, pivots, degen

        p = S[enter]
        q = T[enter]
        # ---------------- apex (lowest common ancestor)
        pa = p
        qa = q
        sp = size[pa]
        sq = size[qa]
        while True:
            while sp < sq:
                pa = parent[pa]
                sp = size[pa]
            while sp > sq:
                qa = parent[qa]
                sq = size[qa]
            if sp == sq:
                if pa != qa:
                    pa = parent[pa]
                    sp = size[pa]
                    qa = parent[qa]
                    sq = size[qa]
                else:
                    break
        w = pa
        # ---------------- cycle: apex -> p, entering arc, q -> apex
        tn = 0
        v = p
        while v != w:
            tmpN[tn] = v
            tmpE[tn] = edge[v]
            tn += 1
            v = parent[v]
        Wn[0] = w
        for t in range(1, tn + 1):
            Wn[t] = tmpN[tn - t]
        for t in range(tn):
            We[t] = tmpE[tn - 1 - t]
        if tn == 0:
            Wn[0] = p
        cnt = tn
        We[cnt] = enter
        cnt += 1
        v = q
        while v != w:
            We[cnt] = edge[v]
            Wn[cnt] = v
            cnt += 1
            v = parent[v]
        # ---------------- leaving arc: min residual, scanned in reverse
        best_res = INF_RES
        j = enter
        js = p
        j_slot = tn
        for t in range(cnt - 1, -1, -1):
            a = We[t]
            nd = Wn[t]
            if S[a] == nd:
                r = INF_RES
            else:
                r = x[a]
            if r < best_res:
                best_res = r
                j = a
                js = nd
                j_slot = t
        if best_res >= INF_RES:
            return STATUS_UNBOUNDED, pivots, degen
        # ---------------- augment
        delta = best_res
        if delta > 0:
            for t in range(cnt):
                a = We[t]
                if S[a] == Wn[t]:
                    x[a] += delta
                else:
                    x[a] -= delta
            consec_degen = 0
            bland = False
        else:
            degen += 1
            consec_degen += 1
            if consec_degen >= bland_after:
                bland = True
        pivots += 1
        # ---------------- tree update
        if enter != j:
            s_nd = js
            t_nd = T[j] if S[j] == js else S[j]
            if parent[t_nd] != s_nd:
                s_nd, t_nd = t_nd, s_nd
            pp = p
            qq = q
            if j_slot < tn:
                pp = q
                qq = p
            _remove_edge(s_nd, t_nd, parent, edge, size, nxt, prv, last)
            _make_root(qq, parent, edge, size, nxt, prv, last, anc)
            _add_edge(enter, pp, qq, parent, edge, size, nxt, prv, last)
            _update_potentials(enter, pp, qq, S, T, C, pi, nxt, last)


@njit(cache=True)
def warm_tree_arrays(parent, root, pred, S, T, C, b, x, pi,
                     size, nxt, prv, last):
    """Fill sizes, threads, flows and potentials for a given warm tree.

    ``b`` holds node imbalances (positive = surplus pushed toward the
    root).  Returns 0 on success, 1 if the tree would need a negative
    flow (caller falls back to a cold start).
    """
    n = parent.shape[0]
    cnt = np.zeros(n + 1, dtype=np.int64)
    for v in range(n):
        if v != root:
            cnt[parent[v] + 1] += 1
    for i in range(n):
        cnt[i + 1] += cnt[i]
    kids = np.empty(n - 1, dtype=np.int64)
    fill = cnt[:n].copy()
    for v in range(n):
        if v != root:
            kids[fill[parent[v]]] = v
            fill[parent[v]] += 1
    order = np.empty(n, dtype=np.int64)
    stack = np.empty(n, dtype=np.int64)
    top = 0
    stack[top] = root
    top += 1
    no = 0
    while top > 0:
        top -= 1
        v = stack[top]
        order[no] = v
        no += 1
        for ci in range(cnt[v + 1] - 1, cnt[v] - 1, -1):
            stack[top] = kids[ci]
            top += 1
    if no != n:
        return 1  # disconnected parent structure
    for t in range(n):
        v = order[t]
        w = order[(t + 1) % n]
        nxt[v] = w
        prv[w] = v
    for v in range(n):
        size[v] = 1
        last[v] = v
    for t in range(n - 1, 0, -1):
        v = order[t]
        pa = parent[v]
        size[pa] += size[v]
        if last[pa] == pa:
            last[pa] = last[v]
    acc = b.copy()
    for t in range(n - 1, 0, -1):
        v = order[t]
        a = pred[v]
        if S[a] == v:
            x[a] = acc[v]
        else:
            x[a] = -acc[v]
        if x[a] < 0:
            return 1
        acc[parent[v]] += acc[v]
    pi[root] = 0
    for t in range(1, n):
        v = order[t]
        a = pred[v]
        if T[a] == v:
            pi[v] = pi[parent[v]] - C[a]
        else:
            pi[v] = C[a] + pi[parent[v]]
    return 0
