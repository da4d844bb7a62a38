"""Compiled inner loops for the combinatorial solvers.

All kernels work on dense node indices and write edge-indicator rows.
They are deliberately simple (array-scan Dijkstra, subset-DP Held-Karp,
best-improvement 2-opt).  Dijkstra and Held-Karp resolve exact cost
ties towards the lexicographically smallest sorted edge-id set, the same
rule as the brute-force oracle.  With strictly positive costs that
preference composes along partial solutions, so comparing at each tie is
enough.  2-opt takes the lowest-index move among equal gains.
"""

import numpy as np
from numba import njit

INF = np.inf


@njit(cache=True, nogil=True)
def lex_less(a, b):
    """True when sorted edge-id array ``a`` precedes ``b``."""
    for i in range(min(a.shape[0], b.shape[0])):
        if a[i] != b[i]:
            return a[i] < b[i]
    return a.shape[0] < b.shape[0]


@njit(cache=True, nogil=True)
def _chain_edges(pred_edge, pred_node, s, v, extra):
    cnt = 0
    w = v
    while w != s:
        cnt += 1
        w = pred_node[w]
    out = np.empty(cnt + (1 if extra >= 0 else 0), dtype=np.int64)
    w = v
    i = 0
    while w != s:
        out[i] = pred_edge[w]
        i += 1
        w = pred_node[w]
    if extra >= 0:
        out[i] = extra
    return np.sort(out)


@njit(cache=True, nogil=True)
def dijkstra_path(indptr, heads, eids, costs, n, s, t, out):
    """Shortest s-t path; sets ``out[e] = 1`` on its edges.

    Returns ``False`` when ``t`` is unreachable.
    """
    dist = np.full(n, INF)
    done = np.zeros(n, dtype=np.bool_)
    pred_edge = np.full(n, -1, dtype=np.int64)
    pred_node = np.full(n, -1, dtype=np.int64)
    dist[s] = 0.0
    for _ in range(n):
        u = -1
        best = INF
        for v in range(n):
            if not done[v] and dist[v] < best:
                best = dist[v]
                u = v
        if u == -1 or u == t:
            break
        done[u] = True
        for k in range(indptr[u], indptr[u + 1]):
            v = heads[k]
            if done[v]:
                continue
            nd = best + costs[eids[k]]
            if nd < dist[v] or (
                nd == dist[v]
                and nd < INF
                and lex_less(
                    _chain_edges(pred_edge, pred_node, s, u, eids[k]),
                    _chain_edges(pred_edge, pred_node, s, v, -1),
                )
            ):
                dist[v] = nd
                pred_edge[v] = eids[k]
                pred_node[v] = u
    if dist[t] == INF:
        return False
    v = t
    while v != s:
        out[pred_edge[v]] = 1
        v = pred_node[v]
    return True


@njit(cache=True, nogil=True)
def dijkstra_batch(indptr, heads, eids, costs, n, sources, targets, out):
    ok = np.ones(costs.shape[0], dtype=np.bool_)
    for b in range(costs.shape[0]):
        ok[b] = dijkstra_path(indptr, heads, eids, costs[b], n, sources[b], targets[b], out[b])
    return ok


@njit(cache=True, nogil=True)
def cost_matrix(edge_matrix, costs):
    n = edge_matrix.shape[0]
    c = np.full((n, n), INF)
    for i in range(n):
        for j in range(n):
            e = edge_matrix[i, j]
            if e >= 0:
                c[i, j] = costs[e]
    return c


@njit(cache=True, nogil=True)
def _hk_edges(par, em, mask, k, extra):
    """Sorted edge ids of the stored path for state ``(mask, k)`` plus ``extra``."""
    cnt = 0
    w = mask
    while w:
        cnt += 1
        w &= w - 1
    out = np.empty(cnt + 1, dtype=np.int64)
    out[cnt] = extra
    i = 0
    while True:
        prev = mask ^ (1 << k)
        j = par[mask, k]
        out[i] = em[0, k + 1] if prev == 0 else em[j + 1, k + 1]
        i += 1
        if prev == 0:
            break
        mask = prev
        k = j
    return np.sort(out)


@njit(cache=True, nogil=True)
def held_karp_tour(c, em):
    """Optimal tour through all nodes starting at node 0 (node order).

    ``dp[mask, k]`` is the cheapest path leaving node 0, visiting the
    nodes in ``mask`` (bit ``j`` is node ``j + 1``) and ending at ``k + 1``;
    ``par`` holds the node before ``k + 1`` on the chosen path.
    """
    n = c.shape[0]
    m = n - 1
    full = 1 << m
    ct = np.ascontiguousarray(c[1:, 1:].T)  # ct[k, j] = c[j+1, k+1]
    # entries for k outside mask stay INF, so the inner min needs no bit test
    dp = np.full((full, m), INF)
    par = np.full((full, m), -1, dtype=np.int8)
    for k in range(m):
        dp[1 << k, k] = c[0, k + 1]
    for mask in range(1, full):
        if mask & (mask - 1) == 0:
            continue
        for k in range(m):
            if not (mask >> k) & 1:
                continue
            prev = mask ^ (1 << k)
            row = dp[prev]
            ck = ct[k]
            best = INF
            arg = -1
            for j in range(m):
                v = row[j] + ck[j]
                if v < best:
                    best = v
                    arg = j
                elif v == best and v < INF:
                    if lex_less(_hk_edges(par, em, prev, j, em[j + 1, k + 1]), _hk_edges(par, em, prev, arg, em[arg + 1, k + 1])):
                        arg = j
            dp[mask, k] = best
            par[mask, k] = arg
    best = INF
    last = -1
    for j in range(m):
        tot = dp[full - 1, j] + c[j + 1, 0]
        if tot < best:
            best = tot
            last = j
        elif tot == best and tot < INF:
            if lex_less(_hk_edges(par, em, full - 1, j, em[j + 1, 0]), _hk_edges(par, em, full - 1, last, em[last + 1, 0])):
                last = j
    tour = np.zeros(n, dtype=np.int64)
    if last == -1:
        tour[:] = -1
        return tour
    mask = full - 1
    k = last
    for pos in range(n - 1, 0, -1):
        tour[pos] = k + 1
        prev = mask ^ (1 << k)
        if prev == 0:
            break
        j = par[mask, k]
        mask = prev
        k = j
    return tour


@njit(cache=True, nogil=True)
def nearest_neighbour_tour(c):
    n = c.shape[0]
    tour = np.zeros(n, dtype=np.int64)
    used = np.zeros(n, dtype=np.bool_)
    used[0] = True
    cur = 0
    for pos in range(1, n):
        best = INF
        nxt = -1
        for v in range(n):
            if not used[v] and c[cur, v] < best:
                best = c[cur, v]
                nxt = v
        if nxt == -1:
            tour[:] = -1
            return tour
        tour[pos] = nxt
        used[nxt] = True
        cur = nxt
    if c[cur, 0] == INF:
        tour[:] = -1
    return tour


@njit(cache=True, nogil=True)
def two_opt_delta(c, tour, i, j):
    """Cost change from reversing ``tour[i+1 .. j]`` (directed-safe)."""
    n = tour.shape[0]
    a = tour[i]
    b = tour[i + 1]
    cc = tour[j]
    d = tour[(j + 1) % n]
    delta = c[a, cc] + c[b, d] - c[a, b] - c[cc, d]
    for k in range(i + 1, j):
        delta += c[tour[k + 1], tour[k]] - c[tour[k], tour[k + 1]]
    return delta


@njit(cache=True, nogil=True)
def two_opt(c, tour, tol):
    """Best-improvement 2-opt until no move improves by more than ``tol``."""
    n = tour.shape[0]
    while True:
        best = -tol
        bi = -1
        bj = -1
        for i in range(n - 1):
            for j in range(i + 2, n):
                if i == 0 and j == n - 1:
                    continue
                dlt = two_opt_delta(c, tour, i, j)
                if dlt < best:
                    best = dlt
                    bi = i
                    bj = j
        if bi == -1:
            return tour
        lo = bi + 1
        hi = bj
        while lo < hi:
            tmp = tour[lo]
            tour[lo] = tour[hi]
            tour[hi] = tmp
            lo += 1
            hi -= 1


@njit(cache=True, nogil=True)
def tour_to_edges(edge_matrix, tour, out):
    n = tour.shape[0]
    for k in range(n):
        out[edge_matrix[tour[k], tour[(k + 1) % n]]] = 1


@njit(cache=True, nogil=True)
def tsp_batch(edge_matrix, costs, exact, tol, out):
    ok = np.ones(costs.shape[0], dtype=np.bool_)
    for b in range(costs.shape[0]):
        c = cost_matrix(edge_matrix, costs[b])
        if exact:
            tour = held_karp_tour(c, edge_matrix)
        else:
            tour = nearest_neighbour_tour(c)
            if tour[0] != -1:
                tour = two_opt(c, tour, tol)
        if tour[0] == -1:
            ok[b] = False
            continue
        tour_to_edges(edge_matrix, tour, out[b])
    return ok
