"""Primal network simplex for the dense transportation problem.

Sources ``xs`` (weights ``a``) ship to targets ``ys`` (weights ``b``) over
the complete bipartite graph with cost ``|x - y|^p``.  The spanning tree
hangs off an artificial root joined to every node by an artificial arc
(cost 0 for sources, ``ART`` for targets); ``ART`` exceeds every real cost
so no optimum keeps artificial flow.  Leaving arcs follow the strongly
feasible tree rule, which rules out cycling on the (very degenerate)
uniform-weight instances.  The tree is re-derived from the basic arc list
by a BFS at every pivot: O(m + n) extra work per pivot, but no incremental
thread bookkeeping.
"""
from __future__ import annotations

import math

import numpy as np
from numba import njit


@njit(cache=True)
def _cost(xs, ys, i, j, p):
    s = 0.0
    for k in range(xs.shape[1]):
        d = xs[i, k] - ys[j, k]
        s += d * d
    if p == 2:
        return s
    return math.sqrt(s)


@njit(cache=True)
def _max_cost(xs, ys, p):
    c = 0.0
    for i in range(xs.shape[0]):
        for j in range(ys.shape[0]):
            v = _cost(xs, ys, i, j, p)
            if v > c:
                c = v
    return c


@njit(cache=True)
def _solve(xs, a, ys, b, p, tol_factor, max_pivots):
    m = a.shape[0]
    n = b.shape[0]
    nn = m + n
    root = nn
    maxc = _max_cost(xs, ys, p)
    art = 2.0 * maxc if maxc > 0.0 else 1.0
    tol = tol_factor * maxc

    # basic arcs: nn slots (a spanning tree on nn + 1 nodes)
    bsrc = np.empty(nn, np.int64)
    btgt = np.empty(nn, np.int64)
    bcost = np.empty(nn, np.float64)
    bflow = np.empty(nn, np.float64)
    barc = np.empty(nn, np.int64)
    for u in range(nn):
        if u < m:
            bsrc[u] = u
            btgt[u] = root
            bcost[u] = 0.0
            bflow[u] = a[u]
        else:
            bsrc[u] = root
            btgt[u] = u
            bcost[u] = art
            bflow[u] = b[u - m]
        barc[u] = -1 - u

    parent = np.empty(nn + 1, np.int64)
    pslot = np.empty(nn + 1, np.int64)
    pdir = np.empty(nn + 1, np.int64)
    depth = np.empty(nn + 1, np.int64)
    pi = np.empty(nn + 1, np.float64)
    deg = np.empty(nn + 2, np.int64)
    adj = np.empty(2 * nn, np.int64)
    fill = np.empty(nn + 1, np.int64)
    queue = np.empty(nn + 1, np.int64)

    n_arcs = m * n
    block = max(int(math.sqrt(n_arcs)), 10)
    if block > n_arcs:
        block = n_arcs
    next_arc = 0
    pivots = 0
    status = 0

    while True:
        # rebuild rooted tree and potentials from the basic arc list
        deg[:] = 0
        for k in range(nn):
            deg[bsrc[k] + 1] += 1
            deg[btgt[k] + 1] += 1
        for u in range(nn + 1):
            deg[u + 1] += deg[u]
        for u in range(nn + 1):
            fill[u] = deg[u]
        for k in range(nn):
            adj[fill[bsrc[k]]] = k
            fill[bsrc[k]] += 1
            adj[fill[btgt[k]]] = k
            fill[btgt[k]] += 1
        parent[root] = -1
        pslot[root] = -1
        pdir[root] = 0
        depth[root] = 0
        pi[root] = 0.0
        for u in range(nn):
            parent[u] = -2
        head = 0
        tail = 1
        queue[0] = root
        while head < tail:
            u = queue[head]
            head += 1
            for q in range(deg[u], deg[u + 1]):
                k = adj[q]
                v = btgt[k] if bsrc[k] == u else bsrc[k]
                if k == pslot[u]:
                    continue
                parent[v] = u
                pslot[v] = k
                depth[v] = depth[u] + 1
                if bsrc[k] == v:
                    pdir[v] = 1
                    pi[v] = pi[u] - bcost[k]
                else:
                    pdir[v] = -1
                    pi[v] = pi[u] + bcost[k]
                queue[tail] = v
                tail += 1
        if tail != nn + 1:
            status = 2  # basis is not a spanning tree
            break

        # block search pricing over the real arcs
        best = -tol
        enter = -1
        scanned = 0
        cnt = 0
        e = next_arc
        while scanned < n_arcs:
            i = e // n
            j = e - i * n
            rc = _cost(xs, ys, i, j, p) + pi[i] - pi[m + j]
            if rc < best:
                best = rc
                enter = e
            scanned += 1
            cnt += 1
            e += 1
            if e == n_arcs:
                e = 0
            if cnt == block:
                if enter >= 0:
                    break
                cnt = 0
        next_arc = e
        if enter < 0:
            break
        pivots += 1
        if pivots > max_pivots:
            status = 1
            break

        first = enter // n
        second = m + (enter - first * n)
        cin = _cost(xs, ys, first, second - m, p)
        # join node
        u = first
        v = second
        while u != v:
            if depth[u] >= depth[v]:
                u = parent[u]
            else:
                v = parent[v]
        join = u

        delta = np.inf
        u_out = -1
        u = first
        while u != join:
            if pdir[u] == 1:
                d = bflow[pslot[u]]
                if d < delta:
                    delta = d
                    u_out = u
            u = parent[u]
        u = second
        while u != join:
            if pdir[u] == -1:
                d = bflow[pslot[u]]
                if d <= delta:
                    delta = d
                    u_out = u
            u = parent[u]
        if u_out < 0:
            status = 3  # unbounded; impossible with nonnegative costs
            break

        if delta > 0.0:
            u = first
            while u != join:
                bflow[pslot[u]] -= pdir[u] * delta
                u = parent[u]
            u = second
            while u != join:
                bflow[pslot[u]] += pdir[u] * delta
                u = parent[u]
        k = pslot[u_out]
        bsrc[k] = first
        btgt[k] = second
        bcost[k] = cin
        bflow[k] = delta
        barc[k] = enter

    return barc, bflow, pi, pivots, status, maxc


@njit(cache=True)
def _min_reduced_cost(xs, ys, pi, p):
    m = xs.shape[0]
    n = ys.shape[0]
    best = np.inf
    for i in range(m):
        for j in range(n):
            rc = _cost(xs, ys, i, j, p) + pi[i] - pi[m + j]
            if rc < best:
                best = rc
    return best


RC_TOL = 1e-12


class TransportSolverError(RuntimeError):
    pass


def solve_transport(xs, a, ys, b, p: int = 1, max_pivots: int | None = None):
    """Exact optimal transport between two positive discrete measures.

    Returns ``(pairs, cost, pi, info)``: ``pairs`` has rows ``(i, j, mass)``
    with positive mass, ``cost`` is the optimal ``sum mass * |x_i - y_j|^p``,
    ``pi`` holds node potentials (sources, then targets, then the root) with
    reduced costs ``c_ij + pi_i - pi_{m+j} >= 0``.  Masses must already
    balance.
    """
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    a = np.ascontiguousarray(a, dtype=np.float64)
    b = np.ascontiguousarray(b, dtype=np.float64)
    if p not in (1, 2):
        raise ValueError("order p must be 1 or 2")
    m, n = len(a), len(b)
    if max_pivots is None:
        max_pivots = 200 * (m + n) * max(1, int(math.log2(m + n + 1))) + 10_000
    barc, bflow, pi, pivots, status, maxc = _solve(xs, a, ys, b, p, RC_TOL, max_pivots)
    if status == 1:
        raise TransportSolverError(f"pivot limit {max_pivots} exceeded")
    if status:
        raise TransportSolverError(f"network simplex failed (status {status})")
    real = (barc >= 0) & (bflow > 0.0)
    arcs = barc[real]
    flows = bflow[real]
    i = arcs // n
    j = arcs - i * n
    diff = xs[i] - ys[j]
    d2 = np.sum(diff * diff, axis=1)
    c = d2 if p == 2 else np.sqrt(d2)
    cost = float(np.sum(flows * c))
    pairs = np.column_stack([i.astype(float), j.astype(float), flows])
    return pairs, cost, pi, {"pivots": int(pivots), "max_cost": float(maxc)}


def certify(xs, a, ys, b, pairs, pi, p: int, max_cost: float) -> dict:
    """Primal feasibility and reduced-cost optimality check of a solution."""
    xs = np.ascontiguousarray(xs, dtype=np.float64)
    ys = np.ascontiguousarray(ys, dtype=np.float64)
    m, n = len(a), len(b)
    i = pairs[:, 0].astype(np.int64)
    j = pairs[:, 1].astype(np.int64)
    flow = pairs[:, 2]
    rows = np.bincount(i, weights=flow, minlength=m)
    cols = np.bincount(j, weights=flow, minlength=n)
    total = max(float(np.sum(a)), float(np.sum(b)), 1e-300)
    row_err = float(np.max(np.abs(rows - a))) if m else 0.0
    col_err = float(np.max(np.abs(cols - b))) if n else 0.0
    min_rc = float(_min_reduced_cost(xs, ys, pi, p)) if m and n else 0.0
    diff = xs[i] - ys[j]
    d2 = np.sum(diff * diff, axis=1)
    c = d2 if p == 2 else np.sqrt(d2)
    slack = c + pi[i] - pi[m + j]
    max_slack = float(np.max(np.abs(slack))) if len(slack) else 0.0
    rc_tol = RC_TOL * max_cost
    return {
        "feasible": row_err <= 1e-9 * total and col_err <= 1e-9 * total and bool(np.all(flow >= 0)),
        "dual_feasible": min_rc >= -rc_tol,
        "complementary": max_slack <= max(rc_tol, 0.0),
        "row_err": row_err,
        "col_err": col_err,
        "min_reduced_cost": min_rc,
        "max_basic_slack": max_slack,
        "rc_tol": rc_tol,
    }
