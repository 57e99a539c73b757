"""Highest-label push-relabel for minimum s-t cuts with real capacities."""
from __future__ import annotations

from dataclasses import dataclass

import numba as nb
import numpy as np


@dataclass(frozen=True, eq=False)
class FlowGraph:
    """Residual-graph arrays in CSR layout; ``rev[a]`` is the reverse of arc a."""

    n: int
    indptr: np.ndarray
    heads: np.ndarray
    rev: np.ndarray
    cap: np.ndarray


def build_flow_graph(n: int, tails, heads, cap_fwd, cap_bwd) -> FlowGraph:
    """Graph with one arc pair per input edge: tail->head (cap_fwd) and head->tail (cap_bwd)."""
    tails = np.asarray(tails, dtype=np.int64)
    heads = np.asarray(heads, dtype=np.int64)
    m = len(tails)
    src = np.concatenate([tails, heads])
    dst = np.concatenate([heads, tails])
    cap = np.concatenate([np.asarray(cap_fwd, float) * np.ones(m), np.asarray(cap_bwd, float) * np.ones(m)])
    pair = np.concatenate([np.arange(m, 2 * m), np.arange(m)])
    order = np.argsort(src, kind="stable")
    pos = np.empty(2 * m, dtype=np.int64)
    pos[order] = np.arange(2 * m)
    indptr = np.zeros(n + 1, dtype=np.int64)
    np.add.at(indptr, src + 1, 1)
    indptr = np.cumsum(indptr)
    return FlowGraph(n, indptr, dst[order], pos[pair[order]], cap[order])


@nb.njit(cache=True)
def _global_relabel(n, t, s, indptr, heads, rev, res, eps, height, queue):
    for v in range(n):
        height[v] = n
    height[t] = 0
    qh = 0
    qt = 0
    queue[qt] = t
    qt += 1
    while qh < qt:
        u = queue[qh]
        qh += 1
        for a in range(indptr[u], indptr[u + 1]):
            v = heads[a]
            if v != s and height[v] == n and res[rev[a]] > eps:
                height[v] = height[u] + 1
                queue[qt] = v
                qt += 1
    height[s] = n


@nb.njit(cache=True)
def _push_relabel(n, s, t, indptr, heads, rev, cap, eps):
    res = cap.copy()
    excess = np.zeros(n)
    height = np.zeros(n, np.int64)
    cur = indptr[:-1].copy()
    queue = np.empty(n, np.int64)
    count = np.zeros(n + 1, np.int64)
    bhead = np.full(n + 1, -1, np.int64)
    bnext = np.full(n, -1, np.int64)
    inq = np.zeros(n, np.bool_)

    for a in range(indptr[s], indptr[s + 1]):
        d = res[a]
        if d > 0:
            res[a] = 0.0
            res[rev[a]] += d
            excess[heads[a]] += d
            excess[s] -= d

    work = 0
    relabel_every = 6 * n + indptr[n]
    need_global = True
    hmax = -1
    while True:
        if need_global:
            _global_relabel(n, t, s, indptr, heads, rev, res, eps, height, queue)
            for h in range(n + 1):
                count[h] = 0
                bhead[h] = -1
            for v in range(n):
                inq[v] = False
                if height[v] < n:
                    count[height[v]] += 1
            hmax = -1
            for v in range(n):
                cur[v] = indptr[v]
                if v != s and v != t and height[v] < n and excess[v] > eps:
                    bnext[v] = bhead[height[v]]
                    bhead[height[v]] = v
                    inq[v] = True
                    if height[v] > hmax:
                        hmax = height[v]
            need_global = False
            work = 0

        while hmax >= 0 and bhead[hmax] == -1:
            hmax -= 1
        if hmax < 0:
            break
        u = bhead[hmax]
        bhead[hmax] = bnext[u]
        inq[u] = False
        if height[u] >= n or excess[u] <= eps:
            continue

        # discharge u
        while excess[u] > eps:
            if cur[u] == indptr[u + 1]:
                old = height[u]
                mh = 2 * n
                for a in range(indptr[u], indptr[u + 1]):
                    if res[a] > eps and height[heads[a]] < mh:
                        mh = height[heads[a]]
                work += 12 + indptr[u + 1] - indptr[u]
                count[old] -= 1
                if count[old] == 0:
                    # gap: nothing at this height, everything above is cut off from t
                    for v in range(n):
                        if v != s and old < height[v] < n:
                            count[height[v]] -= 1
                            height[v] = n
                    height[u] = n
                    break
                if mh + 1 >= n:
                    height[u] = n
                    break
                height[u] = mh + 1
                count[mh + 1] += 1
                cur[u] = indptr[u]
                continue
            a = cur[u]
            v = heads[a]
            if res[a] > eps and height[u] == height[v] + 1:
                d = min(excess[u], res[a])
                res[a] -= d
                res[rev[a]] += d
                excess[u] -= d
                excess[v] += d
                if v != s and v != t and not inq[v] and excess[v] > eps:
                    bnext[v] = bhead[height[v]]
                    bhead[height[v]] = v
                    inq[v] = True
                    if height[v] > hmax:
                        hmax = height[v]
                if res[a] <= eps:
                    cur[u] += 1
            else:
                cur[u] += 1
        if excess[u] > eps and height[u] < n and not inq[u]:
            bnext[u] = bhead[height[u]]
            bhead[height[u]] = u
            inq[u] = True
            if height[u] > hmax:
                hmax = height[u]
        if work > relabel_every:
            need_global = True

    # nodes that can still reach t in the residual graph form the sink side
    sink_side = np.zeros(n, np.bool_)
    sink_side[t] = True
    qh = 0
    qt = 0
    queue[qt] = t
    qt += 1
    while qh < qt:
        x = queue[qh]
        qh += 1
        for a in range(indptr[x], indptr[x + 1]):
            v = heads[a]
            if not sink_side[v] and res[rev[a]] > eps:
                sink_side[v] = True
                queue[qt] = v
                qt += 1
    return ~sink_side, excess[t]


@dataclass(frozen=True)
class CutResult:
    value: float
    source_side: np.ndarray
    flow: float


def min_cut(g: FlowGraph, s: int, t: int, rel_tol: float = 1e-9) -> CutResult:
    """Minimum s-t cut; the source side is the set of nodes that cannot reach t."""
    if s == t:
        raise ValueError("source and sink coincide")
    eps = rel_tol * max(float(np.max(g.cap, initial=0.0)), 1e-300)
    src_side, flow = _push_relabel(g.n, s, t, g.indptr, g.heads, g.rev, g.cap, eps)
    if src_side[t]:
        raise RuntimeError("sink classified on source side")
    # value of the cut from original capacities
    tails = np.repeat(np.arange(g.n), np.diff(g.indptr))
    crossing = src_side[tails] & ~src_side[g.heads]
    value = float(np.sum(g.cap[crossing]))
    return CutResult(value, src_side, float(flow))
