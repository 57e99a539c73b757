from __future__ import annotations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from syslab.discrete.maxflow import build_flow_graph, min_cut


def _nx_value(n, tails, heads, fwd, bwd, s, t):
    G = nx.DiGraph()
    G.add_nodes_from(range(n))
    for a, b, c1, c2 in zip(tails, heads, fwd, bwd):
        for u, v, c in ((a, b, c1), (b, a, c2)):
            if G.has_edge(u, v):
                G[u][v]["capacity"] += c
            else:
                G.add_edge(u, v, capacity=c)
    return nx.maximum_flow_value(G, s, t)


def test_two_path_example():
    # s -> a -> t (3), s -> b -> t (2), a -> b (1)
    g = build_flow_graph(4, [0, 1, 0, 2, 1], [1, 3, 2, 3, 2], [3, 3, 2, 2, 1], [0, 0, 0, 0, 0])
    r = min_cut(g, 0, 3)
    assert r.value == pytest.approx(5.0)
    assert r.flow == pytest.approx(5.0)
    assert r.source_side[0] and not r.source_side[3]


def test_disconnected_sink_gives_zero_cut():
    g = build_flow_graph(4, [0, 2], [1, 3], [1.0, 1.0], [0.0, 0.0])
    assert min_cut(g, 0, 3).value == 0.0


def test_source_equals_sink_rejected():
    g = build_flow_graph(2, [0], [1], [1.0], [1.0])
    with pytest.raises(ValueError):
        min_cut(g, 0, 0)


@settings(max_examples=120, deadline=None)
@given(
    n=st.integers(3, 14),
    seed=st.integers(0, 2**31 - 1),
    density=st.floats(0.1, 0.9),
)
def test_matches_networkx(n, seed, density):
    rng = np.random.default_rng(seed)
    pairs = [(a, b) for a in range(n) for b in range(n) if a < b and rng.random() < density]
    if not pairs:
        return
    tails = np.array([p[0] for p in pairs])
    heads = np.array([p[1] for p in pairs])
    fwd = rng.random(len(pairs)) * 10
    bwd = np.where(rng.random(len(pairs)) < 0.5, 0.0, rng.random(len(pairs)) * 10)
    s, t = 0, n - 1
    g = build_flow_graph(n, tails, heads, fwd, bwd)
    r = min_cut(g, s, t)
    want = _nx_value(n, tails, heads, fwd, bwd, s, t)
    assert r.value == pytest.approx(want, rel=1e-9, abs=1e-9)
    assert r.flow == pytest.approx(want, rel=1e-9, abs=1e-9)


def test_large_grid_matches_networkx():
    rng = np.random.default_rng(5)
    side = 12
    idx = np.arange(side * side).reshape(side, side)
    tails = np.concatenate([idx[:, :-1].ravel(), idx[:-1, :].ravel()])
    heads = np.concatenate([idx[:, 1:].ravel(), idx[1:, :].ravel()])
    cap = rng.random(len(tails)) + 0.1
    n = side * side + 2
    S, T = n - 2, n - 1
    tails = np.concatenate([tails, np.full(side, S), idx[:, -1]])
    heads = np.concatenate([heads, idx[:, 0], np.full(side, T)])
    fwd = np.concatenate([cap, np.full(2 * side, 100.0)])
    bwd = np.concatenate([cap, np.zeros(2 * side)])
    r = min_cut(build_flow_graph(n, tails, heads, fwd, bwd), S, T)
    assert r.value == pytest.approx(_nx_value(n, tails, heads, fwd, bwd, S, T), rel=1e-9)
