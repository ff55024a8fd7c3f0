import math
from itertools import combinations

import networkx as nx
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from test_mesh_paths import _brute_pair
from topoevo.geometry import Network, Point
from topoevo.metrics import (COLUMNS, Disconnected, MetricsRecord, average_link_length, compare, cost_overhead,
                             degree_statistics, evolvability, inventory_overhead, link_betweenness,
                             mean_node_betweenness, node_betweenness, primary_delay_ratio, skewness,
                             topological_similarity)
from topoevo.rng import stream

SQ = [Point(0, 0, 0), Point(1, 1, 0), Point(2, 1, 1), Point(3, 0, 1)]
CYCLE = Network.from_pairs(SQ, [(0, 1), (1, 2), (2, 3), (0, 3)])
TRI = Network.from_pairs(SQ[:3], [(0, 1), (1, 2), (0, 2)])
LINE = Network.from_pairs(SQ[:3], [(0, 1), (1, 2)])


def test_ratios():
    assert cost_overhead(5, 5) == 0
    assert cost_overhead(1.8, 1.0) == pytest.approx(0.8)
    assert cost_overhead(1.25, 1.0) == pytest.approx(0.25)
    assert evolvability(0, 3) == 1 and evolvability(3, 3) == 0 and evolvability(6, 3) == -1
    assert inventory_overhead(0, 4) == 0 and inventory_overhead(4, 4) == 1
    for f in (cost_overhead, evolvability, inventory_overhead):
        with pytest.raises(ValueError):
            f(1.0, 0.0)


def test_jaccard_examples():
    assert topological_similarity(CYCLE, CYCLE) == 1
    other = Network.from_pairs(SQ, [(0, 2), (1, 3)])
    assert topological_similarity(CYCLE, other) == 0
    a = Network.from_pairs(SQ, [(0, 1), (1, 2), (2, 3)])
    b = Network.from_pairs(SQ, [(1, 2), (2, 3), (0, 3)])
    assert topological_similarity(a, b) == 0.5
    assert topological_similarity(Network(tuple(SQ)), Network(tuple(SQ))) == 1
    with pytest.raises(ValueError):
        topological_similarity(CYCLE, TRI)


def test_betweenness_examples():
    assert set(node_betweenness(TRI).values()) == {0.0}
    assert node_betweenness(LINE)[1] == pytest.approx(1 / 3)
    assert link_betweenness(TRI) == {(0, 1): 1 / 3, (1, 2): 1 / 3, (0, 2): 1 / 3}
    assert link_betweenness(LINE) == {(0, 1): 2 / 3, (1, 2): 2 / 3}
    # 0-2 goes via 1 and 1-3 via 0: the smaller node sequence wins the tie
    bc = node_betweenness(CYCLE)
    assert bc == {0: 1 / 6, 1: 1 / 6, 2: 0.0, 3: 0.0}
    with pytest.raises(Disconnected):
        node_betweenness(Network.from_pairs(SQ, [(0, 1), (2, 3)]))


def _brute_bc(net):
    n = len(net.points)
    total = n * (n - 1) / 2
    counts = dict.fromkeys(net.nodes, 0)
    link_counts = {l.key: 0 for l in net.links}
    for u, v in combinations(sorted(net.nodes), 2):
        prim, _ = _brute_pair(net, u, v)
        for w in prim[2][1:-1]:
            counts[w] += 1
        for e in zip(prim[2], prim[2][1:]):
            link_counts[tuple(sorted(e))] += 1
    return ({k: c / total for k, c in counts.items()}, {k: c / total for k, c in link_counts.items()})


def connected_graphs():
    return st.tuples(st.integers(0, 10**6), st.integers(3, 7), st.floats(0.3, 1.0))


def _graph(case):
    seed, n, density = case
    rng = stream(seed)
    pts = [Point(i, *map(float, rng.uniform(0, 10, 2))) for i in range(n)]
    pairs = [(i, i + 1) for i in range(n - 1)]
    pairs += [e for e in combinations(range(n), 2) if e[1] > e[0] + 1 and rng.random() < density]
    return Network.from_pairs(pts, pairs)


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_betweenness_matches_enumeration(case):
    net = _graph(case)
    node_want, link_want = _brute_bc(net)
    node_got = node_betweenness(net)
    assert node_got == pytest.approx(node_want, abs=1e-15)
    assert link_betweenness(net) == pytest.approx(link_want, abs=1e-15)
    assert all(0 <= b <= 1 for b in node_got.values())
    assert mean_node_betweenness(net) == pytest.approx(np.mean(list(node_want.values())))


@settings(max_examples=40, deadline=None)
@given(connected_graphs())
def test_primary_delays_match_networkx(case):
    net = _graph(case)
    g = nx.Graph()
    for l in net.links:
        g.add_edge(l.u, l.v, weight=l.length)
    dist = dict(nx.all_pairs_dijkstra_path_length(g))
    pairs = list(combinations(sorted(net.nodes), 2))
    want = math.fsum(dist[u][v] for u, v in pairs)
    assert primary_delay_ratio(net, net) == 1
    full = net.with_links({net.link(u, v) for u, v in pairs})
    assert primary_delay_ratio(full, net) <= 1 + 1e-12
    assert primary_delay_ratio(net, full) == pytest.approx(want / math.fsum(full.link(u, v).length for u, v in pairs))


def test_degree_statistics():
    ring = degree_statistics(CYCLE)
    assert ring.histogram == {2: 4} and ring.skewness == 0 and ring.frac_deg2 == 1 and ring.frac_deg_ge8 == 0
    star = Network.from_pairs([Point(i, math.cos(i), math.sin(i)) for i in range(5)], [(0, i) for i in range(1, 5)])
    st_ = degree_statistics(star)
    assert st_.histogram == {1: 4, 4: 1}
    # moments of (4,1,1,1,1): mean 1.6, m2 = 1.44, m3 = 2.592
    assert st_.skewness == pytest.approx(2.592 / 1.44 ** 1.5)
    assert skewness([3, 3, 3]) == 0


def test_average_link_length():
    assert average_link_length(CYCLE) == 1
    pts = [Point(0, 0, 0), Point(1, 3, 0), Point(2, 3, 4)]
    assert average_link_length(Network.from_pairs(pts, [(0, 1), (1, 2)])) == 3.5
    with pytest.raises(ValueError):
        average_link_length(Network(tuple(pts)))


def test_compare_record():
    rec = compare(0, 1, "random", "inventory", CYCLE, CYCLE, 0.0, 0.0)
    assert rec.v == 0 and rec.e == 1 and rec.t == 1 and rec.delay_ratio == 1 and rec.n == 4
    assert tuple(rec.row()) == COLUMNS and len(COLUMNS) == 20
    assert not rec.overhead_flagged
    cheap = compare(0, 1, "random", "inventory", CYCLE, Network.from_pairs(SQ, [(0, 1), (1, 2), (2, 3)]), 0.5, 0.0)
    assert cheap.v == pytest.approx(-0.25) and cheap.overhead_flagged
    lite = compare(0, 1, "random", "leasing", CYCLE, CYCLE, 0.0, 0.0, robustness=False)
    assert math.isnan(lite.mean_bc_opt) and math.isnan(lite.delay_ratio)


@given(st.floats(0, 1e6), st.floats(1e-3, 1e6))
def test_evolvability_identity(c_mod, c_opt):
    assert evolvability(c_mod, c_opt) + c_mod / c_opt == pytest.approx(1, abs=1e-12)


@given(st.sets(st.integers(0, 5)), st.sets(st.integers(0, 5)))
def test_jaccard_symmetric_and_bounded(a, b):
    pts = [Point(i, math.cos(i), math.sin(i)) for i in range(4)]
    pairs = list(combinations(range(4), 2))
    na = Network.from_pairs(pts, [pairs[i] for i in a])
    nb = Network.from_pairs(pts, [pairs[i] for i in b])
    t = topological_similarity(na, nb)
    assert t == topological_similarity(nb, na) and 0 <= t <= 1
