import math
from itertools import permutations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import best_adjacent_pair, brute_tsp, tour_length
from topoevo.geometry import Inventory, Point, account_modification, distance
from topoevo.ring import (Ring, best_splice, canonical_tour, insert_node, insert_nodes_greedy, tsp_bruteforce,
                          tsp_heuristic, two_opt_gain)
from topoevo.rng import stream


def pts_from(seed, n, scale=100.0):
    rng = stream(seed)
    return [Point(i, float(x), float(y)) for i, (x, y) in enumerate(rng.uniform(0, scale, (n, 2)))]


SQUARE = [Point(0, 0, 0), Point(1, 1, 0), Point(2, 1, 1), Point(3, 0, 1)]


def test_ring_invariants():
    with pytest.raises(ValueError):
        Ring(tuple(SQUARE[:2]), (0, 1))
    with pytest.raises(ValueError):
        Ring(tuple(SQUARE), (0, 1, 2, 2))
    r = Ring(tuple(SQUARE), (2, 1, 0, 3))
    assert r.tour == canonical_tour((0, 3, 2, 1)) == (0, 1, 2, 3)
    assert r.cost == 4
    assert r.to_network().cost == 4


def test_three_points_is_the_triangle():
    pts = [Point(0, 0, 0), Point(1, 3, 0), Point(2, 0, 4)]
    assert tsp_heuristic(pts, stream(0)).cost == 12
    assert tsp_bruteforce(pts).cost == 12
    with pytest.raises(ValueError):
        tsp_heuristic(pts[:2], stream(0))


def test_square_tour():
    crossed = [Point(0, 0, 0), Point(1, 1, 1), Point(2, 1, 0), Point(3, 0, 1)]
    assert tsp_heuristic(crossed, stream(0)).cost == pytest.approx(4)
    assert tsp_bruteforce(crossed).cost == pytest.approx(4)


def test_bruteforce_guard():
    with pytest.raises(ValueError):
        tsp_bruteforce(pts_from(0, 11))
    with pytest.raises(ValueError):
        tsp_bruteforce(pts_from(0, 2))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 8))
def test_bruteforce_matches_independent_enumeration(seed, n):
    pts = pts_from(seed, n)
    assert tsp_bruteforce(pts).cost == pytest.approx(brute_tsp(pts), rel=1e-12)


def test_eight_points_within_five_percent():
    pts = pts_from(42, 8)
    assert tsp_heuristic(pts, stream(1)).cost <= 1.05 * brute_tsp(pts)


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 40))
def test_heuristic_is_two_opt_stable_and_deterministic(seed, n):
    pts = pts_from(seed, n)
    a = tsp_heuristic(pts, stream(seed, 1))
    assert two_opt_gain(a) <= 1e-9 * a.cost
    assert a == tsp_heuristic(pts, stream(seed, 1))
    assert sorted(a.tour) == list(range(n))
    assert math.isclose(a.cost, tour_length([a.point(i) for i in a.tour]), rel_tol=1e-12)


def test_insert_node_example():
    ring = Ring(tuple(SQUARE), (0, 1, 2, 3))
    z = Point(9, 0.5, -0.1)
    grown, cost = insert_node(ring, z)
    assert cost == pytest.approx(2 * math.sqrt(0.26))
    assert grown.tour == canonical_tour((0, 9, 1, 2, 3))
    assert grown.cost == pytest.approx(ring.cost + cost - 1)
    with pytest.raises(ValueError):
        insert_node(grown, z)


def test_insert_at_edge_midpoint():
    tri = Ring((Point(0, 0, 0), Point(1, 4, 0), Point(2, 0, 3)), (0, 1, 2))
    _, cost = insert_node(tri, Point(5, 2, 0))
    assert cost == pytest.approx(4)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(3, 12))
def test_insert_node_matches_exhaustive_pairs(seed, n):
    rng = stream(seed, 2)
    pts = pts_from(seed, n)
    ring = Ring(tuple(pts), tuple(int(i) for i in rng.permutation(n)))
    z = Point(n, *map(float, rng.uniform(0, 100, 2)))
    grown, cost = insert_node(ring, z)
    want, pair = best_adjacent_pair([ring.point(i) for i in ring.tour], z)
    assert cost == pytest.approx(want, rel=1e-12)
    at = grown.tour.index(n)
    assert {grown.tour[at - 1], grown.tour[(at + 1) % len(grown.tour)]} == set(pair)
    # splice identity and the dropped link never comes back
    assert grown.cost == pytest.approx(ring.cost + cost - distance(ring.point(pair[0]), ring.point(pair[1])))
    m = account_modification(ring.to_network(), Inventory(), grown.to_network())
    assert m.mod_cost == pytest.approx(cost) and len(m.inventory.links) == 1


def _oracle_greedy(ring: Ring, zs: list[Point]):
    """Search all insertion orders for the one that is stepwise cheapest."""
    found = None
    for order in permutations(zs):
        tour = [ring.point(i) for i in ring.tour]
        total, ok = 0.0, True
        for step, z in enumerate(order):
            costs = {q.id: best_adjacent_pair(tour, q)[0] for q in order[step:]}
            low = min(costs.values())
            if costs[z.id] > low + 1e-9 or any(costs[q] <= low + 1e-9 and q < z.id for q in costs):
                ok = False
                break
            c, (x, y) = best_adjacent_pair(tour, z)
            i = [p.id for p in tour].index(x)
            j = [p.id for p in tour].index(y)
            tour.insert(max(i, j) if abs(i - j) == 1 else len(tour), z)
            total += c
        if ok:
            found = (total, tour)
    return found


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 3))
def test_greedy_matches_order_search(seed, m):
    pts = pts_from(seed, 6 + m)
    ring = tsp_heuristic(pts[:6], stream(seed))
    grown, total, splices = insert_nodes_greedy(ring, pts[6:])
    want_total, want_tour = _oracle_greedy(ring, pts[6:])
    assert total == pytest.approx(want_total, rel=1e-12)
    assert grown.tour == canonical_tour([p.id for p in want_tour])
    assert [s.z for s in splices] == [z for z in grown.tour if z >= 6] or len(splices) == m


def test_greedy_chained_insertion():
    ring = Ring((Point(0, 0, 0), Point(1, 2, 0), Point(2, 1, 1)), (0, 1, 2))
    near = Point(3, 1, 10)
    far = Point(4, 1, 19)
    grown, total, splices = insert_nodes_greedy(ring, [far, near])
    assert [s.z for s in splices] == [3, 4]
    assert 3 in (splices[1].x, splices[1].y)
    _, single = insert_node(ring, near)
    assert total > single


def test_greedy_reductions():
    ring = Ring(tuple(SQUARE), (0, 1, 2, 3))
    z = Point(9, 0.5, -0.1)
    g1, c1 = insert_node(ring, z)
    g2, c2, _ = insert_nodes_greedy(ring, [z])
    assert (g1, c1) == (g2, c2)
    g3, c3, s3 = insert_nodes_greedy(ring, [])
    assert g3 == ring and c3 == 0 and s3 == []


def test_best_splice_tie_prefers_cheaper_ring():
    # z equidistant from both endpoints of two edges; the longer edge is dropped
    ring = Ring((Point(0, -1, 0), Point(1, 1, 0), Point(2, 0, 3)), (0, 1, 2))
    s = best_splice(ring, Point(5, 0, 0))
    assert (s.x, s.y) == (0, 1)
