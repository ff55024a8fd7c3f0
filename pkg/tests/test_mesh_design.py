import math
from itertools import combinations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from topoevo.geometry import Inventory, Network, Point, account_modification
from topoevo.mesh import (DesignParams, DesignTrace, NoAcceptableNetwork, attach_new_nodes, evo_design,
                          evo_iteration, is_acceptable, opt_design, opt_iteration)
from topoevo.ring import tsp_heuristic
from topoevo.rng import stream

GENEROUS = DesignParams(delay_bound=1e6, p_add=1.0, p_del=1.0)


def random_points(seed, n, scale=10.0):
    rng = stream(seed)
    return [Point(i, *map(float, rng.uniform(0, scale, 2))) for i in range(n)]


def cheapest_acceptable(points, bound):
    """Exhaustive minimum-cost acceptable sub-network of the complete graph."""
    pairs = list(combinations([p.id for p in points], 2))
    best = None
    for m in range(1 << len(pairs)):
        chosen = [pairs[b] for b in range(len(pairs)) if m >> b & 1]
        if len(chosen) < len(points):
            continue
        net = Network.from_pairs(points, chosen)
        if (best is None or net.cost < best.cost) and is_acceptable(net, bound):
            best = net
    return best


def test_square_ring_is_returned():
    square = [Point(0, 0, 0), Point(1, 2, 0), Point(2, 2, 1), Point(3, 0, 1)]
    net, found = opt_iteration(square, GENEROUS, stream(1))
    assert found
    assert {l.key for l in net.links} == {(0, 1), (1, 2), (2, 3), (0, 3)}
    assert cheapest_acceptable(square, 1e6).links == net.links


@pytest.mark.parametrize("seed", range(6))
def test_opt_matches_exhaustive_on_five_nodes(seed):
    pts = random_points(seed, 5)
    params = DesignParams(delay_bound=1e6)
    got = opt_design(pts, params, stream(seed, 1))
    want = cheapest_acceptable(pts, 1e6)
    assert got.cost == pytest.approx(want.cost, rel=1e-9)


def test_infeasible_nodes():
    pts = random_points(0, 5)
    tight = DesignParams(delay_bound=1.0)
    _, found = opt_iteration(pts, tight, stream(0))
    assert not found
    with pytest.raises(NoAcceptableNetwork) as err:
        opt_design(pts, tight, stream(0))
    rec = err.value.report()
    assert rec["reason"] in ("primary-delay", "secondary-delay") and sorted(rec["nodes"]) == list(range(5))


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 14))
def test_opt_properties(seed, n):
    pts = random_points(seed, n)
    params = DesignParams(delay_bound=14 * 1.3)
    try:
        trace = DesignTrace([], [])
        net = opt_design(pts, params, stream(seed, 2), trace=trace)
    except NoAcceptableNetwork:
        return
    assert is_acceptable(net, params)
    costs = [o[0] for o in trace.objectives]
    assert all(b <= a for a, b in zip(costs, costs[1:]))
    assert net == opt_design(pts, params, stream(seed, 2))
    ring = tsp_heuristic(pts, stream(seed, 2))
    if is_acceptable(ring.to_network(), params):
        assert net.cost <= ring.cost * (1 + 1e-9)


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10**6), st.integers(4, 12))
def test_full_deletion_leaves_nothing_removable(seed, n):
    pts = random_points(seed, n)
    params = DesignParams(delay_bound=14 * 1.3, p_add=1.0, p_del=1.0)
    net, found = opt_iteration(pts, params, stream(seed))
    if not found:
        return
    for link in net.links:
        assert not is_acceptable(net.with_links(net.links - {link}), params)


def test_attach_single_node():
    prev = Network.from_pairs([Point(0, 0, 0), Point(1, 2, 0), Point(2, 2, 1), Point(3, 0, 1)],
                              [(0, 1), (1, 2), (2, 3), (0, 3)])
    z = Point(9, 1, -0.2)
    seed, steps = attach_new_nodes(prev, Inventory(), [z], "inventory")
    assert (steps[0].x, steps[0].y) == (0, 1)
    assert steps[0].cost == pytest.approx(2 * math.hypot(1, 0.2))
    assert {(0, 9), (1, 9)} <= {l.key for l in seed.links}
    assert prev.links <= seed.links


def test_attach_chains_through_new_nodes():
    prev = Network.from_pairs([Point(0, 0, 0), Point(1, 2, 0), Point(2, 1, 1)], [(0, 1), (1, 2), (0, 2)])
    near, far = Point(5, 1, 10), Point(6, 1.2, 19)
    _, steps = attach_new_nodes(prev, Inventory(), [far, near], "leasing")
    assert [s.z for s in steps] == [5, 6]
    assert 5 in (steps[1].x, steps[1].y)


def test_attach_uses_inventory_only_under_inventory_policy():
    pts = [Point(0, 0, 0), Point(1, 2, 0), Point(2, 2, 1), Point(3, 0, 1)]
    prev = Network.from_pairs(pts, [(0, 1), (1, 2), (2, 3), (0, 3)])
    inv = Inventory(frozenset([prev.link(0, 2)]))
    z = Point(9, 1.1, 0.45)
    s_inv, _ = attach_new_nodes(prev, inv, [z], "inventory")
    s_own, _ = attach_new_nodes(prev, inv, [z], "ownership")
    assert prev.link(0, 2) in s_inv.links and prev.link(0, 2) not in s_own.links


def test_evo_splice_on_five_nodes():
    pts = [Point(0, 0, 0), Point(1, 2, 0), Point(2, 2, 1), Point(3, 0, 1)]
    prev = Network.from_pairs(pts, [(0, 1), (1, 2), (2, 3), (0, 3)])
    z = Point(9, 1, -0.2)
    res = evo_design(prev, Inventory(), [z], GENEROUS, "inventory", stream(3))
    assert {l.key for l in res.network.links} == {(0, 9), (1, 9), (1, 2), (2, 3), (0, 3)}
    assert res.mod_cost == pytest.approx(2 * math.hypot(1, 0.2))
    assert res.inventory.links == {prev.link(0, 1)}


def test_evo_without_new_nodes_costs_nothing():
    pts = random_points(5, 8)
    params = DesignParams(delay_bound=30.0)
    prev = opt_design(pts, params, stream(1))
    res = evo_design(prev, Inventory(), [], params, "inventory", stream(2))
    assert res.mod_cost == 0
    assert res.network.links <= prev.links
    net, _, found = evo_iteration(prev, Inventory(), [], DesignParams(delay_bound=30.0, p_del=1e-12), "inventory",
                                  stream(2))
    assert found and net == prev


def _trace(seed, policy, n=10, params=DesignParams(delay_bound=18.0)):
    pts = random_points(seed, n)
    net = opt_design(pts[:4], params, stream(seed, 1))
    inv = Inventory()
    for k in range(4, n):
        res = evo_design(net, inv, [pts[k]], params, policy, stream(seed, 2, k))
        yield net, inv, res
        net, inv = res.network, res.inventory


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 10**6))
def test_policy_invariants(seed):
    params = DesignParams(delay_bound=18.0)
    try:
        for policy in ("inventory", "ownership", "leasing"):
            for prev, inv, res in _trace(seed, policy):
                assert is_acceptable(res.network, params)
                if policy == "ownership":
                    assert prev.links <= res.network.links
                    assert res.released == 0
                if policy != "inventory":
                    assert not res.inventory.links
                owned = prev.links | (inv.links if policy == "inventory" else frozenset())
                assert res.mod_cost == pytest.approx(sum(l.length for l in res.network.links - owned), abs=1e-9)
                # the splice network is a candidate, so EVO never pays more than its two new links
                splice_cost = attach_new_nodes(prev, inv, [p for p in res.network.points
                                                           if p.id not in prev.nodes], policy)[1][0].cost
                assert res.mod_cost <= splice_cost * (1 + 1e-9) or not is_acceptable(
                    attach_new_nodes(prev, inv, [p for p in res.network.points if p.id not in prev.nodes],
                                     policy)[0], params)
    except NoAcceptableNetwork:
        pass


def test_evo_best_so_far_is_monotone():
    pts = random_points(8, 12)
    params = DesignParams(delay_bound=18.0)
    prev = opt_design(pts[:11], params, stream(1))
    trace = DesignTrace([], [])
    evo_design(prev, Inventory(), [pts[11]], params, "inventory", stream(2), trace=trace)
    objs = trace.objectives
    assert all(not (b[0] > a[0] + 1e-9) for a, b in zip(objs, objs[1:]))


def test_evo_is_deterministic():
    pts = random_points(3, 10)
    params = DesignParams(delay_bound=18.0)
    prev = opt_design(pts[:9], params, stream(1))
    a = evo_design(prev, Inventory(), [pts[9]], params, "leasing", stream(2))
    b = evo_design(prev, Inventory(), [pts[9]], params, "leasing", stream(2))
    assert a == b


def test_evo_rejects_existing_nodes():
    pts = random_points(3, 6)
    prev = opt_design(pts, DesignParams(delay_bound=30.0), stream(1))
    with pytest.raises(ValueError):
        evo_design(prev, Inventory(), [pts[0]], DesignParams(delay_bound=30.0), "inventory", stream(2))
