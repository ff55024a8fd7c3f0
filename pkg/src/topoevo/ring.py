"""Ring design: heuristic TSP tours and cheapest-splice evolution."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from . import _kernels as K
from .geometry import Link, Network, Point, close, distance, distance_matrix

BRUTEFORCE_MAX = 10


@dataclass(frozen=True)
class Ring:
    """Closed tour over located nodes, stored in canonical rotation/direction."""

    points: tuple[Point, ...]
    tour: tuple[int, ...]

    def __post_init__(self) -> None:
        if len(self.tour) < 3:
            raise ValueError("a ring needs at least 3 nodes")
        pts = tuple(sorted(self.points, key=lambda p: p.id))
        ids = [p.id for p in pts]
        if sorted(self.tour) != ids:
            raise ValueError("tour must visit every ring node exactly once")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "tour", canonical_tour(self.tour))
        object.__setattr__(self, "_by_id", {p.id: p for p in pts})

    def point(self, node_id: int) -> Point:
        return self._by_id[node_id]  # type: ignore[attr-defined]

    @property
    def cost(self) -> float:
        t = self.tour
        return math.fsum(distance(self.point(a), self.point(b)) for a, b in zip(t, t[1:] + t[:1]))

    def edges(self) -> list[tuple[int, int]]:
        t = self.tour
        return [(a, b) for a, b in zip(t, t[1:] + t[:1])]

    def links(self) -> frozenset[Link]:
        return frozenset(Link.between(self.point(a), self.point(b)) for a, b in self.edges())

    def to_network(self) -> Network:
        return Network(self.points, self.links())

    def __len__(self) -> int:
        return len(self.tour)


def canonical_tour(tour: Sequence[int]) -> tuple[int, ...]:
    """Rotate to start at the smallest id and orient so the second id < the last."""
    t = list(tour)
    k = t.index(min(t))
    t = t[k:] + t[:k]
    if len(t) > 2 and t[1] > t[-1]:
        t = [t[0]] + t[1:][::-1]
    return tuple(t)


def _ring_from_indices(points: Sequence[Point], order: np.ndarray) -> Ring:
    return Ring(tuple(points), tuple(points[i].id for i in order))


def tsp_heuristic(points: Sequence[Point], rng: np.random.Generator, budget: int = 4) -> Ring:
    """Nearest-neighbour construction plus 2-opt, with restarts.

    The first run starts from the best nearest-neighbour tour over every
    start node; each further restart starts from a random node.  The best
    2-opt local optimum wins, ties broken by canonical tour.
    """
    pts = sorted(points, key=lambda p: p.id)
    n = len(pts)
    if n < 3:
        raise ValueError("a tour needs at least 3 points")
    if budget < 1:
        raise ValueError("budget must be >= 1")
    w = distance_matrix(pts)
    eps = 1e-12 * max(1.0, float(w.max()))
    nn_costs = [K.tour_length(w, K.nearest_neighbor_tour(w, s)) for s in range(n)]
    starts = [int(np.argmin(nn_costs))]
    extra = min(budget - 1, n - 1)
    if extra > 0:
        others = [s for s in range(n) if s != starts[0]]
        starts += [others[i] for i in rng.choice(len(others), size=extra, replace=False)]
    best: Ring | None = None
    best_cost = math.inf
    for s in starts:
        order = K.two_opt(w, K.nearest_neighbor_tour(w, s), eps)
        cost = K.tour_length(w, order)
        ring = _ring_from_indices(pts, order)
        if best is None or cost < best_cost - 1e-9 * best_cost or (
                close(cost, best_cost) and ring.tour < best.tour):
            best, best_cost = ring, cost
    assert best is not None
    return best


def tsp_bruteforce(points: Sequence[Point]) -> Ring:
    """Exact minimum tour by enumeration (first node fixed, one direction per tour)."""
    pts = sorted(points, key=lambda p: p.id)
    n = len(pts)
    if not 3 <= n <= BRUTEFORCE_MAX:
        raise ValueError(f"brute force handles 3..{BRUTEFORCE_MAX} points, got {n}")
    w = distance_matrix(pts)
    best, best_cost = None, math.inf
    for perm in itertools.permutations(range(1, n)):
        if perm[0] > perm[-1]:
            continue
        order = (0,) + perm
        cost = math.fsum(w[a, b] for a, b in zip(order, order[1:] + order[:1]))
        if best is None or cost < best_cost - 1e-12 * best_cost:
            best, best_cost = order, cost
    return _ring_from_indices(pts, np.array(best))


def two_opt_gain(ring: Ring) -> float:
    """Largest saving of any single 2-opt move on `ring` (non-positive when 2-opt stable)."""
    pts = list(ring.points)
    index = {p.id: i for i, p in enumerate(pts)}
    w = distance_matrix(pts)
    return float(K.best_two_opt_gain(w, np.array([index[i] for i in ring.tour], dtype=np.int64)))


@dataclass(frozen=True)
class Splice:
    z: int
    x: int
    y: int
    mod_cost: float


def _splice_key(z: Point, pa: Point, pb: Point) -> tuple:
    a, b = sorted((pa.id, pb.id))
    return (distance(z, pa) + distance(z, pb), -distance(pa, pb), a, b)


def _splice_better(key: tuple, best: tuple) -> bool:
    if not close(key[0], best[0]):
        return key[0] < best[0]
    if not close(key[1], best[1]):
        return key[1] < best[1]
    return key[2:] < best[2:]


def _best_key(ring: Ring, z: Point) -> tuple:
    best: tuple | None = None
    for a, b in ring.edges():
        key = _splice_key(z, ring.point(a), ring.point(b))
        if best is None or _splice_better(key, best):
            best = key
    assert best is not None
    return best


def best_splice(ring: Ring, z: Point) -> Splice:
    """Adjacent pair (x, y) minimising |z-x| + |z-y|.

    Equal purchase costs fall back to the cheaper resulting ring (the longer
    (x, y) gets dropped), then to the smaller sorted pair.
    """
    if z.id in ring._by_id:  # type: ignore[attr-defined]
        raise ValueError(f"node {z.id} is already on the ring")
    cost, _, x, y = _best_key(ring, z)
    return Splice(z.id, x, y, cost)


def _apply_splice(ring: Ring, z: Point, s: Splice) -> Ring:
    t = list(ring.tour)
    i = t.index(s.x)
    j = t.index(s.y)
    n = len(t)
    if (i + 1) % n == j:
        t.insert(i + 1, z.id)
    elif (j + 1) % n == i:
        t.insert(j + 1, z.id)
    else:  # pragma: no cover - splice always names a tour edge
        raise AssertionError("splice endpoints are not adjacent")
    return Ring(ring.points + (z,), tuple(t))


def insert_node(ring: Ring, z: Point) -> tuple[Ring, float]:
    """Join `z` to the cheapest adjacent pair and drop the link between them."""
    s = best_splice(ring, z)
    return _apply_splice(ring, z, s), s.mod_cost


def _greedy_better(s: Splice, best: Splice) -> bool:
    if not close(s.mod_cost, best.mod_cost):
        return s.mod_cost < best.mod_cost
    return (s.z, s.x) < (best.z, best.x)


def insert_nodes_greedy(ring: Ring, zs: Iterable[Point]) -> tuple[Ring, float, list[Splice]]:
    """Insert nodes one at a time, always taking the globally cheapest splice next.

    Returns the grown ring, the total purchased length and the splices in
    the order they were applied.  Ties go to the smaller (z id, x id).
    """
    remaining = sorted(zs, key=lambda p: p.id)
    ids = [p.id for p in remaining]
    if len(set(ids)) != len(ids):
        raise ValueError("duplicate new nodes")
    clash = set(ids) & set(ring.tour)
    if clash:
        raise ValueError(f"nodes already on the ring: {sorted(clash)}")
    order: list[Splice] = []
    total = 0.0
    keys = {z.id: _best_key(ring, z) for z in remaining}
    while remaining:
        best: Splice | None = None
        for z in remaining:
            cost, _, x, y = keys[z.id]
            s = Splice(z.id, x, y, cost)
            if best is None or _greedy_better(s, best):
                best = s
        assert best is not None
        znew = next(p for p in remaining if p.id == best.z)
        ring = _apply_splice(ring, znew, best)
        remaining.remove(znew)
        del keys[znew.id]
        order.append(best)
        total += best.mod_cost
        px, py = ring.point(best.x), ring.point(best.y)
        for z in remaining:
            if keys[z.id][2:] == (best.x, best.y):
                keys[z.id] = _best_key(ring, z)
                continue
            for q in (px, py):
                key = _splice_key(z, q, znew)
                if _splice_better(key, keys[z.id]):
                    keys[z.id] = key
    return ring, total, order
