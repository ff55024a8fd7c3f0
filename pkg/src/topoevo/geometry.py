"""Locations, networks, inventories and the evolved-cost accounting.

Cost is length: every link costs its Euclidean length, and a network costs
the sum of its links.  Links are identified by their unordered endpoint-id
pair; the cached length rides along but does not take part in equality.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

REL_TOL = 1e-9


def close(a: float, b: float, rel: float = REL_TOL) -> bool:
    """Relative float comparison used for every cost equality."""
    return math.isclose(a, b, rel_tol=rel, abs_tol=rel)


@dataclass(frozen=True, order=True)
class Point:
    id: int
    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"point {self.id} has non-finite coordinates")


def distance(p: Point, q: Point) -> float:
    return math.hypot(p.x - q.x, p.y - q.y)


@dataclass(frozen=True)
class Region:
    width: float
    height: float

    def __post_init__(self) -> None:
        if not (self.width > 0 and self.height > 0):
            raise ValueError("region sides must be positive")

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def contains(self, p: Point) -> bool:
        return 0.0 <= p.x <= self.width and 0.0 <= p.y <= self.height


@dataclass(frozen=True)
class LocationPool:
    """Every location the network may ever have to reach."""

    region: Region
    points: tuple[Point, ...]

    def __post_init__(self) -> None:
        ids = [p.id for p in self.points]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate point ids in pool")
        if not self.points:
            raise ValueError("empty location pool")
        outside = [p.id for p in self.points if not self.region.contains(p)]
        if outside:
            raise ValueError(f"points outside region: {outside[:5]}")
        object.__setattr__(self, "_by_id", {p.id: p for p in self.points})

    @property
    def density(self) -> float:
        return len(self.points) / self.region.area

    @property
    def ids(self) -> list[int]:
        return [p.id for p in self.points]

    def __len__(self) -> int:
        return len(self.points)

    def __getitem__(self, node_id: int) -> Point:
        return self._by_id[node_id]  # type: ignore[attr-defined]

    def subset(self, ids: Iterable[int]) -> list[Point]:
        return [self[i] for i in sorted(ids)]

    @classmethod
    def uniform(cls, region: Region, size: int, rng) -> "LocationPool":
        """Pool of `size` uniform random points, ids 0..size-1."""
        xy = rng.uniform((0.0, 0.0), (region.width, region.height), size=(size, 2))
        pts = tuple(Point(i, float(x), float(y)) for i, (x, y) in enumerate(xy))
        return cls(region, pts)


@dataclass(frozen=True)
class Link:
    u: int
    v: int
    length: float = field(compare=False, hash=False)

    def __post_init__(self) -> None:
        if self.u == self.v:
            raise ValueError(f"self-loop at node {self.u}")
        if self.u > self.v:
            u, v = self.v, self.u
            object.__setattr__(self, "u", u)
            object.__setattr__(self, "v", v)
        if not self.length > 0:
            raise ValueError(f"link ({self.u},{self.v}) has non-positive length")

    @classmethod
    def between(cls, p: Point, q: Point) -> "Link":
        return cls(p.id, q.id, distance(p, q))

    @property
    def key(self) -> tuple[int, int]:
        return (self.u, self.v)

    def __lt__(self, other: "Link") -> bool:
        return self.key < other.key


def total_length(links: Iterable[Link]) -> float:
    return math.fsum(link.length for link in links)


@dataclass(frozen=True)
class Network:
    """Undirected network over a fixed set of located nodes."""

    points: tuple[Point, ...]
    links: frozenset[Link] = frozenset()

    def __post_init__(self) -> None:
        pts = tuple(sorted(self.points, key=lambda p: p.id))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "links", frozenset(self.links))
        by_id = {p.id: p for p in pts}
        if len(by_id) != len(pts):
            raise ValueError("duplicate node ids in network")
        for link in self.links:
            if link.u not in by_id or link.v not in by_id:
                raise ValueError(f"link {link.key} has an endpoint outside the node set")
            if not close(link.length, distance(by_id[link.u], by_id[link.v])):
                raise ValueError(f"link {link.key} length disagrees with coordinates")
        object.__setattr__(self, "_by_id", by_id)

    @classmethod
    def from_pairs(cls, points: Iterable[Point], pairs: Iterable[tuple[int, int]]) -> "Network":
        pts = tuple(points)
        by_id = {p.id: p for p in pts}
        return cls(pts, frozenset(Link.between(by_id[a], by_id[b]) for a, b in pairs))

    @property
    def nodes(self) -> frozenset[int]:
        return frozenset(self._by_id)  # type: ignore[attr-defined]

    @property
    def node_ids(self) -> list[int]:
        return [p.id for p in self.points]

    @property
    def cost(self) -> float:
        return network_cost(self)

    def point(self, node_id: int) -> Point:
        return self._by_id[node_id]  # type: ignore[attr-defined]

    def link(self, a: int, b: int) -> Link:
        return Link.between(self.point(a), self.point(b))

    def sorted_links(self) -> list[Link]:
        return sorted(self.links)

    def degree(self) -> dict[int, int]:
        deg = dict.fromkeys(self._by_id, 0)  # type: ignore[attr-defined]
        for link in self.links:
            deg[link.u] += 1
            deg[link.v] += 1
        return deg

    def with_links(self, links: Iterable[Link]) -> "Network":
        return Network(self.points, frozenset(links))


def network_cost(net: Network) -> float:
    return total_length(net.links)


@dataclass(frozen=True)
class Inventory:
    """Purchased links that are currently unused."""

    links: frozenset[Link] = frozenset()

    @property
    def value(self) -> float:
        return total_length(self.links)


@dataclass(frozen=True)
class Modification:
    mod_set: frozenset[Link]
    mod_cost: float
    inventory: Inventory


def account_modification(prev_net: Network, prev_inv: Inventory, new_net: Network) -> Modification:
    """Purchased links and resulting inventory when `prev_net` becomes `new_net`."""
    owned = prev_net.links | prev_inv.links
    mod_set = new_net.links - owned
    leftover = owned - new_net.links
    return Modification(frozenset(mod_set), total_length(mod_set), Inventory(frozenset(leftover)))


class LedgerError(AssertionError):
    def __init__(self, index: int, message: str):
        super().__init__(f"ledger violated at k={index}: {message}")
        self.index = index


@dataclass
class CostLedger:
    """Evolved-network cost series, one entry per environment.

    Index 0 holds the initial network (``c_mod[0]`` is its purchase cost and
    ``c_inv[0]`` is zero).  ``released`` is the value of links dropped for
    good at each step; it is always zero unless links are leased.
    """

    c_evo: list[float] = field(default_factory=list)
    c_mod: list[float] = field(default_factory=list)
    c_inv: list[float] = field(default_factory=list)
    c_opt: list[float] = field(default_factory=list)
    released: list[float] = field(default_factory=list)

    def append(self, c_evo: float, c_mod: float, c_inv: float, c_opt: float = math.nan,
               released: float = 0.0) -> None:
        self.c_evo.append(c_evo)
        self.c_mod.append(c_mod)
        self.c_inv.append(c_inv)
        self.c_opt.append(c_opt)
        self.released.append(released)

    def __len__(self) -> int:
        return len(self.c_evo)


def _ledger_tol(*values: float) -> float:
    return REL_TOL * max(1.0, *(abs(v) for v in values))


def check_ledger(ledger: CostLedger) -> None:
    """Raise LedgerError at the first step where the cost recursion breaks."""
    if len(ledger) < 2:
        raise LedgerError(0, "need the initial entry plus at least one step")
    if abs(ledger.c_inv[0]) > _ledger_tol(ledger.c_evo[0]):
        raise LedgerError(0, "initial inventory must be empty")
    for k in range(1, len(ledger)):
        expected = (ledger.c_evo[k - 1] + ledger.c_mod[k]
                    - (ledger.c_inv[k] - ledger.c_inv[k - 1]) - ledger.released[k])
        if abs(ledger.c_evo[k] - expected) > _ledger_tol(expected, ledger.c_evo[k]):
            raise LedgerError(k, f"C_evo={ledger.c_evo[k]!r}, recursion gives {expected!r}")
    last = len(ledger) - 1
    closed = (ledger.c_evo[0] + math.fsum(ledger.c_mod[1:]) - ledger.c_inv[last]
              - math.fsum(ledger.released[1:]))
    if abs(ledger.c_evo[last] - closed) > _ledger_tol(closed, ledger.c_evo[last]):
        raise LedgerError(last, f"closed form gives {closed!r}, ledger has {ledger.c_evo[last]!r}")


def verify_ledger(ledger: CostLedger) -> bool:
    try:
        check_ledger(ledger)
    except LedgerError:
        return False
    return True


def first_ledger_violation(ledger: CostLedger) -> int | None:
    try:
        check_ledger(ledger)
    except LedgerError as err:
        return err.index
    return None


def coordinates(points: Sequence[Point]) -> np.ndarray:
    """(n, 2) float array of point coordinates, in the given order."""
    return np.array([(p.x, p.y) for p in points], dtype=float).reshape(-1, 2)


def distance_matrix(points: Sequence[Point]) -> np.ndarray:
    xy = coordinates(points)
    diff = xy[:, None, :] - xy[None, :, :]
    return np.hypot(diff[..., 0], diff[..., 1])


def points_by_id(points: Iterable[Point]) -> Mapping[int, Point]:
    return {p.id: p for p in points}
