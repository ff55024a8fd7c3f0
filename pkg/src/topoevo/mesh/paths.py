"""Primary/secondary paths and the acceptability predicate for meshes.

A network is acceptable when every node pair has a primary (minimum-delay)
path and a secondary path that avoids the primary's interior nodes, both no
longer than the delay bound.  Delay is path length.
"""

from __future__ import annotations

import enum
import functools
import math
from dataclasses import dataclass
from itertools import combinations
from typing import Iterable, Sequence

import numpy as np

from .. import _kernels as K
from ..geometry import Link, Network, Point, distance_matrix


class InventoryPolicy(str, enum.Enum):
    """What happens to links the evolved network no longer needs."""

    INVENTORY = "inventory"
    OWNERSHIP = "ownership"
    LEASING = "leasing"


@dataclass(frozen=True)
class DesignParams:
    delay_bound: float
    p_add: float = 0.9
    p_del: float = 0.9
    stall_window: int = 10
    max_iterations: int = 500

    def __post_init__(self) -> None:
        if not self.delay_bound > 0:
            raise ValueError("delay bound must be positive")
        for name in ("p_add", "p_del"):
            p = getattr(self, name)
            if not 0 < p <= 1:
                raise ValueError(f"{name} must be in (0, 1], got {p}")
        if self.stall_window < 1:
            raise ValueError("stall_window must be >= 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be >= 1")

    @classmethod
    def for_region(cls, diagonal: float, factor: float = 1.3, **kw) -> "DesignParams":
        return cls(delay_bound=factor * diagonal, **kw)


REASONS = {
    K.NO_PRIMARY: "no-primary",
    K.NO_SECONDARY: "no-secondary",
    K.PRIMARY_DELAY: "primary-delay",
    K.SECONDARY_DELAY: "secondary-delay",
}


@dataclass(frozen=True)
class Path:
    nodes: tuple[int, ...]
    delay: float

    @property
    def interior(self) -> tuple[int, ...]:
        return self.nodes[1:-1]

    def links(self) -> list[tuple[int, int]]:
        return [tuple(sorted(e)) for e in zip(self.nodes, self.nodes[1:])]


@dataclass(frozen=True)
class PathPair:
    primary: Path
    secondary: Path | None


@dataclass(frozen=True)
class Violation:
    pair: tuple[int, int]
    reason: str
    delay: float
    bound: float

    def to_record(self) -> dict:
        return {"pair": list(self.pair), "reason": self.reason,
                "delay": None if math.isinf(self.delay) else self.delay, "bound": self.bound}


@dataclass(frozen=True)
class Verdict:
    acceptable: bool
    violation: Violation | None = None

    def __bool__(self) -> bool:
        return self.acceptable


def bound_with_slack(delay_bound: float) -> float:
    # closed bound, widened by float noise
    return delay_bound * (1.0 + 1e-12)


@functools.lru_cache(maxsize=256)
def _layout(points: tuple[Point, ...]):
    """Read-only geometry shared by every graph over the same node set."""
    pts = tuple(sorted(points, key=lambda p: p.id))
    ids = np.array([p.id for p in pts], dtype=np.int64)
    n = len(pts)
    w = distance_matrix(pts)
    lo, hi = np.triu_indices(n, 1)
    pidx = np.full((n, n), -1, dtype=np.int64)
    pidx[lo, hi] = np.arange(lo.size)
    arrays = (ids, w, lo, hi, pidx)
    for a in arrays:
        a.flags.writeable = False
    index = {int(i): k for k, i in enumerate(ids)}
    eps = 1e-9 * max(1.0, float(w.max()) if n else 1.0)
    return pts, index, eps, ids, w, lo.astype(np.int64), hi.astype(np.int64), pidx


class DenseGraph:
    """Index-based view of a node set used by the compiled kernels."""

    def __init__(self, points: Sequence[Point]):
        (self.points, self.index, self.eps, self.ids, self.w,
         self.plo, self.phi, self.pidx) = _layout(tuple(points))
        self.n = len(self.points)
        self.adj = np.zeros((self.n, self.n), dtype=np.uint8)
        self.nbr = np.zeros((self.n, self.n), dtype=np.int64)
        self.deg = np.zeros(self.n, dtype=np.int64)

    @classmethod
    def of(cls, net: Network) -> "DenseGraph":
        g = cls(net.points)
        g.set_links((link.u, link.v) for link in net.links)
        return g

    def set_links(self, pairs: Iterable[tuple[int, int]]) -> None:
        self.adj[:] = 0
        adj, index = self.adj, self.index
        for a, b in pairs:
            i, j = index[a], index[b]
            adj[i, j] = adj[j, i] = 1
        self.nbr, self.deg = K.build_lists(self.adj)

    def connect(self, i: int, j: int) -> None:
        K.link(self.adj, self.nbr, self.deg, i, j)

    def link_pairs(self) -> list[tuple[int, int]]:
        lo, hi = np.nonzero(np.triu(self.adj, 1))
        return [(int(self.ids[i]), int(self.ids[j])) for i, j in zip(lo, hi)]

    def to_network(self) -> Network:
        return Network.from_pairs(self.points, self.link_pairs())

    def path_ids(self, buf: np.ndarray, length: int) -> tuple[int, ...]:
        return tuple(int(self.ids[i]) for i in buf[:length])


def _locate(g: DenseGraph, u: int, v: int) -> tuple[int, int, bool]:
    if u == v:
        raise ValueError("path endpoints must differ")
    try:
        i, j = g.index[u], g.index[v]
    except KeyError as err:
        raise KeyError(f"unknown node {err.args[0]}") from None
    return (i, j, False) if i < j else (j, i, True)


def _oriented(nodes: tuple[int, ...], flip: bool) -> tuple[int, ...]:
    return tuple(reversed(nodes)) if flip else nodes


def primary_path(net: Network, u: int, v: int) -> Path | None:
    """Minimum-delay u-v path; ties go to fewer hops, then the smaller node sequence."""
    g = DenseGraph.of(net)
    lo, hi, flip = _locate(g, u, v)
    pbuf = np.empty(g.n, np.int64)
    sbuf = np.empty(g.n, np.int64)
    plen, pdelay, _, _ = K.pair_paths(g.adj, g.w, lo, hi, g.eps, pbuf, sbuf)
    if plen < 0:
        return None
    return Path(_oriented(g.path_ids(pbuf, plen), flip), float(pdelay))


def secondary_path(net: Network, u: int, v: int, primary: Path) -> Path | None:
    """Shortest u-v path once the primary's interior nodes (and a direct primary link) are gone."""
    g = DenseGraph.of(net)
    lo, hi, flip = _locate(g, u, v)
    nodes = primary.nodes if primary.nodes[0] == u else tuple(reversed(primary.nodes))
    if nodes[0] != u or nodes[-1] != v:
        raise ValueError("primary path does not join the requested pair")
    for a, b in zip(nodes, nodes[1:]):
        if not g.adj[g.index[a], g.index[b]]:
            raise ValueError(f"primary uses missing link ({a},{b})")
    local = np.array([g.index[x] for x in _oriented(nodes, flip)], dtype=np.int64)
    sbuf = np.empty(g.n, np.int64)
    slen, sdelay = K.secondary_given(g.adj, g.w, lo, hi, local, local.size, g.eps, sbuf)
    if slen < 0:
        return None
    return Path(_oriented(g.path_ids(sbuf, slen), flip), float(sdelay))


def path_pair(net: Network, u: int, v: int) -> PathPair | None:
    p = primary_path(net, u, v)
    if p is None:
        return None
    return PathPair(p, secondary_path(net, u, v, p))


@functools.lru_cache(maxsize=8)
def _scan_buffers(n: int):
    npairs = n * (n - 1) // 2
    return (np.empty((npairs, n), np.int64), np.empty((npairs, n), np.int64), np.empty(npairs, np.int64),
            np.empty(npairs, np.int64), np.empty(npairs), np.empty(npairs), np.empty(npairs, np.int64),
            np.empty(npairs, np.int64))


def _violations(g: DenseGraph, bound: float, collect_all: bool, exact: bool) -> list[tuple[int, int, float]]:
    # scratch is reused across calls; everything returned is copied out
    pc, sc, pl, sl, pd, sd, bad, codes = _scan_buffers(g.n)
    sl.fill(-1)
    sd.fill(np.inf)
    nbad = K.scan(g.nbr, g.deg, g.w, bound, g.eps, collect_all, exact, g.pidx,
                  pc, pl, pd, sc, sl, sd, bad, codes)
    out = []
    for k in range(nbad):
        p = bad[k]
        code = int(codes[k])
        delay = pd[p] if code == K.PRIMARY_DELAY else sd[p]
        out.append((int(p), code, float(delay)))
    return out


def is_acceptable(net: Network, params: DesignParams | float) -> Verdict:
    """Check every pair; the reported violation is the lexicographically first failing pair."""
    bound = params.delay_bound if isinstance(params, DesignParams) else float(params)
    if len(net.points) < 2:
        raise ValueError("acceptability needs at least two nodes")
    g = DenseGraph.of(net)
    found = _violations(g, bound_with_slack(bound), collect_all=True, exact=True)
    if not found:
        return Verdict(True)
    p, code, delay = min(found)
    pair = (int(g.ids[g.plo[p]]), int(g.ids[g.phi[p]]))
    return Verdict(False, Violation(pair, REASONS[code], delay, bound))


def complete_graph(points: Sequence[Point]) -> Network:
    pts = list(points)
    return Network(tuple(pts), frozenset(Link.between(p, q) for p, q in combinations(pts, 2)))


def best_detours(w: np.ndarray) -> np.ndarray:
    """min over w of d(u,w) + d(w,v) for every pair; inf on the diagonal."""
    n = w.shape[0]
    via = w[:, :, None] + w[None, :, :]  # via[u, x, v]
    idx = np.arange(n)
    via[idx, idx, :] = np.inf
    via[:, idx, idx] = np.inf
    best = via.min(axis=1)
    best[idx, idx] = np.inf
    return best


def is_feasible(points: Sequence[Point], params: DesignParams | float) -> Verdict:
    """Whether any acceptable network exists on these locations.

    The complete graph is acceptable whenever any network is: its primaries
    are direct links (fewest hops wins delay ties) and its secondaries are
    the best two-hop detours, which lower-bound both paths of every other
    design.  So the check reduces to every pair's best detour fitting the bound.
    """
    bound = params.delay_bound if isinstance(params, DesignParams) else float(params)
    pts = sorted(points, key=lambda p: p.id)
    if len(pts) < 2:
        raise ValueError("acceptability needs at least two nodes")
    w = distance_matrix(pts)
    limit = bound_with_slack(bound)
    lo, hi = np.triu_indices(len(pts), 1)
    direct = w[lo, hi]
    if len(pts) == 2:
        pair = (pts[0].id, pts[1].id)
        if direct[0] > limit:
            return Verdict(False, Violation(pair, REASONS[K.PRIMARY_DELAY], float(direct[0]), bound))
        return Verdict(False, Violation(pair, REASONS[K.NO_SECONDARY], math.inf, bound))
    detour = best_detours(w)[lo, hi]
    for k in np.flatnonzero((direct > limit) | (detour > limit)):
        pair = (pts[lo[k]].id, pts[hi[k]].id)
        if direct[k] > limit:
            return Verdict(False, Violation(pair, REASONS[K.PRIMARY_DELAY], float(direct[k]), bound))
        return Verdict(False, Violation(pair, REASONS[K.SECONDARY_DELAY], float(detour[k]), bound))
    return Verdict(True)


def feasible_prefix_length(points: Sequence[Point], params: DesignParams | float, start: int = 3) -> int:
    """Largest k such that every prefix points[:j], start <= j <= k, is feasible.

    Returns start - 1 when even the first prefix fails.  Points are taken in
    the given order, not sorted.
    """
    bound = params.delay_bound if isinstance(params, DesignParams) else float(params)
    limit = bound_with_slack(bound)
    w = distance_matrix(list(points))
    n = w.shape[0]
    best = np.full((n, n), np.inf)
    for j in range(n):
        # node j joins: it can serve as a detour for earlier pairs, and gets its own detours
        if j >= 2:
            via = w[:j, j][:, None] + w[j, :j][None, :]
            np.minimum(best[:j, :j], via, out=best[:j, :j])
            own = (w[j, :j][:, None] + w[:j, :j]).min(axis=0, initial=np.inf, where=~np.eye(j, dtype=bool))
            best[j, :j] = best[:j, j] = own
        k = j + 1
        if k >= start:
            sub = best[:k, :k]
            iu = np.triu_indices(k, 1)
            if (w[:k, :k][iu] > limit).any() or (sub[iu] > limit).any():
                return k - 1
    return n
