"""Probabilistic clean-slate (OPT) and incremental (EVO) mesh design.

One iteration of either procedure starts from a seed network, adds
candidate links shortest-first (each with probability ``p_add``) until the
network is acceptable, then walks links longest-first and drops each
removable one with probability ``p_del``.  The design calls repeat
iterations and keep the best result until ``stall_window`` iterations in a
row fail to improve it.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

from .. import _kernels as K
from ..geometry import REL_TOL, Inventory, Link, Network, Point, account_modification, distance
from ..ring import Ring, tsp_heuristic
from .paths import DenseGraph, DesignParams, InventoryPolicy, Violation, bound_with_slack, is_feasible

log = logging.getLogger(__name__)


class NoAcceptableNetwork(RuntimeError):
    """No acceptable network was found for a node set."""

    def __init__(self, message: str, violation: Violation | None = None, node_ids: Sequence[int] = ()):
        super().__init__(message)
        self.violation = violation
        self.node_ids = tuple(node_ids)

    def report(self) -> dict:
        rec = {"error": str(self), "nodes": list(self.node_ids)}
        if self.violation is not None:
            rec.update(self.violation.to_record())
        return rec


class _State:
    """Dense working network plus the per-pair path caches of the kernels."""

    def __init__(self, g: DenseGraph, delay_bound: float):
        self.g = g
        self.bound = bound_with_slack(delay_bound)
        npairs = g.plo.size
        n = g.n
        self.pcache = np.zeros((npairs, n), np.int64)
        self.scache = np.zeros((npairs, n), np.int64)
        self.plens = np.zeros(npairs, np.int64)
        self.slens = np.zeros(npairs, np.int64)
        self.pdelays = np.zeros(npairs)
        self.sdelays = np.zeros(npairs)
        self._bad = np.empty(npairs, np.int64)
        self._codes = np.empty(npairs, np.int64)
        self.checks = 0

    @property
    def adj(self) -> np.ndarray:
        return self.g.adj

    def scan(self) -> np.ndarray:
        """All violating pairs; caches are valid when this comes back empty."""
        g = self.g
        self.checks += 1
        nbad = K.scan(g.nbr, g.deg, g.w, self.bound, g.eps, True, False, g.pidx,
                      self.pcache, self.plens, self.pdelays, self.scache, self.slens, self.sdelays,
                      self._bad, self._codes)
        return self._bad[:nbad].copy()

    def add_until_acceptable(self, candidates: np.ndarray, p_add: float, rng: np.random.Generator) -> bool:
        """Add candidate links in order, each with probability p_add, until acceptable.

        Known violators from the last full scan are rechecked first; a full
        scan only runs once all of them are resolved.
        """
        g = self.g
        bad = self.scan()
        if bad.size == 0:
            return True
        lo, hi = g.plo[bad], g.phi[bad]
        pos = 0
        for i, j in candidates:
            if rng.random() >= p_add:
                continue
            g.connect(i, j)
            pos = K.first_violating(g.nbr, g.deg, g.w, self.bound, g.eps, lo, hi, pos)
            if pos < lo.size:
                continue
            bad = self.scan()
            if bad.size == 0:
                return True
            lo, hi = g.plo[bad], g.phi[bad]
            pos = 0
        return False

    def prune(self, links: np.ndarray, p_del: float, rng: np.random.Generator) -> list[tuple[int, int]]:
        """Try links in order; each removable one goes with probability p_del.

        The draw comes first and the removability check only runs on a
        success, which has the same distribution as check-then-draw.
        """
        g = self.g
        dropped = []
        for i, j in links:
            if not g.adj[i, j]:
                continue
            if rng.random() >= p_del:
                continue
            if K.try_remove(g.adj, g.nbr, g.deg, g.w, self.bound, g.eps, i, j, g.plo, g.phi,
                            self.pcache, self.plens, self.pdelays,
                            self.scache, self.slens, self.sdelays):
                dropped.append((int(i), int(j)))
        return dropped


def _index_pairs(g: DenseGraph, pairs: Iterable[tuple[int, int]]) -> np.ndarray:
    out = sorted(tuple(sorted((g.index[a], g.index[b]))) for a, b in pairs)
    return np.array(out, dtype=np.int64).reshape(-1, 2)


def _by_length(g: DenseGraph, pairs: np.ndarray, descending: bool) -> np.ndarray:
    if pairs.size == 0:
        return pairs
    lengths = g.w[pairs[:, 0], pairs[:, 1]]
    order = np.lexsort((pairs[:, 1], pairs[:, 0], -lengths if descending else lengths))
    return pairs[order]


def _complement(g: DenseGraph) -> np.ndarray:
    """Absent links, shortest first (ties by index pair)."""
    mask = (g.adj == 0) & np.triu(np.ones((g.n, g.n), dtype=bool), 1)
    lo, hi = np.nonzero(mask)
    return _by_length(g, np.stack([lo, hi], axis=1).astype(np.int64), descending=False)


def _present(g: DenseGraph) -> np.ndarray:
    lo, hi = np.nonzero(np.triu(g.adj, 1))
    return np.stack([lo, hi], axis=1).astype(np.int64)


def _improves(key: tuple[float, ...], best: tuple[float, ...] | None) -> bool:
    """Lexicographic strict improvement with relative float slack on each part."""
    if best is None:
        return True
    for a, b in zip(key, best):
        tol = REL_TOL * max(1.0, abs(a), abs(b))
        if a < b - tol:
            return True
        if a > b + tol:
            return False
    return False


def _require_feasible(points: Sequence[Point], params: DesignParams) -> None:
    verdict = is_feasible(points, params)
    if not verdict:
        raise NoAcceptableNetwork(
            "no acceptable network exists: even the complete graph fails "
            f"({verdict.violation.reason} for pair {verdict.violation.pair})",
            verdict.violation, [p.id for p in points])


# ---- OPT ---------------------------------------------------------------------

def opt_iteration(nodes: Sequence[Point], params: DesignParams, rng: np.random.Generator,
                  ring: Ring | None = None) -> tuple[Network, bool]:
    """One OPT iteration from the heuristic TSP ring over `nodes`."""
    if len(nodes) < 3:
        raise ValueError("mesh design needs at least 3 nodes")
    if ring is None:
        ring = tsp_heuristic(nodes, rng)
    g = DenseGraph(nodes)
    g.set_links(ring.edges())
    state = _State(g, params.delay_bound)
    found = state.add_until_acceptable(_complement(g), params.p_add, rng)
    if found:
        state.prune(_by_length(g, _present(g), descending=True), params.p_del, rng)
    return g.to_network(), found


@dataclass
class DesignTrace:
    """Best-so-far objective after every iteration of one design call."""

    objectives: list[tuple[float, ...]]
    found: list[bool]

    @property
    def iterations(self) -> int:
        return len(self.found)


def opt_design(nodes: Sequence[Point], params: DesignParams, rng: np.random.Generator,
               trace: DesignTrace | None = None) -> Network:
    """Cheapest acceptable network over repeated OPT iterations."""
    if len(nodes) < 3:
        raise ValueError("mesh design needs at least 3 nodes")
    _require_feasible(nodes, params)
    ring = tsp_heuristic(nodes, rng)
    best: Network | None = None
    best_key: tuple[float, ...] | None = None
    stall = 0
    for _ in range(params.max_iterations):
        net, found = opt_iteration(nodes, params, rng, ring=ring)
        if found and _improves((net.cost,), best_key):
            best, best_key, stall = net, (net.cost,), 0
        else:
            stall += 1
        if trace is not None:
            trace.objectives.append(best_key if best_key is not None else (math.inf,))
            trace.found.append(found)
        if best is not None and stall >= params.stall_window:
            break
    if best is None:
        raise NoAcceptableNetwork(f"no acceptable network after {params.max_iterations} OPT iterations",
                                  None, [p.id for p in nodes])
    return best


# ---- EVO ---------------------------------------------------------------------

@dataclass(frozen=True)
class Attachment:
    z: int
    x: int
    y: int
    cost: float


def attach_new_nodes(prev_net: Network, prev_inv: Inventory, new_nodes: Sequence[Point],
                     policy: InventoryPolicy) -> tuple[Network, list[Attachment]]:
    """Seed network for an EVO step: previous links, reusable inventory, new nodes attached.

    Each new node is joined to both endpoints x, y of the existing link that
    minimises |z-x| + |z-y|; the link (x, y) itself stays.  Nodes go in
    cheapest-first, as for rings, so later nodes may attach through earlier
    ones.  Ties go to the smaller ids.
    """
    policy = InventoryPolicy(policy)
    ids = {p.id for p in new_nodes}
    if ids & prev_net.nodes:
        raise ValueError(f"new nodes already present: {sorted(ids & prev_net.nodes)}")
    points = {p.id: p for p in prev_net.points}
    links = {link.key for link in prev_net.links}
    if policy is InventoryPolicy.INVENTORY:
        links |= {link.key for link in prev_inv.links if link.u in points and link.v in points}
    remaining = sorted(new_nodes, key=lambda p: p.id)
    steps: list[Attachment] = []

    def best_for(z: Point) -> tuple[float, int, int]:
        best = None
        if links:
            candidates = links
        else:
            # a lone node or pair has no link to attach across
            near = sorted(points.values(), key=lambda q: (distance(z, q), q.id))[:2]
            candidates = [tuple(sorted(q.id for q in near))]
        for a, b in candidates:
            pa, pb = points[a], points[b]
            key = (distance(z, pa) + distance(z, pb), a, b)
            if _improves(key, best):
                best = key
        assert best is not None
        return best

    while remaining:
        choice = None
        for z in remaining:
            key = best_for(z)
            rank = (key[0], z.id, key[1])
            if choice is None or _improves(rank, choice[0]):
                choice = (rank, key, z)
        assert choice is not None
        _, (cost, x, y), z = choice
        points[z.id] = z
        links.add(tuple(sorted((z.id, x))))
        links.add(tuple(sorted((z.id, y))))
        remaining.remove(z)
        steps.append(Attachment(z.id, x, y, cost))
    return Network.from_pairs(points.values(), links), steps


def _owned(prev_net: Network, prev_inv: Inventory, policy: InventoryPolicy) -> frozenset[Link]:
    if policy is InventoryPolicy.INVENTORY:
        return prev_net.links | prev_inv.links
    return prev_net.links


def evo_iteration(prev_net: Network, prev_inv: Inventory, new_nodes: Sequence[Point],
                  params: DesignParams, policy: InventoryPolicy, rng: np.random.Generator,
                  seed: Network | None = None) -> tuple[Network, Inventory, bool]:
    """One EVO iteration: seed, probabilistic additions, then two deletion phases."""
    policy = InventoryPolicy(policy)
    if seed is None:
        seed, _ = attach_new_nodes(prev_net, prev_inv, new_nodes, policy)
    g = DenseGraph.of(seed)
    state = _State(g, params.delay_bound)
    found = state.add_until_acceptable(_complement(g), params.p_add, rng)
    owned = _owned(prev_net, prev_inv, policy)
    if found:
        owned_idx = {tuple(sorted((g.index[l.u], g.index[l.v]))) for l in owned}
        present = [tuple(e) for e in _present(g)]
        fresh = np.array([e for e in present if e not in owned_idx], dtype=np.int64).reshape(-1, 2)
        state.prune(_by_length(g, fresh, descending=True), params.p_del, rng)
        if policy is not InventoryPolicy.OWNERSHIP:
            old = np.array([e for e in present if e in owned_idx], dtype=np.int64).reshape(-1, 2)
            state.prune(_by_length(g, old, descending=True), params.p_del, rng)
    net = g.to_network()
    if policy is InventoryPolicy.INVENTORY:
        inv = account_modification(prev_net, prev_inv, net).inventory
    else:
        inv = Inventory()
    return net, inv, found


@dataclass(frozen=True)
class EvoResult:
    network: Network
    inventory: Inventory
    mod_cost: float
    released: float

    def __iter__(self):
        return iter((self.network, self.inventory, self.mod_cost))


def evo_design(prev_net: Network, prev_inv: Inventory, new_nodes: Sequence[Point],
               params: DesignParams, policy: InventoryPolicy | str, rng: np.random.Generator,
               trace: DesignTrace | None = None) -> EvoResult:
    """Acceptable network of least purchase cost (then least total cost) over repeated EVO iterations.

    ``released`` is the value of previously owned links that a Leasing
    design gives up; it is zero under the other policies.
    """
    policy = InventoryPolicy(policy)
    if policy is not InventoryPolicy.INVENTORY:
        prev_inv = Inventory()
    all_points = list(prev_net.points) + list(new_nodes)
    if len(all_points) < 3:
        raise ValueError("mesh design needs at least 3 nodes")
    _require_feasible(all_points, params)
    seed, _ = attach_new_nodes(prev_net, prev_inv, new_nodes, policy)
    best: Network | None = None
    best_key: tuple[float, ...] | None = None
    stall = 0
    for _ in range(params.max_iterations):
        net, _, found = evo_iteration(prev_net, prev_inv, new_nodes, params, policy, rng, seed=seed)
        key = None
        if found:
            key = (account_modification(prev_net, prev_inv, net).mod_cost, net.cost)
        if key is not None and _improves(key, best_key):
            best, best_key, stall = net, key, 0
        else:
            stall += 1
        if trace is not None:
            trace.objectives.append(best_key if best_key is not None else (math.inf, math.inf))
            trace.found.append(found)
        if best is not None and stall >= params.stall_window:
            break
    if best is None:
        raise NoAcceptableNetwork(f"no acceptable network after {params.max_iterations} EVO iterations",
                                  None, [p.id for p in all_points])
    mod = account_modification(prev_net, prev_inv, best)
    if policy is InventoryPolicy.INVENTORY:
        return EvoResult(best, mod.inventory, mod.mod_cost, 0.0)
    released = math.fsum(l.length for l in prev_net.links - best.links)
    return EvoResult(best, Inventory(), mod.mod_cost, released)
