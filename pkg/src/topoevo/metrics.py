"""Comparison metrics between optimized and evolved designs."""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import asdict, dataclass, fields

import numpy as np

from . import _kernels as K
from .geometry import Network
from .mesh.paths import DenseGraph

# Heuristic designs can land the evolved network slightly below the
# "optimized" one; overheads below this are flagged rather than treated as bugs.
OVERHEAD_SLACK = -0.05


def cost_overhead(c_evo: float, c_opt: float) -> float:
    if c_opt <= 0:
        raise ValueError("optimized cost must be positive")
    return c_evo / c_opt - 1.0


def evolvability(c_mod: float, c_opt: float) -> float:
    if c_opt <= 0:
        raise ValueError("optimized cost must be positive")
    return 1.0 - c_mod / c_opt


def inventory_overhead(c_inv: float, c_evo: float) -> float:
    if c_evo <= 0:
        raise ValueError("evolved cost must be positive")
    return c_inv / c_evo


def _same_nodes(a: Network, b: Network) -> None:
    if a.nodes != b.nodes:
        raise ValueError("networks must span the same node set")


def topological_similarity(a: Network, b: Network) -> float:
    """Jaccard coefficient of the two link sets (1 when both are empty)."""
    _same_nodes(a, b)
    ka = {link.key for link in a.links}
    kb = {link.key for link in b.links}
    union = ka | kb
    if not union:
        return 1.0
    return len(ka & kb) / len(union)


class Disconnected(ValueError):
    pass


@dataclass(frozen=True)
class PrimaryRoutes:
    """Primary path of every unordered pair, as local-index sequences."""

    ids: np.ndarray
    paths: np.ndarray
    lengths: np.ndarray
    delays: np.ndarray

    @property
    def pairs(self) -> int:
        return len(self.lengths)

    def path(self, p: int) -> np.ndarray:
        return self.paths[p, : self.lengths[p]]


def primary_routes(net: Network) -> PrimaryRoutes:
    if len(net.points) < 2:
        raise ValueError("need at least two nodes")
    g = DenseGraph.of(net)
    npairs = g.plo.size
    paths = np.zeros((npairs, g.n), np.int64)
    lengths = np.zeros(npairs, np.int64)
    delays = np.zeros(npairs)
    K.all_primary_paths(g.adj, g.w, g.eps, g.pidx, paths, lengths, delays)
    if (lengths < 0).any():
        p = int(np.argmax(lengths < 0))
        raise Disconnected(f"no path between {int(g.ids[g.plo[p]])} and {int(g.ids[g.phi[p]])}")
    return PrimaryRoutes(g.ids, paths, lengths, delays)


def node_betweenness(net: Network) -> dict[int, float]:
    """Share of all unordered pairs whose primary path passes through each node (interior only)."""
    routes = primary_routes(net)
    counts = np.zeros(len(routes.ids), np.int64)
    for p in range(routes.pairs):
        path = routes.path(p)
        counts[path[1:-1]] += 1
    total = routes.pairs
    return {int(i): float(counts[k] / total) for k, i in enumerate(routes.ids)}


def link_betweenness(net: Network) -> dict[tuple[int, int], float]:
    """Share of all unordered pairs whose primary path uses each link."""
    routes = primary_routes(net)
    ids = routes.ids
    counts = Counter()
    for p in range(routes.pairs):
        path = routes.path(p)
        for a, b in zip(path[:-1], path[1:]):
            u, v = int(ids[a]), int(ids[b])
            counts[(u, v) if u < v else (v, u)] += 1
    total = routes.pairs
    return {link.key: counts[link.key] / total for link in net.sorted_links()}


def mean_node_betweenness(net: Network) -> float:
    return float(np.mean(list(node_betweenness(net).values())))


@dataclass(frozen=True)
class DegreeStats:
    histogram: dict[int, int]
    skewness: float
    frac_deg_ge8: float
    frac_deg2: float


def skewness(values) -> float:
    """Population skewness m3 / m2^1.5; zero for constant data."""
    x = np.asarray(values, dtype=float)
    d = x - x.mean()
    m2 = float(np.mean(d ** 2))
    if m2 == 0.0:
        return 0.0
    return float(np.mean(d ** 3)) / m2 ** 1.5


def degree_statistics(net: Network) -> DegreeStats:
    if not net.points:
        raise ValueError("empty network")
    deg = list(net.degree().values())
    n = len(deg)
    return DegreeStats(dict(sorted(Counter(deg).items())), skewness(deg),
                       sum(d >= 8 for d in deg) / n, sum(d == 2 for d in deg) / n)


def primary_delay_ratio(evo: Network, opt: Network) -> float:
    """Mean primary delay of `evo` over that of `opt`, averaged over all pairs."""
    _same_nodes(evo, opt)
    de = primary_routes(evo).delays
    do = primary_routes(opt).delays
    return math.fsum(de) / math.fsum(do)


def average_link_length(net: Network) -> float:
    if not net.links:
        raise ValueError("network has no links")
    return net.cost / len(net.links)


@dataclass(frozen=True)
class MetricsRecord:
    """One CSV row: a (run, environment) comparison of the two designs."""

    run: int
    k: int
    n: int
    model: str
    policy: str
    c_opt: float
    c_evo: float
    c_mod: float
    c_inv: float
    v: float
    e: float
    r: float
    t: float
    mean_bc_opt: float
    mean_bc_evo: float
    delay_ratio: float
    avg_len_opt: float
    avg_len_evo: float
    skew_opt: float
    skew_evo: float

    @property
    def overhead_flagged(self) -> bool:
        return self.v < OVERHEAD_SLACK

    def row(self) -> dict:
        return asdict(self)


COLUMNS = tuple(f.name for f in fields(MetricsRecord))


def compare(run: int, k: int, model: str, policy: str, opt: Network, evo: Network,
            c_mod: float, c_inv: float, robustness: bool = True) -> MetricsRecord:
    """Build the record for one environment.

    With `robustness` off the path-based columns (BC, delay ratio) are
    left as NaN, which keeps long ring traces cheap.
    """
    _same_nodes(opt, evo)
    c_opt, c_evo = opt.cost, evo.cost
    if robustness:
        ro, re_ = primary_routes(opt), primary_routes(evo)
        bc_opt = _mean_bc(ro)
        bc_evo = _mean_bc(re_)
        ratio = math.fsum(re_.delays) / math.fsum(ro.delays)
    else:
        bc_opt = bc_evo = ratio = math.nan
    return MetricsRecord(
        run=run, k=k, n=len(opt.points), model=model, policy=policy,
        c_opt=c_opt, c_evo=c_evo, c_mod=c_mod, c_inv=c_inv,
        v=cost_overhead(c_evo, c_opt), e=evolvability(c_mod, c_opt),
        r=inventory_overhead(c_inv, c_evo), t=topological_similarity(opt, evo),
        mean_bc_opt=bc_opt, mean_bc_evo=bc_evo, delay_ratio=ratio,
        avg_len_opt=average_link_length(opt), avg_len_evo=average_link_length(evo),
        skew_opt=degree_statistics(opt).skewness, skew_evo=degree_statistics(evo).skewness,
    )


def _mean_bc(routes: PrimaryRoutes) -> float:
    interior = int(np.sum(np.maximum(routes.lengths - 2, 0)))
    return interior / routes.pairs / len(routes.ids)
