"""Experiment protocols: single-node growth, multi-node growth, policy comparison.

Each repetition draws its own location pool and node order, then designs the
optimized and evolved networks side by side over identical node sets.  All
randomness comes from named substreams of the master seed (see ``rng``), so
a (config, seed) pair always reproduces the same rows.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Callable, Sequence

import numpy as np

from . import __version__
from .analysis import confidence_interval_90, first_zero_crossing
from .expansion import ExpansionModel, added_for, node_order
from .geometry import (CostLedger, Inventory, LocationPool, Network, Point, Region, account_modification,
                       check_ledger)
from .io import network_from_text, network_to_text, read_records, write_records
from .mesh import (DesignParams, InventoryPolicy, NoAcceptableNetwork, evo_design, feasible_prefix_length,
                   opt_design)
from .metrics import COLUMNS, MetricsRecord, compare
from .ring import Ring, insert_node, insert_nodes_greedy, tsp_heuristic
from .rng import component_stream

log = logging.getLogger(__name__)

DEFAULT_RHO_GRID = tuple(1.0 + 0.25 * i for i in range(13))
SINGLE, MULTI = 0, 1


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    topology: str = "mesh"
    model: str = "random"
    initial_size: int = 3
    max_size: int = 60
    base_size: int | None = None
    rho_grid: tuple[float, ...] = DEFAULT_RHO_GRID
    width: float = 3000.0
    height: float = 1500.0
    pool_size: int = 500
    d_factor: float = 1.3
    p_add: float = 0.9
    p_del: float = 0.9
    stall_window: int = 10
    max_iterations: int = 500
    policy: str = "inventory"
    repetitions: int = 20
    seed: int = 2024
    tsp_budget: int = 4
    snapshot_sizes: tuple[int, ...] = ()
    max_redraws: int = 200

    def __post_init__(self) -> None:
        object.__setattr__(self, "rho_grid", tuple(float(r) for r in self.rho_grid))
        object.__setattr__(self, "snapshot_sizes", tuple(int(n) for n in self.snapshot_sizes))
        if self.topology not in ("ring", "mesh"):
            raise ConfigError(f"topology must be ring or mesh, got {self.topology!r}")
        try:
            ExpansionModel(self.model)
            InventoryPolicy(self.policy)
        except ValueError as err:
            raise ConfigError(str(err)) from None
        for name in ("initial_size", "max_size", "pool_size", "repetitions", "stall_window",
                     "max_iterations", "tsp_budget", "max_redraws"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be positive")
        if self.initial_size < 3:
            raise ConfigError("initial size must be at least 3")
        if self.max_size < self.initial_size:
            raise ConfigError("max_size must be >= initial_size")
        for name in ("width", "height", "d_factor"):
            if not getattr(self, name) > 0:
                raise ConfigError(f"{name} must be positive")
        for name in ("p_add", "p_del"):
            if not 0 < getattr(self, name) <= 1:
                raise ConfigError(f"{name} must be in (0, 1]")
        if not self.rho_grid or any(r < 1 or r > 4 for r in self.rho_grid):
            raise ConfigError("rho grid must be non-empty and inside [1, 4]")
        if any(b <= a for a, b in zip(self.rho_grid, self.rho_grid[1:])):
            raise ConfigError("rho grid must be increasing")
        if self.base_size is not None and self.base_size < self.initial_size:
            raise ConfigError("base_size must be >= initial_size")
        if max(self.max_size, self.multi_total) > self.pool_size:
            raise ConfigError("pool too small for the requested network sizes")

    @property
    def region(self) -> Region:
        return Region(self.width, self.height)

    @property
    def params(self) -> DesignParams:
        return DesignParams.for_region(self.region.diagonal, self.d_factor, p_add=self.p_add, p_del=self.p_del,
                                       stall_window=self.stall_window, max_iterations=self.max_iterations)

    @property
    def base(self) -> int:
        if self.base_size is not None:
            return self.base_size
        return 15 if self.topology == "mesh" else 50

    @property
    def multi_total(self) -> int:
        return self.base + added_for(self.base, self.rho_grid[-1]) if self.rho_grid else self.base

    def to_dict(self) -> dict:
        d = asdict(self)
        d["rho_grid"] = list(self.rho_grid)
        d["snapshot_sizes"] = list(self.snapshot_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown config keys: {sorted(unknown)}")
        kw = dict(d)
        for key in ("rho_grid", "snapshot_sizes"):
            if key in kw:
                kw[key] = tuple(kw[key])
        try:
            return cls(**kw)
        except TypeError as err:
            raise ConfigError(str(err)) from None


@dataclass
class RepOutput:
    rows: list[MetricsRecord]
    extras: dict
    snapshots: dict[str, Network] = field(default_factory=dict)


@dataclass
class ExperimentResult:
    kind: str
    config: ExperimentConfig
    rows: list[MetricsRecord]
    extras: dict
    snapshots: dict[str, Network] = field(default_factory=dict)

    def select(self, **match) -> list[MetricsRecord]:
        return [r for r in self.rows if all(getattr(r, k) == v for k, v in match.items())]

    def aggregates(self) -> list[dict]:
        return aggregate(self.rows)

    def provenance(self) -> dict:
        return {"kind": self.kind, "config": self.config.to_dict(), "seed": self.config.seed,
                "version": __version__, "code": code_fingerprint(), "extras": self.extras}


def code_fingerprint() -> str:
    """Digest of the sources that shape experiment output (the CLI is excluded)."""
    h = hashlib.sha256()
    root = Path(__file__).parent
    for f in sorted(root.rglob("*.py")):
        if f.name != "cli.py":
            h.update(f.relative_to(root).as_posix().encode())
            h.update(f.read_bytes())
    return h.hexdigest()[:16]


def snapshot_key(run: int, n: int, design: str, policy: str) -> str:
    return f"run{run}_n{n}_{design}_{policy}"


# ---- shared plumbing -----------------------------------------------------------

def _pool(cfg: ExperimentConfig, rep: int) -> LocationPool:
    return LocationPool.uniform(cfg.region, cfg.pool_size, component_stream(cfg.seed, rep, "pool"))


def _order(cfg: ExperimentConfig, pool: LocationPool, rep: int, total: int) -> tuple[list[Point], int]:
    """Node order for one repetition, redrawn until every mesh prefix is feasible.

    Returns the points and the number of redraws it took.
    """
    for attempt in range(cfg.max_redraws):
        order = node_order(pool, cfg.model, component_stream(cfg.seed, rep, "expansion", attempt),
                           total, cfg.initial_size)
        pts = [pool[i] for i in order]
        if cfg.topology == "ring" or feasible_prefix_length(pts, cfg.params, cfg.initial_size) >= total:
            return pts, attempt
    raise NoAcceptableNetwork(f"run {rep}: no feasible node order after {cfg.max_redraws} draws")


def _context(err: NoAcceptableNetwork, rep: int, k: int) -> NoAcceptableNetwork:
    return NoAcceptableNetwork(f"run {rep}, environment {k}: {err}", err.violation, err.node_ids)


# ---- ring traces ----------------------------------------------------------------

def _ring_single(cfg: ExperimentConfig, rep: int, _policies: Sequence[str]) -> RepOutput:
    pool = _pool(cfg, rep)
    pts, redraws = _order(cfg, pool, rep, cfg.max_size)
    ledger = CostLedger()
    rows = []
    evo: Ring | None = None
    for k, n in enumerate(range(cfg.initial_size, cfg.max_size + 1)):
        opt = tsp_heuristic(pts[:n], component_stream(cfg.seed, rep, "opt", SINGLE, k), cfg.tsp_budget)
        released = 0.0
        if evo is None:
            evo, c_mod = opt, opt.cost
        else:
            grown, c_mod = insert_node(evo, pts[n - 1])
            # rings never reuse a dropped link, so it is released rather than banked
            released = account_modification(evo.to_network(), Inventory(), grown.to_network()).inventory.value
            evo = grown
        ledger.append(evo.cost, c_mod, 0.0, opt.cost, released)
        rows.append(compare(rep, k, cfg.model, "leasing", opt.to_network(), evo.to_network(),
                            c_mod, 0.0, robustness=False))
    check_ledger(ledger)
    return RepOutput(rows, {"redraws": redraws})


def _ring_multi(cfg: ExperimentConfig, rep: int, _policies: Sequence[str]) -> RepOutput:
    pool = _pool(cfg, rep)
    base_n = cfg.base
    pts, redraws = _order(cfg, pool, rep, cfg.multi_total)
    base = tsp_heuristic(pts[:base_n], component_stream(cfg.seed, rep, "opt", MULTI, 0), cfg.tsp_budget)
    rows = []
    for gi, rho in enumerate(cfg.rho_grid):
        m = added_for(base_n, rho)
        if m == 0:
            opt, evo, c_mod = base, base, 0.0
        else:
            opt = tsp_heuristic(pts[:base_n + m], component_stream(cfg.seed, rep, "opt", MULTI, gi + 1),
                                cfg.tsp_budget)
            evo, c_mod, _ = insert_nodes_greedy(base, pts[base_n:base_n + m])
        rows.append(compare(rep, gi, cfg.model, "leasing", opt.to_network(), evo.to_network(),
                            c_mod, 0.0, robustness=False))
    e = [r.e for r in rows]
    return RepOutput(rows, {"redraws": redraws, "rho_hat": first_zero_crossing(cfg.rho_grid, e)})


# ---- mesh traces ----------------------------------------------------------------

def _mesh_single(cfg: ExperimentConfig, rep: int, policies: Sequence[str]) -> RepOutput:
    params = cfg.params
    pool = _pool(cfg, rep)
    pts, redraws = _order(cfg, pool, rep, cfg.max_size)
    state: dict[str, tuple[Network | None, Inventory, CostLedger]] = {
        pol: (None, Inventory(), CostLedger()) for pol in policies}
    rows = []
    snaps: dict[str, Network] = {}
    for k, n in enumerate(range(cfg.initial_size, cfg.max_size + 1)):
        nodes = pts[:n]
        try:
            opt = opt_design(nodes, params, component_stream(cfg.seed, rep, "opt", SINGLE, k))
        except NoAcceptableNetwork as err:
            raise _context(err, rep, k) from err
        if n in cfg.snapshot_sizes:
            snaps[snapshot_key(rep, n, "opt", "-")] = opt
        for pol in policies:
            prev, inv, ledger = state[pol]
            released = 0.0
            if prev is None:
                evo, c_mod = opt, opt.cost
            else:
                try:
                    res = evo_design(prev, inv, [pts[n - 1]], params, pol,
                                     component_stream(cfg.seed, rep, "evo", SINGLE, k))
                except NoAcceptableNetwork as err:
                    raise _context(err, rep, k) from err
                evo, inv, c_mod, released = res.network, res.inventory, res.mod_cost, res.released
            ledger.append(evo.cost, c_mod, inv.value, opt.cost, released)
            state[pol] = (evo, inv, ledger)
            rows.append(compare(rep, k, cfg.model, pol, opt, evo, c_mod, inv.value))
            if n in cfg.snapshot_sizes:
                snaps[snapshot_key(rep, n, "evo", pol)] = evo
    for _, _, ledger in state.values():
        check_ledger(ledger)
    return RepOutput(rows, {"redraws": redraws}, snaps)


def _mesh_multi(cfg: ExperimentConfig, rep: int, policies: Sequence[str]) -> RepOutput:
    params = cfg.params
    pool = _pool(cfg, rep)
    base_n = cfg.base
    pts, redraws = _order(cfg, pool, rep, cfg.multi_total)
    pol = policies[0]
    # grow the evolved base one node at a time
    evo: Network | None = None
    inv = Inventory()
    for k, n in enumerate(range(cfg.initial_size, base_n + 1)):
        try:
            if evo is None:
                evo = opt_design(pts[:n], params, component_stream(cfg.seed, rep, "opt", SINGLE, k))
            else:
                res = evo_design(evo, inv, [pts[n - 1]], params, pol,
                                 component_stream(cfg.seed, rep, "evo", SINGLE, k))
                evo, inv = res.network, res.inventory
        except NoAcceptableNetwork as err:
            raise _context(err, rep, k) from err
    assert evo is not None
    base, base_inv = evo, inv
    rows = []
    for gi, rho in enumerate(cfg.rho_grid):
        m = added_for(base_n, rho)
        nodes = pts[:base_n + m]
        try:
            opt = opt_design(nodes, params, component_stream(cfg.seed, rep, "opt", MULTI, gi))
            if m == 0:
                grown, grown_inv, c_mod = base, base_inv, 0.0
            else:
                res = evo_design(base, base_inv, pts[base_n:base_n + m], params, pol,
                                 component_stream(cfg.seed, rep, "evo", MULTI, gi))
                grown, grown_inv, c_mod = res.network, res.inventory, res.mod_cost
        except NoAcceptableNetwork as err:
            raise _context(err, rep, gi) from err
        rows.append(compare(rep, gi, cfg.model, pol, opt, grown, c_mod, grown_inv.value))
    e = [r.e for r in rows]
    return RepOutput(rows, {"redraws": redraws, "rho_hat": first_zero_crossing(cfg.rho_grid, e)})


# ---- runners --------------------------------------------------------------------

_TRACES: dict[tuple[str, str], Callable[[ExperimentConfig, int, Sequence[str]], RepOutput]] = {
    ("ring", "single-node"): _ring_single,
    ("ring", "multi-node"): _ring_multi,
    ("mesh", "single-node"): _mesh_single,
    ("mesh", "multi-node"): _mesh_multi,
    ("mesh", "policies"): _mesh_single,
}


def _policies_for(kind: str, cfg: ExperimentConfig) -> list[str]:
    if kind == "policies":
        return [p.value for p in InventoryPolicy]
    return [InventoryPolicy(cfg.policy).value]


def _one(args: tuple[str, ExperimentConfig, int]) -> RepOutput:
    kind, cfg, rep = args
    return _TRACES[(cfg.topology, kind)](cfg, rep, _policies_for(kind, cfg))


def _run(kind: str, cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    if (cfg.topology, kind) not in _TRACES:
        raise ConfigError(f"{kind} experiments need a mesh topology")
    jobs = [(kind, cfg, rep) for rep in range(cfg.repetitions)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            outs = list(ex.map(_one, jobs))
    else:
        outs = [_one(job) for job in jobs]
    rows = [r for out in outs for r in out.rows]
    snaps = {k: v for out in outs for k, v in out.snapshots.items()}
    extras = {"per_run": [out.extras for out in outs]}
    if kind == "multi-node":
        extras["rho_hat_mean_curve"] = _rho_hat_of_means(rows, cfg.rho_grid)
    return ExperimentResult(kind, cfg, rows, extras, snaps)


def _rho_hat_of_means(rows: Sequence[MetricsRecord], grid: Sequence[float]) -> float | None:
    means = [float(np.mean([r.e for r in rows if r.k == gi])) for gi in range(len(grid))]
    return first_zero_crossing(grid, means)


def run_single_node_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _run("single-node", cfg, workers)


def run_multi_node_experiment(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _run("multi-node", cfg, workers)


def run_policy_comparison(cfg: ExperimentConfig, workers: int = 1) -> ExperimentResult:
    return _run("policies", cfg, workers)


RUNNERS = {"single-node": run_single_node_experiment, "multi-node": run_multi_node_experiment,
           "policies": run_policy_comparison}


# ---- aggregation and files ------------------------------------------------------

METRIC_COLUMNS = COLUMNS[COLUMNS.index("c_opt"):]


def aggregate(rows: Sequence[MetricsRecord]) -> list[dict]:
    """Mean and 90% half-width of every metric per (model, policy, k)."""
    groups: dict[tuple, list[MetricsRecord]] = {}
    for r in rows:
        groups.setdefault((r.model, r.policy, r.k), []).append(r)
    out = []
    for (model, policy, k), grp in sorted(groups.items()):
        rec = {"model": model, "policy": policy, "k": k, "n": grp[0].n, "count": len(grp)}
        for c in METRIC_COLUMNS:
            vals = [getattr(r, c) for r in grp]
            if any(math.isnan(v) for v in vals):
                mean = half = math.nan
            elif len(vals) >= 2:
                mean, half = confidence_interval_90(vals)
            else:
                mean, half = float(vals[0]), math.nan
            rec[f"{c}_mean"] = mean
            rec[f"{c}_ci90"] = half
        out.append(rec)
    return out


def aggregate_csv(rows: Sequence[MetricsRecord]) -> str:
    recs = aggregate(rows)
    if not recs:
        return ""
    head = list(recs[0])
    lines = [",".join(head)]
    for rec in recs:
        lines.append(",".join(_cell(rec[h]) for h in head))
    return "\n".join(lines) + "\n"


def _cell(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def save_result(result: ExperimentResult, out_dir: Path | str) -> Path:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    with open(out / "results.csv", "w", newline="") as fh:
        write_records(fh, result.rows)
    (out / "aggregates.csv").write_text(aggregate_csv(result.rows))
    (out / "provenance.json").write_text(json.dumps(result.provenance(), indent=1, sort_keys=True) + "\n")
    if result.snapshots:
        snap_dir = out / "snapshots"
        snap_dir.mkdir(exist_ok=True)
        for key, net in sorted(result.snapshots.items()):
            (snap_dir / f"{key}.json").write_text(network_to_text(net, seed=result.config.seed))
    return out


def load_result(out_dir: Path | str) -> ExperimentResult:
    out = Path(out_dir)
    prov = json.loads((out / "provenance.json").read_text())
    rows = read_records((out / "results.csv").read_text())
    snaps = {}
    snap_dir = out / "snapshots"
    if snap_dir.is_dir():
        for f in sorted(snap_dir.glob("*.json")):
            snaps[f.stem] = network_from_text(f.read_text())[0]
    return ExperimentResult(prov["kind"], ExperimentConfig.from_dict(prov["config"]), rows, prov["extras"], snaps)


def run_cached(kind: str, cfg: ExperimentConfig, out_dir: Path | str, workers: int = 1) -> ExperimentResult:
    """Reuse results in `out_dir` when they were produced by this exact config and code."""
    out = Path(out_dir)
    prov_file = out / "provenance.json"
    if prov_file.exists() and (out / "results.csv").exists():
        prov = json.loads(prov_file.read_text())
        if (prov.get("kind") == kind and prov.get("config") == cfg.to_dict()
                and prov.get("code") == code_fingerprint()):
            log.info("reusing results in %s", out)
            return load_result(out)
    result = RUNNERS[kind](cfg, workers)
    save_result(result, out)
    return result
