"""Command line entry point.

Exit codes: 0 success, 2 no acceptable network (a JSON report goes to
stdout), 3 bad configuration or unreadable input.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import os
import sys
from dataclasses import fields
from pathlib import Path
from typing import Sequence

from .analysis import Series, inverse_sqrt_fit, mann_kendall, power_law_fit, rho_curve_fit
from .experiments import RUNNERS, ConfigError, ExperimentConfig, run_cached, save_result
from .geometry import Inventory, LocationPool, Network, Region
from .io import ParseError, network_from_text, network_to_text, pool_from_text, pool_to_text, read_records
from .mesh import DesignParams, NoAcceptableNetwork, evo_design, opt_design
from .metrics import average_link_length, compare, degree_statistics, link_betweenness, node_betweenness
from .ring import Ring, insert_nodes_greedy, tsp_heuristic
from .rng import component_stream

OK, NO_NETWORK, BAD_INPUT = 0, 2, 3
OUTPUT_ENV = "TOPOEVO_OUTPUT_DIR"

# config fields that become --flags; tuples take comma separated values
_FIELDS = {f.name: f for f in fields(ExperimentConfig)}
_TUPLES = {"rho_grid": float, "snapshot_sizes": int}


def _flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _tuple_of(kind):
    def parse(text: str):
        return tuple(kind(v) for v in text.split(",") if v.strip())
    return parse


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("experiment config (overrides --config)")
    for name, f in _FIELDS.items():
        if name in _TUPLES:
            g.add_argument(_flag(name), type=_tuple_of(_TUPLES[name]), default=None, metavar="A,B,...")
        elif name == "base_size":
            g.add_argument(_flag(name), type=int, default=None)
        else:
            g.add_argument(_flag(name), type=type(f.default), default=None)
    p.add_argument("--config", type=Path, help="JSON file with config fields")


def _config(args: argparse.Namespace) -> ExperimentConfig:
    doc: dict = {}
    if args.config is not None:
        try:
            doc = json.loads(args.config.read_text())
        except json.JSONDecodeError as err:
            raise ParseError(err.msg, f"{args.config} line {err.lineno} col {err.colno}") from None
        if not isinstance(doc, dict):
            raise ConfigError("config file must hold a JSON object")
    for name in _FIELDS:
        v = getattr(args, name, None)
        if v is not None:
            doc[name] = v
    return ExperimentConfig.from_dict(doc)


def _read(path: Path) -> str:
    return sys.stdin.read() if str(path) == "-" else path.read_text()


def _emit(text: str, out: Path | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        out.parent.mkdir(parents=True, exist_ok=True)
        out.write_text(text)


def _params(args: argparse.Namespace, region: Region) -> DesignParams:
    return DesignParams.for_region(region.diagonal, args.d_factor, p_add=args.p_add, p_del=args.p_del,
                                   stall_window=args.stall_window, max_iterations=args.max_iterations)


def _design_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--pool", type=Path, required=True, help="pool document (region and candidate points)")
    p.add_argument("--topology", choices=("ring", "mesh"), default="mesh")
    p.add_argument("--d-factor", type=float, default=1.3)
    p.add_argument("--p-add", type=float, default=0.9)
    p.add_argument("--p-del", type=float, default=0.9)
    p.add_argument("--stall-window", type=int, default=10)
    p.add_argument("--max-iterations", type=int, default=500)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("-o", "--output", type=Path)


def _ids(text: str) -> list[int]:
    return [int(v) for v in text.split(",") if v.strip()]


def _select(pool: LocationPool, ids: Sequence[int] | None):
    if ids is None:
        return list(pool.points)
    missing = [i for i in ids if i not in set(pool.ids)]
    if missing:
        raise ConfigError(f"ids not in pool: {missing[:5]}")
    return [pool[i] for i in ids]


# ---- subcommands ----------------------------------------------------------------

def cmd_gen_pool(args: argparse.Namespace) -> int:
    region = Region(args.width, args.height)
    if args.pool_size < 1:
        raise ConfigError("pool size must be positive")
    pool = LocationPool.uniform(region, args.pool_size, component_stream(args.seed, args.run, "pool"))
    _emit(pool_to_text(pool), args.output)
    return OK


def cmd_design_opt(args: argparse.Namespace) -> int:
    pool = pool_from_text(_read(args.pool))
    nodes = _select(pool, args.nodes)
    rng = component_stream(args.seed, 0, "opt")
    if args.topology == "ring":
        net = tsp_heuristic(nodes, rng).to_network()
    else:
        net = opt_design(nodes, _params(args, pool.region), rng)
    _emit(network_to_text(net, seed=args.seed), args.output)
    print(json.dumps({"nodes": len(nodes), "links": len(net.links), "cost": net.cost}), file=sys.stderr)
    return OK


def cmd_design_evo(args: argparse.Namespace) -> int:
    pool = pool_from_text(_read(args.pool))
    prev, meta = network_from_text(args.network.read_text())
    inv = Inventory()
    if args.inventory is not None:
        inv = Inventory(network_from_text(args.inventory.read_text())[0].links)
    new = _select(pool, args.add)
    clash = prev.nodes & {p.id for p in new}
    if clash:
        raise ConfigError(f"nodes already in the network: {sorted(clash)[:5]}")
    rng = component_stream(args.seed, 0, "evo")
    if args.topology == "ring":
        ring = _ring_of(prev)
        grown, mod, _ = insert_nodes_greedy(ring, new)
        net, new_inv, released = grown.to_network(), Inventory(), 0.0
    else:
        res = evo_design(prev, inv, new, _params(args, pool.region), args.policy, rng)
        net, new_inv, mod, released = res.network, res.inventory, res.mod_cost, res.released
    _emit(network_to_text(net, meta.get("environment_index"), args.seed), args.output)
    if args.inventory_out is not None:
        _emit(network_to_text(Network(net.points, new_inv.links)), args.inventory_out)
    print(json.dumps({"cost": net.cost, "mod_cost": mod, "inventory": new_inv.value, "released": released}),
          file=sys.stderr)
    return OK


def _ring_of(net: Network) -> Ring:
    """Recover the tour of a ring-shaped network."""
    deg = net.degree()
    if len(net.points) < 3 or any(d != 2 for d in deg.values()) or len(net.links) != len(net.points):
        raise ConfigError("network is not a ring")
    nbrs: dict[int, list[int]] = {i: [] for i in deg}
    for link in net.links:
        nbrs[link.u].append(link.v)
        nbrs[link.v].append(link.u)
    start = min(deg)
    tour, prev, cur = [start], None, start
    while True:
        nxt = next(v for v in sorted(nbrs[cur]) if v != prev)
        if nxt == start:
            break
        tour.append(nxt)
        prev, cur = cur, nxt
    if len(tour) != len(net.points):
        raise ConfigError("network is not a single ring")
    return Ring(tuple(net.points), tuple(tour))


def cmd_experiment(args: argparse.Namespace) -> int:
    cfg = _config(args)
    out = args.output_dir or Path(os.environ.get(OUTPUT_ENV, "results")) / args.command
    if args.reuse:
        result = run_cached(args.command, cfg, out, args.workers)
    else:
        result = RUNNERS[args.command](cfg, args.workers)
        save_result(result, out)
    print(json.dumps({"output": str(out), "rows": len(result.rows)}))
    return OK


def cmd_metrics(args: argparse.Namespace) -> int:
    opt, _ = network_from_text(args.opt.read_text())
    evo, _ = network_from_text(args.evo.read_text())
    rec = compare(0, 0, "-", "-", opt, evo, args.c_mod, args.c_inv).row()
    for key in ("run", "k", "model", "policy"):
        rec.pop(key)
    if args.detail:
        for name, net in (("opt", opt), ("evo", evo)):
            ds = degree_statistics(net)
            rec[f"{name}_degree_histogram"] = ds.histogram
            rec[f"{name}_avg_link_length"] = average_link_length(net)
            rec[f"{name}_node_bc"] = node_betweenness(net)
            rec[f"{name}_link_bc"] = {f"{u}-{v}": b for (u, v), b in link_betweenness(net).items()}
    _emit(json.dumps(rec, indent=1, default=_nan_safe) + "\n", args.output)
    return OK


def _nan_safe(v):
    return str(v)


_COST_COLUMNS = ("c_opt", "c_evo", "c_mod")
_RATIO_COLUMNS = ("v", "e", "r", "t", "delay_ratio")


def _fmt(v: float) -> str:
    return "nan" if v is None or (isinstance(v, float) and math.isnan(v)) else repr(float(v))


def cmd_analyze(args: argparse.Namespace) -> int:
    rows = read_records(_read(args.results))
    groups: dict[tuple[str, str], dict[int, list]] = {}
    for r in rows:
        groups.setdefault((r.model, r.policy), {}).setdefault(r.k, []).append(r)
    columns = args.metrics or list(_COST_COLUMNS + _RATIO_COLUMNS)
    out_rows = []
    for (model, policy), by_k in sorted(groups.items()):
        ks = sorted(by_k)
        ns = [by_k[k][0].n for k in ks]
        x = [n / ns[0] for n in ns] if args.rho else [float(n) for n in ns]
        keep = [i for i, n in enumerate(ns) if n >= args.min_n]
        for col in columns:
            y = [math.fsum(getattr(r, col) for r in by_k[k]) / len(by_k[k]) for k in ks]
            xs, ys = [x[i] for i in keep], [y[i] for i in keep]
            if len(xs) < 4 or any(math.isnan(v) for v in ys):
                continue
            s = Series(tuple(xs), tuple(ys))
            try:
                if args.rho:
                    fit = rho_curve_fit(s, model)
                elif col in _COST_COLUMNS:
                    fit = power_law_fit(s)
                else:
                    fit = inverse_sqrt_fit(s)
            except ValueError:
                fit = None
            mk = mann_kendall(ys)
            coef = "" if fit is None else ";".join(f"{k}={v!r}" for k, v in zip(fit.names, fit.coefficients))
            out_rows.append([col, model, policy, "" if fit is None else fit.kind, coef,
                             _fmt(math.nan if fit is None else fit.r2), _fmt(mk.p), mk.trend])
    buf = sys.stdout if args.output is None else open(args.output, "w", newline="")
    try:
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["metric", "model", "policy", "fit", "coefficients", "r2", "p", "trend"])
        w.writerows(out_rows)
    finally:
        if buf is not sys.stdout:
            buf.close()
    return OK


# ---- parser -----------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="topoevo", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-pool", help="draw a uniform location pool")
    p.add_argument("--width", type=float, default=3000.0)
    p.add_argument("--height", type=float, default=1500.0)
    p.add_argument("--pool-size", type=int, default=500)
    p.add_argument("--seed", type=int, default=2024)
    p.add_argument("--run", type=int, default=0, help="repetition index; matches the experiment pools")
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_gen_pool)

    p = sub.add_parser("design-opt", help="design an optimized network over pool nodes")
    _design_flags(p)
    p.add_argument("--nodes", type=_ids, help="comma separated ids (default: the whole pool)")
    p.set_defaults(func=cmd_design_opt)

    p = sub.add_parser("design-evo", help="grow an existing network by new pool nodes")
    _design_flags(p)
    p.add_argument("--network", type=Path, required=True)
    p.add_argument("--inventory", type=Path, help="network document whose links are the inventory")
    p.add_argument("--add", type=_ids, required=True, help="comma separated ids of the new nodes")
    p.add_argument("--policy", choices=("inventory", "ownership", "leasing"), default="inventory")
    p.add_argument("--inventory-out", type=Path)
    p.set_defaults(func=cmd_design_evo)

    for kind, text in (("single-node", "grow one node per environment"),
                       ("multi-node", "one multi-node step per expansion factor"),
                       ("policies", "compare inventory policies")):
        p = sub.add_parser(kind, help=text)
        _add_config_flags(p)
        p.add_argument("--output-dir", type=Path, help=f"default: ${OUTPUT_ENV}/{kind} or results/{kind}")
        p.add_argument("--workers", type=int, default=1)
        p.add_argument("--reuse", action="store_true", help="keep results made by the same config and code")
        p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("metrics", help="compare an optimized and an evolved network")
    p.add_argument("--opt", type=Path, required=True)
    p.add_argument("--evo", type=Path, required=True)
    p.add_argument("--c-mod", type=float, default=0.0)
    p.add_argument("--c-inv", type=float, default=0.0)
    p.add_argument("--detail", action="store_true", help="include degree histograms and betweenness")
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_metrics)

    p = sub.add_parser("analyze", help="fits and trend tests over a results CSV")
    p.add_argument("results", type=Path)
    p.add_argument("--metrics", type=lambda s: s.split(","), help="columns to analyze")
    p.add_argument("--rho", action="store_true", help="multi-node results: x is the expansion factor")
    p.add_argument("--min-n", type=int, default=0)
    p.add_argument("-o", "--output", type=Path)
    p.set_defaults(func=cmd_analyze)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING)
    try:
        return args.func(args)
    except NoAcceptableNetwork as err:
        print(json.dumps(err.report(), indent=1))
        return NO_NETWORK
    except (ConfigError, ParseError) as err:
        print(f"error: {err}", file=sys.stderr)
        return BAD_INPUT
    except (OSError, ValueError) as err:
        print(f"error: {err}", file=sys.stderr)
        return BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
