"""File formats: network and pool documents, result CSVs, TSPLIB export."""

from __future__ import annotations

import csv
import io
import json
import math
from typing import Any, Iterable, Sequence, TextIO

from .geometry import Link, LocationPool, Network, Point, Region
from .metrics import COLUMNS, MetricsRecord


class ParseError(ValueError):
    """Malformed input; `where` locates the problem (line:col or a JSON path)."""

    def __init__(self, message: str, where: str):
        super().__init__(f"{where}: {message}")
        self.where = where


def _dump(doc: dict) -> str:
    return json.dumps(doc, indent=1, sort_keys=False) + "\n"


def _load(text: str) -> Any:
    try:
        return json.loads(text)
    except json.JSONDecodeError as err:
        raise ParseError(err.msg, f"line {err.lineno} col {err.colno}") from None


def _need(obj: Any, key: str, where: str) -> Any:
    if not isinstance(obj, dict):
        raise ParseError("expected an object", where)
    if key not in obj:
        raise ParseError(f"missing field {key!r}", where)
    return obj[key]


def _number(v: Any, where: str) -> float:
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ParseError(f"expected a number, got {v!r}", where)
    return float(v)


def _int(v: Any, where: str) -> int:
    if isinstance(v, bool) or not isinstance(v, int):
        raise ParseError(f"expected an integer, got {v!r}", where)
    return v


def _points(raw: Any, where: str) -> list[Point]:
    if not isinstance(raw, list):
        raise ParseError("expected a list", where)
    out = []
    for i, item in enumerate(raw):
        at = f"{where}[{i}]"
        try:
            out.append(Point(_int(_need(item, "id", at), f"{at}.id"),
                             _number(_need(item, "x", at), f"{at}.x"),
                             _number(_need(item, "y", at), f"{at}.y")))
        except ValueError as err:
            if isinstance(err, ParseError):
                raise
            raise ParseError(str(err), at) from None
    return out


def _point_docs(points: Iterable[Point]) -> list[dict]:
    return [{"id": p.id, "x": p.x, "y": p.y} for p in sorted(points, key=lambda p: p.id)]


def network_to_text(net: Network, environment_index: int | None = None, seed: int | None = None) -> str:
    doc = {
        "nodes": _point_docs(net.points),
        "links": [[link.u, link.v] for link in net.sorted_links()],
        "meta": {"environment_index": environment_index, "seed": seed},
    }
    return _dump(doc)


def network_from_text(text: str) -> tuple[Network, dict]:
    """Parse a network document; returns the network and its meta block."""
    doc = _load(text)
    points = _points(_need(doc, "nodes", "$"), "$.nodes")
    by_id = {}
    for i, p in enumerate(points):
        if p.id in by_id:
            raise ParseError(f"duplicate node id {p.id}", f"$.nodes[{i}]")
        by_id[p.id] = p
    raw_links = _need(doc, "links", "$")
    if not isinstance(raw_links, list):
        raise ParseError("expected a list", "$.links")
    links = []
    for i, pair in enumerate(raw_links):
        at = f"$.links[{i}]"
        if not (isinstance(pair, list) and len(pair) == 2):
            raise ParseError("a link is a pair of node ids", at)
        a, b = (_int(v, at) for v in pair)
        for v in (a, b):
            if v not in by_id:
                raise ParseError(f"unknown node {v}", at)
        if a == b:
            raise ParseError(f"self-loop at node {a}", at)
        links.append(Link.between(by_id[a], by_id[b]))
    if len(set(links)) != len(links):
        raise ParseError("duplicate link", "$.links")
    meta = doc.get("meta") or {}
    return Network(tuple(points), frozenset(links)), meta


def pool_to_text(pool: LocationPool) -> str:
    doc = {"region": {"width": pool.region.width, "height": pool.region.height},
           "points": _point_docs(pool.points)}
    return _dump(doc)


def pool_from_text(text: str) -> LocationPool:
    doc = _load(text)
    reg = _need(doc, "region", "$")
    width = _number(_need(reg, "width", "$.region"), "$.region.width")
    height = _number(_need(reg, "height", "$.region"), "$.region.height")
    try:
        region = Region(width, height)
    except ValueError as err:
        raise ParseError(str(err), "$.region") from None
    points = _points(_need(doc, "points", "$"), "$.points")
    try:
        return LocationPool(region, tuple(points))
    except ValueError as err:
        raise ParseError(str(err), "$.points") from None


def export_tsplib(points: Sequence[Point], name: str = "topoevo") -> str:
    """TSPLIB EUC_2D instance; nodes are numbered 1..n in id order."""
    pts = sorted(points, key=lambda p: p.id)
    lines = [f"NAME: {name}", "TYPE: TSP", f"DIMENSION: {len(pts)}", "EDGE_WEIGHT_TYPE: EUC_2D",
             "NODE_COORD_SECTION"]
    lines += [f"{k} {p.x!r} {p.y!r}" for k, p in enumerate(pts, start=1)]
    lines.append("EOF")
    return "\n".join(lines) + "\n"


def parse_tsplib(text: str) -> list[Point]:
    """Read NODE_COORD_SECTION of an EUC_2D instance; ids become 0-based."""
    points: list[Point] = []
    in_coords = False
    dim = None
    for lineno, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s:
            continue
        if s == "EOF":
            break
        if in_coords:
            parts = s.split()
            if len(parts) != 3:
                raise ParseError("expected 'index x y'", f"line {lineno}")
            try:
                idx, x, y = int(parts[0]), float(parts[1]), float(parts[2])
            except ValueError:
                raise ParseError(f"bad coordinate line {s!r}", f"line {lineno}") from None
            points.append(Point(idx - 1, x, y))
            continue
        if s.startswith("NODE_COORD_SECTION"):
            in_coords = True
            continue
        key, _, value = s.partition(":")
        key, value = key.strip(), value.strip()
        if key == "EDGE_WEIGHT_TYPE" and value != "EUC_2D":
            raise ParseError(f"unsupported edge weight type {value}", f"line {lineno}")
        if key == "DIMENSION":
            try:
                dim = int(value)
            except ValueError:
                raise ParseError(f"bad dimension {value!r}", f"line {lineno}") from None
    if dim is not None and dim != len(points):
        raise ParseError(f"DIMENSION {dim} but {len(points)} coordinates", "NODE_COORD_SECTION")
    return points


def _fmt(v: Any) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(float(v))
    return str(v)


def write_records(out: TextIO, records: Iterable[MetricsRecord]) -> None:
    w = csv.writer(out, lineterminator="\n")
    w.writerow(COLUMNS)
    for rec in records:
        w.writerow([_fmt(getattr(rec, c)) for c in COLUMNS])


def records_to_csv(records: Iterable[MetricsRecord]) -> str:
    buf = io.StringIO()
    write_records(buf, records)
    return buf.getvalue()


_INT_COLUMNS = {"run", "k", "n"}
_STR_COLUMNS = {"model", "policy"}


def read_records(text: str) -> list[MetricsRecord]:
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        raise ParseError("empty results file", "line 1")
    header = tuple(rows[0])
    if header != COLUMNS:
        raise ParseError(f"unexpected header {','.join(header)}", "line 1")
    out = []
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != len(COLUMNS):
            raise ParseError(f"expected {len(COLUMNS)} fields, got {len(row)}", f"line {lineno}")
        kw: dict[str, Any] = {}
        for c, v in zip(COLUMNS, row):
            try:
                kw[c] = int(v) if c in _INT_COLUMNS else v if c in _STR_COLUMNS else float(v)
            except ValueError:
                raise ParseError(f"bad value {v!r} for {c}", f"line {lineno}") from None
        out.append(MetricsRecord(**kw))
    return out
