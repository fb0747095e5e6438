"""Fiber topology, demand matrix and candidate device positions."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass
from functools import cached_property
from pathlib import Path
from typing import Iterable, Mapping, Union

import yaml

from . import naming

NodeId = Union[int, str]

_ID_RE = re.compile(r"^[A-Za-z0-9]+$")
_TOPOLOGY_KEYS = {"nodes", "edges", "name"}
_EDGE_KEYS = {"u", "v", "length_km"}
DEMAND_COLUMNS = ("s", "t", "demand_kbps", "beta")


class InputError(ValueError):
    """Malformed topology or demand document.

    ``location`` names the offending entry (``edges[3]``, ``line 7``...).
    """

    def __init__(self, message: str, location: str | None = None):
        self.message = message
        self.location = location
        super().__init__(f"{location}: {message}" if location else message)


def node_key(node: NodeId) -> tuple[int, int | str]:
    """Total order on node ids: integers first (numerically), then strings."""
    if isinstance(node, bool):
        raise TypeError("boolean node ids are not allowed")
    if isinstance(node, int):
        return (0, node)
    return (1, node)


def _check_id(node: object, location: str) -> NodeId:
    if isinstance(node, bool) or not isinstance(node, (int, str)):
        raise InputError(f"node id must be an integer or string, got {node!r}", location)
    if isinstance(node, int) and node < 0:
        raise InputError(f"integer node ids must be non-negative, got {node}", location)
    if isinstance(node, str) and not _ID_RE.match(node):
        raise InputError(f"node id {node!r} must be alphanumeric", location)
    return node


@dataclass(frozen=True)
class Topology:
    """Undirected fiber graph in canonical form.

    Nodes are sorted by :func:`node_key`; each edge is stored once as
    ``(u, v, length_km)`` with ``u`` before ``v``.
    """

    nodes: tuple[NodeId, ...]
    edges: tuple[tuple[NodeId, NodeId, float], ...]
    name: str = ""

    @classmethod
    def build(
        cls,
        nodes: Iterable[NodeId],
        edges: Iterable[tuple[NodeId, NodeId, float]],
        name: str = "",
    ) -> Topology:
        """Validate and canonicalize raw node and edge lists."""
        node_list = [_check_id(n, f"nodes[{i}]") for i, n in enumerate(nodes)]
        seen_names: dict[str, NodeId] = {}
        for i, n in enumerate(node_list):
            if str(n) in seen_names:
                raise InputError(f"duplicate node id {n!r}", f"nodes[{i}]")
            seen_names[str(n)] = n
        known = set(node_list)

        canon: dict[tuple[NodeId, NodeId], float] = {}
        for i, edge in enumerate(edges):
            loc = f"edges[{i}]"
            u, v, length = edge
            if u not in known or v not in known:
                missing = u if u not in known else v
                raise InputError(f"dangling endpoint {missing!r}", loc)
            if u == v:
                raise InputError(f"self-loop on node {u!r}", loc)
            if isinstance(length, bool) or not isinstance(length, (int, float)):
                raise InputError(f"length_km must be a number, got {length!r}", loc)
            length = float(length)
            if not math.isfinite(length):
                raise InputError("length_km must be finite", loc)
            if length < 0:
                raise InputError(f"negative length {length}", loc)
            key = (u, v) if node_key(u) < node_key(v) else (v, u)
            if key in canon:
                raise InputError(f"duplicate edge {key[0]!r}-{key[1]!r}", loc)
            canon[key] = length

        ordered = sorted(canon.items(), key=lambda kv: (node_key(kv[0][0]), node_key(kv[0][1])))
        return cls(
            nodes=tuple(sorted(node_list, key=node_key)),
            edges=tuple((u, v, length) for (u, v), length in ordered),
            name=name,
        )

    @cached_property
    def adjacency(self) -> dict[NodeId, dict[NodeId, float]]:
        adj: dict[NodeId, dict[NodeId, float]] = {n: {} for n in self.nodes}
        for u, v, length in self.edges:
            adj[u][v] = length
            adj[v][u] = length
        return adj

    def length(self, u: NodeId, v: NodeId) -> float:
        return self.adjacency[u][v]

    def has_edge(self, u: NodeId, v: NodeId) -> bool:
        return v in self.adjacency.get(u, {})

    def edge_keys(self) -> list[tuple[NodeId, NodeId]]:
        return [(u, v) for u, v, _ in self.edges]

    def relabel(self, mapping: Mapping[NodeId, NodeId]) -> Topology:
        return Topology.build(
            [mapping[n] for n in self.nodes],
            [(mapping[u], mapping[v], length) for u, v, length in self.edges],
            name=self.name,
        )


@dataclass(frozen=True, order=True)
class CscEdge:
    """Client-server-client position ``u - p - v`` with server ``p``.

    Canonical orientation keeps ``u`` before ``v``; ``(v, p, u)`` is the same
    position.
    """

    u: NodeId
    p: NodeId
    v: NodeId
    l_up: float
    l_pv: float

    @property
    def key(self) -> tuple[NodeId, NodeId, NodeId]:
        return (self.u, self.p, self.v)

    @property
    def clients(self) -> tuple[NodeId, NodeId]:
        return (self.u, self.v)


def enumerate_csc_edges(topology: Topology) -> list[CscEdge]:
    """All unordered 2-hop positions, sorted by ``(u, p, v)``."""
    out = []
    adj = topology.adjacency
    for p in topology.nodes:
        nbrs = sorted(adj[p], key=node_key)
        for i, u in enumerate(nbrs):
            for v in nbrs[i + 1:]:
                out.append(CscEdge(u, p, v, adj[u][p], adj[p][v]))
    out.sort(key=lambda c: (node_key(c.u), node_key(c.p), node_key(c.v)))
    return out


def incident_device_count_expr(
    topology: Topology,
    node: NodeId,
    csc_edges: Iterable[CscEdge] | None = None,
) -> dict[str, float]:
    """Linear expression I(v): C2C devices on incident edges plus CSC devices
    where ``node`` is a client. CSC devices served *by* ``node`` do not count.
    """
    if node not in topology.adjacency:
        raise KeyError(f"unknown node {node!r}")
    if csc_edges is None:
        csc_edges = enumerate_csc_edges(topology)
    expr: dict[str, float] = {}
    for u, v, _ in topology.edges:
        if node in (u, v):
            expr[naming.s_var(u, v)] = 1.0
    for c in csc_edges:
        if node in (c.u, c.v):
            expr[naming.shat_var(c.u, c.p, c.v)] = 1.0
    return expr


@dataclass(frozen=True)
class Demand:
    s: NodeId
    t: NodeId
    kbps: float
    beta: float = 1.0

    @property
    def key_demand(self) -> float:
        return self.kbps * self.beta

    @property
    def pair(self) -> tuple[NodeId, NodeId]:
        return (self.s, self.t)


def _check_demand(d: Demand, seen: set, location: str) -> None:
    if d.s == d.t:
        raise InputError(f"demand from {d.s!r} to itself", location)
    if (d.s, d.t) in seen:
        raise InputError(f"duplicate demand pair ({d.s!r}, {d.t!r})", location)
    for name, val in (("demand_kbps", d.kbps), ("beta", d.beta)):
        if not math.isfinite(val) or val < 0:
            raise InputError(f"{name} must be finite and >= 0, got {val}", location)
    seen.add((d.s, d.t))


@dataclass(frozen=True)
class DemandMatrix:
    """Ordered-pair demands; pairs not listed carry no key demand."""

    entries: tuple[Demand, ...]

    @classmethod
    def build(cls, entries: Iterable[Demand]) -> DemandMatrix:
        seen: set[tuple[NodeId, NodeId]] = set()
        out = []
        for i, d in enumerate(entries):
            _check_demand(d, seen, f"entry {i}")
            out.append(Demand(d.s, d.t, float(d.kbps), float(d.beta)))
        out.sort(key=lambda d: (node_key(d.s), node_key(d.t)))
        return cls(tuple(out))

    @classmethod
    def from_mapping(cls, mapping: Mapping[tuple[NodeId, NodeId], tuple[float, float]]) -> DemandMatrix:
        return cls.build(Demand(s, t, kbps, beta) for (s, t), (kbps, beta) in mapping.items())

    def __len__(self) -> int:
        return len(self.entries)

    def get(self, s: NodeId, t: NodeId) -> Demand | None:
        for d in self.entries:
            if d.s == s and d.t == t:
                return d
        return None

    def active(self) -> list[Demand]:
        """Entries with strictly positive key demand D * beta."""
        return [d for d in self.entries if d.key_demand > 0]

    def nodes(self) -> set[NodeId]:
        return {d.s for d in self.entries} | {d.t for d in self.entries}


# -- serialization ---------------------------------------------------------


def load_topology(document: str, source: str = "<topology>") -> Topology:
    """Parse a YAML/JSON topology document (``nodes`` + ``edges``)."""
    try:
        data = yaml.safe_load(document)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        loc = f"{source}:{mark.line + 1}" if mark is not None else source
        raise InputError(f"parse failure: {getattr(exc, 'problem', exc)}", loc) from exc
    if not isinstance(data, dict):
        raise InputError("document must be a mapping with 'nodes' and 'edges'", source)
    unknown = set(data) - _TOPOLOGY_KEYS
    if unknown:
        raise InputError(f"unknown field(s) {sorted(map(str, unknown))}", source)
    for key in ("nodes", "edges"):
        if key not in data:
            raise InputError(f"missing field '{key}'", source)
        if not isinstance(data[key], list):
            raise InputError(f"'{key}' must be a list", f"{source}:{key}")

    edges = []
    for i, raw in enumerate(data["edges"]):
        loc = f"{source}:edges[{i}]"
        if not isinstance(raw, dict):
            raise InputError("edge must be a mapping {u, v, length_km}", loc)
        extra = set(raw) - _EDGE_KEYS
        if extra:
            raise InputError(f"unknown field(s) {sorted(map(str, extra))}", loc)
        missing = _EDGE_KEYS - set(raw)
        if missing:
            raise InputError(f"missing field(s) {sorted(missing)}", loc)
        edges.append((raw["u"], raw["v"], raw["length_km"]))

    try:
        return Topology.build(data["nodes"], edges, name=str(data.get("name") or ""))
    except InputError as exc:
        raise InputError(exc.message, f"{source}:{exc.location}") from None


def dump_topology(topology: Topology) -> str:
    doc: dict = {}
    if topology.name:
        doc["name"] = topology.name
    doc["nodes"] = list(topology.nodes)
    doc["edges"] = [{"u": u, "v": v, "length_km": length} for u, v, length in topology.edges]
    return yaml.safe_dump(doc, sort_keys=False, default_flow_style=None)


def read_topology(path: str | Path) -> Topology:
    path = Path(path)
    return load_topology(path.read_text(), source=str(path))


def _parse_node(token: str) -> NodeId:
    token = token.strip()
    return int(token) if token.isdecimal() else token


def load_demands(document: str, source: str = "<demands>") -> DemandMatrix:
    """Parse CSV rows ``s,t,demand_kbps,beta`` (header required).

    Integer-looking ids are read as integers, matching YAML topology files.
    """
    reader = csv.reader(io.StringIO(document))
    rows = [(i + 1, r) for i, r in enumerate(reader) if r and not r[0].lstrip().startswith("#")]
    if not rows:
        raise InputError("empty demand document", source)
    lineno, header = rows[0]
    header = [h.strip() for h in header]
    if tuple(header) != DEMAND_COLUMNS:
        unknown = [h for h in header if h not in DEMAND_COLUMNS]
        what = f"unknown column(s) {unknown}" if unknown else f"header must be {','.join(DEMAND_COLUMNS)}"
        raise InputError(what, f"{source}:line {lineno}")

    entries = []
    seen: set[tuple[NodeId, NodeId]] = set()
    for lineno, row in rows[1:]:
        loc = f"{source}:line {lineno}"
        if len(row) != len(DEMAND_COLUMNS):
            raise InputError(f"expected {len(DEMAND_COLUMNS)} fields, got {len(row)}", loc)
        s, t = _parse_node(row[0]), _parse_node(row[1])
        for node in (s, t):
            _check_id(node, loc)
        try:
            d = Demand(s, t, float(row[2]), float(row[3]))
        except ValueError as exc:
            raise InputError(f"parse failure: {exc}", loc) from None
        _check_demand(d, seen, loc)
        entries.append(d)
    return DemandMatrix.build(entries)


def dump_demands(demands: DemandMatrix) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(DEMAND_COLUMNS)
    for d in demands.entries:
        writer.writerow([d.s, d.t, repr(d.kbps), repr(d.beta)])
    return buf.getvalue()


def read_demands(path: str | Path) -> DemandMatrix:
    path = Path(path)
    return load_demands(path.read_text(), source=str(path))


def check_demands(topology: Topology, demands: DemandMatrix) -> None:
    """Raise :class:`InputError` if a demand references an unknown node."""
    known = set(topology.nodes)
    for d in demands.entries:
        for node in (d.s, d.t):
            if node not in known:
                raise InputError(f"demand pair ({d.s!r}, {d.t!r}) references unknown node {node!r}")
