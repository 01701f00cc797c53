"""Attributed call-graph data model and the mgx-1 exchange format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from typing import IO, Any, Iterable, Mapping

GRAPH_FORMAT_VERSION = "mgx-1"
PARTITION_FORMAT_VERSION = "mpt-1"


class GraphFormatError(ValueError):
    """Raised when an exchange document is malformed or violates an invariant."""


@dataclass(frozen=True)
class FunctionNode:
    """One function of a binary, with the attributes the exporter could recover.

    ``ordinal`` is the rank of the function in ascending address order; it is
    recomputed on load, never read from documents.
    """

    id: str
    address: int
    ordinal: int
    volume: int
    name: str | None = None
    bb_count: int = 0
    cfg_edge_count: int = 0
    strings: frozenset[str] = frozenset()
    constants: tuple[int, ...] = ()
    data_refs: frozenset[str] = frozenset()
    is_dispatch_target: bool = False
    is_export: bool = False


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    callsites: int = 1


@dataclass(frozen=True)
class ProgramGraph:
    """Immutable call graph. Functions are kept in ordinal order, edges sorted
    by (caller, callee), so equal graphs compare equal field by field."""

    program_name: str
    functions: tuple[FunctionNode, ...]
    edges: tuple[CallEdge, ...]

    def __post_init__(self) -> None:
        by_id = {f.id: f for f in self.functions}
        callees: dict[str, list[str]] = {f.id: [] for f in self.functions}
        callers: dict[str, list[str]] = {f.id: [] for f in self.functions}
        for e in self.edges:
            if e.caller in callees and e.callee in callers:
                callees[e.caller].append(e.callee)
                callers[e.callee].append(e.caller)
        object.__setattr__(self, "_by_id", by_id)
        object.__setattr__(self, "_callees", {k: tuple(v) for k, v in callees.items()})
        object.__setattr__(self, "_callers", {k: tuple(v) for k, v in callers.items()})

    @classmethod
    def build(
        cls,
        program_name: str,
        functions: Iterable[FunctionNode],
        edges: Iterable[CallEdge],
    ) -> "ProgramGraph":
        """Canonicalize ordering and recompute ordinals from addresses."""
        ordered = sorted(functions, key=lambda f: (f.address, f.id))
        nodes = tuple(replace(f, ordinal=i) for i, f in enumerate(ordered))
        edge_list = tuple(sorted(edges, key=lambda e: (e.caller, e.callee)))
        return cls(program_name, nodes, edge_list)

    # -- lookups -------------------------------------------------------------

    def node(self, fid: str) -> FunctionNode:
        return self._by_id[fid]

    def has_node(self, fid: str) -> bool:
        return fid in self._by_id

    def callers_of(self, fid: str) -> tuple[str, ...]:
        return self._callers[fid]

    def callees_of(self, fid: str) -> tuple[str, ...]:
        return self._callees[fid]

    def in_degree(self, fid: str) -> int:
        return len(self._callers[fid])

    def out_degree(self, fid: str) -> int:
        return len(self._callees[fid])

    def function_ids(self) -> tuple[str, ...]:
        return tuple(f.id for f in self.functions)

    @property
    def n_functions(self) -> int:
        return len(self.functions)

    @property
    def n_edges(self) -> int:
        return len(self.edges)


@dataclass(frozen=True)
class Partition:
    """Total, non-overlapping assignment of function ids to integer module ids."""

    assignment: Mapping[str, int]

    def of(self, fid: str) -> int:
        return self.assignment[fid]

    def modules(self) -> dict[int, frozenset[str]]:
        out: dict[int, set[str]] = {}
        for fid, mid in self.assignment.items():
            out.setdefault(mid, set()).add(fid)
        return {mid: frozenset(members) for mid, members in sorted(out.items())}

    def module_ids(self) -> tuple[int, ...]:
        return tuple(sorted(set(self.assignment.values())))

    @property
    def n_modules(self) -> int:
        return len(set(self.assignment.values()))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Partition):
            return NotImplemented
        return dict(self.assignment) == dict(other.assignment)

    def __hash__(self) -> int:
        return hash(frozenset(self.assignment.items()))


# -- loading ------------------------------------------------------------------


def _as_text(source: str | bytes | IO[Any]) -> str:
    if isinstance(source, bytes):
        return source.decode("utf-8")
    if isinstance(source, str):
        return source
    data = source.read()
    if isinstance(data, bytes):
        return data.decode("utf-8")
    return data


def _require(doc: Mapping[str, Any], key: str, where: str) -> Any:
    if key not in doc:
        raise GraphFormatError(f"{where}: missing required key {key!r}")
    return doc[key]


def _check_int(value: Any, where: str, minimum: int | None = None) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise GraphFormatError(f"{where}: expected integer, got {value!r}")
    if minimum is not None and value < minimum:
        raise GraphFormatError(f"{where}: value {value} below minimum {minimum}")
    return value


def load_program_graph(source: str | bytes | IO[Any]) -> ProgramGraph:
    """Parse and validate an mgx-1 document.

    Unknown keys are ignored; missing optional keys default to empty sets and
    false. Ordinals are recomputed from ascending addresses.
    """
    try:
        doc = json.loads(_as_text(source))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed document: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphFormatError("malformed document: top level must be an object")
    version = _require(doc, "version", "document")
    if version != GRAPH_FORMAT_VERSION:
        raise GraphFormatError(
            f"document: unsupported version {version!r}, expected {GRAPH_FORMAT_VERSION!r}"
        )
    name = _require(doc, "program_name", "document")
    raw_functions = _require(doc, "functions", "document")
    raw_edges = doc.get("edges", [])
    if not isinstance(raw_functions, list) or not isinstance(raw_edges, list):
        raise GraphFormatError("document: functions and edges must be arrays")

    functions: list[FunctionNode] = []
    seen: set[str] = set()
    for i, item in enumerate(raw_functions):
        where = f"functions[{i}]"
        if not isinstance(item, dict):
            raise GraphFormatError(f"{where}: expected object")
        fid = _require(item, "id", where)
        if not isinstance(fid, str) or not fid:
            raise GraphFormatError(f"{where}: id must be a non-empty string")
        if fid in seen:
            raise GraphFormatError(f"{where}: duplicate id {fid!r}")
        seen.add(fid)
        address = _check_int(_require(item, "address", where), f"{where}.address", 0)
        volume = _check_int(_require(item, "volume", where), f"{where}.volume")
        if volume < 1:
            raise GraphFormatError(f"{where}: volume {volume} < 1 for id {fid!r}")
        strings = item.get("strings", [])
        constants = item.get("constants", [])
        data_refs = item.get("data_refs", [])
        if not all(isinstance(s, str) for s in strings):
            raise GraphFormatError(f"{where}: strings must be an array of text")
        functions.append(
            FunctionNode(
                id=fid,
                address=address,
                ordinal=-1,
                volume=volume,
                name=item.get("name"),
                bb_count=_check_int(item.get("bb_count", 0), f"{where}.bb_count", 0),
                cfg_edge_count=_check_int(
                    item.get("cfg_edge_count", 0), f"{where}.cfg_edge_count", 0
                ),
                strings=frozenset(strings),
                constants=tuple(
                    sorted(_check_int(c, f"{where}.constants") for c in constants)
                ),
                data_refs=frozenset(str(r) for r in data_refs),
                is_dispatch_target=bool(item.get("is_dispatch_target", False)),
                is_export=bool(item.get("is_export", False)),
            )
        )

    edges: list[CallEdge] = []
    seen_pairs: set[tuple[str, str]] = set()
    for i, item in enumerate(raw_edges):
        where = f"edges[{i}]"
        if not isinstance(item, dict):
            raise GraphFormatError(f"{where}: expected object")
        caller = _require(item, "caller", where)
        callee = _require(item, "callee", where)
        for endpoint, label in ((caller, "caller"), (callee, "callee")):
            if endpoint not in seen:
                raise GraphFormatError(
                    f"{where}: {label} {endpoint!r} does not name a function"
                )
        pair = (caller, callee)
        if pair in seen_pairs:
            raise GraphFormatError(f"{where}: duplicate edge {caller!r} -> {callee!r}")
        seen_pairs.add(pair)
        callsites = _check_int(item.get("callsites", 1), f"{where}.callsites", 1)
        edges.append(CallEdge(caller, callee, callsites))

    return ProgramGraph.build(str(name), functions, edges)


def dump_program_graph(graph: ProgramGraph) -> str:
    """Serialize to canonical mgx-1 text (stable bytes for a given graph)."""
    doc = {
        "version": GRAPH_FORMAT_VERSION,
        "program_name": graph.program_name,
        "functions": [
            {
                "id": f.id,
                "address": f.address,
                **({"name": f.name} if f.name is not None else {}),
                "volume": f.volume,
                "bb_count": f.bb_count,
                "cfg_edge_count": f.cfg_edge_count,
                "strings": sorted(f.strings),
                "constants": list(f.constants),
                "data_refs": sorted(f.data_refs),
                "is_dispatch_target": f.is_dispatch_target,
                "is_export": f.is_export,
            }
            for f in graph.functions
        ],
        "edges": [
            {"caller": e.caller, "callee": e.callee, "callsites": e.callsites}
            for e in graph.edges
        ],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def validate(graph: ProgramGraph) -> list[str]:
    """Check type invariants on an in-memory graph; violations are data, not errors."""
    violations: list[str] = []
    seen: set[str] = set()
    for f in graph.functions:
        if f.id in seen:
            violations.append(f"duplicate function id {f.id!r}")
        seen.add(f.id)
        if f.volume < 1:
            violations.append(f"function {f.id!r}: volume {f.volume} < 1")
        if f.bb_count < 0 or f.cfg_edge_count < 0:
            violations.append(f"function {f.id!r}: negative block or edge count")
    expected = sorted(range(len(graph.functions)))
    actual = sorted(f.ordinal for f in graph.functions)
    if actual != expected:
        violations.append("ordinals do not form a permutation of 0..N-1")
    else:
        by_ordinal = sorted(graph.functions, key=lambda f: f.ordinal)
        addresses = [f.address for f in by_ordinal]
        if addresses != sorted(addresses):
            violations.append("ordinals are not consistent with ascending addresses")
    pairs: set[tuple[str, str]] = set()
    for e in graph.edges:
        for endpoint, label in ((e.caller, "caller"), (e.callee, "callee")):
            if endpoint not in seen:
                violations.append(f"edge {e.caller!r}->{e.callee!r}: dangling {label}")
        if (e.caller, e.callee) in pairs:
            violations.append(f"duplicate edge {e.caller!r}->{e.callee!r}")
        pairs.add((e.caller, e.callee))
        if e.callsites < 1:
            violations.append(f"edge {e.caller!r}->{e.callee!r}: callsites < 1")
    return violations


# -- partitions ----------------------------------------------------------------


def partition_violations(graph: ProgramGraph, partition: Partition) -> list[str]:
    """Totality and density checks for a partition over a graph."""
    violations: list[str] = []
    ids = set(graph.function_ids())
    assigned = set(partition.assignment)
    for missing in sorted(ids - assigned):
        violations.append(f"function {missing!r} has no module")
    for extra in sorted(assigned - ids):
        violations.append(f"assignment names unknown function {extra!r}")
    mids = sorted(set(partition.assignment.values()))
    if mids and mids != list(range(len(mids))):
        violations.append("module ids are not dense integers starting at 0")
    return violations


def load_partition(source: str | bytes | IO[Any]) -> tuple[str, Partition]:
    """Parse an mpt-1 partition document; returns (program_name, partition)."""
    try:
        doc = json.loads(_as_text(source))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"malformed partition document: {exc}") from exc
    if not isinstance(doc, dict):
        raise GraphFormatError("malformed partition document: top level must be an object")
    version = _require(doc, "version", "partition document")
    if version != PARTITION_FORMAT_VERSION:
        raise GraphFormatError(
            f"partition document: unsupported version {version!r},"
            f" expected {PARTITION_FORMAT_VERSION!r}"
        )
    name = _require(doc, "program_name", "partition document")
    assignment: dict[str, int] = {}
    for i, module in enumerate(_require(doc, "modules", "partition document")):
        where = f"modules[{i}]"
        mid = _check_int(_require(module, "id", where), f"{where}.id", 0)
        for fid in _require(module, "members", where):
            if fid in assignment:
                raise GraphFormatError(f"{where}: function {fid!r} assigned twice")
            assignment[fid] = mid
    return str(name), Partition(assignment)


def dump_partition(program_name: str, partition: Partition, extra: Mapping[str, Any] | None = None) -> str:
    """Serialize a partition to canonical mpt-1 text."""
    doc: dict[str, Any] = {
        "version": PARTITION_FORMAT_VERSION,
        "program_name": program_name,
        "modules": [
            {"id": mid, "members": sorted(members)}
            for mid, members in sorted(partition.modules().items())
        ],
    }
    if extra:
        doc.update(extra)
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))
