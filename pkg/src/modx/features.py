"""Per-module feature bundles used for cross-binary module matching.

A module signature combines five channels: raw string literals, a constant
multiset (weighted later by corpus TF-IDF), iterated label-propagation
histograms over the module call graph, per-edge endpoint embeddings, and
per-function statistical vectors grouped by anchor points.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .graph import FunctionNode, Partition, ProgramGraph

FUNCTION_VECTOR_DIM = 8

Vector = tuple[float, ...]
Histogram = dict[tuple[int, ...], int]

ANCHOR_DATA_SHARED = "data-shared"
ANCHOR_DISPATCH = "dispatch"


@dataclass(frozen=True)
class FeatureConfig:
    min_string_len: int = 5
    kernel_iterations: int = 3
    kernel_bin_width: float = 0.1
    idf_corpus_size: int = 0

    def __post_init__(self) -> None:
        if self.kernel_iterations < 1:
            raise ValueError("kernel_iterations must be >= 1")
        if self.kernel_bin_width <= 0:
            raise ValueError("kernel_bin_width must be positive")


@dataclass(frozen=True)
class CorpusStats:
    """Document frequencies of constants over the signature database modules."""

    df: Mapping[int, int]
    n_modules: int

    @classmethod
    def from_constant_bags(cls, bags: Iterable[Mapping[int, int]]) -> "CorpusStats":
        df: Counter[int] = Counter()
        n = 0
        for bag in bags:
            n += 1
            df.update(set(bag))
        return cls(df=dict(df), n_modules=n)


@dataclass(frozen=True)
class AnchorGroup:
    kind: str
    member_ids: tuple[str, ...]
    member_volumes: tuple[int, ...]
    member_vectors: tuple[Vector, ...]


@dataclass(frozen=True)
class ModuleSignature:
    module_id: int
    function_count: int
    string_set: frozenset[str]
    constant_bag: Mapping[int, int]
    kernel_histograms: tuple[Histogram, ...]
    edge_vectors: tuple[Vector, ...]
    function_vectors: Mapping[str, Vector]
    function_volumes: Mapping[str, int]
    anchor_groups: tuple[AnchorGroup, ...]


def function_vector(f: FunctionNode, graph: ProgramGraph) -> Vector:
    """L2-normalized log-scale vector of structural and content counts."""
    raw = (
        math.log1p(f.volume),
        math.log1p(f.bb_count),
        math.log1p(f.cfg_edge_count),
        math.log1p(graph.in_degree(f.id)),
        math.log1p(graph.out_degree(f.id)),
        math.log1p(len(f.strings)),
        math.log1p(len(f.constants)),
        math.log1p(len(f.data_refs)),
    )
    norm = math.sqrt(math.fsum(x * x for x in raw))
    if norm == 0.0:
        return raw
    return tuple(x / norm for x in raw)


def _quantize(dist: Vector, width: float) -> tuple[int, ...]:
    return tuple(int(math.floor(x / width)) for x in dist)


def kernel_signature(
    graph: ProgramGraph,
    members: frozenset[str] | set[str],
    config: FeatureConfig,
    vectors: Mapping[str, Vector] | None = None,
) -> tuple[Histogram, ...]:
    """Iterated neighborhood-averaged label distributions, binned per round.

    Each member starts with its function vector renormalized to sum 1; each
    round averages a node's distribution with the mean of its intra-module
    neighbors'. Every round (including round 0) contributes one histogram of
    quantized distributions.
    """
    order = sorted(members, key=lambda fid: graph.node(fid).ordinal)
    if vectors is None:
        vectors = {fid: function_vector(graph.node(fid), graph) for fid in order}
    dist: dict[str, Vector] = {}
    for fid in order:
        v = vectors[fid]
        total = math.fsum(v)
        dist[fid] = tuple(x / total for x in v) if total > 0 else v
    neighbors: dict[str, list[str]] = {fid: [] for fid in order}
    for fid in order:
        for callee in graph.callees_of(fid):
            if callee in members and callee != fid:
                neighbors[fid].append(callee)
                neighbors[callee].append(fid)

    def histogram() -> Histogram:
        out: Histogram = {}
        for fid in order:
            key = _quantize(dist[fid], config.kernel_bin_width)
            out[key] = out.get(key, 0) + 1
        return out

    histograms = [histogram()]
    dim = FUNCTION_VECTOR_DIM
    for _ in range(config.kernel_iterations):
        updated: dict[str, Vector] = {}
        for fid in order:
            nbs = neighbors[fid]
            if not nbs:
                updated[fid] = dist[fid]
                continue
            inv = 1.0 / len(nbs)
            mean = [0.0] * dim
            for nb in nbs:
                d = dist[nb]
                for k in range(dim):
                    mean[k] += d[k]
            own = dist[fid]
            updated[fid] = tuple((own[k] + mean[k] * inv) / 2.0 for k in range(dim))
        dist = updated
        histograms.append(histogram())
    return tuple(histograms)


def edge_vectors(
    graph: ProgramGraph,
    members: frozenset[str] | set[str],
    vectors: Mapping[str, Vector] | None = None,
) -> tuple[Vector, ...]:
    """One caller||callee concatenated vector per intra-module call edge."""
    if vectors is None:
        vectors = {fid: function_vector(graph.node(fid), graph) for fid in members}
    out = [
        vectors[e.caller] + vectors[e.callee]
        for e in graph.edges
        if e.caller in members and e.callee in members
    ]
    return tuple(sorted(out))


def anchor_groups(
    graph: ProgramGraph,
    partition: Partition,
    module_id: int,
    vectors: Mapping[str, Vector] | None = None,
) -> tuple[AnchorGroup, ...]:
    """Anchor-point groups: functions sharing data objects, and dispatch targets.

    Data-shared groups are the connected components of the "shares a data_ref"
    relation with at least two members; the dispatch group collects members
    flagged as dispatch-table targets, when two or more exist.
    """
    members = sorted(
        (fid for fid, mid in partition.assignment.items() if mid == module_id),
        key=lambda fid: graph.node(fid).ordinal,
    )
    if not members:
        raise KeyError(f"module {module_id} is empty or unknown")
    if vectors is None:
        vectors = {fid: function_vector(graph.node(fid), graph) for fid in members}

    parent: dict[str, str] = {fid: fid for fid in members}

    def find(x: str) -> str:
        while parent[x] != x:
            parent[x] = parent[parent[x]]
            x = parent[x]
        return x

    ref_owner: dict[str, str] = {}
    for fid in members:
        for ref in sorted(graph.node(fid).data_refs):
            if ref in ref_owner:
                parent[find(fid)] = find(ref_owner[ref])
            else:
                ref_owner[ref] = fid
    shared: dict[str, list[str]] = {}
    for fid in members:
        if graph.node(fid).data_refs:
            shared.setdefault(find(fid), []).append(fid)

    def build(kind: str, ids: list[str]) -> AnchorGroup:
        ranked = sorted(
            ids, key=lambda fid: (-graph.node(fid).volume, vectors[fid], fid)
        )
        return AnchorGroup(
            kind=kind,
            member_ids=tuple(ranked),
            member_volumes=tuple(graph.node(fid).volume for fid in ranked),
            member_vectors=tuple(vectors[fid] for fid in ranked),
        )

    groups = [
        build(ANCHOR_DATA_SHARED, ids)
        for ids in shared.values()
        if len(ids) >= 2
    ]
    groups.sort(key=lambda g: (-len(g.member_ids), g.member_vectors))
    dispatch = [fid for fid in members if graph.node(fid).is_dispatch_target]
    if len(dispatch) >= 2:
        groups.append(build(ANCHOR_DISPATCH, dispatch))
    return tuple(groups)


def extract_signature(
    graph: ProgramGraph,
    partition: Partition,
    module_id: int,
    config: FeatureConfig | None = None,
) -> ModuleSignature:
    """Extract the full feature bundle for one module of a partitioned graph."""
    cfg = config or FeatureConfig()
    members = frozenset(
        fid for fid, mid in partition.assignment.items() if mid == module_id
    )
    if not members:
        raise KeyError(f"module {module_id} is empty or unknown")
    nodes = [graph.node(fid) for fid in sorted(members)]
    vectors = {fid: function_vector(graph.node(fid), graph) for fid in sorted(members)}
    strings = frozenset(
        s for n in nodes for s in n.strings if len(s) >= cfg.min_string_len
    )
    bag: Counter[int] = Counter()
    for n in nodes:
        bag.update(n.constants)
    return ModuleSignature(
        module_id=module_id,
        function_count=len(members),
        string_set=strings,
        constant_bag=dict(bag),
        kernel_histograms=kernel_signature(graph, members, cfg, vectors),
        edge_vectors=edge_vectors(graph, members, vectors),
        function_vectors=vectors,
        function_volumes={n.id: n.volume for n in nodes},
        anchor_groups=anchor_groups(graph, partition, module_id, vectors),
    )


def tfidf_vector(
    constant_bag: Mapping[int, int], corpus_stats: CorpusStats
) -> dict[int, float]:
    """Sparse TF-IDF weights over constants; ubiquitous constants weigh zero."""
    n = corpus_stats.n_modules
    if n <= 0:
        return {}
    out: dict[int, float] = {}
    for constant, tf in constant_bag.items():
        idf = math.log(n / (1 + corpus_stats.df.get(constant, 0)))
        weight = tf * idf
        if weight > 0.0:
            out[constant] = weight
    return out
