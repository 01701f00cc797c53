"""Module-quality metrics used for both optimization and evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum
from typing import Literal

from .graph import Partition, ProgramGraph
from .weighting import WeightedGraph, unit_weights


@dataclass(frozen=True)
class QualityReport:
    origin_mq: float
    directed_mq: float
    weighted_directed_mq: float
    bunch_mq: float
    turbo_mq: float
    avg_entries: float
    avg_isolated_clusters: float

    def as_dict(self) -> dict[str, float]:
        return {
            "origin_mq": self.origin_mq,
            "directed_mq": self.directed_mq,
            "weighted_directed_mq": self.weighted_directed_mq,
            "bunch_mq": self.bunch_mq,
            "turbo_mq": self.turbo_mq,
            "avg_entries": self.avg_entries,
            "avg_isolated_clusters": self.avg_isolated_clusters,
        }


def origin_mq(graph: ProgramGraph, partition: Partition) -> float:
    """Degree-corrected modularity of the undirected, unweighted view.

    The adjacency is 0/1: two distinct functions are adjacent when a call in
    either direction exists; a recursion edge puts a 1 on the diagonal. An
    edgeless graph scores 0.
    """
    neighbors: dict[str, set[str]] = {f.id: set() for f in graph.functions}
    self_loop: set[str] = set()
    for e in graph.edges:
        if e.caller == e.callee:
            self_loop.add(e.caller)
        else:
            neighbors[e.caller].add(e.callee)
            neighbors[e.callee].add(e.caller)
    m = sum(len(ns) for ns in neighbors.values()) // 2 + len(self_loop)
    if m == 0:
        return 0.0
    two_m = 2.0 * m
    degree = {
        fid: len(ns) + (1 if fid in self_loop else 0) for fid, ns in neighbors.items()
    }
    terms: list[float] = []
    for members in partition.modules().values():
        intra = sum(
            sum(1 for nb in neighbors[fid] if nb in members)
            + (1 if fid in self_loop else 0)
            for fid in members
        )
        k_sum = sum(degree[fid] for fid in members)
        terms.append(intra - k_sum * k_sum / two_m)
    return fsum(terms) / two_m


def weighted_directed_mq(
    wgraph: WeightedGraph,
    partition: Partition,
    norm: Literal["2w", "w"] = "2w",
) -> float:
    """Directed weighted modularity with a degree-product null model.

    The default normalization divides the sum and the null term by 2W, which
    makes a single-community partition score 0.25 rather than 0; pass
    norm="w" for the plain-W convention used by some other tools.
    """
    w_total = wgraph.total_weight
    if w_total == 0:
        return 0.0
    denom = 2.0 * w_total if norm == "2w" else w_total
    node_mod = partition.assignment
    intra: dict[int, float] = {}
    for (u, v), w in wgraph.edge_weight.items():
        mu = node_mod[u]
        if mu == node_mod[v]:
            intra[mu] = intra.get(mu, 0.0) + w
    terms: list[float] = []
    for mid, members in partition.modules().items():
        s_out = fsum(wgraph.k_out[fid] for fid in members)
        s_in = fsum(wgraph.k_in[fid] for fid in members)
        terms.append(intra.get(mid, 0.0) - s_out * s_in / denom)
    return fsum(terms) / denom


def directed_mq(graph: ProgramGraph, partition: Partition) -> float:
    """Directed modularity with every edge weight forced to 1."""
    return weighted_directed_mq(unit_weights(graph), partition)


def bunch_mq(graph: ProgramGraph, partition: Partition) -> float:
    """Sum of per-module cluster factors 2u/(2u + cut) over edge counts."""
    node_mod = partition.assignment
    intra: dict[int, int] = {}
    cut: dict[int, int] = {}
    for e in graph.edges:
        mu, mv = node_mod[e.caller], node_mod[e.callee]
        if mu == mv:
            intra[mu] = intra.get(mu, 0) + 1
        else:
            cut[mu] = cut.get(mu, 0) + 1
            cut[mv] = cut.get(mv, 0) + 1
    total = 0.0
    for mid in partition.module_ids():
        mu_i = intra.get(mid, 0)
        if mu_i == 0:
            continue
        total += 2.0 * mu_i / (2.0 * mu_i + cut.get(mid, 0))
    return total


def turbo_mq(wgraph: WeightedGraph, partition: Partition) -> float:
    """Bunch-style cluster factor with edge counts replaced by weight sums."""
    node_mod = partition.assignment
    intra: dict[int, float] = {}
    cut: dict[int, float] = {}
    for (u, v), w in wgraph.edge_weight.items():
        mu, mv = node_mod[u], node_mod[v]
        if mu == mv:
            intra[mu] = intra.get(mu, 0.0) + w
        else:
            cut[mu] = cut.get(mu, 0.0) + w
            cut[mv] = cut.get(mv, 0.0) + w
    total = 0.0
    for mid in partition.module_ids():
        mu_i = intra.get(mid, 0.0)
        if mu_i == 0.0:
            continue
        total += 2.0 * mu_i / (2.0 * mu_i + cut.get(mid, 0.0))
    return total


def module_entries(graph: ProgramGraph, partition: Partition) -> dict[int, int]:
    """Per module, the number of members whose callers (if any) all lie outside.

    A function with no callers is an entry of its module. A module whose
    members only call each other has zero entries.
    """
    node_mod = partition.assignment
    counts: dict[int, int] = {mid: 0 for mid in partition.module_ids()}
    for fid, mid in node_mod.items():
        if all(node_mod[caller] != mid for caller in graph.callers_of(fid)):
            counts[mid] += 1
    return counts


def isolated_clusters(graph: ProgramGraph, partition: Partition) -> dict[int, int]:
    """Per module, the number of weakly connected components of its subgraph."""
    counts: dict[int, int] = {}
    for mid, members in partition.modules().items():
        parent = {fid: fid for fid in members}

        def find(x: str) -> str:
            while parent[x] != x:
                parent[x] = parent[parent[x]]
                x = parent[x]
            return x

        for fid in members:
            for nb in graph.callees_of(fid):
                if nb in members:
                    parent[find(fid)] = find(nb)
        counts[mid] = len({find(fid) for fid in members})
    return counts


def overlap_score(generated: Partition, labeled: Partition) -> float:
    """Mean, over generated modules, of how many labeled modules they touch."""
    module_sets = generated.modules()
    if not module_sets:
        return 0.0
    scores = [
        len({labeled.of(fid) for fid in members}) for members in module_sets.values()
    ]
    return fsum(scores) / len(scores)


def quality_report(
    graph: ProgramGraph,
    partition: Partition,
    wgraph: WeightedGraph | None = None,
) -> QualityReport:
    """Evaluate every metric at once; propagation is reused when supplied."""
    if wgraph is None:
        from .weighting import propagate_volumes

        wgraph = propagate_volumes(graph)
    entries = module_entries(graph, partition)
    isolated = isolated_clusters(graph, partition)
    n_modules = max(1, partition.n_modules)
    return QualityReport(
        origin_mq=origin_mq(graph, partition),
        directed_mq=directed_mq(graph, partition),
        weighted_directed_mq=weighted_directed_mq(wgraph, partition),
        bunch_mq=bunch_mq(graph, partition),
        turbo_mq=turbo_mq(wgraph, partition),
        avg_entries=fsum(entries.values()) / n_modules if entries else 0.0,
        avg_isolated_clusters=(
            fsum(isolated.values()) / n_modules if isolated else 0.0
        ),
    )
