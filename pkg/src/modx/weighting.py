"""Bottom-up propagation of function volumes into call-edge weights.

Every function starts at its own volume. End nodes (out-degree 0) push a
normalized share of their weight to each caller and are removed; when only
cycles remain, one strongly connected component is condensed into a single
node and elimination continues. The weight of edge (u, v) in the result is
the final weight of the callee v.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import fsum
from typing import AbstractSet, Any, Hashable, Mapping

from .graph import ProgramGraph

NodeKey = Hashable  # function id, or ("scc", n) for condensed nodes


@dataclass(frozen=True)
class PropagationConfig:
    c: float = 1.0

    def __post_init__(self) -> None:
        if self.c <= 0:
            raise ValueError(f"normalization factor c must be positive, got {self.c}")


@dataclass(frozen=True)
class WeightedGraph:
    """Call graph with propagated node weights and per-edge weights.

    ``edge_weight[(u, v)]`` equals the final propagated weight of v.
    Recursion self-edges are dropped. ``outgoing``/``incoming`` are adjacency
    views of the same weights.
    """

    base: ProgramGraph
    fv: dict[str, float]
    edge_weight: dict[tuple[str, str], float]
    total_weight: float
    k_out: dict[str, float]
    k_in: dict[str, float]
    outgoing: dict[str, dict[str, float]]
    incoming: dict[str, dict[str, float]]

    @classmethod
    def from_edge_weights(
        cls,
        base: ProgramGraph,
        edge_weight: Mapping[tuple[str, str], float],
        fv: Mapping[str, float] | None = None,
    ) -> "WeightedGraph":
        k_out = {f.id: 0.0 for f in base.functions}
        k_in = {f.id: 0.0 for f in base.functions}
        outgoing: dict[str, dict[str, float]] = {f.id: {} for f in base.functions}
        incoming: dict[str, dict[str, float]] = {f.id: {} for f in base.functions}
        for (u, v), w in edge_weight.items():
            k_out[u] += w
            k_in[v] += w
            outgoing[u][v] = w
            incoming[v][u] = w
        node_weights = (
            dict(fv) if fv is not None else {f.id: float(f.volume) for f in base.functions}
        )
        return cls(
            base=base,
            fv=node_weights,
            edge_weight=dict(edge_weight),
            total_weight=fsum(edge_weight.values()),
            k_out=k_out,
            k_in=k_in,
            outgoing=outgoing,
            incoming=incoming,
        )


def unit_weights(graph: ProgramGraph) -> WeightedGraph:
    """Weighted view of the raw call graph with every edge weight forced to 1."""
    return WeightedGraph.from_edge_weights(
        graph, {(e.caller, e.callee): 1.0 for e in graph.edges}
    )


def end_nodes(out_adjacency: Mapping[NodeKey, AbstractSet[NodeKey]]) -> set[NodeKey]:
    """Nodes with out-degree 0 in the given working-graph view."""
    return {u for u, outs in out_adjacency.items() if not outs}


def _strongly_connected_components(
    out_adj: Mapping[NodeKey, set[NodeKey]],
) -> list[set[NodeKey]]:
    """Iterative Tarjan over a dict adjacency; avoids recursion limits."""
    index: dict[NodeKey, int] = {}
    lowlink: dict[NodeKey, int] = {}
    on_stack: set[NodeKey] = set()
    stack: list[NodeKey] = []
    components: list[set[NodeKey]] = []
    counter = 0

    for root in out_adj:
        if root in index:
            continue
        work: list[tuple[NodeKey, iter]] = [(root, iter(out_adj[root]))]
        index[root] = lowlink[root] = counter
        counter += 1
        stack.append(root)
        on_stack.add(root)
        while work:
            node, children = work[-1]
            advanced = False
            for child in children:
                if child not in index:
                    index[child] = lowlink[child] = counter
                    counter += 1
                    stack.append(child)
                    on_stack.add(child)
                    work.append((child, iter(out_adj[child])))
                    advanced = True
                    break
                if child in on_stack:
                    lowlink[node] = min(lowlink[node], index[child])
            if advanced:
                continue
            work.pop()
            if work:
                parent = work[-1][0]
                lowlink[parent] = min(lowlink[parent], lowlink[node])
            if lowlink[node] == index[node]:
                component: set[NodeKey] = set()
                while True:
                    member = stack.pop()
                    on_stack.discard(member)
                    component.add(member)
                    if member == node:
                        break
                components.append(component)
    return components


def _trace_label(node: NodeKey) -> str:
    return node if isinstance(node, str) else f"scc:{node[1]}"


def propagate_volumes(
    graph: ProgramGraph,
    config: PropagationConfig | None = None,
    trace: list[dict[str, Any]] | None = None,
) -> WeightedGraph:
    """Run the elimination-based weight propagation and build the weighted graph.

    Deterministic for a given (graph, config). When ``trace`` is a list, one
    event dict is appended per elimination or condensation.
    """
    cfg = config or PropagationConfig()
    c = cfg.c

    out_adj: dict[NodeKey, set[NodeKey]] = {f.id: set() for f in graph.functions}
    in_adj: dict[NodeKey, set[NodeKey]] = {f.id: set() for f in graph.functions}
    for e in graph.edges:
        if e.caller != e.callee:  # recursion self-edges are degenerate 1-cycles
            out_adj[e.caller].add(e.callee)
            in_adj[e.callee].add(e.caller)

    fv: dict[NodeKey, float] = {f.id: float(f.volume) for f in graph.functions}
    ordinal: dict[NodeKey, int] = {f.id: f.ordinal for f in graph.functions}
    group_members: dict[NodeKey, list[tuple[NodeKey, float]]] = {}
    creation_fv: dict[NodeKey, float] = {}
    final_fv: dict[str, float] = {}
    scc_counter = 0

    ready: deque[NodeKey] = deque(
        sorted((u for u, outs in out_adj.items() if not outs), key=ordinal.__getitem__)
    )
    queued: set[NodeKey] = set(ready)

    def settle(root: NodeKey, amount: float) -> None:
        # Distribute a condensed node's inflow equally among members, recursively.
        todo: list[tuple[NodeKey, float]] = [(root, amount)]
        while todo:
            node, value = todo.pop()
            members = group_members.get(node)
            if members is None:
                final_fv[node] = value
            else:
                share = (value - creation_fv[node]) / len(members)
                for child, snapshot in members:
                    todo.append((child, snapshot + share))

    while out_adj:
        if not ready:
            # Only cycles remain: condense the component holding the
            # smallest-ordinal node still in a non-trivial cycle.
            components = [
                comp
                for comp in _strongly_connected_components(out_adj)
                if len(comp) >= 2
            ]
            chosen = min(components, key=lambda comp: min(ordinal[x] for x in comp))
            scc_counter += 1
            cid: NodeKey = ("scc", scc_counter)
            members = sorted(chosen, key=ordinal.__getitem__)
            group_members[cid] = [(m, fv[m]) for m in members]
            total = fsum(fv[m] for m in members)
            creation_fv[cid] = total
            fv[cid] = total
            ordinal[cid] = ordinal[members[0]]
            new_out = set().union(*(out_adj[m] for m in members)) - chosen
            new_in = set().union(*(in_adj[m] for m in members)) - chosen
            for x in new_out:
                in_adj[x] = (in_adj[x] - chosen) | {cid}
            for x in new_in:
                out_adj[x] = (out_adj[x] - chosen) | {cid}
            out_adj[cid] = new_out
            in_adj[cid] = new_in
            for m in members:
                del out_adj[m], in_adj[m], fv[m]
            if trace is not None:
                trace.append(
                    {
                        "kind": "condense",
                        "node": _trace_label(cid),
                        "members": len(members),
                        "fv": total,
                    }
                )
            if not new_out:
                ready.append(cid)
                queued.add(cid)
            continue

        v = ready.popleft()
        queued.discard(v)
        callers = in_adj[v]
        n_callers = len(callers)
        if n_callers:
            share = c * fv[v] / n_callers
            for u in sorted(callers, key=ordinal.__getitem__):
                fv[u] += share
                out_adj[u].discard(v)
                if not out_adj[u] and u not in queued:
                    ready.append(u)
                    queued.add(u)
        if trace is not None:
            trace.append(
                {
                    "kind": "eliminate",
                    "node": _trace_label(v),
                    "fv": fv[v],
                    "callers": n_callers,
                }
            )
        settle(v, fv[v])
        del out_adj[v], in_adj[v], fv[v]

    edge_weight = {
        (e.caller, e.callee): final_fv[e.callee]
        for e in graph.edges
        if e.caller != e.callee
    }
    return WeightedGraph.from_edge_weights(graph, edge_weight, fv=final_fv)
