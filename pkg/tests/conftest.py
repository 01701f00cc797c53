"""Shared builders, hypothesis strategies, and detection fixtures."""

from __future__ import annotations

import random
from typing import Iterable, Mapping

import pytest
from hypothesis import strategies as st

from modx.graph import CallEdge, FunctionNode, Partition, ProgramGraph


def graph_of(
    volumes: Mapping[str, int],
    edges: Iterable[tuple[str, str]] = (),
    name: str = "g",
    attrs: Mapping[str, dict] | None = None,
) -> ProgramGraph:
    """Tiny graph builder: insertion order of `volumes` fixes the address order."""
    attrs = attrs or {}
    functions = [
        FunctionNode(
            id=fid,
            address=0x1000 + 0x10 * i,
            ordinal=i,
            volume=vol,
            **attrs.get(fid, {}),
        )
        for i, (fid, vol) in enumerate(volumes.items())
    ]
    return ProgramGraph.build(name, functions, [CallEdge(u, v) for u, v in edges])


def random_graph(
    rng: random.Random,
    n: int,
    edge_prob: float = 0.2,
    max_volume: int = 20,
    connected: bool = False,
) -> ProgramGraph:
    volumes = {f"f{i}": rng.randint(1, max_volume) for i in range(n)}
    edges = {
        (f"f{i}", f"f{j}")
        for i in range(n)
        for j in range(n)
        if i != j and rng.random() < edge_prob
    }
    if connected and n > 1:
        order = list(range(n))
        rng.shuffle(order)
        for a, b in zip(order, order[1:]):
            u, v = f"f{a}", f"f{b}"
            if (u, v) not in edges and (v, u) not in edges:
                edges.add((u, v))
    return graph_of(volumes, sorted(edges))


def random_partition(rng: random.Random, graph: ProgramGraph, k: int) -> Partition:
    labels = {fid: rng.randrange(k) for fid in graph.function_ids()}
    dense = {m: i for i, m in enumerate(sorted(set(labels.values())))}
    return Partition({fid: dense[m] for fid, m in labels.items()})


@st.composite
def graphs(draw, min_nodes: int = 1, max_nodes: int = 8, allow_self_edges: bool = False):
    n = draw(st.integers(min_nodes, max_nodes))
    volumes = draw(st.lists(st.integers(1, 9), min_size=n, max_size=n))
    pairs = [
        (i, j) for i in range(n) for j in range(n) if allow_self_edges or i != j
    ]
    chosen = (
        draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
        if pairs
        else []
    )
    return graph_of(
        {f"f{i}": volumes[i] for i in range(n)},
        [(f"f{i}", f"f{j}") for i, j in sorted(set(chosen))],
    )


@st.composite
def graphs_with_partitions(draw, **kwargs):
    graph = draw(graphs(**kwargs))
    n = graph.n_functions
    labels = draw(st.lists(st.integers(0, n - 1), min_size=n, max_size=n))
    dense = {m: i for i, m in enumerate(sorted(set(labels)))}
    partition = Partition(
        {fid: dense[labels[i]] for i, fid in enumerate(graph.function_ids())}
    )
    return graph, partition


# -- shared detection fixtures -------------------------------------------------
#
# Three synthetic libraries with distinct planted structures and generator
# seeds; features (strings, constants, data refs) are seed-scoped, so nothing
# collides across libraries. The locality divisor of 1 lets full blocks form
# at these program sizes while still vetoing cross-block merges; parameters
# frozen after one calibration run.

DETECTION_LIBS = (
    ("libalpha", 10, 25, 101),
    ("libbeta", 16, 20, 102),
    ("libgamma", 12, 35, 103),
)


def detection_configs():
    from modx.features import FeatureConfig
    from modx.modularize import ModularizerConfig
    from modx.similarity import ChannelWeights
    from modx.weighting import PropagationConfig

    return (
        PropagationConfig(),
        ModularizerConfig(ds_limit_divisor=1, use_biases=True),
        FeatureConfig(),
        ChannelWeights(),
    )


@pytest.fixture(scope="session")
def detection_corpus():
    """(database, {library_name: graph}, {library_name: partition})."""
    from modx.fixtures import planted_graph
    from modx.modularize import modularize
    from modx.tpldb import (
        LibraryMeta,
        assemble_database,
        build_library_signature,
        make_build_params,
    )
    from modx.weighting import propagate_volumes

    pc, mc, fc, cw = detection_configs()
    graphs_by_name: dict[str, ProgramGraph] = {}
    partitions: dict[str, Partition] = {}
    libraries = []
    for name, blocks, block_size, seed in DETECTION_LIBS:
        g = planted_graph(
            blocks=blocks, block_size=block_size, p_in=0.3, p_out=0.01,
            seed=seed, name=name,
        )
        graphs_by_name[name] = g
        partitions[name] = modularize(propagate_volumes(g, pc), mc)
        libraries.append(
            build_library_signature(
                g, LibraryMeta(name, "1.0", ref_frequency=9), pc, mc, fc
            )
        )
    db = assemble_database(libraries, make_build_params(pc, mc, fc, cw))
    return db, graphs_by_name, partitions
