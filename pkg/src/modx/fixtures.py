"""Deterministic synthetic call-graph generators for tests, demos, and benchmarks."""

from __future__ import annotations

import math
import random
from dataclasses import replace
from typing import Any

from .graph import CallEdge, FunctionNode, Partition, ProgramGraph

_COMMON_CONSTANTS = (0, 1, 255, 4096)


def _geometric_hits(rng: random.Random, total: int, p: float) -> list[int]:
    """Indices of successes in `total` Bernoulli(p) trials, by skip sampling."""
    hits: list[int] = []
    if p <= 0.0 or total <= 0:
        return hits
    if p >= 1.0:
        return list(range(total))
    log_q = math.log(1.0 - p)
    g = -1
    while True:
        g += 1 + int(math.log(1.0 - rng.random()) / log_q)
        if g >= total:
            return hits
        hits.append(g)


def planted_graph(
    blocks: int = 20,
    block_size: int = 20,
    p_in: float = 0.3,
    p_out: float = 0.01,
    seed: int = 0,
    name: str | None = None,
    volume_range: tuple[int, int] = (1, 40),
    with_features: bool = True,
) -> ProgramGraph:
    """Directed planted-partition graph with block-contiguous binary layout.

    Functions of one block sit at consecutive addresses and, when features are
    enabled, draw strings, constants, and data refs from block-scoped pools,
    so blocks behave like coherent library modules.
    """
    if blocks < 1 or block_size < 1:
        raise ValueError("blocks and block_size must be positive")
    rng = random.Random(seed)
    n = blocks * block_size
    label = name or f"planted-{seed}"

    string_pools = [
        [f"{label}_b{b:02d}_s{k:02d}" for k in range(max(4, block_size))]
        for b in range(blocks)
    ]
    constant_pools = [
        [rng.getrandbits(32) for _ in range(max(4, block_size))] for b in range(blocks)
    ]
    ref_pools = [
        [f"{label}_d{b:02d}_{k:02d}" for k in range(max(2, block_size // 2))]
        for b in range(blocks)
    ]

    functions: list[FunctionNode] = []
    for i in range(n):
        b = i // block_size
        volume = rng.randint(*volume_range)
        bb_count = 1 + volume // 3 + rng.randint(0, 3)
        cfg_edges = bb_count - 1 + rng.randint(0, bb_count)
        if with_features:
            strings = rng.sample(string_pools[b], rng.randint(1, 3))
            constants = [
                rng.choice(constant_pools[b]) for _ in range(rng.randint(2, 5))
            ]
            if rng.random() < 0.5:
                constants.append(rng.choice(_COMMON_CONSTANTS))
            refs = rng.sample(ref_pools[b], rng.randint(0, 2))
            dispatch = rng.random() < 0.12
        else:
            strings, constants, refs, dispatch = [], [], [], False
        functions.append(
            FunctionNode(
                id=f"f{i:05d}",
                address=0x1000 + 0x10 * i,
                ordinal=i,
                volume=volume,
                name=None,
                bb_count=bb_count,
                cfg_edge_count=cfg_edges,
                strings=frozenset(strings),
                constants=tuple(sorted(constants)),
                data_refs=frozenset(refs),
                is_dispatch_target=dispatch,
                is_export=rng.random() < 0.1,
            )
        )

    edges: list[CallEdge] = []
    for b in range(blocks):
        start = b * block_size
        for i in range(start, start + block_size):
            for j in range(start, start + block_size):
                if i != j and rng.random() < p_in:
                    edges.append(CallEdge(f"f{i:05d}", f"f{j:05d}"))
    # Cross-block ordered pairs, indexed row by row with the own block cut out.
    row_width = n - block_size
    for g in _geometric_hits(rng, n * row_width, p_out):
        i = g // row_width
        offset = g % row_width
        block_start = (i // block_size) * block_size
        j = offset if offset < block_start else offset + block_size
        edges.append(CallEdge(f"f{i:05d}", f"f{j:05d}"))

    return ProgramGraph.build(label, functions, edges)


def planted_partition(blocks: int, block_size: int) -> Partition:
    """The ground-truth block assignment for a planted graph."""
    return Partition(
        {f"f{i:05d}": i // block_size for i in range(blocks * block_size)}
    )


def clique_pair_graph(name: str = "clique-pair") -> ProgramGraph:
    """Two disconnected 3-cliques with edges in both directions, unit volumes."""
    functions = [
        FunctionNode(id=f"f{i}", address=0x1000 + 0x10 * i, ordinal=i, volume=1)
        for i in range(6)
    ]
    edges = []
    for base in (0, 3):
        trio = [f"f{base + k}" for k in range(3)]
        for u in trio:
            for v in trio:
                if u != v:
                    edges.append(CallEdge(u, v))
    return ProgramGraph.build(name, functions, edges)


def library_with_noise(
    library: ProgramGraph,
    partition: Partition,
    take: int = 3,
    noise: int = 50,
    seed: int = 0,
    min_module_size: int = 5,
    noise_p: float = 0.04,
) -> tuple[ProgramGraph, dict[str, Any]]:
    """Partial-import target: a few library modules plus unrelated noise functions.

    Chosen modules keep their functions, attributes, addresses, and induced
    edges; noise functions live in a disjoint ordinal/address range with
    generator-scoped strings and constants and sparse internal calls.
    """
    rng = random.Random(seed)
    eligible = sorted(
        mid
        for mid, members in partition.modules().items()
        if len(members) >= min_module_size
    )
    if len(eligible) < take:
        raise ValueError(
            f"library has only {len(eligible)} modules of >= {min_module_size} functions"
        )
    chosen = sorted(rng.sample(eligible, take))
    keep = {
        fid for mid in chosen for fid in partition.modules()[mid]
    }
    functions = [library.node(fid) for fid in sorted(keep)]
    edges = [
        e for e in library.edges if e.caller in keep and e.callee in keep
    ]

    top_address = max(f.address for f in library.functions)
    noise_ids = [f"noise{i:04d}" for i in range(noise)]
    for i, nid in enumerate(noise_ids):
        volume = rng.randint(1, 60)
        bb_count = 1 + volume // 3 + rng.randint(0, 3)
        functions.append(
            FunctionNode(
                id=nid,
                address=top_address + 0x1000 + 0x10 * i,
                ordinal=0,
                volume=volume,
                bb_count=bb_count,
                cfg_edge_count=bb_count - 1 + rng.randint(0, bb_count),
                strings=frozenset(
                    f"noise_{seed}_{i:04d}_{k}" for k in range(rng.randint(1, 2))
                ),
                constants=tuple(
                    sorted(rng.getrandbits(32) for _ in range(rng.randint(1, 4)))
                ),
                data_refs=frozenset(
                    {f"noise_d{rng.randint(0, noise // 4 + 1)}"}
                    if rng.random() < 0.4
                    else set()
                ),
                is_dispatch_target=rng.random() < 0.05,
            )
        )
    for i in range(noise):
        for j in range(noise):
            if i != j and rng.random() < noise_p:
                edges.append(CallEdge(noise_ids[i], noise_ids[j]))

    target = ProgramGraph.build(
        f"{library.program_name}-partial-{seed}", functions, edges
    )
    manifest = {
        "library": library.program_name,
        "taken_modules": chosen,
        "taken_functions": sorted(keep),
        "noise_functions": noise,
        "seed": seed,
    }
    return target, manifest


def strip_strings(graph: ProgramGraph) -> ProgramGraph:
    """Copy of the graph with every string literal removed (obfuscation model)."""
    return ProgramGraph.build(
        graph.program_name,
        [replace(f, strings=frozenset()) for f in graph.functions],
        graph.edges,
    )
