"""Metric tests, anchored by independent brute-force double-loop oracles."""

import random

import pytest
from hypothesis import given, settings

from conftest import graph_of, graphs_with_partitions, random_graph, random_partition
from modx.graph import Partition
from modx.metrics import (
    bunch_mq,
    directed_mq,
    isolated_clusters,
    module_entries,
    origin_mq,
    overlap_score,
    quality_report,
    turbo_mq,
    weighted_directed_mq,
)
from modx.weighting import WeightedGraph, unit_weights


# -- oracles: literal double loops over adjacency matrices ----------------------


def brute_origin_mq(graph, partition):
    ids = list(graph.function_ids())
    pos = {fid: i for i, fid in enumerate(ids)}
    n = len(ids)
    a = [[0] * n for _ in range(n)]
    for e in graph.edges:
        i, j = pos[e.caller], pos[e.callee]
        if i == j:
            a[i][i] = 1
        else:
            a[i][j] = 1
            a[j][i] = 1
    m = sum(a[i][j] for i in range(n) for j in range(n) if i < j) + sum(
        a[i][i] for i in range(n)
    )
    if m == 0:
        return 0.0
    k = [sum(row) for row in a]
    q = 0.0
    for i in range(n):
        for j in range(n):
            if partition.of(ids[i]) == partition.of(ids[j]):
                q += a[i][j] - k[i] * k[j] / (2 * m)
    return q / (2 * m)


def brute_weighted_directed_mq(wgraph, partition):
    ids = list(wgraph.base.function_ids())
    pos = {fid: i for i, fid in enumerate(ids)}
    n = len(ids)
    w = [[0.0] * n for _ in range(n)]
    for (u, v), weight in wgraph.edge_weight.items():
        w[pos[u]][pos[v]] = weight
    total = sum(w[i][j] for i in range(n) for j in range(n))
    if total == 0:
        return 0.0
    k_out = [sum(w[i][j] for j in range(n)) for i in range(n)]
    k_in = [sum(w[i][j] for i in range(n)) for j in range(n)]
    q = 0.0
    for i in range(n):
        for j in range(n):
            if partition.of(ids[i]) == partition.of(ids[j]):
                q += w[i][j] - k_out[i] * k_in[j] / (2 * total)
    return q / (2 * total)


# -- hand-derived examples -------------------------------------------------------


def triangle():
    return graph_of(
        {"f0": 1, "f1": 1, "f2": 1}, [("f0", "f1"), ("f1", "f2"), ("f2", "f0")]
    )


def test_origin_mq_triangle_single_community_is_zero():
    assert origin_mq(triangle(), Partition({"f0": 0, "f1": 0, "f2": 0})) == pytest.approx(0.0)


def test_origin_mq_triangle_singletons():
    q = origin_mq(triangle(), Partition({"f0": 0, "f1": 1, "f2": 2}))
    assert q == pytest.approx(-1.0 / 3.0)


def test_origin_mq_two_triangles_by_component():
    g = graph_of(
        {f"f{i}": 1 for i in range(6)},
        [("f0", "f1"), ("f1", "f2"), ("f2", "f0"),
         ("f3", "f4"), ("f4", "f5"), ("f5", "f3")],
    )
    part = Partition({"f0": 0, "f1": 0, "f2": 0, "f3": 1, "f4": 1, "f5": 1})
    assert origin_mq(g, part) == pytest.approx(0.5)


def test_origin_mq_edgeless_graph_is_zero():
    g = graph_of({"a": 1, "b": 1})
    assert origin_mq(g, Partition({"a": 0, "b": 1})) == 0.0


def single_edge_wgraph(weight=4.0):
    g = graph_of({"A": 1, "B": 1}, [("A", "B")])
    return WeightedGraph.from_edge_weights(g, {("A", "B"): weight})


def test_wdmq_single_edge_split_is_zero():
    assert weighted_directed_mq(single_edge_wgraph(), Partition({"A": 0, "B": 1})) == pytest.approx(0.0)


def test_wdmq_single_edge_merged():
    assert weighted_directed_mq(single_edge_wgraph(), Partition({"A": 0, "B": 0})) == pytest.approx(0.25)


def test_wdmq_single_community_quarter():
    rng = random.Random(11)
    for _ in range(10):
        g = random_graph(rng, rng.randint(2, 15), edge_prob=0.3, connected=True)
        weights = {(e.caller, e.callee): rng.uniform(0.1, 5.0) for e in g.edges}
        wg = WeightedGraph.from_edge_weights(g, weights)
        part = Partition({fid: 0 for fid in g.function_ids()})
        assert weighted_directed_mq(wg, part) == pytest.approx(0.25, abs=1e-12)


def test_wdmq_plain_w_convention():
    # single community under the plain-W normalization scores 0 instead
    wg = single_edge_wgraph()
    assert weighted_directed_mq(wg, Partition({"A": 0, "B": 0}), norm="w") == pytest.approx(0.0)


def test_directed_mq_is_unit_weight_wdmq():
    g = triangle()
    part = Partition({"f0": 0, "f1": 0, "f2": 1})
    assert directed_mq(g, part) == pytest.approx(
        weighted_directed_mq(unit_weights(g), part)
    )


def test_bunch_mq_whole_graph_is_one():
    g = triangle()
    assert bunch_mq(g, Partition({"f0": 0, "f1": 0, "f2": 0})) == pytest.approx(1.0)


def test_bunch_mq_two_modules_with_bridge():
    g = graph_of(
        {"a": 1, "b": 1, "c": 1, "d": 1},
        [("a", "b"), ("b", "a"), ("c", "d"), ("d", "c"), ("a", "c")],
    )
    part = Partition({"a": 0, "b": 0, "c": 1, "d": 1})
    assert bunch_mq(g, part) == pytest.approx(1.6)


def test_bunch_mq_edgeless_is_zero():
    g = graph_of({"a": 1, "b": 1})
    assert bunch_mq(g, Partition({"a": 0, "b": 1})) == 0.0


def test_turbo_mq_weighted_bridge():
    g = graph_of(
        {"a": 1, "b": 1, "c": 1, "d": 1},
        [("a", "b"), ("c", "d"), ("a", "c")],
    )
    wg = WeightedGraph.from_edge_weights(
        g, {("a", "b"): 2.0, ("c", "d"): 2.0, ("a", "c"): 1.0}
    )
    part = Partition({"a": 0, "b": 0, "c": 1, "d": 1})
    assert turbo_mq(wg, part) == pytest.approx(1.6)


def test_turbo_mq_whole_graph_and_edgeless():
    g = graph_of({"a": 1, "b": 1}, [("a", "b")])
    wg = WeightedGraph.from_edge_weights(g, {("a", "b"): 3.0})
    assert turbo_mq(wg, Partition({"a": 0, "b": 0})) == pytest.approx(1.0)
    empty = graph_of({"a": 1, "b": 1})
    assert turbo_mq(unit_weights(empty), Partition({"a": 0, "b": 1})) == 0.0


def test_module_entries_examples():
    g = graph_of({"C": 1, "A": 1, "B": 1}, [("A", "B"), ("C", "A")])
    part = Partition({"A": 0, "B": 0, "C": 1})
    assert module_entries(g, part) == {0: 1, 1: 1}

    solo = graph_of({"x": 1})
    assert module_entries(solo, Partition({"x": 0})) == {0: 1}

    cyc = graph_of({"A": 1, "B": 1}, [("A", "B"), ("B", "A")])
    assert module_entries(cyc, Partition({"A": 0, "B": 0})) == {0: 0}


def test_isolated_clusters_counts_components():
    g = graph_of({"a": 1, "b": 1, "c": 1}, [("a", "b")])
    part = Partition({"a": 0, "b": 0, "c": 0})
    assert isolated_clusters(g, part) == {0: 2}
    assert isolated_clusters(g, Partition({"a": 0, "b": 0, "c": 1})) == {0: 1, 1: 1}


def test_overlap_score_worked_example():
    generated = Partition({"A": 0, "B": 0, "C": 0})
    labeled = Partition({"A": 0, "B": 1, "C": 1})
    assert overlap_score(generated, labeled) == pytest.approx(2.0)


def test_overlap_score_identity_and_singletons():
    p = Partition({"A": 0, "B": 0, "C": 1})
    assert overlap_score(p, p) == pytest.approx(1.0)
    singles = Partition({"A": 0, "B": 1, "C": 2})
    assert overlap_score(singles, p) == pytest.approx(1.0)


# -- properties --------------------------------------------------------------------


@settings(max_examples=80, deadline=None)
@given(graphs_with_partitions(max_nodes=8, allow_self_edges=True))
def test_brute_force_oracles_agree(case):
    graph, partition = case
    assert origin_mq(graph, partition) == pytest.approx(
        brute_origin_mq(graph, partition), abs=1e-12
    )
    wg = unit_weights(graph)
    assert weighted_directed_mq(wg, partition) == pytest.approx(
        brute_weighted_directed_mq(wg, partition), abs=1e-12
    )


@settings(max_examples=50, deadline=None)
@given(graphs_with_partitions(max_nodes=8))
def test_label_permutation_invariance(case):
    graph, partition = case
    k = partition.n_modules
    relabeled = Partition(
        {fid: (m * 7 + 3) % max(k * 7 + 3, 1) for fid, m in partition.assignment.items()}
    )
    # fix density by remapping
    dense = {m: i for i, m in enumerate(sorted(set(relabeled.assignment.values())))}
    relabeled = Partition({f: dense[m] for f, m in relabeled.assignment.items()})
    for metric in (origin_mq, directed_mq, bunch_mq):
        assert metric(graph, partition) == pytest.approx(metric(graph, relabeled))


@settings(max_examples=50, deadline=None)
@given(graphs_with_partitions(max_nodes=8))
def test_modularity_bounded(case):
    graph, partition = case
    assert abs(origin_mq(graph, partition)) <= 1.0 + 1e-12
    assert abs(weighted_directed_mq(unit_weights(graph), partition)) <= 1.0 + 1e-12


def test_quality_report_shape():
    g = triangle()
    part = Partition({"f0": 0, "f1": 0, "f2": 0})
    report = quality_report(g, part)
    d = report.as_dict()
    assert set(d) == {
        "origin_mq",
        "directed_mq",
        "weighted_directed_mq",
        "bunch_mq",
        "turbo_mq",
        "avg_entries",
        "avg_isolated_clusters",
    }
    assert report.avg_isolated_clusters == 1.0
