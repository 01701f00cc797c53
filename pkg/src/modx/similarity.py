"""Channel-wise similarity between two module signatures.

Five channels (strings, constants, kernel histograms, edge vectors, function
vectors) are scored in [0, 1] and fused by a weighted mean over the channels
that are defined for both sides; weights renormalize over the active set so
that missing content never drags the score to zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import fsum, sqrt
from typing import Mapping, Sequence

import numpy as np

from .features import (
    ANCHOR_DATA_SHARED,
    ANCHOR_DISPATCH,
    CorpusStats,
    Histogram,
    ModuleSignature,
    Vector,
    tfidf_vector,
)

CHANNELS = ("strings", "constants", "kernel", "edges", "functions")


@dataclass(frozen=True)
class ChannelWeights:
    w_strings: float = 0.30
    w_constants: float = 0.15
    w_kernel: float = 0.20
    w_edges: float = 0.10
    w_functions: float = 0.25

    def __post_init__(self) -> None:
        total = fsum(self.as_dict().values())
        if abs(total - 1.0) > 1e-9:
            raise ValueError(f"channel weights must sum to 1, got {total}")
        if any(w < 0 for w in self.as_dict().values()):
            raise ValueError("channel weights must be non-negative")

    def as_dict(self) -> dict[str, float]:
        return {
            "strings": self.w_strings,
            "constants": self.w_constants,
            "kernel": self.w_kernel,
            "edges": self.w_edges,
            "functions": self.w_functions,
        }


@dataclass(frozen=True)
class SimilarityBreakdown:
    strings: float | None
    constants: float | None
    kernel: float
    edges: float | None
    functions: float
    aggregate: float
    channels_active: frozenset[str]

    def as_dict(self) -> dict[str, object]:
        return {
            "strings": self.strings,
            "constants": self.constants,
            "kernel": self.kernel,
            "edges": self.edges,
            "functions": self.functions,
            "aggregate": self.aggregate,
            "channels_active": sorted(self.channels_active),
        }


def _clamp01(x: float) -> float:
    return 0.0 if x < 0.0 else 1.0 if x > 1.0 else x


def string_similarity(a: frozenset[str], b: frozenset[str]) -> float | None:
    """Jaccard index of the string sets; inactive when either side is empty."""
    if not a or not b:
        return None
    return len(a & b) / len(a | b)


def constant_similarity(
    a: Mapping[int, float], b: Mapping[int, float]
) -> float | None:
    """Cosine of two sparse TF-IDF vectors; inactive when either is zero."""
    if not a or not b:
        return None
    if a == b:
        return 1.0
    dot = fsum(w * b[k] for k, w in a.items() if k in b)
    if dot == 0.0:
        return 0.0
    na = sqrt(fsum(w * w for w in a.values()))
    nb = sqrt(fsum(w * w for w in b.values()))
    return _clamp01(dot / (na * nb))


def kernel_similarity(
    a: Sequence[Histogram], b: Sequence[Histogram]
) -> float:
    """Normalized sum over rounds of histogram dot products."""
    if tuple(a) == tuple(b):
        return 1.0

    def dot(xs: Sequence[Histogram], ys: Sequence[Histogram]) -> int:
        total = 0
        for hx, hy in zip(xs, ys):
            if len(hy) < len(hx):
                hx, hy = hy, hx
            total += sum(count * hy.get(key, 0) for key, count in hx.items())
        return total

    cross = dot(a, b)
    if cross == 0:
        return 0.0
    return _clamp01(cross / sqrt(dot(a, a) * dot(b, b)))


def _cosine_matrix(rows: Sequence[Vector], cols: Sequence[Vector]) -> np.ndarray:
    a = np.asarray(rows, dtype=float)
    b = np.asarray(cols, dtype=float)
    an = np.linalg.norm(a, axis=1)
    bn = np.linalg.norm(b, axis=1)
    an[an == 0.0] = 1.0
    bn[bn == 0.0] = 1.0
    m = np.clip((a / an[:, None]) @ (b / bn[:, None]).T, 0.0, 1.0)
    # identical vectors must score exactly 1.0
    index: dict[Vector, list[int]] = {}
    for j, v in enumerate(cols):
        index.setdefault(v, []).append(j)
    for i, v in enumerate(rows):
        for j in index.get(v, ()):
            m[i, j] = 1.0
    return m


def _greedy_match(
    small: Sequence[Vector], large: Sequence[Vector]
) -> list[tuple[int, int, float]]:
    """Row-by-row best-cosine matching without replacement.

    Callers must present ``small`` and ``large`` in a canonical order; ties on
    cosine resolve to the earliest unused column.
    """
    if not small or not large:
        return []
    m = _cosine_matrix(small, large)
    used = np.zeros(len(large), dtype=bool)
    out: list[tuple[int, int, float]] = []
    for i in range(len(small)):
        row = np.where(used, -1.0, m[i])
        j = int(np.argmax(row))
        used[j] = True
        out.append((i, j, float(m[i, j])))
    return out


def _ordered_sides(
    a: Sequence[Vector], b: Sequence[Vector]
) -> tuple[list[Vector], list[Vector], bool]:
    """Sort both lists and pick a canonical (small, large) orientation."""
    sa, sb = sorted(a), sorted(b)
    if (len(sa), sa) <= (len(sb), sb):
        return sa, sb, False
    return sb, sa, True


def edge_similarity(
    a: Sequence[Vector], b: Sequence[Vector]
) -> float | None:
    """Greedy best-cosine edge matching, scaled by the matched fraction.

    Score = mean matched cosine x (matched / max list size); inactive when
    either module has no intra-module edges.
    """
    if not a or not b:
        return None
    small, large, _ = _ordered_sides(a, b)
    pairs = _greedy_match(small, large)
    total = fsum(cos for _, _, cos in pairs)
    return _clamp01(total / len(large))


def _pairing_key(sig: ModuleSignature) -> tuple:
    # covers everything function_similarity scores on, so two signatures with
    # equal keys are interchangeable and either orientation pairs identically
    return (
        sig.function_count,
        sorted(sig.function_vectors.values()),
        sorted(sig.function_volumes.values()),
        tuple(
            (g.kind, g.member_volumes, g.member_vectors) for g in sig.anchor_groups
        ),
    )


def function_similarity(a: ModuleSignature, b: ModuleSignature) -> float:
    """Volume-weighted function pairing guided by anchor groups.

    Anchor groups of the same kind are matched by descending size; member
    vectors inside matched groups pair greedily by cosine, everything else
    pools for a final greedy pass. Unmatched functions of the larger side
    contribute zero at their volume weight.
    """
    x, y = (a, b) if _pairing_key(a) <= _pairing_key(b) else (b, a)

    x_left = set(x.function_vectors)
    y_left = set(y.function_vectors)
    weighted = 0.0

    def pair_up(x_ids: list[str], y_ids: list[str]) -> float:
        nonlocal weighted
        if not x_ids or not y_ids:
            return 0.0
        x_ids = sorted(x_ids, key=lambda f: (x.function_vectors[f], f))
        y_ids = sorted(y_ids, key=lambda f: (y.function_vectors[f], f))
        xv = [x.function_vectors[f] for f in x_ids]
        yv = [y.function_vectors[f] for f in y_ids]
        if len(xv) <= len(yv):
            pairs = _greedy_match(xv, yv)
            matched = [(x_ids[i], y_ids[j], cos) for i, j, cos in pairs]
        else:
            pairs = _greedy_match(yv, xv)
            matched = [(x_ids[j], y_ids[i], cos) for i, j, cos in pairs]
        acc = 0.0
        for xf, yf, cos in matched:
            x_left.discard(xf)
            y_left.discard(yf)
            acc += (x.function_volumes[xf] + y.function_volumes[yf]) * cos
        return acc

    for kind in (ANCHOR_DATA_SHARED, ANCHOR_DISPATCH):
        gx = [g for g in x.anchor_groups if g.kind == kind]
        gy = [g for g in y.anchor_groups if g.kind == kind]
        for ga, gb in zip(gx, gy):
            weighted += pair_up(
                [f for f in ga.member_ids if f in x_left],
                [f for f in gb.member_ids if f in y_left],
            )
    weighted += pair_up(sorted(x_left), sorted(y_left))

    total_volume = fsum(x.function_volumes.values()) + fsum(
        y.function_volumes.values()
    )
    if total_volume == 0.0:
        return 0.0
    return _clamp01(weighted / total_volume)


def aggregate(
    a: ModuleSignature,
    b: ModuleSignature,
    weights: ChannelWeights | None = None,
    corpus_stats: CorpusStats | None = None,
) -> SimilarityBreakdown:
    """Fuse all channels into one score, renormalizing over active channels.

    Constants are weighted by corpus TF-IDF when statistics are supplied;
    without them (standalone two-module comparison) the channel falls back
    to raw term counts, since a two-document corpus would zero every weight.
    """
    w = weights or ChannelWeights()
    if corpus_stats is None:
        va = {k: float(v) for k, v in a.constant_bag.items()}
        vb = {k: float(v) for k, v in b.constant_bag.items()}
    else:
        va = tfidf_vector(a.constant_bag, corpus_stats)
        vb = tfidf_vector(b.constant_bag, corpus_stats)
    scores: dict[str, float | None] = {
        "strings": string_similarity(a.string_set, b.string_set),
        "constants": constant_similarity(va, vb),
        "kernel": kernel_similarity(a.kernel_histograms, b.kernel_histograms),
        "edges": edge_similarity(a.edge_vectors, b.edge_vectors),
        "functions": function_similarity(a, b),
    }
    weight_map = w.as_dict()
    active = frozenset(c for c in CHANNELS if scores[c] is not None)
    active_weight = fsum(weight_map[c] for c in active)
    if active_weight == 0.0:
        agg = 0.0
    else:
        agg = (
            fsum(weight_map[c] * scores[c] for c in active)  # type: ignore[operator]
            / active_weight
        )
    return SimilarityBreakdown(
        strings=scores["strings"],
        constants=scores["constants"],
        kernel=scores["kernel"],  # type: ignore[arg-type]
        edges=scores["edges"],
        functions=scores["functions"],  # type: ignore[arg-type]
        aggregate=_clamp01(agg),
        channels_active=active,
    )
