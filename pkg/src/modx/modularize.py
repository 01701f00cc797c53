"""Greedy agglomeration of functions into modules over the weighted call graph.

Starting from singletons, the pair of edge-connected modules whose merge gives
the largest biased quality gain is merged until no merge clears the epsilon
threshold. The gain is the incremental change of the directed weighted
modularity, optionally rescaled by a binary-layout locality bias and an
entry-limit bias.
"""

from __future__ import annotations

import heapq
from bisect import bisect_right
from dataclasses import dataclass, field
from itertools import count
from math import fsum

from .graph import Partition, ProgramGraph
from .weighting import WeightedGraph


@dataclass(frozen=True)
class ModularizerConfig:
    ds_limit_divisor: int = 100
    bias_cap: float = 3.0
    max_passes: int | None = None
    epsilon: float = 1e-12
    use_biases: bool = True

    def __post_init__(self) -> None:
        if self.ds_limit_divisor < 1:
            raise ValueError("ds_limit_divisor must be a positive integer")
        if self.bias_cap <= 0:
            raise ValueError("bias_cap must be positive")
        if self.epsilon < 0:
            raise ValueError("epsilon must be non-negative")
        if self.max_passes is not None and self.max_passes < 1:
            raise ValueError("max_passes must be positive when set")


@dataclass
class ModuleState:
    """Incremental bookkeeping for one module during (or after) agglomeration.

    ``a_in``/``a_out`` are the module's weighted in/out degree sums divided by
    2W. ``ordinals``/``ordinal_prefix`` cache the sorted member ordinals and
    their prefix sums so merged dispersion is computable in O(log n).
    """

    members: set[str]
    avg_ordinal: float
    dispersion: float
    entry_count: int
    a_in: float
    a_out: float
    ordinals: tuple[int, ...] = ()
    ordinal_prefix: tuple[float, ...] = (0.0,)
    entries: frozenset[str] = frozenset()

    @property
    def min_ordinal(self) -> int:
        return self.ordinals[0]

    @property
    def ordinal_sum(self) -> float:
        return self.ordinal_prefix[-1]


def _prefix(ordinals: tuple[int, ...]) -> tuple[float, ...]:
    acc = [0.0]
    for o in ordinals:
        acc.append(acc[-1] + o)
    return tuple(acc)


def _abs_deviation(state: ModuleState, mean: float) -> float:
    """Sum of |ordinal - mean| over members, via the sorted prefix cache."""
    i = bisect_right(state.ordinals, mean)
    below = mean * i - state.ordinal_prefix[i]
    above = (state.ordinal_prefix[-1] - state.ordinal_prefix[i]) - mean * (
        len(state.ordinals) - i
    )
    return below + above


def _merge_ordinals(a: tuple[int, ...], b: tuple[int, ...]) -> tuple[int, ...]:
    out: list[int] = []
    i = j = 0
    while i < len(a) and j < len(b):
        if a[i] <= b[j]:
            out.append(a[i])
            i += 1
        else:
            out.append(b[j])
            j += 1
    out.extend(a[i:])
    out.extend(b[j:])
    return tuple(out)


def _entry_survives(fid: str, other_members: set[str], graph: ProgramGraph) -> bool:
    return not any(caller in other_members for caller in graph.callers_of(fid))


def merged_entry_count(r: ModuleState, s: ModuleState, graph: ProgramGraph) -> int:
    """Entry count of the module r and s would form."""
    kept = sum(1 for fid in r.entries if _entry_survives(fid, s.members, graph))
    kept += sum(1 for fid in s.entries if _entry_survives(fid, r.members, graph))
    return kept


def singleton_state(fid: str, wgraph: WeightedGraph) -> ModuleState:
    graph = wgraph.base
    ordinal = graph.node(fid).ordinal
    two_w = 2.0 * wgraph.total_weight
    is_entry = fid not in graph.callers_of(fid) if graph.callers_of(fid) else True
    return ModuleState(
        members={fid},
        avg_ordinal=float(ordinal),
        dispersion=0.0,
        entry_count=1 if is_entry else 0,
        a_in=wgraph.k_in[fid] / two_w if two_w else 0.0,
        a_out=wgraph.k_out[fid] / two_w if two_w else 0.0,
        ordinals=(ordinal,),
        ordinal_prefix=(0.0, float(ordinal)),
        entries=frozenset({fid}) if is_entry else frozenset(),
    )


def module_states(wgraph: WeightedGraph, partition: Partition) -> dict[int, ModuleState]:
    """Build consistent per-module states for an arbitrary partition."""
    graph = wgraph.base
    two_w = 2.0 * wgraph.total_weight
    states: dict[int, ModuleState] = {}
    for mid, members in partition.modules().items():
        ordinals = tuple(sorted(graph.node(fid).ordinal for fid in members))
        avg = fsum(ordinals) / len(ordinals)
        entries = frozenset(
            fid
            for fid in members
            if all(caller not in members for caller in graph.callers_of(fid))
        )
        state = ModuleState(
            members=set(members),
            avg_ordinal=avg,
            dispersion=fsum(abs(o - avg) for o in ordinals),
            entry_count=len(entries),
            a_in=fsum(wgraph.k_in[fid] for fid in members) / two_w if two_w else 0.0,
            a_out=fsum(wgraph.k_out[fid] for fid in members) / two_w if two_w else 0.0,
            ordinals=ordinals,
            ordinal_prefix=_prefix(ordinals),
            entries=entries,
        )
        states[mid] = state
    return states


# -- merge gain and biases -----------------------------------------------------


def delta_q(r: ModuleState, s: ModuleState, wgraph: WeightedGraph) -> float:
    """Incremental directed weighted modularity gain of merging r and s.

    Equals weighted_directed_mq(after) - weighted_directed_mq(before); the
    gain is symmetric in its arguments.
    """
    w_total = wgraph.total_weight
    if w_total <= 0:
        return 0.0
    small, big = (r, s) if len(r.members) <= len(s.members) else (s, r)
    cross = 0.0
    for u in small.members:
        for v, w in wgraph.outgoing.get(u, {}).items():
            if v in big.members:
                cross += w
        for v, w in wgraph.incoming.get(u, {}).items():
            if v in big.members:
                cross += w
    return cross / (2.0 * w_total) - (r.a_out * s.a_in + s.a_out * r.a_in)


def locality_bias(
    r: ModuleState,
    s: ModuleState,
    total_functions: int,
    config: ModularizerConfig,
) -> float:
    """Layout-locality multiplier in [0, bias_cap].

    Merges whose combined ordinal dispersion exceeds the program-size budget
    are discouraged entirely (multiplier 0); tighter merges scale linearly up
    to bias_cap at zero dispersion.
    """
    ds_max = total_functions / config.ds_limit_divisor
    n = len(r.members) + len(s.members)
    mean = (r.ordinal_sum + s.ordinal_sum) / n
    ds = _abs_deviation(r, mean) + _abs_deviation(s, mean)
    if ds > ds_max:
        return 0.0
    if ds_max == 0.0:
        return config.bias_cap
    return config.bias_cap * (1.0 - ds / ds_max)


def entry_bias(r: ModuleState, s: ModuleState, graph: ProgramGraph) -> float:
    """Entry-limit multiplier 2^(-dEQ), rewarding merges that reduce entries."""
    eq_merged = merged_entry_count(r, s, graph)
    delta_eq = eq_merged - (r.entry_count + s.entry_count) / 2.0
    return 2.0 ** (-delta_eq)


# -- the optimizer ---------------------------------------------------------------


class _MergeEngine:
    def __init__(self, wgraph: WeightedGraph, config: ModularizerConfig) -> None:
        self.wg = wgraph
        self.cfg = config
        self.graph = wgraph.base
        self.n = self.graph.n_functions
        self.two_w = 2.0 * wgraph.total_weight
        self.states: dict[int, ModuleState] = {}
        self.stamp: dict[int, int] = {}
        self.node_mod: dict[str, int] = {}
        # symmetric inter-module weight: w(r->s) + w(s->r)
        self.link: dict[int, dict[int, float]] = {}
        self.heap: list[tuple[float, int, int, int, int, int, int]] = []
        self.merge_log: list[tuple[int, int, float]] = []

        ordered = sorted(self.graph.functions, key=lambda f: f.ordinal)
        for idx, f in enumerate(ordered):
            self.states[idx] = singleton_state(f.id, wgraph)
            self.stamp[idx] = 0
            self.node_mod[f.id] = idx
            self.link[idx] = {}
        for (u, v), w in wgraph.edge_weight.items():
            r, s = self.node_mod[u], self.node_mod[v]
            if r == s:
                continue
            self.link[r][s] = self.link[r].get(s, 0.0) + w
            self.link[s][r] = self.link[s].get(r, 0.0) + w

    def _pair_gain(self, r: int, s: int) -> float:
        sr, ss = self.states[r], self.states[s]
        gain = self.link[r][s] / self.two_w - (
            sr.a_out * ss.a_in + ss.a_out * sr.a_in
        )
        if not self.cfg.use_biases or gain <= 0.0:
            return gain
        b_l = locality_bias(sr, ss, self.n, self.cfg)
        if b_l == 0.0:
            return 0.0
        return gain * b_l * entry_bias(sr, ss, self.graph)

    def _push(self, r: int, s: int) -> None:
        gain = self._pair_gain(r, s)
        if gain <= self.cfg.epsilon:
            return
        tb = sorted((self.states[r].min_ordinal, self.states[s].min_ordinal))
        heapq.heappush(
            self.heap, (-gain, tb[0], tb[1], r, s, self.stamp[r], self.stamp[s])
        )

    def _merge(self, r: int, s: int) -> int:
        # Fold the smaller module into the larger; the surviving id is bumped.
        if len(self.states[r].members) < len(self.states[s].members):
            r, s = s, r
        sr, ss = self.states[r], self.states[s]
        ordinals = _merge_ordinals(sr.ordinals, ss.ordinals)
        prefix = _prefix(ordinals)
        mean = prefix[-1] / len(ordinals)
        entries = frozenset(
            fid for fid in sr.entries if _entry_survives(fid, ss.members, self.graph)
        ) | frozenset(
            fid for fid in ss.entries if _entry_survives(fid, sr.members, self.graph)
        )
        sr.members.update(ss.members)
        merged = ModuleState(
            members=sr.members,
            avg_ordinal=mean,
            dispersion=fsum(abs(o - mean) for o in ordinals),
            entry_count=len(entries),
            a_in=sr.a_in + ss.a_in,
            a_out=sr.a_out + ss.a_out,
            ordinals=ordinals,
            ordinal_prefix=prefix,
            entries=entries,
        )
        for fid in ss.members:
            self.node_mod[fid] = r
        self.states[r] = merged
        self.stamp[r] += 1
        del self.states[s]
        del self.stamp[s]

        links_r = self.link[r]
        links_s = self.link.pop(s)
        links_r.pop(s, None)
        links_s.pop(r, None)
        for other, w in links_s.items():
            links_r[other] = links_r.get(other, 0.0) + w
            peer = self.link[other]
            peer.pop(s, None)
            peer[r] = links_r[other]
        # neighbors that already linked r keep their entry; refresh to merged value
        for other in links_r:
            self.link[other][r] = links_r[other]
        return r

    def run(self) -> Partition:
        if self.two_w > 0:
            seen: set[tuple[int, int]] = set()
            for r in sorted(self.link):
                for s in self.link[r]:
                    key = (min(r, s), max(r, s))
                    if key not in seen:
                        seen.add(key)
                        self._push(*key)
        merges = 0
        while self.heap:
            neg_gain, _, _, r, s, st_r, st_s = heapq.heappop(self.heap)
            if (
                r not in self.states
                or s not in self.states
                or self.stamp[r] != st_r
                or self.stamp[s] != st_s
            ):
                continue
            gain = -neg_gain
            if gain <= self.cfg.epsilon:
                break
            self.merge_log.append((r, s, gain))
            t = self._merge(r, s)
            merges += 1
            if self.cfg.max_passes is not None and merges >= self.cfg.max_passes:
                break
            for other in sorted(self.link[t]):
                self._push(t, other)
        # Dense module ids, ordered by first function in the binary layout.
        by_layout = sorted(self.states.values(), key=lambda st: st.min_ordinal)
        assignment: dict[str, int] = {}
        for mid, state in enumerate(by_layout):
            for fid in state.members:
                assignment[fid] = mid
        return Partition(assignment)


def modularize(
    wgraph: WeightedGraph, config: ModularizerConfig | None = None
) -> Partition:
    """Partition the functions of a weighted call graph into modules."""
    cfg = config or ModularizerConfig()
    if wgraph.base.n_functions == 0:
        return Partition({})
    return _MergeEngine(wgraph, cfg).run()
