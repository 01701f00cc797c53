#!/usr/bin/env python3
"""Planted-partition recovery benchmark.

Sweeps the locality-bias divisor (plus a no-bias baseline) over seeded
planted graphs and reports NMI against the planted blocks, module counts,
and wall time. Useful for re-calibrating fixture configs after changes to
the merge engine.
"""

import argparse
import time

from sklearn.metrics import normalized_mutual_info_score

from modx.fixtures import planted_graph, planted_partition
from modx.metrics import isolated_clusters
from modx.modularize import ModularizerConfig, modularize
from modx.weighting import propagate_volumes


def evaluate(config: ModularizerConfig, args) -> tuple[float, float, float]:
    truth = planted_partition(args.blocks, args.block_size)
    order = sorted(truth.assignment)
    truth_labels = [truth.assignment[f] for f in order]
    scores, modules = [], []
    start = time.monotonic()
    for seed in range(args.seeds):
        graph = planted_graph(
            blocks=args.blocks,
            block_size=args.block_size,
            p_in=args.p_in,
            p_out=args.p_out,
            seed=seed,
            volume_range=(1, 1),
        )
        part = modularize(propagate_volumes(graph), config)
        scores.append(
            normalized_mutual_info_score(
                truth_labels, [part.assignment[f] for f in order]
            )
        )
        modules.append(part.n_modules)
        assert all(c == 1 for c in isolated_clusters(graph, part).values())
    elapsed = time.monotonic() - start
    return sum(scores) / len(scores), sum(modules) / len(modules), elapsed


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--blocks", type=int, default=20)
    parser.add_argument("--block-size", type=int, default=20)
    parser.add_argument("--p-in", type=float, default=0.3)
    parser.add_argument("--p-out", type=float, default=0.01)
    parser.add_argument("--seeds", type=int, default=20)
    parser.add_argument("--divisors", type=int, nargs="+", default=[1, 2, 4, 100])
    args = parser.parse_args()

    print(f"planted {args.blocks}x{args.block_size}, "
          f"p_in={args.p_in}, p_out={args.p_out}, {args.seeds} seeds")
    print(f"{'config':<24}{'mean NMI':>10}{'modules':>10}{'time':>8}")
    nmi, mods, dt = evaluate(ModularizerConfig(use_biases=False), args)
    print(f"{'no biases':<24}{nmi:>10.3f}{mods:>10.1f}{dt:>7.1f}s")
    for divisor in args.divisors:
        cfg = ModularizerConfig(ds_limit_divisor=divisor, use_biases=True)
        nmi, mods, dt = evaluate(cfg, args)
        print(f"{f'biases, divisor={divisor}':<24}{nmi:>10.3f}{mods:>10.1f}{dt:>7.1f}s")


if __name__ == "__main__":
    main()
