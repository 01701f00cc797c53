"""Command-line entry point wiring all pipeline stages over exchange documents."""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Any

from .config import CONFIG_ENV_VAR, GlobalConfig
from .detector import detect, render_report
from .fixtures import clique_pair_graph, library_with_noise, planted_graph
from .graph import (
    GraphFormatError,
    dump_partition,
    dump_program_graph,
    load_partition,
    load_program_graph,
    partition_violations,
)
from .metrics import quality_report
from .modularize import modularize
from .similarity import aggregate
from .tpldb import (
    LibraryMeta,
    assemble_database,
    build_library_signature,
    dump_library_signature,
    load_db,
    load_library_signature,
    make_build_params,
    save_db,
)
from .weighting import propagate_volumes


def _write(text: str, out: str | None) -> None:
    if out is None or out == "-":
        sys.stdout.write(text if text.endswith("\n") else text + "\n")
    else:
        Path(out).write_text(text if text.endswith("\n") else text + "\n", "utf-8")


def _load_graph(path: str):
    with open(path, "rb") as fh:
        return load_program_graph(fh)


def _resolve_config(args: argparse.Namespace, base: GlobalConfig | None = None) -> GlobalConfig:
    """Precedence: flags > config file > database build params > defaults."""
    cfg = base or GlobalConfig.default()
    path = getattr(args, "config", None) or os.environ.get(CONFIG_ENV_VAR)
    if path:
        cfg = GlobalConfig.from_file(path)
    if getattr(args, "c", None) is not None:
        cfg = cfg.override("propagation", c=args.c)
    if getattr(args, "ds_divisor", None) is not None:
        cfg = cfg.override("modularizer", ds_limit_divisor=args.ds_divisor)
    if getattr(args, "bias_cap", None) is not None:
        cfg = cfg.override("modularizer", bias_cap=args.bias_cap)
    if getattr(args, "epsilon", None) is not None:
        cfg = cfg.override("modularizer", epsilon=args.epsilon)
    if getattr(args, "no_biases", False):
        cfg = cfg.override("modularizer", use_biases=False)
    if getattr(args, "tau", None) is not None:
        cfg = cfg.override("detector", tau_match=args.tau)
    if getattr(args, "delta", None) is not None:
        cfg = cfg.override("detector", margin_delta=args.delta)
    if getattr(args, "theta", None) is not None:
        cfg = cfg.override("detector", theta_lib=args.theta)
    return cfg


def _add_pipeline_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="config document (also via $MODX_CONFIG)")
    p.add_argument("--c", type=float, help="volume propagation normalization factor")
    p.add_argument("--ds-divisor", type=int, help="locality dispersion limit divisor")
    p.add_argument("--bias-cap", type=float, help="upper bound of the locality bias")
    p.add_argument("--epsilon", type=float, help="minimum accepted merge gain")
    p.add_argument("--no-biases", action="store_true", help="disable both merge biases")


def _cmd_modularize(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    cfg = _resolve_config(args)
    trace: list[dict[str, Any]] | None = [] if args.trace_propagation else None
    wgraph = propagate_volumes(graph, cfg.propagation, trace=trace)
    if trace is not None:
        for event in trace:
            print(json.dumps(event, sort_keys=True), file=sys.stderr)
    partition = modularize(wgraph, cfg.modularizer)
    extra = None
    if args.seed_report:
        extra = {
            "quality_report": quality_report(graph, partition, wgraph).as_dict()
        }
    _write(dump_partition(graph.program_name, partition, extra), args.output)
    return 0


def _cmd_metrics(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    with open(args.partition, "rb") as fh:
        _, partition = load_partition(fh)
    problems = partition_violations(graph, partition)
    coverage = [p for p in problems if "no module" in p or "unknown function" in p]
    if coverage:
        for p in coverage:
            print(f"error: {p}", file=sys.stderr)
        return 1
    cfg = _resolve_config(args)
    wgraph = propagate_volumes(graph, cfg.propagation)
    report = quality_report(graph, partition, wgraph)
    if args.format == "json":
        _write(json.dumps(report.as_dict(), sort_keys=True), args.output)
    else:
        width = max(len(k) for k in report.as_dict())
        lines = [f"{k:<{width}}  {v:.6f}" for k, v in report.as_dict().items()]
        _write("\n".join(lines), args.output)
    return 0


def _cmd_build_db(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    cfg = _resolve_config(args)
    meta = LibraryMeta(
        name=args.lib_name, version=args.lib_version, ref_frequency=args.ref_frequency
    )
    signature = build_library_signature(
        graph, meta, cfg.propagation, cfg.modularizer, cfg.features
    )
    out = Path(args.out)
    existing = []
    if (out / "corpus.json").is_file():
        current = load_db(out)
        existing = [
            lib for lib in current.libraries if lib.library_name != meta.name
        ]
    params = make_build_params(
        cfg.propagation, cfg.modularizer, cfg.features, cfg.weights
    )
    db = assemble_database([*existing, signature], params)
    save_db(db, out)
    print(
        f"{meta.name}: {signature.module_count} modules,"
        f" {sum(s.function_count for s in signature.modules)} functions"
        f" -> {out}",
        file=sys.stderr,
    )
    return 0


def _cmd_detect(args: argparse.Namespace) -> int:
    graph = _load_graph(args.graph)
    db = load_db(args.db)
    base = GlobalConfig.from_dict(db.build_params) if db.build_params else None
    cfg = _resolve_config(args, base=base)
    report = detect(
        graph,
        db,
        config=cfg.detector,
        propagation=cfg.propagation,
        modularizer=cfg.modularizer,
        features=cfg.features,
        weights=cfg.weights,
    )
    _write(render_report(report, args.report), args.output)
    return 0


def _cmd_compare_modules(args: argparse.Namespace) -> int:
    lib_a = load_library_signature(Path(args.sig_a).read_text(encoding="utf-8"))
    lib_b = load_library_signature(Path(args.sig_b).read_text(encoding="utf-8"))

    def pick(lib, module_id):
        if module_id is None:
            return lib.modules[0]
        for sig in lib.modules:
            if sig.module_id == module_id:
                return sig
        raise GraphFormatError(
            f"{lib.library_name}: no module {module_id} in signature document"
        )

    sig_a = pick(lib_a, args.module_a)
    sig_b = pick(lib_b, args.module_b)
    cfg = _resolve_config(args)
    corpus = load_db(args.db).corpus_stats if args.db else None
    breakdown = aggregate(sig_a, sig_b, cfg.weights, corpus)
    _write(json.dumps(breakdown.as_dict(), sort_keys=True), args.output)
    return 0


def _cmd_gen_fixture(args: argparse.Namespace) -> int:
    if args.kind == "planted":
        graph = planted_graph(
            blocks=args.blocks,
            block_size=args.block_size,
            p_in=args.p_in,
            p_out=args.p_out,
            seed=args.seed,
            volume_range=(args.volume_min, args.volume_max),
            with_features=not args.plain,
        )
    elif args.kind == "clique-pair":
        graph = clique_pair_graph()
    elif args.kind == "library-with-noise":
        library = planted_graph(
            blocks=args.blocks,
            block_size=args.block_size,
            p_in=args.p_in,
            p_out=args.p_out,
            seed=args.lib_seed,
        )
        # generator-sized locality budget so the library forms real modules;
        # explicit flags or a config file still win
        base = GlobalConfig.default().override("modularizer", ds_limit_divisor=1)
        cfg = _resolve_config(args, base=base)
        wgraph = propagate_volumes(library, cfg.propagation)
        partition = modularize(wgraph, cfg.modularizer)
        graph, manifest = library_with_noise(
            library, partition, take=args.take, noise=args.noise, seed=args.seed
        )
        print(json.dumps(manifest, sort_keys=True), file=sys.stderr)
    else:  # unreachable, argparse restricts choices
        raise ValueError(args.kind)
    _write(dump_program_graph(graph), args.output)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="modx",
        description="Call-graph modularization and third-party library detection.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("modularize", help="partition a program graph into modules")
    p.add_argument("graph", help="mgx-1 program graph document")
    _add_pipeline_flags(p)
    p.add_argument("--seed-report", action="store_true",
                   help="embed a quality report for the produced partition")
    p.add_argument("--trace-propagation", action="store_true",
                   help="dump per-iteration propagation events to stderr")
    p.add_argument("-o", "--output", help="output path (default stdout)")
    p.set_defaults(handler=_cmd_modularize)

    p = sub.add_parser("metrics", help="evaluate quality metrics for a partition")
    p.add_argument("graph")
    p.add_argument("partition", help="mpt-1 partition document")
    _add_pipeline_flags(p)
    p.add_argument("--format", choices=("text", "json"), default="text")
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_metrics)

    p = sub.add_parser("build-db", help="add a library signature to a database")
    p.add_argument("graph")
    p.add_argument("--lib-name", required=True)
    p.add_argument("--lib-version", default="0")
    p.add_argument("--ref-frequency", type=int, default=1)
    p.add_argument("--out", required=True, help="database directory")
    _add_pipeline_flags(p)
    p.set_defaults(handler=_cmd_build_db)

    p = sub.add_parser("detect", help="match a program against a signature database")
    p.add_argument("graph")
    p.add_argument("--db", required=True, help="database directory")
    p.add_argument("--report", choices=("text", "machine"), default="text")
    p.add_argument("--tau", type=float, help="minimum accepted aggregate similarity")
    p.add_argument("--delta", type=float, help="required margin over the runner-up")
    p.add_argument("--theta", type=float, help="library evidence threshold")
    _add_pipeline_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_detect)

    p = sub.add_parser("compare-modules", help="similarity breakdown of two signed modules")
    p.add_argument("sig_a", help="msig-1 signature document")
    p.add_argument("sig_b", help="msig-1 signature document")
    p.add_argument("--module-a", type=int, help="module id in sig_a (default: first)")
    p.add_argument("--module-b", type=int, help="module id in sig_b (default: first)")
    p.add_argument("--db", help="database directory supplying corpus statistics")
    _add_pipeline_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_compare_modules)

    p = sub.add_parser("gen-fixture", help="emit a deterministic synthetic graph")
    p.add_argument("kind", choices=("planted", "clique-pair", "library-with-noise"))
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--blocks", type=int, default=20)
    p.add_argument("--block-size", type=int, default=20)
    p.add_argument("--p-in", type=float, default=0.3)
    p.add_argument("--p-out", type=float, default=0.01)
    p.add_argument("--volume-min", type=int, default=1)
    p.add_argument("--volume-max", type=int, default=40)
    p.add_argument("--plain", action="store_true", help="omit strings and constants")
    p.add_argument("--lib-seed", type=int, default=1,
                   help="library-with-noise: seed of the generated library")
    p.add_argument("--take", type=int, default=3,
                   help="library-with-noise: modules to import")
    p.add_argument("--noise", type=int, default=50,
                   help="library-with-noise: unrelated functions to add")
    _add_pipeline_flags(p)
    p.add_argument("-o", "--output")
    p.set_defaults(handler=_cmd_gen_fixture)

    return parser


def run(argv: list[str] | None = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code) if exc.code is not None else 0
    try:
        return args.handler(args)
    except (GraphFormatError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


def main() -> None:
    raise SystemExit(run())


if __name__ == "__main__":
    main()
