"""Library signature database: build, persist, load, and importance scoring.

A database is a directory with one subdirectory per library (each holding an
msig-1 signature document) plus a top-level corpus.json carrying constant
document frequencies and the pipeline parameters the signatures were built
with, so targets are modularized consistently at detection time.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping

from .features import (
    AnchorGroup,
    CorpusStats,
    FeatureConfig,
    ModuleSignature,
    extract_signature,
)
from .graph import GraphFormatError, ProgramGraph
from .modularize import ModularizerConfig, modularize
from .similarity import ChannelWeights
from .weighting import PropagationConfig, propagate_volumes

DB_FORMAT_VERSION = "mdb-1"
SIGNATURE_FORMAT_VERSION = "msig-1"

_NAME_RE = re.compile(r"^[A-Za-z0-9][A-Za-z0-9._+-]*$")


@dataclass(frozen=True)
class LibraryMeta:
    name: str
    version: str = "0"
    ref_frequency: int = 1


@dataclass(frozen=True)
class LibrarySignature:
    library_name: str
    version: str
    modules: tuple[ModuleSignature, ...]
    ref_frequency: int = 1

    @property
    def module_count(self) -> int:
        return len(self.modules)

    @property
    def li(self) -> float:
        """Library importance: ln(ref_frequency + 1) / module count."""
        return math.log(self.ref_frequency + 1) / self.module_count


@dataclass(frozen=True)
class SignatureDatabase:
    libraries: tuple[LibrarySignature, ...]
    corpus_stats: CorpusStats
    build_params: Mapping[str, Any] = field(default_factory=dict)
    format_version: str = DB_FORMAT_VERSION

    def library(self, name: str) -> LibrarySignature:
        for lib in self.libraries:
            if lib.library_name == name:
                return lib
        raise KeyError(f"library {name!r} not in database")

    def iter_modules(self) -> Iterable[tuple[LibrarySignature, ModuleSignature]]:
        for lib in self.libraries:
            for sig in lib.modules:
                yield lib, sig

    @property
    def n_modules(self) -> int:
        return sum(lib.module_count for lib in self.libraries)

    def pipeline_configs(
        self,
    ) -> tuple[PropagationConfig, ModularizerConfig, FeatureConfig, ChannelWeights]:
        """Pipeline parameters recorded at build time, with defaults filled in."""
        return configs_from_params(self.build_params)


def make_build_params(
    propagation: PropagationConfig,
    modularizer: ModularizerConfig,
    features: FeatureConfig,
    weights: ChannelWeights,
) -> dict[str, Any]:
    return {
        "propagation": {"c": propagation.c},
        "modularizer": {
            "ds_limit_divisor": modularizer.ds_limit_divisor,
            "bias_cap": modularizer.bias_cap,
            "max_passes": modularizer.max_passes,
            "epsilon": modularizer.epsilon,
            "use_biases": modularizer.use_biases,
        },
        "features": {
            "min_string_len": features.min_string_len,
            "kernel_iterations": features.kernel_iterations,
            "kernel_bin_width": features.kernel_bin_width,
            "idf_corpus_size": features.idf_corpus_size,
        },
        "weights": {
            "w_strings": weights.w_strings,
            "w_constants": weights.w_constants,
            "w_kernel": weights.w_kernel,
            "w_edges": weights.w_edges,
            "w_functions": weights.w_functions,
        },
    }


def _pick(section: Mapping[str, Any], keys: set[str]) -> dict[str, Any]:
    return {k: v for k, v in section.items() if k in keys}


def configs_from_params(
    params: Mapping[str, Any],
) -> tuple[PropagationConfig, ModularizerConfig, FeatureConfig, ChannelWeights]:
    pc = PropagationConfig(**_pick(params.get("propagation", {}), {"c"}))
    mc = ModularizerConfig(
        **_pick(
            params.get("modularizer", {}),
            {"ds_limit_divisor", "bias_cap", "max_passes", "epsilon", "use_biases"},
        )
    )
    fc = FeatureConfig(
        **_pick(
            params.get("features", {}),
            {"min_string_len", "kernel_iterations", "kernel_bin_width", "idf_corpus_size"},
        )
    )
    cw = ChannelWeights(
        **_pick(
            params.get("weights", {}),
            {"w_strings", "w_constants", "w_kernel", "w_edges", "w_functions"},
        )
    )
    return pc, mc, fc, cw


# -- building --------------------------------------------------------------------


def build_library_signature(
    graph: ProgramGraph,
    meta: LibraryMeta,
    propagation: PropagationConfig | None = None,
    modularizer: ModularizerConfig | None = None,
    features: FeatureConfig | None = None,
) -> LibrarySignature:
    """Modularize a library graph and sign every resulting module."""
    wgraph = propagate_volumes(graph, propagation)
    partition = modularize(wgraph, modularizer)
    signatures = tuple(
        extract_signature(graph, partition, mid, features)
        for mid in partition.module_ids()
    )
    return LibrarySignature(
        library_name=meta.name,
        version=meta.version,
        modules=signatures,
        ref_frequency=meta.ref_frequency,
    )


def assemble_database(
    libraries: Iterable[LibrarySignature],
    build_params: Mapping[str, Any] | None = None,
) -> SignatureDatabase:
    """Collect libraries and recompute corpus statistics over all modules."""
    libs = tuple(sorted(libraries, key=lambda l: l.library_name))
    stats = CorpusStats.from_constant_bags(
        sig.constant_bag for lib in libs for sig in lib.modules
    )
    return SignatureDatabase(
        libraries=libs,
        corpus_stats=stats,
        build_params=dict(build_params or {}),
    )


# -- importance scores -------------------------------------------------------------


def module_importance(
    db: SignatureDatabase, library_name: str, module_id: int
) -> float:
    """Module size relative to the mean module size across the whole database."""
    sizes = [sig.function_count for _, sig in db.iter_modules()]
    if not sizes:
        raise ValueError("database has no modules")
    target = next(
        sig.function_count
        for lib, sig in db.iter_modules()
        if lib.library_name == library_name and sig.module_id == module_id
    )
    return target * len(sizes) / sum(sizes)


def importance_map(db: SignatureDatabase) -> dict[tuple[str, int], float]:
    entries = [
        (lib.library_name, sig.module_id, sig.function_count)
        for lib, sig in db.iter_modules()
    ]
    if not entries:
        return {}
    total = sum(size for _, _, size in entries)
    n = len(entries)
    return {(name, mid): size * n / total for name, mid, size in entries}


def matching_confidence(
    db: SignatureDatabase, library_name: str, module_id: int
) -> float:
    """Module importance scaled by the owning library's importance."""
    return module_importance(db, library_name, module_id) * db.library(library_name).li


# -- serialization -------------------------------------------------------------------


def _vector_to_json(vec: tuple[float, ...]) -> list[float]:
    return list(vec)


def _signature_to_json(sig: ModuleSignature) -> dict[str, Any]:
    return {
        "module_id": sig.module_id,
        "function_count": sig.function_count,
        "string_set": sorted(sig.string_set),
        "constant_bag": {str(k): v for k, v in sorted(sig.constant_bag.items())},
        "kernel_histograms": [
            {",".join(map(str, key)): count for key, count in sorted(hist.items())}
            for hist in sig.kernel_histograms
        ],
        "edge_vectors": [_vector_to_json(v) for v in sig.edge_vectors],
        "function_vectors": {
            fid: _vector_to_json(v) for fid, v in sorted(sig.function_vectors.items())
        },
        "function_volumes": dict(sorted(sig.function_volumes.items())),
        "anchor_groups": [
            {
                "kind": g.kind,
                "member_ids": list(g.member_ids),
                "member_volumes": list(g.member_volumes),
                "member_vectors": [_vector_to_json(v) for v in g.member_vectors],
            }
            for g in sig.anchor_groups
        ],
    }


def _signature_from_json(doc: Mapping[str, Any]) -> ModuleSignature:
    return ModuleSignature(
        module_id=int(doc["module_id"]),
        function_count=int(doc["function_count"]),
        string_set=frozenset(doc["string_set"]),
        constant_bag={int(k): int(v) for k, v in doc["constant_bag"].items()},
        kernel_histograms=tuple(
            {
                tuple(int(x) for x in key.split(",")): int(count)
                for key, count in hist.items()
            }
            for hist in doc["kernel_histograms"]
        ),
        edge_vectors=tuple(tuple(v) for v in doc["edge_vectors"]),
        function_vectors={
            fid: tuple(v) for fid, v in doc["function_vectors"].items()
        },
        function_volumes={
            fid: int(v) for fid, v in doc["function_volumes"].items()
        },
        anchor_groups=tuple(
            AnchorGroup(
                kind=g["kind"],
                member_ids=tuple(g["member_ids"]),
                member_volumes=tuple(int(v) for v in g["member_volumes"]),
                member_vectors=tuple(tuple(v) for v in g["member_vectors"]),
            )
            for g in doc["anchor_groups"]
        ),
    )


def dump_library_signature(lib: LibrarySignature) -> str:
    doc = {
        "version": SIGNATURE_FORMAT_VERSION,
        "library_name": lib.library_name,
        "library_version": lib.version,
        "ref_frequency": lib.ref_frequency,
        "modules": [_signature_to_json(sig) for sig in lib.modules],
    }
    return json.dumps(doc, sort_keys=True, separators=(",", ":"))


def load_library_signature(text: str | bytes) -> LibrarySignature:
    doc = json.loads(text)
    version = doc.get("version")
    if version != SIGNATURE_FORMAT_VERSION:
        raise GraphFormatError(
            f"signature document: unsupported version {version!r},"
            f" expected {SIGNATURE_FORMAT_VERSION!r}"
        )
    return LibrarySignature(
        library_name=doc["library_name"],
        version=doc["library_version"],
        modules=tuple(_signature_from_json(m) for m in doc["modules"]),
        ref_frequency=int(doc["ref_frequency"]),
    )


def save_db(db: SignatureDatabase, path: str | Path) -> None:
    """Write the database directory; stable bytes for a fixed database."""
    root = Path(path)
    root.mkdir(parents=True, exist_ok=True)
    names = []
    for lib in db.libraries:
        if not _NAME_RE.match(lib.library_name):
            raise ValueError(f"library name {lib.library_name!r} is not filesystem-safe")
        names.append(lib.library_name)
        lib_dir = root / lib.library_name
        lib_dir.mkdir(parents=True, exist_ok=True)
        (lib_dir / "signature.json").write_text(
            dump_library_signature(lib), encoding="utf-8"
        )
    corpus = {
        "version": DB_FORMAT_VERSION,
        "n_modules": db.corpus_stats.n_modules,
        "df": {str(k): v for k, v in sorted(db.corpus_stats.df.items())},
        "libraries": sorted(names),
        "build_params": dict(db.build_params),
    }
    (root / "corpus.json").write_text(
        json.dumps(corpus, sort_keys=True, separators=(",", ":")), encoding="utf-8"
    )


def load_db(path: str | Path) -> SignatureDatabase:
    root = Path(path)
    corpus_path = root / "corpus.json"
    if not corpus_path.is_file():
        raise GraphFormatError(f"{root}: not a signature database (corpus.json missing)")
    try:
        corpus = json.loads(corpus_path.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise GraphFormatError(f"{corpus_path}: corrupt corpus document: {exc}") from exc
    version = corpus.get("version")
    if version != DB_FORMAT_VERSION:
        raise GraphFormatError(
            f"{corpus_path}: unsupported version {version!r}, expected {DB_FORMAT_VERSION!r}"
        )
    libraries = []
    for name in corpus.get("libraries", []):
        sig_path = root / name / "signature.json"
        if not sig_path.is_file():
            raise GraphFormatError(f"{root}: library {name!r} listed but missing")
        libraries.append(load_library_signature(sig_path.read_text(encoding="utf-8")))
    stats = CorpusStats(
        df={int(k): int(v) for k, v in corpus.get("df", {}).items()},
        n_modules=int(corpus.get("n_modules", 0)),
    )
    return SignatureDatabase(
        libraries=tuple(libraries),
        corpus_stats=stats,
        build_params=corpus.get("build_params", {}),
    )
