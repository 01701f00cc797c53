"""Match target-program modules against a signature database and render verdicts."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from math import fsum
from typing import IO, Any, Mapping

from .features import FeatureConfig, ModuleSignature, extract_signature
from .graph import GraphFormatError, ProgramGraph
from .modularize import ModularizerConfig, modularize
from .similarity import ChannelWeights, SimilarityBreakdown, aggregate
from .tpldb import SignatureDatabase, importance_map
from .weighting import PropagationConfig, propagate_volumes

REPORT_FORMAT_VERSION = "mrep-1"

SIZE_RATIO_LIMIT = 3.0


@dataclass(frozen=True)
class DetectorConfig:
    tau_match: float = 0.70
    margin_delta: float = 0.05
    theta_lib: float = 0.20
    top_k: int = 5

    def __post_init__(self) -> None:
        for name, value in (
            ("tau_match", self.tau_match),
            ("margin_delta", self.margin_delta),
            ("theta_lib", self.theta_lib),
        ):
            if value < 0:
                raise ValueError(f"{name} must be >= 0")
        if self.top_k < 1:
            raise ValueError("top_k must be >= 1")


@dataclass(frozen=True)
class Candidate:
    library_name: str
    library_module_id: int
    breakdown: SimilarityBreakdown

    @property
    def score(self) -> float:
        return self.breakdown.aggregate


@dataclass(frozen=True)
class ModuleMatch:
    program_module_id: int
    library_name: str
    library_module_id: int
    breakdown: SimilarityBreakdown
    mc: float
    combined: float
    duplicate: bool = False


@dataclass(frozen=True)
class LibraryVerdict:
    library_name: str
    evidence: float
    matched_module_count: int
    detected: bool


@dataclass(frozen=True)
class DetectionReport:
    program_name: str
    matches: tuple[ModuleMatch, ...]
    verdicts: tuple[LibraryVerdict, ...]

    def detected_libraries(self) -> tuple[str, ...]:
        return tuple(v.library_name for v in self.verdicts if v.detected)


def _size_compatible(a: int, b: int) -> bool:
    lo, hi = min(a, b), max(a, b)
    return hi <= lo * SIZE_RATIO_LIMIT


def rank_candidates(
    signature: ModuleSignature,
    db: SignatureDatabase,
    weights: ChannelWeights | None = None,
    top_k: int = 5,
    prefilter: bool = True,
) -> list[Candidate]:
    """Database modules ranked by aggregate similarity, best first.

    The prefilter skips database modules whose function count differs by more
    than a factor of three; the kernel and function channels are defined for
    every pair, so no content-based exclusion applies beyond that.
    """
    scored: list[Candidate] = []
    for lib, sig in db.iter_modules():
        if prefilter and not _size_compatible(
            signature.function_count, sig.function_count
        ):
            continue
        breakdown = aggregate(signature, sig, weights, db.corpus_stats)
        scored.append(Candidate(lib.library_name, sig.module_id, breakdown))
    scored.sort(key=lambda c: (-c.score, c.library_name, c.library_module_id))
    return scored[:top_k]


def detect(
    graph: ProgramGraph,
    db: SignatureDatabase,
    config: DetectorConfig | None = None,
    propagation: PropagationConfig | None = None,
    modularizer: ModularizerConfig | None = None,
    features: FeatureConfig | None = None,
    weights: ChannelWeights | None = None,
    prefilter: bool = True,
) -> DetectionReport:
    """Modularize the target, match each module, and score library verdicts.

    Pipeline parameters default to the ones recorded in the database so target
    modules are cut the same way the library modules were. A match is accepted
    only when the best candidate clears tau_match and beats the runner-up by
    margin_delta; a library is detected when its summed combined evidence
    reaches theta_lib.
    """
    if not db.libraries:
        raise ValueError("cannot detect against an empty database")
    cfg = config or DetectorConfig()
    db_pc, db_mc, db_fc, db_cw = db.pipeline_configs()
    propagation = propagation or db_pc
    modularizer = modularizer or db_mc
    features = features or db_fc
    weights = weights or db_cw

    wgraph = propagate_volumes(graph, propagation)
    partition = modularize(wgraph, modularizer)
    mc_map = importance_map(db)
    li = {lib.library_name: lib.li for lib in db.libraries}

    matches: list[ModuleMatch] = []
    for mid in partition.module_ids():
        signature = extract_signature(graph, partition, mid, features)
        candidates = rank_candidates(
            signature, db, weights, top_k=cfg.top_k, prefilter=prefilter
        )
        if not candidates:
            continue
        top = candidates[0]
        runner_up = candidates[1].score if len(candidates) > 1 else 0.0
        if top.score < cfg.tau_match or top.score - runner_up < cfg.margin_delta:
            continue
        mc = (
            mc_map[(top.library_name, top.library_module_id)]
            * li[top.library_name]
        )
        matches.append(
            ModuleMatch(
                program_module_id=mid,
                library_name=top.library_name,
                library_module_id=top.library_module_id,
                breakdown=top.breakdown,
                mc=mc,
                combined=top.score * mc,
            )
        )

    # Several program modules may legitimately hit the same library module;
    # keep them all but flag the duplication.
    hits: dict[tuple[str, int], int] = {}
    for m in matches:
        key = (m.library_name, m.library_module_id)
        hits[key] = hits.get(key, 0) + 1
    matches = [
        ModuleMatch(
            program_module_id=m.program_module_id,
            library_name=m.library_name,
            library_module_id=m.library_module_id,
            breakdown=m.breakdown,
            mc=m.mc,
            combined=m.combined,
            duplicate=hits[(m.library_name, m.library_module_id)] > 1,
        )
        for m in matches
    ]

    verdicts = []
    for lib in db.libraries:
        lib_matches = [m for m in matches if m.library_name == lib.library_name]
        evidence = fsum(m.combined for m in lib_matches)
        verdicts.append(
            LibraryVerdict(
                library_name=lib.library_name,
                evidence=evidence,
                matched_module_count=len(lib_matches),
                detected=evidence >= cfg.theta_lib,
            )
        )
    verdicts.sort(key=lambda v: (-v.evidence, v.library_name))
    return DetectionReport(
        program_name=graph.program_name,
        matches=tuple(matches),
        verdicts=tuple(verdicts),
    )


# -- rendering ----------------------------------------------------------------------


def _breakdown_to_json(b: SimilarityBreakdown) -> dict[str, Any]:
    return b.as_dict()


def _breakdown_from_json(doc: Mapping[str, Any]) -> SimilarityBreakdown:
    return SimilarityBreakdown(
        strings=doc["strings"],
        constants=doc["constants"],
        kernel=doc["kernel"],
        edges=doc["edges"],
        functions=doc["functions"],
        aggregate=doc["aggregate"],
        channels_active=frozenset(doc["channels_active"]),
    )


def render_report(report: DetectionReport, fmt: str = "text") -> str:
    """Render verdicts then matches as text, or the versioned machine format."""
    if fmt == "machine":
        doc = {
            "version": REPORT_FORMAT_VERSION,
            "program_name": report.program_name,
            "matches": [
                {
                    "program_module_id": m.program_module_id,
                    "library_name": m.library_name,
                    "library_module_id": m.library_module_id,
                    "breakdown": _breakdown_to_json(m.breakdown),
                    "mc": m.mc,
                    "combined": m.combined,
                    "duplicate": m.duplicate,
                }
                for m in report.matches
            ],
            "verdicts": [
                {
                    "library_name": v.library_name,
                    "evidence": v.evidence,
                    "matched_module_count": v.matched_module_count,
                    "detected": v.detected,
                }
                for v in report.verdicts
            ],
        }
        return json.dumps(doc, sort_keys=True, separators=(",", ":"))
    if fmt != "text":
        raise ValueError(f"unknown report format {fmt!r}")
    lines = [f"program: {report.program_name}"]
    lines.append("verdicts:")
    if not report.verdicts:
        lines.append("  (database empty)")
    for v in report.verdicts:
        flag = "DETECTED" if v.detected else "not detected"
        lines.append(
            f"  {v.library_name}: {flag}"
            f" evidence={v.evidence:.6f} matched_modules={v.matched_module_count}"
        )
    lines.append("matches:")
    if not report.matches:
        lines.append("  (none)")
    for m in report.matches:
        dup = " [shared-target]" if m.duplicate else ""
        lines.append(
            f"  module {m.program_module_id} -> {m.library_name}"
            f"/module {m.library_module_id}"
            f" aggregate={m.breakdown.aggregate:.6f}"
            f" mc={m.mc:.6f} combined={m.combined:.6f}{dup}"
        )
    return "\n".join(lines) + "\n"


def load_report(source: str | bytes | IO[Any]) -> DetectionReport:
    """Parse an mrep-1 document back into a DetectionReport."""
    if hasattr(source, "read"):
        source = source.read()  # type: ignore[union-attr]
    doc = json.loads(source)
    version = doc.get("version")
    if version != REPORT_FORMAT_VERSION:
        raise GraphFormatError(
            f"report document: unsupported version {version!r},"
            f" expected {REPORT_FORMAT_VERSION!r}"
        )
    return DetectionReport(
        program_name=doc["program_name"],
        matches=tuple(
            ModuleMatch(
                program_module_id=m["program_module_id"],
                library_name=m["library_name"],
                library_module_id=m["library_module_id"],
                breakdown=_breakdown_from_json(m["breakdown"]),
                mc=m["mc"],
                combined=m["combined"],
                duplicate=m["duplicate"],
            )
            for m in doc["matches"]
        ),
        verdicts=tuple(
            LibraryVerdict(
                library_name=v["library_name"],
                evidence=v["evidence"],
                matched_module_count=v["matched_module_count"],
                detected=v["detected"],
            )
            for v in doc["verdicts"]
        ),
    )
