"""Call-graph modularization and third-party library detection toolkit."""

from .detector import DetectionReport, DetectorConfig, detect, rank_candidates, render_report
from .features import FeatureConfig, ModuleSignature, extract_signature
from .graph import (
    CallEdge,
    FunctionNode,
    GraphFormatError,
    Partition,
    ProgramGraph,
    dump_program_graph,
    load_program_graph,
    validate,
)
from .metrics import QualityReport, quality_report
from .modularize import ModularizerConfig, modularize
from .similarity import ChannelWeights, SimilarityBreakdown, aggregate
from .tpldb import (
    LibraryMeta,
    LibrarySignature,
    SignatureDatabase,
    assemble_database,
    build_library_signature,
    load_db,
    save_db,
)
from .weighting import PropagationConfig, WeightedGraph, propagate_volumes, unit_weights

__all__ = [
    "CallEdge",
    "ChannelWeights",
    "DetectionReport",
    "DetectorConfig",
    "FeatureConfig",
    "FunctionNode",
    "GraphFormatError",
    "LibraryMeta",
    "LibrarySignature",
    "ModularizerConfig",
    "ModuleSignature",
    "Partition",
    "ProgramGraph",
    "PropagationConfig",
    "QualityReport",
    "SignatureDatabase",
    "SimilarityBreakdown",
    "WeightedGraph",
    "aggregate",
    "assemble_database",
    "build_library_signature",
    "detect",
    "dump_program_graph",
    "extract_signature",
    "load_db",
    "load_program_graph",
    "modularize",
    "propagate_volumes",
    "quality_report",
    "rank_candidates",
    "render_report",
    "save_db",
    "unit_weights",
    "validate",
]

__version__ = "0.1.0"
