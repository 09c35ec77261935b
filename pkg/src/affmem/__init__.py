"""Affordance-aware embodied memory: hierarchical multimodal retrieval
for pick-and-place instructions over pre-explored environments.

Build a memory tree from view records, then answer an instruction with
two ranked view lists (target object and receptacle) via beam traversal,
text/visual score fusion, and affordance-aware instance reranking.
"""

from .builder import BuildConfig, build_memory, load_view_manifest
from .clustering import ClusteringParams, cluster_level, combined_distance
from .config import (
    AppConfig,
    PathsConfig,
    app_config_from_dict,
    app_config_to_dict,
    load_config,
    save_config,
)
from .core import (
    PICK,
    PLACE,
    RECALL_CUTOFFS,
    SR_CUTOFFS,
    AffordanceTriplet,
    EmbodiedMemory,
    Embedding,
    MemoryNode,
    NodeKind,
    Planting,
    Position3D,
    ViewRecord,
    Violation,
    cosine_similarity,
    euclidean_distance,
    validate_memory,
)
from .errors import (
    AffmemError,
    BuildError,
    ConfigError,
    DecompositionError,
    DegenerateVectorError,
    DimensionError,
    EmptyCandidateSetError,
    EmptyInputError,
    FormatError,
    ProviderError,
    StructureError,
)
from .evaluation import (
    ABLATION_NAMES,
    BenchmarkSample,
    EvalReport,
    load_benchmark_manifest,
    recall_at_k,
    run_ablations,
    run_alpha_sweep,
    run_benchmark,
    sr_at_k,
    write_benchmark_manifest,
)
from .persist import load_memory, save_memory
from .providers import (
    FileProvider,
    HttpProvider,
    InstanceProposal,
    MockProvider,
    Provider,
    ProviderConfig,
    SegmentMask,
    build_provider,
)
from .retrieval import (
    ROLE_RECEPTACLE,
    ROLE_TARGET,
    Query,
    RankedEntry,
    RankedList,
    RetrievalConfig,
    RetrievalResult,
    build_query,
    fuse,
    prefilter_instances,
    rerank,
    retrieve,
    retrieve_phrase,
    traverse,
)
from .synthetic import (
    GenParams,
    SyntheticCorpus,
    build_corpus_memories,
    generate,
    mixed_benchmark_params,
    perf_params,
    tie_benchmark_params,
    write_view_manifest,
)

__version__ = "0.1.0"

__all__ = [
    "ABLATION_NAMES",
    "AffmemError",
    "AffordanceTriplet",
    "AppConfig",
    "BenchmarkSample",
    "BuildConfig",
    "BuildError",
    "ClusteringParams",
    "ConfigError",
    "DecompositionError",
    "DegenerateVectorError",
    "DimensionError",
    "EmbodiedMemory",
    "Embedding",
    "EmptyCandidateSetError",
    "EmptyInputError",
    "EvalReport",
    "FileProvider",
    "FormatError",
    "GenParams",
    "HttpProvider",
    "InstanceProposal",
    "MemoryNode",
    "MockProvider",
    "NodeKind",
    "PICK",
    "PLACE",
    "PathsConfig",
    "Planting",
    "Position3D",
    "Provider",
    "ProviderConfig",
    "ProviderError",
    "Query",
    "RECALL_CUTOFFS",
    "ROLE_RECEPTACLE",
    "ROLE_TARGET",
    "RankedEntry",
    "RankedList",
    "RetrievalConfig",
    "RetrievalResult",
    "SR_CUTOFFS",
    "SegmentMask",
    "StructureError",
    "SyntheticCorpus",
    "ViewRecord",
    "Violation",
    "app_config_from_dict",
    "app_config_to_dict",
    "build_corpus_memories",
    "build_memory",
    "build_provider",
    "build_query",
    "cluster_level",
    "combined_distance",
    "cosine_similarity",
    "euclidean_distance",
    "fuse",
    "generate",
    "load_benchmark_manifest",
    "load_config",
    "load_memory",
    "load_view_manifest",
    "mixed_benchmark_params",
    "perf_params",
    "prefilter_instances",
    "recall_at_k",
    "rerank",
    "retrieve",
    "retrieve_phrase",
    "run_ablations",
    "run_alpha_sweep",
    "run_benchmark",
    "save_config",
    "save_memory",
    "sr_at_k",
    "tie_benchmark_params",
    "traverse",
    "validate_memory",
    "write_benchmark_manifest",
    "write_view_manifest",
]
