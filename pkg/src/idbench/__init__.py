"""One-to-many facial identification benchmark harness.

Evaluates rank-one identification over precomputed face embeddings:
probe/gallery partitioning with same-session exclusion and demographic
balancing, exhaustive cosine search, distribution metrics (d-prime,
Wasserstein-1 shift, FPIR, recovery), deterministic image degradations
and a synthetic cohort simulator for verification without private data.
"""

from .embedstore import EmbeddingSet, cosine, read_embeddings, write_embeddings
from .errors import (
    CellError,
    ConfigError,
    DegradeError,
    EmbeddingIOError,
    IdbenchError,
    ManifestError,
    MetricError,
    ProtocolError,
    SearchError,
    SimulateError,
)
from .experiment import (
    ExperimentConfig,
    ExperimentOutput,
    diff_runs,
    load_config,
    run_experiment,
)
from .degrade import (
    AlignedFace,
    BlurSpec,
    LowResSpec,
    SunglassesSpec,
    add_sunglasses,
    apply_op,
    gaussian_blur,
    reduce_resolution,
)
from .manifest import (
    ConditionTag,
    ImageRecord,
    Manifest,
    ManifestStats,
    load_manifest,
    manifest_stats,
    save_manifest,
)
from .matcher import RankOneMatcher
from .metrics import (
    Histogram,
    MetricReport,
    ScoreSample,
    build_report,
    dprime,
    fpir,
    fpir_percent,
    histogram,
    recovery_pct,
    wasserstein1,
)
from .protocol import (
    Partition,
    apply_gallery_variants,
    bind_condition,
    build_partition,
    check_partition,
)
from .search import (
    RankOneResult,
    rank_one,
    rank_one_oracle,
    read_results_csv,
    write_results_csv,
)
from .simulate import CohortSpec, generate_cohort

__version__ = "0.1.0"

__all__ = [
    "AlignedFace",
    "BlurSpec",
    "CellError",
    "CohortSpec",
    "ConditionTag",
    "ConfigError",
    "DegradeError",
    "EmbeddingIOError",
    "EmbeddingSet",
    "ExperimentConfig",
    "ExperimentOutput",
    "Histogram",
    "IdbenchError",
    "ImageRecord",
    "LowResSpec",
    "Manifest",
    "ManifestError",
    "ManifestStats",
    "MetricError",
    "MetricReport",
    "Partition",
    "ProtocolError",
    "RankOneMatcher",
    "RankOneResult",
    "ScoreSample",
    "SearchError",
    "SimulateError",
    "SunglassesSpec",
    "add_sunglasses",
    "apply_gallery_variants",
    "apply_op",
    "bind_condition",
    "build_partition",
    "build_report",
    "check_partition",
    "cosine",
    "diff_runs",
    "dprime",
    "fpir",
    "fpir_percent",
    "gaussian_blur",
    "generate_cohort",
    "histogram",
    "load_config",
    "load_manifest",
    "manifest_stats",
    "rank_one",
    "rank_one_oracle",
    "read_embeddings",
    "read_results_csv",
    "recovery_pct",
    "reduce_resolution",
    "run_experiment",
    "save_manifest",
    "wasserstein1",
    "write_embeddings",
    "write_results_csv",
]
