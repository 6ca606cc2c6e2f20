"""memlens: memorization/generalization attribution for sequential
recommendation corpora, semantic-ID prefix statistics, and adaptive
two-model ensembling."""

__version__ = "0.1.0"

from .attribution import (
    AttributionConfig,
    CategoryRecord,
    RatioSummary,
    attribute,
    attribute_all,
    attribute_bruteforce,
)
from .domain import Dataset, Instance, Sequence, SplitSpec, TransitionQuery, make_instances
from .ensemble import EnsembleConfig, FusionResult, alpha_weight, fuse, msp, tune
from .index import TransitionIndex, build_index, intersect_nonempty
from .metrics import PredictionList, binned_report, breakdown, ndcg_at_k, quantile_bins, recall_at_k
from .synth import PlantSpec, SidSpec, generate, random_corpus
from .tokens import (
    PrefixTransitionIndex,
    SemanticIdMap,
    build_prefix_index,
    max_memorizable_n,
    phi,
    prefix,
    prefix_memorizable,
    psi,
    support,
)

__all__ = [
    "AttributionConfig",
    "CategoryRecord",
    "Dataset",
    "EnsembleConfig",
    "FusionResult",
    "Instance",
    "PlantSpec",
    "PredictionList",
    "PrefixTransitionIndex",
    "RatioSummary",
    "SemanticIdMap",
    "Sequence",
    "SidSpec",
    "SplitSpec",
    "TransitionIndex",
    "TransitionQuery",
    "alpha_weight",
    "attribute",
    "attribute_all",
    "attribute_bruteforce",
    "binned_report",
    "breakdown",
    "build_index",
    "build_prefix_index",
    "fuse",
    "generate",
    "intersect_nonempty",
    "make_instances",
    "max_memorizable_n",
    "msp",
    "ndcg_at_k",
    "phi",
    "prefix",
    "prefix_memorizable",
    "psi",
    "quantile_bins",
    "random_corpus",
    "recall_at_k",
    "support",
    "tune",
]
