"""Zero-shot visual anomaly detection with pretrained segmentation backends.

Localizes and scores defects in images of industrial objects without any
training data: foreground instances are extracted by filtering mask
proposals against a salient-object mask, covered with square tiles, scored
against a compositional text-prompt ensemble, and localized by harmonically
pooled prompt segmentations.
"""

__version__ = "0.1.0"

from .aggregate import SampleResult, component_score, sample_score, scale_tile_map, stitch
from .backends import (
    Backend,
    BackendDescriptor,
    BackendError,
    ContractError,
    EmbeddingCache,
    InstrumentedBackend,
    MockBackend,
    ServerBackend,
    TransportError,
)
from .core import (
    BBox,
    ForegroundComponent,
    ImageSample,
    PipelineConfig,
    TilePlan,
    clamp_window,
    normalize_map,
)
from .evaluation import (
    ClassReport,
    auroc,
    evaluate_class,
    f1_max,
    load_dataset,
    pixel_f1_max,
)
from .foreground import (
    ProposalSet,
    connected_components,
    count_parts,
    extract_foreground,
    filter_proposals,
    merge_foreground,
)
from .pipeline import EnsembleEmbeddings, embed_ensemble, process_sample
from .prompts import PromptEnsemble, PromptTemplates, compose_ensemble, load_templates
from .scoring import TileScore, harmonic_pool, mean_alignment, tile_pixel_map, tile_score
from .tiling import extract_tile, plan_tiles

__all__ = [
    "BBox",
    "Backend",
    "BackendDescriptor",
    "BackendError",
    "ClassReport",
    "ContractError",
    "EmbeddingCache",
    "EnsembleEmbeddings",
    "ForegroundComponent",
    "ImageSample",
    "InstrumentedBackend",
    "MockBackend",
    "PipelineConfig",
    "PromptEnsemble",
    "PromptTemplates",
    "ProposalSet",
    "SampleResult",
    "ServerBackend",
    "TilePlan",
    "TileScore",
    "TransportError",
    "auroc",
    "clamp_window",
    "component_score",
    "compose_ensemble",
    "connected_components",
    "count_parts",
    "embed_ensemble",
    "evaluate_class",
    "extract_foreground",
    "extract_tile",
    "f1_max",
    "filter_proposals",
    "harmonic_pool",
    "load_dataset",
    "load_templates",
    "mean_alignment",
    "merge_foreground",
    "normalize_map",
    "pixel_f1_max",
    "plan_tiles",
    "process_sample",
    "sample_score",
    "scale_tile_map",
    "stitch",
    "tile_pixel_map",
    "tile_score",
]
