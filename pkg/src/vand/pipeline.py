"""Per-sample orchestration of the full detection pipeline.

Stage order: foreground extraction, tiling, tile/pixel prediction,
aggregation. Prompt embedding happens once per class and is passed in.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .aggregate import SampleResult, component_score, sample_score, scale_tile_map, stitch
from .backends.base import Backend
from .backends.cache import EmbeddingCache, embed_texts_cached
from .core import ImageSample, PipelineConfig, normalize_map
from .foreground import extract_foreground
from .prompts import PromptEnsemble
from .scoring import tile_pixel_map, tile_score
from .tiling import extract_tile, plan_tiles


@dataclass(frozen=True)
class EnsembleEmbeddings:
    """Prompt-set embeddings reused across every image of a class."""

    normal: np.ndarray  # (N, D)
    abnormal: np.ndarray  # (M, D)


def embed_ensemble(
    backend: Backend,
    ensemble: PromptEnsemble,
    cache: Optional[EmbeddingCache] = None,
) -> EnsembleEmbeddings:
    """Embed both sample-level prompt sets, one batch across cache misses."""
    prompts = list(ensemble.normal_prompts) + list(ensemble.abnormal_prompts)
    stacked = embed_texts_cached(backend, prompts, cache)
    n = len(ensemble.normal_prompts)
    return EnsembleEmbeddings(normal=stacked[:n], abnormal=stacked[n:])


def process_sample(
    sample: ImageSample,
    backend: Backend,
    ensemble: PromptEnsemble,
    embeddings: EnsembleEmbeddings,
    config: PipelineConfig,
) -> SampleResult:
    """Run one image through the whole pipeline."""
    proposals = backend.propose_masks(sample.pixels)
    salient = backend.salient_mask(sample.pixels)
    components = extract_foreground(proposals, salient, config)

    plans = []
    for component in components:
        plans.extend(plan_tiles(component, sample.shape, config))

    tile_scores = []
    scaled_maps = []
    localizing = list(ensemble.localizing_prompts)
    for plan in plans:
        pixels = extract_tile(sample, plan)
        emb = backend.embed_image(pixels)
        ts = tile_score(emb, embeddings.normal, embeddings.abnormal, config.temperature, plan)
        tile_scores.append(ts)
        pmap = tile_pixel_map(pixels, localizing, backend, config)
        scaled_maps.append((plan, scale_tile_map(pmap, ts.score)))

    anomaly_map = normalize_map(stitch(scaled_maps, sample.shape))
    component_scores = [
        (c.id, component_score(tile_scores, c.id)) for c in components
    ]
    score = sample_score([s for _, s in component_scores], config.top_fraction)
    return SampleResult(
        sample_id=sample.id,
        anomaly_map=anomaly_map,
        sample_score=score,
        component_scores=component_scores,
        tile_scores=tile_scores,
    )
