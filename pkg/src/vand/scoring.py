"""Tile-level anomaly scores and pixel-level maps.

The tile score compares the tile embedding against the normal and abnormal
prompt sets by averaging cosine alignments per set (the prompt embeddings
themselves are never averaged: abnormal prompts scatter over many concepts,
so their mean embedding is not meaningful). Pixel maps pool the per-prompt
segmentations with a harmonic mean, which only stays high where most
prompts agree.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PipelineConfig, ScoreMap, TilePlan, normalize_map
from .backends.base import Backend, BackendError


@dataclass(frozen=True)
class TileScore:
    """Anomaly score of one tile plus the alignments it came from."""

    tile: TilePlan
    score: float
    s_normal: float
    s_abnormal: float


def mean_alignment(image_emb: np.ndarray, prompt_embs: np.ndarray) -> float:
    """Average cosine similarity between a tile embedding and a prompt set."""
    prompt_embs = np.atleast_2d(prompt_embs)
    if prompt_embs.shape[0] == 0:
        raise ValueError("prompt embedding set is empty")
    if prompt_embs.shape[1] != image_emb.shape[0]:
        raise ValueError(
            f"embedding dims differ: image {image_emb.shape[0]}, "
            f"prompts {prompt_embs.shape[1]}"
        )
    return float((prompt_embs @ image_emb).mean())


def score_from_alignments(s_normal: float, s_abnormal: float, temperature: float) -> float:
    """Two-way softmax over the mean alignments: sigmoid((s_a - s_n) / tau)."""
    if temperature <= 0:
        raise ValueError("temperature must be > 0")
    x = (s_abnormal - s_normal) / temperature
    # Stable logistic; exp only ever sees non-positive arguments.
    if x >= 0:
        return float(1.0 / (1.0 + np.exp(-x)))
    e = np.exp(x)
    return float(e / (1.0 + e))


def tile_score(
    image_emb: np.ndarray,
    normal_embs: np.ndarray,
    abnormal_embs: np.ndarray,
    temperature: float,
    tile: TilePlan,
) -> TileScore:
    """Score one tile from its embedding and the prompt-set embeddings."""
    s_n = mean_alignment(image_emb, normal_embs)
    s_a = mean_alignment(image_emb, abnormal_embs)
    return TileScore(
        tile=tile,
        score=score_from_alignments(s_n, s_a, temperature),
        s_normal=s_n,
        s_abnormal=s_a,
    )


def harmonic_pool(maps: list[ScoreMap], epsilon: float) -> ScoreMap:
    """Per-pixel harmonic mean over maps, with a lower clamp at ``epsilon``.

    The clamp keeps the mean defined at zero activations while preserving
    their veto effect: one near-zero map drags the pooled value near zero
    no matter how high the others are.
    """
    if not maps:
        raise ValueError("harmonic_pool needs at least one map")
    if epsilon <= 0:
        raise ValueError("epsilon must be > 0")
    shape = maps[0].shape
    for i, m in enumerate(maps):
        if m.shape != shape:
            raise ValueError(f"map {i} has shape {m.shape}, expected {shape}")
    stack = np.maximum(np.stack(maps), epsilon)
    return len(maps) / np.sum(1.0 / stack, axis=0)


def tile_pixel_map(
    tile_pixels: np.ndarray,
    localizing_prompts: list[str],
    backend: Backend,
    config: PipelineConfig,
) -> ScoreMap:
    """Harmonically pooled per-prompt segmentations for one tile."""
    if not localizing_prompts:
        raise ValueError("localizing prompt list is empty")
    maps = []
    for prompt in localizing_prompts:
        try:
            raw = backend.segment_by_prompt(tile_pixels, prompt)
        except BackendError as err:
            raise type(err)(
                f"segmentation failed for prompt {prompt!r} on a "
                f"{tile_pixels.shape[0]}x{tile_pixels.shape[1]} tile: {err}"
            ) from err
        maps.append(normalize_map(raw))
    return harmonic_pool(maps, config.harmonic_epsilon)
