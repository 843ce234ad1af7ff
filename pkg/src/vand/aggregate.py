"""Combine tile and pixel predictions into image-level outputs.

Pixel maps are trusted only as far as their tile score allows (the tile
predictor is the more robust of the two), stitched back into image space
with overlap averaging, and the sample score averages the top fraction of
per-component means so noise from many normal instances cannot drown one
defective instance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import ScoreMap, TilePlan
from .scoring import TileScore


@dataclass
class SampleResult:
    """Everything the pipeline produced for one image."""

    sample_id: str
    anomaly_map: ScoreMap
    sample_score: float
    component_scores: list[tuple[int, float]] = field(default_factory=list)
    tile_scores: list[TileScore] = field(default_factory=list)


def scale_tile_map(pixel_map: ScoreMap, tile_score: float) -> ScoreMap:
    """Weight a tile's pixel map by its tile-level score."""
    if not 0.0 <= tile_score <= 1.0:
        raise ValueError(f"tile score must be in [0, 1], got {tile_score}")
    return pixel_map * tile_score


def stitch(
    scaled_maps: list[tuple[TilePlan, ScoreMap]], image_dims: tuple[int, int]
) -> ScoreMap:
    """Rearrange tile maps into image space, averaging overlapping pixels.

    Pixels covered by no tile were never assessed and score 0.
    """
    h, w = image_dims
    total = np.zeros((h, w), dtype=np.float64)
    cover = np.zeros((h, w), dtype=np.int64)
    for plan, tile_map in scaled_maps:
        win = plan.window
        if tile_map.shape != (win.h, win.w):
            raise ValueError(
                f"tile map shape {tile_map.shape} does not match window "
                f"{win.w}x{win.h} at ({win.x0}, {win.y0})"
            )
        rows, cols = win.slices()
        total[rows, cols] += tile_map
        cover[rows, cols] += 1
    out = np.zeros((h, w), dtype=np.float64)
    covered = cover > 0
    out[covered] = total[covered] / cover[covered]
    return out


def component_score(tile_scores: list[TileScore], component_id: int) -> float:
    """Mean tile score over the tiles belonging to one component."""
    scores = [t.score for t in tile_scores if t.tile.component_id == component_id]
    if not scores:
        raise ValueError(f"no tiles recorded for component {component_id}")
    # fsum keeps the mean bit-identical under permutation of the tiles.
    return math.fsum(scores) / len(scores)


def sample_score(component_scores: list[float], top_fraction: float) -> float:
    """Mean of the top ``ceil(top_fraction * n)`` component scores."""
    if not component_scores:
        raise ValueError("sample_score needs at least one component score")
    if not 0.0 < top_fraction <= 1.0:
        raise ValueError(f"top_fraction must be in (0, 1], got {top_fraction}")
    k = max(1, math.ceil(top_fraction * len(component_scores)))
    top = sorted(component_scores, reverse=True)[:k]
    return math.fsum(top) / k
