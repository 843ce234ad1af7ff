"""Turn foreground components into square crop windows.

Each component normally gets one square tile centred on its bounding box,
never smaller than the model input side so that backends do not upscale
distorted crops. Elongated components with many constituent parts are
instead covered by a strip of overlapping squares whose centres step along
the long axis by half the short axis, so every part of the object falls
into the central half of at least one tile.
"""

from __future__ import annotations

import numpy as np

from .core import (
    BBox,
    ForegroundComponent,
    ImageSample,
    PipelineConfig,
    TilePlan,
    clamp_window,
)


def plan_tiles(
    component: ForegroundComponent,
    image_dims: tuple[int, int],
    config: PipelineConfig,
) -> list[TilePlan]:
    """Plan the square windows covering one component.

    Returns clamped windows in long-axis order; the pre-clamp placement is
    kept on each plan as ``ideal_window``.
    """
    bbox = component.bbox
    aspect = max(bbox.w / bbox.h, bbox.h / bbox.w)
    use_strips = (
        aspect > config.elongation_ratio
        and component.part_count > config.part_count_threshold
    )
    if not use_strips:
        side = max(config.min_tile_side, max(bbox.w, bbox.h))
        ideal = _centered_square(bbox, side)
        return [
            TilePlan(
                window=clamp_window(ideal, image_dims),
                component_id=component.id,
                ideal_window=ideal,
            )
        ]
    return _strip_plans(component, image_dims, config)


def _centered_square(bbox: BBox, side: int) -> BBox:
    # Centre on the bbox centre, rounding the start down.
    x0 = bbox.x0 + (bbox.w - side) // 2
    y0 = bbox.y0 + (bbox.h - side) // 2
    return BBox(x0=x0, y0=y0, w=side, h=side)


def _strip_plans(
    component: ForegroundComponent,
    image_dims: tuple[int, int],
    config: PipelineConfig,
) -> list[TilePlan]:
    bbox = component.bbox
    along_x = bbox.w >= bbox.h
    long_len = bbox.w if along_x else bbox.h
    short_len = bbox.h if along_x else bbox.w
    side = max(config.min_tile_side, short_len)
    step = max(1, short_len // 2)

    # Window centres march along the long axis from the first to the last
    # bbox pixel; the centre spacing of half the short axis keeps the
    # central halves of consecutive windows contiguous.
    first = bbox.x0 if along_x else bbox.y0
    last = first + long_len - 1
    centers = list(range(first, last, step))
    if not centers or centers[-1] != last:
        centers.append(last)

    plans = []
    for c in centers:
        long_start = c - side // 2
        if along_x:
            short_start = bbox.y0 + (bbox.h - side) // 2
            ideal = BBox(x0=long_start, y0=short_start, w=side, h=side)
        else:
            short_start = bbox.x0 + (bbox.w - side) // 2
            ideal = BBox(x0=short_start, y0=long_start, w=side, h=side)
        plans.append(
            TilePlan(
                window=clamp_window(ideal, image_dims),
                component_id=component.id,
                ideal_window=ideal,
            )
        )
    return plans


def extract_tile(image: ImageSample, plan: TilePlan) -> np.ndarray:
    """Pixel-exact crop of the plan's window (no resampling here)."""
    h, w = image.shape
    win = plan.window
    if win.x0 < 0 or win.y0 < 0 or win.x1 > w or win.y1 > h:
        raise ValueError(
            f"tile window {win} out of bounds for image {h}x{w}; "
            "plans must be clamped before extraction"
        )
    rows, cols = win.slices()
    return image.pixels[rows, cols]
