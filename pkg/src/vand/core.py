"""Shared domain types, pipeline configuration and raster helpers.

Rasters are plain numpy arrays throughout: binary masks are boolean
``(H, W)`` arrays, score maps are float ``(H, W)`` arrays with values in
``[0, 1]``, and images are float ``(H, W, 3)`` arrays with intensities in
``[0, 1]``.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Optional

import numpy as np

BinaryMask = np.ndarray  # (H, W) bool
ScoreMap = np.ndarray  # (H, W) float in [0, 1]

LABEL_NORMAL = 0
LABEL_ANOMALOUS = 1


@dataclass(frozen=True)
class BBox:
    """Axis-aligned pixel box; ``x1``/``y1`` are exclusive."""

    x0: int
    y0: int
    w: int
    h: int

    def __post_init__(self) -> None:
        if self.w < 1 or self.h < 1:
            raise ValueError(f"BBox extents must be positive, got {self.w}x{self.h}")

    @property
    def x1(self) -> int:
        return self.x0 + self.w

    @property
    def y1(self) -> int:
        return self.y0 + self.h

    @property
    def area(self) -> int:
        return self.w * self.h

    def contains(self, other: "BBox") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )

    def slices(self) -> tuple[slice, slice]:
        """(row, col) slices for indexing an (H, W, ...) array."""
        return slice(self.y0, self.y1), slice(self.x0, self.x1)


@dataclass
class ImageSample:
    """One test image with its label and optional ground-truth mask."""

    id: str
    pixels: np.ndarray  # (H, W, 3) float in [0, 1]
    class_name: str
    label: Optional[int] = None  # LABEL_NORMAL / LABEL_ANOMALOUS / None = unknown
    gt_mask: Optional[BinaryMask] = None

    def __post_init__(self) -> None:
        if self.pixels.ndim != 3 or self.pixels.shape[2] != 3:
            raise ValueError(f"sample {self.id}: pixels must be (H, W, 3)")
        h, w = self.pixels.shape[:2]
        if h < 1 or w < 1:
            raise ValueError(f"sample {self.id}: empty image")
        if self.gt_mask is not None and self.gt_mask.shape != (h, w):
            raise ValueError(
                f"sample {self.id}: gt mask shape {self.gt_mask.shape} does not "
                f"match image shape {(h, w)}"
            )

    @property
    def shape(self) -> tuple[int, int]:
        return self.pixels.shape[0], self.pixels.shape[1]


@dataclass(frozen=True)
class ForegroundComponent:
    """A connected region of the merged foreground mask."""

    id: int
    mask: BinaryMask
    bbox: BBox
    part_count: int = 0  # accepted proposals attributed to this component


@dataclass(frozen=True)
class TilePlan:
    """A square crop window tied to the component it covers.

    ``window`` is the in-image (clamped) crop actually extracted;
    ``ideal_window`` is the square placement before clamping, kept so the
    placement geometry stays checkable independently of image borders.
    """

    window: BBox
    component_id: int
    ideal_window: BBox


@dataclass(frozen=True)
class PipelineConfig:
    """All tunable constants of the pipeline."""

    coverage_threshold: float = 0.8  # proposal kept iff covered this much by salient mask
    min_tile_side: int = 352  # minimum square crop side
    elongation_ratio: float = 1.5  # strip tiling beyond this aspect ratio
    part_count_threshold: int = 20  # strip tiling above this many parts
    top_fraction: float = 0.25  # sample score averages this top share of components
    temperature: float = 0.01  # softmax temperature of the tile score
    harmonic_epsilon: float = 1e-6  # lower clamp before harmonic pooling
    connectivity: int = 8  # 4 or 8, for foreground components
    proposal_overlap_fraction: float = 0.5  # proposal-to-component attribution

    def __post_init__(self) -> None:
        for name in ("coverage_threshold", "top_fraction", "proposal_overlap_fraction"):
            v = getattr(self, name)
            if not 0.0 < v <= 1.0:
                raise ValueError(f"{name} must be in (0, 1], got {v}")
        if self.min_tile_side < 1:
            raise ValueError("min_tile_side must be >= 1")
        if self.temperature <= 0.0:
            raise ValueError("temperature must be > 0")
        if self.harmonic_epsilon <= 0.0:
            raise ValueError("harmonic_epsilon must be > 0")
        if self.connectivity not in (4, 8):
            raise ValueError("connectivity must be 4 or 8")
        if self.elongation_ratio <= 0.0:
            raise ValueError("elongation_ratio must be > 0")
        if self.part_count_threshold < 0:
            raise ValueError("part_count_threshold must be >= 0")

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ValueError(f"unknown config fields: {sorted(unknown)}")
        return cls(**data)

    @classmethod
    def from_file(cls, path: str | Path) -> "PipelineConfig":
        with open(path, "r", encoding="utf-8") as fh:
            data = json.load(fh)
        if not isinstance(data, dict):
            raise ValueError(f"config file {path} must contain a JSON object")
        return cls.from_dict(data)


def clamp_window(window: BBox, image_dims: tuple[int, int]) -> BBox:
    """Translate ``window`` the minimal distance so it lies inside the image.

    A window larger than the image on an axis is shrunk to the image extent
    on that axis (squareness is then lost by necessity).
    """
    h, w = image_dims
    new_w = min(window.w, w)
    new_h = min(window.h, h)
    x0 = min(max(window.x0, 0), w - new_w)
    y0 = min(max(window.y0, 0), h - new_h)
    return BBox(x0=x0, y0=y0, w=new_w, h=new_h)


def normalize_map(values: np.ndarray) -> ScoreMap:
    """Clip a raster into [0, 1]; reject non-finite values.

    Clipping rather than rescaling keeps scores comparable across images.
    """
    values = np.asarray(values, dtype=np.float64)
    finite = np.isfinite(values)
    if not finite.all():
        y, x = np.unravel_index(int(np.argmin(finite)), values.shape)
        raise ValueError(f"non-finite score map value at (row={y}, col={x})")
    return np.clip(values, 0.0, 1.0)


def mask_bbox(mask: BinaryMask) -> BBox:
    """Tight bounding box of a non-empty boolean mask."""
    rows = np.flatnonzero(mask.any(axis=1))
    cols = np.flatnonzero(mask.any(axis=0))
    if rows.size == 0:
        raise ValueError("cannot take the bounding box of an empty mask")
    y0, y1 = int(rows[0]), int(rows[-1]) + 1
    x0, x1 = int(cols[0]), int(cols[-1]) + 1
    return BBox(x0=x0, y0=y0, w=x1 - x0, h=y1 - y0)
