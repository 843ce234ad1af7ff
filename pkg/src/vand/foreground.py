"""Foreground extraction: proposal filtering, merging and instance splitting.

Mask proposals from the class-agnostic segmenter are filtered against the
salient-object mask, merged into a single foreground mask, and split into
connected components, each treated as one object instance downstream.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .core import BBox, BinaryMask, ForegroundComponent, PipelineConfig, mask_bbox


@dataclass(frozen=True)
class ProposalSet:
    """Candidate region masks for one image, possibly overlapping."""

    masks: tuple[BinaryMask, ...]
    shape: tuple[int, int]

    def __post_init__(self) -> None:
        for i, m in enumerate(self.masks):
            if m.shape != self.shape:
                raise ValueError(
                    f"proposal {i} has shape {m.shape}, expected {self.shape}"
                )
            if not m.any():
                raise ValueError(f"proposal {i} is empty")

    def __len__(self) -> int:
        return len(self.masks)


def filter_proposals(
    proposals: ProposalSet, salient: BinaryMask, coverage_threshold: float
) -> ProposalSet:
    """Keep proposals whose area is mostly covered by the salient mask.

    A proposal survives iff ``|p & salient| / |p| >= coverage_threshold``.
    This drops shadow-like regions that the salient segmenter excludes.
    """
    if salient.shape != proposals.shape:
        raise ValueError(
            f"salient mask shape {salient.shape} does not match proposals "
            f"shape {proposals.shape}"
        )
    if not 0.0 < coverage_threshold <= 1.0:
        raise ValueError(f"coverage_threshold must be in (0, 1], got {coverage_threshold}")
    kept = tuple(
        p
        for p in proposals.masks
        if np.count_nonzero(p & salient) / np.count_nonzero(p) >= coverage_threshold
    )
    return ProposalSet(masks=kept, shape=proposals.shape)


def merge_foreground(kept: ProposalSet) -> BinaryMask:
    """Pixelwise union of the kept proposals (all-false when none survive)."""
    merged = np.zeros(kept.shape, dtype=bool)
    for p in kept.masks:
        merged |= p
    return merged


_STRUCTURES = {
    4: np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool),
    8: np.ones((3, 3), dtype=bool),
}


def connected_components(mask: BinaryMask, connectivity: int = 8) -> list[ForegroundComponent]:
    """Split a mask into connected components with tight bounding boxes.

    Component ids follow the raster-scan order of each component's first
    pixel, so the output is deterministic.
    """
    if connectivity not in _STRUCTURES:
        raise ValueError(f"connectivity must be 4 or 8, got {connectivity}")
    labels, n = ndimage.label(mask, structure=_STRUCTURES[connectivity])
    if n == 0:
        return []
    flat = labels.ravel()
    values, first_idx = np.unique(flat, return_index=True)
    order = [int(v) for _, v in sorted(zip(first_idx, values)) if v != 0]
    components = []
    for new_id, label in enumerate(order):
        comp_mask = labels == label
        components.append(
            ForegroundComponent(id=new_id, mask=comp_mask, bbox=mask_bbox(comp_mask))
        )
    return components


def count_parts(
    component: ForegroundComponent,
    proposals: ProposalSet,
    proposal_overlap_fraction: float,
) -> int:
    """Number of proposals attributed to the component by majority overlap."""
    if proposals.shape != component.mask.shape:
        raise ValueError(
            f"proposal shape {proposals.shape} does not match component mask "
            f"shape {component.mask.shape}"
        )
    count = 0
    for p in proposals.masks:
        if np.count_nonzero(p & component.mask) / np.count_nonzero(p) >= proposal_overlap_fraction:
            count += 1
    return count


def extract_foreground(
    proposals: ProposalSet,
    salient: BinaryMask,
    config: PipelineConfig,
) -> list[ForegroundComponent]:
    """Run the full foreground stage for one image.

    Filters proposals against the salient mask, merges the survivors and
    splits the result into components with attributed part counts. If the
    merged foreground comes out empty (blank image, salient-segmenter
    failure, or no proposal passing the filter) the whole frame becomes a
    single pseudo-component so that downstream stages still run.
    """
    kept = filter_proposals(proposals, salient, config.coverage_threshold)
    merged = merge_foreground(kept)
    if not merged.any():
        h, w = proposals.shape
        full = np.ones((h, w), dtype=bool)
        pseudo = ForegroundComponent(id=0, mask=full, bbox=BBox(0, 0, w, h))
        return [replace(pseudo, part_count=_count_for(pseudo, proposals, config))]
    components = connected_components(merged, config.connectivity)
    return [
        replace(c, part_count=_count_for(c, proposals, config)) for c in components
    ]


def _count_for(
    component: ForegroundComponent, proposals: ProposalSet, config: PipelineConfig
) -> int:
    return count_parts(component, proposals, config.proposal_overlap_fraction)
