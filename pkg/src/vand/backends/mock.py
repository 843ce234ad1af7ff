"""Deterministic stand-in backend for desk-scale runs and tests.

The mock is plausible rather than accurate: embeddings react to image
content, proposals come from quantized-intensity regions (at two
granularities, so proposals overlap), the salient mask thresholds above
the median intensity, and prompt segmentations highlight pixels that
deviate from the tile mean. Every output is a pure function of
``(seed, input)``, so whole pipeline runs are bit-exact reproducible.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..core import BinaryMask, ScoreMap
from ..foreground import ProposalSet, connected_components
from .base import (
    Backend,
    BackendDescriptor,
    ContractError,
    check_pixels,
    check_prompts,
)


def _rng_for(seed: int, *parts: str) -> np.random.Generator:
    digest = hashlib.sha256(("|".join(parts) + f"|{seed}").encode("utf-8")).digest()
    return np.random.default_rng(int.from_bytes(digest[:8], "little"))


def _gray(pixels: np.ndarray) -> np.ndarray:
    return np.asarray(pixels, dtype=np.float64).mean(axis=2)


class MockBackend(Backend):
    """Seeded, deterministic implementation of all four backend roles."""

    def __init__(
        self,
        seed: int = 0,
        embedding_dim: int = 64,
        quant_levels: tuple[int, ...] = (4, 2),
        min_region_area: int = 4,
    ):
        self.seed = seed
        self.quant_levels = quant_levels
        self.min_region_area = min_region_area
        self._descriptor = BackendDescriptor(
            name="mock", embedding_dim=embedding_dim, max_input_side=352
        )
        # Fixed random projection mixes the seed into image embeddings.
        d = embedding_dim
        self._projection = _rng_for(seed, "projection").normal(size=(d, d))

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def embed_text(self, prompts: list[str]) -> np.ndarray:
        check_prompts(prompts)
        d = self._descriptor.embedding_dim
        out = np.empty((len(prompts), d))
        for i, prompt in enumerate(prompts):
            v = _rng_for(self.seed, "text", prompt).normal(size=d)
            out[i] = v / np.linalg.norm(v)
        return out

    def embed_image(self, pixels: np.ndarray) -> np.ndarray:
        check_pixels(pixels)
        d = self._descriptor.embedding_dim
        gray = _downsample(_gray(pixels), 64)
        hist, _ = np.histogram(gray, bins=d, range=(0.0, 1.0))
        v = self._projection @ (hist / max(1, gray.size))
        norm = np.linalg.norm(v)
        if norm < 1e-12:
            v = np.zeros(d)
            v[0] = 1.0
            return v
        return v / norm

    def propose_masks(self, pixels: np.ndarray) -> ProposalSet:
        check_pixels(pixels)
        gray = _gray(pixels)
        shape = gray.shape
        masks: list[BinaryMask] = []
        seen: set[bytes] = set()
        for levels in self.quant_levels:
            quantized = np.clip((gray * levels).astype(np.int64), 0, levels - 1)
            for level in range(levels):
                region = quantized == level
                if not region.any():
                    continue
                for comp in connected_components(region, connectivity=8):
                    if int(comp.mask.sum()) < self.min_region_area:
                        continue
                    key = comp.mask.tobytes()
                    if key not in seen:
                        seen.add(key)
                        masks.append(comp.mask)
        return ProposalSet(masks=tuple(masks), shape=shape)

    def salient_mask(self, pixels: np.ndarray) -> BinaryMask:
        check_pixels(pixels)
        gray = _gray(pixels)
        return gray > np.median(gray)

    def segment_by_prompt(self, pixels: np.ndarray, prompt: str) -> ScoreMap:
        check_pixels(pixels)
        if not isinstance(prompt, str) or not prompt:
            raise ContractError("prompt must be a non-empty string")
        gray = _gray(pixels)
        deviation = np.abs(gray - gray.mean())
        peak = deviation.max()
        base = deviation / peak if peak > 0 else np.zeros_like(deviation)
        # Prompt-specific gain keeps the per-prompt maps distinct so that
        # harmonic pooling has something to disagree about.
        gain = 0.5 + 0.5 * _rng_for(self.seed, "segment", prompt).random()
        return base * gain


def _downsample(gray: np.ndarray, max_side: int) -> np.ndarray:
    """Cheap strided subsampling to bound embedding cost on large tiles."""
    h, w = gray.shape
    step = max(1, int(np.ceil(max(h, w) / max_side)))
    return gray[::step, ::step]
