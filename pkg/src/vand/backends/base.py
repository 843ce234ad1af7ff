"""Backend interfaces for the four pretrained-model roles.

The pipeline consumes models through four narrow roles: text/image
embedding (CLIP-like), mask proposals (SAM-like), salient-object
segmentation, and text-prompted segmentation (CLIPSeg-like). Keeping the
roles separate lets deployments mix in-process and remote implementations
per role.
"""

from __future__ import annotations

import abc
from dataclasses import asdict, dataclass

import numpy as np

from ..core import BinaryMask, ScoreMap
from ..foreground import ProposalSet

EMBEDDING_NORM_TOL = 1e-5


class BackendError(Exception):
    """Base class for backend failures."""


class ContractError(BackendError):
    """The request or response violated the backend contract."""


class TransportError(BackendError):
    """The backend could not be reached or the exchange failed mid-flight."""


@dataclass(frozen=True)
class BackendDescriptor:
    """Identity and capabilities reported by a backend."""

    name: str
    embedding_dim: int
    max_input_side: int = 352
    deterministic: bool = True
    concurrent_safe: bool = True
    version: int = 1

    def __post_init__(self) -> None:
        if self.embedding_dim < 1:
            raise ValueError("embedding_dim must be >= 1")

    def to_dict(self) -> dict:
        return asdict(self)


class Backend(abc.ABC):
    """Contract shared by all backend implementations."""

    @property
    @abc.abstractmethod
    def descriptor(self) -> BackendDescriptor: ...

    @abc.abstractmethod
    def embed_text(self, prompts: list[str]) -> np.ndarray:
        """Unit-norm embeddings, one row per prompt, order preserved."""

    @abc.abstractmethod
    def embed_image(self, pixels: np.ndarray) -> np.ndarray:
        """Unit-norm embedding of one (H, W, 3) tile."""

    @abc.abstractmethod
    def propose_masks(self, pixels: np.ndarray) -> ProposalSet:
        """Candidate region masks; possibly overlapping, possibly empty."""

    @abc.abstractmethod
    def salient_mask(self, pixels: np.ndarray) -> BinaryMask:
        """Single binary foreground estimate at image resolution."""

    @abc.abstractmethod
    def segment_by_prompt(self, pixels: np.ndarray, prompt: str) -> ScoreMap:
        """Per-pixel activation in [0, 1] for one localizing prompt."""


def check_prompts(prompts: list[str]) -> None:
    if not prompts:
        raise ContractError("prompt list must be non-empty")
    if any(not isinstance(p, str) for p in prompts):
        raise ContractError("prompts must be strings")


def check_pixels(pixels: np.ndarray) -> None:
    if pixels.ndim != 3 or pixels.shape[2] != 3:
        raise ContractError(f"expected (H, W, 3) pixels, got shape {pixels.shape}")
    if pixels.shape[0] < 1 or pixels.shape[1] < 1:
        raise ContractError("zero-size image")


class InstrumentedBackend(Backend):
    """Delegating wrapper that counts calls per backend method."""

    def __init__(self, inner: Backend):
        self.inner = inner
        self.calls = {
            "embed_text": 0,
            "embed_image": 0,
            "propose_masks": 0,
            "salient_mask": 0,
            "segment_by_prompt": 0,
        }

    @property
    def descriptor(self) -> BackendDescriptor:
        return self.inner.descriptor

    def embed_text(self, prompts: list[str]) -> np.ndarray:
        self.calls["embed_text"] += 1
        return self.inner.embed_text(prompts)

    def embed_image(self, pixels: np.ndarray) -> np.ndarray:
        self.calls["embed_image"] += 1
        return self.inner.embed_image(pixels)

    def propose_masks(self, pixels: np.ndarray) -> ProposalSet:
        self.calls["propose_masks"] += 1
        return self.inner.propose_masks(pixels)

    def salient_mask(self, pixels: np.ndarray) -> BinaryMask:
        self.calls["salient_mask"] += 1
        return self.inner.salient_mask(pixels)

    def segment_by_prompt(self, pixels: np.ndarray, prompt: str) -> ScoreMap:
        self.calls["segment_by_prompt"] += 1
        return self.inner.segment_by_prompt(pixels, prompt)
