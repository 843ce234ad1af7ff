"""HTTP client for out-of-process model servers.

Speaks the JSON-over-HTTP protocol documented in the README: endpoints
``/describe``, ``/embed_text``, ``/embed_image``, ``/propose_masks``,
``/salient_mask`` and ``/segment``, with images and masks as base64 PNG.
Transport failures raise :class:`TransportError`; protocol/contract
violations raise :class:`ContractError` carrying the server's error code.
"""

from __future__ import annotations

from typing import Any

import numpy as np
import requests

from ..core import BinaryMask, ScoreMap
from ..foreground import ProposalSet
from .base import (
    EMBEDDING_NORM_TOL,
    Backend,
    BackendDescriptor,
    ContractError,
    TransportError,
    check_pixels,
    check_prompts,
)
from .wire import decode_mask, decode_score_map, encode_image


class ServerBackend(Backend):
    """Backend implementation backed by a remote model server."""

    def __init__(self, url: str, timeout: float = 120.0):
        self.url = url.rstrip("/")
        self.timeout = timeout
        self._session = requests.Session()
        self._descriptor = self._fetch_descriptor()

    @property
    def descriptor(self) -> BackendDescriptor:
        return self._descriptor

    def _fetch_descriptor(self) -> BackendDescriptor:
        payload = self._request("GET", "/describe")
        desc = payload.get("descriptor")
        if not isinstance(desc, dict):
            raise ContractError(f"{self.url}/describe returned no descriptor")
        try:
            return BackendDescriptor(**desc)
        except TypeError as err:
            raise ContractError(f"malformed descriptor from {self.url}: {err}") from err

    def _request(self, method: str, endpoint: str, body: dict | None = None) -> dict:
        url = self.url + endpoint
        try:
            if method == "GET":
                resp = self._session.get(url, timeout=self.timeout)
            else:
                resp = self._session.post(url, json=body, timeout=self.timeout)
        except requests.RequestException as err:
            raise TransportError(f"model server unreachable at {url}: {err}") from err
        if resp.status_code != 200:
            code, message = _error_fields(resp)
            raise ContractError(f"{endpoint} failed with {code}: {message}")
        try:
            payload = resp.json()
        except ValueError as err:
            raise ContractError(f"{endpoint} returned non-JSON body") from err
        if not isinstance(payload, dict):
            raise ContractError(f"{endpoint} returned a non-object body")
        return payload

    def embed_text(self, prompts: list[str]) -> np.ndarray:
        check_prompts(prompts)
        payload = self._request("POST", "/embed_text", {"prompts": list(prompts)})
        embeddings = np.asarray(payload["embeddings"], dtype=np.float64)
        if embeddings.shape != (len(prompts), self._descriptor.embedding_dim):
            raise ContractError(
                f"/embed_text returned shape {embeddings.shape}, expected "
                f"({len(prompts)}, {self._descriptor.embedding_dim})"
            )
        self._check_unit_norm(embeddings, "/embed_text")
        return embeddings

    def embed_image(self, pixels: np.ndarray) -> np.ndarray:
        check_pixels(pixels)
        payload = self._request("POST", "/embed_image", {"image": encode_image(pixels)})
        embedding = np.asarray(payload["embedding"], dtype=np.float64)
        if embedding.shape != (self._descriptor.embedding_dim,):
            raise ContractError(f"/embed_image returned shape {embedding.shape}")
        self._check_unit_norm(embedding[None, :], "/embed_image")
        return embedding

    @staticmethod
    def _check_unit_norm(embeddings: np.ndarray, endpoint: str) -> None:
        norms = np.linalg.norm(embeddings, axis=1)
        if not np.isfinite(embeddings).all() or np.abs(norms - 1.0).max() > EMBEDDING_NORM_TOL:
            raise ContractError(f"{endpoint} returned non-unit-norm embeddings")

    def propose_masks(self, pixels: np.ndarray) -> ProposalSet:
        check_pixels(pixels)
        payload = self._request("POST", "/propose_masks", {"image": encode_image(pixels)})
        shape = pixels.shape[:2]
        masks = tuple(decode_mask(m) for m in payload["masks"])
        return ProposalSet(masks=masks, shape=shape)

    def salient_mask(self, pixels: np.ndarray) -> BinaryMask:
        check_pixels(pixels)
        payload = self._request("POST", "/salient_mask", {"image": encode_image(pixels)})
        mask = decode_mask(payload["mask"])
        if mask.shape != pixels.shape[:2]:
            raise ContractError(
                f"/salient_mask returned shape {mask.shape} for image {pixels.shape[:2]}"
            )
        return mask

    def segment_by_prompt(self, pixels: np.ndarray, prompt: str) -> ScoreMap:
        check_pixels(pixels)
        payload = self._request(
            "POST", "/segment", {"image": encode_image(pixels), "prompt": prompt}
        )
        score_map = decode_score_map(payload["map"])
        if score_map.shape != pixels.shape[:2]:
            raise ContractError(
                f"/segment returned shape {score_map.shape} for tile {pixels.shape[:2]}"
            )
        return score_map


def _error_fields(resp: "requests.Response") -> tuple[str, Any]:
    try:
        body = resp.json()
        return str(body.get("code", resp.status_code)), body.get("message", "")
    except ValueError:
        return str(resp.status_code), resp.text[:200]
