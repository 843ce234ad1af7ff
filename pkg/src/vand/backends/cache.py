"""Disk cache for prompt-text embeddings.

Prompt embeddings are reused across every image of a class, so they are
persisted once per (backend name, prompt digest) and batches only hit the
backend for cache misses.
"""

from __future__ import annotations

import hashlib
import os
import shutil
from pathlib import Path
from typing import Optional

import numpy as np

from .base import Backend

CACHE_DIR_ENV = "VAND_CACHE_DIR"


def default_cache_dir() -> Path:
    env = os.environ.get(CACHE_DIR_ENV)
    if env:
        return Path(env)
    return Path.home() / ".cache" / "vand"


class EmbeddingCache:
    """One ``.npy`` file per (backend, prompt), under the cache directory."""

    def __init__(self, cache_dir: str | Path):
        self.root = Path(cache_dir)

    def _path(self, backend_name: str, prompt: str) -> Path:
        digest = hashlib.sha256(prompt.encode("utf-8")).hexdigest()
        return self.root / backend_name / f"{digest}.npy"

    def get(self, backend_name: str, prompt: str) -> Optional[np.ndarray]:
        path = self._path(backend_name, prompt)
        if not path.exists():
            return None
        return np.load(path)

    def put(self, backend_name: str, prompt: str, embedding: np.ndarray) -> None:
        path = self._path(backend_name, prompt)
        try:
            path.parent.mkdir(parents=True, exist_ok=True)
            tmp = path.with_suffix(".tmp.npy")
            np.save(tmp, embedding)
            os.replace(tmp, path)
        except PermissionError as err:
            raise PermissionError(
                f"embedding cache directory {path.parent} is not writable: {err}"
            ) from err

    def clear(self) -> None:
        if self.root.exists():
            try:
                shutil.rmtree(self.root)
            except PermissionError as err:
                raise PermissionError(
                    f"cannot clear embedding cache directory {self.root}: {err}"
                ) from err


def embed_texts_cached(
    backend: Backend, prompts: list[str], cache: Optional[EmbeddingCache]
) -> np.ndarray:
    """Embed prompts through the cache; misses go to the backend in one batch."""
    if cache is None:
        return backend.embed_text(list(prompts))
    name = backend.descriptor.name
    rows: list[Optional[np.ndarray]] = [cache.get(name, p) for p in prompts]
    missing = [i for i, r in enumerate(rows) if r is None]
    if missing:
        fresh = backend.embed_text([prompts[i] for i in missing])
        for j, i in enumerate(missing):
            rows[i] = fresh[j]
            cache.put(name, prompts[i], fresh[j])
    return np.stack(rows)
