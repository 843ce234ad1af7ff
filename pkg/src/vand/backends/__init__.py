from .base import (
    Backend,
    BackendDescriptor,
    BackendError,
    ContractError,
    InstrumentedBackend,
    TransportError,
)
from .cache import CACHE_DIR_ENV, EmbeddingCache, default_cache_dir, embed_texts_cached
from .client import ServerBackend
from .mock import MockBackend
from .server import BackendServer

__all__ = [
    "Backend",
    "BackendDescriptor",
    "BackendError",
    "BackendServer",
    "CACHE_DIR_ENV",
    "ContractError",
    "EmbeddingCache",
    "InstrumentedBackend",
    "MockBackend",
    "ServerBackend",
    "TransportError",
    "default_cache_dir",
    "embed_texts_cached",
]
