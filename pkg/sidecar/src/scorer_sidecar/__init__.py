"""Scoring service exposing NLI probabilities and sentence embeddings over HTTP."""

from .app import create_app
from .backends import (
    BackendError,
    HashEmbedBackend,
    LexicalNliBackend,
    SentenceEmbedBackend,
    TransformersNliBackend,
    build_backends,
)
from .config import SidecarConfig

__version__ = "0.1.0"

__all__ = [
    "BackendError",
    "HashEmbedBackend",
    "LexicalNliBackend",
    "SentenceEmbedBackend",
    "SidecarConfig",
    "TransformersNliBackend",
    "build_backends",
    "create_app",
    "__version__",
]
