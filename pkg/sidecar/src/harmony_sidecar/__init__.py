"""Embedding and keyword extraction HTTP service."""

from .registry import KNOWN_MODELS, ModelEntry, Registry, load_registry
from .encoder import Encoder
from .keywords import extract_keywords
from .service import create_app, build_service

__all__ = [
    "KNOWN_MODELS",
    "ModelEntry",
    "Registry",
    "load_registry",
    "Encoder",
    "extract_keywords",
    "create_app",
    "build_service",
]
