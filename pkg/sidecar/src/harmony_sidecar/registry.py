"""Model registry: the fixed set of embedding models the service offers.

The service exposes exactly three model ids. A registry file points each id
at a local checkout (any directory loadable by transformers' from_pretrained)
and may override the vector dimension for reduced test builds; the prefix
rule is fixed per id and cannot be reconfigured.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

PREFIX_RULES = ("none", "e5_query")

# id -> canonical dimension, prefix rule, and upstream weight location.
KNOWN_MODELS: dict[str, dict[str, object]] = {
    "e5-large-v2": {
        "dim": 1024,
        "prefix_rule": "e5_query",
        "path": "intfloat/e5-large-v2",
    },
    "mpnet-base-all": {
        "dim": 768,
        "prefix_rule": "none",
        "path": "sentence-transformers/all-mpnet-base-v2",
    },
    "minilm-l12-all": {
        "dim": 384,
        "prefix_rule": "none",
        "path": "sentence-transformers/all-MiniLM-L12-v2",
    },
}

DEFAULT_KEYWORD_MODEL = "minilm-l12-all"


class RegistryError(ValueError):
    """Bad registry file or unknown model id."""


@dataclass(frozen=True)
class ModelEntry:
    model_id: str
    path: str
    dim: int
    prefix_rule: str = "none"

    def __post_init__(self) -> None:
        if self.model_id not in KNOWN_MODELS:
            raise RegistryError(
                f"unknown model id {self.model_id!r}; "
                f"expected one of {sorted(KNOWN_MODELS)}"
            )
        if self.prefix_rule not in PREFIX_RULES:
            raise RegistryError(f"bad prefix rule {self.prefix_rule!r}")
        if self.dim < 1:
            raise RegistryError("dim must be positive")


@dataclass(frozen=True)
class Registry:
    """Immutable at startup; every entry is loaded before serving begins."""

    entries: tuple[ModelEntry, ...]
    keyword_model: str

    def __post_init__(self) -> None:
        ids = [e.model_id for e in self.entries]
        if not ids:
            raise RegistryError("registry has no models")
        if len(set(ids)) != len(ids):
            raise RegistryError("duplicate model ids in registry")
        if self.keyword_model not in ids:
            raise RegistryError(
                f"keyword model {self.keyword_model!r} is not in the registry"
            )

    def ids(self) -> list[str]:
        return [e.model_id for e in self.entries]

    def get(self, model_id: str) -> ModelEntry | None:
        for entry in self.entries:
            if entry.model_id == model_id:
                return entry
        return None


def load_registry(path: str | Path) -> Registry:
    """Read a registry JSON file.

    Shape: {"models": {id: {"path": ..., "dim"?: ...}}, "keyword_model"?: id}.
    Omitted dims fall back to the canonical dimension for the id; prefix
    rules always come from KNOWN_MODELS.
    """
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    models = raw.get("models")
    if not isinstance(models, dict) or not models:
        raise RegistryError("registry file needs a non-empty 'models' object")
    entries = []
    for model_id in sorted(models):
        spec = models[model_id]
        if model_id not in KNOWN_MODELS:
            raise RegistryError(
                f"unknown model id {model_id!r}; "
                f"expected one of {sorted(KNOWN_MODELS)}"
            )
        if not isinstance(spec, dict) or "path" not in spec:
            raise RegistryError(f"model {model_id!r} needs a 'path'")
        canon = KNOWN_MODELS[model_id]
        entries.append(
            ModelEntry(
                model_id=model_id,
                path=str(spec["path"]),
                dim=int(spec.get("dim", canon["dim"])),
                prefix_rule=str(canon["prefix_rule"]),
            )
        )
    keyword_model = str(raw.get("keyword_model", ""))
    if not keyword_model:
        ids = [e.model_id for e in entries]
        keyword_model = (
            DEFAULT_KEYWORD_MODEL if DEFAULT_KEYWORD_MODEL in ids else ids[0]
        )
    return Registry(entries=tuple(entries), keyword_model=keyword_model)


def default_registry() -> Registry:
    """All three models at their upstream locations, canonical dims."""
    entries = tuple(
        ModelEntry(
            model_id=model_id,
            path=str(spec["path"]),
            dim=int(spec["dim"]),  # type: ignore[arg-type]
            prefix_rule=str(spec["prefix_rule"]),
        )
        for model_id, spec in sorted(KNOWN_MODELS.items())
    )
    return Registry(entries=entries, keyword_model=DEFAULT_KEYWORD_MODEL)
