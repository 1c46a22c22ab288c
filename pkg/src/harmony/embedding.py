"""Embedding providers, cosine similarity, and an on-disk vector cache.

Three interchangeable providers back the same contract: an HTTP client for
the sidecar, a reader for precomputed vector files, and a hash-based
embedder for offline tests. Providers must return unit-normalized float
vectors; the engine verifies and never re-normalizes.
"""

from __future__ import annotations

import hashlib
import json
import os
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import Protocol, Sequence

import numpy as np
import requests

from .errors import DimMismatchError, NormalizationError, ProviderUnavailableError

# Providers must return vectors whose Euclidean norm is 1 within this.
NORM_TOLERANCE = 1e-6
DEFAULT_BATCH_SIZE = 64

ENDPOINT_ENV = "HARMONY_EMBED_ENDPOINT"
CACHE_DIR_ENV = "HARMONY_CACHE_DIR"


@dataclass(frozen=True)
class EmbeddingVector:
    """A unit-normalized embedding with its provenance."""

    values: np.ndarray
    dim: int
    model_id: str

    def __post_init__(self) -> None:
        if self.values.shape != (self.dim,):
            raise DimMismatchError(
                f"vector length {self.values.shape} does not match dim {self.dim}"
            )
        norm = float(np.linalg.norm(self.values))
        if abs(norm - 1.0) > NORM_TOLERANCE:
            raise NormalizationError(
                f"norm {norm!r} outside 1 +/- {NORM_TOLERANCE} for {self.model_id}"
            )
        self.values.setflags(write=False)


class EmbeddingProvider(Protocol):
    """Turns a batch of texts into unit-normalized vectors."""

    def embed(self, model_id: str, texts: Sequence[str]) -> list[np.ndarray]: ...


def text_key(text: str) -> str:
    """Content hash used as the cache key for one text."""
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def cosine(u: EmbeddingVector, v: EmbeddingVector) -> float:
    """dot(u,v)/(norm*norm); plain dot product for unit vectors."""
    if u.dim != v.dim:
        raise DimMismatchError(f"dims differ: {u.dim} vs {v.dim}")
    denom = float(np.linalg.norm(u.values)) * float(np.linalg.norm(v.values))
    return float(np.dot(u.values, v.values)) / denom


def hash_embed(text: str, dim: int = 256, seed: int = 0) -> EmbeddingVector:
    """Deterministic offline embedder: signed token hashing into dim buckets.

    Each token contributes to 8 pseudo-random (bucket, sign) slots derived
    from a keyed hash, so shared tokens pull cosine up and disjoint token
    sets stay near orthogonal. Empty text maps to a reserved pseudo-token so
    the result is still a unit vector.
    """
    if dim < 8:
        raise ValueError("dim must be >= 8")
    tokens = text.lower().split() or ["\x00empty"]
    acc = np.zeros(dim, dtype=np.float64)
    for token in tokens:
        digest = hashlib.blake2b(
            f"{seed}:{token}".encode("utf-8"), digest_size=32
        ).digest()
        for k in range(8):
            chunk = digest[4 * k : 4 * k + 4]
            raw = int.from_bytes(chunk, "little")
            bucket = raw % dim
            sign = 1.0 if (raw >> 31) & 1 else -1.0
            acc[bucket] += sign
    norm = float(np.linalg.norm(acc))
    if norm == 0.0:
        # All contributions cancelled; fall back to a fixed basis vector.
        acc[0] = 1.0
        norm = 1.0
    return EmbeddingVector(values=acc / norm, dim=dim, model_id=f"hash-{dim}-{seed}")


class HashProvider:
    """EmbeddingProvider adapter over hash_embed, for offline runs.

    The effective seed mixes in the model id, so requesting three model ids
    from one provider yields three distinct (but individually deterministic)
    vector spaces.
    """

    def __init__(self, dim: int = 256, seed: int = 0):
        self.dim = dim
        self.seed = seed

    def _model_seed(self, model_id: str) -> int:
        digest = hashlib.blake2b(
            f"{self.seed}|{model_id}".encode("utf-8"), digest_size=8
        ).digest()
        return int.from_bytes(digest, "little")

    def embed(self, model_id: str, texts: Sequence[str]) -> list[np.ndarray]:
        seed = self._model_seed(model_id)
        return [hash_embed(t, self.dim, seed).values for t in texts]


class HttpProvider:
    """Speaks the sidecar protocol: POST {model, texts} -> {vectors, dim}."""

    def __init__(self, endpoint: str | None = None, timeout: float = 60.0):
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        if not endpoint:
            raise ProviderUnavailableError(
                f"no endpoint configured (set {ENDPOINT_ENV})"
            )
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def embed(self, model_id: str, texts: Sequence[str]) -> list[np.ndarray]:
        try:
            resp = requests.post(
                f"{self.endpoint}/embed",
                json={"model": model_id, "texts": list(texts)},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise ProviderUnavailableError(str(exc)) from exc
        payload = resp.json()
        return [np.asarray(vec, dtype=np.float64) for vec in payload["vectors"]]


class HttpKeywordProvider:
    """Keyword extraction over the sidecar: POST {text, max_words} -> {keywords}."""

    def __init__(self, endpoint: str | None = None, timeout: float = 60.0):
        endpoint = endpoint or os.environ.get(ENDPOINT_ENV, "")
        if not endpoint:
            raise ProviderUnavailableError(
                f"no endpoint configured (set {ENDPOINT_ENV})"
            )
        self.endpoint = endpoint.rstrip("/")
        self.timeout = timeout

    def keywords(self, text: str, max_words: int) -> str:
        try:
            resp = requests.post(
                f"{self.endpoint}/keywords",
                json={"text": text, "max_words": max_words},
                timeout=self.timeout,
            )
            resp.raise_for_status()
        except requests.RequestException as exc:
            raise ProviderUnavailableError(str(exc)) from exc
        return str(resp.json()["keywords"])


_VECFILE_MAGIC_LEN = 4  # u32 little-endian header length prefix


def write_vector_file(
    path: str | Path,
    model_id: str,
    dim: int,
    entries: Sequence[tuple[str, np.ndarray]],
) -> None:
    """Write (text, vector) pairs in the precomputed-vector file format.

    Layout: u32 LE header length, JSON header {model_id, dim, count}, then
    per record a 32-byte sha256 of the text and dim float32 little-endian.
    """
    header = json.dumps(
        {"model_id": model_id, "dim": dim, "count": len(entries)},
        sort_keys=True,
    ).encode("utf-8")
    with Path(path).open("wb") as fh:
        fh.write(struct.pack("<I", len(header)))
        fh.write(header)
        for text, vec in entries:
            if vec.shape != (dim,):
                raise DimMismatchError(f"vector for {text!r} has shape {vec.shape}")
            fh.write(hashlib.sha256(text.encode("utf-8")).digest())
            fh.write(np.asarray(vec, dtype="<f4").tobytes())


class VectorFileProvider:
    """Serves embeddings from a precomputed vector file; refuses unknown texts."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._vectors: dict[bytes, np.ndarray] = {}
        with self.path.open("rb") as fh:
            (header_len,) = struct.unpack("<I", fh.read(_VECFILE_MAGIC_LEN))
            header = json.loads(fh.read(header_len).decode("utf-8"))
            self.model_id: str = header["model_id"]
            self.dim: int = int(header["dim"])
            record = 32 + 4 * self.dim
            for _ in range(int(header["count"])):
                blob = fh.read(record)
                if len(blob) != record:
                    raise ProviderUnavailableError(
                        f"truncated vector file: {self.path}"
                    )
                key = blob[:32]
                vec = np.frombuffer(blob[32:], dtype="<f4").astype(np.float64)
                self._vectors[key] = vec

    def embed(self, model_id: str, texts: Sequence[str]) -> list[np.ndarray]:
        if model_id != self.model_id:
            raise ProviderUnavailableError(
                f"vector file holds {self.model_id!r}, not {model_id!r}"
            )
        out: list[np.ndarray] = []
        for text in texts:
            key = hashlib.sha256(text.encode("utf-8")).digest()
            if key not in self._vectors:
                raise ProviderUnavailableError(
                    f"text not present in vector file: {text[:60]!r}"
                )
            out.append(self._vectors[key])
        return out


class EmbeddingCache:
    """Directory cache: one float64 .vec file per (model, text hash).

    Vectors are stored at full float64 precision so a cache hit is
    byte-identical to the freshly computed vector it replays.
    """

    def __init__(self, root: str | Path | None = None):
        root = root or os.environ.get(CACHE_DIR_ENV) or ".harmony_cache"
        self.root = Path(root)

    def _model_dir(self, model_id: str) -> Path:
        safe = model_id.replace("/", "__")
        return self.root / safe

    def get(self, model_id: str, key: str) -> np.ndarray | None:
        path = self._model_dir(model_id) / f"{key}.vec"
        if not path.exists():
            return None
        return np.frombuffer(path.read_bytes(), dtype="<f8").copy()

    def put(self, model_id: str, key: str, vec: np.ndarray) -> None:
        model_dir = self._model_dir(model_id)
        model_dir.mkdir(parents=True, exist_ok=True)
        meta = model_dir / "meta.json"
        if not meta.exists():
            meta.write_text(
                json.dumps({"model_id": model_id, "dim": int(vec.shape[0])}),
                encoding="utf-8",
            )
        final = model_dir / f"{key}.vec"
        tmp = model_dir / f"{key}.vec.tmp.{os.getpid()}"
        tmp.write_bytes(np.asarray(vec, dtype="<f8").tobytes())
        os.replace(tmp, final)


@dataclass
class EmbeddingEngine:
    """Cache-first batch embedding over one provider."""

    provider: EmbeddingProvider
    cache: EmbeddingCache | None = None
    batch_size: int = DEFAULT_BATCH_SIZE
    provider_calls: int = field(default=0, init=False)

    def embed_batch(self, texts: Sequence[str], model_id: str) -> list[EmbeddingVector]:
        """Resolve texts to vectors, fetching only cache misses.

        Output order matches input order. Repeated texts inside one call are
        fetched once. Fetched vectors are persisted before returning.
        """
        if not texts:
            raise ValueError("texts must be non-empty")
        keys = [text_key(t) for t in texts]
        resolved: dict[str, np.ndarray] = {}
        if self.cache is not None:
            for key in keys:
                if key in resolved:
                    continue
                hit = self.cache.get(model_id, key)
                if hit is not None:
                    resolved[key] = hit

        missing_keys: list[str] = []
        missing_texts: list[str] = []
        queued: set[str] = set()
        for key, text in zip(keys, texts):
            if key not in resolved and key not in queued:
                queued.add(key)
                missing_keys.append(key)
                missing_texts.append(text)

        for start in range(0, len(missing_texts), self.batch_size):
            chunk = missing_texts[start : start + self.batch_size]
            chunk_keys = missing_keys[start : start + self.batch_size]
            vectors = self.provider.embed(model_id, chunk)
            self.provider_calls += 1
            if len(vectors) != len(chunk):
                raise ProviderUnavailableError(
                    f"provider returned {len(vectors)} vectors for {len(chunk)} texts"
                )
            for key, vec in zip(chunk_keys, vectors):
                vec = np.asarray(vec, dtype=np.float64)
                if self.cache is not None:
                    self.cache.put(model_id, key, vec)
                resolved[key] = vec

        dims = {v.shape[0] for v in resolved.values()}
        if len(dims) != 1:
            raise DimMismatchError(f"provider returned mixed dims: {sorted(dims)}")
        dim = dims.pop()
        return [
            EmbeddingVector(values=resolved[key], dim=dim, model_id=model_id)
            for key in keys
        ]
