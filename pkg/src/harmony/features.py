"""Pair feature construction and training/test pair assembly.

Every candidate (source, target) pair gets an 18-slot vector: nine embedding
cosines (three models x three texts), three fuzzy scores, and six metadata
slots. Slot order is fixed; models are persisted against a hash of it.

Embedding similarities are clamped at 0 so all similarity slots live in
[0, 1]; tree splits are order-preserving above 0 and gold pairs sit in the
positive range, so the clamp cannot reorder plausible candidates.
"""

from __future__ import annotations

import csv
import hashlib
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Iterable, Mapping, Protocol, Sequence

import numpy as np

from .embedding import EmbeddingEngine
from .errors import UnknownSourceError, UnknownVariableError
from .fuzzy import token_set_ratio
from .ingest import DataDictionary, VariableRecord
from .textprep import (
    KeywordProvider,
    MatchTexts,
    TermFrequencyExtractor,
    build_match_texts,
    derive_keyword_text,
    normalize_for_fuzzy,
    word_count,
)

METHODS = ("E5", "MPNet", "MiniLM")
TEXT_KINDS = ("label", "sheet", "label_key")

FEATURE_NAMES: tuple[str, ...] = (
    "E5_on_label",
    "E5_on_sheet",
    "E5_on_label_key",
    "MPNet_on_label",
    "MPNet_on_sheet",
    "MPNet_on_label_key",
    "MiniLM_on_label",
    "MiniLM_on_sheet",
    "MiniLM_on_label_key",
    "Fuzzy_on_label",
    "Fuzzy_on_sheet",
    "Fuzzy_on_label_key",
    "Label_len_EU",
    "Label_len_JP",
    "Derive_info_len_EU",
    "Derive_info_len_JP",
    "Derive_info_null_EU",
    "Derive_info_null_JP",
)

N_FEATURES = len(FEATURE_NAMES)

# Default sidecar model ids per method slot.
DEFAULT_MODEL_IDS: Mapping[str, str] = {
    "E5": "e5-large-v2",
    "MPNet": "mpnet-base-all",
    "MiniLM": "minilm-l12-all",
}

FEATURE_GROUPS: Mapping[str, tuple[str, ...]] = {
    "LLM": FEATURE_NAMES[0:9],
    "Fuzzy": FEATURE_NAMES[9:12],
    "Other": FEATURE_NAMES[12:18],
}


@dataclass(frozen=True)
class VariableTexts:
    """Precomputed comparison texts and metadata for one variable."""

    name: str
    texts: MatchTexts
    fuzzy_tokens: Mapping[str, tuple[str, ...]]
    label_words: int
    rule_words: int
    rule_null: int

    def text_for(self, kind: str) -> str:
        if kind == "label":
            return self.texts.label_text
        if kind == "sheet":
            return self.texts.sheet_text
        if kind == "label_key":
            return self.texts.label_key_text
        raise KeyError(kind)


def build_variable_texts(
    rec: VariableRecord, extractor: KeywordProvider | None = None
) -> VariableTexts:
    extractor = extractor if extractor is not None else TermFrequencyExtractor()
    keyword_text = derive_keyword_text(rec.derivation_rule, extractor)
    texts = build_match_texts(rec, keyword_text)
    tokens = {
        "label": tuple(normalize_for_fuzzy(texts.label_text)),
        "sheet": tuple(normalize_for_fuzzy(texts.sheet_text)),
        "label_key": tuple(normalize_for_fuzzy(texts.label_key_text)),
    }
    return VariableTexts(
        name=rec.name,
        texts=texts,
        fuzzy_tokens=tokens,
        label_words=word_count(rec.label),
        rule_words=word_count(rec.derivation_rule),
        rule_null=0 if rec.derivation_rule else 1,
    )


def build_corpus_texts(
    dictionary: DataDictionary, extractor: KeywordProvider | None = None
) -> dict[str, VariableTexts]:
    extractor = extractor if extractor is not None else TermFrequencyExtractor()
    return {rec.name: build_variable_texts(rec, extractor) for rec in dictionary}


@dataclass(frozen=True)
class PairInstance:
    source_name: str
    target_name: str
    features: np.ndarray
    gold: int

    def __post_init__(self) -> None:
        if self.features.shape != (N_FEATURES,):
            raise ValueError(f"feature vector must have length {N_FEATURES}")
        if self.gold not in (0, 1):
            raise ValueError("gold must be 0 or 1")
        self.features.setflags(write=False)


@dataclass(frozen=True)
class GoldPairs:
    """Curated (source, target) matches; a source may map to several targets."""

    pairs: frozenset[tuple[str, str]]

    @property
    def by_source(self) -> dict[str, frozenset[str]]:
        out: dict[str, set[str]] = {}
        for s, t in self.pairs:
            out.setdefault(s, set()).add(t)
        return {s: frozenset(ts) for s, ts in out.items()}

    def sources(self) -> list[str]:
        return sorted({s for s, _ in self.pairs})

    def validate(self, sources: DataDictionary, targets: DataDictionary) -> None:
        for s, t in self.pairs:
            if s not in sources:
                raise UnknownVariableError(s)
            if t not in targets:
                raise UnknownVariableError(t)

    @classmethod
    def from_pairs(cls, pairs: Iterable[tuple[str, str]]) -> "GoldPairs":
        return cls(pairs=frozenset((s, t) for s, t in pairs))


def read_gold_csv(path: str | Path) -> GoldPairs:
    """Gold-pairs CSV with source_var and target_var columns."""
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        pairs = [(row["source_var"].strip(), row["target_var"].strip()) for row in reader]
    return GoldPairs.from_pairs(pairs)


def write_gold_csv(gold: GoldPairs, path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_var", "target_var"])
        for s, t in sorted(gold.pairs):
            writer.writerow([s, t])


class TargetCorpus(Protocol):
    """Name collection of candidate targets (a DataDictionary qualifies)."""

    def names(self) -> Sequence[str]: ...

    def __contains__(self, name: str) -> bool: ...


EmbedSim = Callable[[str, str, VariableTexts, VariableTexts], float]


def build_pair_features(
    src: VariableTexts, tgt: VariableTexts, embed_sim: EmbedSim
) -> np.ndarray:
    """Assemble one 18-slot vector in FEATURE_NAMES order.

    embed_sim(method, kind, src, tgt) supplies the raw cosine for the nine
    embedding slots; fuzzy and metadata slots are computed here.
    """
    vec = np.empty(N_FEATURES, dtype=np.float64)
    i = 0
    for method in METHODS:
        for kind in TEXT_KINDS:
            vec[i] = min(1.0, max(0.0, float(embed_sim(method, kind, src, tgt))))
            i += 1
    for kind in TEXT_KINDS:
        vec[i] = token_set_ratio(src.fuzzy_tokens[kind], tgt.fuzzy_tokens[kind]) / 100.0
        i += 1
    vec[12] = src.label_words
    vec[13] = tgt.label_words
    vec[14] = src.rule_words
    vec[15] = tgt.rule_words
    vec[16] = src.rule_null
    vec[17] = tgt.rule_null
    return vec


class Featurizer(Protocol):
    """Resolves a (source, target) name pair to its 18-feature vector."""

    def features(self, source_name: str, target_name: str) -> np.ndarray: ...


class PairFeaturizer:
    """Production featurizer: batched embeddings up front, fuzzy rows on demand.

    Cosines for unit vectors are plain dot products, so each (method, kind)
    slot collapses to one source x target matrix product. Fuzzy scores are
    computed per source row the first time that row is touched.
    """

    def __init__(
        self,
        sources: Mapping[str, VariableTexts],
        targets: Mapping[str, VariableTexts],
        engine: EmbeddingEngine,
        model_ids: Mapping[str, str] = DEFAULT_MODEL_IDS,
    ):
        self.sources = dict(sources)
        self.targets = dict(targets)
        self._src_names = sorted(self.sources)
        self._tgt_names = sorted(self.targets)
        self._src_index = {n: i for i, n in enumerate(self._src_names)}
        self._tgt_index = {n: i for i, n in enumerate(self._tgt_names)}
        self.model_ids = dict(model_ids)
        self._sim: dict[tuple[str, str], np.ndarray] = {}
        for method in METHODS:
            model_id = self.model_ids[method]
            for kind in TEXT_KINDS:
                src_texts = [self.sources[n].text_for(kind) for n in self._src_names]
                tgt_texts = [self.targets[n].text_for(kind) for n in self._tgt_names]
                src_vecs = engine.embed_batch(src_texts, model_id)
                tgt_vecs = engine.embed_batch(tgt_texts, model_id)
                S = np.vstack([v.values for v in src_vecs])
                T = np.vstack([v.values for v in tgt_vecs])
                # Unit-vector dots can drift past 1.0 by an ulp; the schema
                # requires similarity slots in [0, 1].
                self._sim[(method, kind)] = np.clip(S @ T.T, 0.0, 1.0)
        self._fuzzy_rows: dict[tuple[str, int], np.ndarray] = {}

    def _fuzzy_row(self, kind: str, src_i: int) -> np.ndarray:
        key = (kind, src_i)
        row = self._fuzzy_rows.get(key)
        if row is None:
            src_tokens = self.sources[self._src_names[src_i]].fuzzy_tokens[kind]
            row = np.fromiter(
                (
                    token_set_ratio(src_tokens, self.targets[t].fuzzy_tokens[kind]) / 100.0
                    for t in self._tgt_names
                ),
                dtype=np.float64,
                count=len(self._tgt_names),
            )
            self._fuzzy_rows[key] = row
        return row

    def features(self, source_name: str, target_name: str) -> np.ndarray:
        if source_name not in self._src_index:
            raise UnknownSourceError(source_name)
        if target_name not in self._tgt_index:
            raise UnknownVariableError(target_name)
        si = self._src_index[source_name]
        ti = self._tgt_index[target_name]
        src = self.sources[source_name]
        tgt = self.targets[target_name]
        vec = np.empty(N_FEATURES, dtype=np.float64)
        i = 0
        for method in METHODS:
            for kind in TEXT_KINDS:
                vec[i] = self._sim[(method, kind)][si, ti]
                i += 1
        for kind in TEXT_KINDS:
            vec[i] = self._fuzzy_row(kind, si)[ti]
            i += 1
        vec[12] = src.label_words
        vec[13] = tgt.label_words
        vec[14] = src.rule_words
        vec[15] = tgt.rule_words
        vec[16] = src.rule_null
        vec[17] = tgt.rule_null
        return vec

    def feature_matrix(self, source_name: str) -> tuple[list[str], np.ndarray]:
        """All-target feature block for one source, in sorted target order."""
        if source_name not in self._src_index:
            raise UnknownSourceError(source_name)
        si = self._src_index[source_name]
        src = self.sources[source_name]
        n_t = len(self._tgt_names)
        X = np.empty((n_t, N_FEATURES), dtype=np.float64)
        i = 0
        for method in METHODS:
            for kind in TEXT_KINDS:
                X[:, i] = self._sim[(method, kind)][si, :]
                i += 1
        for kind in TEXT_KINDS:
            X[:, i] = self._fuzzy_row(kind, si)
            i += 1
        X[:, 12] = src.label_words
        X[:, 13] = [self.targets[t].label_words for t in self._tgt_names]
        X[:, 14] = src.rule_words
        X[:, 15] = [self.targets[t].rule_words for t in self._tgt_names]
        X[:, 16] = src.rule_null
        X[:, 17] = [self.targets[t].rule_null for t in self._tgt_names]
        return list(self._tgt_names), X

    def baseline_scores(self, source_name: str) -> dict[str, np.ndarray]:
        """Label-text similarity per single method, for baseline rankings."""
        if source_name not in self._src_index:
            raise UnknownSourceError(source_name)
        si = self._src_index[source_name]
        out: dict[str, np.ndarray] = {
            method: self._sim[(method, "label")][si, :].copy() for method in METHODS
        }
        out["Fuzzy"] = self._fuzzy_row("label", si).copy()
        return out

    @property
    def target_names(self) -> list[str]:
        return list(self._tgt_names)


def _derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.blake2b(f"{seed}:{tag}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def sample_without_replacement(
    pool: Sequence[str], n: int, rng: np.random.Generator
) -> list[str]:
    """First n slots of a partial Fisher-Yates shuffle of pool."""
    arr = list(pool)
    limit = min(n, len(arr))
    for i in range(limit):
        j = i + int(rng.integers(0, len(arr) - i))
        arr[i], arr[j] = arr[j], arr[i]
    return arr[:limit]


def generate_training_pairs(
    gold: GoldPairs,
    train_sources: Iterable[str],
    targets: TargetCorpus,
    featurizer: Featurizer,
    negatives_per_source: int = 200,
    seed: int = 0,
) -> list[PairInstance]:
    """All gold pairs as positives plus sampled non-gold negatives per source.

    Negatives exclude every gold target of the source and are drawn without
    replacement, capped by the available pool. Per-source seeds are derived
    from (seed, source name) so output is order-independent and replayable.
    """
    if negatives_per_source < 1:
        raise ValueError("negatives_per_source must be >= 1")
    by_source = gold.by_source
    target_names = list(targets.names())
    out: list[PairInstance] = []
    for source in sorted(train_sources):
        if source not in by_source:
            raise UnknownSourceError(source)
        gold_targets = by_source[source]
        for t in sorted(gold_targets):
            if t not in targets:
                raise UnknownVariableError(t)
            out.append(
                PairInstance(source, t, featurizer.features(source, t), gold=1)
            )
        pool = [t for t in target_names if t not in gold_targets]
        rng = np.random.default_rng(_derive_seed(seed, source))
        for t in sample_without_replacement(pool, negatives_per_source, rng):
            out.append(
                PairInstance(source, t, featurizer.features(source, t), gold=0)
            )
    return out


def generate_test_pairs(
    gold: GoldPairs,
    test_sources: Iterable[str],
    targets: TargetCorpus,
    featurizer: Featurizer,
    train_sources: Iterable[str] | None = None,
) -> list[PairInstance]:
    """One instance per (test source, target) over the full target corpus."""
    test_set = set(test_sources)
    if train_sources is not None:
        overlap = test_set & set(train_sources)
        if overlap:
            raise ValueError(f"test sources overlap training sources: {sorted(overlap)}")
    by_source = gold.by_source
    out: list[PairInstance] = []
    for source in sorted(test_set):
        if source not in by_source:
            raise UnknownSourceError(source)
        gold_targets = by_source[source]
        for t in targets.names():
            out.append(
                PairInstance(
                    source, t, featurizer.features(source, t), gold=int(t in gold_targets)
                )
            )
    return out


def pairs_to_arrays(pairs: Sequence[PairInstance]) -> tuple[np.ndarray, np.ndarray]:
    X = np.vstack([p.features for p in pairs])
    y = np.asarray([p.gold for p in pairs], dtype=np.int64)
    return X, y


def group_pairs_by_source(
    pairs: Sequence[PairInstance],
) -> dict[str, tuple[np.ndarray, np.ndarray]]:
    grouped: dict[str, list[PairInstance]] = {}
    for p in pairs:
        grouped.setdefault(p.source_name, []).append(p)
    return {s: pairs_to_arrays(ps) for s, ps in grouped.items()}


def write_pairs_csv(pairs: Sequence[PairInstance], path: str | Path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source_name", "target_name", *FEATURE_NAMES, "gold"])
        for p in pairs:
            writer.writerow(
                [p.source_name, p.target_name]
                + [repr(float(v)) for v in p.features]
                + [p.gold]
            )


def read_pairs_csv(path: str | Path) -> list[PairInstance]:
    out: list[PairInstance] = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        for row in reader:
            features = np.asarray(
                [float(row[name]) for name in FEATURE_NAMES], dtype=np.float64
            )
            out.append(
                PairInstance(
                    source_name=row["source_name"],
                    target_name=row["target_name"],
                    features=features,
                    gold=int(row["gold"]),
                )
            )
    return out
