"""Variable matching engine for retrospective data harmonization.

Matches variables across two study data dictionaries by ranking candidate
target variables for each source variable, combining fuzzy lexical
similarity, embedding-based semantic similarity, and a Random Forest
ensemble, with a full evaluation harness and a curator review loop.
"""

from .embedding import (
    EmbeddingCache,
    EmbeddingEngine,
    EmbeddingVector,
    HashProvider,
    HttpProvider,
    VectorFileProvider,
    cosine,
    hash_embed,
)
from .errors import (
    HarmonyError,
    NormalizationError,
    ParseError,
    ProviderUnavailableError,
)
from .features import (
    DEFAULT_MODEL_IDS,
    FEATURE_GROUPS,
    FEATURE_NAMES,
    GoldPairs,
    PairFeaturizer,
    PairInstance,
    build_corpus_texts,
    build_variable_texts,
    generate_test_pairs,
    generate_training_pairs,
)
from .forest import (
    ForestModel,
    ForestParams,
    default_grid,
    grid_search_cv,
    load_model,
    model_hash,
    predict_proba,
    save_model,
    train_forest,
)
from .fuzzy import indel_ratio, levenshtein, token_set_ratio, token_sort_ratio
from .ingest import (
    ColumnMap,
    DataDictionary,
    ReshapeSpec,
    Side,
    VariableRecord,
    long_to_wide,
    parse_dictionary,
    read_dictionary_csv,
    write_dictionary_csv,
)
from .labels import LabelStore, MatchLabel
from .ranking import (
    HR_CUTOFFS,
    MetricReport,
    RankedList,
    assign_ranks,
    hit_ratio,
    metric_report,
    mrr,
    rank_candidates,
    reciprocal_rank,
)
from .stats import TTestResult, paired_t_test
from .textprep import (
    MatchTexts,
    build_match_texts,
    derive_keyword_text,
    normalize_for_fuzzy,
    word_count,
)

__version__ = "0.1.0"

__all__ = [
    "ColumnMap",
    "DataDictionary",
    "DEFAULT_MODEL_IDS",
    "EmbeddingCache",
    "EmbeddingEngine",
    "EmbeddingVector",
    "FEATURE_GROUPS",
    "FEATURE_NAMES",
    "ForestModel",
    "ForestParams",
    "GoldPairs",
    "HR_CUTOFFS",
    "HarmonyError",
    "HashProvider",
    "HttpProvider",
    "LabelStore",
    "MatchLabel",
    "MatchTexts",
    "MetricReport",
    "NormalizationError",
    "PairFeaturizer",
    "PairInstance",
    "ParseError",
    "ProviderUnavailableError",
    "RankedList",
    "ReshapeSpec",
    "Side",
    "TTestResult",
    "VariableRecord",
    "VectorFileProvider",
    "assign_ranks",
    "build_corpus_texts",
    "build_match_texts",
    "build_variable_texts",
    "cosine",
    "default_grid",
    "derive_keyword_text",
    "generate_test_pairs",
    "generate_training_pairs",
    "grid_search_cv",
    "hash_embed",
    "hit_ratio",
    "indel_ratio",
    "levenshtein",
    "load_model",
    "long_to_wide",
    "metric_report",
    "model_hash",
    "mrr",
    "normalize_for_fuzzy",
    "paired_t_test",
    "parse_dictionary",
    "predict_proba",
    "rank_candidates",
    "read_dictionary_csv",
    "reciprocal_rank",
    "save_model",
    "token_set_ratio",
    "token_sort_ratio",
    "train_forest",
    "word_count",
    "write_dictionary_csv",
]
