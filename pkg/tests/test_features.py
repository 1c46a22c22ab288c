"""Feature schema, featurizer consistency, and training-pair assembly."""

import numpy as np
import pytest

from harmony.embedding import EmbeddingCache, EmbeddingEngine, HashProvider
from harmony.errors import UnknownSourceError, UnknownVariableError
from harmony.features import (
    FEATURE_GROUPS,
    FEATURE_NAMES,
    GoldPairs,
    N_FEATURES,
    PairFeaturizer,
    PairInstance,
    build_corpus_texts,
    build_pair_features,
    build_variable_texts,
    generate_test_pairs,
    generate_training_pairs,
    group_pairs_by_source,
    pairs_to_arrays,
    read_gold_csv,
    read_pairs_csv,
    sample_without_replacement,
    write_gold_csv,
    write_pairs_csv,
)
from harmony.fuzzy import token_set_ratio
from harmony.ingest import DataDictionary, Side, VariableRecord
from harmony.textprep import normalize_for_fuzzy


def test_feature_schema_is_frozen():
    assert FEATURE_NAMES == (
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
    assert N_FEATURES == 18


def test_feature_groups_partition_schema():
    assert set(FEATURE_GROUPS) == {"LLM", "Fuzzy", "Other"}
    assert len(FEATURE_GROUPS["LLM"]) == 9
    assert len(FEATURE_GROUPS["Fuzzy"]) == 3
    assert len(FEATURE_GROUPS["Other"]) == 6
    combined = [n for cols in FEATURE_GROUPS.values() for n in cols]
    assert sorted(combined) == sorted(FEATURE_NAMES)


def _dicts():
    src_recs = (
        VariableRecord("s1", "Systolic blood pressure", "Vital Signs",
                       "Copied from device export", Side.SOURCE),
        VariableRecord("s2", "Body weight", "Vital Signs", "", Side.SOURCE),
    )
    tgt_recs = (
        VariableRecord("t1", "Systolic blood pressure", "Vitals",
                       "Derived from cuff measure", Side.TARGET),
        VariableRecord("t2", "Diastolic blood pressure", "Vitals", "", Side.TARGET),
        VariableRecord("t3", "Tumor staging category", "Oncology", "", Side.TARGET),
        VariableRecord("t4", "Standing height", "Vitals", "", Side.TARGET),
    )
    sources = DataDictionary(side=Side.SOURCE, records=src_recs, provenance="")
    targets = DataDictionary(side=Side.TARGET, records=tgt_recs, provenance="")
    return sources, targets


def _featurizer(tmp_path, sources, targets):
    engine = EmbeddingEngine(HashProvider(dim=64, seed=0), EmbeddingCache(tmp_path))
    return PairFeaturizer(
        build_corpus_texts(sources), build_corpus_texts(targets), engine
    )


def test_pair_featurizer_matches_direct_computation(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    vec = fz.features("s1", "t1")
    assert vec.shape == (18,)

    # Similarity slots live in [0, 1]; identical labels give 1.0 everywhere
    # that compares label text.
    assert np.all(vec[:12] >= 0.0) and np.all(vec[:12] <= 1.0)
    assert vec[0] == pytest.approx(1.0, abs=1e-9)   # E5 on label
    assert vec[9] == pytest.approx(1.0, abs=1e-9)   # fuzzy on label

    # The fuzzy slots equal the token-set score of the normalized texts.
    src_tokens = normalize_for_fuzzy("Systolic blood pressure")
    tgt_tokens = normalize_for_fuzzy("Systolic blood pressure")
    assert vec[9] == token_set_ratio(src_tokens, tgt_tokens) / 100.0

    # Metadata slots: raw word counts and null flags, source then target.
    assert vec[12] == 3.0 and vec[13] == 3.0
    assert vec[14] == 4.0 and vec[15] == 4.0
    assert vec[16] == 0.0 and vec[17] == 0.0

    null_vec = fz.features("s2", "t2")
    assert null_vec[14] == 0.0 and null_vec[16] == 1.0
    assert null_vec[15] == 0.0 and null_vec[17] == 1.0


def test_feature_matrix_agrees_with_per_pair_features(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    names, X = fz.feature_matrix("s1")
    assert names == sorted(["t1", "t2", "t3", "t4"])
    assert X.shape == (4, 18)
    for i, t in enumerate(names):
        assert np.array_equal(X[i], fz.features("s1", t)), t


def test_featurizer_distinguishes_methods(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    vec = fz.features("s1", "t2")
    e5, mpnet, minilm = vec[0], vec[3], vec[6]
    # Same texts, different model spaces: scores must not all coincide.
    assert len({round(float(x), 12) for x in (e5, mpnet, minilm)}) > 1


def test_baseline_scores_are_label_only(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    base = fz.baseline_scores("s1")
    assert set(base) == {"E5", "MPNet", "MiniLM", "Fuzzy"}
    names, X = fz.feature_matrix("s1")
    assert np.array_equal(base["E5"], X[:, 0])
    assert np.array_equal(base["MPNet"], X[:, 3])
    assert np.array_equal(base["MiniLM"], X[:, 6])
    assert np.array_equal(base["Fuzzy"], X[:, 9])


def test_featurizer_unknown_names(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    with pytest.raises(UnknownSourceError):
        fz.features("nope", "t1")
    with pytest.raises(UnknownVariableError):
        fz.features("s1", "nope")
    with pytest.raises(UnknownSourceError):
        fz.feature_matrix("nope")


def test_build_pair_features_clamps_negative_cosines():
    rec = VariableRecord("a", "Alpha beta", "", "", Side.SOURCE)
    vt = build_variable_texts(rec)

    def negative_sim(method, kind, src, tgt):
        return -0.25

    vec = build_pair_features(vt, vt, negative_sim)
    assert np.all(vec[:9] == 0.0)
    assert vec[9] == 1.0  # fuzzy unaffected by the embedding stub


def test_pair_instance_validation():
    with pytest.raises(ValueError):
        PairInstance("s", "t", np.zeros(5), gold=1)
    with pytest.raises(ValueError):
        PairInstance("s", "t", np.zeros(18), gold=2)
    p = PairInstance("s", "t", np.zeros(18), gold=0)
    with pytest.raises(ValueError):
        p.features[0] = 1.0  # read-only


def test_sample_without_replacement_properties():
    rng = np.random.default_rng(0)
    pool = [f"t{i}" for i in range(50)]
    out = sample_without_replacement(pool, 20, rng)
    assert len(out) == 20
    assert len(set(out)) == 20
    assert set(out) <= set(pool)
    # Cap at pool size.
    out_all = sample_without_replacement(pool, 500, np.random.default_rng(0))
    assert sorted(out_all) == sorted(pool)
    # Same seed, same draw.
    again = sample_without_replacement(pool, 20, np.random.default_rng(0))
    assert sample_without_replacement(pool, 20, np.random.default_rng(0)) == again


def _gold_fixture():
    return GoldPairs.from_pairs([("s1", "t1"), ("s2", "t4")])


def test_generate_training_pairs_counts_and_exclusions(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    gold = _gold_fixture()
    pairs = generate_training_pairs(gold, ["s1", "s2"], targets, fz,
                                    negatives_per_source=2, seed=0)
    by_source = {}
    for p in pairs:
        by_source.setdefault(p.source_name, []).append(p)
    for s, plist in by_source.items():
        positives = [p for p in plist if p.gold == 1]
        negatives = [p for p in plist if p.gold == 0]
        assert len(positives) == 1
        assert len(negatives) == 2
        gold_targets = gold.by_source[s]
        assert all(p.target_name not in gold_targets for p in negatives)
        assert len({p.target_name for p in plist}) == len(plist)


def test_generate_training_pairs_negatives_capped_by_pool(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    gold = _gold_fixture()
    pairs = generate_training_pairs(gold, ["s1"], targets, fz,
                                    negatives_per_source=100, seed=0)
    # Pool is 3 non-gold targets.
    assert len([p for p in pairs if p.gold == 0]) == 3


def test_generate_training_pairs_per_source_draws_are_order_independent(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    gold = _gold_fixture()
    a = generate_training_pairs(gold, ["s1", "s2"], targets, fz, 2, seed=5)
    b = generate_training_pairs(gold, ["s2", "s1"], targets, fz, 2, seed=5)
    key = lambda p: (p.source_name, p.target_name, p.gold)
    assert sorted(map(key, a)) == sorted(map(key, b))


def test_generate_test_pairs_cover_full_corpus(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    gold = _gold_fixture()
    pairs = generate_test_pairs(gold, ["s1"], targets, fz)
    assert len(pairs) == 4
    assert sum(p.gold for p in pairs) == 1
    with pytest.raises(ValueError):
        generate_test_pairs(gold, ["s1"], targets, fz, train_sources=["s1"])


def test_pairs_to_arrays_and_grouping(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    gold = _gold_fixture()
    pairs = generate_test_pairs(gold, ["s1", "s2"], targets, fz)
    X, y = pairs_to_arrays(pairs)
    assert X.shape == (8, 18)
    assert y.sum() == 2
    groups = group_pairs_by_source(pairs)
    assert set(groups) == {"s1", "s2"}
    assert groups["s1"][0].shape == (4, 18)


def test_pairs_csv_round_trip(tmp_path):
    sources, targets = _dicts()
    fz = _featurizer(tmp_path, sources, targets)
    gold = _gold_fixture()
    pairs = generate_test_pairs(gold, ["s1"], targets, fz)
    path = tmp_path / "pairs.csv"
    write_pairs_csv(pairs, path)
    back = read_pairs_csv(path)
    assert len(back) == len(pairs)
    for p, q in zip(pairs, back):
        assert p.source_name == q.source_name
        assert p.target_name == q.target_name
        assert p.gold == q.gold
        assert np.array_equal(p.features, q.features)  # repr round-trips exactly


def test_gold_pairs_structure_and_csv(tmp_path):
    gold = GoldPairs.from_pairs([("s2", "t1"), ("s1", "t2"), ("s1", "t1")])
    assert gold.sources() == ["s1", "s2"]
    assert gold.by_source["s1"] == {"t1", "t2"}
    path = tmp_path / "gold.csv"
    write_gold_csv(gold, path)
    assert read_gold_csv(path).pairs == gold.pairs


def test_gold_pairs_validate_against_dictionaries():
    sources, targets = _dicts()
    GoldPairs.from_pairs([("s1", "t1")]).validate(sources, targets)
    with pytest.raises(Exception):
        GoldPairs.from_pairs([("zz", "t1")]).validate(sources, targets)
    with pytest.raises(Exception):
        GoldPairs.from_pairs([("s1", "zz")]).validate(sources, targets)
