"""Dictionary parsing, CSV round-trips, and long-to-wide reshaping."""

import pytest

from harmony.errors import (
    DuplicateKeyError,
    DuplicateNameError,
    EmptyInputError,
    EmptyLabelError,
    EmptyNameError,
    MissingColumnError,
)
from harmony.ingest import (
    ColumnMap,
    DataDictionary,
    ReshapeSpec,
    Side,
    VariableRecord,
    corpus_stats,
    long_to_wide,
    parse_dictionary,
    read_dictionary_csv,
    write_dictionary_csv,
)


def rows(*triples):
    return [
        {"name": n, "label": l, "sheet": s, "rule": r} for n, l, s, r in triples
    ]


def test_parse_dictionary_basic():
    d = parse_dictionary(
        rows(("v1", "Age", "Demo", ""), ("v2", "BMI", "Vitals", "w/h^2")),
        Side.SOURCE,
    )
    assert len(d) == 2
    assert d.get("v2").derivation_rule == "w/h^2"
    assert d.get("v1").side is Side.SOURCE
    assert "v1" in d and "zzz" not in d
    assert d.names() == ("v1", "v2")


def test_parse_dictionary_trims_whitespace_and_fills_missing_rule():
    d = parse_dictionary(
        [{"name": " v1 ", "label": " Age ", "sheet": None, "rule": None}],
        Side.TARGET,
    )
    rec = d.get("v1")
    assert rec.label == "Age"
    assert rec.sheet_desc == ""
    assert rec.derivation_rule == ""


def test_parse_dictionary_error_cases():
    with pytest.raises(EmptyInputError):
        parse_dictionary([], Side.SOURCE)
    with pytest.raises(MissingColumnError):
        parse_dictionary([{"name": "a", "label": "b"}], Side.SOURCE)
    with pytest.raises(EmptyNameError):
        parse_dictionary(rows(("", "Age", "", "")), Side.SOURCE)
    with pytest.raises(EmptyLabelError):
        parse_dictionary(rows(("v1", "", "", "")), Side.SOURCE)
    with pytest.raises(DuplicateNameError):
        parse_dictionary(
            rows(("v1", "Age", "", ""), ("v1", "Sex", "", "")), Side.SOURCE
        )


def test_custom_column_map():
    d = parse_dictionary(
        [{"var": "v1", "desc": "Age", "tab": "Demo", "calc": "copied"}],
        Side.SOURCE,
        ColumnMap(name="var", label="desc", sheet="tab", rule="calc"),
    )
    assert d.get("v1").sheet_desc == "Demo"


def test_csv_round_trip(tmp_path):
    d = parse_dictionary(
        rows(("v1", "Age, years", "Demo", ""), ("v2", 'He said "hi"', "", "x")),
        Side.TARGET,
    )
    path = tmp_path / "dict.csv"
    write_dictionary_csv(d, path)
    back = read_dictionary_csv(path, Side.TARGET)
    assert back.records == d.records


def test_duplicate_names_rejected_at_dictionary_construction():
    rec = VariableRecord("v1", "Age", "", "", Side.SOURCE)
    with pytest.raises(DuplicateNameError):
        DataDictionary(side=Side.SOURCE, records=(rec, rec), provenance="")


def test_variable_record_validation():
    with pytest.raises(ValueError):
        VariableRecord("", "Age", "", "", Side.SOURCE)
    with pytest.raises(ValueError):
        VariableRecord("v1", "", "", "", Side.SOURCE)


def test_reshape_spec_requires_placeholder():
    with pytest.raises(Exception):
        ReshapeSpec("qid", "resp", "VAR_", "Item {key}")
    spec = ReshapeSpec("qid", "resp", "VAR_{key}", "Item {key}")
    assert spec.name_template == "VAR_{key}"


def test_long_to_wide_basic():
    long_rows = [
        {"qid": "Q1", "resp": "daily"},
        {"qid": "Q2", "resp": "weekly"},
    ]
    spec = ReshapeSpec("qid", "resp", "VAR_{key}", "Survey item {key}")
    recs = long_to_wide(long_rows, spec, Side.SOURCE, "Lifestyle")
    assert [r.name for r in recs] == ["VAR_Q1", "VAR_Q2"]
    assert recs[0].label == "Survey item Q1"
    assert recs[0].sheet_desc == "Lifestyle"
    assert recs[0].side is Side.SOURCE


def test_long_to_wide_rejects_duplicate_and_empty_keys():
    spec = ReshapeSpec("qid", "resp", "V{key}", "I{key}")
    with pytest.raises(DuplicateKeyError):
        long_to_wide(
            [{"qid": "Q1", "resp": "a"}, {"qid": "Q1", "resp": "b"}],
            spec,
            Side.SOURCE,
            "",
        )
    with pytest.raises(Exception):
        long_to_wide([{"qid": " ", "resp": "a"}], spec, Side.SOURCE, "")


def test_long_to_wide_missing_key_column():
    spec = ReshapeSpec("qid", "resp", "V{key}", "I{key}")
    with pytest.raises(MissingColumnError):
        long_to_wide([{"question": "Q1"}], spec, Side.SOURCE, "")


def test_corpus_stats_means():
    d = parse_dictionary(
        rows(
            ("v1", "one two three", "s", ""),
            ("v2", "one", "a b", "x y z w"),
        ),
        Side.SOURCE,
    )
    st = corpus_stats(d)
    assert st.mean_label_words == 2.0
    assert st.mean_sheet_words == 1.5
    assert st.mean_rule_words == 2.0
    assert st.n_records == 2
    with pytest.raises(EmptyInputError):
        corpus_stats(DataDictionary(side=Side.SOURCE, records=(), provenance=""))
