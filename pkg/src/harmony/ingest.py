"""Data dictionary ingestion: CSV parsing, long-to-wide reshaping, corpus stats.

A dictionary row carries four text fields per variable: name, label, data
sheet description, and derivation rule. Input CSVs may use arbitrary header
names; a :class:`ColumnMap` binds them to the four fields. Parsing is
fail-fast: any row violating an invariant aborts the whole parse.
"""

from __future__ import annotations

import csv
import enum
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Iterator, Mapping, Sequence

from .errors import (
    DuplicateKeyError,
    DuplicateNameError,
    EmptyInputError,
    EmptyKeyError,
    EmptyLabelError,
    EmptyNameError,
    MissingColumnError,
    TemplateMissingPlaceholderError,
)
from .textprep import word_count


class Side(str, enum.Enum):
    """Which corpus a variable belongs to."""

    SOURCE = "source"
    TARGET = "target"


@dataclass(frozen=True)
class VariableRecord:
    """One data dictionary entry."""

    name: str
    label: str
    sheet_desc: str
    derivation_rule: str
    side: Side

    def __post_init__(self) -> None:
        if not self.name:
            raise ValueError("variable name must be non-empty")
        if not self.label:
            raise ValueError("variable label must be non-empty")
        if not isinstance(self.side, Side):
            object.__setattr__(self, "side", Side(self.side))

    @property
    def has_rule(self) -> bool:
        return bool(self.derivation_rule)


@dataclass(frozen=True)
class ColumnMap:
    """Binds input CSV header names to the four dictionary fields."""

    name: str = "name"
    label: str = "label"
    sheet: str = "sheet"
    rule: str = "rule"

    def required(self) -> tuple[str, str, str, str]:
        return (self.name, self.label, self.sheet, self.rule)


@dataclass(frozen=True)
class DataDictionary:
    """An ordered, duplicate-free collection of variable records for one side."""

    side: Side
    records: tuple[VariableRecord, ...]
    provenance: str = ""
    _by_name: Mapping[str, VariableRecord] = field(
        init=False, repr=False, compare=False, default_factory=dict
    )

    def __post_init__(self) -> None:
        by_name: dict[str, VariableRecord] = {}
        for rec in self.records:
            if rec.name in by_name:
                raise DuplicateNameError(rec.name)
            by_name[rec.name] = rec
        object.__setattr__(self, "_by_name", by_name)

    def __iter__(self) -> Iterator[VariableRecord]:
        return iter(self.records)

    def __len__(self) -> int:
        return len(self.records)

    def __contains__(self, name: str) -> bool:
        return name in self._by_name

    def get(self, name: str) -> VariableRecord:
        return self._by_name[name]

    def names(self) -> tuple[str, ...]:
        return tuple(rec.name for rec in self.records)


@dataclass(frozen=True)
class ReshapeSpec:
    """How to pivot a long question/response sheet into wide variables.

    ``key_variable`` names the column holding the question number and
    ``value_variable`` the column holding the response. Both templates must
    contain the ``{key}`` placeholder exactly once.
    """

    key_variable: str
    value_variable: str
    name_template: str
    label_template: str

    def __post_init__(self) -> None:
        for template in (self.name_template, self.label_template):
            if template.count("{key}") != 1:
                raise TemplateMissingPlaceholderError(template)

    @classmethod
    def from_json(cls, path: str | Path) -> "ReshapeSpec":
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            key_variable=raw["key_variable"],
            value_variable=raw["value_variable"],
            name_template=raw["name_template"],
            label_template=raw["label_template"],
        )


@dataclass(frozen=True)
class CorpusStats:
    """Mean word counts over one dictionary."""

    mean_label_words: float
    mean_sheet_words: float
    mean_rule_words: float
    n_records: int


def parse_dictionary(
    rows: Sequence[Mapping[str, str | None]],
    side: Side,
    column_map: ColumnMap = ColumnMap(),
    provenance: str = "",
) -> DataDictionary:
    """Parse header-mapped rows into a :class:`DataDictionary`.

    A missing derivation cell becomes the empty string; all fields are
    whitespace-trimmed. Raises on duplicate names, missing columns, empty
    labels, and empty input.
    """
    rows = list(rows)
    if not rows:
        raise EmptyInputError("dictionary")
    for column in column_map.required():
        if column not in rows[0]:
            raise MissingColumnError(column)

    records: list[VariableRecord] = []
    seen: set[str] = set()
    for i, row in enumerate(rows):
        name = (row.get(column_map.name) or "").strip()
        label = (row.get(column_map.label) or "").strip()
        sheet = (row.get(column_map.sheet) or "").strip()
        rule = (row.get(column_map.rule) or "").strip()
        if not name:
            raise EmptyNameError(i)
        if not label:
            raise EmptyLabelError(i)
        if name in seen:
            raise DuplicateNameError(name)
        seen.add(name)
        records.append(
            VariableRecord(
                name=name, label=label, sheet_desc=sheet, derivation_rule=rule, side=side
            )
        )
    return DataDictionary(side=side, records=tuple(records), provenance=provenance)


def read_dictionary_csv(
    path: str | Path,
    side: Side,
    column_map: ColumnMap = ColumnMap(),
) -> DataDictionary:
    """Read a UTF-8 dictionary CSV with a header row."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames is None:
            raise EmptyInputError("dictionary CSV")
        for column in column_map.required():
            if column not in reader.fieldnames:
                raise MissingColumnError(column)
        rows = list(reader)
    return parse_dictionary(
        rows, side, column_map, provenance=f"{path}#csv"
    )


def write_dictionary_csv(dictionary: DataDictionary, path: str | Path) -> None:
    """Serialize with canonical headers (name, label, sheet, rule)."""
    canonical = ColumnMap()
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(canonical.required())
        for rec in dictionary:
            writer.writerow([rec.name, rec.label, rec.sheet_desc, rec.derivation_rule])


def long_to_wide(
    rows: Iterable[Mapping[str, str | None]],
    spec: ReshapeSpec,
    side: Side,
    sheet_desc: str = "",
) -> tuple[VariableRecord, ...]:
    """Pivot long question/response rows into one record per distinct key.

    Each output record's name and label come from the spec's templates with
    the key substituted; the sheet description is inherited from the long
    sheet. Keys must be non-empty and unique within the sheet.
    """
    records: list[VariableRecord] = []
    seen: set[str] = set()
    for i, row in enumerate(rows):
        if spec.key_variable not in row:
            raise MissingColumnError(spec.key_variable)
        key = (row.get(spec.key_variable) or "").strip()
        if not key:
            raise EmptyKeyError(i)
        if key in seen:
            raise DuplicateKeyError(key)
        seen.add(key)
        records.append(
            VariableRecord(
                name=spec.name_template.replace("{key}", key),
                label=spec.label_template.replace("{key}", key),
                sheet_desc=sheet_desc,
                derivation_rule="",
                side=side,
            )
        )
    return tuple(records)


def corpus_stats(dictionary: DataDictionary) -> CorpusStats:
    """Mean label/sheet/rule word counts; empty rules count as 0 words."""
    if len(dictionary) == 0:
        raise EmptyInputError("dictionary")
    n = len(dictionary)
    return CorpusStats(
        mean_label_words=sum(word_count(r.label) for r in dictionary) / n,
        mean_sheet_words=sum(word_count(r.sheet_desc) for r in dictionary) / n,
        mean_rule_words=sum(word_count(r.derivation_rule) for r in dictionary) / n,
        n_records=n,
    )
