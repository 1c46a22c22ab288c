"""Exception types shared across the engine."""

from __future__ import annotations


class HarmonyError(Exception):
    """Base class for all engine errors."""


class ParseError(HarmonyError):
    """A data dictionary or long sheet failed to parse."""


class DuplicateNameError(ParseError):
    def __init__(self, name: str):
        super().__init__(f"duplicate variable name: {name!r}")
        self.name = name


class MissingColumnError(ParseError):
    def __init__(self, column: str):
        super().__init__(f"missing required column: {column!r}")
        self.column = column


class EmptyInputError(ParseError):
    def __init__(self, what: str = "input"):
        super().__init__(f"empty {what}: at least one data row is required")


class EmptyLabelError(ParseError):
    def __init__(self, row_index: int):
        super().__init__(f"empty variable label at data row {row_index}")
        self.row_index = row_index


class EmptyNameError(ParseError):
    def __init__(self, row_index: int):
        super().__init__(f"empty variable name at data row {row_index}")
        self.row_index = row_index


class DuplicateKeyError(ParseError):
    def __init__(self, key: str):
        super().__init__(f"duplicate reshape key: {key!r}")
        self.key = key


class EmptyKeyError(ParseError):
    def __init__(self, row_index: int):
        super().__init__(f"empty reshape key at data row {row_index}")
        self.row_index = row_index


class TemplateMissingPlaceholderError(ParseError):
    def __init__(self, template: str):
        super().__init__(
            f"template must contain '{{key}}' exactly once: {template!r}"
        )
        self.template = template


class ProviderUnavailableError(HarmonyError):
    """An embedding or keyword provider could not be reached."""

    def __init__(self, detail: str):
        super().__init__(f"provider unavailable: {detail}")
        self.detail = detail


class DimMismatchError(HarmonyError):
    """Vectors of inconsistent dimension were supplied or returned."""


class NormalizationError(HarmonyError):
    """A provider returned a vector that is not unit-normalized."""


class UnknownSourceError(HarmonyError):
    def __init__(self, name: str):
        super().__init__(f"unknown source variable: {name!r}")
        self.name = name


class UnknownVariableError(HarmonyError):
    def __init__(self, name: str):
        super().__init__(f"unknown variable: {name!r}")
        self.name = name


class SingleClassDataError(HarmonyError):
    """Training data contains only one class."""


class SchemaMismatchError(HarmonyError):
    """Feature vector does not match the model's feature schema."""


class EmptyGridError(HarmonyError):
    """Grid search was given no candidate configurations."""


class TooFewSourcesError(HarmonyError):
    def __init__(self, n_sources: int, k: int):
        super().__init__(
            f"{n_sources} distinct source variables cannot fill {k} folds"
        )
        self.n_sources = n_sources
        self.k = k


class GoldMissingError(HarmonyError):
    def __init__(self, source: str):
        super().__init__(f"no gold target present in ranked list for {source!r}")
        self.source = source


class LengthMismatchError(HarmonyError):
    """Paired samples have different lengths."""


class InsufficientLabelsError(HarmonyError):
    """Not enough accepted labels to retrain a model."""


class MalformedVerdictError(HarmonyError):
    def __init__(self, verdict: str):
        super().__init__(f"verdict must be 'accept' or 'reject', got {verdict!r}")
        self.verdict = verdict
