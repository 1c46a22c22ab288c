"""Deterministic synthetic corpora for tests, demos, and benchmarks.

Builds a target dictionary of unique composite labels, then derives source
variables by paraphrasing a sampled subset: each content token is replaced
with a distractor word at the configured noise rate. At noise 0 the source
texts equal the target texts exactly, so every matcher must rank the gold
target first. Independent signal lives in three places (label wording,
shared sheet naming, derivation-rule keywords) so ensemble features have
room to beat any single-text method.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .features import GoldPairs
from .ingest import DataDictionary, Side, VariableRecord

_QUALIFIERS = (
    "systolic", "diastolic", "baseline", "followup", "fasting", "resting",
    "peak", "mean", "daily", "weekly", "monthly", "annual", "left", "right",
    "upper", "lower", "total", "partial", "primary", "secondary",
)

_MEASURES = (
    "blood pressure", "heart rate", "glucose level", "cholesterol ratio",
    "body weight", "standing height", "skin temperature", "oxygen saturation",
    "respiration rate", "hemoglobin value", "creatinine level", "sodium level",
    "potassium level", "albumin value", "bilirubin value", "platelet count",
    "white cell count", "red cell count", "urea nitrogen", "triglyceride level",
)

_CONTEXTS = (
    "at screening visit", "at baseline visit", "during treatment phase",
    "after discharge day", "on admission day", "in emergency unit",
    "during followup period", "at final visit", "before surgery date",
    "after surgery date", "at month three", "at month six", "at week two",
    "at year one", "in morning sample",
)

_SHEETS = (
    "Vitals", "Demographics", "Laboratory Chemistry", "Laboratory Hematology",
    "Cardiac Function", "Renal Function", "Hepatic Function", "Oncology Staging",
    "Medication History", "Adverse Events", "Quality of Life", "Imaging Summary",
)

# Sources describe the same sheets with different house wording.
_SHEET_ALIASES = {
    "Vitals": "Vital Signs Panel",
    "Demographics": "Subject Demographics",
    "Laboratory Chemistry": "Chemistry Lab Results",
    "Laboratory Hematology": "Hematology Lab Results",
    "Cardiac Function": "Cardiac Assessment",
    "Renal Function": "Kidney Assessment",
    "Hepatic Function": "Liver Assessment",
    "Oncology Staging": "Tumor Staging",
    "Medication History": "Concomitant Medications",
    "Adverse Events": "Safety Events",
    "Quality of Life": "Patient Reported Outcomes",
    "Imaging Summary": "Radiology Summary",
}

_DISTRACTORS = (
    "aux", "misc", "flag", "code", "item", "entry", "extra", "alt", "raw",
    "adj", "tmp", "spare", "proxy", "shadow", "dummy", "filler",
)

_RULE_VERBS = ("Derived", "Computed", "Imputed", "Copied")


@dataclass(frozen=True)
class SyntheticConfig:
    n_targets: int = 300
    n_sources: int = 60
    noise: float = 0.35
    seed: int = 0
    long_rule_every: int = 4

    def __post_init__(self) -> None:
        if self.n_targets < self.n_sources:
            raise ValueError("need at least as many targets as sources")
        if not 0.0 <= self.noise <= 1.0:
            raise ValueError("noise must be in [0, 1]")


def _target_label(i: int) -> str:
    q = _QUALIFIERS[i % len(_QUALIFIERS)]
    m = _MEASURES[(i // len(_QUALIFIERS)) % len(_MEASURES)]
    c = _CONTEXTS[(i * 7 + i // 400) % len(_CONTEXTS)]
    return f"{q} {m} measured {c}"


def _rule_for(label: str, index: int, long_rule_every: int) -> str:
    if index % 3 == 2:
        return ""
    if long_rule_every > 0 and index % long_rule_every == 1:
        filler = " ".join(
            f"step {k} applies window correction factor" for k in range(1, 5)
        )
        return (
            f"{_RULE_VERBS[index % len(_RULE_VERBS)]} from {label} "
            f"with visit alignment then {filler} before final rounding"
        )
    return f"{_RULE_VERBS[index % len(_RULE_VERBS)]} from {label} with visit alignment"


def _paraphrase(label: str, noise: float, rng: np.random.Generator) -> str:
    tokens = label.split()
    out = []
    for tok in tokens:
        if noise > 0.0 and rng.random() < noise:
            out.append(_DISTRACTORS[int(rng.integers(0, len(_DISTRACTORS)))])
        else:
            out.append(tok)
    return " ".join(out)


def synthetic_corpus(
    config: SyntheticConfig,
) -> tuple[DataDictionary, DataDictionary, GoldPairs]:
    """Build (source dictionary, target dictionary, gold pairs)."""
    rng = np.random.default_rng(config.seed)

    target_records = []
    for i in range(config.n_targets):
        label = _target_label(i)
        sheet = _SHEETS[i % len(_SHEETS)]
        target_records.append(
            VariableRecord(
                name=f"TV{i:04d}",
                label=label,
                sheet_desc=sheet,
                derivation_rule=_rule_for(label, i, config.long_rule_every),
                side=Side.TARGET,
            )
        )
    targets = DataDictionary(
        side=Side.TARGET, records=tuple(target_records), provenance="synthetic"
    )

    picked = sorted(
        int(i) for i in rng.choice(config.n_targets, size=config.n_sources, replace=False)
    )
    source_records = []
    pairs = []
    for k, ti in enumerate(picked):
        tgt = target_records[ti]
        label = _paraphrase(tgt.label, config.noise, rng)
        rule = tgt.derivation_rule
        if rule and config.noise > 0.0:
            rule = _paraphrase(rule, config.noise / 2.0, rng)
        name = f"SV{k:04d}"
        source_records.append(
            VariableRecord(
                name=name,
                label=label,
                sheet_desc=_SHEET_ALIASES[tgt.sheet_desc] if config.noise > 0.0 else tgt.sheet_desc,
                derivation_rule=rule,
                side=Side.SOURCE,
            )
        )
        pairs.append((name, tgt.name))
    sources = DataDictionary(
        side=Side.SOURCE, records=tuple(source_records), provenance="synthetic"
    )
    return sources, targets, GoldPairs.from_pairs(pairs)
