"""Trial orchestration: splits, tuning, training, evaluation, and analyses.

One trial = seeded 4:1 source split, negative down-sampling, grid-searched
hyperparameters, a final forest, and ranked evaluation of the ensemble plus
four single-method baselines (each ranking by its own label-text similarity
alone). Repeated trials feed paired t-tests, permutation importance, and
group ablation.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .features import (
    FEATURE_GROUPS,
    FEATURE_NAMES,
    GoldPairs,
    PairFeaturizer,
    generate_test_pairs,
    generate_training_pairs,
    group_pairs_by_source,
    pairs_to_arrays,
)
from .forest import (
    ForestModel,
    ForestParams,
    default_grid,
    grid_search_cv,
    model_hash,
    predict_proba,
    save_model,
    train_forest,
)
from .ingest import DataDictionary
from .ranking import (
    HR_CUTOFFS,
    MetricReport,
    RankedList,
    assign_ranks,
    best_gold_ranks_from_scores,
    metric_report,
    rank_candidates,
)
from .stats import paired_t_test

BASELINE_METHODS = ("E5", "MPNet", "MiniLM", "Fuzzy")
IMPORTANCE_METRICS = ("HR-5", "HR-10", "MRR")


@dataclass(frozen=True)
class ExperimentConfig:
    n_trials: int = 50
    base_seed: int = 0
    negatives_per_source: int = 200
    cv_folds: int = 5
    grid: tuple[ForestParams, ...] = field(default_factory=lambda: tuple(default_grid()))
    hr_cutoffs: tuple[int, ...] = HR_CUTOFFS
    importance_metrics: tuple[str, ...] = IMPORTANCE_METRICS
    feature_groups: Mapping[str, tuple[str, ...]] = field(
        default_factory=lambda: dict(FEATURE_GROUPS)
    )

    @classmethod
    def from_dict(cls, d: Mapping) -> "ExperimentConfig":
        kwargs: dict = {}
        if "n_trials" in d:
            kwargs["n_trials"] = int(d["n_trials"])
        if "base_seed" in d:
            kwargs["base_seed"] = int(d["base_seed"])
        if "negatives_per_source" in d:
            kwargs["negatives_per_source"] = int(d["negatives_per_source"])
        if "cv_folds" in d:
            kwargs["cv_folds"] = int(d["cv_folds"])
        if "grid" in d:
            kwargs["grid"] = tuple(ForestParams.from_dict(g) for g in d["grid"])
        if "hr_cutoffs" in d:
            kwargs["hr_cutoffs"] = tuple(int(n) for n in d["hr_cutoffs"])
        if "metrics" in d:
            kwargs["importance_metrics"] = tuple(str(m) for m in d["metrics"])
        if "feature_groups" in d:
            kwargs["feature_groups"] = {
                name: tuple(cols) for name, cols in d["feature_groups"].items()
            }
        return cls(**kwargs)

    @classmethod
    def from_json(cls, path: str | Path) -> "ExperimentConfig":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TrialResult:
    trial_id: int
    seed: int
    train_sources: tuple[str, ...]
    test_sources: tuple[str, ...]
    tuned_params: ForestParams
    metrics_ensemble: MetricReport
    metrics_baselines: Mapping[str, MetricReport]
    model_hash: str
    model_path: str | None = None

    def to_dict(self) -> dict:
        return {
            "trial_id": self.trial_id,
            "seed": self.seed,
            "train_sources": list(self.train_sources),
            "test_sources": list(self.test_sources),
            "tuned_params": self.tuned_params.to_dict(),
            "metrics_ensemble": _metrics_to_dict(self.metrics_ensemble),
            "metrics_baselines": {
                m: _metrics_to_dict(r) for m, r in self.metrics_baselines.items()
            },
            "model_hash": self.model_hash,
            "model_path": self.model_path,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "TrialResult":
        return cls(
            trial_id=int(d["trial_id"]),
            seed=int(d["seed"]),
            train_sources=tuple(d["train_sources"]),
            test_sources=tuple(d["test_sources"]),
            tuned_params=ForestParams.from_dict(d["tuned_params"]),
            metrics_ensemble=_metrics_from_dict(d["metrics_ensemble"]),
            metrics_baselines={
                m: _metrics_from_dict(r) for m, r in d["metrics_baselines"].items()
            },
            model_hash=str(d["model_hash"]),
            model_path=d.get("model_path"),
        )


def _metrics_to_dict(report: MetricReport) -> dict:
    return {
        "hr": {str(n): v for n, v in sorted(report.hr.items())},
        "mrr": report.mrr,
        "per_source_rr": dict(sorted(report.per_source_rr.items())),
    }


def _metrics_from_dict(d: Mapping) -> MetricReport:
    return MetricReport(
        hr={int(n): float(v) for n, v in d["hr"].items()},
        mrr=float(d["mrr"]),
        per_source_rr={k: float(v) for k, v in d["per_source_rr"].items()},
    )


@dataclass(frozen=True)
class TrialOutput:
    """A trial's summary plus the in-memory artifacts downstream analyses need."""

    result: TrialResult
    model: ForestModel
    ranked: Mapping[str, RankedList]
    test_groups: Mapping[str, tuple[np.ndarray, np.ndarray]]


def _derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.blake2b(f"{seed}:{tag}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def split_sources(sources: Sequence[str], seed: int) -> tuple[list[str], list[str]]:
    """Seeded 4:1 split; the first fifth of the shuffle is the test set."""
    ordered = sorted(sources)
    rng = np.random.default_rng(_derive_seed(seed, "split"))
    shuffled = list(ordered)
    rng.shuffle(shuffled)
    n_test = len(ordered) // 5
    test = sorted(shuffled[:n_test])
    train = sorted(shuffled[n_test:])
    return train, test


def _mask_for(keep: Sequence[int] | None) -> list[int]:
    return list(range(len(FEATURE_NAMES))) if keep is None else list(keep)


def run_trial(
    featurizer: PairFeaturizer,
    gold: GoldPairs,
    targets: DataDictionary,
    config: ExperimentConfig,
    seed: int,
    trial_id: int = 0,
    keep_features: Sequence[int] | None = None,
    out_dir: str | Path | None = None,
) -> TrialOutput:
    """Run one full trial; optionally persist the model and ranked lists.

    keep_features restricts the model to a column subset (ablation); the
    split, sampled negatives, and baselines are unaffected by it.
    """
    all_sources = gold.sources()
    if len(all_sources) < 10:
        raise ValueError(f"need >= 10 gold sources, have {len(all_sources)}")
    train_sources, test_sources = split_sources(all_sources, seed)
    keep = _mask_for(keep_features)
    schema = tuple(FEATURE_NAMES[i] for i in keep)

    train_pairs = generate_training_pairs(
        gold,
        train_sources,
        targets,
        featurizer,
        negatives_per_source=config.negatives_per_source,
        seed=_derive_seed(seed, "negatives"),
    )
    groups = {
        s: (X[:, keep], y)
        for s, (X, y) in group_pairs_by_source(train_pairs).items()
    }
    tuned = grid_search_cv(
        groups,
        list(config.grid),
        schema,
        k=config.cv_folds,
        seed=_derive_seed(seed, "cv"),
    )
    X_train, y_train = pairs_to_arrays(train_pairs)
    model = train_forest(
        X_train[:, keep], y_train, tuned, _derive_seed(seed, "final"), schema
    )

    by_source = gold.by_source
    ranked: dict[str, RankedList] = {}
    baseline_lists: dict[str, dict[str, RankedList]] = {m: {} for m in BASELINE_METHODS}
    test_groups: dict[str, tuple[np.ndarray, np.ndarray]] = {}
    for source in test_sources:
        names, X_full = featurizer.feature_matrix(source)
        gold_targets = by_source[source]
        scores = predict_proba(model, X_full[:, keep])
        ranked[source] = rank_candidates(source, names, scores, gold_targets)
        gold_mask = np.asarray([t in gold_targets for t in names], dtype=np.int64)
        test_groups[source] = (X_full, gold_mask)
        for method, base_scores in featurizer.baseline_scores(source).items():
            baseline_lists[method][source] = rank_candidates(
                source, names, base_scores, gold_targets
            )

    metrics_ensemble = metric_report(list(ranked.values()), config.hr_cutoffs)
    metrics_baselines = {
        m: metric_report(list(lists.values()), config.hr_cutoffs)
        for m, lists in baseline_lists.items()
    }

    model_path: str | None = None
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        model_file = out / f"model_{trial_id:04d}.json"
        save_model(model, model_file)
        # Stored relative to the trial file so reruns in different
        # directories produce byte-identical reports.
        model_path = model_file.name
        _write_ranked_csv(out / f"ranked_{trial_id:04d}.csv", ranked)

    result = TrialResult(
        trial_id=trial_id,
        seed=seed,
        train_sources=tuple(train_sources),
        test_sources=tuple(test_sources),
        tuned_params=tuned,
        metrics_ensemble=metrics_ensemble,
        metrics_baselines=metrics_baselines,
        model_hash=model_hash(model),
        model_path=model_path,
    )
    return TrialOutput(
        result=result, model=model, ranked=ranked, test_groups=test_groups
    )


def _write_ranked_csv(path: Path, ranked: Mapping[str, RankedList]) -> None:
    import csv

    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["source", "rank", "target", "score", "gold"])
        for source in sorted(ranked):
            rl = ranked[source]
            for entry in rl.entries:
                writer.writerow(
                    [
                        source,
                        repr(entry.assigned_rank),
                        entry.target_name,
                        repr(entry.score),
                        int(entry.target_name in rl.gold_targets),
                    ]
                )


def run_trials(
    featurizer: PairFeaturizer,
    gold: GoldPairs,
    targets: DataDictionary,
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
    keep_features: Sequence[int] | None = None,
) -> list[TrialResult]:
    """Run config.n_trials trials with seeds base_seed + t; resumable.

    With out_dir set, each finished trial is written to trial_NNNN.json and
    re-runs skip trials whose files already exist.
    """
    if config.n_trials < 2:
        raise ValueError("n_trials must be >= 2")
    results: list[TrialResult] = []
    out = Path(out_dir) if out_dir is not None else None
    if out is not None:
        out.mkdir(parents=True, exist_ok=True)
    for t in range(config.n_trials):
        trial_file = out / f"trial_{t:04d}.json" if out is not None else None
        if trial_file is not None and trial_file.exists():
            results.append(
                TrialResult.from_dict(
                    json.loads(trial_file.read_text(encoding="utf-8"))
                )
            )
            continue
        output = run_trial(
            featurizer,
            gold,
            targets,
            config,
            seed=config.base_seed + t,
            trial_id=t,
            keep_features=keep_features,
            out_dir=out,
        )
        if trial_file is not None:
            tmp = trial_file.with_suffix(".json.tmp")
            tmp.write_text(
                json.dumps(output.result.to_dict(), sort_keys=True, indent=1),
                encoding="utf-8",
            )
            tmp.replace(trial_file)
        results.append(output.result)
    return results


@dataclass(frozen=True)
class ComparisonRow:
    metric: str
    mean_a: float
    mean_b: float
    sd_a: float
    sd_b: float
    mean_diff: float
    ci95: tuple[float, float]
    t_stat: float
    p_value: float

    def to_dict(self) -> dict:
        return {
            "metric": self.metric,
            "mean_a": self.mean_a,
            "mean_b": self.mean_b,
            "sd_a": self.sd_a,
            "sd_b": self.sd_b,
            "mean_diff": self.mean_diff,
            "ci95": list(self.ci95),
            "t_stat": self.t_stat,
            "p_value": self.p_value,
        }


def _mean_sd(xs: Sequence[float]) -> tuple[float, float]:
    n = len(xs)
    m = sum(xs) / n
    if n < 2:
        return m, 0.0
    var = sum((x - m) ** 2 for x in xs) / (n - 1)
    return m, math.sqrt(var)


def compare_series(metric: str, a: Sequence[float], b: Sequence[float]) -> ComparisonRow:
    """Paired comparison a vs b (positive mean_diff means a is higher)."""
    tt = paired_t_test(a, b)
    mean_a, sd_a = _mean_sd([float(x) for x in a])
    mean_b, sd_b = _mean_sd([float(x) for x in b])
    return ComparisonRow(
        metric=metric,
        mean_a=mean_a,
        mean_b=mean_b,
        sd_a=sd_a,
        sd_b=sd_b,
        mean_diff=tt.mean_diff,
        ci95=tt.ci95,
        t_stat=tt.t_stat,
        p_value=tt.p_value,
    )


def metric_series(
    results: Sequence[TrialResult], metric: str, method: str | None = None
) -> list[float]:
    """Extract one metric's per-trial series for the ensemble or a baseline."""
    out: list[float] = []
    for r in results:
        report = r.metrics_ensemble if method is None else r.metrics_baselines[method]
        out.append(_metric_value(report, metric))
    return out


def _metric_value(report: MetricReport, metric: str) -> float:
    if metric == "MRR":
        return report.mrr
    if metric.startswith("HR-"):
        return report.hr[int(metric[3:])]
    raise KeyError(metric)


def compare_to_baselines(
    results: Sequence[TrialResult], metrics: Sequence[str] = IMPORTANCE_METRICS
) -> dict[str, list[ComparisonRow]]:
    """Paired ensemble-vs-baseline comparison rows for each baseline method."""
    out: dict[str, list[ComparisonRow]] = {}
    for method in BASELINE_METHODS:
        rows = [
            compare_series(
                metric,
                metric_series(results, metric),
                metric_series(results, metric, method),
            )
            for metric in metrics
        ]
        out[method] = rows
    return out


def _scores_metrics(
    scores: np.ndarray,
    blocks: Sequence[tuple[slice, np.ndarray]],
    metrics: Sequence[str],
) -> dict[str, float]:
    best_ranks = [
        best_gold_ranks_from_scores(scores[sl], mask.astype(bool)) for sl, mask in blocks
    ]
    out: dict[str, float] = {}
    for metric in metrics:
        if metric == "MRR":
            out[metric] = float(np.mean([1.0 / r for r in best_ranks]))
        else:
            n = int(metric[3:])
            out[metric] = float(np.mean([1.0 if r <= n else 0.0 for r in best_ranks]))
    return out


def permutation_importance(
    model: ForestModel,
    test_groups: Mapping[str, tuple[np.ndarray, np.ndarray]],
    metrics: Sequence[str] = IMPORTANCE_METRICS,
    seed: int = 0,
    repeats: int = 1,
) -> list[dict]:
    """Per-feature decline in each metric when that column is shuffled.

    The shuffle is one global permutation across all test pairs (repeated
    `repeats` times and averaged); within-trial ranks use median-of-positions
    tie handling over the importance values.
    """
    sources = sorted(test_groups)
    blocks: list[tuple[slice, np.ndarray]] = []
    mats = []
    offset = 0
    for s in sources:
        X, gold_mask = test_groups[s]
        mats.append(X)
        blocks.append((slice(offset, offset + len(gold_mask)), gold_mask))
        offset += len(gold_mask)
    X_all = np.vstack(mats)
    # Ablated models see a column subset of the full matrix.
    keep = [FEATURE_NAMES.index(name) for name in model.schema]
    X_model = X_all[:, keep]

    baseline = _scores_metrics(
        np.asarray(predict_proba(model, X_model)), blocks, metrics
    )
    n = X_model.shape[0]
    rows: list[dict] = []
    importances: dict[str, list[float]] = {m: [] for m in metrics}
    for j, name in enumerate(model.schema):
        totals = {m: 0.0 for m in metrics}
        for r in range(repeats):
            rng = np.random.default_rng(_derive_seed(seed, f"perm:{name}:{r}"))
            perm = rng.permutation(n)
            X_perm = X_model.copy()
            X_perm[:, j] = X_model[perm, j]
            permuted = _scores_metrics(
                np.asarray(predict_proba(model, X_perm)), blocks, metrics
            )
            for m in metrics:
                totals[m] += baseline[m] - permuted[m]
        for m in metrics:
            importances[m].append(totals[m] / repeats)
        rows.append({"feature": name})
    for m in metrics:
        ranks = assign_ranks(importances[m])
        for j, row in enumerate(rows):
            row.setdefault("importance", {})
            row.setdefault("rank", {})
            row["importance"][m] = importances[m][j]
            row["rank"][m] = ranks[j]
    return rows


def aggregate_importance(per_trial_rows: Sequence[Sequence[dict]]) -> list[dict]:
    """Mean importance and mean within-trial rank per feature over trials."""
    if not per_trial_rows:
        raise ValueError("no importance rows")
    features = [row["feature"] for row in per_trial_rows[0]]
    metrics = list(per_trial_rows[0][0]["importance"])
    out: list[dict] = []
    for i, name in enumerate(features):
        entry: dict = {"feature": name, "mean_importance": {}, "mean_rank": {}}
        for m in metrics:
            entry["mean_importance"][m] = float(
                np.mean([rows[i]["importance"][m] for rows in per_trial_rows])
            )
            entry["mean_rank"][m] = float(
                np.mean([rows[i]["rank"][m] for rows in per_trial_rows])
            )
        out.append(entry)
    return out


def validate_feature_groups(groups: Mapping[str, Sequence[str]]) -> None:
    """Groups must exactly partition the feature schema."""
    seen: list[str] = []
    for cols in groups.values():
        seen.extend(cols)
    if sorted(seen) != sorted(FEATURE_NAMES):
        raise ValueError("feature groups must partition the schema exactly")


def ablation(
    featurizer: PairFeaturizer,
    gold: GoldPairs,
    targets: DataDictionary,
    config: ExperimentConfig,
    out_dir: str | Path | None = None,
) -> dict[str, list[ComparisonRow]]:
    """Mean full-minus-partial decline per dropped feature group.

    Each partial model is retuned and retrained on the remaining columns
    with the same per-trial seeds as the full model.
    """
    validate_feature_groups(config.feature_groups)
    out = Path(out_dir) if out_dir is not None else None
    full = run_trials(
        featurizer, gold, targets, config,
        out_dir=(out / "full") if out is not None else None,
    )
    report: dict[str, list[ComparisonRow]] = {}
    for group_name, cols in config.feature_groups.items():
        keep = [i for i, name in enumerate(FEATURE_NAMES) if name not in set(cols)]
        partial = run_trials(
            featurizer, gold, targets, config,
            out_dir=(out / f"drop_{group_name}") if out is not None else None,
            keep_features=keep,
        )
        rows = [
            compare_series(
                metric,
                metric_series(full, metric),
                metric_series(partial, metric),
            )
            for metric in config.importance_metrics
        ]
        report[group_name] = rows
    return report


def report_low_ranked(
    ranked: Mapping[str, RankedList],
    source_labels: Mapping[str, str],
    target_labels: Mapping[str, str],
    cutoff: int = 30,
) -> list[dict]:
    """Rows for every gold pair whose assigned rank fell below the cutoff."""
    rows: list[dict] = []
    for source in sorted(ranked):
        rl = ranked[source]
        top3 = [
            {"target": e.target_name, "score": e.score} for e in rl.entries[:3]
        ]
        for t in sorted(rl.gold_targets):
            rank = rl.rank_of(t)
            if rank > cutoff:
                rows.append(
                    {
                        "source": source,
                        "gold_target": t,
                        "assigned_rank": rank,
                        "source_label": source_labels.get(source, ""),
                        "target_label": target_labels.get(t, ""),
                        "top_competitors": top3,
                    }
                )
    return rows
