"""Command-line entry points.

Every command is a pure function of its inputs, flags, and seeds: output
files and stdout are byte-identical across reruns (sorted keys, repr
floats, no timestamps). Parse failures exit 1; provider failures exit 2.
"""

from __future__ import annotations

import csv
import io
import json
import sys
from pathlib import Path

import click
import numpy as np

import uvicorn

from .embedding import (
    EmbeddingCache,
    EmbeddingEngine,
    HashProvider,
    HttpProvider,
    VectorFileProvider,
)
from .errors import ParseError, ProviderUnavailableError
from .experiment import (
    ExperimentConfig,
    ablation,
    aggregate_importance,
    compare_to_baselines,
    metric_series,
    permutation_importance,
    report_low_ranked,
    run_trial,
    run_trials,
)
from .features import (
    DEFAULT_MODEL_IDS,
    FEATURE_NAMES,
    PairFeaturizer,
    build_corpus_texts,
    read_gold_csv,
)
from .features import generate_training_pairs, group_pairs_by_source, pairs_to_arrays
from .forest import (
    grid_search_cv,
    load_model,
    model_hash,
    predict_proba,
    save_model,
    train_forest,
)
from .ingest import (
    ColumnMap,
    ReshapeSpec,
    Side,
    long_to_wide,
    read_dictionary_csv,
    write_dictionary_csv,
)
from .labels import LabelStore
from .ranking import metric_report, rank_candidates
from .service import ServiceConfig, ServiceState, create_app


def _fail(message: str, code: int) -> None:
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _echo_json(payload) -> None:
    click.echo(json.dumps(payload, sort_keys=True, indent=1))


def _derive(seed: int, tag: str) -> int:
    import hashlib

    digest = hashlib.blake2b(f"{seed}:{tag}".encode(), digest_size=8).digest()
    return int.from_bytes(digest, "little")


@click.group()
@click.option("--seed", type=int, default=0, show_default=True, help="Base random seed.")
@click.option(
    "--config",
    "config_path",
    type=click.Path(exists=True, dir_okay=False),
    default=None,
    help="Experiment config JSON.",
)
@click.option(
    "--cache-dir",
    type=click.Path(file_okay=False),
    default=None,
    help="Embedding cache root.",
)
@click.pass_context
def main(ctx: click.Context, seed: int, config_path: str | None, cache_dir: str | None):
    """Variable matching: ingestion, features, ranking, experiments, service."""
    ctx.ensure_object(dict)
    ctx.obj["seed"] = seed
    ctx.obj["cache_dir"] = cache_dir
    ctx.obj["config"] = (
        ExperimentConfig.from_json(config_path)
        if config_path
        else ExperimentConfig()
    )


def provider_options(fn):
    fn = click.option(
        "--provider",
        type=click.Choice(["hash", "http", "file"]),
        default="hash",
        show_default=True,
        help="Embedding provider backend.",
    )(fn)
    fn = click.option("--endpoint", default=None, help="Sidecar URL (http provider).")(fn)
    fn = click.option(
        "--vectors",
        type=click.Path(exists=True, dir_okay=False),
        default=None,
        help="Precomputed vector file (file provider).",
    )(fn)
    fn = click.option(
        "--hash-dim", type=int, default=256, show_default=True,
        help="Vector size for the hash provider.",
    )(fn)
    return fn


def _build_engine(ctx_obj: dict, provider: str, endpoint: str | None,
                  vectors: str | None, hash_dim: int) -> EmbeddingEngine:
    cache = EmbeddingCache(ctx_obj.get("cache_dir"))
    if provider == "hash":
        return EmbeddingEngine(HashProvider(dim=hash_dim, seed=ctx_obj["seed"]), cache)
    if provider == "http":
        return EmbeddingEngine(HttpProvider(endpoint), cache)
    if vectors is None:
        _fail("--vectors is required with --provider file", 2)
    return EmbeddingEngine(VectorFileProvider(vectors), cache)


def _load_corpora(sources_path: str, targets_path: str):
    sources = read_dictionary_csv(sources_path, Side.SOURCE)
    targets = read_dictionary_csv(targets_path, Side.TARGET)
    return sources, targets


def _build_featurizer(ctx_obj, sources_path, targets_path, provider, endpoint,
                      vectors, hash_dim):
    sources, targets = _load_corpora(sources_path, targets_path)
    engine = _build_engine(ctx_obj, provider, endpoint, vectors, hash_dim)
    featurizer = PairFeaturizer(
        build_corpus_texts(sources), build_corpus_texts(targets), engine
    )
    return sources, targets, featurizer


@main.command()
@click.option("--dict", "dict_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--side", type=click.Choice(["source", "target"]), required=True)
@click.option("--col-name", default="name", show_default=True)
@click.option("--col-label", default="label", show_default=True)
@click.option("--col-sheet", default="sheet", show_default=True)
@click.option("--col-rule", default="rule", show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None,
              help="Canonical CSV output path (stdout when omitted).")
def ingest(dict_path, side, col_name, col_label, col_sheet, col_rule, out):
    """Normalize a dictionary CSV with arbitrary headers to canonical columns."""
    cmap = ColumnMap(name=col_name, label=col_label, sheet=col_sheet, rule=col_rule)
    try:
        dictionary = read_dictionary_csv(dict_path, Side(side), cmap)
    except ParseError as exc:
        _fail(str(exc), 1)
    if out:
        write_dictionary_csv(dictionary, out)
        _echo_json({"records": len(dictionary), "out": out})
    else:
        buf = io.StringIO()
        writer = csv.writer(buf)
        writer.writerow(["name", "label", "sheet", "rule"])
        for rec in dictionary:
            writer.writerow([rec.name, rec.label, rec.sheet_desc, rec.derivation_rule])
        click.echo(buf.getvalue(), nl=False)


@main.command()
@click.option("--long", "long_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--spec", "spec_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--side", type=click.Choice(["source", "target"]), required=True)
@click.option("--sheet-desc", default="", help="Sheet description inherited by all records.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
def reshape(long_path, spec_path, side, sheet_desc, out):
    """Pivot a long question/response sheet into wide variable records."""
    try:
        spec = ReshapeSpec.from_json(spec_path)
        with open(long_path, newline="", encoding="utf-8") as fh:
            rows = list(csv.DictReader(fh))
        records = long_to_wide(rows, spec, Side(side), sheet_desc)
    except ParseError as exc:
        _fail(str(exc), 1)
    buf = io.StringIO()
    writer = csv.writer(buf)
    writer.writerow(["name", "label", "sheet", "rule"])
    for rec in records:
        writer.writerow([rec.name, rec.label, rec.sheet_desc, rec.derivation_rule])
    if out:
        Path(out).write_text(buf.getvalue(), encoding="utf-8")
        _echo_json({"records": len(records), "out": out})
    else:
        click.echo(buf.getvalue(), nl=False)


@main.command("embed-cache")
@click.option("--dict", "dict_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--side", type=click.Choice(["source", "target"]), default="source",
              show_default=True)
@provider_options
@click.pass_context
def embed_cache(ctx, dict_path, side, provider, endpoint, vectors, hash_dim):
    """Warm the embedding cache for all comparison texts of a dictionary."""
    try:
        dictionary = read_dictionary_csv(dict_path, Side(side))
        texts_map = build_corpus_texts(dictionary)
        engine = _build_engine(ctx.obj, provider, endpoint, vectors, hash_dim)
        texts: list[str] = []
        for vt in texts_map.values():
            texts.extend(
                [vt.texts.label_text, vt.texts.sheet_text, vt.texts.label_key_text]
            )
        counts = {}
        for model_id in sorted(DEFAULT_MODEL_IDS.values()):
            engine.embed_batch(texts, model_id)
            counts[model_id] = len(set(texts))
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    _echo_json({"cached_texts": counts, "provider_calls": engine.provider_calls})


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None,
              help="Trained model JSON; similarity-mean heuristic when omitted.")
@click.option("--top", type=int, default=5, show_default=True)
@click.option("--explain", is_flag=True, help="Append the 18 feature columns.")
@click.option("--out", type=click.Path(dir_okay=False), default=None)
@provider_options
@click.pass_context
def match(ctx, sources_path, targets_path, model_path, top, explain, out,
          provider, endpoint, vectors, hash_dim):
    """Rank candidate targets for every source variable."""
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        model = load_model(model_path) if model_path else None
        buf = io.StringIO()
        writer = csv.writer(buf)
        header = ["source", "rank", "target", "score"]
        if explain:
            header += list(FEATURE_NAMES)
        writer.writerow(header)
        for rec in sources:
            names, X = featurizer.feature_matrix(rec.name)
            if model is None:
                scores = X[:, :12].mean(axis=1)
            else:
                keep = [FEATURE_NAMES.index(n) for n in model.schema]
                scores = np.asarray(predict_proba(model, X[:, keep]))
            ranked = rank_candidates(rec.name, names, scores, frozenset())
            idx = {n: i for i, n in enumerate(names)}
            for entry in ranked.entries[:top]:
                row = [rec.name, repr(entry.assigned_rank), entry.target_name,
                       repr(entry.score)]
                if explain:
                    row += [repr(float(v)) for v in X[idx[entry.target_name]]]
                writer.writerow(row)
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    if out:
        Path(out).write_text(buf.getvalue(), encoding="utf-8")
        _echo_json({"out": out, "sources": len(sources), "top": top})
    else:
        click.echo(buf.getvalue(), nl=False)


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--out-model", required=True, type=click.Path(dir_okay=False))
@click.option("--negatives", type=int, default=None, help="Negatives per source.")
@provider_options
@click.pass_context
def train(ctx, sources_path, targets_path, gold_path, out_model, negatives,
          provider, endpoint, vectors, hash_dim):
    """Grid-search and train a final model on every gold source."""
    config: ExperimentConfig = ctx.obj["config"]
    negatives = negatives if negatives is not None else config.negatives_per_source
    seed = ctx.obj["seed"]
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        gold = read_gold_csv(gold_path)
        gold.validate(sources, targets)
        pairs = generate_training_pairs(
            gold, gold.sources(), targets, featurizer,
            negatives_per_source=negatives, seed=_derive(seed, "negatives"),
        )
        groups = group_pairs_by_source(pairs)
        tuned = grid_search_cv(
            groups, list(config.grid), FEATURE_NAMES,
            k=config.cv_folds, seed=_derive(seed, "cv"),
        )
        X, y = pairs_to_arrays(pairs)
        model = train_forest(X, y, tuned, _derive(seed, "final"), FEATURE_NAMES)
        save_model(model, out_model)
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    _echo_json(
        {"model": out_model, "hash": model_hash(model), "params": tuned.to_dict()}
    )


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@provider_options
@click.pass_context
def evaluate(ctx, sources_path, targets_path, gold_path, model_path,
             provider, endpoint, vectors, hash_dim):
    """Rank every gold source with a trained model and report HR-n and MRR."""
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        gold = read_gold_csv(gold_path)
        gold.validate(sources, targets)
        model = load_model(model_path)
        keep = [FEATURE_NAMES.index(n) for n in model.schema]
        by_source = gold.by_source
        lists = []
        for source in gold.sources():
            names, X = featurizer.feature_matrix(source)
            scores = np.asarray(predict_proba(model, X[:, keep]))
            lists.append(rank_candidates(source, names, scores, by_source[source]))
        report = metric_report(lists)
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    _echo_json(
        {
            "hr": {str(n): v for n, v in sorted(report.hr.items())},
            "mrr": report.mrr,
            "per_source_rr": dict(sorted(report.per_source_rr.items())),
        }
    )


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_trials", type=int, default=None, help="Number of trials.")
@click.option("--negatives", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@provider_options
@click.pass_context
def trials(ctx, sources_path, targets_path, gold_path, n_trials, negatives, out_dir,
           provider, endpoint, vectors, hash_dim):
    """Run repeated trials and compare the ensemble against each baseline."""
    base = ctx.obj["config"]
    config = ExperimentConfig(
        n_trials=n_trials if n_trials is not None else base.n_trials,
        base_seed=ctx.obj["seed"],
        negatives_per_source=negatives if negatives is not None else base.negatives_per_source,
        cv_folds=base.cv_folds,
        grid=base.grid,
        hr_cutoffs=base.hr_cutoffs,
        importance_metrics=base.importance_metrics,
        feature_groups=base.feature_groups,
    )
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        gold = read_gold_csv(gold_path)
        gold.validate(sources, targets)
        results = run_trials(featurizer, gold, targets, config, out_dir=out_dir)
        comparisons = compare_to_baselines(results, config.importance_metrics)
        summary = {
            "n_trials": config.n_trials,
            "base_seed": config.base_seed,
            "ensemble": {
                m: {
                    "mean": float(np.mean(metric_series(results, m))),
                    "sd": float(np.std(metric_series(results, m), ddof=1)),
                }
                for m in config.importance_metrics
            },
            "baselines": {
                method: {
                    m: float(np.mean(metric_series(results, m, method)))
                    for m in config.importance_metrics
                }
                for method in sorted(results[0].metrics_baselines)
            },
            "comparisons": {
                method: [row.to_dict() for row in rows]
                for method, rows in comparisons.items()
            },
        }
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    if out_dir:
        summary_path = Path(out_dir) / "summary.json"
        summary_path.write_text(
            json.dumps(summary, sort_keys=True, indent=1), encoding="utf-8"
        )
    _echo_json(summary)


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_trials", type=int, default=None)
@click.option("--repeats", type=int, default=1, show_default=True)
@click.option("--out", type=click.Path(dir_okay=False), default=None, help="CSV output.")
@provider_options
@click.pass_context
def importance(ctx, sources_path, targets_path, gold_path, n_trials, repeats, out,
               provider, endpoint, vectors, hash_dim):
    """Permutation feature importance averaged over trials."""
    base = ctx.obj["config"]
    n = n_trials if n_trials is not None else base.n_trials
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        gold = read_gold_csv(gold_path)
        gold.validate(sources, targets)
        per_trial = []
        for t in range(n):
            output = run_trial(
                featurizer, gold, targets, base, seed=ctx.obj["seed"] + t, trial_id=t
            )
            per_trial.append(
                permutation_importance(
                    output.model,
                    output.test_groups,
                    metrics=base.importance_metrics,
                    seed=_derive(ctx.obj["seed"] + t, "importance"),
                    repeats=repeats,
                )
            )
        rows = aggregate_importance(per_trial)
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    if out:
        buf = io.StringIO()
        writer = csv.writer(buf)
        metrics = list(base.importance_metrics)
        writer.writerow(
            ["feature"]
            + [f"mean_importance_{m}" for m in metrics]
            + [f"mean_rank_{m}" for m in metrics]
        )
        for row in rows:
            writer.writerow(
                [row["feature"]]
                + [repr(row["mean_importance"][m]) for m in metrics]
                + [repr(row["mean_rank"][m]) for m in metrics]
            )
        Path(out).write_text(buf.getvalue(), encoding="utf-8")
    _echo_json({"n_trials": n, "repeats": repeats, "features": rows})


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--n", "n_trials", type=int, default=None)
@click.option("--out-dir", type=click.Path(file_okay=False), default=None)
@provider_options
@click.pass_context
def ablate(ctx, sources_path, targets_path, gold_path, n_trials, out_dir,
           provider, endpoint, vectors, hash_dim):
    """Drop each feature group, retune, retrain, and report the decline."""
    base = ctx.obj["config"]
    config = ExperimentConfig(
        n_trials=n_trials if n_trials is not None else base.n_trials,
        base_seed=ctx.obj["seed"],
        negatives_per_source=base.negatives_per_source,
        cv_folds=base.cv_folds,
        grid=base.grid,
        hr_cutoffs=base.hr_cutoffs,
        importance_metrics=base.importance_metrics,
        feature_groups=base.feature_groups,
    )
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        gold = read_gold_csv(gold_path)
        gold.validate(sources, targets)
        report = ablation(featurizer, gold, targets, config, out_dir=out_dir)
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    _echo_json(
        {
            group: [row.to_dict() for row in rows]
            for group, rows in report.items()
        }
    )


@main.command("errors")
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--gold", "gold_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--cutoff", type=int, default=30, show_default=True)
@provider_options
@click.pass_context
def errors_cmd(ctx, sources_path, targets_path, gold_path, model_path, cutoff,
               provider, endpoint, vectors, hash_dim):
    """List gold pairs the model ranked below the cutoff, with competitors."""
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        gold = read_gold_csv(gold_path)
        gold.validate(sources, targets)
        model = load_model(model_path)
        keep = [FEATURE_NAMES.index(n) for n in model.schema]
        by_source = gold.by_source
        ranked = {}
        for source in gold.sources():
            names, X = featurizer.feature_matrix(source)
            scores = np.asarray(predict_proba(model, X[:, keep]))
            ranked[source] = rank_candidates(source, names, scores, by_source[source])
        rows = report_low_ranked(
            ranked,
            {rec.name: rec.label for rec in sources},
            {rec.name: rec.label for rec in targets},
            cutoff=cutoff,
        )
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    _echo_json({"cutoff": cutoff, "rows": rows})


@main.command()
@click.option("--sources", "sources_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--targets", "targets_path", required=True, type=click.Path(exists=True, dir_okay=False))
@click.option("--model", "model_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--labels", "labels_path", type=click.Path(dir_okay=False), default="labels.jsonl",
              show_default=True)
@click.option("--metrics", "metrics_path", type=click.Path(exists=True, dir_okay=False), default=None)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--port", type=int, default=8400, show_default=True)
@click.option("--token", default=None, help="Static bearer token for /api routes.")
@click.option("--negatives", type=int, default=60, show_default=True)
@provider_options
@click.pass_context
def serve(ctx, sources_path, targets_path, model_path, labels_path, metrics_path,
          host, port, token, negatives, provider, endpoint, vectors, hash_dim):
    """Run the review HTTP service."""
    try:
        sources, targets, featurizer = _build_featurizer(
            ctx.obj, sources_path, targets_path, provider, endpoint, vectors, hash_dim
        )
        model = load_model(model_path) if model_path else None
        metrics = (
            json.loads(Path(metrics_path).read_text(encoding="utf-8"))
            if metrics_path
            else None
        )
    except ParseError as exc:
        _fail(str(exc), 1)
    except ProviderUnavailableError as exc:
        _fail(str(exc), 2)
    state = ServiceState(
        featurizer=featurizer,
        label_store=LabelStore(labels_path),
        config=ServiceConfig(
            negatives_per_source=negatives, seed=ctx.obj["seed"], token=token
        ),
        model=model,
        metrics=metrics,
    )
    uvicorn.run(create_app(state), host=host, port=port)


if __name__ == "__main__":
    main()
