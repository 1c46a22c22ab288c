"""Binary-classification random forest, built from scratch.

Trees are grown on per-tree subsamples drawn WITHOUT replacement, with a
fresh random feature subset at every node. Nodes are stored as flat numpy
arrays so prediction descends all samples through a tree with vectorized
index hops instead of Python recursion. Probability output is the mean of
per-tree leaf positive fractions.

Hyperparameter tuning is 5-fold grid search where folds partition SOURCE
variables, never individual pairs, and the selection metric is the mean
reciprocal rank of each held-out source's own candidate list.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .errors import (
    EmptyGridError,
    SchemaMismatchError,
    SingleClassDataError,
    TooFewSourcesError,
)
from .ranking import best_gold_ranks_from_scores

Criterion = str  # "gini" | "entropy"
MaxFeatures = str  # "sqrt" | "log2" | "all"


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_depth: int | None = None
    criterion: Criterion = "gini"
    min_samples_split: int = 2
    max_features: MaxFeatures = "sqrt"
    subsample_fraction: float = 0.8

    def __post_init__(self) -> None:
        if self.n_trees < 1:
            raise ValueError("n_trees must be positive")
        if self.max_depth is not None and self.max_depth < 1:
            raise ValueError("max_depth must be positive or None")
        if self.criterion not in ("gini", "entropy"):
            raise ValueError(f"unknown criterion {self.criterion!r}")
        if self.min_samples_split < 2:
            raise ValueError("min_samples_split must be >= 2")
        if self.max_features not in ("sqrt", "log2", "all"):
            raise ValueError(f"unknown max_features {self.max_features!r}")
        if not 0.0 < self.subsample_fraction <= 1.0:
            raise ValueError("subsample_fraction must be in (0, 1]")

    def to_dict(self) -> dict:
        return {
            "n_trees": self.n_trees,
            "max_depth": self.max_depth,
            "criterion": self.criterion,
            "min_samples_split": self.min_samples_split,
            "max_features": self.max_features,
            "subsample_fraction": self.subsample_fraction,
        }

    @classmethod
    def from_dict(cls, d: Mapping) -> "ForestParams":
        return cls(
            n_trees=int(d.get("n_trees", 100)),
            max_depth=None if d.get("max_depth") is None else int(d["max_depth"]),
            criterion=str(d.get("criterion", "gini")),
            min_samples_split=int(d.get("min_samples_split", 2)),
            max_features=str(d.get("max_features", "sqrt")),
            subsample_fraction=float(d.get("subsample_fraction", 0.8)),
        )


def impurity(n_pos: int, n_neg: int, criterion: Criterion) -> float:
    """Node impurity from class counts. gini = 1 - p^2 - q^2; entropy in bits."""
    total = n_pos + n_neg
    if total < 1:
        raise ValueError("empty node")
    p = n_pos / total
    q = n_neg / total
    if criterion == "gini":
        return 1.0 - p * p - q * q
    if criterion == "entropy":
        h = 0.0
        if p > 0.0:
            h -= p * math.log2(p)
        if q > 0.0:
            h -= q * math.log2(q)
        return h
    raise ValueError(f"unknown criterion {criterion!r}")


def _impurity_vec(n_pos: np.ndarray, n_total: np.ndarray, criterion: Criterion) -> np.ndarray:
    # q must come from counts, not 1 - p: the subtraction loses an ulp on
    # thirds and breaks exact ties between symmetric splits, so tree shape
    # would depend on which implementation evaluated the candidate.
    p = n_pos / n_total
    q = (n_total - n_pos) / n_total
    if criterion == "gini":
        return 1.0 - p * p - q * q
    with np.errstate(divide="ignore", invalid="ignore"):
        hp = np.where(p > 0.0, -p * np.log2(np.where(p > 0.0, p, 1.0)), 0.0)
        hq = np.where(q > 0.0, -q * np.log2(np.where(q > 0.0, q, 1.0)), 0.0)
    return hp + hq


def best_split(
    X: np.ndarray,
    y: np.ndarray,
    feature_subset: Sequence[int],
    criterion: Criterion,
) -> tuple[int, float, float] | None:
    """Best (feature, threshold, impurity_decrease) over the given features.

    Candidate thresholds are midpoints between consecutive distinct sorted
    values. Ties break toward the lowest feature index, then the lowest
    threshold; both fall out of strict-> comparison over ascending scans.
    Returns None when no candidate yields a positive decrease.
    """
    n = len(y)
    total_pos = int(y.sum())
    parent_imp = impurity(total_pos, n - total_pos, criterion)
    best: tuple[float, int, float] | None = None
    for f in sorted(int(i) for i in feature_subset):
        vals = X[:, f]
        order = np.argsort(vals, kind="stable")
        sv = vals[order]
        sy = y[order]
        distinct = sv[:-1] != sv[1:]
        if not distinct.any():
            continue
        cut = np.nonzero(distinct)[0]
        n_left = cut + 1
        pos_left = np.cumsum(sy)[cut]
        n_right = n - n_left
        pos_right = total_pos - pos_left
        dec = (
            parent_imp
            - (n_left / n) * _impurity_vec(pos_left, n_left, criterion)
            - (n_right / n) * _impurity_vec(pos_right, n_right, criterion)
        )
        j = int(np.argmax(dec))
        best_dec = float(dec[j])
        if best_dec > (best[0] if best is not None else 0.0):
            lo = float(sv[cut[j]])
            hi = float(sv[cut[j] + 1])
            thr = (lo + hi) / 2.0
            # Midpoint of adjacent machine floats can round up to hi;
            # fall back to the left value so `<= thr` still sends it left.
            if thr >= hi:
                thr = lo
            best = (best_dec, f, thr)
    if best is None:
        return None
    return best[1], best[2], best[0]


@dataclass(frozen=True)
class Tree:
    """Flat-array tree: feature[i] == -1 marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    n_pos: np.ndarray
    n_neg: np.ndarray
    value: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        totals = self.n_pos + self.n_neg
        object.__setattr__(self, "value", self.n_pos / totals)
        for arr in (self.feature, self.threshold, self.left, self.right,
                    self.n_pos, self.n_neg, self.value):
            arr.setflags(write=False)

    def predict(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = np.nonzero(self.feature[node] >= 0)[0]
        while active.size:
            cur = node[active]
            feats = self.feature[cur]
            go_left = X[active, feats] <= self.threshold[cur]
            node[active] = np.where(go_left, self.left[cur], self.right[cur])
            active = active[self.feature[node[active]] >= 0]
        return self.value[node]


@dataclass(frozen=True)
class ForestModel:
    trees: tuple[Tree, ...]
    params: ForestParams
    schema: tuple[str, ...]
    seed: int

    def __post_init__(self) -> None:
        if len(self.trees) != self.params.n_trees:
            raise ValueError("tree count does not match params.n_trees")


def _feature_subset_size(n_features: int, mode: MaxFeatures) -> int:
    if mode == "all":
        return n_features
    if mode == "sqrt":
        return max(1, int(math.sqrt(n_features)))
    return max(1, int(math.log2(n_features)))


def _derive_seed(seed: int, tag: str) -> int:
    digest = hashlib.blake2b(f"{seed}:{tag}".encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def _grow_tree(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    rng: np.random.Generator,
) -> Tree:
    n_features = X.shape[1]
    m = _feature_subset_size(n_features, params.max_features)
    feature: list[int] = []
    threshold: list[float] = []
    left: list[int] = []
    right: list[int] = []
    n_pos: list[int] = []
    n_neg: list[int] = []

    def alloc() -> int:
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        n_pos.append(0)
        n_neg.append(0)
        return len(feature) - 1

    root = alloc()
    stack: list[tuple[int, np.ndarray, int]] = [(root, np.arange(len(y)), 0)]
    while stack:
        node_id, idx, depth = stack.pop()
        y_node = y[idx]
        pos = int(y_node.sum())
        neg = len(idx) - pos
        n_pos[node_id] = pos
        n_neg[node_id] = neg
        if pos == 0 or neg == 0:
            continue
        if len(idx) < params.min_samples_split:
            continue
        if params.max_depth is not None and depth >= params.max_depth:
            continue
        if m == n_features:
            subset: Sequence[int] = range(n_features)
        else:
            subset = sorted(rng.choice(n_features, size=m, replace=False).tolist())
        found = best_split(X[idx], y_node, subset, params.criterion)
        if found is None:
            continue
        f, thr, _ = found
        mask = X[idx, f] <= thr
        left_id = alloc()
        right_id = alloc()
        feature[node_id] = f
        threshold[node_id] = thr
        left[node_id] = left_id
        right[node_id] = right_id
        stack.append((right_id, idx[~mask], depth + 1))
        stack.append((left_id, idx[mask], depth + 1))
    return Tree(
        feature=np.asarray(feature, dtype=np.int64),
        threshold=np.asarray(threshold, dtype=np.float64),
        left=np.asarray(left, dtype=np.int64),
        right=np.asarray(right, dtype=np.int64),
        n_pos=np.asarray(n_pos, dtype=np.int64),
        n_neg=np.asarray(n_neg, dtype=np.int64),
    )


def train_forest(
    X: np.ndarray,
    y: np.ndarray,
    params: ForestParams,
    seed: int,
    schema: Sequence[str],
) -> ForestModel:
    """Grow params.n_trees trees on per-tree subsamples without replacement."""
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.shape[1] != len(schema):
        raise SchemaMismatchError(
            f"data has {X.shape[1]} features, schema has {len(schema)}"
        )
    if len(np.unique(y)) < 2:
        raise SingleClassDataError("training data contains a single class")
    if len(y) < params.min_samples_split:
        raise ValueError("fewer samples than min_samples_split")
    n = len(y)
    m = math.ceil(params.subsample_fraction * n)
    trees: list[Tree] = []
    for t in range(params.n_trees):
        rng = np.random.default_rng(_derive_seed(seed, f"tree:{t}"))
        if m == n:
            sample = np.arange(n)
        else:
            sample = rng.choice(n, size=m, replace=False)
        trees.append(_grow_tree(X[sample], y[sample], params, rng))
    return ForestModel(trees=tuple(trees), params=params, schema=tuple(schema), seed=seed)


def predict_proba(model: ForestModel, X: np.ndarray) -> np.ndarray | float:
    """Mean of per-tree leaf positive fractions; accepts one vector or a matrix."""
    X = np.asarray(X, dtype=np.float64)
    single = X.ndim == 1
    if single:
        X = X[None, :]
    if X.shape[1] != len(model.schema):
        raise SchemaMismatchError(
            f"feature count {X.shape[1]} does not match schema {len(model.schema)}"
        )
    acc = np.zeros(X.shape[0], dtype=np.float64)
    for tree in model.trees:
        acc += tree.predict(X)
    out = acc / len(model.trees)
    return float(out[0]) if single else out


def default_grid(subsample_fraction: float = 0.8) -> list[ForestParams]:
    """The stock tuning grid; config files may replace it wholesale."""
    grid: list[ForestParams] = []
    for n_trees in (100, 300):
        for max_depth in (None, 10, 20):
            for criterion in ("gini", "entropy"):
                for min_split in (2, 5, 10):
                    for max_features in ("sqrt", "log2"):
                        grid.append(
                            ForestParams(
                                n_trees=n_trees,
                                max_depth=max_depth,
                                criterion=criterion,
                                min_samples_split=min_split,
                                max_features=max_features,
                                subsample_fraction=subsample_fraction,
                            )
                        )
    return grid


def grid_search_cv(
    groups: Mapping[str, tuple[np.ndarray, np.ndarray]],
    grid: Sequence[ForestParams],
    schema: Sequence[str],
    k: int = 5,
    seed: int = 0,
) -> ForestParams:
    """Pick the grid config with the best mean fold MRR.

    `groups` maps each source variable to its own (features, gold) block.
    Folds partition sources so no source's pairs straddle train/validation.
    Per fold and config, a forest trained on the other folds ranks each
    held-out source's pairs; the fold score is the MRR over those sources.
    Exact score ties keep the earlier grid entry.
    """
    if not grid:
        raise EmptyGridError("grid search needs at least one configuration")
    names = sorted(groups)
    if len(names) < k:
        raise TooFewSourcesError(len(names), k)
    rng = np.random.default_rng(_derive_seed(seed, "cv-folds"))
    shuffled = list(names)
    rng.shuffle(shuffled)
    folds = [shuffled[i::k] for i in range(k)]

    fold_data: list[tuple[np.ndarray, np.ndarray, list[str]]] = []
    for i in range(k):
        held = folds[i]
        train_names = [s for j in range(k) if j != i for s in folds[j]]
        X_tr = np.vstack([groups[s][0] for s in train_names])
        y_tr = np.concatenate([groups[s][1] for s in train_names])
        fold_data.append((X_tr, y_tr, held))

    best_params: ForestParams | None = None
    best_score = -np.inf
    for config in grid:
        fold_scores: list[float] = []
        for i, (X_tr, y_tr, held) in enumerate(fold_data):
            model = train_forest(X_tr, y_tr, config, _derive_seed(seed, f"cv:{i}"), schema)
            rrs: list[float] = []
            for s in held:
                X_s, y_s = groups[s]
                scores = predict_proba(model, X_s)
                rank = best_gold_ranks_from_scores(np.asarray(scores), y_s.astype(bool))
                rrs.append(1.0 / rank)
            fold_scores.append(float(np.mean(rrs)))
        score = float(np.mean(fold_scores))
        if score > best_score:
            best_score = score
            best_params = config
    assert best_params is not None
    return best_params


def model_to_dict(model: ForestModel) -> dict:
    schema_hash = hashlib.sha256(
        json.dumps(list(model.schema)).encode("utf-8")
    ).hexdigest()
    return {
        "format": "harmony-forest-v1",
        "schema": list(model.schema),
        "schema_hash": schema_hash,
        "seed": model.seed,
        "params": model.params.to_dict(),
        "trees": [
            {
                "feature": tree.feature.tolist(),
                "threshold": tree.threshold.tolist(),
                "left": tree.left.tolist(),
                "right": tree.right.tolist(),
                "n_pos": tree.n_pos.tolist(),
                "n_neg": tree.n_neg.tolist(),
            }
            for tree in model.trees
        ],
    }


def model_from_dict(d: Mapping) -> ForestModel:
    if d.get("format") != "harmony-forest-v1":
        raise ValueError(f"unknown model format: {d.get('format')!r}")
    schema = tuple(d["schema"])
    expected = hashlib.sha256(json.dumps(list(schema)).encode("utf-8")).hexdigest()
    if d.get("schema_hash") != expected:
        raise SchemaMismatchError("schema hash does not match schema list")
    trees = tuple(
        Tree(
            feature=np.asarray(t["feature"], dtype=np.int64),
            threshold=np.asarray(t["threshold"], dtype=np.float64),
            left=np.asarray(t["left"], dtype=np.int64),
            right=np.asarray(t["right"], dtype=np.int64),
            n_pos=np.asarray(t["n_pos"], dtype=np.int64),
            n_neg=np.asarray(t["n_neg"], dtype=np.int64),
        )
        for t in d["trees"]
    )
    return ForestModel(
        trees=trees,
        params=ForestParams.from_dict(d["params"]),
        schema=schema,
        seed=int(d["seed"]),
    )


def canonical_model_json(model: ForestModel) -> str:
    return json.dumps(model_to_dict(model), sort_keys=True, separators=(",", ":"))


def model_hash(model: ForestModel) -> str:
    return hashlib.sha256(canonical_model_json(model).encode("utf-8")).hexdigest()


def save_model(model: ForestModel, path: str | Path) -> None:
    Path(path).write_text(canonical_model_json(model), encoding="utf-8")


def load_model(path: str | Path) -> ForestModel:
    return model_from_dict(json.loads(Path(path).read_text(encoding="utf-8")))
