"""Review service: candidate lists, curator labels, retraining, metrics.

Read endpoints snapshot the active model at request start so one response
never mixes two model versions. Retraining runs synchronously under an
exclusive lock; a concurrent trigger gets a 409. Label appends go through
the store's single-writer lock.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from fastapi import FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import JSONResponse
from pydantic import BaseModel

from .errors import InsufficientLabelsError
from .features import (
    FEATURE_NAMES,
    GoldPairs,
    PairFeaturizer,
    generate_training_pairs,
    pairs_to_arrays,
)
from .forest import ForestModel, ForestParams, model_hash, predict_proba, train_forest
from .labels import LabelStore
from .ranking import rank_candidates

HEURISTIC_VERSION = "heuristic-mean-sim-v1"
_SIM_SLOTS = slice(0, 12)


@dataclass
class ServiceConfig:
    negatives_per_source: int = 60
    train_params: ForestParams = field(
        default_factory=lambda: ForestParams(n_trees=30, max_depth=10)
    )
    seed: int = 0
    token: str | None = None


class ServiceState:
    """Mutable model registry plus the fixed corpus artifacts."""

    def __init__(
        self,
        featurizer: PairFeaturizer,
        label_store: LabelStore,
        config: ServiceConfig | None = None,
        model: ForestModel | None = None,
        metrics: Mapping | None = None,
    ):
        self.featurizer = featurizer
        self.label_store = label_store
        self.config = config or ServiceConfig()
        self.metrics = dict(metrics) if metrics is not None else None
        self.retrain_lock = threading.Lock()
        self.models: dict[str, ForestModel] = {}
        self.model: ForestModel | None = None
        self.model_version: str = HEURISTIC_VERSION
        if model is not None:
            self._install(model)

    def _install(self, model: ForestModel) -> str:
        version = model_hash(model)
        self.models[version] = model
        self.model = model
        self.model_version = version
        return version

    def snapshot(self) -> tuple[ForestModel | None, str]:
        return self.model, self.model_version

    def score_source(
        self, source_name: str, model: ForestModel | None
    ) -> tuple[list[str], np.ndarray, np.ndarray]:
        names, X = self.featurizer.feature_matrix(source_name)
        if model is None:
            scores = X[:, _SIM_SLOTS].mean(axis=1)
        else:
            keep = [FEATURE_NAMES.index(n) for n in model.schema]
            scores = np.asarray(predict_proba(model, X[:, keep]))
        return names, np.asarray(scores, dtype=np.float64), X

    def retrain(self) -> str:
        """Train a fresh model from accepted labels; caller holds the lock."""
        accepted = self.label_store.accepted_pairs()
        if not accepted:
            raise InsufficientLabelsError("no accepted labels to train on")
        gold = GoldPairs.from_pairs(accepted)
        pairs = generate_training_pairs(
            gold,
            gold.sources(),
            _TargetsView(self.featurizer),
            self.featurizer,
            negatives_per_source=self.config.negatives_per_source,
            seed=self.config.seed,
        )
        X, y = pairs_to_arrays(pairs)
        model = train_forest(
            X, y, self.config.train_params, self.config.seed, FEATURE_NAMES
        )
        return self._install(model)


class _TargetsView:
    """Adapter exposing the featurizer's target set as a name collection."""

    def __init__(self, featurizer: PairFeaturizer):
        self._names = featurizer.target_names

    def names(self) -> list[str]:
        return list(self._names)

    def __contains__(self, name: str) -> bool:
        return name in self._names


class LabelRequest(BaseModel):
    source: str
    target: str
    verdict: str
    curator: str


def _error(status: int, code: str, message: str) -> JSONResponse:
    return JSONResponse({"code": code, "message": message}, status_code=status)


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="harmony match service")

    @app.exception_handler(RequestValidationError)
    async def on_validation_error(request: Request, exc: RequestValidationError):
        return _error(400, "invalid_request", str(exc.errors()))

    @app.middleware("http")
    async def auth(request: Request, call_next):
        if state.config.token and request.url.path.startswith("/api/"):
            header = request.headers.get("authorization", "")
            if header != f"Bearer {state.config.token}":
                return _error(401, "unauthorized", "missing or invalid bearer token")
        return await call_next(request)

    @app.get("/healthz")
    def healthz():
        return {"status": "ok", "model_version": state.model_version}

    @app.get("/api/sources")
    def list_sources():
        return {"sources": sorted(state.featurizer.sources)}

    @app.get("/api/sources/{name}/candidates")
    def candidates(name: str, top: int = 10, features: bool = False):
        if name not in state.featurizer.sources:
            return _error(404, "unknown_source", f"unknown source variable: {name}")
        if top < 1:
            return _error(400, "invalid_request", "top must be >= 1")
        model, version = state.snapshot()
        names, scores, X = state.score_source(name, model)
        ranked = rank_candidates(name, names, scores, frozenset())
        idx = {n: i for i, n in enumerate(names)}
        items = []
        for entry in ranked.entries[:top]:
            item = {
                "target": entry.target_name,
                "score": entry.score,
                "rank": entry.assigned_rank,
            }
            if features:
                row = X[idx[entry.target_name]]
                item["features"] = {
                    fname: float(v) for fname, v in zip(FEATURE_NAMES, row)
                }
            items.append(item)
        return {"source": name, "model_version": version, "candidates": items}

    @app.get("/api/labels")
    def list_labels():
        state_map = state.label_store.current_state()
        labels = [state_map[k].to_dict() for k in sorted(state_map)]
        return {"labels": labels}

    @app.post("/api/labels", status_code=201)
    def post_label(body: LabelRequest):
        if body.source not in state.featurizer.sources:
            return _error(404, "unknown_variable", f"unknown source: {body.source}")
        if body.target not in state.featurizer.targets:
            return _error(404, "unknown_variable", f"unknown target: {body.target}")
        if body.verdict not in ("accept", "reject"):
            return _error(400, "malformed_verdict", f"bad verdict: {body.verdict!r}")
        label_id = state.label_store.append(
            body.source, body.target, body.verdict, body.curator
        )
        return {"id": label_id, "label": state.label_store.records()[label_id].to_dict()}

    @app.post("/api/retrain")
    def retrain():
        if not state.retrain_lock.acquire(blocking=False):
            return _error(409, "retrain_in_flight", "another retrain is running")
        try:
            try:
                version = state.retrain()
            except InsufficientLabelsError as exc:
                return _error(400, "insufficient_labels", str(exc))
            return {"model_version": version}
        finally:
            state.retrain_lock.release()

    @app.get("/api/metrics")
    def metrics():
        if state.metrics is None:
            return _error(404, "no_metrics", "no trial summary loaded")
        return {"metrics": state.metrics}

    return app
