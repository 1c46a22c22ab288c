import numpy as np
from conftest import MODEL_DIMS

from harmony_sidecar.service import MAX_BATCH, build_service


def test_healthz_lists_models(client):
    resp = client.get("/healthz")
    assert resp.status_code == 200
    body = resp.json()
    assert body["status"] == "ok"
    assert body["models"] == sorted(MODEL_DIMS)


def test_models_reports_dims_and_prefix_rules(client):
    body = client.get("/models").json()
    entries = {e["model_id"]: e for e in body["models"]}
    assert entries["e5-large-v2"]["dim"] == 32
    assert entries["e5-large-v2"]["prefix_rule"] == "e5_query"
    assert entries["mpnet-base-all"]["dim"] == 24
    assert entries["mpnet-base-all"]["prefix_rule"] == "none"
    assert entries["minilm-l12-all"]["dim"] == 16


def test_embed_happy_path(client):
    resp = client.post(
        "/embed",
        json={"model": "mpnet-base-all", "texts": ["caregiver cost", "hours"]},
    )
    assert resp.status_code == 200
    body = resp.json()
    assert body["dim"] == 24
    assert len(body["vectors"]) == 2
    for vec in body["vectors"]:
        assert len(vec) == 24
        assert abs(float(np.linalg.norm(vec)) - 1.0) < 1e-6


def test_embed_identical_texts_identical_vectors(client):
    resp = client.post(
        "/embed",
        json={"model": "minilm-l12-all", "texts": ["cost", "sum", "cost"]},
    )
    vectors = resp.json()["vectors"]
    assert vectors[0] == vectors[2]
    assert vectors[0] != vectors[1]


def test_embed_unknown_model(client):
    resp = client.post("/embed", json={"model": "bert-base", "texts": ["x"]})
    assert resp.status_code == 400
    assert resp.json()["code"] == "unknown_model"


def test_embed_empty_batch(client):
    resp = client.post("/embed", json={"model": "minilm-l12-all", "texts": []})
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_request"


def test_embed_oversized_batch(client):
    texts = ["word"] * (MAX_BATCH + 1)
    resp = client.post("/embed", json={"model": "minilm-l12-all", "texts": texts})
    assert resp.status_code == 413
    assert resp.json()["code"] == "batch_too_large"


def test_malformed_body_is_400(client):
    resp = client.post("/embed", json={"model": "minilm-l12-all", "texts": "cost"})
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_request"


def test_keywords_happy_path(client):
    text = "derive the total monthly caregiver cost from weekly hours"
    resp = client.post("/keywords", json={"text": text, "max_words": 4})
    assert resp.status_code == 200
    words = resp.json()["keywords"].split()
    assert 1 <= len(words) <= 4
    assert set(words) <= set(text.split())


def test_keywords_default_cap_is_15(client):
    text = " ".join(f"w{i}" for i in range(40))
    resp = client.post("/keywords", json={"text": text})
    assert resp.status_code == 200
    assert len(resp.json()["keywords"].split()) == 15


def test_keywords_empty_text(client):
    resp = client.post("/keywords", json={"text": "   "})
    assert resp.status_code == 400
    assert resp.json()["code"] == "empty_text"


def test_keywords_bad_max_words(client):
    resp = client.post("/keywords", json={"text": "cost", "max_words": 0})
    assert resp.status_code == 400
    assert resp.json()["code"] == "invalid_request"


def test_repeated_requests_byte_identical(client):
    payload = {"model": "e5-large-v2", "texts": ["monthly cost", "recall score"]}
    first = client.post("/embed", json=payload)
    second = client.post("/embed", json=payload)
    assert first.content == second.content


def test_build_service_loads_registry(registry):
    from fastapi.testclient import TestClient

    app = build_service(registry)
    with TestClient(app) as tc:
        assert tc.get("/healthz").json()["status"] == "ok"
