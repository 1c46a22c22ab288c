"""Shared fixtures: three tiny randomly initialized BERT checkpoints.

Real transformer weights are too large to ship, so the suite builds small
models (2 layers, 16-32 hidden units) with deterministic seeds and saves
them in HF format. The vocabulary is a fixed word pool plus character
pieces, so pool words get their own token while anything else still
tokenizes via characters instead of collapsing to [UNK].
"""

from __future__ import annotations

import json
from pathlib import Path

import pytest
import torch
from fastapi.testclient import TestClient
from transformers import BertConfig, BertModel, BertTokenizer

from harmony_sidecar.encoder import Encoder
from harmony_sidecar.registry import Registry, load_registry
from harmony_sidecar.service import create_app

SPECIALS = ["[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]"]
CHARS = "abcdefghijklmnopqrstuvwxyz0123456789_"

WORD_POOL = (
    "cost caregiver monthly sum total derive derived score scale item visit "
    "baseline week value missing null mean variables mapped label sheet "
    "question response patient index care resource use utilization hours "
    "informal formal time spent daily activities health status cognitive "
    "function memory test recall word list delayed immediate severity stage "
    "categories education years age gender mapping impute rounded divide "
    "multiply product copy recode onto into units euro yen currency "
    "converted rate average window period months days assessment instrument "
    "battery proxy self report interview clinician site region country "
    "europe japan cohort enrolled screening eligibility criteria threshold "
    "cutoff positive negative sumscore subscale domain physical social "
    "emotional the of for a in is are to and or with from by at as if then "
    "else when over per each all any not no yes this that"
).split()

MODEL_DIMS = {"e5-large-v2": 32, "mpnet-base-all": 24, "minilm-l12-all": 16}


def build_tiny_model(out_dir: Path, hidden: int, seed: int) -> None:
    # dict.fromkeys dedups ("a" is both a pool word and a character) while
    # keeping order, so token ids stay gapless
    vocab = list(
        dict.fromkeys(
            SPECIALS + WORD_POOL + list(CHARS) + [f"##{c}" for c in CHARS]
        )
    )
    out_dir.mkdir(parents=True, exist_ok=True)
    (out_dir / "vocab.txt").write_text("\n".join(vocab) + "\n", encoding="utf-8")
    tokenizer = BertTokenizer(str(out_dir / "vocab.txt"))
    tokenizer.save_pretrained(out_dir)
    config = BertConfig(
        vocab_size=len(vocab),
        hidden_size=hidden,
        num_hidden_layers=2,
        num_attention_heads=2,
        intermediate_size=hidden * 4,
        max_position_embeddings=512,
    )
    torch.manual_seed(seed)
    BertModel(config).save_pretrained(out_dir)


@pytest.fixture(scope="session")
def model_root(tmp_path_factory: pytest.TempPathFactory) -> Path:
    root = tmp_path_factory.mktemp("models")
    for i, (model_id, dim) in enumerate(sorted(MODEL_DIMS.items())):
        build_tiny_model(root / model_id, hidden=dim, seed=100 + i)
    return root


@pytest.fixture(scope="session")
def registry(model_root: Path) -> Registry:
    spec = {
        "models": {
            mid: {"path": str(model_root / mid), "dim": dim}
            for mid, dim in MODEL_DIMS.items()
        },
        "keyword_model": "minilm-l12-all",
    }
    path = model_root / "registry.json"
    path.write_text(json.dumps(spec), encoding="utf-8")
    return load_registry(path)


@pytest.fixture(scope="session")
def encoders(registry: Registry) -> dict[str, Encoder]:
    return {e.model_id: Encoder(e) for e in registry.entries}


@pytest.fixture(scope="session")
def client(registry: Registry, encoders: dict[str, Encoder]) -> TestClient:
    return TestClient(create_app(registry, encoders))
