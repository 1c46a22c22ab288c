"""Sentence embeddings: tokenize, mean-pool over the attention mask, unit-normalize."""

from __future__ import annotations

from typing import Sequence

import numpy as np
import torch
from transformers import AutoModel, AutoTokenizer

from .registry import ModelEntry


class DimMismatchError(RuntimeError):
    """Loaded weights do not produce the dimension the registry declares."""


class Encoder:
    """One loaded model. Weights are read-only; encode() never mutates state."""

    def __init__(self, entry: ModelEntry):
        self.entry = entry
        self.tokenizer = AutoTokenizer.from_pretrained(entry.path)
        self.model = AutoModel.from_pretrained(entry.path)
        self.model.eval()
        hidden = int(self.model.config.hidden_size)
        if hidden != entry.dim:
            raise DimMismatchError(
                f"{entry.model_id}: registry says dim {entry.dim}, "
                f"weights produce {hidden}"
            )
        # Cap sequence length by whichever bound is real; some tokenizer
        # configs report a sentinel model_max_length in the 1e30 range.
        limits = [int(getattr(self.model.config, "max_position_embeddings", 512))]
        tok_max = int(getattr(self.tokenizer, "model_max_length", 512))
        if tok_max < 10**6:
            limits.append(tok_max)
        self.max_length = min(limits)

    def _prefixed(self, texts: Sequence[str]) -> list[str]:
        if self.entry.prefix_rule == "e5_query":
            return [f"query: {t}" for t in texts]
        return list(texts)

    def encode(self, texts: Sequence[str]) -> np.ndarray:
        """Embed a batch; rows are float64 unit vectors in input order.

        The whole request is tokenized and run as a single padded batch, so
        identical texts in one call share padding and come out bitwise equal.
        """
        if not texts:
            raise ValueError("encode needs at least one text")
        batch = self.tokenizer(
            self._prefixed(texts),
            padding=True,
            truncation=True,
            max_length=self.max_length,
            return_tensors="pt",
        )
        with torch.inference_mode():
            out = self.model(**batch).last_hidden_state
            mask = batch["attention_mask"].unsqueeze(-1).to(out.dtype)
            summed = (out * mask).sum(dim=1)
            counts = mask.sum(dim=1).clamp(min=1.0)
            pooled = summed / counts
            pooled = torch.nn.functional.normalize(pooled, p=2, dim=1)
        return pooled.cpu().numpy().astype(np.float64)
