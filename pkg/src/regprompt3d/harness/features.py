"""Materialize manifests into encoder inputs and run batched inference."""

from __future__ import annotations

import numpy as np

from ..autodiff import no_grad
from ..data.manifest import SampleRecord, materialize
from ..encoders import DualEncoder
from ..encoders.text import TokenSequence
from ..data.descriptions import CANONICAL_TEMPLATE
from ..prompts import PromptSet

CHUNK = 64


def group_records(encoder: DualEncoder, records: list[SampleRecord]) -> tuple[np.ndarray, np.ndarray]:
    """Centers (n, u, 3) and neighbor offsets (n, u, k, 3) for every record."""
    cfg = encoder.config
    centers = np.empty((len(records), cfg.n_patches, 3))
    offsets = np.empty((len(records), cfg.n_patches, cfg.k_neighbors, 3), dtype=np.float32)
    for i, rec in enumerate(records):
        c, o = encoder.group(materialize(rec).points)
        centers[i], offsets[i] = c, o
    return centers, offsets


def patch_tokens(encoder: DualEncoder, records: list[SampleRecord]) -> np.ndarray:
    """Frozen encoder input tokens (n, 1 + u, d); constant during prompt tuning."""
    out = []
    for lo in range(0, len(records), CHUNK):
        c, o = group_records(encoder, records[lo:lo + CHUNK])
        with no_grad():
            out.append(encoder.patch_tokens(c, o.astype(np.float64)).data)
    return np.concatenate(out) if out else np.empty((0, 1 + encoder.config.n_patches, encoder.config.dim))


def point_features(encoder: DualEncoder, tokens: np.ndarray, prompts: PromptSet | None = None) -> np.ndarray:
    outs = []
    with no_grad():
        for lo in range(0, len(tokens), CHUNK):
            outs.append(encoder.encode_points(tokens[lo:lo + CHUNK], prompts).data)
    return np.concatenate(outs)


def canonical_sequences(encoder: DualEncoder, class_names) -> list[TokenSequence]:
    return [encoder.vocab.encode(CANONICAL_TEMPLATE.format(c), c) for c in class_names]


def class_features(encoder: DualEncoder, class_names, prompts: PromptSet | None = None) -> np.ndarray:
    with no_grad():
        return encoder.encode_text(canonical_sequences(encoder, class_names), prompts).data


def predict(encoder: DualEncoder, tokens: np.ndarray, class_names, prompts: PromptSet | None = None,
            text_feats: np.ndarray | None = None) -> np.ndarray:
    """Arg-max class index per sample (cosine similarity; tau does not matter)."""
    feats = point_features(encoder, tokens, prompts)
    tf = class_features(encoder, class_names, prompts) if text_feats is None else text_feats
    return np.argmax(feats @ tf.T, axis=1)


def labels_for(records: list[SampleRecord], class_names) -> np.ndarray:
    index = {c: i for i, c in enumerate(class_names)}
    return np.array([index[r.class_name] for r in records], dtype=np.int64)


class TokenCache:
    """Memoized :func:`patch_tokens` per record for one encoder."""

    def __init__(self, encoder: DualEncoder):
        self.encoder = encoder
        self._rows: dict[SampleRecord, np.ndarray] = {}

    def __len__(self) -> int:
        return len(self._rows)

    def get(self, records: list[SampleRecord]) -> np.ndarray:
        missing = list(dict.fromkeys(r for r in records if r not in self._rows))
        if missing:
            for rec, row in zip(missing, patch_tokens(self.encoder, missing)):
                self._rows[rec] = row
        cfg = self.encoder.config
        if not records:
            return np.empty((0, 1 + cfg.n_patches, cfg.dim))
        return np.stack([self._rows[r] for r in records])
