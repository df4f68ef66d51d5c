"""The frozen pre-trained surrogate: a dual encoder trained once on a reserved split.

Both branches are trained to hit fixed per-class anchors in the shared
feature space, the text branch from many phrasings of each class, so that
cosine similarity between the two gives a competent zero-shot classifier.
The result is cached on disk keyed by a hash of its configuration.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from ..autodiff import Adam, cross_entropy
from ..data.descriptions import candidate_pool
from ..data.shapes import FAMILY_NAMES
from ..data.splits import pretrain_records
from ..encoders import DualEncoder, EncoderConfig, Vocabulary, class_logits, load_encoder, save_encoder
from .features import group_records, labels_for

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class PretrainConfig:
    encoder: EncoderConfig = field(default_factory=EncoderConfig)
    per_class: int = 256
    point_epochs: int = 6
    text_steps: int = 150
    batch_size: int = 64
    lr: float = 2e-3
    tau: float = 0.05
    n_points: int = 1024
    seed: int = 0

    def key(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha1(blob).hexdigest()[:12]


def default_cache_dir() -> Path:
    return Path(os.environ.get("REGPROMPT3D_CACHE", Path.home() / ".cache" / "regprompt3d"))


def build_vocabulary() -> Vocabulary:
    return Vocabulary.from_classes(FAMILY_NAMES)


def class_anchors(n_classes: int, dim: int, seed: int) -> np.ndarray:
    """Fixed random unit targets, one per class, shared by both branches."""
    a = np.random.default_rng([seed, 98]).normal(size=(n_classes, dim))
    return a / np.linalg.norm(a, axis=1, keepdims=True)


def _say(msg: str, progress: bool) -> None:
    log.info(msg)
    if progress:
        print(msg, flush=True)


def pretrain_surrogate(cfg: PretrainConfig = PretrainConfig(), progress: bool = False) -> DualEncoder:
    """Train a dual encoder from scratch on the reserved pre-train split, then freeze it.

    Two stages against fixed class anchors: the point branch first, then the
    text branch on randomly phrased descriptions. Training the branches
    jointly from scratch is much slower to leave the uniform-prediction
    plateau at this size.
    """
    vocab = build_vocabulary()
    enc = DualEncoder.init(cfg.encoder, vocab, seed=cfg.seed).unfreeze()
    classes = list(FAMILY_NAMES)
    anchors = class_anchors(len(classes), cfg.encoder.feat_dim, cfg.seed)
    rng = np.random.default_rng([cfg.seed, 99])

    records = pretrain_records(cfg.per_class, cfg.seed, cfg.n_points)
    labels = labels_for(records, classes)
    centers, offsets = group_records(enc, records)
    steps_per_epoch = int(np.ceil(len(records) / cfg.batch_size))
    opt = Adam(list(enc.point.values()), lr=cfg.lr, total_steps=cfg.point_epochs * steps_per_epoch)
    for epoch in range(cfg.point_epochs):
        t0 = time.time()
        order = rng.permutation(len(records))
        losses, correct = [], 0
        for lo in range(0, len(order), cfg.batch_size):
            idx = order[lo:lo + cfg.batch_size]
            toks = enc.patch_tokens(centers[idx], offsets[idx].astype(np.float64))
            logits = class_logits(enc.encode_points(toks), anchors, cfg.tau)
            loss = cross_entropy(logits, labels[idx])
            loss.backward()
            opt.step()
            losses.append(loss.item())
            correct += int((logits.data.argmax(axis=1) == labels[idx]).sum())
        _say(f"pretrain point epoch {epoch + 1}/{cfg.point_epochs} loss {np.mean(losses):.4f} "
             f"acc {100 * correct / len(records):.1f}% ({time.time() - t0:.0f}s)", progress)

    pools = [[vocab.encode(d, c) for d in candidate_pool(c)] for c in classes]
    per_step = max(1, cfg.batch_size // len(classes))
    text_labels = np.repeat(np.arange(len(classes)), per_step)
    opt = Adam(list(enc.text.values()), lr=cfg.lr, total_steps=cfg.text_steps)
    t0, losses = time.time(), []
    for step in range(cfg.text_steps):
        seqs = [pool[i] for pool in pools for i in rng.integers(len(pool), size=per_step)]
        loss = cross_entropy(class_logits(enc.encode_text(seqs), anchors, cfg.tau), text_labels)
        loss.backward()
        opt.step()
        losses.append(loss.item())
        if (step + 1) % 50 == 0 or step + 1 == cfg.text_steps:
            _say(f"pretrain text step {step + 1}/{cfg.text_steps} loss {np.mean(losses):.4f} "
                 f"({time.time() - t0:.0f}s)", progress)
            losses = []
    return enc.freeze()


def get_surrogate(cfg: PretrainConfig = PretrainConfig(), cache_dir=None, progress: bool = False) -> DualEncoder:
    """Load the cached frozen surrogate for ``cfg`` or build and cache it."""
    root = Path(cache_dir) if cache_dir is not None else default_cache_dir()
    path = root / f"surrogate-{cfg.key()}"
    if (path / "meta.json").exists():
        return load_encoder(path, frozen=True)
    enc = pretrain_surrogate(cfg, progress=progress)
    save_encoder(path, enc, meta={"pretrain": json.loads(json.dumps(asdict(cfg)))})
    return enc
