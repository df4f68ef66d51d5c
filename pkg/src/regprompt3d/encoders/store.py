"""Save and load a :class:`DualEncoder` as a directory of branch checkpoints."""

from __future__ import annotations

import json
from pathlib import Path

from ..autodiff import Tensor
from . import checkpoint
from .model import DualEncoder, EncoderConfig
from .text import Vocabulary


def save_encoder(directory, encoder: DualEncoder, meta: dict | None = None) -> Path:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    checkpoint.save(d / "point.ckpt", {k: v.data for k, v in encoder.point.items()}, "point")
    checkpoint.save(d / "text.ckpt", {k: v.data for k, v in encoder.text.items()}, "text")
    info = {"config": encoder.config.to_dict(), "vocab": encoder.vocab.words, "meta": meta or {}}
    (d / "meta.json").write_text(json.dumps(info, indent=2, sort_keys=True))
    return d


def load_encoder(directory, frozen: bool = True) -> DualEncoder:
    d = Path(directory)
    info = json.loads((d / "meta.json").read_text())
    vocab = Vocabulary([])
    vocab.words = list(info["vocab"])
    vocab.index = {w: i for i, w in enumerate(vocab.words)}
    branches = {}
    for name in ("point", "text"):
        tag, arrays = checkpoint.load(d / f"{name}.ckpt")
        if tag != name:
            raise ValueError(f"{name}.ckpt carries branch tag {tag!r}")
        branches[name] = {k: Tensor(v.copy(), name=k) for k, v in arrays.items()}
    return DualEncoder(EncoderConfig(**info["config"]), vocab, branches["point"], branches["text"],
                       frozen=frozen)
