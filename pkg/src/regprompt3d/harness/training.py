"""The regulated prompt-tuning loop.

Only the prompts are optimized. Everything the frozen branch contributes
(point features, class references, class distributions) is computed once up
front because it cannot change during training.
"""

from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import SGDCosine, Tensor, cross_entropy, log_softmax, no_grad
from ..data.descriptions import DescriptionBank, manual_bank
from ..data.manifest import derive_seed
from ..encoders import DualEncoder, class_logits
from ..prompts import PromptSet, init_prompt_set
from ..regulation import EnsembleAccumulator, l1_rows, kl_rows, tdc_pool, total_loss
from .config import RunConfig
from .features import canonical_sequences, class_features, point_features
from .metrics import accuracy

log = logging.getLogger(__name__)


class NonFiniteLoss(FloatingPointError):
    def __init__(self, term: str, step: int, value):
        super().__init__(f"non-finite {term} at step {step}: {value}")
        self.term = term
        self.step = step


@dataclass
class TrainData:
    """Precomputed encoder inputs for one training run."""

    tokens: np.ndarray
    labels: np.ndarray
    class_names: list[str]
    val_tokens: np.ndarray | None = None
    val_labels: np.ndarray | None = None


@dataclass
class FrozenReference:
    point: np.ndarray      # (n, d_f) frozen point features of the train set
    text: np.ndarray       # (C, d_f) frozen class references
    dist: np.ndarray       # (n, C) frozen class distributions


@dataclass
class TrainResult:
    prompts: PromptSet            # evaluation parameters (MEC-finalized when MEC is on)
    last: PromptSet               # parameters after the final optimizer step
    history: list[dict] = field(default_factory=list)
    steps: int = 0
    final_terms: dict = field(default_factory=dict)


def frozen_class_references(encoder: DualEncoder, class_names, cfg: RunConfig) -> np.ndarray:
    """TDC-pooled description features per class, or the canonical template when TDC is off."""
    if not cfg.tdc:
        return class_features(encoder, class_names)
    if cfg.bank == "manual":
        bank = DescriptionBank({c: manual_bank(c) for c in class_names})
    else:
        bank = DescriptionBank.build(class_names, cfg.n_t, seed=cfg.data_seed)
    with no_grad():
        return np.stack([tdc_pool(encoder.encode_descriptions(bank[c], c).data) for c in class_names])


def frozen_reference(encoder: DualEncoder, data: TrainData, cfg: RunConfig) -> FrozenReference:
    hp = point_features(encoder, data.tokens)
    ht = frozen_class_references(encoder, data.class_names, cfg)
    logits = hp @ ht.T / cfg.tau
    logits -= logits.max(axis=1, keepdims=True)
    dist = np.exp(logits)
    dist /= dist.sum(axis=1, keepdims=True)
    return FrozenReference(hp, ht, dist)


def _check(name: str, t, step: int) -> None:
    v = t.data if isinstance(t, Tensor) else t
    if not np.all(np.isfinite(v)):
        raise NonFiniteLoss(name, step, v)


def step_loss(encoder: DualEncoder, prompts: PromptSet, tokens, labels, seqs, cfg: RunConfig,
              ref: FrozenReference | None, idx, step: int = 0) -> tuple[Tensor, dict]:
    """Loss graph for one batch: CE plus, with MAC on, the weighted agreement terms."""
    hp = encoder.encode_points(tokens, prompts)
    ht = encoder.encode_text(seqs, prompts)
    logits = class_logits(hp, ht, cfg.tau)
    ce = cross_entropy(logits, labels)
    _check("ce", ce, step)
    terms = {"ce": ce.item()}
    if not cfg.mac:
        return ce, terms
    l_p = l1_rows(hp, ref.point[idx])
    l_t = l1_rows(ht, ref.text)
    l_d, _ = kl_rows(ref.dist[idx], log_q=log_softmax(logits, axis=-1))
    for name, t in (("L_p", l_p), ("L_t", l_t), ("L_D", l_d)):
        _check(name, t, step)
        terms[name] = t.item()
    loss = total_loss(ce, l_p, l_t, l_d, cfg.weights)
    _check("loss", loss, step)
    return loss, terms


def train_prompts(encoder: DualEncoder, data: TrainData, cfg: RunConfig, seed: int,
                  progress=None) -> TrainResult:
    """Tune a fresh PromptSet on ``data``; the encoder itself must be frozen."""
    if not encoder.frozen:
        raise ValueError("prompt tuning needs a frozen encoder")
    cfg = cfg.resolved()
    n = len(data.labels)
    if n == 0:
        raise ValueError("empty training set")
    prompts = init_prompt_set(cfg.depth, cfg.length, cfg.length, encoder.config.dim,
                              seed=derive_seed(seed, 31), n_blocks=encoder.config.n_blocks)
    seqs = canonical_sequences(encoder, data.class_names)
    ref = frozen_reference(encoder, data, cfg) if cfg.mac else None
    batch = min(cfg.batch_size, n)
    steps_per_epoch = math.ceil(n / batch)
    opt = SGDCosine(prompts.tensors(), base_lr=cfg.lr, total_steps=cfg.epochs * steps_per_epoch)
    ensemble = (EnsembleAccumulator(prompts.n_parameters(), cfg.epochs, cfg.mu, cfg.sigma)
                if cfg.mec else None)
    rng = np.random.default_rng(derive_seed(seed, 37))
    history, step = [], 0
    for epoch in range(1, cfg.epochs + 1):
        t0 = time.perf_counter()
        order = rng.permutation(n)
        sums: dict[str, float] = {}
        for lo in range(0, n, batch):
            idx = order[lo:lo + batch]
            loss, terms = step_loss(encoder, prompts, data.tokens[idx], data.labels[idx], seqs, cfg, ref, idx,
                                    step)
            loss.backward()
            opt.step()
            terms["loss"] = loss.item()
            for k, v in terms.items():
                sums[k] = sums.get(k, 0.0) + v * len(idx)
            step += 1
        if ensemble is not None:
            ensemble.accumulate(prompts.flat(), epoch)
        row = {"epoch": epoch, **{k: v / n for k, v in sums.items()}, "lr": opt.lr}
        if cfg.track_val and data.val_tokens is not None and len(data.val_tokens):
            row["val_acc"] = evaluate(encoder, prompts, data.val_tokens, data.val_labels, data.class_names)
        row["seconds"] = time.perf_counter() - t0
        history.append(row)
        if progress is not None:
            progress(row)
    last = prompts.snapshot()
    if ensemble is not None:
        prompts.load_flat(ensemble.finalize())
    for t in prompts.tensors():
        t.grad = None
    result = TrainResult(prompts=prompts, last=last, history=history, steps=step)
    result.final_terms = train_terms(encoder, prompts, data, cfg)
    return result


def train_terms(encoder: DualEncoder, prompts: PromptSet, data: TrainData, cfg: RunConfig) -> dict:
    """CE and agreement terms of ``prompts`` over the whole train set (no gradients)."""
    cfg = cfg.resolved()
    ref = frozen_reference(encoder, data, cfg.with_overrides(mac=True))
    with no_grad():
        hp = point_features(encoder, data.tokens, prompts)
        ht = encoder.encode_text(canonical_sequences(encoder, data.class_names), prompts).data
    logits = Tensor(hp @ ht.T / cfg.tau)
    l_d, _ = kl_rows(ref.dist, log_q=log_softmax(logits, axis=-1))
    return {
        "ce": cross_entropy(logits, data.labels).item(),
        "L_p": l1_rows(hp, ref.point).item(),
        "L_t": l1_rows(ht, ref.text).item(),
        "L_D": l_d.item(),
    }


def evaluate(encoder: DualEncoder, prompts: PromptSet | None, tokens: np.ndarray, labels: np.ndarray,
             class_names) -> float:
    """Percent accuracy over ``class_names`` (open-vocabulary, canonical template)."""
    feats = point_features(encoder, tokens, prompts)
    tf = class_features(encoder, class_names, prompts)
    return accuracy(np.argmax(feats @ tf.T, axis=1), labels)
