"""Dual point-cloud / text transformer encoder with optional deep prompts."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass

import numpy as np

from ..autodiff import (
    Tensor,
    add,
    broadcast_rows,
    concat,
    gelu,
    getitem,
    l2_normalize,
    matmul,
    max_,
    no_grad,
    relu,
    reshape,
    scale,
    softmax,
)
from ..prompts import PromptSet, inject_prompts, prompt_key_mask
from .grouping import group_patches
from .layers import (
    Params,
    attention_bias,
    block,
    gaussian,
    init_block,
    init_layer_norm,
    init_linear,
    linear,
    ln,
)
from .text import TokenSequence, Vocabulary

# patch offsets are small (local neighborhoods), so the first layer is boosted
EMBED_GAIN = 8.0


@dataclass(frozen=True)
class EncoderConfig:
    dim: int = 64
    feat_dim: int = 64
    n_blocks: int = 12
    n_heads: int = 4
    mlp_ratio: int = 2
    n_patches: int = 32
    k_neighbors: int = 32
    max_text_len: int = 32

    def to_dict(self) -> dict:
        return asdict(self)


@dataclass
class PatchSequence:
    cls_token: np.ndarray
    patch_embeddings: np.ndarray
    patch_centers: np.ndarray

    def tokens(self) -> np.ndarray:
        return np.concatenate([self.cls_token[None], self.patch_embeddings], axis=0)

    def __len__(self) -> int:
        return 1 + len(self.patch_embeddings)


def _init_point(cfg: EncoderConfig, rng) -> Params:
    p: Params = {}
    d = cfg.dim
    # the embedding MLPs get fan-in scaled weights so patch tokens start at
    # unit scale; with 0.02 everywhere they vanish under the cls token
    init_linear(p, "patch.fc1", 3, d, rng, std=EMBED_GAIN / math.sqrt(3))
    init_linear(p, "patch.fc2", d, d, rng, std=1.0 / math.sqrt(d))
    init_linear(p, "pos.fc1", 3, d, rng, std=1.0 / math.sqrt(3))
    init_linear(p, "pos.fc2", d, d, rng, std=1.0 / math.sqrt(d))
    p["cls"] = Tensor(gaussian(rng, (d,), 1.0), name="cls")
    for i in range(cfg.n_blocks):
        init_block(p, f"blocks.{i}", d, cfg.mlp_ratio * d, rng)
    init_layer_norm(p, "ln_f", d)
    p["proj"] = Tensor(gaussian(rng, (d, cfg.feat_dim)), name="proj")
    return p


def _init_text(cfg: EncoderConfig, vocab_size: int, rng) -> Params:
    p: Params = {}
    d = cfg.dim
    p["tok_emb"] = Tensor(gaussian(rng, (vocab_size, d), 1.0), name="tok_emb")
    p["pos_emb"] = Tensor(gaussian(rng, (cfg.max_text_len, d), 0.1), name="pos_emb")
    for i in range(cfg.n_blocks):
        init_block(p, f"blocks.{i}", d, cfg.mlp_ratio * d, rng)
    init_layer_norm(p, "ln_f", d)
    p["proj"] = Tensor(gaussian(rng, (d, cfg.feat_dim)), name="proj")
    return p


class DualEncoder:
    """Point branch f_P and text branch f_T sharing a feature space.

    ``frozen`` marks the pre-trained state: all weights then have
    ``requires_grad=False`` and only prompt tensors can receive gradients.
    """

    def __init__(self, config: EncoderConfig, vocab: Vocabulary, point: Params, text: Params,
                 frozen: bool = False):
        self.config = config
        self.vocab = vocab
        self.point = point
        self.text = text
        self.frozen = False
        if frozen:
            self.freeze()

    @classmethod
    def init(cls, config: EncoderConfig, vocab: Vocabulary, seed: int = 0) -> "DualEncoder":
        rng = np.random.default_rng(seed)
        return cls(config, vocab, _init_point(config, rng), _init_text(config, len(vocab), rng))

    def freeze(self) -> "DualEncoder":
        for t in self.parameters():
            t.requires_grad = False
            t.grad = None
        self.frozen = True
        return self

    def unfreeze(self) -> "DualEncoder":
        for t in self.parameters():
            t.requires_grad = True
        self.frozen = False
        return self

    def parameters(self) -> list[Tensor]:
        return list(self.point.values()) + list(self.text.values())

    def n_parameters(self) -> int:
        return sum(t.size for t in self.parameters())

    def state_arrays(self) -> dict[str, np.ndarray]:
        out = {f"point.{k}": v.data for k, v in self.point.items()}
        out.update({f"text.{k}": v.data for k, v in self.text.items()})
        return out

    # ------------------------------------------------------------ point branch

    def group(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        return group_patches(points, self.config.n_patches, self.config.k_neighbors)

    def patch_tokens(self, centers: np.ndarray, offsets: np.ndarray) -> Tensor:
        """(B, u, 3) centers and (B, u, k, 3) offsets -> (B, 1 + u, d) encoder input."""
        p = self.point
        feat = linear(relu(linear(offsets, p, "patch.fc1")), p, "patch.fc2")
        feat = max_(feat, axis=2)
        pos = linear(gelu(linear(centers, p, "pos.fc1")), p, "pos.fc2")
        cls = broadcast_rows(reshape(p["cls"], (1, -1)), centers.shape[0])
        return concat([cls, add(feat, pos)], axis=1)

    def embed_point_patches(self, points: np.ndarray) -> PatchSequence:
        centers, offsets = self.group(points)
        with no_grad():
            toks = self.patch_tokens(centers[None], offsets[None]).data[0]
        return PatchSequence(toks[0], toks[1:], centers)

    def encode_points(self, tokens, prompts: PromptSet | None = None,
                      mask_prompts: bool = False) -> Tensor:
        """(B, 1 + u, d) patch tokens -> (B, d_f) unit features read at the cls slot."""
        tokens = tokens if isinstance(tokens, Tensor) else Tensor(tokens)
        layer_prompts = self._layer_prompts(prompts, "point")
        return self._run(tokens, self.point, layer_prompts, "point", causal=False,
                         mask_prompts=mask_prompts, read=0)

    # ------------------------------------------------------------ text branch

    def text_embeddings(self, seqs: list[TokenSequence]) -> Tensor:
        length = len(seqs[0])
        if any(len(s) != length for s in seqs):
            raise ValueError("text_embeddings needs equal-length sequences")
        if length > self.config.max_text_len:
            raise ValueError(f"sequence of {length} tokens exceeds max_text_len={self.config.max_text_len}")
        ids = np.array([s.token_ids for s in seqs])
        tok = getitem(self.text["tok_emb"], ids)
        pos = getitem(self.text["pos_emb"], slice(0, length))
        return add(tok, pos)

    def encode_text(self, seqs: list[TokenSequence], prompts: PromptSet | None = None,
                    mask_prompts: bool = False) -> Tensor:
        """(n, d_f) unit features read at eos; sequences are batched by length."""
        if not seqs:
            raise ValueError("encode_text needs at least one sequence")
        layer_prompts = self._layer_prompts(prompts, "text")
        groups: dict[int, list[int]] = {}
        for i, s in enumerate(seqs):
            groups.setdefault(len(s), []).append(i)
        outs, order = [], []
        for length in sorted(groups):
            idx = groups[length]
            x = self.text_embeddings([seqs[i] for i in idx])
            outs.append(self._run(x, self.text, layer_prompts, "text", causal=True,
                                  mask_prompts=mask_prompts, read=-1))
            order.extend(idx)
        if len(outs) == 1:
            return outs[0]
        stacked = concat(outs, axis=0)
        return getitem(stacked, np.argsort(order, kind="stable"))

    def encode_descriptions(self, descriptions: list[str], class_name: str,
                            prompts: PromptSet | None = None) -> Tensor:
        return self.encode_text([self.vocab.encode(d, class_name) for d in descriptions], prompts)

    # ------------------------------------------------------------ shared

    def _layer_prompts(self, prompts: PromptSet | None, branch: str) -> list[Tensor]:
        if prompts is None:
            return []
        rows = prompts.branch(branch)
        if len(rows) > self.config.n_blocks:
            raise ValueError(f"prompt depth {len(rows)} exceeds {self.config.n_blocks} blocks")
        for t in rows:
            if t.ndim != 2 or t.shape[1] != self.config.dim:
                raise ValueError(f"prompt shape {t.shape} does not match model width {self.config.dim}")
        return rows

    def _run(self, x: Tensor, p: Params, layer_prompts: list[Tensor], branch: str, causal: bool,
             mask_prompts: bool, read: int) -> Tensor:
        cfg = self.config
        base_len = x.shape[1]
        width = layer_prompts[0].shape[0] if layer_prompts else 0
        length = base_len + width
        key_mask = prompt_key_mask(base_len, width, branch) if (mask_prompts and width) else None
        bias = attention_bias(length, causal, key_mask)
        for i in range(cfg.n_blocks):
            x = inject_prompts(x, i, layer_prompts, branch, base_len, cfg.n_blocks)
            x = block(x, p, f"blocks.{i}", cfg.n_heads, bias)
        idx = read if read >= 0 else x.shape[1] + read
        h = ln(getitem(x, (slice(None), idx)), p, "ln_f")
        return l2_normalize(matmul(h, p["proj"]), axis=-1)


def class_logits(h_p, class_features, tau: float) -> Tensor:
    """Cosine similarities divided by the temperature, (B, C)."""
    if tau <= 0:
        raise ValueError(f"temperature must be positive, got {tau}")
    cf = class_features if isinstance(class_features, Tensor) else Tensor(class_features)
    hp = h_p if isinstance(h_p, Tensor) else Tensor(h_p)
    if hp.ndim == 1:
        hp = reshape(hp, (1, -1))
    if hp.shape[-1] != cf.shape[-1]:
        raise ValueError(f"classify: shape mismatch between {hp.shape} and {cf.shape}")
    return scale(matmul(hp, cf.T), 1.0 / tau)


def classify(h_p, class_features, tau: float) -> Tensor:
    """Softmax over cosine similarity / tau; rows of ``class_features`` must be unit norm."""
    return softmax(class_logits(h_p, class_features, tau), axis=-1)
