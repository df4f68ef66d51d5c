"""Pre-LN transformer pieces on top of the autodiff engine.

Parameters live in flat ``dict[str, Tensor]`` maps keyed by dotted names so
that checkpointing and ensembling can treat them as one vector.
"""

from __future__ import annotations

import math

import numpy as np

from ..autodiff import (
    Tensor,
    add,
    gelu,
    getitem,
    layer_norm,
    matmul,
    reshape,
    scale,
    softmax,
    transpose,
)

Params = dict[str, Tensor]

NEG_INF = -1e30


def gaussian(rng: np.random.Generator, shape, std: float = 0.02) -> np.ndarray:
    return rng.normal(0.0, std, size=shape)


def init_linear(p: Params, name: str, n_in: int, n_out: int, rng, std: float = 0.02) -> None:
    p[f"{name}.w"] = Tensor(gaussian(rng, (n_in, n_out), std), name=f"{name}.w")
    p[f"{name}.b"] = Tensor(np.zeros(n_out), name=f"{name}.b")


def init_layer_norm(p: Params, name: str, d: int) -> None:
    p[f"{name}.w"] = Tensor(np.ones(d), name=f"{name}.w")
    p[f"{name}.b"] = Tensor(np.zeros(d), name=f"{name}.b")


def init_block(p: Params, name: str, d: int, hidden: int, rng) -> None:
    init_layer_norm(p, f"{name}.ln1", d)
    init_linear(p, f"{name}.attn.qkv", d, 3 * d, rng)
    init_linear(p, f"{name}.attn.out", d, d, rng)
    init_layer_norm(p, f"{name}.ln2", d)
    init_linear(p, f"{name}.mlp.fc1", d, hidden, rng)
    init_linear(p, f"{name}.mlp.fc2", hidden, d, rng)


def linear(x, p: Params, name: str) -> Tensor:
    return add(matmul(x, p[f"{name}.w"]), p[f"{name}.b"])


def ln(x, p: Params, name: str) -> Tensor:
    return layer_norm(x, p[f"{name}.w"], p[f"{name}.b"])


def attention_bias(length: int, causal: bool, key_mask: np.ndarray | None) -> np.ndarray | None:
    """Additive (L, L) score bias; ``key_mask`` marks keys nobody may attend to."""
    if not causal and key_mask is None:
        return None
    bias = np.zeros((length, length))
    if causal:
        bias[np.triu_indices(length, k=1)] = NEG_INF
    if key_mask is not None:
        bias[:, np.asarray(key_mask, dtype=bool)] = NEG_INF
        # a masked query still needs one visible key to stay finite
        diag = np.arange(length)
        bias[diag, diag] = np.where(key_mask, 0.0, bias[diag, diag])
    return bias


def self_attention(x: Tensor, p: Params, name: str, n_heads: int, bias: np.ndarray | None) -> Tensor:
    b, length, d = x.shape
    dh = d // n_heads
    qkv = reshape(linear(x, p, f"{name}.qkv"), (b, length, 3, n_heads, dh))
    qkv = transpose(qkv, (2, 0, 3, 1, 4))
    q, k, v = getitem(qkv, 0), getitem(qkv, 1), getitem(qkv, 2)
    scores = scale(matmul(q, transpose(k, (0, 1, 3, 2))), 1.0 / math.sqrt(dh))
    if bias is not None:
        scores = add(scores, Tensor(bias))
    attn = softmax(scores, axis=-1)
    ctx = transpose(matmul(attn, v), (0, 2, 1, 3))
    return linear(reshape(ctx, (b, length, d)), p, f"{name}.out")


def block(x: Tensor, p: Params, name: str, n_heads: int, bias: np.ndarray | None) -> Tensor:
    x = add(x, self_attention(ln(x, p, f"{name}.ln1"), p, f"{name}.attn", n_heads, bias))
    h = gelu(linear(ln(x, p, f"{name}.ln2"), p, f"{name}.mlp.fc1"))
    return add(x, linear(h, p, f"{name}.mlp.fc2"))
