"""Deep learnable prompts for the point and text branches.

Point prompts sit after the last patch token; text prompts sit between the
class token and eos. For the first ``depth`` layers the prompt slots are
overwritten with that layer's fresh prompts; deeper layers carry the slot
activations forward like any other token.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass, field

import numpy as np

from .autodiff import Tensor, broadcast_rows, splice

BRANCHES = ("point", "text")


@dataclass
class PromptSet:
    depth: int
    point: list[Tensor] = field(default_factory=list)
    text: list[Tensor] = field(default_factory=list)

    @property
    def point_length(self) -> int:
        return self.point[0].shape[0] if self.point else 0

    @property
    def text_length(self) -> int:
        return self.text[0].shape[0] if self.text else 0

    @property
    def dim(self) -> int:
        return (self.point or self.text)[0].shape[1]

    def tensors(self) -> list[Tensor]:
        return list(self.point) + list(self.text)

    def named(self) -> dict[str, Tensor]:
        out = {f"point.{i}": t for i, t in enumerate(self.point)}
        out.update({f"text.{i}": t for i, t in enumerate(self.text)})
        return out

    def n_parameters(self) -> int:
        return sum(t.size for t in self.tensors())

    def flat(self) -> np.ndarray:
        return np.concatenate([t.data.reshape(-1) for t in self.tensors()])

    def load_flat(self, vec: np.ndarray) -> None:
        vec = np.asarray(vec, dtype=np.float64)
        if vec.size != self.n_parameters():
            raise ValueError(f"flat vector has {vec.size} entries, expected {self.n_parameters()}")
        pos = 0
        for t in self.tensors():
            t.data = vec[pos:pos + t.size].reshape(t.shape).copy()
            pos += t.size

    def snapshot(self) -> "PromptSet":
        return copy.deepcopy(self)

    def branch(self, name: str) -> list[Tensor]:
        if name not in BRANCHES:
            raise ValueError(f"unknown branch {name!r}")
        return self.point if name == "point" else self.text


def init_prompt_set(depth: int, r: int, s: int, d: int, seed: int, n_blocks: int = 12,
                    std: float = 0.02) -> PromptSet:
    """Seeded Gaussian prompts, ``depth`` layers of r point / s text tokens of width d."""
    if not 1 <= depth <= n_blocks:
        raise ValueError(f"prompt depth {depth} must be in [1, {n_blocks}]")
    if r < 1 or s < 1 or d < 1:
        raise ValueError(f"prompt lengths and width must be positive (r={r}, s={s}, d={d})")
    rng = np.random.default_rng(seed)
    point = [Tensor(rng.normal(0.0, std, (r, d)), requires_grad=True, name=f"prompt.point.{i}")
             for i in range(depth)]
    text = [Tensor(rng.normal(0.0, std, (s, d)), requires_grad=True, name=f"prompt.text.{i}")
            for i in range(depth)]
    return PromptSet(depth=depth, point=point, text=text)


def prompt_slot(base_len: int, branch: str) -> int:
    """Index of the first prompt slot for a sequence of ``base_len`` real tokens."""
    if branch == "point":
        return base_len
    if branch == "text":
        return base_len - 1
    raise ValueError(f"unknown branch {branch!r}")


def inject_prompts(x: Tensor, layer_idx: int, prompts: list[Tensor], branch: str, base_len: int,
                   n_blocks: int = 12) -> Tensor:
    """Sequence entering block ``layer_idx`` after deep-prompt handling.

    ``prompts`` is one (n, d) matrix per prompted layer. Layer 0 inserts the
    slots; layers ``1..len(prompts)-1`` overwrite them; later layers pass
    ``x`` through unchanged.
    """
    if not 0 <= layer_idx < n_blocks:
        raise ValueError(f"layer_idx {layer_idx} outside [0, {n_blocks})")
    if not prompts:
        return x
    width = prompts[0].shape[0]
    start = prompt_slot(base_len, branch)
    if layer_idx == 0:
        if x.shape[1] != base_len:
            raise ValueError(f"layer 0 expects {base_len} tokens, got {x.shape[1]}")
        return splice(x, start, 0, broadcast_rows(prompts[0], x.shape[0]))
    if x.shape[1] != base_len + width:
        raise ValueError(
            f"layer {layer_idx} expects {base_len + width} tokens (prompt slots included), got {x.shape[1]}")
    if layer_idx >= len(prompts):
        return x
    return splice(x, start, width, broadcast_rows(prompts[layer_idx], x.shape[0]))


def prompt_key_mask(base_len: int, width: int, branch: str) -> np.ndarray:
    """Boolean mask over the extended sequence marking the prompt slots."""
    mask = np.zeros(base_len + width, dtype=bool)
    start = prompt_slot(base_len, branch)
    mask[start:start + width] = True
    return mask
