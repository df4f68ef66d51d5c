"""Deterministic per-class text descriptions (the diversity bank).

A fixed list of 64 hand-written templates is mixed with attribute sentences in
three styles (question answering, captioning, keyword sentences). Every string
mentions the class name exactly once.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

CANONICAL_TEMPLATE = "a point cloud of a {}."

MANUAL_TEMPLATES = [
    CANONICAL_TEMPLATE,
    "there is a {} in the scene.",
    "a 3d model of a {}.",
    "a point cloud of the {}.",
    "a sparse point cloud of a {}.",
    "a dense point cloud of a {}.",
    "a noisy point cloud of a {}.",
    "a clean point cloud of a {}.",
    "a scan of a {}.",
    "a lidar scan of a {}.",
    "a depth scan of the {}.",
    "a 3d scan of a {}.",
    "a rendering of a {}.",
    "a small {}.",
    "a large {}.",
    "a big {}.",
    "a tiny {}.",
    "the shape of a {}.",
    "an object shaped like a {}.",
    "a {} object.",
    "a 3d {}.",
    "a synthetic {}.",
    "a toy {}.",
    "a model {}.",
    "a point sample of a {}.",
    "points on the surface of a {}.",
    "a surface sampled from a {}.",
    "a cad model of a {}.",
    "a mesh of a {}.",
    "a wireframe of a {}.",
    "a digital {}.",
    "a virtual {}.",
    "a rotated {}.",
    "a tilted {}.",
    "a centered {}.",
    "a scaled {}.",
    "this is a {}.",
    "this is the {}.",
    "it is a {}.",
    "that looks like a {}.",
    "a picture of a {} in 3d.",
    "a cloud of points forming a {}.",
    "the geometry of a {}.",
    "the outline of a {}.",
    "the silhouette of a {}.",
    "the form of a {}.",
    "an example of a {}.",
    "one {}.",
    "a single {}.",
    "a typical {}.",
    "a simple {}.",
    "a plain {}.",
    "a real {}.",
    "a solid {}.",
    "a hollow {}.",
    "a partial {}.",
    "a complete {}.",
    "a {} seen from above.",
    "a {} seen from the side.",
    "a {} on the ground.",
    "a {} in the room.",
    "a {} in a 3d space.",
    "a sketch of a {}.",
    "a low resolution {}.",
]
assert len(MANUAL_TEMPLATES) == 64

ATTRIBUTES = {
    "capsule": ["rounded", "elongated", "smooth", "pill-like"],
    "cone": ["pointed", "tapered", "circular", "sloped"],
    "cross": ["plus-shaped", "symmetric", "flat", "four-armed"],
    "cube": ["boxy", "square", "angular", "flat-faced"],
    "cuboid": ["rectangular", "boxy", "elongated", "angular"],
    "cylinder": ["round", "straight", "tubular", "upright"],
    "disk-stack": ["layered", "stacked", "round", "flat"],
    "ellipsoid": ["oval", "smooth", "stretched", "rounded"],
    "helix": ["spiral", "twisted", "coiled", "thin"],
    "l-bracket": ["bent", "angular", "l-shaped", "flat"],
    "plane": ["flat", "thin", "wide", "square"],
    "pyramid": ["pointed", "triangular", "angular", "sloped"],
    "sphere": ["round", "smooth", "curved", "symmetric"],
    "star-prism": ["spiky", "pointed", "star-shaped", "angular"],
    "torus": ["ring-shaped", "round", "hollow", "curved"],
    "tube": ["hollow", "round", "open", "tubular"],
}
GENERIC_ATTRIBUTES = ["simple", "solid", "regular", "compact"]

QA_STYLE = [
    "what does a {cls} look like? it is {a} and {b}.",
    "q: describe the {cls}. a: a {a} shape.",
    "how would you describe a {cls}? {a} and {b}.",
]
CAPTION_STYLE = [
    "a {a} {cls} made of points.",
    "a {a} and {b} {cls}.",
    "a point cloud showing a {a} {cls}.",
]
KEYWORD_STYLE = [
    "{a} , {b} , {cls} .",
    "the {cls} is {a} and {b}.",
    "{a} surface of a {cls}.",
]


def attributes_for(class_name: str) -> list[str]:
    return ATTRIBUTES.get(class_name, GENERIC_ATTRIBUTES)


def candidate_pool(class_name: str) -> list[str]:
    """All descriptions the bank may draw for ``class_name`` (canonical first)."""
    pool = [t.format(class_name) for t in MANUAL_TEMPLATES]
    attrs = attributes_for(class_name)
    for styles in (QA_STYLE, CAPTION_STYLE, KEYWORD_STYLE):
        for tmpl in styles:
            for i, a in enumerate(attrs):
                b = attrs[(i + 1) % len(attrs)]
                pool.append(tmpl.format(cls=class_name, a=a, b=b))
    seen: set[str] = set()
    out = []
    for s in pool:
        if s not in seen:
            seen.add(s)
            out.append(s)
    return out


def build_description_bank(class_name: str, n_t: int = 10, seed: int = 0) -> list[str]:
    """``n_t`` distinct descriptions; the canonical template always comes first."""
    if n_t < 1:
        raise ValueError(f"n_t must be >= 1, got {n_t}")
    pool = candidate_pool(class_name)
    if n_t > len(pool):
        raise ValueError(f"n_t={n_t} exceeds the {len(pool)} available descriptions")
    if n_t == 1:
        return [pool[0]]
    rng = np.random.default_rng([seed, _stable_hash(class_name)])
    picks = rng.choice(np.arange(1, len(pool)), size=n_t - 1, replace=False)
    return [pool[0]] + [pool[i] for i in picks]


def manual_bank(class_name: str) -> list[str]:
    return [t.format(class_name) for t in MANUAL_TEMPLATES]


def _stable_hash(text: str) -> int:
    return int.from_bytes(text.encode("utf-8"), "little") % (2**31 - 1)


@dataclass
class DescriptionBank:
    entries: dict[str, list[str]] = field(default_factory=dict)

    @classmethod
    def build(cls, class_names, n_t: int = 10, seed: int = 0) -> "DescriptionBank":
        return cls({c: build_description_bank(c, n_t, seed) for c in class_names})

    def __getitem__(self, class_name: str) -> list[str]:
        return self.entries[class_name]

    def dumps(self) -> str:
        lines = []
        for name, descs in self.entries.items():
            lines.append(f"## {name}")
            lines.extend(descs)
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> "DescriptionBank":
        entries: dict[str, list[str]] = {}
        current = None
        for raw in text.splitlines():
            line = raw.strip()
            if not line:
                continue
            if line.startswith("## "):
                current = line[3:].strip()
                entries[current] = []
            elif current is None:
                raise ValueError(f"description before any '## <class>' header: {line!r}")
            else:
                entries[current].append(line)
        empty = [c for c, d in entries.items() if not d]
        if empty:
            raise ValueError(f"classes without descriptions: {empty}")
        return cls(entries)

    def save(self, path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def load(cls, path) -> "DescriptionBank":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


_TOKEN_RE = re.compile(r"[^\s.,?:!]+|[?:]")


def tokenize(text: str) -> list[str]:
    return _TOKEN_RE.findall(text.lower())
