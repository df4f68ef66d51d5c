"""Benchmark split construction: base-to-new, few-shot, cross-domain, corruption."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .corruptions import KINDS
from .manifest import (
    NS_PRETRAIN,
    NS_TARGET,
    NS_TEST,
    NS_TRAIN,
    SampleRecord,
    derive_seed,
    make_records,
)
from .shapes import FAMILY_NAMES

SHOTS = (1, 2, 4, 8, 16)
SPLIT_KINDS = ("base_to_new", "few_shot", "cross_domain", "corruption")


@dataclass
class BenchmarkSplit:
    kind: str
    classes: list[str]
    manifests: dict[str, list[SampleRecord]]
    base_classes: list[str] = field(default_factory=list)
    new_classes: list[str] = field(default_factory=list)
    shots: int | None = None
    targets: dict[str, list[str]] = field(default_factory=dict)
    label_map: dict[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in SPLIT_KINDS:
            raise ValueError(f"unknown split kind {self.kind!r}")

    @property
    def train_classes(self) -> list[str]:
        return self.base_classes if self.kind == "base_to_new" else self.classes

    def counts(self) -> dict[str, int]:
        return {k: len(v) for k, v in self.manifests.items()}


@dataclass(frozen=True)
class DatasetSpec:
    """Sizes and seed for one synthetic dataset (a class list over the shape families)."""

    classes: tuple[str, ...] = tuple(FAMILY_NAMES)
    train_per_class: int = 40
    test_per_class: int = 20
    n_points: int = 1024
    seed: int = 0


def family_of(name: str) -> str:
    if name in FAMILY_NAMES:
        return name
    raise ValueError(f"class {name!r} is not backed by a shape family")


def build_dataset(spec: DatasetSpec) -> list[SampleRecord]:
    """Original train + test manifest; split tags ``train`` and ``test``."""
    classes = list(spec.classes)
    return (make_records(classes, family_of, spec.train_per_class, "train", spec.seed, NS_TRAIN, spec.n_points)
            + make_records(classes, family_of, spec.test_per_class, "test", spec.seed, NS_TEST, spec.n_points))


def pretrain_records(per_class: int = 256, seed: int = 0, n_points: int = 1024) -> list[SampleRecord]:
    return make_records(FAMILY_NAMES, family_of, per_class, "pretrain", seed, NS_PRETRAIN, n_points)


def canonical_order(classes) -> list[str]:
    return sorted(classes)


def split_base_new(classes, manifest: list[SampleRecord], val_fraction: float = 0.2,
                   seed: int = 0) -> BenchmarkSplit:
    """First ceil(C/2) classes (alphabetical) are base; the rest only appear in test."""
    classes = canonical_order(classes)
    c = len(classes)
    if c < 2:
        raise ValueError(f"base-to-new needs at least 2 classes, got {c}")
    n_base = math.ceil(c / 2)
    base, new = classes[:n_base], classes[n_base:]
    train, val = _train_val(manifest, base, val_fraction, seed)
    manifests = {
        "train": train,
        "val": val,
        "test_base": [r for r in manifest if r.split == "test" and r.class_name in base],
        "test_new": [r for r in manifest if r.split == "test" and r.class_name in new],
    }
    return BenchmarkSplit("base_to_new", classes, manifests, base_classes=base, new_classes=new)


def split_train_test(classes, manifest: list[SampleRecord], kind: str = "few_shot",
                     val_fraction: float = 0.2, seed: int = 0) -> BenchmarkSplit:
    classes = canonical_order(classes)
    train, val = _train_val(manifest, classes, val_fraction, seed)
    test = [r for r in manifest if r.split == "test" and r.class_name in classes]
    return BenchmarkSplit(kind, classes, {"train": train, "val": val, "test": test})


def _train_val(manifest, classes, val_fraction, seed):
    """Per-class random 20% of the original train records become val."""
    train, val = [], []
    for ci, name in enumerate(classes):
        recs = [r for r in manifest if r.split == "train" and r.class_name == name]
        rng = np.random.default_rng(derive_seed(seed, 11, ci))
        perm = rng.permutation(len(recs))
        n_val = int(round(val_fraction * len(recs)))
        val_idx = set(perm[:n_val].tolist())
        for i, r in enumerate(recs):
            (val if i in val_idx else train).append(replace(r, split="val" if i in val_idx else "train"))
    return train, val


def sample_few_shot(split: BenchmarkSplit, k: int, seed: int) -> BenchmarkSplit:
    """Keep k train records per training class, seeded and without replacement."""
    if k not in SHOTS:
        raise ValueError(f"shots must be one of {SHOTS}, got {k}")
    train = split.manifests["train"]
    picked = []
    for ci, name in enumerate(split.train_classes):
        recs = [r for r in train if r.class_name == name]
        if len(recs) < k:
            raise ValueError(f"class {name!r} has {len(recs)} train samples, fewer than k={k}")
        rng = np.random.default_rng(derive_seed(seed, 13, k, ci))
        idx = np.sort(rng.choice(len(recs), size=k, replace=False))
        picked.extend(recs[i] for i in idx)
    manifests = dict(split.manifests)
    manifests["train"] = picked
    return replace(split, manifests=manifests, shots=k)


def target_records(classes, domain: str, per_class: int, seed: int, n_points: int = 1024) -> list[SampleRecord]:
    return make_records(canonical_order(classes), family_of, per_class, "test", derive_seed(seed, _tag(domain)),
                        NS_TARGET, n_points, domain=domain)


def _tag(text: str) -> int:
    return sum((i + 1) * b for i, b in enumerate(text.encode("utf-8")))


def cross_domain_config(source: BenchmarkSplit, targets: dict[str, list[SampleRecord]],
                        label_map: dict[str, str] | None = None) -> BenchmarkSplit:
    """Train on ``source`` only; each target is evaluated over its own class list."""
    label_map = dict(label_map or {})
    target_classes = {name: canonical_order({r.class_name for r in recs}) for name, recs in targets.items()}
    known_targets = set().union(*target_classes.values()) if target_classes else set()
    for tgt, src in label_map.items():
        if tgt not in known_targets:
            raise ValueError(f"label_map key {tgt!r} is not a target class")
        if src not in source.classes:
            raise ValueError(f"label_map value {src!r} is not a source class")
    manifests = {k: v for k, v in source.manifests.items()}
    for name, recs in targets.items():
        manifests[f"target:{name}"] = list(recs)
    return BenchmarkSplit("cross_domain", list(source.classes), manifests, shots=source.shots,
                          targets=target_classes, label_map=label_map)


def corruption_config(source: BenchmarkSplit, severity: int = 2, kinds=KINDS) -> BenchmarkSplit:
    """Clean training; one test manifest per corruption kind at ``severity``."""
    manifests = {k: v for k, v in source.manifests.items()}
    for kind in kinds:
        manifests[f"corrupt:{kind}"] = [replace(r, corruption=kind, severity=severity)
                                        for r in source.manifests["test"]]
    return BenchmarkSplit("corruption", list(source.classes), manifests, shots=source.shots)
