"""Benchmark protocols: base-to-new, cross-domain, corruption, few-shot, ablation.

Every protocol trains one PromptSet per seed, evaluates it next to the frozen
zero-shot model and aggregates over seeds. Per-seed rows carry the epoch
curves; wall-clock goes to ``MetricsReport.wall_clock`` only.
"""

from __future__ import annotations

import itertools
import logging
import time
from dataclasses import replace

import numpy as np

from ..data.corruptions import KINDS
from ..data.manifest import DOMAINS, derive_seed
from ..data.shapes import FAMILY_NAMES
from ..data.splits import (
    SHOTS,
    BenchmarkSplit,
    DatasetSpec,
    build_dataset,
    corruption_config,
    cross_domain_config,
    sample_few_shot,
    split_base_new,
    split_train_test,
    target_records,
)
from ..encoders import DualEncoder
from .config import RunConfig
from .features import TokenCache, labels_for
from .metrics import aggregate, harmonic_mean
from .report import MetricsReport
from .surrogate import get_surrogate
from .training import TrainData, evaluate, train_prompts

log = logging.getLogger(__name__)

TARGET_DOMAINS = tuple(d for d in DOMAINS if d != "clean")


def dataset_for(cfg: RunConfig) -> list:
    spec = DatasetSpec(classes=tuple(cfg.classes), train_per_class=cfg.train_per_class,
                       test_per_class=cfg.test_per_class, n_points=cfg.n_points, seed=cfg.data_seed)
    return build_dataset(spec)


def build_split(cfg: RunConfig) -> BenchmarkSplit:
    """The protocol's split before shot sampling (which depends on the seed)."""
    manifest = dataset_for(cfg)
    if cfg.kind == "base_to_new":
        return split_base_new(cfg.classes, manifest, seed=cfg.data_seed)
    source = split_train_test(cfg.classes, manifest, kind="few_shot", seed=cfg.data_seed)
    if cfg.kind == "corruption":
        return corruption_config(source, cfg.severity)
    if cfg.kind == "cross_domain":
        return cross_domain_config(source, cross_domain_targets(cfg))
    return source


def cross_domain_targets(cfg: RunConfig) -> dict[str, list]:
    """One target set per domain style, each over its own seeded class subset."""
    out = {}
    for i, domain in enumerate(TARGET_DOMAINS):
        rng = np.random.default_rng(derive_seed(cfg.data_seed, 41, i))
        classes = sorted(rng.choice(FAMILY_NAMES, size=cfg.target_classes, replace=False).tolist())
        out[domain] = target_records(classes, domain, cfg.target_per_class, cfg.data_seed, cfg.n_points)
    return out


def train_data(cache: TokenCache, split: BenchmarkSplit, cfg: RunConfig) -> TrainData:
    classes = split.train_classes
    train, val = split.manifests["train"], split.manifests.get("val", [])
    return TrainData(
        tokens=cache.get(train),
        labels=labels_for(train, classes),
        class_names=list(classes),
        val_tokens=cache.get(val) if cfg.track_val else None,
        val_labels=labels_for(val, classes) if cfg.track_val else None,
    )


def _acc(cache: TokenCache, prompts, records, classes) -> float:
    return evaluate(cache.encoder, prompts, cache.get(records), labels_for(records, classes), classes)


def _curve(history: list[dict]) -> list[dict]:
    return [{k: v for k, v in row.items() if k != "seconds"} for row in history]


# ---------------------------------------------------------------- one seed per protocol


def _seed_split(split: BenchmarkSplit, seed: int, shots: int | None) -> BenchmarkSplit:
    return sample_few_shot(split, shots, seed) if shots else split


def seed_base_to_new(cache, split, cfg, seed):
    sp = _seed_split(split, seed, cfg.shots)
    res = train_prompts(cache.encoder, train_data(cache, sp, cfg), cfg, seed)
    row = {"seed": seed, "steps": res.steps, "final_terms": res.final_terms,
           "curves": {"train": _curve(res.history)}}
    for name, prompts in (("zero_shot", None), ("tuned", res.prompts)):
        base = _acc(cache, prompts, sp.manifests["test_base"], sp.base_classes)
        new = _acc(cache, prompts, sp.manifests["test_new"], sp.new_classes)
        row[name] = {"base": base, "new": new, "hm": harmonic_mean(base, new)}
    return row, [r["seconds"] for r in res.history]


def seed_corruption(cache, split, cfg, seed):
    sp = _seed_split(split, seed, cfg.shots)
    res = train_prompts(cache.encoder, train_data(cache, sp, cfg), cfg, seed)
    row = {"seed": seed, "steps": res.steps, "curves": {"train": _curve(res.history)}}
    for name, prompts in (("zero_shot", None), ("tuned", res.prompts)):
        per = {k: _acc(cache, prompts, sp.manifests[f"corrupt:{k}"], sp.classes) for k in KINDS}
        row[name] = {"clean": _acc(cache, prompts, sp.manifests["test"], sp.classes),
                     "corruptions": per, "average": float(np.mean(list(per.values())))}
    return row, [r["seconds"] for r in res.history]


def seed_cross_domain(cache, split, cfg, seed):
    sp = _seed_split(split, seed, cfg.shots)
    res = train_prompts(cache.encoder, train_data(cache, sp, cfg), cfg, seed)
    row = {"seed": seed, "steps": res.steps, "curves": {"train": _curve(res.history)}}
    for name, prompts in (("zero_shot", None), ("tuned", res.prompts)):
        per = {t: _acc(cache, prompts, sp.manifests[f"target:{t}"], classes) for t, classes in sp.targets.items()}
        row[name] = {"source": _acc(cache, prompts, sp.manifests["test"], sp.classes),
                     "targets": per, "average": float(np.mean(list(per.values())))}
    return row, [r["seconds"] for r in res.history]


def seed_few_shot(cache, split, cfg, seed):
    row = {"seed": seed, "steps": {}, "curves": {}, "tuned": {},
           "zero_shot": _acc(cache, None, split.manifests["test"], split.classes)}
    seconds = []
    for k in SHOTS:
        sp = sample_few_shot(split, k, seed)
        res = train_prompts(cache.encoder, train_data(cache, sp, cfg), cfg, seed)
        row["tuned"][str(k)] = _acc(cache, res.prompts, sp.manifests["test"], sp.classes)
        row["steps"][str(k)] = res.steps
        row["curves"][f"shots={k}"] = _curve(res.history)
        seconds.extend(r["seconds"] for r in res.history)
    return row, seconds


SEED_RUNNERS = {
    "base_to_new": seed_base_to_new,
    "corruption": seed_corruption,
    "cross_domain": seed_cross_domain,
    "few_shot": seed_few_shot,
}


# ---------------------------------------------------------------- aggregation


def _agg_tree(rows: list, path: tuple):
    """Aggregate the leaf at ``path`` (or every leaf below it) across seeds."""
    values = [_get(r, path) for r in rows]
    if isinstance(values[0], dict):
        return {k: _agg_tree(rows, path + (k,)) for k in values[0]}
    return aggregate(values)


def _get(d, path):
    for k in path:
        d = d[k]
    return d


def run_benchmark(cfg: RunConfig, encoder: DualEncoder | None = None, cache: TokenCache | None = None,
                  progress=None) -> MetricsReport:
    """Run ``cfg.kind`` over every seed and aggregate."""
    cfg = cfg.resolved()
    encoder = encoder or get_surrogate()
    cache = cache or TokenCache(encoder)
    if cache.encoder is not encoder:
        raise ValueError("token cache belongs to a different encoder")
    split = build_split(cfg)
    if split.kind != cfg.kind:
        raise ValueError(f"protocol {cfg.kind!r} does not match split kind {split.kind!r}")
    runner = SEED_RUNNERS[cfg.kind]
    rows, wall = [], {}
    for seed in cfg.seeds:
        t0 = time.perf_counter()
        row, epoch_seconds = runner(cache, split, cfg, seed)
        rows.append(row)
        wall[str(seed)] = {"total_seconds": time.perf_counter() - t0, "epoch_seconds": epoch_seconds}
        if progress is not None:
            progress(f"{cfg.kind} seed {seed} done in {wall[str(seed)]['total_seconds']:.0f}s")
    agg = {name: _agg_tree(rows, (name,)) for name in ("zero_shot", "tuned")}
    timing = {"epochs": cfg.epochs, "seeds": len(cfg.seeds),
              "steps": {str(r["seed"]): r["steps"] for r in rows}, "wall_clock_file": "timing.json"}
    return MetricsReport(cfg.kind, cfg.to_dict(), rows, agg, timing, wall)


ABLATION_GRID = tuple(itertools.product((False, True), repeat=3))


def run_ablation(cfg: RunConfig, encoder: DualEncoder | None = None, cache: TokenCache | None = None,
                 progress=None) -> MetricsReport:
    """Base-to-new for all eight MAC/TDC/MEC combinations."""
    cfg = replace(cfg, kind="base_to_new").resolved()
    encoder = encoder or get_surrogate()
    cache = cache or TokenCache(encoder)
    per_seed: dict[int, dict] = {s: {"seed": s, "runs": {}, "curves": {}} for s in cfg.seeds}
    table, wall = [], {}
    for mac, tdc, mec in ABLATION_GRID:
        name = f"mac={int(mac)},tdc={int(tdc)},mec={int(mec)}"
        sub = run_benchmark(replace(cfg, mac=mac, tdc=tdc, mec=mec), encoder, cache, progress)
        for row in sub.per_seed:
            entry = per_seed[row["seed"]]
            entry["runs"][name] = row["tuned"]
            entry.setdefault("zero_shot", row["zero_shot"])
            entry["curves"][name] = row["curves"]["train"]
        table.append({"mac": mac, "tdc": tdc, "mec": mec, **sub.aggregate["tuned"]})
        wall[name] = sub.wall_clock
    agg = {"rows": table, "zero_shot": _agg_tree(list(per_seed.values()), ("zero_shot",))}
    timing = {"epochs": cfg.epochs, "seeds": len(cfg.seeds), "runs": len(ABLATION_GRID),
              "wall_clock_file": "timing.json"}
    return MetricsReport("ablation", cfg.to_dict(), list(per_seed.values()), agg, timing, wall)
