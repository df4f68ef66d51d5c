"""Accuracy, harmonic mean and seed aggregation."""

from __future__ import annotations

import math
from collections.abc import Iterable

import numpy as np


def accuracy(predictions, labels) -> float:
    """Percent correct."""
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if pred.shape != lab.shape:
        raise ValueError(f"predictions {pred.shape} and labels {lab.shape} differ in shape")
    if pred.size == 0:
        raise ValueError("empty prediction set")
    return 100.0 * float(np.count_nonzero(pred == lab)) / pred.size


def harmonic_mean(base: float, new: float) -> float:
    """2bn / (b + n); zero when both are zero."""
    if base < 0 or new < 0:
        raise ValueError(f"accuracies must be non-negative, got {base}, {new}")
    if base + new == 0:
        return 0.0
    return 2.0 * base * new / (base + new)


def aggregate(values: Iterable[float]) -> dict:
    """Mean and population std over seeds; std is left out for a single seed."""
    vals = [float(v) for v in values]
    if not vals:
        raise ValueError("nothing to aggregate")
    out = {"mean": float(np.mean(vals)), "n": len(vals)}
    if len(vals) >= 2:
        out["std"] = float(np.std(vals))
    return out


def pooled_std(a: dict, b: dict) -> float:
    """sqrt of the mean of two seed variances (0 when either lacks a std)."""
    return math.sqrt((a.get("std", 0.0) ** 2 + b.get("std", 0.0) ** 2) / 2)


def compute_metrics(predictions, labels, grouping=None, class_names=None) -> dict:
    """Overall accuracy, plus per-group accuracies and their HM for a base/new grouping.

    ``grouping`` maps group name to the label indices it owns, e.g.
    ``{"base": [0, 1], "new": [2, 3]}``. With exactly the groups base and
    new the harmonic mean is added as ``hm``.
    """
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    out = {"accuracy": accuracy(pred, lab), "n": int(lab.size)}
    if class_names is not None:
        bad = set(np.unique(lab).tolist()) - set(range(len(class_names)))
        if bad:
            raise ValueError(f"labels {sorted(bad)} outside the {len(class_names)}-class set")
    if grouping:
        for name, members in grouping.items():
            mask = np.isin(lab, list(members))
            out[name] = accuracy(pred[mask], lab[mask])
        if set(grouping) == {"base", "new"}:
            out["hm"] = harmonic_mean(out["base"], out["new"])
    return out
