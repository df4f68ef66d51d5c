"""Seven atomic point-cloud corruptions with an integer severity 0..4.

Magnitudes grow linearly with severity ``s``:

==============  ==========================================================
add_global      10*s uniform outliers in the [-1, 1]^3 bounding cube
add_local       10*s points, N(anchor, 0.05^2) around ceil(s) surface anchors
drop_global     floor(12.5*s)% of points removed uniformly
drop_local      the k-NN cluster of floor(12.5*s)% points around one anchor
rotate          random axis, angle uniform in [0, 15*s] degrees
scale           per-axis factors uniform in [1/(1+0.1s), 1+0.1s]
jitter          N(0, (0.01*s)^2) per coordinate
==============  ==========================================================

Severity 0 returns an exact copy for every kind.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .shapes import MIN_POINTS, PointCloud, rotation_matrix

KINDS = ("add_global", "add_local", "drop_global", "drop_local", "rotate", "scale", "jitter")


@dataclass(frozen=True)
class CorruptionSpec:
    kind: str
    severity: int = 2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown corruption {self.kind!r}; known: {KINDS}")
        if not 0 <= int(self.severity) <= 4 or int(self.severity) != self.severity:
            raise ValueError(f"severity must be an integer in 0..4, got {self.severity}")


def drop_percent(severity: int) -> int:
    return math.floor(12.5 * severity)


def corrupt(pc: PointCloud, spec: CorruptionSpec) -> PointCloud:
    s = spec.severity
    if s == 0:
        return pc.copy()
    rng = np.random.default_rng([spec.seed, KINDS.index(spec.kind)])
    pts = pc.points
    n = len(pts)
    kind = spec.kind

    if kind == "add_global":
        out = np.concatenate([pts, rng.uniform(-1, 1, size=(10 * s, 3))])
    elif kind == "add_local":
        n_anchor = math.ceil(s)
        anchors = pts[rng.choice(n, size=n_anchor, replace=False)]
        owner = np.arange(10 * s) % n_anchor
        out = np.concatenate([pts, anchors[owner] + rng.normal(0.0, 0.05, size=(10 * s, 3))])
    elif kind in ("drop_global", "drop_local"):
        n_drop = n * drop_percent(s) // 100
        if n - n_drop < MIN_POINTS:
            raise ValueError(f"{kind} at severity {s} leaves {n - n_drop} points (< {MIN_POINTS})")
        if kind == "drop_global":
            drop = rng.choice(n, size=n_drop, replace=False)
        else:
            anchor = pts[rng.integers(n)]
            d2 = ((pts - anchor) ** 2).sum(axis=1)
            drop = np.argsort(d2, kind="stable")[:n_drop]
        keep = np.ones(n, dtype=bool)
        keep[drop] = False
        out = pts[keep]
    elif kind == "rotate":
        axis = rng.normal(size=3)
        angle = np.deg2rad(rng.uniform(0.0, 15.0 * s))
        out = pts @ rotation_matrix(axis, angle).T
    elif kind == "scale":
        hi = 1 + 0.1 * s
        out = pts * rng.uniform(1 / hi, hi, size=3)
    else:  # jitter
        out = pts + rng.normal(0.0, 0.01 * s, size=pts.shape)
    return pc.copy(out)
