"""Farthest-point sampling and k-NN patch grouping."""

from __future__ import annotations

import numpy as np


def lexsorted(points: np.ndarray) -> np.ndarray:
    """Points reordered by (x, y, z); makes grouping independent of input order."""
    order = np.lexsort((points[:, 2], points[:, 1], points[:, 0]))
    return points[order]


def farthest_point_sample(points: np.ndarray, n_centers: int) -> np.ndarray:
    """Indices of ``n_centers`` FPS centers.

    The first center is the point of largest norm; ties resolve to the lowest
    index, so callers wanting order-independence pass lexsorted points.
    """
    n = len(points)
    if n_centers > n:
        raise ValueError(f"cannot pick {n_centers} centers from {n} points")
    chosen = np.empty(n_centers, dtype=np.int64)
    chosen[0] = int(np.argmax((points * points).sum(axis=1)))
    dist = ((points - points[chosen[0]]) ** 2).sum(axis=1)
    for i in range(1, n_centers):
        chosen[i] = int(np.argmax(dist))
        dist = np.minimum(dist, ((points - points[chosen[i]]) ** 2).sum(axis=1))
    return chosen


def knn(points: np.ndarray, queries: np.ndarray, k: int) -> np.ndarray:
    """(Q, k) indices of the k nearest points per query, stable on ties."""
    if k > len(points):
        raise ValueError(f"k={k} exceeds the number of points ({len(points)})")
    d2 = ((queries[:, None, :] - points[None, :, :]) ** 2).sum(axis=-1)
    return np.argsort(d2, axis=1, kind="stable")[:, :k]


def group_patches(points: np.ndarray, n_patches: int, k: int) -> tuple[np.ndarray, np.ndarray]:
    """Return (centers (u, 3), neighbor offsets (u, k, 3)) for one cloud."""
    if len(points) < k:
        raise ValueError(f"point cloud has {len(points)} points, fewer than k={k}")
    pts = lexsorted(np.asarray(points, dtype=np.float64))
    centers = pts[farthest_point_sample(pts, n_patches)]
    idx = knn(pts, centers, k)
    return centers, pts[idx] - centers[:, None, :]
