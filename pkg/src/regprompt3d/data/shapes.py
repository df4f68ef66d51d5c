"""Sixteen parametric surface families standing in for real object classes.

Each family samples points on a surface in its own canonical frame. ``gen_shape``
then applies per-sample aspect jitter, pose and noise drawn from the seed, and
normalizes to the unit ball (centroid at the origin, max norm 1).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

MIN_POINTS = 64


@dataclass
class PointCloud:
    points: np.ndarray
    label: int = -1
    seed: int = 0
    class_name: str = ""

    @property
    def n_points(self) -> int:
        return len(self.points)

    def copy(self, points: np.ndarray | None = None) -> "PointCloud":
        pts = self.points.copy() if points is None else points
        return PointCloud(pts, self.label, self.seed, self.class_name)


def normalize_unit(points: np.ndarray) -> np.ndarray:
    centered = points - points.mean(axis=0)
    # second centering pass removes the rounding residue of the first
    centered = centered - centered.mean(axis=0)
    radius = np.sqrt((centered * centered).sum(axis=1)).max()
    if radius == 0:
        raise ValueError("degenerate point cloud: all points coincide")
    return centered / radius


# ---------------------------------------------------------------- primitives


def _sphere_dirs(rng, n):
    v = rng.normal(size=(n, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _disk(rng, n, radius=1.0):
    r = radius * np.sqrt(rng.uniform(size=n))
    t = rng.uniform(0, 2 * np.pi, size=n)
    return np.stack([r * np.cos(t), r * np.sin(t)], axis=1)


def _choose_parts(rng, n, areas):
    areas = np.asarray(areas, dtype=float)
    return rng.multinomial(n, areas / areas.sum())


def _box(rng, n, ext):
    ex, ey, ez = ext
    areas = [ey * ez, ey * ez, ex * ez, ex * ez, ex * ey, ex * ey]
    counts = _choose_parts(rng, n, areas)
    out = []
    for face, m in enumerate(counts):
        p = rng.uniform(-1, 1, size=(m, 3)) * np.array(ext)
        axis, sign = face // 2, (1 if face % 2 == 0 else -1)
        p[:, axis] = sign * ext[axis]
        out.append(p)
    return np.concatenate(out)


def _triangles(rng, n, tris):
    tris = np.asarray(tris, dtype=float)
    cross = np.cross(tris[:, 1] - tris[:, 0], tris[:, 2] - tris[:, 0])
    counts = _choose_parts(rng, n, np.linalg.norm(cross, axis=1))
    out = []
    for tri, m in zip(tris, counts):
        u, v = rng.uniform(size=(2, m))
        flip = u + v > 1
        u[flip], v[flip] = 1 - u[flip], 1 - v[flip]
        out.append(tri[0] + u[:, None] * (tri[1] - tri[0]) + v[:, None] * (tri[2] - tri[0]))
    return np.concatenate(out)


def _in_polygon(xy, poly):
    x, y = xy[:, 0], xy[:, 1]
    inside = np.zeros(len(xy), dtype=bool)
    j = len(poly) - 1
    for i in range(len(poly)):
        xi, yi = poly[i]
        xj, yj = poly[j]
        hit = ((yi > y) != (yj > y)) & (x < (xj - xi) * (y - yi) / (yj - yi + 1e-300) + xi)
        inside ^= hit
        j = i
    return inside


def _polygon_fill(rng, n, poly):
    poly = np.asarray(poly, dtype=float)
    lo, hi = poly.min(axis=0), poly.max(axis=0)
    out = np.empty((0, 2))
    while len(out) < n:
        cand = rng.uniform(lo, hi, size=(2 * n + 16, 2))
        out = np.concatenate([out, cand[_in_polygon(cand, poly)]])
    return out[:n]


def _prism(rng, n, poly, height):
    """Closed extrusion of a 2D polygon along z in [-height/2, height/2]."""
    poly = np.asarray(poly, dtype=float)
    edges = np.roll(poly, -1, axis=0) - poly
    lengths = np.linalg.norm(edges, axis=1)
    perim = lengths.sum()
    x, y = poly[:, 0], poly[:, 1]
    area = 0.5 * abs(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))
    n_side, n_cap = _choose_parts(rng, n, [perim * height, 2 * area])
    edge_idx = rng.choice(len(poly), size=n_side, p=lengths / perim)
    t = rng.uniform(size=n_side)
    side_xy = poly[edge_idx] + t[:, None] * edges[edge_idx]
    side = np.column_stack([side_xy, rng.uniform(-height / 2, height / 2, size=n_side)])
    cap_xy = _polygon_fill(rng, n_cap, poly)
    z = np.where(rng.uniform(size=n_cap) < 0.5, -height / 2, height / 2)
    return np.concatenate([side, np.column_stack([cap_xy, z])])


def _lateral(rng, n, radius_fn, z_lo, z_hi):
    z = rng.uniform(z_lo, z_hi, size=n)
    t = rng.uniform(0, 2 * np.pi, size=n)
    r = radius_fn(z)
    return np.column_stack([r * np.cos(t), r * np.sin(t), z])


# ---------------------------------------------------------------- families


def sphere(rng, n):
    return _sphere_dirs(rng, n)


def ellipsoid(rng, n):
    axes = np.array([rng.uniform(1.5, 2.0), rng.uniform(0.9, 1.1), rng.uniform(0.4, 0.6)])
    return _sphere_dirs(rng, n) * axes


def cube(rng, n, extent=1.0):
    return _box(rng, n, (extent, extent, extent))


def cuboid(rng, n):
    return _box(rng, n, (1.0, rng.uniform(0.45, 0.6), rng.uniform(0.2, 0.3)))


def cylinder(rng, n):
    r, h = 0.6, rng.uniform(0.9, 1.2)
    n_side, n_cap = _choose_parts(rng, n, [2 * np.pi * r * 2 * h, 2 * np.pi * r * r])
    side = _lateral(rng, n_side, lambda z: np.full_like(z, r), -h, h)
    cap = _disk(rng, n_cap, r)
    z = np.where(rng.uniform(size=n_cap) < 0.5, -h, h)
    return np.concatenate([side, np.column_stack([cap, z])])


def cone(rng, n):
    r, h = 0.8, rng.uniform(1.3, 1.7)
    slant = np.hypot(r, h)
    n_side, n_base = _choose_parts(rng, n, [np.pi * r * slant, np.pi * r * r])
    # area-uniform on the lateral surface: radius grows with sqrt of a uniform
    s = np.sqrt(rng.uniform(size=n_side))
    t = rng.uniform(0, 2 * np.pi, size=n_side)
    side = np.column_stack([r * s * np.cos(t), r * s * np.sin(t), h * (1 - s)])
    base = np.column_stack([_disk(rng, n_base, r), np.zeros(n_base)])
    return np.concatenate([side, base])


def torus(rng, n):
    big, small = 1.0, rng.uniform(0.25, 0.35)
    out = np.empty((0, 3))
    while len(out) < n:
        u = rng.uniform(0, 2 * np.pi, size=2 * n)
        v = rng.uniform(0, 2 * np.pi, size=2 * n)
        keep = rng.uniform(size=2 * n) < (big + small * np.cos(v)) / (big + small)
        u, v = u[keep], v[keep]
        ring = big + small * np.cos(v)
        out = np.concatenate([out, np.column_stack([ring * np.cos(u), ring * np.sin(u), small * np.sin(v)])])
    return out[:n]


def pyramid(rng, n):
    b, h = 1.0, rng.uniform(1.2, 1.6)
    c = [(-b, -b, 0), (b, -b, 0), (b, b, 0), (-b, b, 0)]
    apex = (0, 0, h)
    tris = [(c[0], c[1], c[2]), (c[0], c[2], c[3])]
    tris += [(c[i], c[(i + 1) % 4], apex) for i in range(4)]
    return _triangles(rng, n, tris)


def capsule(rng, n):
    r, h = 0.45, rng.uniform(0.8, 1.1)
    n_side, n_caps = _choose_parts(rng, n, [2 * np.pi * r * 2 * h, 4 * np.pi * r * r])
    side = _lateral(rng, n_side, lambda z: np.full_like(z, r), -h, h)
    d = _sphere_dirs(rng, n_caps) * r
    d[:, 2] += np.where(d[:, 2] >= 0, h, -h)
    return np.concatenate([side, d])


def plane(rng, n):
    p = rng.uniform(-1, 1, size=(n, 3))
    p[:, 1] *= rng.uniform(0.8, 1.0)
    p[:, 2] = 0.0
    return p


def helix(rng, n):
    turns, radius, pitch, tube = 3.0, 0.6, 0.5, 0.06
    t = rng.uniform(0, 2 * np.pi * turns, size=n)
    center = np.column_stack([radius * np.cos(t), radius * np.sin(t), pitch * t / (2 * np.pi)])
    return center + _sphere_dirs(rng, n) * tube


def _star(points=5, outer=1.0, inner=0.45):
    ang = np.pi / 2 + np.arange(2 * points) * np.pi / points
    rad = np.where(np.arange(2 * points) % 2 == 0, outer, inner)
    return np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])


def star_prism(rng, n):
    return _prism(rng, n, _star(inner=rng.uniform(0.38, 0.48)), rng.uniform(0.3, 0.45))


def l_bracket(rng, n):
    w = rng.uniform(0.25, 0.35)
    poly = [(0, 0), (1.0, 0), (1.0, w), (w, w), (w, 1.2), (0, 1.2)]
    return _prism(rng, n, poly, rng.uniform(0.5, 0.7))


def tube(rng, n):
    r, h, wall = 0.35, rng.uniform(1.6, 2.0), 0.08
    n_out, n_in = _choose_parts(rng, n, [r, r - wall])
    outer = _lateral(rng, n_out, lambda z: np.full_like(z, r), -h, h)
    inner = _lateral(rng, n_in, lambda z: np.full_like(z, r - wall), -h, h)
    return np.concatenate([outer, inner])


def disk_stack(rng, n, layers=3):
    gap = rng.uniform(0.45, 0.6)
    counts = _choose_parts(rng, n, np.ones(layers))
    out = []
    for i, m in enumerate(counts):
        z = (i - (layers - 1) / 2) * gap
        out.append(np.column_stack([_disk(rng, m, 1.0), np.full(m, z)]))
    return np.concatenate(out)


def cross(rng, n):
    a, w = 1.0, rng.uniform(0.22, 0.3)
    poly = [(-w, -a), (w, -a), (w, -w), (a, -w), (a, w), (w, w), (w, a), (-w, a), (-w, w), (-a, w),
            (-a, -w), (-w, -w)]
    return _prism(rng, n, poly, 2 * w)


@dataclass(frozen=True)
class ShapeFamily:
    name: str
    sampler: Callable = field(repr=False)
    aspect_jitter: float = 0.1
    noise_std: tuple[float, float] = (0.004, 0.01)
    max_yaw_deg: float = 45.0
    max_tilt_deg: float = 10.0

    def sample_surface(self, rng: np.random.Generator, n: int) -> np.ndarray:
        pts = self.sampler(rng, n)
        if len(pts) != n:
            raise AssertionError(f"{self.name} sampler returned {len(pts)} points, expected {n}")
        return pts


FAMILIES: dict[str, ShapeFamily] = {
    f.name: f
    for f in [
        ShapeFamily("capsule", capsule),
        ShapeFamily("cone", cone),
        ShapeFamily("cross", cross),
        ShapeFamily("cube", cube),
        ShapeFamily("cuboid", cuboid),
        ShapeFamily("cylinder", cylinder),
        ShapeFamily("disk-stack", disk_stack),
        ShapeFamily("ellipsoid", ellipsoid),
        ShapeFamily("helix", helix),
        ShapeFamily("l-bracket", l_bracket),
        ShapeFamily("plane", plane),
        ShapeFamily("pyramid", pyramid),
        ShapeFamily("sphere", sphere, aspect_jitter=0.0),
        ShapeFamily("star-prism", star_prism),
        ShapeFamily("torus", torus),
        ShapeFamily("tube", tube),
    ]
}
FAMILY_NAMES = sorted(FAMILIES)


def rotation_matrix(axis: np.ndarray, angle: float) -> np.ndarray:
    """Rodrigues rotation about a (not necessarily unit) axis."""
    axis = np.asarray(axis, dtype=float)
    axis = axis / np.linalg.norm(axis)
    k = np.array([[0, -axis[2], axis[1]], [axis[2], 0, -axis[0]], [-axis[1], axis[0], 0]])
    return np.eye(3) + np.sin(angle) * k + (1 - np.cos(angle)) * (k @ k)


@dataclass(frozen=True)
class DomainStyle:
    """Generation-time shift applied on top of a family (for cross-domain targets)."""

    name: str = "clean"
    noise_scale: float = 1.0
    aspect_scale: float = 1.0
    keep_fraction: float = 1.0
    extra_yaw_deg: float = 0.0


CLEAN = DomainStyle()


def gen_shape(family: str | ShapeFamily, seed: int, n: int = 1024, label: int = -1,
              style: DomainStyle = CLEAN, noise: bool = True) -> PointCloud:
    """One normalized cloud of ``n`` points, a pure function of its arguments."""
    if n < MIN_POINTS:
        raise ValueError(f"n must be >= {MIN_POINTS}, got {n}")
    if isinstance(family, str):
        if family not in FAMILIES:
            raise ValueError(f"unknown shape family {family!r}; known: {FAMILY_NAMES}")
        family = FAMILIES[family]
    rng = np.random.default_rng(seed)
    n_raw = int(np.ceil(n / style.keep_fraction)) if style.keep_fraction < 1 else n
    pts = family.sample_surface(rng, n_raw)
    jit = family.aspect_jitter * style.aspect_scale
    pts = pts * rng.uniform(1 - jit, 1 + jit, size=3) if jit else pts
    yaw = np.deg2rad(rng.uniform(-1, 1) * (family.max_yaw_deg + style.extra_yaw_deg))
    tilt_axis = np.array([*rng.normal(size=2), 0.0])
    tilt = np.deg2rad(rng.uniform(-1, 1) * family.max_tilt_deg)
    rot = rotation_matrix(tilt_axis, tilt) @ rotation_matrix([0, 0, 1], yaw)
    pts = pts @ rot.T
    if style.keep_fraction < 1:
        # occlusion-like crop: keep the n points farthest along -view
        view = _sphere_dirs(rng, 1)[0]
        pts = pts[np.argsort(pts @ view, kind="stable")[:n]]
    if noise:
        std = rng.uniform(*family.noise_std) * style.noise_scale
        pts = pts + rng.normal(0.0, std, size=pts.shape) * _extent(pts)
    return PointCloud(normalize_unit(pts), label=label, seed=seed, class_name=family.name)


def _extent(pts):
    return np.sqrt((pts * pts).sum(axis=1)).max()
