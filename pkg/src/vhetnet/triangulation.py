"""
Delaunay triangulation of base-station positions and CoMP cluster lookup.

Each Delaunay triangle is one cooperating set: users inside it are served by
its three vertices. Built by Bowyer-Watson insertion with adaptive exact
predicates (floating-point filter, rational fallback).
"""

from __future__ import annotations

import logging
from collections.abc import Sequence
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .exceptions import DegenerateTriangulationError
from .types import FloatArray

logger = logging.getLogger(__name__)

# Shewchuk's first-stage error bounds
_EPS = np.finfo(float).eps / 2
_ORIENT_BOUND = (3 + 16 * _EPS) * _EPS
_INCIRCLE_BOUND = (10 + 96 * _EPS) * _EPS
SUPER_SCALE = 1e5


# ========== Predicates ==========


def _sign(x) -> int:
    return (x > 0) - (x < 0)


def orient2d(a: Sequence[float], b: Sequence[float], c: Sequence[float]) -> int:
    """+1 if a, b, c turn counter-clockwise, -1 if clockwise, 0 if collinear."""
    left = (a[0] - c[0]) * (b[1] - c[1])
    right = (a[1] - c[1]) * (b[0] - c[0])
    det = left - right
    if abs(det) > _ORIENT_BOUND * (abs(left) + abs(right)):
        return _sign(det)
    ax, ay, bx, by, cx, cy = (Fraction(v) for v in (a[0], a[1], b[0], b[1], c[0], c[1]))
    return _sign((ax - cx) * (by - cy) - (ay - cy) * (bx - cx))


def incircle(a: Sequence[float], b: Sequence[float], c: Sequence[float], d: Sequence[float]) -> int:
    """+1 if d lies inside the circumcircle of the counter-clockwise triangle abc, 0 on it, -1 outside."""
    adx, ady = a[0] - d[0], a[1] - d[1]
    bdx, bdy = b[0] - d[0], b[1] - d[1]
    cdx, cdy = c[0] - d[0], c[1] - d[1]
    alift = adx * adx + ady * ady
    blift = bdx * bdx + bdy * bdy
    clift = cdx * cdx + cdy * cdy
    det = (
        alift * (bdx * cdy - cdx * bdy)
        + blift * (cdx * ady - adx * cdy)
        + clift * (adx * bdy - bdx * ady)
    )
    permanent = (
        (abs(bdx * cdy) + abs(cdx * bdy)) * alift
        + (abs(cdx * ady) + abs(adx * cdy)) * blift
        + (abs(adx * bdy) + abs(bdx * ady)) * clift
    )
    if abs(det) > _INCIRCLE_BOUND * permanent:
        return _sign(det)
    fa, fb, fc, fd = ([Fraction(p[0]), Fraction(p[1])] for p in (a, b, c, d))
    adx, ady = fa[0] - fd[0], fa[1] - fd[1]
    bdx, bdy = fb[0] - fd[0], fb[1] - fd[1]
    cdx, cdy = fc[0] - fd[0], fc[1] - fd[1]
    exact = (
        (adx * adx + ady * ady) * (bdx * cdy - cdx * bdy)
        + (bdx * bdx + bdy * bdy) * (cdx * ady - adx * cdy)
        + (cdx * cdx + cdy * cdy) * (adx * bdy - bdx * ady)
    )
    return _sign(exact)


# ========== Triangulation ==========


@dataclass(frozen=True, slots=True)
class Triangulation:
    """
    Delaunay triangulation. ``triangles`` are counter-clockwise vertex-index
    triples; ``neighbors[t, i]`` is the triangle across the edge opposite
    vertex i, or -1 on the hull.
    """

    vertices: FloatArray
    triangles: np.ndarray
    neighbors: np.ndarray

    def __len__(self) -> int:
        return len(self.triangles)

    def triangle_points(self, t: int) -> FloatArray:
        return self.vertices[self.triangles[t]]

    def circumcenters(self) -> FloatArray:
        p = self.vertices[self.triangles]
        a, b, c = p[:, 0], p[:, 1], p[:, 2]
        d = 2 * (a[:, 0] * (b[:, 1] - c[:, 1]) + b[:, 0] * (c[:, 1] - a[:, 1]) + c[:, 0] * (a[:, 1] - b[:, 1]))
        sa, sb, sc = (np.sum(x**2, axis=1) for x in (a, b, c))
        ux = (sa * (b[:, 1] - c[:, 1]) + sb * (c[:, 1] - a[:, 1]) + sc * (a[:, 1] - b[:, 1])) / d
        uy = (sa * (c[:, 0] - b[:, 0]) + sb * (a[:, 0] - c[:, 0]) + sc * (b[:, 0] - a[:, 0])) / d
        return np.column_stack([ux, uy])


class _Builder:
    """Incremental Bowyer-Watson state: triangles by id and directed-edge ownership."""

    def __init__(self, points: list[tuple[float, float]]):
        self.pts = points
        self.tris: dict[int, tuple[int, int, int]] = {}
        self.owner: dict[tuple[int, int], int] = {}
        self.next_id = 0
        self.last = -1

    def add(self, a: int, b: int, c: int) -> int:
        t = self.next_id
        self.next_id += 1
        self.tris[t] = (a, b, c)
        for e in ((a, b), (b, c), (c, a)):
            self.owner[e] = t
        self.last = t
        return t

    def remove(self, t: int) -> None:
        a, b, c = self.tris.pop(t)
        for e in ((a, b), (b, c), (c, a)):
            del self.owner[e]

    def _on_segment(self, u: int, v: int, p: tuple[float, float]) -> bool:
        a, b = self.pts[u], self.pts[v]
        if orient2d(a, b, p) != 0:
            return False
        return min(a[0], b[0]) <= p[0] <= max(a[0], b[0]) and min(a[1], b[1]) <= p[1] <= max(a[1], b[1])

    def locate(self, p: tuple[float, float]) -> int:
        t = self.last if self.last in self.tris else next(iter(self.tris))
        for _ in range(len(self.tris) + 1):
            a, b, c = self.tris[t]
            for u, v in ((a, b), (b, c), (c, a)):
                if orient2d(self.pts[u], self.pts[v], p) < 0:
                    t = self.owner[(v, u)]
                    break
            else:
                return t
        # the visibility walk terminates on Delaunay meshes; scan as a last resort
        for t, (a, b, c) in self.tris.items():
            if min(orient2d(self.pts[u], self.pts[v], p) for u, v in ((a, b), (b, c), (c, a))) >= 0:
                return t
        raise DegenerateTriangulationError(f"Point {p} not inside the bounding triangle")

    def insert(self, i: int) -> None:
        p = self.pts[i]
        start = self.locate(p)
        bad = {start}
        stack = [start]
        while stack:
            a, b, c = self.tris[stack.pop()]
            for u, v in ((a, b), (b, c), (c, a)):
                nb = self.owner.get((v, u))
                if nb is None or nb in bad:
                    continue
                x, y, z = self.tris[nb]
                if self._on_segment(u, v, p) or incircle(self.pts[x], self.pts[y], self.pts[z], p) > 0:
                    bad.add(nb)
                    stack.append(nb)
        boundary = [
            (u, v)
            for t in bad
            for u, v in zip(self.tris[t], self.tris[t][1:] + self.tris[t][:1])
            if self.owner.get((v, u)) not in bad
        ]
        for t in bad:
            self.remove(t)
        for u, v in boundary:
            self.add(u, v, i)


def _canonical(tri: tuple[int, int, int]) -> tuple[int, int, int]:
    k = tri.index(min(tri))
    return tri[k:] + tri[:k]


def delaunay(points: Sequence[Sequence[float]] | FloatArray) -> Triangulation:
    """
    Delaunay triangulation of 2-D points (input order is kept for vertex indices).

    Raises:
        DegenerateTriangulationError: fewer than 3 points, duplicates, or all collinear.
    """
    pts = np.asarray(points, dtype=float)
    if pts.ndim != 2 or pts.shape[1] != 2 or len(pts) < 3:
        raise DegenerateTriangulationError("Need at least 3 two-dimensional points")
    coords = [(float(x), float(y)) for x, y in pts]
    if len(set(coords)) != len(coords):
        raise DegenerateTriangulationError("Duplicate points")
    if all(orient2d(coords[0], coords[1], c) == 0 for c in coords[2:]):
        raise DegenerateTriangulationError("All points are collinear")

    n = len(coords)
    lo, hi = pts.min(axis=0), pts.max(axis=0)
    cx, cy = (lo + hi) / 2
    span = float(max(hi - lo)) or 1.0
    reach = SUPER_SCALE * span
    builder = _Builder(coords + [(cx - reach, cy - reach), (cx + reach, cy - reach), (cx, cy + reach)])
    builder.add(n, n + 1, n + 2)
    for i in range(n):
        builder.insert(i)

    triangles = sorted(_canonical(t) for t in builder.tris.values() if max(t) < n)
    if not triangles:
        raise DegenerateTriangulationError("No triangles produced")
    edge_tri = {}
    for k, (a, b, c) in enumerate(triangles):
        for e in ((a, b), (b, c), (c, a)):
            edge_tri[e] = k
    neighbors = np.full((len(triangles), 3), -1, dtype=int)
    for k, (a, b, c) in enumerate(triangles):
        # opposite vertex order: a -> (b, c), b -> (c, a), c -> (a, b)
        for j, (u, v) in enumerate(((b, c), (c, a), (a, b))):
            neighbors[k, j] = edge_tri.get((v, u), -1)
    logger.debug("Triangulated %d points into %d triangles", n, len(triangles))
    return Triangulation(pts.copy(), np.array(triangles, dtype=int), neighbors)


# ========== Point location ==========


@dataclass(frozen=True, slots=True)
class PointLocation:
    """Triangle serving a point; ``inside`` is False for the outside-hull fallback."""

    triangle: int
    vertices: tuple[int, int, int]
    inside: bool


def _orientations(tri: Triangulation, t: int, p: tuple[float, float]) -> list[int]:
    a, b, c = (tuple(tri.vertices[v]) for v in tri.triangles[t])
    return [orient2d(a, b, p), orient2d(b, c, p), orient2d(c, a, p)]


def _segment_distance(p: FloatArray, a: FloatArray, b: FloatArray) -> FloatArray:
    ab = b - a
    t = np.clip(np.sum((p - a) * ab, axis=-1) / np.maximum(np.sum(ab * ab, axis=-1), 1e-300), 0.0, 1.0)
    return np.linalg.norm(a + t[..., None] * ab - p, axis=-1)


def locate(tri: Triangulation, point: Sequence[float], start: int = 0, warn: bool = True) -> PointLocation:
    """
    Containing triangle by a visibility walk over ``neighbors``. Points on
    shared edges or vertices resolve to the lowest triangle index; points
    outside the hull fall back to the nearest triangle.
    """
    p = (float(point[0]), float(point[1]))
    t = start
    for _ in range(len(tri) + 1):
        signs = _orientations(tri, t, p)
        # edge i of signs lies opposite vertex (i + 2) % 3
        step = next((i for i, s in enumerate(signs) if s < 0), None)
        if step is None:
            break
        nb = tri.neighbors[t, (step + 2) % 3]
        if nb < 0:
            return _nearest(tri, p, warn)
        t = int(nb)
    else:
        t = next((k for k in range(len(tri)) if min(_orientations(tri, k, p)) >= 0), -1)
        if t < 0:
            return _nearest(tri, p, warn)
    if 0 in _orientations(tri, t, p):
        t = next(k for k in range(len(tri)) if min(_orientations(tri, k, p)) >= 0)
    return PointLocation(t, tuple(int(v) for v in tri.triangles[t]), True)


def _nearest(tri: Triangulation, p: tuple[float, float], warn: bool = True) -> PointLocation:
    corners = tri.vertices[tri.triangles]
    q = np.asarray(p)
    dist = np.min(
        np.stack([_segment_distance(q, corners[:, i], corners[:, (i + 1) % 3]) for i in range(3)], axis=1), axis=1
    )
    t = int(np.argmin(dist))
    log = logger.warning if warn else logger.debug
    log("Point (%.1f, %.1f) outside the hull; using nearest triangle %d", p[0], p[1], t)
    return PointLocation(t, tuple(int(v) for v in tri.triangles[t]), False)


def comp_cluster_for_user(user_xy: Sequence[float], tri: Triangulation) -> tuple[int, int, int]:
    """Vertex triple of the triangle serving ``user_xy``."""
    return locate(tri, user_xy).vertices


def obtuse_fraction(tri: Triangulation) -> float:
    """Share of triangles with an obtuse angle."""
    p = tri.vertices[tri.triangles]
    sq = np.stack([np.sum((p[:, (i + 1) % 3] - p[:, (i + 2) % 3]) ** 2, axis=1) for i in range(3)], axis=1)
    sq.sort(axis=1)
    return float(np.mean(sq[:, 2] > sq[:, 0] + sq[:, 1]))


# ========== Exhaustive checks ==========


def empty_circumcircle_violations(tri: Triangulation) -> int:
    """
    Number of (triangle, vertex) pairs with the vertex strictly inside the
    triangle's circumcircle, over every vertex. Zero for a Delaunay mesh.

    The determinant is filtered in floating point; pairs it cannot settle go
    through the exact ``incircle``.
    """
    corners = tri.vertices[tri.triangles]
    rel = corners[:, None, :, :] - tri.vertices[None, :, None, :]
    x, y = rel[..., 0], rel[..., 1]
    lift = x**2 + y**2
    det = (
        lift[..., 0] * (x[..., 1] * y[..., 2] - x[..., 2] * y[..., 1])
        + lift[..., 1] * (x[..., 2] * y[..., 0] - x[..., 0] * y[..., 2])
        + lift[..., 2] * (x[..., 0] * y[..., 1] - x[..., 1] * y[..., 0])
    )
    permanent = (
        lift[..., 0] * (np.abs(x[..., 1] * y[..., 2]) + np.abs(x[..., 2] * y[..., 1]))
        + lift[..., 1] * (np.abs(x[..., 2] * y[..., 0]) + np.abs(x[..., 0] * y[..., 2]))
        + lift[..., 2] * (np.abs(x[..., 0] * y[..., 1]) + np.abs(x[..., 1] * y[..., 0]))
    )
    own = np.zeros(det.shape, dtype=bool)
    np.put_along_axis(own, tri.triangles, True, axis=1)
    unsettled = (det > -_INCIRCLE_BOUND * permanent) & ~own
    return sum(
        incircle(*(tri.vertices[v] for v in tri.triangles[t]), tri.vertices[k]) > 0
        for t, k in zip(*np.nonzero(unsettled))
    )


def scan_locate(tri: Triangulation, points: Sequence[Sequence[float]] | FloatArray) -> np.ndarray:
    """Lowest-index triangle containing each point, testing every triangle; -1 outside the hull."""
    queries = np.asarray(points, dtype=float).reshape(-1, 2)
    corners = tri.vertices[tri.triangles]
    edges = [(corners[:, i], corners[:, (i + 1) % 3]) for i in range(3)]
    found = np.full(len(queries), -1, dtype=int)
    for q, p in enumerate(queries):
        signs = []
        for a, b in edges:
            left = (a[:, 0] - p[0]) * (b[:, 1] - p[1])
            right = (a[:, 1] - p[1]) * (b[:, 0] - p[0])
            sign = np.sign(left - right).astype(int)
            for t in np.flatnonzero(np.abs(left - right) <= _ORIENT_BOUND * (np.abs(left) + np.abs(right))):
                sign[t] = orient2d(a[t], b[t], p)
            signs.append(sign)
        inside = np.flatnonzero(np.min(signs, axis=0) >= 0)
        if inside.size:
            found[q] = inside[0]
    return found
