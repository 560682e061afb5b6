"""Polygon primitives used throughout the solver.

Polygons are immutable. Vertices are stored counter-clockwise as a read-only
``(m, 2)`` float array; the reference point of every piece is its area
centroid, and a :class:`Pose` places that centroid and rotates about it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, NamedTuple, Sequence

import numpy as np
import shapely
from shapely.geometry import Polygon as _ShapelyPolygon


class GeometryError(ValueError):
    """Raised for degenerate or otherwise invalid geometry."""


class Point(NamedTuple):
    x: float
    y: float


@dataclass(frozen=True)
class Pose:
    """Centroid position plus rotation (degrees, counter-clockwise)."""

    x: float
    y: float
    angle: float = 0.0

    def __post_init__(self) -> None:
        object.__setattr__(self, "angle", normalize_angle(self.angle))


@dataclass(frozen=True)
class Rect:
    x: float
    y: float
    length: float
    height: float

    def __post_init__(self) -> None:
        if self.length < 0 or self.height < 0:
            raise GeometryError(f"negative rectangle extent: {self.length}x{self.height}")

    @property
    def x_max(self) -> float:
        return self.x + self.length

    @property
    def y_max(self) -> float:
        return self.y + self.height

    @property
    def area(self) -> float:
        return self.length * self.height


def normalize_angle(angle: float) -> float:
    a = math.fmod(float(angle), 360.0)
    if a < 0:
        a += 360.0
    # fmod of e.g. -1e-17 lands on 360.0
    if a >= 360.0 or abs(a - 360.0) < 1e-12:
        a = 0.0
    return a


def _signed_area(coords: np.ndarray) -> float:
    x, y = coords[:, 0], coords[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def _segments_cross(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection test for closed segments."""

    def orient(a, b, c):
        v = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
        return 0 if abs(v) < 1e-12 else (1 if v > 0 else -1)

    def on_seg(a, b, c):
        return (min(a[0], b[0]) - 1e-12 <= c[0] <= max(a[0], b[0]) + 1e-12
                and min(a[1], b[1]) - 1e-12 <= c[1] <= max(a[1], b[1]) + 1e-12)

    o1, o2 = orient(p1, p2, q1), orient(p1, p2, q2)
    o3, o4 = orient(q1, q2, p1), orient(q1, q2, p2)
    if o1 != o2 and o3 != o4:
        return True
    if o1 == 0 and on_seg(p1, p2, q1):
        return True
    if o2 == 0 and on_seg(p1, p2, q2):
        return True
    if o3 == 0 and on_seg(q1, q2, p1):
        return True
    if o4 == 0 and on_seg(q1, q2, p2):
        return True
    return False


def _check_simple(coords: np.ndarray) -> None:
    m = len(coords)
    for i in range(m):
        a1, a2 = coords[i], coords[(i + 1) % m]
        for j in range(i + 1, m):
            # adjacent edges share a vertex by construction
            if j == i + 1 or (i == 0 and j == m - 1):
                continue
            b1, b2 = coords[j], coords[(j + 1) % m]
            if _segments_cross(a1, a2, b1, b2):
                raise GeometryError(f"self-intersecting boundary: edges {i} and {j} meet")


class Polygon:
    """Simple polygon with counter-clockwise vertices.

    Input may be in either winding; consecutive duplicates and a repeated
    closing vertex are rejected rather than silently dropped.
    """

    __slots__ = ("_coords", "__dict__")

    def __init__(self, vertices: Iterable[Sequence[float]], *, validate: bool = True):
        coords = np.array([[float(v[0]), float(v[1])] for v in vertices], dtype=float)
        if validate:
            if coords.ndim != 2 or len(coords) < 3:
                raise GeometryError(f"polygon needs at least 3 vertices, got {len(coords)}")
            if not np.all(np.isfinite(coords)):
                raise GeometryError("non-finite vertex coordinate")
            nxt = np.roll(coords, -1, axis=0)
            if np.any(np.all(np.isclose(coords, nxt, rtol=0, atol=1e-12), axis=1)):
                raise GeometryError("consecutive duplicate vertices")
            a = _signed_area(coords)
            scale = float(np.ptp(coords, axis=0).max()) or 1.0
            if abs(a) <= 1e-12 * scale * scale:
                raise GeometryError("degenerate polygon (zero area)")
            _check_simple(coords)
        if _signed_area(coords) < 0:
            coords = coords[::-1].copy()
        coords.setflags(write=False)
        self._coords = coords

    @classmethod
    def _trusted(cls, coords: np.ndarray) -> "Polygon":
        p = cls.__new__(cls)
        coords = np.ascontiguousarray(coords, dtype=float)
        coords.setflags(write=False)
        p._coords = coords
        return p

    @property
    def coords(self) -> np.ndarray:
        return self._coords

    @property
    def vertices(self) -> list[Point]:
        return [Point(float(x), float(y)) for x, y in self._coords]

    def __len__(self) -> int:
        return len(self._coords)

    def __repr__(self) -> str:
        pts = ", ".join(f"({x:g}, {y:g})" for x, y in self._coords)
        return f"Polygon([{pts}])"

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Polygon):
            return NotImplemented
        return self._coords.shape == other._coords.shape and bool(np.all(self._coords == other._coords))

    def __hash__(self) -> int:
        return hash(self._coords.tobytes())

    @cached_property
    def area(self) -> float:
        return abs(_signed_area(self._coords))

    @cached_property
    def centroid(self) -> Point:
        c = self._coords
        x, y = c[:, 0], c[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cross = x * yn - xn * y
        a6 = 3.0 * float(cross.sum())
        return Point(float(((x + xn) * cross).sum() / a6), float(((y + yn) * cross).sum() / a6))

    @cached_property
    def bounds(self) -> tuple[float, float, float, float]:
        lo = self._coords.min(axis=0)
        hi = self._coords.max(axis=0)
        return float(lo[0]), float(lo[1]), float(hi[0]), float(hi[1])

    @cached_property
    def radius(self) -> float:
        """Circumradius about the centroid."""
        cx, cy = self.centroid
        return float(np.hypot(self._coords[:, 0] - cx, self._coords[:, 1] - cy).max())

    @cached_property
    def perimeter(self) -> float:
        d = np.roll(self._coords, -1, axis=0) - self._coords
        return float(np.hypot(d[:, 0], d[:, 1]).sum())

    @cached_property
    def shape(self) -> _ShapelyPolygon:
        return _ShapelyPolygon(self._coords)

    def translated(self, dx: float, dy: float) -> "Polygon":
        return Polygon._trusted(self._coords + (dx, dy))


def rotation(angle: float) -> tuple[float, float]:
    """(cos, sin) of an angle in degrees, exact at multiples of 90."""
    a = normalize_angle(angle)
    q, rem = divmod(a, 90.0)
    if abs(rem) < 1e-12:
        return [(1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0)][int(q) % 4]
    r = math.radians(a)
    return math.cos(r), math.sin(r)


def rotate_coords(coords: np.ndarray, angle: float, origin=(0.0, 0.0)) -> np.ndarray:
    c, s = rotation(angle)
    ox, oy = origin
    x = coords[..., 0] - ox
    y = coords[..., 1] - oy
    return np.stack([c * x - s * y + ox, s * x + c * y + oy], axis=-1)


def area(p: Polygon) -> float:
    return p.area


def centroid(p: Polygon) -> Point:
    return p.centroid


def centered_coords(p: Polygon, angle: float = 0.0) -> np.ndarray:
    """Vertices relative to the centroid, rotated by ``angle``."""
    cx, cy = p.centroid
    return rotate_coords(p.coords - (cx, cy), angle)


def transform(p: Polygon, pose: Pose) -> Polygon:
    """Rotate ``p`` about its centroid and move the centroid to the pose."""
    return Polygon._trusted(centered_coords(p, pose.angle) + (pose.x, pose.y))


def convex_hull(points) -> Polygon:
    """Andrew's monotone chain. Returns a counter-clockwise hull."""
    pts = np.asarray([(float(p[0]), float(p[1])) for p in points] if not isinstance(points, np.ndarray) else points,
                     dtype=float).reshape(-1, 2)
    hull = _hull_array(pts)
    if len(hull) < 3:
        raise GeometryError("degenerate hull: points are collinear")
    return Polygon._trusted(hull)


def _hull_array(pts: np.ndarray) -> np.ndarray:
    pts = np.unique(pts, axis=0)  # lexicographic sort
    if len(pts) < 3:
        return pts

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    lower: list = []
    for p in pts:
        while len(lower) >= 2 and cross(lower[-2], lower[-1], p) <= 0:
            lower.pop()
        lower.append(p)
    upper: list = []
    for p in pts[::-1]:
        while len(upper) >= 2 and cross(upper[-2], upper[-1], p) <= 0:
            upper.pop()
        upper.append(p)
    return np.array(lower[:-1] + upper[:-1])


def hull_area(points: np.ndarray) -> float:
    """Area of the convex hull of a point array; 0 for degenerate input."""
    h = _hull_array(np.asarray(points, dtype=float).reshape(-1, 2))
    if len(h) < 3:
        return 0.0
    return abs(_signed_area(h))


def _boxes_disjoint(a: Polygon, b: Polygon) -> bool:
    ax0, ay0, ax1, ay1 = a.bounds
    bx0, by0, bx1, by1 = b.bounds
    return ax1 <= bx0 or bx1 <= ax0 or ay1 <= by0 or by1 <= ay0


def intersection_area(a: Polygon, b: Polygon) -> float:
    if _boxes_disjoint(a, b):
        return 0.0
    sa, sb = a.shape, b.shape
    if not sa.intersects(sb):
        return 0.0
    return float(sa.intersection(sb).area)


def overlap(a: Polygon, b: Polygon, eps: float = 1e-9) -> bool:
    """True iff the interiors share more than ``eps`` of area."""
    return intersection_area(a, b) > eps


def overlap_many(fixed: Polygon, candidates: Sequence[np.ndarray] | np.ndarray, eps: float) -> np.ndarray:
    """Vectorized overlap of ``fixed`` against many same-size vertex arrays.

    ``candidates`` has shape ``(k, m, 2)``; returns a boolean array of length k.
    """
    cand = np.asarray(candidates, dtype=float)
    if len(cand) == 0:
        return np.zeros(0, dtype=bool)
    x0, y0, x1, y1 = fixed.bounds
    lo = cand.min(axis=1)
    hi = cand.max(axis=1)
    maybe = ~((hi[:, 0] <= x0) | (lo[:, 0] >= x1) | (hi[:, 1] <= y0) | (lo[:, 1] >= y1))
    out = np.zeros(len(cand), dtype=bool)
    if not maybe.any():
        return out
    idx = np.flatnonzero(maybe)
    polys = shapely.polygons(cand[idx])
    fs = fixed.shape
    shapely.prepare(fs)
    hit = shapely.intersects(fs, polys)
    if hit.any():
        sub = idx[hit]
        areas = shapely.area(shapely.intersection(fs, polys[hit]))
        out[sub] = areas > eps
    return out


def contains(container: Rect, p: Polygon, eps: float = 1e-9) -> bool:
    x0, y0, x1, y1 = p.bounds
    return (x0 >= container.x - eps and y0 >= container.y - eps
            and x1 <= container.x_max + eps and y1 <= container.y_max + eps)


def bounding_box(ps: Sequence[Polygon]) -> Rect:
    if not ps:
        raise GeometryError("bounding box of an empty polygon list")
    b = np.array([p.bounds for p in ps])
    x0, y0 = b[:, 0].min(), b[:, 1].min()
    x1, y1 = b[:, 2].max(), b[:, 3].max()
    return Rect(float(x0), float(y0), float(x1 - x0), float(y1 - y0))


def default_eps(pieces: Sequence[Polygon]) -> float:
    """Overlap tolerance: a millionth of the smallest piece area."""
    return 1e-6 * min(p.area for p in pieces)
