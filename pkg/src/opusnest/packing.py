"""Cluster packing, rectangle packing and layout refinement."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, replace
from functools import cached_property
from typing import Sequence

import numpy as np

from .compat import DiscretizationConfig, PairTables
from .geometry import (
    Polygon,
    Pose,
    Rect,
    bounding_box,
    centered_coords,
    contains,
    default_eps,
    intersection_area,
    normalize_angle,
    overlap_many,
    rotation,
    transform,
)

log = logging.getLogger(__name__)

_SQ = 1.0 / math.sqrt(2.0)
# leftwards / downwards moves, tried in this order
DIRECTIONS = ((-1.0, 0.0), (-_SQ, -_SQ), (-_SQ, _SQ), (0.0, -1.0))


class PackingError(RuntimeError):
    pass


@dataclass(frozen=True)
class ClusterPacking:
    indices: tuple[int, ...]
    poses: tuple[Pose, ...]
    box: Rect

    @property
    def area(self) -> float:
        return self.box.area


@dataclass(frozen=True)
class Layout:
    pieces: tuple[Polygon, ...]
    poses: tuple[Pose, ...]
    height: float
    length: float

    @cached_property
    def placed(self) -> tuple[Polygon, ...]:
        return tuple(transform(p, q) for p, q in zip(self.pieces, self.poses))

    @property
    def container(self) -> Rect:
        return Rect(0.0, 0.0, self.length, self.height)

    def with_poses(self, poses: Sequence[Pose], shrink: bool = True) -> "Layout":
        lay = replace(self, poses=tuple(poses))
        if shrink:
            x_max = max(p.bounds[2] for p in lay.placed)
            lay = replace(lay, length=min(self.length, x_max))
        return lay


# ---------------------------------------------------------------- greedy packing

def _normalized(indices, pieces, poses) -> ClusterPacking:
    placed = [transform(pieces[i], q) for i, q in zip(indices, poses)]
    bb = bounding_box(placed)
    shifted = tuple(Pose(q.x - bb.x, q.y - bb.y, q.angle) for q in poses)
    return ClusterPacking(tuple(indices), shifted, Rect(0.0, 0.0, bb.length, bb.height))


def greedy_pack(order: Sequence[int], pieces: Sequence[Polygon], tables: PairTables,
                cfg: DiscretizationConfig, eps: float | None = None) -> ClusterPacking:
    """Place pieces one by one, each orbiting the previously placed one.

    For every theta the no-fit table proposes (r, phi) relative to the previous
    piece's frame; r grows by ``cfg.r_step`` (phi fixed) until the candidate
    clears every placed piece. The theta giving the smallest running bounding
    box wins, smaller theta on ties.
    """
    order = list(order)
    if not order:
        raise PackingError("empty cluster")
    if eps is None:
        eps = default_eps([pieces[i] for i in order])
    poses = [Pose(0.0, 0.0, 0.0)]
    placed = [transform(pieces[order[0]], poses[0])]
    for k in range(1, len(order)):
        prev, cur = order[k - 1], order[k]
        table = tables.get(prev, cur)
        pp = poses[-1]
        moving = pieces[cur]
        reach = max(math.hypot(q.centroid.x - pp.x, q.centroid.y - pp.y) + q.radius for q in placed)
        best = None
        for theta in sorted(table.entries):
            e = table.entries[theta]
            c, s = rotation(theta + pp.angle)
            ang = normalize_angle(e.phi + pp.angle)
            rel = centered_coords(moving, ang)
            r_limit = reach + moving.radius + cfg.r_step
            n_steps = int(math.ceil(max(0.0, r_limit - e.r) / cfg.r_step)) + 1
            radii = e.r + cfg.r_step * np.arange(n_steps)
            r_found = None
            for start in range(0, n_steps, 16):
                rs = radii[start:start + 16]
                cand = rel[None, :, :] + np.stack([pp.x + rs * c, pp.y + rs * s], axis=1)[:, None, :]
                hit = np.zeros(len(rs), dtype=bool)
                for q in placed:
                    hit |= overlap_many(q, cand, eps)
                if not hit.all():
                    r_found = float(rs[int(np.argmin(hit))])
                    break
            if r_found is None:
                continue
            pose = Pose(pp.x + r_found * c, pp.y + r_found * s, ang)
            poly = transform(moving, pose)
            area = bounding_box(placed + [poly]).area
            if best is None or area < best[0] - 1e-9 * max(1.0, best[0]):
                best = (area, pose, poly)
        if best is None:
            raise PackingError(f"no clear placement for piece {cur} around piece {prev}")
        poses.append(best[1])
        placed.append(best[2])
    return _normalized(order, pieces, poses)


def pack_cluster_best(sigma: Sequence[int], pieces, tables, cfg, eps=None) -> ClusterPacking:
    """Greedy packing in path order and reversed; the smaller box wins (forward on ties)."""
    fwd = greedy_pack(sigma, pieces, tables, cfg, eps)
    if len(sigma) < 2:
        return fwd
    rev = greedy_pack(list(reversed(sigma)), pieces, tables, cfg, eps)
    return rev if rev.area < fwd.area else fwd


def rotate_cluster(cp: ClusterPacking) -> ClusterPacking:
    """Quarter turn counter-clockwise, re-anchored at the origin."""
    h = cp.box.height
    poses = tuple(Pose(h - q.y, q.x, q.angle + 90.0) for q in cp.poses)
    return ClusterPacking(cp.indices, poses, Rect(0.0, 0.0, cp.box.height, cp.box.length))


# ---------------------------------------------------------------- rectangle packing

@dataclass(frozen=True)
class RectPlacement:
    x: float
    y: float
    length: float
    height: float
    rotated: bool


_TOL = 1e-9


def _fits(free: Rect, w: float, h: float) -> bool:
    return w <= free.length + _TOL and h <= free.height + _TOL


def _split(free: Rect, used: Rect) -> list[Rect] | None:
    """Maximal free rectangles left after removing ``used``; None if disjoint."""
    if (used.x >= free.x_max - _TOL or used.x_max <= free.x + _TOL
            or used.y >= free.y_max - _TOL or used.y_max <= free.y + _TOL):
        return None
    out = []
    if used.x > free.x + _TOL:
        out.append(Rect(free.x, free.y, used.x - free.x, free.height))
    if used.x_max < free.x_max - _TOL:
        out.append(Rect(used.x_max, free.y, free.x_max - used.x_max, free.height))
    if used.y > free.y + _TOL:
        out.append(Rect(free.x, free.y, free.length, used.y - free.y))
    if used.y_max < free.y_max - _TOL:
        out.append(Rect(free.x, used.y_max, free.length, free.y_max - used.y_max))
    return out


def _inside(a: Rect, b: Rect) -> bool:
    return (a.x >= b.x - _TOL and a.y >= b.y - _TOL
            and a.x_max <= b.x_max + _TOL and a.y_max <= b.y_max + _TOL)


def _prune(free: list[Rect]) -> list[Rect]:
    keep = []
    for i, a in enumerate(free):
        dominated = False
        for j, b in enumerate(free):
            if i != j and _inside(a, b) and (not _inside(b, a) or j < i):
                dominated = True
                break
        if not dominated:
            keep.append(a)
    return keep


def _contact(fr: Rect, w: float, h: float, placed: list[Rect], bin_l: float, bin_h: float) -> float:
    """Perimeter of the candidate touching bin walls or placed items."""
    x0, y0, x1, y1 = fr.x, fr.y, fr.x + w, fr.y + h
    c = 0.0
    if x0 <= _TOL:
        c += h
    if y0 <= _TOL:
        c += w
    if y1 >= bin_h - _TOL:
        c += w
    for r in placed:
        if abs(r.x_max - x0) <= _TOL or abs(r.x - x1) <= _TOL:
            c += max(0.0, min(y1, r.y_max) - max(y0, r.y))
        if abs(r.y_max - y0) <= _TOL or abs(r.y - y1) <= _TOL:
            c += max(0.0, min(x1, r.x_max) - max(x0, r.x))
    return c


# each score maps (free rect, w, h, placed, bin_l, bin_h) to a key, lower is better
_SCORES = {
    # bottom-left lowest: leftmost right edge, then lowest
    "left": lambda fr, w, h, pl, L, H: (fr.x + w, fr.y),
    "bottom": lambda fr, w, h, pl, L, H: (fr.y + h, fr.x),
    "short-side": lambda fr, w, h, pl, L, H: (min(fr.length - w, fr.height - h), max(fr.length - w, fr.height - h), fr.x),
    "area": lambda fr, w, h, pl, L, H: (fr.area - w * h, min(fr.length - w, fr.height - h), fr.x),
    "contact": lambda fr, w, h, pl, L, H: (-_contact(fr, w, h, pl, L, H), fr.x + w, fr.y),
}
_ORDERS = {
    "area": lambda lh: -(lh[0] * lh[1]),
    "long-side": lambda lh: (-max(lh), -min(lh)),
    "height": lambda lh: -lh[1],
    "length": lambda lh: -lh[0],
    "perimeter": lambda lh: -(lh[0] + lh[1]),
}


def _maxrects(sizes, bin_l, bin_h, allow_rotate, order_key, score) -> list[RectPlacement] | None:
    free = [Rect(0.0, 0.0, bin_l, bin_h)]
    used_rects: list[Rect] = []
    result: list[RectPlacement | None] = [None] * len(sizes)
    order = sorted(range(len(sizes)), key=lambda k: (order_key(sizes[k]), k))
    for k in order:
        l, h = sizes[k]
        options = [(l, h, False)]
        if allow_rotate and abs(l - h) > _TOL:
            options.append((h, l, True))
        best = None
        for fr in free:
            for w, hh, rot in options:
                if _fits(fr, w, hh):
                    key = score(fr, w, hh, used_rects, bin_l, bin_h)
                    if best is None or key < best[0]:
                        best = (key, RectPlacement(fr.x, fr.y, w, hh, rot))
        if best is None:
            return None
        pl = best[1]
        result[k] = pl
        used = Rect(pl.x, pl.y, pl.length, pl.height)
        used_rects.append(used)
        nxt = []
        for fr in free:
            parts = _split(fr, used)
            nxt.extend([fr] if parts is None else parts)
        free = _prune([f for f in nxt if f.length > _TOL and f.height > _TOL])
    return result


def pack_rectangles(sizes: Sequence[tuple[float, float]], bin_length: float, bin_height: float,
                    allow_rotate: bool = False) -> list[RectPlacement] | None:
    """Maximal-rectangles packing of (length, height) items into a bin.

    A fixed portfolio of item orders (decreasing area first) and placement
    scores is tried; the packing with the shortest used length is returned,
    or None when none fits.
    """
    if bin_length <= 0 or bin_height <= 0:
        raise ValueError("bin dimensions must be positive")
    if not sizes:
        return []
    best, best_len = None, math.inf
    for order_key in _ORDERS.values():
        for score in _SCORES.values():
            res = _maxrects(list(sizes), bin_length, bin_height, allow_rotate, order_key, score)
            if res is None:
                continue
            used = max(p.x + p.length for p in res)
            if used < best_len - _TOL:
                best, best_len = res, used
    return best


def rectangles_feasible(placements: Sequence[RectPlacement], bin_length: float, bin_height: float,
                        tol: float = 1e-9) -> bool:
    """Containment plus, for each pair, at least one of the four separating inequalities."""
    for p in placements:
        if not (-tol <= p.x <= bin_length - p.length + tol and -tol <= p.y <= bin_height - p.height + tol):
            return False
    for a in range(len(placements)):
        for b in range(a + 1, len(placements)):
            i, j = placements[a], placements[b]
            if not (i.x + i.length <= j.x + tol or j.x + j.length <= i.x + tol
                    or i.y + i.height <= j.y + tol or j.y + j.height <= i.y + tol):
                return False
    return True


@dataclass(frozen=True)
class RelaxedPacking:
    placements: tuple[RectPlacement, ...]
    length_used: float
    height_used: float
    bin_length: float
    attempts: int
    growth_steps: int = 0


def relax_and_pack(sizes: Sequence[tuple[float, float]], height: float, target_length: float = math.inf,
                   allow_rotate: bool = False, growth: float = 1.05, cap: int = 60,
                   tighten: bool = True) -> RelaxedPacking | None:
    """Pack into bins of fixed height and geometrically growing length.

    An infinite target starts from the length of a single row of all items.
    After the first success the bin is shrunk by the same factor while the
    packer still succeeds with a shorter used length (``tighten``).
    """
    sizes = [(float(l), float(h)) for l, h in sizes]
    if not sizes:
        return RelaxedPacking((), 0.0, 0.0, 0.0, 0)
    if math.isinf(target_length):
        base = sum(max(l, h) if allow_rotate else l for l, h in sizes)
    else:
        base = float(target_length)
    found = None
    attempts = 0
    for k in range(cap + 1):
        bin_l = base * growth ** k
        attempts += 1
        res = pack_rectangles(sizes, bin_l, height, allow_rotate)
        if res is not None:
            found = (res, bin_l, k)
            break
    if found is None:
        return None
    res, bin_l, steps = found
    used = max(p.x + p.length for p in res)
    while tighten:
        trial_l = min(bin_l, used) / growth
        attempts += 1
        trial = pack_rectangles(sizes, trial_l, height, allow_rotate)
        if trial is None:
            break
        trial_used = max(p.x + p.length for p in trial)
        if trial_used >= used - _TOL:
            break
        res, bin_l, used = trial, trial_l, trial_used
    return RelaxedPacking(tuple(res), used, max(p.y + p.height for p in res), bin_l, attempts, steps)


def assemble_layout(clusters: Sequence[ClusterPacking], placements: Sequence[RectPlacement],
                    pieces: Sequence[Polygon], height: float) -> Layout:
    """Substitute each packed box by its cluster's pieces."""
    poses: list[Pose | None] = [None] * len(pieces)
    for cp, pl in zip(clusters, placements):
        if pl.rotated:
            cp = rotate_cluster(cp)
        for i, q in zip(cp.indices, cp.poses):
            poses[i] = Pose(q.x + pl.x, q.y + pl.y, q.angle)
    if any(q is None for q in poses):
        raise PackingError("clusters do not cover all pieces")
    placed = [transform(p, q) for p, q in zip(pieces, poses)]
    length = max(p.bounds[2] for p in placed)
    return Layout(tuple(pieces), tuple(poses), float(height), float(length))


# ---------------------------------------------------------------- refinement

class _Scene:
    """Mutable placed-polygon set for the refinement passes."""

    def __init__(self, layout: Layout, eps: float, contain_eps: float):
        self.layout = layout
        self.poses = list(layout.poses)
        self.polys = list(layout.placed)
        self.eps = eps
        self.contain_eps = contain_eps

    def clear(self, i: int, poly: Polygon, container: Rect) -> bool:
        if not contains(container, poly, self.contain_eps):
            return False
        for j, q in enumerate(self.polys):
            if j != i and intersection_area(poly, q) > self.eps:
                return False
        return True

    def move(self, i: int, dx: float, dy: float) -> None:
        q = self.poses[i]
        self.poses[i] = Pose(q.x + dx, q.y + dy, q.angle)
        self.polys[i] = self.polys[i].translated(dx, dy)


def _eps_for(layout: Layout, eps: float | None) -> float:
    return default_eps(layout.pieces) if eps is None else eps


def local_optimize(layout: Layout, delta_r: float, eps: float | None = None,
                   contain_eps: float = 1e-6, max_passes: int = 1000) -> Layout:
    """Slide pieces left/down in steps of ``delta_r`` until nothing moves.

    Pieces are visited by ascending x_min + y_min; each piece repeatedly takes
    the first feasible direction in :data:`DIRECTIONS`.
    """
    eps = _eps_for(layout, eps)
    scene = _Scene(layout, eps, contain_eps)
    container = layout.container
    steps = [(delta_r * ux, delta_r * uy) for ux, uy in DIRECTIONS]
    for _ in range(max_passes):
        moved = False
        order = sorted(range(len(scene.polys)), key=lambda k: (scene.polys[k].bounds[0] + scene.polys[k].bounds[1], k))
        for i in order:
            while True:
                for dx, dy in steps:
                    cand = scene.polys[i].translated(dx, dy)
                    if scene.clear(i, cand, container):
                        scene.move(i, dx, dy)
                        moved = True
                        break
                else:
                    break
        if not moved:
            break
    return layout.with_poses(scene.poses)


def _relocate(scene: _Scene, i: int, container: Rect, target_x: float, grid_divisions: int,
              orientations: Sequence[float]) -> Pose | None:
    """First grid position (columns left to right, rows bottom to top) where piece i fits
    with its right edge below ``target_x``."""
    piece = scene.layout.pieces[i]
    H = container.height
    xs = container.length * np.arange(grid_divisions) / grid_divisions
    ys = H * np.arange(grid_divisions) / grid_divisions
    shapes = []
    for phi in orientations:
        rel = centered_coords(piece, phi)
        lo, hi = rel.min(axis=0), rel.max(axis=0)
        shapes.append((normalize_angle(phi), rel, lo, hi - lo))
    others = [q for j, q in enumerate(scene.polys) if j != i]
    for x in xs:
        cands, meta = [], []
        for y in ys:
            for ang, rel, lo, ext in shapes:
                if x + ext[0] >= target_x or y + ext[1] > H + scene.contain_eps:
                    continue
                cx, cy = x - lo[0], y - lo[1]
                cands.append(rel + (cx, cy))
                meta.append(Pose(cx, cy, ang))
        if not cands:
            continue
        # group by vertex count for vectorized checks
        hit = np.zeros(len(cands), dtype=bool)
        by_len: dict[int, list[int]] = {}
        for k, c in enumerate(cands):
            by_len.setdefault(len(c), []).append(k)
        for idx in by_len.values():
            arr = np.stack([cands[k] for k in idx])
            h = np.zeros(len(idx), dtype=bool)
            for q in others:
                h |= overlap_many(q, arr, scene.eps)
            hit[idx] = h
        free = np.flatnonzero(~hit)
        if len(free):
            return meta[int(free[0])]
    return None


def global_optimize(layout: Layout, grid_divisions: int = 100, orientations: Sequence[float] = (0.0,),
                    delta_r: float = 5.0, eps: float | None = None, contain_eps: float = 1e-6,
                    max_moves: int = 1000) -> Layout:
    """Move the rightmost piece into the first interior gap that shortens the layout.

    After each relocation the layout is locally optimized; stops when the
    current rightmost piece has no improving position.
    """
    eps = _eps_for(layout, eps)
    current = layout
    for _ in range(max_moves):
        placed = current.placed
        rights = [p.bounds[2] for p in placed]
        i = int(np.argmax(rights))
        L = current.length
        others_right = max((r for j, r in enumerate(rights) if j != i), default=0.0)
        if others_right >= L - 1e-9:
            break
        scene = _Scene(current, eps, contain_eps)
        pose = _relocate(scene, i, current.container, L - 1e-9, grid_divisions, orientations)
        if pose is None:
            break
        poses = list(current.poses)
        poses[i] = pose
        moved = current.with_poses(poses)
        if moved.length >= L - 1e-9:
            break
        current = local_optimize(moved, delta_r, eps, contain_eps)
    return current


# ---------------------------------------------------------------- metrics

def layout_metrics(layout: Layout) -> tuple[float, float, float]:
    """(length, waste area, waste ratio)."""
    L, H = layout.length, layout.height
    total = H * L
    waste = total - sum(p.area for p in layout.pieces)
    return L, waste, (waste / total if total > 0 else 0.0)


def validate_layout(layout: Layout, eps: float | None = None, contain_eps: float = 1e-6) -> list[str]:
    eps = _eps_for(layout, eps)
    placed = layout.placed
    container = layout.container
    problems = []
    for i, p in enumerate(placed):
        if not contains(container, p, contain_eps):
            problems.append(f"piece {i} outside container {container.length:g}x{container.height:g}")
    for i in range(len(placed)):
        for j in range(i + 1, len(placed)):
            a = intersection_area(placed[i], placed[j])
            if a > eps:
                problems.append(f"pieces {i} and {j} overlap (area {a:.6g})")
    return problems
