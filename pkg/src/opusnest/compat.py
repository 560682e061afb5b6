"""Pairwise geometric compatibility.

For an ordered pair (fixed, moving) the no-fit table maps every polar angle
theta to the radius and orientation that place ``moving`` against ``fixed``
without overlap while minimizing the area of their joint convex hull. The
minimal hull over all theta gives the pairwise waste ``d`` and the
incompatibility ``gi = d / hull``.
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .geometry import (
    GeometryError,
    Polygon,
    centered_coords,
    default_eps,
    hull_area,
    normalize_angle,
    overlap_many,
    rotation,
)

log = logging.getLogger(__name__)

CACHE_VERSION = 1
_CHUNK = 16


class ConfigurationError(ValueError):
    """The discretization cannot represent a required placement."""


def _akey(a: float) -> float:
    return round(normalize_angle(a), 9)


@dataclass(frozen=True)
class DiscretizationConfig:
    """Angle sets (degrees) and radial step for no-fit scans.

    ``r_max=None`` selects a per-pair ceiling of the two circumradii plus
    ``2 * r_step``, beyond which no overlap is possible.
    """

    theta_set: tuple[float, ...]
    phi_set: tuple[float, ...]
    r_step: float
    r_max: float | None = None

    def __post_init__(self) -> None:
        for name in ("theta_set", "phi_set"):
            vals = tuple(float(v) for v in getattr(self, name))
            object.__setattr__(self, name, vals)
            if not vals:
                raise ConfigurationError(f"{name} is empty")
            if any(v < 0 or v >= 360 for v in vals):
                raise ConfigurationError(f"{name} values must lie in [0, 360)")
            if any(b <= a for a, b in zip(vals, vals[1:])):
                raise ConfigurationError(f"{name} must be strictly increasing")
            if vals[0] != 0.0:
                raise ConfigurationError(f"{name} must contain 0")
        if not self.r_step > 0:
            raise ConfigurationError("r_step must be positive")
        if self.r_max is not None and not self.r_max > 0:
            raise ConfigurationError("r_max must be positive")

    @classmethod
    def uniform(cls, theta_step: float = 5.0, rotation_step: float = 90.0,
                r_step: float = 5.0, r_max: float | None = None) -> "DiscretizationConfig":
        def grid(step):
            n = int(round(360.0 / step))
            return tuple(i * 360.0 / n for i in range(n))
        return cls(grid(theta_step), grid(rotation_step), r_step, r_max)

    def pair_r_max(self, a: Polygon, b: Polygon) -> float:
        if self.r_max is not None:
            return self.r_max
        return a.radius + b.radius + 2 * self.r_step

    def allows_quarter_turn(self) -> bool:
        keys = {_akey(p) for p in self.phi_set}
        return 90.0 in keys

    def digest(self) -> str:
        payload = json.dumps([self.theta_set, self.phi_set, self.r_step, self.r_max])
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


@dataclass(frozen=True)
class NffEntry:
    r: float
    phi: float
    hull_area: float


@dataclass
class NoFitTable:
    """No-fit function of an ordered pair.

    ``candidates`` keeps, per theta, the best radius and hull area for every
    orientation; it lets :func:`mirror_nff` derive the reverse table exactly.
    """

    pair: tuple[str, str]
    entries: dict[float, NffEntry]
    candidates: dict[float, dict[float, tuple[float, float]]] = field(default_factory=dict)
    fallback_thetas: tuple[float, ...] = ()

    def entry(self, theta: float) -> NffEntry:
        return self.entries[_akey(theta)]

    def to_json(self) -> dict:
        return {
            "pair": list(self.pair),
            "entries": [[t, e.r, e.phi, e.hull_area] for t, e in sorted(self.entries.items())],
            "candidates": [[t, [[p, r, h] for p, (r, h) in sorted(c.items())]]
                           for t, c in sorted(self.candidates.items())],
            "fallback_thetas": list(self.fallback_thetas),
        }

    @classmethod
    def from_json(cls, d: dict) -> "NoFitTable":
        return cls(
            pair=(d["pair"][0], d["pair"][1]),
            entries={float(t): NffEntry(float(r), float(p), float(h)) for t, r, p, h in d["entries"]},
            candidates={float(t): {float(p): (float(r), float(h)) for p, r, h in c}
                        for t, c in d.get("candidates", [])},
            fallback_thetas=tuple(d.get("fallback_thetas", ())),
        )


@dataclass(frozen=True)
class PairPlacement:
    theta_star: float
    r_star: float
    phi_star: float
    hull_area_star: float
    distance: float


@dataclass(frozen=True)
class DistanceMatrices:
    D: np.ndarray
    GI: np.ndarray


def shape_key(p: Polygon) -> str:
    """Identifier shared by translated copies of the same outline."""
    c = np.round(p.coords - p.centroid, 9) + 0.0
    start = min(range(len(c)), key=lambda k: tuple(c[k]))
    canon = np.roll(c, -start, axis=0)
    return hashlib.sha1(canon.tobytes()).hexdigest()[:16]


def polar_place(fixed: Polygon, moving: Polygon, r: float, theta: float, phi: float) -> Polygon:
    """Rotate ``moving`` by phi and put its centroid at polar (r, theta) from fixed's centroid."""
    c, s = rotation(theta)
    fx, fy = fixed.centroid
    return Polygon._trusted(centered_coords(moving, phi) + (fx + r * c, fy + r * s))


def _scan_first_free(fixed0: Polygon, moving_rel: np.ndarray, dirs: np.ndarray,
                     radii: np.ndarray, eps: float) -> np.ndarray:
    """Index of the first radius without overlap along each direction (-1 if none)."""
    found = np.full(len(dirs), -1, dtype=int)
    pending = np.arange(len(dirs))
    for start in range(0, len(radii), _CHUNK):
        if len(pending) == 0:
            break
        rs = radii[start:start + _CHUNK]
        offs = rs[None, :, None] * dirs[pending][:, None, :]  # (P, C, 2)
        cand = moving_rel[None, None, :, :] + offs[:, :, None, :]
        hit = overlap_many(fixed0, cand.reshape(-1, *moving_rel.shape), eps).reshape(len(pending), len(rs))
        free = ~hit
        has = free.any(axis=1)
        first = free.argmax(axis=1)
        found[pending[has]] = start + first[has]
        pending = pending[~has]
    return found


def compute_nff(fixed: Polygon, moving: Polygon, cfg: DiscretizationConfig,
                eps: float | None = None, pair: tuple[str, str] | None = None) -> NoFitTable:
    """Direct no-fit table of ``moving`` orbiting ``fixed``.

    For every (theta, phi) the radius is the first overlap-free value of the
    outward scan 0, dr, 2dr, ...; per theta the orientation with the smallest
    joint hull area wins (earlier phi on ties).
    """
    if eps is None:
        eps = default_eps([fixed, moving])
    fixed0 = Polygon._trusted(fixed.coords - fixed.centroid)
    r_max = cfg.pair_r_max(fixed, moving)
    radii = np.arange(0, int(math.floor(r_max / cfg.r_step + 1e-9)) + 1) * cfg.r_step
    thetas = [_akey(t) for t in cfg.theta_set]
    dirs = np.array([rotation(t) for t in thetas])
    candidates: dict[float, dict[float, tuple[float, float]]] = {t: {} for t in thetas}
    for phi in cfg.phi_set:
        rel = centered_coords(moving, phi)
        first = _scan_first_free(fixed0, rel, dirs, radii, eps)
        for k, t in enumerate(thetas):
            if first[k] < 0:
                continue
            r = float(radii[first[k]])
            placed = rel + r * dirs[k]
            h = hull_area(np.vstack([fixed0.coords, placed]))
            candidates[t][_akey(phi)] = (r, h)
    entries = {}
    for t in thetas:
        if not candidates[t]:
            raise ConfigurationError(
                f"no overlap-free radius up to r_max={r_max:g} at theta={t:g}; increase r_max")
        entries[t] = _best(candidates[t], cfg)
    if pair is None:
        pair = (shape_key(fixed), shape_key(moving))
    return NoFitTable(pair=pair, entries=entries, candidates=candidates)


def _best(cands: dict[float, tuple[float, float]], cfg: DiscretizationConfig) -> NffEntry:
    best = None
    for phi in cfg.phi_set:
        key = _akey(phi)
        if key not in cands:
            continue
        r, h = cands[key]
        if best is None or h < best.hull_area - 1e-9 * max(1.0, abs(best.hull_area)):
            best = NffEntry(r, key, h)
    return best


def mirror_nff(t: NoFitTable, cfg: DiscretizationConfig, fixed: Polygon | None = None,
               moving: Polygon | None = None, eps: float | None = None) -> NoFitTable:
    """Reverse table (moving, fixed) derived from the forward one.

    Uses NFF_ji(theta) = (r, phi) where NFF_ij(theta + 180 - phi) = (r, -phi).
    Angles that cannot be derived are recomputed directly when the polygons
    are supplied, and listed in ``fallback_thetas``.
    """
    thetas = [_akey(x) for x in cfg.theta_set]
    candidates: dict[float, dict[float, tuple[float, float]]] = {}
    entries: dict[float, NffEntry] = {}
    missing = []
    for theta in thetas:
        cands = {}
        for phi in cfg.phi_set:
            src_t = _akey(theta + 180.0 - phi)
            src_phi = _akey(-phi)
            if t.candidates:
                got = t.candidates.get(src_t, {}).get(src_phi)
                if got is not None:
                    cands[_akey(phi)] = got
            else:
                e = t.entries.get(src_t)
                if e is not None and _akey(e.phi) == src_phi:
                    cands[_akey(phi)] = (e.r, e.hull_area)
        if cands:
            if t.candidates:
                candidates[theta] = cands
            entries[theta] = _best(cands, cfg)
        else:
            missing.append(theta)
    if missing:
        log.info("mirror_nff: %d angles not derivable, recomputing directly", len(missing))
        if fixed is not None and moving is not None:
            direct = compute_nff(moving, fixed, cfg, eps)
            for theta in missing:
                entries[theta] = direct.entries[theta]
                if t.candidates:
                    candidates[theta] = direct.candidates[theta]
    return NoFitTable(pair=(t.pair[1], t.pair[0]), entries=entries, candidates=candidates,
                      fallback_thetas=tuple(missing))


def pair_distance(fixed: Polygon, moving: Polygon, table: NoFitTable) -> PairPlacement:
    best_t, best = None, None
    for theta in sorted(table.entries):
        e = table.entries[theta]
        if best is None or e.hull_area < best.hull_area:
            best_t, best = theta, e
    d = max(0.0, best.hull_area - fixed.area - moving.area)
    return PairPlacement(best_t, best.r, best.phi, best.hull_area, d)


def incompatibility(placement: PairPlacement) -> float:
    if placement.hull_area_star <= 0:
        raise GeometryError("hull area must be positive")
    return min(1.0, max(0.0, placement.distance / placement.hull_area_star))


class NffCache:
    """On-disk JSON store of no-fit tables keyed by shape pair and config."""

    def __init__(self, directory: str | os.PathLike):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    @classmethod
    def from_env(cls) -> "NffCache | None":
        d = os.environ.get("OPUS_CACHE_DIR")
        return cls(d) if d else None

    def _path(self, pair: tuple[str, str], cfg: DiscretizationConfig, eps: float) -> Path:
        h = hashlib.sha256(f"{CACHE_VERSION}|{cfg.digest()}|{eps!r}|{pair[0]}|{pair[1]}".encode())
        return self.directory / f"nff-{h.hexdigest()[:24]}.json"

    def get(self, pair, cfg, eps) -> NoFitTable | None:
        path = self._path(pair, cfg, eps)
        if not path.exists():
            return None
        try:
            doc = json.loads(path.read_text())
        except (OSError, json.JSONDecodeError):
            return None
        if doc.get("version") != CACHE_VERSION or doc.get("config") != cfg.digest():
            return None
        return NoFitTable.from_json(doc["table"])

    def put(self, table: NoFitTable, cfg, eps) -> None:
        path = self._path(table.pair, cfg, eps)
        doc = {"version": CACHE_VERSION, "config": cfg.digest(), "table": table.to_json()}
        tmp = path.with_suffix(".tmp")
        tmp.write_text(json.dumps(doc))
        tmp.replace(path)


class PairTables:
    """No-fit tables for every ordered pair of pieces, shared per shape class."""

    def __init__(self, pieces: Sequence[Polygon], classes: list[int], tables: dict[tuple[int, int], NoFitTable]):
        self.pieces = list(pieces)
        self.classes = classes
        self.by_class = tables

    def get(self, i: int, j: int) -> NoFitTable:
        return self.by_class[(self.classes[i], self.classes[j])]


def shape_classes(pieces: Sequence[Polygon], use_classes: bool = True) -> tuple[list[int], list[int]]:
    """(class index per piece, representative piece per class)."""
    if not use_classes:
        return list(range(len(pieces))), list(range(len(pieces)))
    keys: dict[str, int] = {}
    classes, reps = [], []
    for i, p in enumerate(pieces):
        k = shape_key(p)
        if k not in keys:
            keys[k] = len(reps)
            reps.append(i)
        classes.append(keys[k])
    return classes, reps


def _nff_job(args):
    fixed, moving, cfg, eps, pair = args
    return compute_nff(fixed, moving, cfg, eps, pair)


def distance_matrices(pieces: Sequence[Polygon], cfg: DiscretizationConfig, eps: float | None = None,
                      cache: NffCache | None = None, use_classes: bool = True,
                      workers: int = 1) -> tuple[DistanceMatrices, PairTables]:
    """D and GI for all pieces plus the tables the greedy packer needs.

    One direct no-fit computation per unordered pair of shape classes; the
    reverse direction is mirrored. Entry (i, j) always comes from the table of
    the ordered pair (min(i, j), max(i, j)).
    """
    n = len(pieces)
    if n == 0:
        raise GeometryError("no pieces")
    if eps is None:
        eps = default_eps(pieces)
    classes, reps = shape_classes(pieces, use_classes)
    members: dict[int, int] = {}
    for c in classes:
        members[c] = members.get(c, 0) + 1
    keys = [shape_key(pieces[r]) if use_classes else f"piece{r}" for r in reps]

    needed = []
    for a in range(len(reps)):
        for b in range(a, len(reps)):
            if a == b and members[a] < 2:
                continue
            needed.append((a, b))

    tables: dict[tuple[int, int], NoFitTable] = {}
    jobs = []
    for a, b in needed:
        pair = (keys[a], keys[b])
        cached = cache.get(pair, cfg, eps) if cache is not None else None
        if cached is not None:
            tables[(a, b)] = cached
        else:
            jobs.append((a, b, (pieces[reps[a]], pieces[reps[b]], cfg, eps, pair)))
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_nff_job, [j[2] for j in jobs]))
    else:
        results = [_nff_job(j[2]) for j in jobs]
    for (a, b, _), table in zip(jobs, results):
        tables[(a, b)] = table
        if cache is not None:
            cache.put(table, cfg, eps)
    for a, b in needed:
        if a != b:
            tables[(b, a)] = mirror_nff(tables[(a, b)], cfg, pieces[reps[a]], pieces[reps[b]], eps)

    D = np.zeros((n, n))
    GI = np.zeros((n, n))
    for i in range(n):
        for j in range(i + 1, n):
            t = tables[(classes[i], classes[j])]
            pp = pair_distance(pieces[i], pieces[j], t)
            D[i, j] = D[j, i] = pp.distance
            GI[i, j] = GI[j, i] = incompatibility(pp)
    return DistanceMatrices(D, GI), PairTables(pieces, classes, tables)
