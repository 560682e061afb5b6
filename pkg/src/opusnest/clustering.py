"""Single-linkage partitions of the piece set and penalty-based filtering."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .geometry import Rect


@dataclass(frozen=True)
class Partition:
    clusters: tuple[tuple[int, ...], ...]
    d_max: float = float("inf")
    n_max: int = 0

    def __post_init__(self) -> None:
        norm = tuple(sorted(tuple(sorted(c)) for c in self.clusters))
        object.__setattr__(self, "clusters", norm)

    @property
    def key(self) -> tuple[tuple[int, ...], ...]:
        return self.clusters

    def validate(self, n: int) -> None:
        seen: set[int] = set()
        for c in self.clusters:
            if not c:
                raise ValueError("empty cluster")
            if self.n_max and len(c) > self.n_max:
                raise ValueError(f"cluster {c} exceeds n_max={self.n_max}")
            if seen.intersection(c):
                raise ValueError("clusters overlap")
            seen.update(c)
        if seen != set(range(n)):
            raise ValueError("clusters do not cover all pieces")


def single_linkage(GI: np.ndarray, d_max: float, n_max: int, hard_stop: bool = False) -> Partition:
    """Agglomerate singletons while the closest admissible pair links within ``d_max``.

    A merge that would exceed ``n_max`` is skipped and the next-closest pair is
    tried; with ``hard_stop`` the process ends at the first such merge instead.
    Equal linkages are resolved by the smallest (min-index, min-index) pair.
    """
    GI = np.asarray(GI, dtype=float)
    n = len(GI)
    clusters = [[i] for i in range(n)]
    while len(clusters) > 1:
        pairs = []
        for a in range(len(clusters)):
            for b in range(a + 1, len(clusters)):
                link = min(GI[i, j] for i in clusters[a] for j in clusters[b])
                pairs.append(((link, min(clusters[a]), min(clusters[b])), a, b))
        pairs.sort()
        merged = False
        for (link, _, _), a, b in pairs:
            if link > d_max:
                break
            if len(clusters[a]) + len(clusters[b]) > n_max:
                if hard_stop:
                    return Partition(tuple(tuple(c) for c in clusters), d_max, n_max)
                continue
            clusters[a] = sorted(clusters[a] + clusters[b])
            del clusters[b]
            merged = True
            break
        if not merged:
            break
    return Partition(tuple(tuple(c) for c in clusters), d_max, n_max)


def thresholds(GI: np.ndarray) -> list[float]:
    n = len(GI)
    vals = {float(GI[i, j]) for i in range(n) for j in range(n) if i != j}
    return sorted(vals)


def enumerate_partitions(GI: np.ndarray, n_max_range: Sequence[int] | None = None,
                         threshold_values: Sequence[float] | None = None, *, cap: int = 4,
                         hard_stop: bool = False) -> list[Partition]:
    """Distinct partitions over all (threshold, n_max) combinations.

    Order: by n_max, then ascending threshold; the first parameters that
    produce a clustering are the ones recorded on it.
    """
    GI = np.asarray(GI, dtype=float)
    n = len(GI)
    if n_max_range is None:
        n_max_range = range(1, min(n, cap) + 1)
    if threshold_values is None:
        threshold_values = thresholds(GI) or [0.0]
    else:
        threshold_values = sorted(set(float(t) for t in threshold_values))
    out: list[Partition] = []
    seen = set()
    for n_max in n_max_range:
        for d in threshold_values:
            p = single_linkage(GI, d, n_max, hard_stop)
            if p.key not in seen:
                seen.add(p.key)
                out.append(p)
    return out


def partition_penalty(packed_boxes: Sequence[Rect]) -> float:
    return float(sum(b.length * b.height for b in packed_boxes))


def filter_partitions(partitions: Sequence[Partition], penalties: Sequence[float],
                      n_partitions: int) -> list[Partition]:
    if n_partitions < 1:
        raise ValueError("n_partitions must be >= 1")
    order = sorted(range(len(partitions)), key=lambda k: (penalties[k], k))
    return [partitions[k] for k in order[:n_partitions]]
