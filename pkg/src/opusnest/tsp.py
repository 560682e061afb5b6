"""Shortest open Hamiltonian paths: exact search, QUBO encoding, metrics.

QUBO variables are node-major: variable ``i * n + p`` is 1 when node ``i``
is visited at step ``p``.
"""

from __future__ import annotations

import itertools
import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np

log = logging.getLogger(__name__)

BRUTE_FORCE_LIMIT = 10


class TspError(ValueError):
    pass


@dataclass(frozen=True)
class HamiltonianPath:
    sigma: tuple[int, ...]
    total: float


def _check_perm(sigma: Sequence[int], n: int) -> tuple[int, ...]:
    s = tuple(int(v) for v in sigma)
    if sorted(s) != list(range(n)):
        raise TspError(f"{s} is not a permutation of 0..{n - 1}")
    return s


def path_length(D, sigma: Sequence[int]) -> float:
    D = np.asarray(D, dtype=float)
    s = _check_perm(sigma, len(D))
    return float(sum(D[a, b] for a, b in zip(s, s[1:])))


def _undirected_paths(n: int):
    # each undirected path once: first node smaller than last
    for perm in itertools.permutations(range(n)):
        if n < 2 or perm[0] < perm[-1]:
            yield perm


def brute_force(D, limit: int = BRUTE_FORCE_LIMIT) -> HamiltonianPath:
    """Exact minimum over all n! orders; of a reversed pair the lexicographically smaller wins."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if n > limit:
        raise TspError(f"brute force refused for n={n} > limit {limit}")
    if n == 0:
        return HamiltonianPath((), 0.0)
    best, best_total = None, np.inf
    # permutations() yields in lexicographic order, so strict < keeps the smallest
    for perm in _undirected_paths(n):
        total = 0.0
        for a, b in zip(perm, perm[1:]):
            total += D[a, b]
        if total < best_total - 1e-12:
            best, best_total = perm, total
    return HamiltonianPath(tuple(best), float(path_length(D, best)))


def path_extremes(D, limit: int = BRUTE_FORCE_LIMIT) -> tuple[float, float]:
    D = np.asarray(D, dtype=float)
    n = len(D)
    if n > limit:
        raise TspError(f"enumeration refused for n={n} > limit {limit}")
    totals = [path_length(D, p) for p in _undirected_paths(n)] or [0.0]
    return min(totals), max(totals)


def optimality(D, sigma: Sequence[int], extremes: tuple[float, float] | None = None) -> float:
    """1 at the shortest path, 0 at the longest."""
    lo, hi = extremes if extremes is not None else path_extremes(D)
    if hi - lo <= 1e-12 * max(1.0, abs(hi)):
        log.debug("optimality: all paths have equal length")
        return 1.0
    v = 1.0 - (path_length(D, sigma) - lo) / (hi - lo)
    return min(1.0, max(0.0, v))


@dataclass(frozen=True)
class QuboModel:
    """Energy = offset + linear @ x + x @ quadratic @ x, quadratic strictly upper triangular."""

    n: int
    linear: np.ndarray
    quadratic: np.ndarray
    penalty: float
    offset: float

    @property
    def num_vars(self) -> int:
        return self.n * self.n


def build_qubo(D, A: float | None = None) -> QuboModel:
    D = np.asarray(D, dtype=float)
    n = len(D)
    dmax = float(np.abs(D).max()) if n else 0.0
    if A is None:
        A = 2.0 * dmax + 1.0
    if not A > dmax:
        raise TspError(f"penalty A={A} must exceed max|d|={dmax}")
    nv = n * n
    lin = np.full(nv, -2.0 * A)
    Q = np.zeros((nv, nv))

    def add(u, v, c):
        if u == v:
            lin[u] += c
        else:
            Q[min(u, v), max(u, v)] += c

    for i in range(n):
        for j in range(n):
            if D[i, j] == 0.0:
                continue
            for p in range(n - 1):
                add(i * n + p, j * n + p + 1, D[i, j])
    # (1 - sum x)^2 = 1 - sum x + 2 sum_{a<b} x_a x_b over each row and column
    for i in range(n):
        for p in range(n):
            for q in range(p + 1, n):
                add(i * n + p, i * n + q, 2.0 * A)
    for p in range(n):
        for i in range(n):
            for j in range(i + 1, n):
                add(i * n + p, j * n + p, 2.0 * A)
    return QuboModel(n, lin, Q, float(A), 2.0 * A * n)


def qubo_energy(q: QuboModel, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (q.num_vars,):
        raise TspError(f"bitstring length {x.size} != {q.num_vars}")
    return float(q.offset + q.linear @ x + x @ q.quadratic @ x)


def encode(sigma: Sequence[int]) -> np.ndarray:
    n = len(sigma)
    x = np.zeros(n * n, dtype=np.uint8)
    for p, i in enumerate(sigma):
        x[i * n + p] = 1
    return x


def decode(x, D=None) -> HamiltonianPath | None:
    """Path encoded by a permutation-matrix bitstring, or None if invalid."""
    x = np.asarray(x).astype(int)
    n = int(round(np.sqrt(x.size)))
    if n * n != x.size:
        raise TspError(f"bitstring length {x.size} is not a square")
    M = x.reshape(n, n)
    if not (np.all(M.sum(axis=0) == 1) and np.all(M.sum(axis=1) == 1)):
        return None
    sigma = tuple(int(np.flatnonzero(M[:, p])[0]) for p in range(n))
    total = path_length(D, sigma) if D is not None else float("nan")
    return HamiltonianPath(sigma, total)
