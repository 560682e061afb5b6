"""End-to-end solver and the QAOA tuning experiment."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field, replace
from typing import Literal, Sequence

import numpy as np

from .clustering import enumerate_partitions, filter_partitions, partition_penalty
from .compat import DiscretizationConfig, NffCache, distance_matrices
from .geometry import Polygon, centered_coords, default_eps
from .packing import (
    ClusterPacking,
    Layout,
    assemble_layout,
    global_optimize,
    layout_metrics,
    local_optimize,
    pack_cluster_best,
    relax_and_pack,
    validate_layout,
)
from .qaoa import QUBIT_CAP, QaoaConfig, solve_tsp_qaoa
from .tsp import HamiltonianPath, brute_force, optimality, path_extremes, path_length

log = logging.getLogger(__name__)


class InfeasibleError(RuntimeError):
    """No layout respects the container height."""

    category = "infeasible"


@dataclass(frozen=True)
class SolverConfig:
    discretization: DiscretizationConfig = field(default_factory=DiscretizationConfig.uniform)
    n_max: int = 4
    n_partitions: int = 20
    tsp_backend: Literal["brute", "qaoa"] = "brute"
    qaoa: QaoaConfig = field(default_factory=QaoaConfig)
    qaoa_min_size: int = 3
    grid_divisions: int = 100
    seed: int = 0
    relax_growth: float = 1.05
    relax_cap: int = 60
    hard_stop: bool = False
    workers: int = 1
    eps: float | None = None

    def __post_init__(self) -> None:
        if self.n_max < 1:
            raise ValueError("n_max must be >= 1")
        if self.n_partitions < 1:
            raise ValueError("n_partitions must be >= 1")
        if self.tsp_backend not in ("brute", "qaoa"):
            raise ValueError(f"unknown TSP backend {self.tsp_backend!r}")
        if self.tsp_backend == "qaoa" and self.n_max ** 2 > self.qaoa.qubit_cap:
            raise ValueError(f"n_max={self.n_max} needs {self.n_max ** 2} qubits, cap is {self.qaoa.qubit_cap}")

    def echo(self) -> dict:
        d = asdict(self)
        d["discretization"] = {
            "theta_set": list(self.discretization.theta_set),
            "phi_set": list(self.discretization.phi_set),
            "r_step": self.discretization.r_step,
            "r_max": self.discretization.r_max,
        }
        return d


@dataclass
class SolveReport:
    length: float
    height: float
    waste_area: float
    waste_ratio: float
    stage_times: dict[str, float]
    partitions_generated: int
    partitions_kept: int
    tsp_calls: int
    tsp_backend: str
    seed: int
    config: dict
    trace: list[float] = field(default_factory=list)
    violations: list[str] = field(default_factory=list)
    name: str = ""

    @property
    def waste_percent(self) -> float:
        return 100.0 * self.waste_ratio


def fits_height(p: Polygon, H: float, orientations: Sequence[float]) -> bool:
    return any(np.ptp(centered_coords(p, a)[:, 1]) <= H + 1e-9 for a in orientations)


class _ClusterSolver:
    """Per-cluster TSP + greedy packing, cached by cluster content."""

    def __init__(self, pieces, D, tables, cfg: SolverConfig, eps: float):
        self.pieces = pieces
        self.D = D
        self.tables = tables
        self.cfg = cfg
        self.eps = eps
        self.paths: dict[tuple[int, ...], HamiltonianPath] = {}
        self.packs: dict[tuple[int, ...], ClusterPacking] = {}
        self.tsp_calls = 0

    def path(self, cluster: tuple[int, ...]) -> HamiltonianPath:
        if cluster in self.paths:
            return self.paths[cluster]
        sub = self.D[np.ix_(cluster, cluster)]
        n = len(cluster)
        if n <= 2:
            local = HamiltonianPath(tuple(range(n)), path_length(sub, range(n)))
        elif self.cfg.tsp_backend == "qaoa" and n >= self.cfg.qaoa_min_size:
            seed = int(np.random.SeedSequence([self.cfg.seed, *cluster]).generate_state(1)[0])
            local = solve_tsp_qaoa(sub, replace(self.cfg.qaoa, seed=seed))
            self.tsp_calls += 1
        else:
            local = brute_force(sub)
            self.tsp_calls += 1
        glob = HamiltonianPath(tuple(cluster[k] for k in local.sigma), local.total)
        self.paths[cluster] = glob
        return glob

    def pack(self, cluster: tuple[int, ...]) -> ClusterPacking:
        if cluster not in self.packs:
            sigma = self.path(cluster).sigma
            self.packs[cluster] = pack_cluster_best(sigma, self.pieces, self.tables, self.cfg.discretization, self.eps)
        return self.packs[cluster]


def solve(pieces: Sequence[Polygon], height: float, cfg: SolverConfig = SolverConfig(),
          cache: NffCache | None = None) -> tuple[Layout, SolveReport]:
    pieces = list(pieces)
    if not pieces:
        raise ValueError("no pieces to pack")
    disc = cfg.discretization
    orientations = disc.phi_set
    for i, p in enumerate(pieces):
        if not fits_height(p, height, orientations):
            raise InfeasibleError(f"piece {i} exceeds container height {height:g} in every allowed orientation")
    eps = cfg.eps if cfg.eps is not None else default_eps(pieces)
    times: dict[str, float] = {}

    t0 = time.perf_counter()
    mats, tables = distance_matrices(pieces, disc, eps, cache=cache, workers=cfg.workers)
    times["compatibility"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    n = len(pieces)
    partitions = enumerate_partitions(mats.GI, range(1, min(n, cfg.n_max) + 1), cap=cfg.n_max,
                                      hard_stop=cfg.hard_stop)
    times["clustering"] = time.perf_counter() - t0

    t0 = time.perf_counter()
    cs = _ClusterSolver(pieces, mats.D, tables, cfg, eps)
    packed = [[cs.pack(c) for c in part.clusters] for part in partitions]
    penalties = [partition_penalty([cp.box for cp in cps]) for cps in packed]
    times["cluster_packing"] = time.perf_counter() - t0

    kept = filter_partitions(partitions, penalties, cfg.n_partitions)
    by_key = {part.key: cps for part, cps in zip(partitions, packed)}

    t0 = time.perf_counter()
    allow_rotate = disc.allows_quarter_turn()
    best: Layout | None = None
    best_len = math.inf
    trace: list[float] = []
    for part in kept:
        cps = by_key[part.key]
        sizes = [(cp.box.length, cp.box.height) for cp in cps]
        if any(min(l, h) > height + 1e-9 or (not allow_rotate and h > height + 1e-9) for l, h in sizes):
            log.debug("partition %s: a cluster box exceeds the height", part.clusters)
            continue
        res = relax_and_pack(sizes, height, best_len, allow_rotate, cfg.relax_growth, cfg.relax_cap)
        if res is None:
            continue
        layout = assemble_layout(cps, res.placements, pieces, height)
        layout = local_optimize(layout, disc.r_step, eps)
        if res.height_used <= height + 1e-9 and layout.length < best_len:
            best, best_len = layout, layout.length
        trace.append(best_len)
    times["rectangle_packing"] = time.perf_counter() - t0
    if best is None:
        raise InfeasibleError(f"no partition could be packed within height {height:g}")

    t0 = time.perf_counter()
    best = global_optimize(best, cfg.grid_divisions, orientations, disc.r_step, eps)
    times["global_optimization"] = time.perf_counter() - t0

    violations = validate_layout(best, eps)
    L, W, ratio = layout_metrics(best)
    report = SolveReport(
        length=L, height=float(height), waste_area=W, waste_ratio=ratio, stage_times=times,
        partitions_generated=len(partitions), partitions_kept=len(kept), tsp_calls=cs.tsp_calls,
        tsp_backend=cfg.tsp_backend, seed=cfg.seed, config=cfg.echo(), trace=trace, violations=violations,
    )
    return best, report


def random_symmetric(n: int, rng: np.random.Generator) -> np.ndarray:
    a = np.triu(rng.uniform(0.0, 1.0, (n, n)), 1)
    return a + a.T


def random_path_baseline(D: np.ndarray, rng: np.random.Generator, samples: int = 1000,
                         extremes: tuple[float, float] | None = None) -> float:
    ex = extremes or path_extremes(D)
    return float(np.mean([optimality(D, rng.permutation(len(D)), ex) for _ in range(samples)]))


@dataclass(frozen=True)
class TuningRow:
    optimizer: str
    p: int
    mean_optimality: float
    wall_time: float
    random_baseline: float


def tune_qaoa(num_instances: int = 30, n: int = 4, reps: Sequence[int] = range(1, 6),
              optimizers: Sequence[str] = ("nelder-mead",), shots: int = 1000, seed: int = 0,
              max_evals: int = QaoaConfig.max_evals, qubit_cap: int = QUBIT_CAP,
              initial_step: float = QaoaConfig.initial_step) -> list[TuningRow]:
    """Mean path optimality of QAOA per (optimizer, p) on random symmetric instances."""
    if n * n > qubit_cap:
        raise ValueError(f"{n * n} qubits exceed cap {qubit_cap}")
    rng = np.random.default_rng(seed)
    instances = [random_symmetric(n, rng) for _ in range(num_instances)]
    extremes = [path_extremes(D) for D in instances]
    base_rng = np.random.default_rng([seed, 7])
    baseline = float(np.mean([random_path_baseline(D, base_rng, 1000, ex) for D, ex in zip(instances, extremes)]))
    rows = []
    for opt in optimizers:
        for p in reps:
            t0 = time.perf_counter()
            scores = []
            for k, (D, ex) in enumerate(zip(instances, extremes)):
                cfg = QaoaConfig(p=p, shots=shots, optimizer=opt, max_evals=max_evals, seed=seed * 1000 + k,
                                 qubit_cap=qubit_cap, initial_step=initial_step)
                path = solve_tsp_qaoa(D, cfg)
                scores.append(optimality(D, path.sigma, ex))
            rows.append(TuningRow(opt, p, float(np.mean(scores)), time.perf_counter() - t0, baseline))
            log.info("tune %s p=%d optimality=%.3f", opt, p, rows[-1].mean_optimality)
    return rows
