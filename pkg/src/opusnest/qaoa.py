"""Noiseless statevector QAOA for the path QUBO.

Basis index ``k`` encodes variable ``b`` as bit ``(k >> b) & 1``, the same
node-major variable order used by :mod:`opusnest.tsp`.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Literal

import numpy as np
from scipy.optimize import minimize

from .tsp import HamiltonianPath, QuboModel, build_qubo, decode, path_length

log = logging.getLogger(__name__)

QUBIT_CAP = 16

Optimizer = Literal["nelder-mead", "cobyla", "spsa"]


class QubitCapError(ValueError):
    pass


@dataclass(frozen=True)
class QaoaConfig:
    p: int = 5
    shots: int = 1000
    optimizer: Optimizer = "nelder-mead"
    max_evals: int = 200
    seed: int = 0
    qubit_cap: int = QUBIT_CAP
    initial_step: float = 0.3

    def __post_init__(self) -> None:
        if self.p < 1:
            raise ValueError("p must be >= 1")
        if self.shots < 1:
            raise ValueError("shots must be >= 1")
        if self.optimizer not in ("nelder-mead", "cobyla", "spsa"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")


def bit_table(num_vars: int) -> np.ndarray:
    k = np.arange(1 << num_vars, dtype=np.int64)
    return ((k[:, None] >> np.arange(num_vars)) & 1).astype(np.float64)


class CostDiagonal:
    """QUBO energies of all basis states, with the distinct levels cached for fast phases."""

    def __init__(self, values):
        self.values = np.asarray(values, dtype=float)
        n = self.values.size
        if n == 0 or n & (n - 1):
            raise ValueError("diagonal length is not a power of two")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("non-finite diagonal entry")
        self.num_qubits = n.bit_length() - 1
        self.levels, self.inverse = np.unique(self.values, return_inverse=True)

    def __len__(self) -> int:
        return self.values.size

    def phase(self, gamma: float) -> np.ndarray:
        return np.exp(-1j * gamma * self.levels)[self.inverse]


def _as_diag(diag) -> CostDiagonal:
    return diag if isinstance(diag, CostDiagonal) else CostDiagonal(diag)


def cost_diagonal(q: QuboModel, qubit_cap: int = QUBIT_CAP) -> CostDiagonal:
    nv = q.num_vars
    if nv > qubit_cap:
        raise QubitCapError(f"{nv} qubits exceed the simulator cap of {qubit_cap}")
    X = bit_table(nv)
    return CostDiagonal(q.offset + X @ q.linear + np.einsum("ki,ij,kj->k", X, q.quadratic, X, optimize=True))


def uniform_state(num_qubits: int) -> np.ndarray:
    dim = 1 << num_qubits
    return np.full(dim, 1.0 / np.sqrt(dim), dtype=np.complex128)


def _mixer_blocks(beta: float, num_qubits: int, group: int = 4) -> list[tuple[int, int, np.ndarray]]:
    """exp(-i beta X) on every qubit, fused into Kronecker blocks of up to ``group`` qubits."""
    c, s = np.cos(beta), -1j * np.sin(beta)
    rx = np.array([[c, s], [s, c]], dtype=np.complex128)
    blocks = []
    lo = 0
    while lo < num_qubits:
        g = min(group, num_qubits - lo)
        u = rx
        for _ in range(g - 1):
            u = np.kron(u, rx)
        blocks.append((lo, g, u))
        lo += g
    return blocks


def _apply_mixer(psi: np.ndarray, beta: float, num_qubits: int) -> np.ndarray:
    # identical factors on every qubit, so kron ordering inside a block is irrelevant
    for lo, g, u in _mixer_blocks(beta, num_qubits):
        v = psi.reshape(-1, 1 << g, 1 << lo)
        v[...] = np.tensordot(u, v, axes=([1], [1])).transpose(1, 0, 2)
    return psi


def evolve(gamma, beta, diag: CostDiagonal | np.ndarray) -> np.ndarray:
    """Uniform start, then p layers of exp(-i gamma C) and exp(-i beta sum X)."""
    gamma = np.atleast_1d(np.asarray(gamma, dtype=float))
    beta = np.atleast_1d(np.asarray(beta, dtype=float))
    if gamma.shape != beta.shape:
        raise ValueError(f"gamma/beta length mismatch: {gamma.size} vs {beta.size}")
    diag = _as_diag(diag)
    nq = diag.num_qubits
    psi = uniform_state(nq)
    for g, b in zip(gamma, beta):
        psi *= diag.phase(g)
        _apply_mixer(psi, b, nq)
    return psi


def expectation(sv: np.ndarray, diag: CostDiagonal | np.ndarray) -> float:
    values = diag.values if isinstance(diag, CostDiagonal) else np.asarray(diag, dtype=float)
    if sv.size != values.size:
        raise ValueError("state and diagonal lengths differ")
    return float(np.dot(sv.real ** 2 + sv.imag ** 2, values))


def initial_params(p: int, rng: np.random.Generator) -> np.ndarray:
    k = np.arange(p)
    gamma = 0.1 * (k + 1) / p
    beta = 0.1 * (1 - k / p)
    jitter = rng.normal(scale=0.01, size=2 * p)
    return np.concatenate([gamma, beta]) + jitter


def _spsa(f, x0, max_evals, rng, a=0.2, c=0.1, alpha=0.602, gamma=0.101):
    x = np.array(x0, dtype=float)
    A = max(1, max_evals // 20)
    for k in range(max(1, max_evals // 2)):
        ak = a / (k + 1 + A) ** alpha
        ck = c / (k + 1) ** gamma
        delta = rng.choice([-1.0, 1.0], size=x.size)
        g = (f(x + ck * delta) - f(x - ck * delta)) / (2 * ck) * delta
        x = x - ak * g
    return x


def optimize_params(diag: CostDiagonal | np.ndarray, cfg: QaoaConfig) -> tuple[np.ndarray, np.ndarray, float]:
    """Best (gamma, beta, expectation) seen by the configured optimizer."""
    diag = _as_diag(diag)
    p = cfg.p
    rng = np.random.default_rng(cfg.seed)
    scale = float(np.abs(diag.values).max()) or 1.0
    best = {"x": None, "f": np.inf}

    def f(x):
        val = expectation(evolve(x[:p], x[p:], diag), diag)
        if val < best["f"]:
            best["x"], best["f"] = np.array(x), val
        return val / scale

    x0 = initial_params(p, rng)
    f(x0)
    if cfg.optimizer == "nelder-mead":
        simplex = np.vstack([x0, x0 + cfg.initial_step * np.eye(2 * p)])
        minimize(f, x0, method="Nelder-Mead",
                 options={"maxfev": cfg.max_evals, "xatol": 1e-6, "fatol": 1e-9, "initial_simplex": simplex})
    elif cfg.optimizer == "cobyla":
        minimize(f, x0, method="COBYLA", options={"maxiter": cfg.max_evals, "rhobeg": cfg.initial_step})
    else:
        _spsa(f, x0, cfg.max_evals, rng, c=cfg.initial_step)
    x = best["x"]
    return x[:p], x[p:], float(best["f"])


def sample(sv: np.ndarray, shots: int, seed=None) -> dict[int, int]:
    """Measurement counts keyed by basis index."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    probs = np.abs(sv) ** 2
    probs = probs / probs.sum()
    counts = rng.multinomial(shots, probs)
    nz = np.flatnonzero(counts)
    return {int(k): int(counts[k]) for k in nz}


def index_to_bits(k: int, num_vars: int) -> np.ndarray:
    return ((k >> np.arange(num_vars)) & 1).astype(np.uint8)


def postprocess(x, seed=None) -> HamiltonianPath:
    """Repair any bitstring into a permutation matrix and decode it.

    Four passes in order: keep one random 1 per node, keep one random 1 per
    step, give each empty node a random free step, give each empty step a
    random free node.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    x = np.asarray(x).astype(np.uint8).copy()
    n = int(round(np.sqrt(x.size)))
    if n * n != x.size:
        raise ValueError(f"bitstring length {x.size} is not a square")
    M = x.reshape(n, n)  # rows: nodes, columns: steps
    for i in range(n):
        ones = np.flatnonzero(M[i])
        if len(ones) > 1:
            keep = rng.choice(ones)
            M[i] = 0
            M[i, keep] = 1
    for p in range(n):
        ones = np.flatnonzero(M[:, p])
        if len(ones) > 1:
            keep = rng.choice(ones)
            M[:, p] = 0
            M[keep, p] = 1
    for i in range(n):
        if M[i].sum() == 0:
            free = np.flatnonzero(M.sum(axis=0) == 0)
            M[i, rng.choice(free)] = 1
    for p in range(n):
        if M[:, p].sum() == 0:
            free = np.flatnonzero(M.sum(axis=1) == 0)
            M[rng.choice(free), p] = 1
    path = decode(M.reshape(-1))
    assert path is not None
    return path


def solve_tsp_qaoa(D, cfg: QaoaConfig = QaoaConfig()) -> HamiltonianPath:
    """QAOA on the scaled-distance QUBO; the most frequent outcomes are repaired
    and the shortest resulting path (scored on the original D) is returned."""
    D = np.asarray(D, dtype=float)
    n = len(D)
    if n * n > cfg.qubit_cap:
        raise QubitCapError(f"{n * n} qubits exceed the simulator cap of {cfg.qubit_cap}")
    if n <= 1:
        return HamiltonianPath(tuple(range(n)), 0.0)
    dmax = float(np.abs(D).max())
    Ds = D / dmax if dmax > 0 else D
    q = build_qubo(Ds)
    diag = cost_diagonal(q, cfg.qubit_cap)
    gamma, beta, _ = optimize_params(diag, cfg)
    sv = evolve(gamma, beta, diag)
    rng = np.random.default_rng([cfg.seed, 1])
    counts = sample(sv, cfg.shots, rng)
    top = max(counts.values())
    best = None
    for k in sorted(k for k, c in counts.items() if c == top):
        path = postprocess(index_to_bits(k, n * n), rng)
        total = path_length(D, path.sigma)
        if best is None or total < best.total:
            best = HamiltonianPath(path.sigma, total)
    return best
