from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.spatial import ConvexHull
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st

from opusnest.geometry import Polygon
from opusnest.interface import bundled_instance, load_instance

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

UNIT_SQUARE = [(0, 0), (1, 0), (1, 1), (0, 1)]


def square(x=0.0, y=0.0, s=1.0) -> Polygon:
    return Polygon([(x, y), (x + s, y), (x + s, y + s), (x, y + s)])


def regular_polygon(k: int, radius: float = 1.0, phase: float = 0.0) -> Polygon:
    t = phase + 2 * math.pi * np.arange(k) / k
    return Polygon(np.column_stack([radius * np.cos(t), radius * np.sin(t)]))


def random_convex(rng: np.random.Generator, scale: float = 10.0, max_k: int = 7) -> Polygon:
    k = int(rng.integers(3, max_k + 1))
    ang = np.sort(rng.uniform(0, 2 * math.pi, k))
    while np.min(np.diff(np.r_[ang, ang[0] + 2 * math.pi])) < 0.3:
        ang = np.sort(rng.uniform(0, 2 * math.pi, k))
    rad = scale * rng.uniform(0.6, 1.0, k)
    pts = np.column_stack([rad * np.cos(ang), rad * np.sin(ang)])
    return Polygon(pts[ConvexHull(pts).vertices])


@st.composite
def convex_polygons(draw, scale=10.0):
    seed = draw(st.integers(0, 2**32 - 1))
    return random_convex(np.random.default_rng(seed), scale)


@st.composite
def distance_matrices(draw, n_min=2, n_max=5):
    n = draw(st.integers(n_min, n_max))
    vals = draw(st.lists(st.floats(0, 10, allow_nan=False), min_size=n * (n - 1) // 2, max_size=n * (n - 1) // 2))
    D = np.zeros((n, n))
    D[np.triu_indices(n, 1)] = vals
    return D + D.T


@pytest.fixture(scope="session")
def puzzle1():
    return load_instance(bundled_instance("puzzle1"))


def random_layout(rng: np.random.Generator, k_max: int = 6, height: float = 40.0):
    """Valid layout of random convex pieces dropped at random free spots."""
    from opusnest.geometry import Pose, overlap, transform
    from opusnest.packing import Layout

    k = int(rng.integers(1, k_max + 1))
    length = 30.0 * k
    pieces, poses, placed = [], [], []
    for _ in range(k):
        p = random_convex(rng, float(rng.uniform(4, 9)))
        for _ in range(200):
            ang = float(rng.choice([0, 90, 180, 270]))
            ext = transform(p, Pose(0, 0, ang)).bounds
            lo_x, hi_x = -ext[0], length - ext[2]
            lo_y, hi_y = -ext[1], height - ext[3]
            pose = Pose(float(rng.uniform(lo_x, hi_x)), float(rng.uniform(lo_y, hi_y)), ang)
            q = transform(p, pose)
            if not any(overlap(q, o, 1e-6) for o in placed):
                pieces.append(p)
                poses.append(pose)
                placed.append(q)
                break
    right = max(q.bounds[2] for q in placed)
    return Layout(tuple(pieces), tuple(poses), height, right)
