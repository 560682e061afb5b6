import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import random_layout, square
from opusnest.compat import DiscretizationConfig, distance_matrices
from opusnest.geometry import Polygon, Pose, transform
from opusnest.packing import (
    ClusterPacking,
    Layout,
    greedy_pack,
    global_optimize,
    layout_metrics,
    local_optimize,
    pack_cluster_best,
    pack_rectangles,
    rectangles_feasible,
    relax_and_pack,
    rotate_cluster,
    validate_layout,
)
from opusnest.geometry import Rect

TRI = Polygon([(0, 0), (400, 0), (400, 400)])


def tables_for(pieces, cfg):
    return distance_matrices(pieces, cfg)[1]


def layout_of(polys, H, L=None):
    """Layout with identity poses from already placed polygons."""
    poses = tuple(Pose(p.centroid.x, p.centroid.y, 0) for p in polys)
    L = max(p.bounds[2] for p in polys) if L is None else L
    return Layout(tuple(polys), poses, H, L)


class TestGreedy:
    def test_single_piece(self):
        cfg = DiscretizationConfig.uniform(90, 90, 0.1)
        p = Polygon([(3, 4), (8, 4), (5, 9)])
        cp = greedy_pack([0], [p], tables_for([p], cfg), cfg)
        assert cp.box == Rect(0, 0, 5, 5)
        assert transform(p, cp.poses[0]).bounds == pytest.approx((0, 0, 5, 5))

    def test_two_unit_squares(self):
        cfg = DiscretizationConfig.uniform(90, 90, 0.05)
        sq = [square(), square()]
        cp = greedy_pack([0, 1], sq, tables_for(sq, cfg), cfg)
        assert cp.box.area == pytest.approx(2.0, abs=0.06)

    def test_right_triangles_form_square(self):
        cfg = DiscretizationConfig.uniform(45, 180, 400 * math.sqrt(2) / 3 / 40)
        tri = [TRI, TRI]
        cp = greedy_pack([0, 1], tri, tables_for(tri, cfg), cfg)
        # no box holding both halves can be smaller than their total area
        assert cp.box.area == pytest.approx(2 * TRI.area, rel=1e-6)

    def test_pieces_do_not_overlap(self, puzzle1):
        pieces = puzzle1.polygons()
        cfg = DiscretizationConfig.uniform(30, 90, 10)
        cp = greedy_pack([0, 3, 1, 4], pieces, tables_for(pieces, cfg), cfg)
        lay = Layout(tuple(pieces[i] for i in cp.indices), cp.poses, cp.box.height, cp.box.length)
        assert validate_layout(lay) == []

    def test_best_symmetric_returns_forward(self):
        cfg = DiscretizationConfig.uniform(90, 90, 0.05)
        sq = [square(), square()]
        t = tables_for(sq, cfg)
        assert pack_cluster_best([0, 1], sq, t, cfg).indices == (0, 1)
        assert pack_cluster_best([1], sq, t, cfg).box == Rect(0, 0, 1, 1)

    def test_best_is_minimum(self, puzzle1):
        pieces = puzzle1.polygons()
        cfg = DiscretizationConfig.uniform(30, 90, 10)
        t = tables_for(pieces, cfg)
        best = pack_cluster_best([2, 0, 5], pieces, t, cfg)
        fwd = greedy_pack([2, 0, 5], pieces, t, cfg)
        rev = greedy_pack([5, 0, 2], pieces, t, cfg)
        assert best.area <= min(fwd.area, rev.area)

    def test_rotate_cluster(self):
        p = Polygon([(0, 0), (4, 0), (0, 1)])
        cp = ClusterPacking((0,), (Pose(p.centroid.x, p.centroid.y, 0),), Rect(0, 0, 4, 1))
        r = rotate_cluster(cp)
        assert r.box == Rect(0, 0, 1, 4)
        assert transform(p, r.poses[0]).bounds == pytest.approx((0, 0, 1, 4))


class TestPackRectangles:
    def test_two_squares(self):
        res = pack_rectangles([(1, 1), (1, 1)], 2, 1)
        assert sorted((p.x, p.y) for p in res) == [(0, 0), (1, 0)]

    def test_rotation_needed(self):
        assert pack_rectangles([(2, 1)], 1, 2) is None
        res = pack_rectangles([(2, 1)], 1, 2, allow_rotate=True)
        assert res[0].rotated and (res[0].length, res[0].height) == (1, 2)

    @given(st.lists(st.tuples(st.floats(0.5, 10), st.floats(0.5, 10)), min_size=1, max_size=12),
           st.floats(5, 40), st.floats(10, 30), st.booleans())
    def test_outputs_feasible(self, sizes, L, H, rot):
        res = pack_rectangles(sizes, L, H, rot)
        if res is not None:
            assert rectangles_feasible(res, L, H)
            for (l, h), p in zip(sizes, res):
                assert (p.length, p.height) == ((h, l) if p.rotated else (l, h))

    def test_feasibility_checker_rejects_overlap(self):
        from opusnest.packing import RectPlacement

        a = RectPlacement(0, 0, 2, 2, False)
        b = RectPlacement(1, 1, 2, 2, False)
        assert not rectangles_feasible([a, b], 5, 5)
        assert not rectangles_feasible([a], 1.5, 5)


class TestRelax:
    def test_fits_at_target(self):
        res = relax_and_pack([(1, 1), (1, 1)], 1, target_length=2)
        assert res.growth_steps == 0 and res.length_used == 2

    @given(st.lists(st.tuples(st.floats(0.5, 10), st.floats(0.5, 10)), min_size=1, max_size=10))
    def test_infinite_target_always_packs(self, sizes):
        H = max(h for _, h in sizes)
        res = relax_and_pack(sizes, H)
        assert res is not None and res.growth_steps == 0
        assert res.length_used <= res.bin_length + 1e-9
        assert rectangles_feasible(res.placements, res.bin_length, H)

    def test_grows_when_target_short(self):
        res = relax_and_pack([(3, 1), (3, 1)], 1, target_length=5, growth=1.05, tighten=False)
        assert res.growth_steps == math.ceil(math.log(6 / 5) / math.log(1.05))
        assert res.length_used == 6

    def test_cap_exhausted(self):
        assert relax_and_pack([(3, 3)], 2, target_length=1, cap=3) is None


class TestLocal:
    def test_single_piece_goes_to_corner(self):
        p = square(5, 5, 2)
        lay = local_optimize(layout_of([p], 10, 10), 0.5)
        x0, y0, _, _ = lay.placed[0].bounds
        assert x0 < 0.5 and y0 < 0.5

    def test_flush_fixpoint(self):
        lay = layout_of([square(0, 0), square(1, 0), square(0, 1)], 2)
        out = local_optimize(lay, 0.25)
        assert out.poses == lay.poses and out.length == lay.length

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=15)
    def test_monotone_and_valid(self, seed):
        lay = random_layout(np.random.default_rng(seed))
        out = local_optimize(lay, 1.0)
        assert out.length <= lay.length + 1e-9
        assert validate_layout(out) == []


class TestGlobal:
    def test_pocket_is_filled(self):
        # the rightmost square fits in the empty upper-left quadrant
        lay = layout_of([square(0, 0), square(1, 0), square(3, 0)], 2)
        out = global_optimize(lay, 100, (0.0,), 0.25)
        assert out.length == pytest.approx(2.0)
        assert validate_layout(out) == []

    def test_pocket_brute_force_oracle(self):
        # every placement of the third square on a fine grid; best achievable length is 2
        fixed = [square(0, 0), square(1, 0)]
        best = math.inf
        for x in np.arange(0, 4.01, 0.25):
            for y in np.arange(0, 1.01, 0.25):
                c = square(x, y)
                if validate_layout(layout_of(fixed + [c], 2, 5)) == []:
                    best = min(best, max(2.0, x + 1))
        out = global_optimize(layout_of(fixed + [square(3, 0)], 2), 100, (0.0,), 0.25)
        assert out.length == pytest.approx(best)

    def test_tight_fixpoint(self):
        lay = layout_of([square(0, 0), square(1, 0), square(0, 1), square(1, 1)], 2)
        out = global_optimize(lay, 50, (0.0, 90.0), 0.25)
        assert out.poses == lay.poses

    @given(st.integers(0, 2**32 - 1))
    @settings(max_examples=10)
    def test_monotone_and_valid(self, seed):
        lay = random_layout(np.random.default_rng(seed))
        out = global_optimize(lay, 25, (0.0, 90.0, 180.0, 270.0), 1.0)
        assert out.length <= lay.length + 1e-9
        assert validate_layout(out) == []


class TestMetrics:
    def test_tiled(self):
        assert layout_metrics(layout_of([square(0, 0), square(1, 0)], 1))[2] == 0

    def test_half(self):
        assert layout_metrics(layout_of([square()], 1, 2)) == (2, 1, 0.5)

    def test_valid(self):
        assert validate_layout(layout_of([square(0, 0), square(1, 0)], 1)) == []

    def test_coincident(self):
        v = validate_layout(layout_of([square(), square()], 1))
        assert len(v) == 1 and "overlap" in v[0]

    def test_past_wall(self):
        v = validate_layout(layout_of([square(0, 0), square(1.5, 0)], 1, 2))
        assert len(v) == 1 and "outside" in v[0]
