import math

import numpy as np
import pytest

from sepmap.raster import (MultiChannelRaster, connected_components, distance_transform,
                           otsu_threshold, weighted_centroid)

from oracles import brute_force_distance_transform, exhaustive_otsu


class TestMultiChannelRaster:
    def test_shape_and_accessors(self):
        r = MultiChannelRaster(np.zeros((4, 6, 3), dtype=np.float32))
        assert (r.height, r.width, r.channels) == (4, 6, 3)
        assert r.plane(1).shape == (4, 6)

    def test_rejects_non_finite(self):
        bad = np.zeros((2, 2), dtype=np.float32)
        bad[0, 0] = np.nan
        with pytest.raises(ValueError, match="finite"):
            MultiChannelRaster(bad)

    def test_rejects_empty(self):
        with pytest.raises(ValueError):
            MultiChannelRaster(np.zeros((0, 3), dtype=np.float32))


class TestDistanceTransform:
    def test_single_point_units(self):
        d = distance_transform([(3, 3)], 7, 7).plane(0)
        assert d[3, 3] == 0.0
        assert d[4, 3] == 1.0
        assert d[4, 4] == np.float32(math.sqrt(2.0))

    def test_two_points_midpoint(self):
        d = distance_transform([(0, 0), (9, 0)], 10, 1).plane(0)
        assert d[0, 5] == 4.0

    def test_empty_points_error(self):
        with pytest.raises(ValueError, match="no SEPs"):
            distance_transform([], 4, 4)

    def test_out_of_bounds_error(self):
        with pytest.raises(ValueError, match="outside"):
            distance_transform([(4, 0)], 4, 4)

    def test_matches_brute_force(self):
        rng = np.random.default_rng(11)
        for _ in range(25):
            w = int(rng.integers(1, 65))
            h = int(rng.integers(1, 65))
            n = int(rng.integers(1, 51))
            pts = [(int(rng.integers(0, w)), int(rng.integers(0, h))) for _ in range(n)]
            got = distance_transform(pts, w, h).plane(0)
            want = brute_force_distance_transform(pts, w, h)
            assert np.array_equal(got, want)

    def test_nonnegative_zero_on_points_lipschitz(self):
        rng = np.random.default_rng(5)
        pts = [(int(rng.integers(0, 32)), int(rng.integers(0, 32))) for _ in range(12)]
        d = distance_transform(pts, 32, 32).plane(0).astype(np.float64)
        assert (d >= 0).all()
        for x, y in pts:
            assert d[y, x] == 0.0
        # 1-Lipschitz against axis neighbors.
        assert np.max(np.abs(np.diff(d, axis=0))) <= 1.0 + 1e-6
        assert np.max(np.abs(np.diff(d, axis=1))) <= 1.0 + 1e-6


class TestOtsu:
    def test_bimodal_separates(self):
        values = np.concatenate([np.full(100, 0.1), np.full(20, 0.9)]).reshape(10, 12)
        t = otsu_threshold(values)
        assert 0.1 < t < 0.9

    def test_constant_map_error(self):
        with pytest.raises(ValueError, match="degenerate histogram"):
            otsu_threshold(np.full((8, 8), 0.5))

    def test_matches_exhaustive_search(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            values = rng.random((32, 32))
            assert otsu_threshold(values) == exhaustive_otsu(values)

    def test_permutation_invariance(self):
        rng = np.random.default_rng(4)
        values = rng.random((16, 16))
        shuffled = rng.permutation(values.ravel()).reshape(16, 16)
        assert otsu_threshold(values) == otsu_threshold(shuffled)

    def test_tie_breaks_low(self):
        # Symmetric two-spike histogram: several edges between the spikes give
        # the same variance; the lowest must win.
        values = np.array([0.0] * 8 + [1.0] * 8).reshape(4, 4)
        t = otsu_threshold(values, bins=4)
        assert t == 0.25


class TestConnectedComponents:
    def test_solid_square(self):
        mask = np.zeros((5, 5), dtype=bool)
        mask[1:4, 1:4] = True
        assert connected_components(mask).region_count == 1

    def test_gap_separates(self):
        mask = np.zeros((5, 7), dtype=bool)
        mask[1:4, 0:3] = True
        mask[1:4, 4:7] = True
        assert connected_components(mask, 4).region_count == 2
        assert connected_components(mask, 8).region_count == 2

    def test_diagonal_touch(self):
        mask = np.zeros((2, 2), dtype=bool)
        mask[0, 0] = mask[1, 1] = True
        assert connected_components(mask, 4).region_count == 2
        assert connected_components(mask, 8).region_count == 1

    def test_labels_dense(self):
        rng = np.random.default_rng(9)
        mask = rng.random((24, 24)) > 0.6
        regions = connected_components(mask, 8)
        present = set(np.unique(regions.labels)) - {0}
        assert present == set(range(1, regions.region_count + 1))
        assert np.array_equal(regions.labels != 0, mask)

    def test_partition_invariant_under_enumeration_order(self):
        # Flipping the raster permutes the scan order; the induced partition
        # of pixels must not change.
        rng = np.random.default_rng(12)
        mask = rng.random((20, 20)) > 0.55
        for connectivity in (4, 8):
            base = connected_components(mask, connectivity).labels
            flipped = connected_components(mask[::-1, ::-1], connectivity).labels[::-1, ::-1]
            mapping = {}
            for a, b in zip(base.ravel(), flipped.ravel()):
                assert mapping.setdefault(a, b) == b

    def test_regions_are_connected(self):
        rng = np.random.default_rng(2)
        mask = rng.random((16, 16)) > 0.5
        for connectivity in (4, 8):
            regions = connected_components(mask, connectivity)
            offsets = [(-1, 0), (1, 0), (0, -1), (0, 1)]
            if connectivity == 8:
                offsets += [(-1, -1), (-1, 1), (1, -1), (1, 1)]
            for label in range(1, regions.region_count + 1):
                pix = {(x, y) for x, y in regions.pixels(label)}
                start = next(iter(pix))
                seen = {start}
                stack = [start]
                while stack:
                    cx, cy = stack.pop()
                    for dx, dy in offsets:
                        q = (cx + dx, cy + dy)
                        if q in pix and q not in seen:
                            seen.add(q)
                            stack.append(q)
                assert seen == pix


class TestWeightedCentroid:
    def test_single_pixel(self):
        weights = np.zeros((10, 10), dtype=np.float32)
        weights[7, 5] = 2.5
        assert weighted_centroid(np.array([[5, 7]]), weights) == (5.0, 7.0)

    def test_equal_weights_symmetric(self):
        weights = np.ones((3, 3), dtype=np.float32)
        cx, cy = weighted_centroid(np.array([[0, 0], [2, 0]]), weights)
        assert (cx, cy) == (1.0, 0.0)

    def test_weighted_mean(self):
        weights = np.array([[1.0, 0.0, 0.0, 3.0]], dtype=np.float32)
        cx, cy = weighted_centroid(np.array([[0, 0], [3, 0]]), weights)
        assert (cx, cy) == (2.25, 0.0)

    def test_massless_region_error(self):
        with pytest.raises(ValueError, match="massless"):
            weighted_centroid(np.array([[0, 0]]), np.zeros((2, 2), dtype=np.float32))

    def test_symmetric_region_center(self):
        ys, xs = np.mgrid[0:7, 0:7]
        weights = np.exp(-((xs - 3.0) ** 2 + (ys - 3.0) ** 2)).astype(np.float32)
        pixels = np.stack([xs.ravel(), ys.ravel()], axis=1)
        cx, cy = weighted_centroid(pixels, weights)
        assert abs(cx - 3.0) < 1e-5 and abs(cy - 3.0) < 1e-5
