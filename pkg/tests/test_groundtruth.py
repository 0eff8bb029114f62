import math

import numpy as np
import pytest

from sepmap.groundtruth import (Annotation, RegionAnnotation, SepPoint, augment,
                                load_annotation, make_groundtruth, region_to_sep,
                                rotate90cw, save_annotation)


def rasterized_centroid(polygon, step: float = 0.01):
    """Mass centroid by dense point-in-polygon sampling (crossing number)."""
    poly = np.asarray(polygon, dtype=np.float64)
    x0, y0 = poly.min(axis=0) - step
    x1, y1 = poly.max(axis=0) + step
    # Sample at cell centers so the mass estimate is unbiased.
    xs = np.arange(x0 + step / 2, x1, step)
    ys = np.arange(y0 + step / 2, y1, step)
    gx, gy = np.meshgrid(xs, ys)
    inside = np.zeros(gx.shape, dtype=bool)
    n = len(poly)
    for i in range(n):
        ax, ay = poly[i]
        bx, by = poly[(i + 1) % n]
        crosses = ((ay > gy) != (by > gy))
        with np.errstate(divide="ignore", invalid="ignore"):
            xk = ax + (gy - ay) * (bx - ax) / (by - ay)
        inside ^= crosses & (gx < xk)
    return float(gx[inside].mean()), float(gy[inside].mean())


class TestRegionToSep:
    def test_unit_square(self):
        assert region_to_sep([(0, 0), (1, 0), (1, 1), (0, 1)]) == (0.5, 0.5)

    def test_triangle(self):
        cx, cy = region_to_sep([(0, 0), (3, 0), (0, 3)])
        assert (cx, cy) == (1.0, 1.0)

    def test_concave_l_shape_matches_rasterization(self):
        poly = [(0, 0), (4, 0), (4, 1), (1, 1), (1, 3), (0, 3)]
        cx, cy = region_to_sep(poly)
        rx, ry = rasterized_centroid(poly)
        assert abs(cx - rx) < 5e-3 and abs(cy - ry) < 5e-3

    def test_translation_equivariance(self):
        poly = [(0, 0), (4, 0), (4, 1), (1, 1), (1, 3), (0, 3)]
        cx, cy = region_to_sep(poly)
        tx, ty = region_to_sep([(x + 10.5, y - 3.25) for x, y in poly])
        assert abs(tx - (cx + 10.5)) < 1e-9 and abs(ty - (cy - 3.25)) < 1e-9

    def test_vertex_rotation_invariance(self):
        poly = [(0, 0), (4, 0), (4, 1), (1, 1), (1, 3), (0, 3)]
        base = region_to_sep(poly)
        for shift in range(1, len(poly)):
            rotated = poly[shift:] + poly[:shift]
            got = region_to_sep(rotated)
            assert abs(got[0] - base[0]) < 1e-12 and abs(got[1] - base[1]) < 1e-12

    def test_degenerate_polygon_error(self):
        with pytest.raises(ValueError, match="degenerate"):
            region_to_sep([(0, 0), (1, 1), (2, 2)])


class TestMakeGroundtruth:
    def test_sep_pixel_is_one_and_decay_at_sigma(self):
        ann = Annotation("img", seps=(SepPoint(20, 20),))
        gt = make_groundtruth(ann, 64, 64, sigma=8.0)
        plane = gt.plane()
        assert plane[20, 20] == 1.0
        assert abs(float(plane[20, 28]) - math.exp(-0.5)) < 1e-6

    def test_range_and_monotonicity(self):
        ann = Annotation("img", seps=(SepPoint(10, 12), SepPoint(40, 30)))
        plane = make_groundtruth(ann, 64, 64, sigma=6.0).plane().astype(np.float64)
        assert plane.min() >= 0.0 and plane.max() <= 1.0
        from sepmap.raster import distance_transform
        d = distance_transform([(10, 12), (40, 30)], 64, 64).plane(0).astype(np.float64)
        order = np.argsort(d.ravel())
        r_sorted = plane.ravel()[order]
        assert (np.diff(r_sorted) <= 1e-9).all()  # r(p) > r(q) iff d(p) < d(q)

    def test_visualization_regime_sigma_50(self):
        ann = Annotation("img", seps=(SepPoint(256, 256),))
        plane = make_groundtruth(ann, 512, 512, sigma=50.0).plane()
        assert abs(float(plane[256, 306]) - math.exp(-0.5)) < 1e-6
        assert float(plane[256, 506]) < 5e-5  # flat basin far away

    def test_region_centroid_becomes_sep(self):
        poly = ((5, 5), (11, 5), (11, 11), (5, 11))
        ann = Annotation("img", regions=(RegionAnnotation(poly),))
        gt = make_groundtruth(ann, 32, 32, sigma=4.0)
        assert gt.seps == ((8.0, 8.0),)
        assert gt.plane()[8, 8] == 1.0

    def test_superposition_well_separated(self):
        sigma = 3.0
        ann_both = Annotation("img", seps=(SepPoint(10, 10), SepPoint(50, 50)))
        both = make_groundtruth(ann_both, 64, 64, sigma).plane()
        single = make_groundtruth(Annotation("img", seps=(SepPoint(10, 10),)), 64, 64, sigma).plane()
        ys, xs = np.mgrid[0:64, 0:64]
        disk = (xs - 10) ** 2 + (ys - 10) ** 2 <= (3 * sigma) ** 2
        assert np.max(np.abs(both[disk] - single[disk])) < 1e-4

    def test_no_seps_error(self):
        with pytest.raises(ValueError, match="no SEPs"):
            make_groundtruth(Annotation("img"), 16, 16, 5.0)

    def test_bad_sigma_error(self):
        with pytest.raises(ValueError, match="sigma"):
            make_groundtruth(Annotation("img", seps=(SepPoint(1, 1),)), 16, 16, 0.0)

    def test_edge_coordinate_clamps_to_grid(self):
        ann = Annotation("img", seps=(SepPoint(15.9, 0.0),))
        plane = make_groundtruth(ann, 16, 16, 2.0).plane()
        assert plane[0, 15] == 1.0


class TestAugment:
    def test_default_count_is_14(self):
        rng = np.random.default_rng(0)
        image = rng.random((16, 16, 4)).astype(np.float32)
        target = rng.random((16, 16)).astype(np.float32)
        pairs = augment(image, target, crop_count=4, crop_size=(8, 8), rng_seed=1)
        assert len(pairs) == 14
        assert pairs[0][0].shape == (16, 16, 4)
        assert pairs[-1][0].shape == (8, 8, 4)

    def test_mirror_involution_bit_exact(self):
        rng = np.random.default_rng(1)
        image = rng.random((12, 12, 3)).astype(np.float32)
        target = rng.random((12, 12)).astype(np.float32)
        pairs = augment(image, target, crop_count=0, rng_seed=0)
        mirrored_img, mirrored_tgt = pairs[8]  # horizontal mirror
        assert np.array_equal(mirrored_img[:, ::-1], image)
        assert np.array_equal(mirrored_tgt[:, ::-1], target)
        flipped_img, _ = pairs[9]  # vertical mirror
        assert np.array_equal(flipped_img[::-1, :], image)

    def test_quarter_turn_moves_peak(self):
        target = np.zeros((10, 10), dtype=np.float32)
        x, y = 3, 1
        target[y, x] = 1.0
        rotated = rotate90cw(target)
        h = 10
        assert rotated[x, h - 1 - y] == 1.0  # (x, y) -> (H-1-y, x)
        pairs = augment(target[:, :, None], target, crop_count=0, rng_seed=0)
        assert np.array_equal(pairs[2][1], rotated)

    def test_exact_rotations_preserve_value_multiset(self):
        rng = np.random.default_rng(3)
        target = rng.random((8, 8)).astype(np.float32)
        pairs = augment(target[:, :, None], target, crop_count=0, rng_seed=0)
        base = np.sort(target.ravel())
        for k in (0, 2, 4, 6, 8, 9):  # quarter turns and mirrors
            assert np.array_equal(np.sort(pairs[k][1].ravel()), base)

    def test_diagonal_rotation_fills_corners_with_zero(self):
        target = np.ones((9, 9), dtype=np.float32)
        pairs = augment(target[:, :, None], target, crop_count=0, rng_seed=0)
        rot45 = pairs[1][1]
        assert rot45[0, 0] == 0.0 and rot45[8, 8] == 0.0
        assert rot45[4, 4] == 1.0

    def test_eight_half_turns_compose_to_identity(self):
        # Rotating the 45-degree variant by 45 degrees seven more times is not
        # exact, but the even slots must be exact quarter turns.
        target = np.arange(16, dtype=np.float32).reshape(4, 4)
        pairs = augment(target[:, :, None], target, crop_count=0, rng_seed=0)
        assert np.array_equal(pairs[0][1], target)
        assert np.array_equal(rotate90cw(rotate90cw(pairs[4][1])), target)

    def test_crops_deterministic_and_aligned(self):
        rng = np.random.default_rng(4)
        image = rng.random((16, 16, 2)).astype(np.float32)
        target = rng.random((16, 16)).astype(np.float32)
        a = augment(image, target, crop_count=3, crop_size=(5, 7), rng_seed=99)
        b = augment(image, target, crop_count=3, crop_size=(5, 7), rng_seed=99)
        for (ia, ta), (ib, tb) in zip(a, b):
            assert np.array_equal(ia, ib) and np.array_equal(ta, tb)
        # crop contents come from the same window of image and target
        crop_img, crop_tgt = a[-1]
        found = False
        for y0 in range(16 - 5 + 1):
            for x0 in range(16 - 7 + 1):
                if np.array_equal(image[y0:y0 + 5, x0:x0 + 7], crop_img):
                    assert np.array_equal(target[y0:y0 + 5, x0:x0 + 7], crop_tgt)
                    found = True
        assert found

    def test_oversized_crop_error(self):
        image = np.zeros((8, 8, 1), dtype=np.float32)
        with pytest.raises(ValueError, match="crop"):
            augment(image, image[:, :, 0], crop_count=1, crop_size=(9, 4), rng_seed=0)

    def test_shape_mismatch_error(self):
        with pytest.raises(ValueError, match="differ"):
            augment(np.zeros((8, 8, 1)), np.zeros((9, 8)), crop_count=0)


class TestAnnotationJson:
    def test_round_trip_bit_exact(self, tmp_path):
        ann = Annotation(
            "img_0001",
            seps=(SepPoint(1.25, 2.5, "crop"), SepPoint(10.125, 3.0, "weed")),
            regions=(RegionAnnotation(((1.0, 1.0), (4.5, 1.5), (2.25, 6.0)), "weed"),),
        )
        p1 = tmp_path / "a.json"
        p2 = tmp_path / "b.json"
        save_annotation(p1, ann)
        loaded = load_annotation(p1)
        assert loaded == ann
        save_annotation(p2, loaded)
        assert p1.read_bytes() == p2.read_bytes()

    def test_uncertain_instances_dropped_at_load(self, tmp_path):
        doc = """{
 "image_id": "x",
 "seps": [{"x": 1.0, "y": 2.0, "species": "crop", "uncertain": true},
          {"x": 3.0, "y": 4.0, "species": "crop", "uncertain": false}],
 "regions": [{"polygon": [[0,0],[1,0],[0,1]], "species": "weed", "uncertain": true}]
}"""
        path = tmp_path / "u.json"
        path.write_text(doc)
        ann = load_annotation(path)
        assert len(ann.seps) == 1 and ann.seps[0].x == 3.0
        assert len(ann.regions) == 0

    def test_unknown_species_rejected(self):
        with pytest.raises(ValueError, match="species"):
            Annotation("img", seps=(SepPoint(0, 0, "tree"),))

    def test_short_polygon_rejected(self):
        with pytest.raises(ValueError, match="3 vertices"):
            Annotation("img", regions=(RegionAnnotation(((0, 0), (1, 1))),))
