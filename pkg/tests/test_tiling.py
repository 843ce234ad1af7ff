import numpy as np
import pytest

from vand.core import BBox, ForegroundComponent, ImageSample, PipelineConfig, TilePlan
from vand.tiling import extract_tile, plan_tiles


def component_for(bbox: BBox, image_dims, part_count=0) -> ForegroundComponent:
    h, w = image_dims
    mask = np.zeros((h, w), dtype=bool)
    rows, cols = bbox.slices()
    mask[rows, cols] = True
    return ForegroundComponent(id=0, mask=mask, bbox=bbox, part_count=part_count)


def central_half_interval(start: int, side: int) -> tuple[int, int]:
    quarter = side // 4
    return start + quarter, start + side - quarter


def intervals_cover(intervals, lo, hi) -> bool:
    """True if the union of [a, b) intervals covers [lo, hi)."""
    reached = lo
    for a, b in sorted(intervals):
        if a > reached:
            return False
        reached = max(reached, b)
        if reached >= hi:
            return True
    return reached >= hi


class TestDefaultRule:
    def test_small_blob_gets_minimum_side_window(self):
        bbox = BBox(450, 450, 100, 100)
        comp = component_for(bbox, (1000, 1000))
        plans = plan_tiles(comp, (1000, 1000), PipelineConfig())
        assert len(plans) == 1
        win = plans[0].window
        assert win.w == win.h == 352
        # Centred on the blob centre.
        assert win.x0 + win.w // 2 == bbox.x0 + bbox.w // 2
        assert win.y0 + win.h // 2 == bbox.y0 + bbox.h // 2

    def test_large_component_fits_in_one_tile(self):
        bbox = BBox(50, 300, 900, 200)
        comp = component_for(bbox, (800, 1000), part_count=5)
        plans = plan_tiles(comp, (800, 1000), PipelineConfig())
        assert len(plans) == 1
        assert plans[0].ideal_window.w == plans[0].ideal_window.h == 900

    def test_elongation_alone_does_not_trigger_strips(self):
        bbox = BBox(0, 0, 90, 20)
        comp = component_for(bbox, (500, 500), part_count=20)  # not > threshold
        plans = plan_tiles(comp, (500, 500), PipelineConfig(min_tile_side=32))
        assert len(plans) == 1

    def test_window_contains_bbox(self):
        bbox = BBox(10, 20, 60, 40)
        comp = component_for(bbox, (480, 640))
        plans = plan_tiles(comp, (480, 640), PipelineConfig())
        assert plans[0].window.contains(bbox)


class TestStripRule:
    def test_strip_layout_geometry(self):
        # Elongated 900x200 component with many parts: 352-sided windows
        # whose centres step by half the short axis (100 px) along x.
        bbox = BBox(200, 400, 900, 200)
        comp = component_for(bbox, (1000, 2000), part_count=25)
        plans = plan_tiles(comp, (1000, 2000), PipelineConfig())
        assert len(plans) > 1
        sides = {(p.ideal_window.w, p.ideal_window.h) for p in plans}
        assert sides == {(352, 352)}
        centers = [p.ideal_window.x0 + 352 // 2 for p in plans]
        assert centers[0] == bbox.x0
        assert centers[-1] == bbox.x1 - 1
        steps = np.diff(centers)
        assert all(s == 100 for s in steps[:-1])
        assert steps[-1] <= 100

    def test_every_long_axis_coordinate_in_a_central_half(self):
        bbox = BBox(200, 400, 900, 200)
        comp = component_for(bbox, (1000, 2000), part_count=25)
        plans = plan_tiles(comp, (1000, 2000), PipelineConfig())
        halves = [
            central_half_interval(p.ideal_window.x0, p.ideal_window.w) for p in plans
        ]
        assert intervals_cover(halves, bbox.x0, bbox.x1)

    def test_vertical_strips(self):
        bbox = BBox(30, 5, 20, 200)
        comp = component_for(bbox, (300, 400), part_count=30)
        plans = plan_tiles(comp, (300, 400), PipelineConfig(min_tile_side=32))
        assert len(plans) > 1
        halves = [
            central_half_interval(p.ideal_window.y0, p.ideal_window.h) for p in plans
        ]
        assert intervals_cover(halves, bbox.y0, bbox.y1)

    def test_one_pixel_wide_component_terminates(self):
        bbox = BBox(3, 1, 1, 30)
        comp = component_for(bbox, (40, 10), part_count=25)
        plans = plan_tiles(comp, (40, 10), PipelineConfig(min_tile_side=4))
        assert len(plans) == 30  # step floors to 1 pixel
        assert all(p.window.x1 <= 10 and p.window.y1 <= 40 for p in plans)


class TestPlanProperties:
    def test_deterministic(self):
        bbox = BBox(5, 9, 80, 17)
        comp = component_for(bbox, (200, 300), part_count=25)
        cfg = PipelineConfig(min_tile_side=32)
        assert plan_tiles(comp, (200, 300), cfg) == plan_tiles(comp, (200, 300), cfg)

    def test_coverage_fuzz(self):
        rng = np.random.default_rng(97)
        for _ in range(2000):
            h = int(rng.integers(4, 500))
            w = int(rng.integers(4, 500))
            bw = int(rng.integers(1, w + 1))
            bh = int(rng.integers(1, h + 1))
            bbox = BBox(
                int(rng.integers(0, w - bw + 1)), int(rng.integers(0, h - bh + 1)), bw, bh
            )
            part_count = int(rng.integers(0, 40))
            cfg = PipelineConfig(min_tile_side=int(rng.integers(2, 400)))
            comp = ForegroundComponent(
                id=0, mask=np.ones((1, 1), bool), bbox=bbox, part_count=part_count
            )
            plans = plan_tiles(comp, (h, w), cfg)
            assert plans, "a component always yields at least one tile"
            for p in plans:
                assert p.ideal_window.w == p.ideal_window.h, "square before clamping"
                win = p.window
                assert win.x0 >= 0 and win.y0 >= 0 and win.x1 <= w and win.y1 <= h
            along_x = bbox.w >= bbox.h
            if along_x:
                for p in plans:
                    assert p.window.y0 <= bbox.y0 and p.window.y1 >= bbox.y1
                assert intervals_cover(
                    [(p.window.x0, p.window.x1) for p in plans], bbox.x0, bbox.x1
                )
            else:
                for p in plans:
                    assert p.window.x0 <= bbox.x0 and p.window.x1 >= bbox.x1
                assert intervals_cover(
                    [(p.window.y0, p.window.y1) for p in plans], bbox.y0, bbox.y1
                )


class TestExtractTile:
    def test_full_image_window_is_identity(self):
        rng = np.random.default_rng(3)
        pixels = rng.random((16, 12, 3))
        sample = ImageSample(id="a", pixels=pixels, class_name="c")
        plan = TilePlan(
            window=BBox(0, 0, 12, 16), component_id=0, ideal_window=BBox(0, 0, 16, 16)
        )
        assert np.array_equal(extract_tile(sample, plan), pixels)

    def test_known_pattern_crop(self):
        pixels = np.arange(4 * 4 * 3, dtype=np.float64).reshape(4, 4, 3) / (4 * 4 * 3)
        sample = ImageSample(id="a", pixels=pixels, class_name="c")
        plan = TilePlan(
            window=BBox(0, 0, 2, 2), component_id=0, ideal_window=BBox(0, 0, 2, 2)
        )
        assert np.array_equal(extract_tile(sample, plan), pixels[:2, :2])

    def test_crop_shape_matches_window(self):
        sample = ImageSample(id="a", pixels=np.zeros((40, 60, 3)), class_name="c")
        plan = TilePlan(
            window=BBox(5, 7, 20, 11), component_id=0, ideal_window=BBox(5, 7, 20, 20)
        )
        assert extract_tile(sample, plan).shape == (11, 20, 3)

    def test_out_of_bounds_window_rejected(self):
        sample = ImageSample(id="a", pixels=np.zeros((10, 10, 3)), class_name="c")
        plan = TilePlan(
            window=BBox(5, 5, 10, 10), component_id=0, ideal_window=BBox(5, 5, 10, 10)
        )
        with pytest.raises(ValueError, match="out of bounds"):
            extract_tile(sample, plan)
