import numpy as np
import pytest

from vand.core import PipelineConfig
from vand.foreground import (
    ProposalSet,
    connected_components,
    count_parts,
    extract_foreground,
    filter_proposals,
    merge_foreground,
)

from conftest import random_nonempty_mask


def flood_fill_components(mask, connectivity):
    """Independent reference labelling by explicit BFS."""
    h, w = mask.shape
    if connectivity == 4:
        nbrs = [(-1, 0), (1, 0), (0, -1), (0, 1)]
    else:
        nbrs = [(dy, dx) for dy in (-1, 0, 1) for dx in (-1, 0, 1) if (dy, dx) != (0, 0)]
    seen = np.zeros_like(mask, dtype=bool)
    comps = []
    for y in range(h):
        for x in range(w):
            if not mask[y, x] or seen[y, x]:
                continue
            comp = np.zeros_like(mask)
            stack = [(y, x)]
            seen[y, x] = True
            while stack:
                cy, cx = stack.pop()
                comp[cy, cx] = True
                for dy, dx in nbrs:
                    ny, nx = cy + dy, cx + dx
                    if 0 <= ny < h and 0 <= nx < w and mask[ny, nx] and not seen[ny, nx]:
                        seen[ny, nx] = True
                        stack.append((ny, nx))
            comps.append(comp)
    return comps


def make_set(*masks):
    return ProposalSet(masks=tuple(masks), shape=masks[0].shape)


class TestFilterProposals:
    def test_fully_covered_proposal_kept(self):
        salient = np.ones((8, 8), dtype=bool)
        p = np.zeros((8, 8), dtype=bool)
        p[2:5, 2:5] = True
        kept = filter_proposals(make_set(p), salient, 0.8)
        assert len(kept) == 1

    def test_half_covered_proposal_dropped_at_080(self):
        # 4x4 proposal, exactly 8 of 16 pixels inside the salient mask.
        salient = np.zeros((8, 8), dtype=bool)
        salient[:, :4] = True
        p = np.zeros((8, 8), dtype=bool)
        p[2:6, 2:6] = True
        assert np.count_nonzero(p & salient) / np.count_nonzero(p) == 0.5
        kept = filter_proposals(make_set(p), salient, 0.8)
        assert len(kept) == 0

    def test_empty_set_passes_through(self):
        ps = ProposalSet(masks=(), shape=(5, 5))
        assert len(filter_proposals(ps, np.ones((5, 5), bool), 0.8)) == 0

    def test_dimension_mismatch_rejected(self):
        p = np.ones((4, 4), dtype=bool)
        with pytest.raises(ValueError, match="salient"):
            filter_proposals(make_set(p), np.ones((5, 5), bool), 0.8)

    def test_order_preserved(self):
        salient = np.ones((6, 6), dtype=bool)
        a = np.zeros((6, 6), bool)
        a[0, 0] = True
        b = np.zeros((6, 6), bool)
        b[5, 5] = True
        kept = filter_proposals(make_set(a, b), salient, 0.5)
        assert np.array_equal(kept.masks[0], a) and np.array_equal(kept.masks[1], b)

    def test_kept_count_monotone_in_threshold(self):
        rng = np.random.default_rng(21)
        for _ in range(200):
            shape = tuple(rng.integers(3, 16, size=2))
            salient = random_nonempty_mask(rng, shape, 0.5)
            proposals = make_set(
                *[random_nonempty_mask(rng, shape, 0.4) for _ in range(rng.integers(1, 6))]
            )
            sizes = [
                len(filter_proposals(proposals, salient, t))
                for t in (0.1, 0.3, 0.5, 0.7, 0.9, 1.0)
            ]
            assert sizes == sorted(sizes, reverse=True)


class TestMergeForeground:
    def test_single_proposal_identity(self):
        p = random_nonempty_mask(np.random.default_rng(1), (7, 9))
        assert np.array_equal(merge_foreground(make_set(p)), p)

    def test_disjoint_union_popcount_adds(self):
        a = np.zeros((6, 6), bool)
        a[:2] = True
        b = np.zeros((6, 6), bool)
        b[4:] = True
        merged = merge_foreground(make_set(a, b))
        assert merged.sum() == a.sum() + b.sum()

    def test_empty_set_gives_all_false(self):
        merged = merge_foreground(ProposalSet(masks=(), shape=(4, 5)))
        assert merged.shape == (4, 5) and not merged.any()

    def test_idempotent_and_order_free(self):
        rng = np.random.default_rng(2)
        masks = [random_nonempty_mask(rng, (8, 8)) for _ in range(4)]
        forward = merge_foreground(make_set(*masks))
        backward = merge_foreground(make_set(*masks[::-1]))
        doubled = merge_foreground(make_set(*(masks + masks)))
        assert np.array_equal(forward, backward)
        assert np.array_equal(forward, doubled)


class TestConnectedComponents:
    def test_single_blob(self):
        mask = np.zeros((10, 10), bool)
        mask[3:6, 4:8] = True
        comps = connected_components(mask, 8)
        assert len(comps) == 1
        assert comps[0].bbox.x0 == 4 and comps[0].bbox.w == 4
        assert comps[0].bbox.y0 == 3 and comps[0].bbox.h == 3

    def test_diagonal_touch_depends_on_connectivity(self):
        mask = np.zeros((4, 4), bool)
        mask[0, 0] = True
        mask[1, 1] = True
        assert len(connected_components(mask, 8)) == 1
        assert len(connected_components(mask, 4)) == 2

    def test_empty_mask_gives_no_components(self):
        assert connected_components(np.zeros((5, 5), bool), 8) == []

    @pytest.mark.parametrize("connectivity", [4, 8])
    def test_matches_flood_fill_oracle(self, connectivity):
        rng = np.random.default_rng(33)
        for _ in range(150):
            shape = tuple(rng.integers(2, 14, size=2))
            mask = rng.random(shape) < rng.uniform(0.2, 0.7)
            comps = connected_components(mask, connectivity)
            expected = flood_fill_components(mask, connectivity)
            assert len(comps) == len(expected)
            union = np.zeros(shape, bool)
            for got, want in zip(comps, expected):
                assert np.array_equal(got.mask, want)
                assert not (union & got.mask).any()
                union |= got.mask
                ys, xs = np.nonzero(got.mask)
                assert got.bbox.x0 == xs.min() and got.bbox.x1 == xs.max() + 1
                assert got.bbox.y0 == ys.min() and got.bbox.y1 == ys.max() + 1
            assert np.array_equal(union, mask)

    def test_ids_follow_raster_order(self):
        mask = np.zeros((6, 6), bool)
        mask[4:, :2] = True  # later in raster order
        mask[0, 3:] = True  # first row
        comps = connected_components(mask, 8)
        assert [c.id for c in comps] == [0, 1]
        assert comps[0].mask[0, 3] and comps[1].mask[4, 0]


class TestCountParts:
    def test_no_proposals(self):
        comps = connected_components(np.ones((4, 4), bool), 8)
        assert count_parts(comps[0], ProposalSet(masks=(), shape=(4, 4)), 0.5) == 0

    def test_fully_contained_proposals_all_count(self):
        mask = np.ones((10, 30), dtype=bool)
        comp = connected_components(mask, 8)[0]
        parts = []
        for i in range(21):
            p = np.zeros((10, 30), bool)
            p[4, i] = True
            parts.append(p)
        assert count_parts(comp, make_set(*parts), 0.5) == 21

    def test_straddling_proposal_counts_for_majority_side(self):
        mask = np.zeros((10, 10), bool)
        mask[:, :5] = True
        left = connected_components(mask, 8)[0]
        right = connected_components(~mask, 8)[0]
        p = np.zeros((10, 10), bool)
        p[0, 2:7] = True  # 3 pixels left, 2 right
        ps = make_set(p)
        assert count_parts(left, ps, 0.5) == 1
        assert count_parts(right, ps, 0.5) == 0


class TestExtractForeground:
    def test_components_with_part_counts(self):
        cfg = PipelineConfig(min_tile_side=8)
        salient = np.zeros((12, 12), bool)
        salient[1:5, 1:5] = True
        salient[7:11, 7:11] = True
        a = np.zeros((12, 12), bool)
        a[1:5, 1:5] = True
        b = np.zeros((12, 12), bool)
        b[7:11, 7:11] = True
        comps = extract_foreground(make_set(a, b), salient, cfg)
        assert len(comps) == 2
        assert [c.part_count for c in comps] == [1, 1]

    def test_empty_salient_falls_back_to_full_frame(self):
        cfg = PipelineConfig()
        p = np.zeros((6, 8), bool)
        p[2:4, 2:4] = True
        comps = extract_foreground(make_set(p), np.zeros((6, 8), bool), cfg)
        assert len(comps) == 1
        assert comps[0].mask.all()
        assert comps[0].bbox.w == 8 and comps[0].bbox.h == 6
        assert comps[0].part_count == 1  # the proposal sits fully inside the frame
