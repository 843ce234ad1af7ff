import numpy as np
import pytest

from vand.backends import (
    ContractError,
    EmbeddingCache,
    InstrumentedBackend,
    MockBackend,
    embed_texts_cached,
)

NORM_TOL = 1e-5


@pytest.fixture
def backend():
    return MockBackend(seed=7)


def checker_image(h=24, w=32):
    img = np.zeros((h, w, 3))
    img[: h // 2, : w // 2] = 0.8
    img[h // 2 :, w // 2 :] = 0.4
    return img


class TestEmbedText:
    def test_unit_norm_and_order(self, backend):
        prompts = ["a photo of a good candle", "a photo of a broken candle"]
        embs = backend.embed_text(prompts)
        assert embs.shape == (2, backend.descriptor.embedding_dim)
        assert np.allclose(np.linalg.norm(embs, axis=1), 1.0, atol=NORM_TOL)

    def test_identical_prompts_identical_embeddings(self, backend):
        embs = backend.embed_text(["same prompt", "same prompt"])
        assert np.array_equal(embs[0], embs[1])

    def test_empty_list_rejected(self, backend):
        with pytest.raises(ContractError):
            backend.embed_text([])

    def test_seed_changes_embeddings(self):
        a = MockBackend(seed=1).embed_text(["x"])
        b = MockBackend(seed=2).embed_text(["x"])
        assert not np.allclose(a, b)


class TestEmbedImage:
    def test_unit_norm(self, backend):
        emb = backend.embed_image(checker_image())
        assert abs(np.linalg.norm(emb) - 1.0) < NORM_TOL

    def test_deterministic(self, backend):
        img = checker_image()
        assert np.array_equal(backend.embed_image(img), backend.embed_image(img))

    def test_content_sensitive(self, backend):
        a = backend.embed_image(checker_image())
        b = backend.embed_image(np.full((24, 32, 3), 0.5))
        assert not np.allclose(a, b)

    def test_zero_size_rejected(self, backend):
        with pytest.raises(ContractError):
            backend.embed_image(np.zeros((0, 4, 3)))

    def test_cosine_in_range(self, backend):
        rng = np.random.default_rng(0)
        embs = [backend.embed_image(rng.random((10, 10, 3))) for _ in range(5)]
        for a in embs:
            for b in embs:
                assert -1.0 - 1e-9 <= float(a @ b) <= 1.0 + 1e-9


class TestProposeMasks:
    def test_quantized_regions_are_deterministic(self, backend):
        img = checker_image()
        first = backend.propose_masks(img)
        second = backend.propose_masks(img)
        assert len(first) == len(second)
        for a, b in zip(first.masks, second.masks):
            assert np.array_equal(a, b)

    def test_blank_image_gives_single_full_frame_proposal(self, backend):
        proposals = backend.propose_masks(np.full((16, 16, 3), 0.5))
        assert len(proposals) == 1
        assert proposals.masks[0].all()

    def test_distinct_intensity_regions_become_proposals(self, backend):
        img = np.zeros((20, 20, 3))
        img[2:8, 2:8] = 0.9
        proposals = backend.propose_masks(img)
        blob = np.zeros((20, 20), bool)
        blob[2:8, 2:8] = True
        assert any(np.array_equal(m, blob) for m in proposals.masks)

    def test_non_image_rejected(self, backend):
        with pytest.raises(ContractError):
            backend.propose_masks(np.zeros((5, 5)))


class TestSalientMask:
    def test_above_median_rule(self, backend):
        img = np.zeros((10, 10, 3))
        img[:3] = 1.0
        got = backend.salient_mask(img)
        expected = img.mean(axis=2) > np.median(img.mean(axis=2))
        assert np.array_equal(got, expected)

    def test_all_black_gives_all_false(self, backend):
        assert not backend.salient_mask(np.zeros((8, 8, 3))).any()

    def test_shape_preserved(self, backend):
        assert backend.salient_mask(checker_image(13, 17)).shape == (13, 17)


class TestSegmentByPrompt:
    def test_matches_deviation_formula(self, backend):
        img = checker_image()
        gray = img.mean(axis=2)
        deviation = np.abs(gray - gray.mean())
        base = deviation / deviation.max()
        got = backend.segment_by_prompt(img, "a tear")
        gain = got.max() / base.max()
        assert 0.5 <= gain <= 1.0
        assert np.allclose(got, base * gain)

    def test_output_dims_equal_tile_dims(self, backend):
        assert backend.segment_by_prompt(checker_image(11, 19), "a rip").shape == (11, 19)

    def test_deterministic_per_tile_and_prompt(self, backend):
        img = checker_image()
        a = backend.segment_by_prompt(img, "a dent")
        b = backend.segment_by_prompt(img, "a dent")
        assert np.array_equal(a, b)

    def test_values_in_unit_interval(self, backend):
        rng = np.random.default_rng(4)
        m = backend.segment_by_prompt(rng.random((15, 15, 3)), "a crack")
        assert m.min() >= 0.0 and m.max() <= 1.0

    def test_prompts_modulate_differently(self, backend):
        img = checker_image()
        maps = {p: backend.segment_by_prompt(img, p) for p in ("a tear", "a rip", "a cut")}
        gains = {p: m.max() for p, m in maps.items()}
        assert len(set(gains.values())) > 1


class TestEmbeddingCache:
    def test_miss_then_hit(self, tmp_path, backend):
        cache = EmbeddingCache(tmp_path)
        counted = InstrumentedBackend(backend)
        prompts = ["a", "b", "c"]
        first = embed_texts_cached(counted, prompts, cache)
        assert counted.calls["embed_text"] == 1
        second = embed_texts_cached(counted, prompts, cache)
        assert counted.calls["embed_text"] == 1  # warm cache: no backend call
        assert np.array_equal(first, second)

    def test_partial_miss_batches_only_missing(self, tmp_path, backend):
        cache = EmbeddingCache(tmp_path)
        embed_texts_cached(backend, ["a", "b"], cache)
        counted = InstrumentedBackend(backend)
        out = embed_texts_cached(counted, ["a", "b", "c"], cache)
        assert counted.calls["embed_text"] == 1
        assert np.array_equal(out[:2], backend.embed_text(["a", "b"]))

    def test_cache_is_per_backend_name(self, tmp_path, backend):
        cache = EmbeddingCache(tmp_path)
        embed_texts_cached(backend, ["a"], cache)
        assert (tmp_path / "mock").is_dir()

    def test_clear_empties_directory(self, tmp_path, backend):
        cache = EmbeddingCache(tmp_path / "cache")
        embed_texts_cached(backend, ["a"], cache)
        cache.clear()
        assert not (tmp_path / "cache").exists()

    def test_no_cache_passthrough(self, backend):
        out = embed_texts_cached(backend, ["a"], None)
        assert out.shape == (1, backend.descriptor.embedding_dim)


class TestReproducibility:
    def test_same_seed_bit_exact(self):
        img = checker_image()
        a, b = MockBackend(seed=11), MockBackend(seed=11)
        assert np.array_equal(a.embed_text(["p"]), b.embed_text(["p"]))
        assert np.array_equal(a.embed_image(img), b.embed_image(img))
        assert np.array_equal(a.salient_mask(img), b.salient_mask(img))
        assert np.array_equal(
            a.segment_by_prompt(img, "a mark"), b.segment_by_prompt(img, "a mark")
        )
        pa, pb = a.propose_masks(img), b.propose_masks(img)
        assert len(pa) == len(pb)
        for ma, mb in zip(pa.masks, pb.masks):
            assert np.array_equal(ma, mb)
