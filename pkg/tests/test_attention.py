import numpy as np
import pytest

from attnbalance import AttentionTensor, SegmentMap, load_attention, save_attention
from attnbalance.errors import DataError, DimensionError, DomainError


def make_tensor(rng, layers=2, heads=3, queries=7, keys=7):
    logits = rng.standard_normal((layers, heads, queries, keys))
    exp = np.exp(logits)
    return AttentionTensor(exp / exp.sum(axis=-1, keepdims=True))


class TestSegmentMap:
    def test_contiguous_layout(self):
        sm = SegmentMap.contiguous(3, 4, 8)
        assert sm.image_spans == ((0, 4), (4, 8), (8, 12))
        assert sm.text_span == (12, 20)
        assert sm.keys == 20
        assert sm.n_images == 3
        assert sm.image_lengths == (4, 4, 4)
        assert sm.text_length == 8

    @pytest.mark.parametrize(
        "image_spans, text_span",
        [
            (((0, 2), (2, 4)), (4, 4)),      # empty text span
            (((0, 2), (2, 4)), (5, 6)),      # gap at 4
            (((0, 3), (2, 4)), (4, 6)),      # overlap
            (((1, 2), (2, 4)), (4, 6)),      # does not start at 0
            ((), (0, 4)),                    # no images
        ],
    )
    def test_bad_layouts_rejected(self, image_spans, text_span):
        with pytest.raises(DimensionError):
            SegmentMap(image_spans, text_span)

    def test_single_image_is_legal(self):
        sm = SegmentMap(((0, 5),), (5, 8))
        assert sm.n_images == 1

    def test_text_span_between_images(self):
        sm = SegmentMap(((0, 2), (5, 7)), (2, 5))
        assert sm.keys == 7

    def test_round_trip_dict(self):
        sm = SegmentMap.contiguous(2, 3, 4)
        assert SegmentMap.from_dict(sm.to_dict()) == sm


class TestAttentionTensor:
    def test_valid_tensor(self):
        rng = np.random.default_rng(0)
        tensor = make_tensor(rng)
        assert tensor.layers == 2 and tensor.heads == 3
        assert tensor.queries == 7 and tensor.keys == 7

    def test_rows_must_be_stochastic(self):
        bad = np.full((1, 1, 2, 4), 0.3)
        with pytest.raises(DomainError):
            AttentionTensor(bad)

    def test_negative_weights_rejected(self):
        w = np.zeros((1, 1, 1, 3))
        w[0, 0, 0] = [1.2, -0.2, 0.0]
        with pytest.raises(DomainError):
            AttentionTensor(w)

    def test_wrong_rank_rejected(self):
        with pytest.raises(DimensionError):
            AttentionTensor(np.ones((2, 2, 2)))

    def test_weights_are_read_only(self):
        tensor = make_tensor(np.random.default_rng(1))
        with pytest.raises(ValueError):
            tensor.weights[0, 0, 0, 0] = 0.5


class TestInterchange:
    @pytest.mark.parametrize("encoding", ["base64", "csv"])
    def test_round_trip_is_exact(self, tmp_path, encoding):
        rng = np.random.default_rng(7)
        tensor = make_tensor(rng, layers=1, heads=2, queries=6, keys=6)
        segmap = SegmentMap.contiguous(2, 2, 2)
        path = tmp_path / f"dump-{encoding}.json"
        save_attention(path, tensor, segmap, encoding=encoding)
        loaded, loaded_map = load_attention(path)
        np.testing.assert_array_equal(loaded.weights, tensor.weights)
        assert loaded_map == segmap

    def test_mismatched_segmap_rejected(self, tmp_path):
        tensor = make_tensor(np.random.default_rng(3), keys=7, queries=7)
        with pytest.raises(DimensionError):
            save_attention(tmp_path / "x.json", tensor, SegmentMap.contiguous(2, 2, 2))

    def test_truncated_payload_rejected(self, tmp_path):
        tensor = make_tensor(np.random.default_rng(3), layers=1, heads=1, queries=4, keys=4)
        segmap = SegmentMap.contiguous(1, 2, 2)
        path = tmp_path / "dump.json"
        save_attention(path, tensor, segmap)
        text = path.read_text().replace('"layers": 1', '"layers": 2')
        path.write_text(text)
        with pytest.raises(DataError):
            load_attention(path)
