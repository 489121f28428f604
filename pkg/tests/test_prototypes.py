"""Prototype bank, class ranking, image-side filtering, union."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorsel.core import (
    EmptyInputError,
    IndexOutOfRangeError,
    NoAnchorsAvailableError,
    entropy_rows,
    softmax,
)
from anchorsel.prototypes import (
    ImageAnchorSet,
    PrototypeBank,
    bank_update,
    build_image_anchor_set,
    class_representations,
    filter_image,
    score_views_image,
    select_topk_classes,
    union_selection,
)
from anchorsel.text_anchors import TextAnchorSet, ViewBatch

from conftest import unit


def make_text_anchors(rng, c, d):
    return TextAnchorSet(
        anchors=unit(rng.standard_normal((c, d))), weights=np.full((c, 1), 1.0)
    )


class TestPrototypeBank:
    def test_first_insert_is_the_embedding(self):
        bank = PrototypeBank.empty(3, 4)
        e = np.array([1.0, 2.0, 3.0, 4.0])
        bank.update(e, 1)
        np.testing.assert_array_equal(bank.prototypes[1], e)
        assert bank.counts.tolist() == [0, 1, 0]
        assert bank.populated.tolist() == [False, True, False]

    def test_two_inserts_average(self):
        bank = PrototypeBank.empty(2, 2)
        bank.update(np.array([1.0, 0.0]), 0)
        bank.update(np.array([0.0, 1.0]), 0)
        np.testing.assert_allclose(bank.prototypes[0], [0.5, 0.5], atol=1e-15)
        assert bank.counts[0] == 2

    def test_five_vector_mean_seed29(self):
        rng = np.random.default_rng(29)
        vecs = rng.standard_normal((5, 6))
        bank = PrototypeBank.empty(1, 6)
        for v in vecs:
            bank_update(bank, v, 0)
        np.testing.assert_allclose(bank.prototypes[0], vecs.mean(axis=0), atol=1e-9)

    def test_out_of_range_class(self):
        bank = PrototypeBank.empty(2, 3)
        with pytest.raises(IndexOutOfRangeError):
            bank.update(np.zeros(3), 2)
        with pytest.raises(IndexOutOfRangeError):
            bank.update(np.zeros(4), 0)

    def test_save_load_roundtrip(self, tmp_path):
        rng = np.random.default_rng(30)
        bank = PrototypeBank.empty(3, 5)
        for _ in range(7):
            bank.update(rng.standard_normal(5), int(rng.integers(3)))
        bank.save(tmp_path)
        again = PrototypeBank.load(tmp_path)
        np.testing.assert_array_equal(again.prototypes, bank.prototypes)
        np.testing.assert_array_equal(again.counts, bank.counts)

    @given(st.integers(0, 2**31 - 1), st.integers(1, 200))
    @settings(max_examples=30, deadline=None)
    def test_running_mean_property(self, seed, n):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(1, 5))
        d = int(rng.integers(2, 9))
        bank = PrototypeBank.empty(c, d)
        per_class = [[] for _ in range(c)]
        for _ in range(n):
            cls = int(rng.integers(c))
            e = rng.standard_normal(d)
            per_class[cls].append(e)
            bank.update(e, cls)
        for cls in range(c):
            if per_class[cls]:
                np.testing.assert_allclose(
                    bank.prototypes[cls], np.mean(per_class[cls], axis=0), atol=1e-5
                )
            else:
                np.testing.assert_array_equal(bank.prototypes[cls], np.zeros(d))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=30, deadline=None)
    def test_permutation_invariance(self, seed):
        rng = np.random.default_rng(seed)
        d = int(rng.integers(2, 8))
        n = int(rng.integers(1, 60))
        vecs = rng.standard_normal((n, d))
        forward = PrototypeBank.empty(1, d)
        shuffled = PrototypeBank.empty(1, d)
        for v in vecs:
            forward.update(v, 0)
        for i in rng.permutation(n):
            shuffled.update(vecs[i], 0)
        np.testing.assert_allclose(forward.prototypes, shuffled.prototypes, atol=1e-5)


class TestSelectTopK:
    def test_one_hot_k1(self):
        out = select_topk_classes(np.array([[0.0, 1.0, 0.0]]), 1)
        assert out.tolist() == [1]

    def test_k_at_least_c_returns_all(self):
        out = select_topk_classes(np.array([[0.2, 0.5, 0.3]]), 7)
        assert sorted(out.tolist()) == [0, 1, 2]

    def test_mean_then_tie_to_lower_index(self):
        preds = np.array([[0.6, 0.3, 0.1], [0.2, 0.5, 0.3]])
        # mean = [0.4, 0.4, 0.2]; the 0-vs-1 tie resolves to class 0 first
        out = select_topk_classes(preds, 2)
        assert out.tolist() == [0, 1]

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            select_topk_classes(np.zeros((0, 3)), 1)
        with pytest.raises(IndexOutOfRangeError):
            select_topk_classes(np.array([[0.5, 0.5]]), 0)


class TestAnchorSetAndRepresentations:
    def test_unpopulated_classes_skipped(self):
        rng = np.random.default_rng(31)
        bank = PrototypeBank.empty(4, 6)
        bank.update(rng.standard_normal(6), 1)
        bank.update(rng.standard_normal(6), 3)
        out = build_image_anchor_set(bank, [3, 0, 1])
        assert out.class_indices.tolist() == [3, 1]  # rank order kept, 0 dropped
        np.testing.assert_array_equal(out.anchors, bank.prototypes[[3, 1]])

    def test_empty_when_nothing_populated(self):
        bank = PrototypeBank.empty(3, 4)
        out = build_image_anchor_set(bank, [0, 1, 2])
        assert len(out) == 0

    def test_representations_mix_prototypes_and_anchors(self):
        rng = np.random.default_rng(32)
        bank = PrototypeBank.empty(3, 5)
        bank.update(rng.standard_normal(5), 1)
        text = make_text_anchors(rng, 3, 5)
        reps = class_representations(bank, text)
        np.testing.assert_array_equal(reps[1], bank.prototypes[1])
        np.testing.assert_array_equal(reps[0], text.anchors[0])
        np.testing.assert_array_equal(reps[2], text.anchors[2])


class TestScoreViewsImage:
    def test_view_on_prototype_maximizes_alignment(self):
        # a view equal to an anchor prototype has alignment exactly 1
        rng = np.random.default_rng(31)
        c, d = 4, 8
        bank = PrototypeBank.empty(c, d)
        protos = unit(rng.standard_normal((2, d)))
        bank.update(protos[0], 0)
        bank.update(protos[1], 2)
        text = make_text_anchors(rng, c, d)
        anchor_set = build_image_anchor_set(bank, [0, 2])
        views = np.vstack([protos[0], unit(rng.standard_normal((3, d)))])
        batch = ViewBatch(views=views)
        scores = score_views_image(batch, anchor_set, bank, text, beta1=1.0, beta2=0.0)
        assert abs(scores[0] - 1.0) < 1e-12
        assert scores.argmax() == 0

    def test_beta1_zero_is_confidence_only_seed31(self):
        rng = np.random.default_rng(31)
        c, d, k = 4, 10, 2
        bank = PrototypeBank.empty(c, d)
        for cls in range(c):
            bank.update(unit(rng.standard_normal(d)), cls)
        text = make_text_anchors(rng, c, d)
        views = unit(rng.standard_normal((6, d)))
        batch = ViewBatch(views=views)
        anchor_set = build_image_anchor_set(bank, list(range(k)))
        scores = score_views_image(batch, anchor_set, bank, text, beta1=0.0, beta2=1.0, tau=20.0)
        reps = class_representations(bank, text)
        sims = np.array([[float(v @ r) / (np.linalg.norm(v) * np.linalg.norm(r)) for r in reps] for v in views])
        expected = 1.0 - entropy_rows(softmax(sims, 20.0))
        np.testing.assert_allclose(scores, expected, atol=1e-9)

    def test_fallback_when_ranked_classes_cold(self):
        # ranked classes unpopulated but the bank holds another class:
        # alignment falls back to the full representation set
        rng = np.random.default_rng(33)
        c, d = 4, 8
        bank = PrototypeBank.empty(c, d)
        bank.update(unit(rng.standard_normal(d)), 3)
        text = make_text_anchors(rng, c, d)
        views = unit(rng.standard_normal((5, d)))
        batch = ViewBatch(views=views)
        empty_set = build_image_anchor_set(bank, [0, 1])
        assert len(empty_set) == 0
        scores = score_views_image(batch, empty_set, bank, text, beta1=1.0, beta2=0.0, tau=10.0)
        reps = class_representations(bank, text)
        align = np.array([max(float(v @ r) / (np.linalg.norm(v) * np.linalg.norm(r)) for r in reps) for v in views])
        np.testing.assert_allclose(scores, align, atol=1e-9)

    def test_entirely_cold_bank_raises(self):
        rng = np.random.default_rng(34)
        bank = PrototypeBank.empty(3, 6)
        text = make_text_anchors(rng, 3, 6)
        batch = ViewBatch(views=unit(rng.standard_normal((4, 6))))
        empty_set = build_image_anchor_set(bank, [0])
        with pytest.raises(NoAnchorsAvailableError):
            score_views_image(batch, empty_set, bank, text)


class TestFilterImage:
    def test_p_one_keeps_everything(self):
        rng = np.random.default_rng(35)
        c, d = 3, 8
        bank = PrototypeBank.empty(c, d)
        bank.update(unit(rng.standard_normal(d)), 0)
        text = make_text_anchors(rng, c, d)
        batch = ViewBatch(views=unit(rng.standard_normal((7, d))))
        anchor_set = build_image_anchor_set(bank, [0])
        kept = filter_image(batch, anchor_set, bank, text, p=1.0)
        assert sorted(kept.tolist()) == list(range(7))

    def test_sixty_four_views_at_five_percent_keeps_three(self):
        rng = np.random.default_rng(36)
        c, d = 4, 16
        bank = PrototypeBank.empty(c, d)
        for cls in range(c):
            bank.update(unit(rng.standard_normal(d)), cls)
        text = make_text_anchors(rng, c, d)
        batch = ViewBatch(views=unit(rng.standard_normal((64, d))))
        anchor_set = build_image_anchor_set(bank, [0, 1, 2])
        kept = filter_image(batch, anchor_set, bank, text, p=0.05)
        assert len(kept) == 3

    def test_finds_planted_views_seed37(self):
        # three views aligned with a populated prototype among 61 noise views
        rng = np.random.default_rng(37)
        c, d = 3, 24
        frame = np.linalg.qr(rng.standard_normal((d, 2)))[0].T
        proto_dir, noise_dir = frame[0], frame[1]
        bank = PrototypeBank.empty(c, d)
        bank.update(proto_dir, 1)
        text = make_text_anchors(rng, c, d)
        planted = rng.choice(64, size=3, replace=False)
        views = np.empty((64, d))
        for v in range(64):
            center = proto_dir if v in planted else noise_dir
            views[v] = center + 0.05 * rng.standard_normal(d)
        batch = ViewBatch(views=unit(views))
        anchor_set = build_image_anchor_set(bank, [1])
        kept = filter_image(batch, anchor_set, bank, text, p=0.05, beta1=2.0, beta2=1.0)
        assert set(kept.tolist()) == set(int(i) for i in planted)

    def test_cold_bank_selects_nothing(self):
        rng = np.random.default_rng(38)
        bank = PrototypeBank.empty(3, 6)
        text = make_text_anchors(rng, 3, 6)
        batch = ViewBatch(views=unit(rng.standard_normal((5, 6))))
        kept = filter_image(batch, build_image_anchor_set(bank, [0]), bank, text)
        assert kept.size == 0

    @given(st.integers(0, 2**31 - 1), st.floats(0.1, 10.0))
    @settings(max_examples=25, deadline=None)
    def test_joint_beta_scaling_preserves_selection(self, seed, scale):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(2, 6))
        d = int(rng.integers(4, 12))
        b = int(rng.integers(2, 12))
        bank = PrototypeBank.empty(c, d)
        for cls in range(c):
            if rng.random() < 0.7:
                bank.update(unit(rng.standard_normal(d)), cls)
        if not bank.populated.any():
            bank.update(unit(rng.standard_normal(d)), 0)
        text = make_text_anchors(rng, c, d)
        batch = ViewBatch(views=unit(rng.standard_normal((b, d))))
        anchor_set = build_image_anchor_set(bank, [0, 1])
        base = filter_image(batch, anchor_set, bank, text, p=0.5, beta1=2.0, beta2=1.0)
        scaled = filter_image(
            batch, anchor_set, bank, text, p=0.5, beta1=2.0 * scale, beta2=scale
        )
        assert base.tolist() == scaled.tolist()


class TestUnionSelection:
    def test_overlapping_sets(self):
        out = union_selection([1, 2, 3], [3, 4])
        assert out.tolist() == [1, 2, 3, 4]

    def test_disjoint_sets(self):
        out = union_selection(list(range(6)), [10, 11, 12])
        assert out.tolist() == [0, 1, 2, 3, 4, 5, 10, 11, 12]
        assert len(out) == 9

    def test_identical_sets(self):
        out = union_selection([5, 1], [1, 5])
        assert out.tolist() == [1, 5]

    def test_empty_side(self):
        out = union_selection([2, 0], np.zeros(0, dtype=np.int64))
        assert out.tolist() == [0, 2]
