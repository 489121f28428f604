"""Source fusion: confidence weights, ensemble logits, sharpening, KL loss."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from anchorsel.core import (
    DimensionMismatchError,
    EmptyInputError,
    InvalidConfigError,
    NonFiniteError,
    softmax,
)
from anchorsel.ensemble import (
    SourceLogits,
    build_target,
    confidence_weights,
    ensemble_logits,
    kl_loss,
    sharpen,
)


def random_sources(rng, v=4, c=5, scale=3.0):
    return SourceLogits(
        z_prompt=scale * rng.standard_normal((v, c)),
        z_text=scale * rng.standard_normal((v, c)),
        z_image=scale * rng.standard_normal((v, c)),
    )


class TestSourceLogits:
    def test_names_and_stack_follow_presence(self):
        z = np.zeros((2, 3))
        full = SourceLogits(z_prompt=z, z_text=z + 1, z_image=z + 2)
        assert full.names == ("prompt", "text", "image")
        assert full.stack().shape == (3, 2, 3)
        partial = SourceLogits(z_prompt=z, z_image=z + 2)
        assert partial.names == ("prompt", "image")
        assert partial.stack().shape == (2, 2, 3)

    def test_shape_mismatch_rejected(self):
        with pytest.raises(DimensionMismatchError):
            SourceLogits(z_prompt=np.zeros((2, 3)), z_text=np.zeros((2, 4)))

    def test_non_finite_rejected(self):
        z = np.zeros((2, 3))
        z[0, 0] = np.inf
        with pytest.raises(NonFiniteError):
            SourceLogits(z_prompt=z)


class TestConfidenceWeights:
    def test_identical_sources_share_equally(self):
        rng = np.random.default_rng(43)
        z = rng.standard_normal((3, 4))
        w = confidence_weights(SourceLogits(z_prompt=z, z_text=z.copy(), z_image=z.copy()))
        np.testing.assert_allclose(w, 1 / 3, atol=1e-6)

    def test_dominant_source_weight(self):
        # gamma = (1, 1/C, 1/C) with C=10 -> w_prompt = 1/(1 + 0.2) = 0.8333...
        c, v = 10, 3
        confident = np.zeros((v, c))
        confident[:, 0] = 1000.0  # softmax max prob = 1 up to float precision
        flat = np.zeros((v, c))  # uniform softmax, max prob = 1/C
        w = confidence_weights(
            SourceLogits(z_prompt=confident, z_text=flat, z_image=flat.copy())
        )
        np.testing.assert_allclose(w[:, 0], 1.0 / 1.2, atol=1e-6)
        np.testing.assert_allclose(w[:, 1], 0.1 / 1.2, atol=1e-6)

    def test_single_source_gets_exactly_one(self):
        rng = np.random.default_rng(44)
        w = confidence_weights(SourceLogits(z_prompt=rng.standard_normal((4, 3))))
        np.testing.assert_array_equal(w, np.ones((4, 1)))

    def test_simple_mode_is_exact_uniform(self):
        rng = np.random.default_rng(45)
        w = confidence_weights(random_sources(rng), simple=True)
        np.testing.assert_array_equal(w, np.full((4, 3), 1 / 3))

    def test_bad_epsilon(self):
        rng = np.random.default_rng(46)
        with pytest.raises(InvalidConfigError):
            confidence_weights(random_sources(rng), epsilon=0.0)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_rows_sum_to_near_one_seed43(self, seed):
        # sum_k w_k = sum(gamma) / (sum(gamma) + eps), just below 1
        rng = np.random.default_rng(seed)
        v = int(rng.integers(1, 6))
        c = int(rng.integers(2, 8))
        w = confidence_weights(random_sources(rng, v, c))
        sums = w.sum(axis=1)
        assert np.all(sums <= 1.0)
        np.testing.assert_allclose(sums, 1.0, atol=1e-6)
        assert np.all(w >= 0)


class TestEnsembleLogits:
    def test_equal_weights_average(self):
        rng = np.random.default_rng(47)
        src = random_sources(rng)
        w = np.full((4, 3), 1 / 3)
        np.testing.assert_allclose(
            ensemble_logits(src, w), src.stack().mean(axis=0), atol=1e-12
        )

    def test_weight_one_selects_single_source(self):
        rng = np.random.default_rng(48)
        src = random_sources(rng)
        w = np.zeros((4, 3))
        w[:, 1] = 1.0
        np.testing.assert_array_equal(ensemble_logits(src, w), src.z_text)

    def test_matches_manual_sum_seed47(self):
        rng = np.random.default_rng(47)
        src = random_sources(rng, v=3, c=4)
        w = rng.random((3, 3))
        got = ensemble_logits(src, w)
        expected = (
            w[:, 0:1] * src.z_prompt + w[:, 1:2] * src.z_text + w[:, 2:3] * src.z_image
        )
        np.testing.assert_allclose(got, expected, atol=1e-12)

    def test_weight_shape_checked(self):
        rng = np.random.default_rng(49)
        src = random_sources(rng)
        with pytest.raises(DimensionMismatchError):
            ensemble_logits(src, np.ones((3, 4)))


class TestSharpen:
    def test_temperature_one_is_identity(self):
        p = np.array([0.2, 0.5, 0.3])
        np.testing.assert_allclose(sharpen(p, 1.0), p, atol=1e-12)

    def test_uniform_is_fixed_point(self):
        p = np.full(5, 0.2)
        np.testing.assert_allclose(sharpen(p, 0.3), p, atol=1e-12)

    def test_two_class_reference_value(self):
        # [0.7, 0.3] at T = 0.3: p^(10/3) renormalized
        got = sharpen(np.array([0.7, 0.3]), 0.3)
        powered = np.array([0.7, 0.3]) ** (1.0 / 0.3)
        np.testing.assert_allclose(got, powered / powered.sum(), atol=1e-12)
        assert abs(got[0] - 0.9439763) < 1e-6
        assert abs(got[1] - 0.0560237) < 1e-6

    def test_zeros_stay_zero(self):
        got = sharpen(np.array([0.5, 0.5, 0.0]), 0.3)
        np.testing.assert_allclose(got, [0.5, 0.5, 0.0], atol=1e-12)

    def test_bad_temperature(self):
        with pytest.raises(InvalidConfigError):
            sharpen(np.array([1.0]), 0.0)

    @given(st.integers(0, 2**31 - 1), st.floats(0.05, 0.99))
    @settings(max_examples=40, deadline=None)
    def test_sharpening_concentrates(self, seed, temp):
        rng = np.random.default_rng(seed)
        p = softmax(rng.standard_normal(int(rng.integers(2, 8))))
        q = sharpen(p, temp)
        assert abs(q.sum() - 1.0) < 1e-12
        assert q.argmax() == p.argmax()
        # sharpening below T=1 never lowers the winning mass
        assert q.max() >= p.max() - 1e-12


class TestBuildTarget:
    def test_single_view_t1_is_softmax(self):
        z = np.array([[1.0, -0.5, 2.0]])
        np.testing.assert_allclose(build_target(z, 1.0), softmax(z[0]), atol=1e-12)

    def test_matches_power_form(self):
        rng = np.random.default_rng(50)
        z = rng.standard_normal((4, 6))
        mean = softmax(z).mean(axis=0)
        powered = mean ** (1.0 / 0.3)
        np.testing.assert_allclose(
            build_target(z, 0.3), powered / powered.sum(), atol=1e-12
        )

    def test_empty_rejected(self):
        with pytest.raises(EmptyInputError):
            build_target(np.zeros((0, 3)))


class TestKLLoss:
    def test_equal_distributions_are_zero(self):
        p = softmax(np.array([0.3, -1.0, 0.7]))
        assert abs(kl_loss(p, p)) < 1e-15

    def test_one_hot_versus_uniform(self):
        q = np.array([1.0, 0.0, 0.0, 0.0])
        p = np.full(4, 0.25)
        expected = math.log(4.0)
        assert abs(kl_loss(q, p) - expected) < 1e-12
        assert abs(expected - 1.3863) < 5e-5

    def test_matches_direct_sum_seed53(self):
        rng = np.random.default_rng(53)
        q = softmax(rng.standard_normal(6))
        p = softmax(rng.standard_normal(6))
        expected = sum(
            float(qc * (math.log(qc) - math.log(pc))) for qc, pc in zip(q, p)
        )
        assert abs(kl_loss(q, p) - expected) < 1e-10

    def test_shape_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            kl_loss(np.array([0.5, 0.5]), np.array([1 / 3, 1 / 3, 1 / 3]))

    def test_support_violation_is_non_finite(self):
        with pytest.raises(NonFiniteError):
            kl_loss(np.array([0.5, 0.5]), np.array([1.0, 0.0]))

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=40, deadline=None)
    def test_nonnegative(self, seed):
        rng = np.random.default_rng(seed)
        c = int(rng.integers(2, 9))
        q = softmax(rng.standard_normal(c))
        p = softmax(rng.standard_normal(c))
        assert kl_loss(q, p) >= -1e-12
