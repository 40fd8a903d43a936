"""Tests for the elementary classifier operations."""

import numpy as np
import pytest

from selclass.core import (
    DimensionError,
    ParameterError,
    argmax_predict,
    as_logit_matrix,
    as_loss_vector,
    softmax,
    zero_one_loss,
)


class TestValidation:
    def test_logit_matrix_shape(self):
        with pytest.raises(DimensionError):
            as_logit_matrix([1.0, 2.0])
        with pytest.raises(ParameterError):
            as_logit_matrix(np.zeros((3, 1)))
        with pytest.raises(ParameterError):
            as_logit_matrix(np.zeros((0, 3)))

    def test_logit_matrix_rejects_nonfinite(self):
        z = np.zeros((2, 3))
        z[1, 2] = np.nan
        with pytest.raises(ParameterError):
            as_logit_matrix(z)
        z[1, 2] = np.inf
        with pytest.raises(ParameterError):
            as_logit_matrix(z)

    def test_loss_vector_values(self):
        assert as_loss_vector([0, 1, 1]).dtype == np.int64
        with pytest.raises(ParameterError):
            as_loss_vector([0, 2])
        with pytest.raises(DimensionError):
            as_loss_vector([[0, 1]])


class TestArgmaxPredict:
    def test_unique_max(self):
        assert argmax_predict([[3.0, 1.0, 0.0]]) == [0]
        assert argmax_predict([[-2.0, -1.0]]) == [1]

    def test_tie_goes_to_lowest_index(self):
        assert argmax_predict([[5.0, 5.0, 1.0]]) == [0]
        assert argmax_predict([[1.0, 7.0, 7.0]]) == [1]

    def test_temperature_does_not_change_prediction(self):
        rng = np.random.default_rng(0)
        z = rng.standard_normal((50, 7))
        base = argmax_predict(z)
        for t in (0.01, 0.5, 2.0, 100.0):
            np.testing.assert_array_equal(argmax_predict(z / t), base)


class TestZeroOneLoss:
    def test_elementwise(self):
        np.testing.assert_array_equal(zero_one_loss([0, 1], [0, 0]), [0, 1])
        np.testing.assert_array_equal(zero_one_loss([2, 2, 2], [0, 1, 2]), [1, 1, 0])

    def test_identity_case(self):
        y = np.arange(5)
        assert zero_one_loss(y, y).sum() == 0

    def test_length_mismatch(self):
        with pytest.raises(DimensionError):
            zero_one_loss([0, 1], [0])

    def test_mean_loss_is_error_rate(self):
        rng = np.random.default_rng(1)
        preds = rng.integers(0, 4, 200)
        labels = rng.integers(0, 4, 200)
        losses = zero_one_loss(preds, labels)
        assert losses.mean() == 1.0 - (preds == labels).mean()


class TestSoftmax:
    def test_uniform_rows(self):
        np.testing.assert_allclose(softmax([0.0, 0.0, 0.0]), [1 / 3] * 3, atol=1e-15)
        np.testing.assert_allclose(softmax([7.5] * 4), [0.25] * 4, atol=1e-15)

    def test_hand_computed_binary(self):
        out = softmax([np.log(2.0), 0.0])
        np.testing.assert_allclose(out, [2 / 3, 1 / 3], atol=1e-15)

    def test_shift_invariance(self):
        rng = np.random.default_rng(2)
        z = rng.standard_normal((30, 6))
        for shift in (-17.3, 0.5, 1e4):
            np.testing.assert_allclose(softmax(z + shift), softmax(z), atol=1e-12)

    def test_overflow_safety_and_normalization(self):
        rng = np.random.default_rng(3)
        z = rng.uniform(-1e4, 1e4, size=(100, 10))
        out = softmax(z)
        assert np.isfinite(out).all()
        np.testing.assert_allclose(out.sum(axis=1), 1.0, atol=1e-12)

    def test_matrix_and_row_agree(self):
        rng = np.random.default_rng(4)
        z = rng.standard_normal((5, 4))
        out = softmax(z)
        for i in range(5):
            np.testing.assert_array_equal(softmax(z[i]), out[i])
