"""Tests for confidence scores, transforms, and estimator specs."""

import math

import numpy as np
import pytest

from selclass.core import DegenerateInputError, ParameterError, softmax
from selclass.estimators import (
    BaseEstimator,
    BkEstimator,
    EstimatorSpec,
    EtsEstimator,
    HtsEstimator,
    PNorm,
    Raw,
    TemperatureScale,
    apply_estimator,
    bk_score,
    ets_score,
    hts_score,
    logits_margin,
    max_logit,
    msp,
    negative_entropy,
    negative_gini,
    pnorm,
    pnorm_normalize,
    softmax_margin,
    temperature_scale,
)

LN2 = math.log(2.0)


def dense_ranks(values):
    """Rank vector identifying the weak ordering (ties share a rank)."""
    _, inverse = np.unique(np.asarray(values), return_inverse=True)
    return inverse


class TestBaseScores:
    def test_msp_values(self):
        assert msp([0.0, 0.0, 0.0, 0.0]) == pytest.approx(0.25, abs=1e-15)
        assert msp([LN2, 0.0]) == pytest.approx(2 / 3, abs=1e-15)
        assert msp([10.0, 0.0]) == pytest.approx(1 / (1 + math.exp(-10)), abs=1e-15)

    def test_softmax_margin_values(self):
        assert softmax_margin([1.0, 1.0, 1.0]) == pytest.approx(0.0, abs=1e-15)
        assert softmax_margin([LN2, 0.0]) == pytest.approx(1 / 3, abs=1e-15)
        assert softmax_margin([math.log(4), LN2, 0.0]) == pytest.approx(2 / 7, abs=1e-15)

    def test_max_logit_values(self):
        assert max_logit([3.0, 1.0, 0.0]) == 3.0
        assert max_logit([-1.0, -5.0]) == -1.0
        assert max_logit([2.5, 2.5, 2.5]) == 2.5

    def test_logits_margin_values(self):
        assert logits_margin([3.0, 1.0, 0.0]) == 2.0
        assert logits_margin([4.0, 4.0, 4.0]) == 0.0
        assert logits_margin([0.5, -0.5]) == 1.0

    def test_negative_entropy_values(self):
        assert negative_entropy([1.0] * 4) == pytest.approx(-math.log(4), abs=1e-12)
        # hand evaluation at (ln 2, 0): (2/3)ln(2/3) + (1/3)ln(1/3)
        expected = (2 / 3) * math.log(2 / 3) + (1 / 3) * math.log(1 / 3)
        assert negative_entropy([LN2, 0.0]) == pytest.approx(expected, abs=1e-12)
        assert expected == pytest.approx(-0.6365141682948128, abs=1e-12)
        # approaches 0 from below as the row becomes certain
        assert -1e-8 < negative_entropy([40.0, 0.0, 0.0]) < 0

    def test_negative_gini_values(self):
        for c in (2, 5, 30):
            assert negative_gini([0.0] * c) == pytest.approx(-1 + 1 / c, abs=1e-12)
        assert negative_gini([LN2, 0.0]) == pytest.approx(-4 / 9, abs=1e-12)
        # approaches 0 from below as the row becomes certain (M = 15 keeps
        # the value above double-precision rounding)
        assert -1e-5 < negative_gini([15.0, 0.0, 0.0]) < 0
        assert abs(negative_gini([15.0, 0.0, 0.0])) < abs(negative_gini([5.0, 0.0, 0.0]))

    def test_margin_never_exceeds_msp(self):
        rng = np.random.default_rng(10)
        z = rng.standard_normal((200, 8)) * 3
        assert (softmax_margin(z) <= msp(z) + 1e-15).all()
        assert (logits_margin(z) >= 0).all()

    def test_matrix_input_returns_vector(self):
        z = np.array([[LN2, 0.0], [0.0, 0.0]])
        np.testing.assert_allclose(msp(z), [2 / 3, 0.5], atol=1e-15)


class TestShiftInvariance:
    """Additive logit shifts change nothing except the max-logit score."""

    def setup_method(self):
        rng = np.random.default_rng(11)
        self.z = rng.standard_normal((64, 9)) * 3
        self.shifts = rng.uniform(-20, 20, 64)

    def order(self, scores):
        return np.argsort(-np.asarray(scores), kind="stable")

    @pytest.mark.parametrize(
        "scorer", [msp, softmax_margin, logits_margin, negative_entropy, negative_gini]
    )
    def test_invariant_scorers(self, scorer):
        shifted = self.z + self.shifts[:, None]
        np.testing.assert_array_equal(
            self.order(scorer(self.z)), self.order(scorer(shifted))
        )

    def test_max_logit_common_shift_only(self):
        base = self.order(max_logit(self.z))
        common = self.order(max_logit(self.z + 13.25))
        np.testing.assert_array_equal(base, common)
        per_row = self.order(max_logit(self.z + self.shifts[:, None]))
        assert not np.array_equal(base, per_row)


class TestDoctorStatistics:
    """Gini and MSP orderings match the squared-norm acceptance statistics."""

    def test_orderings_match(self):
        rng = np.random.default_rng(12)
        for c in (2, 10, 40):
            z = rng.standard_normal((64, c)) * 2
            sig = softmax(z)
            d_alpha = (sig**2).sum(axis=1)  # ||softmax||^2
            d_beta = sig.max(axis=1)
            np.testing.assert_array_equal(
                dense_ranks(negative_gini(z)), dense_ranks(d_alpha)
            )
            np.testing.assert_array_equal(dense_ranks(msp(z)), dense_ranks(d_beta))


class TestTransforms:
    def test_temperature_scale(self):
        z = np.array([[2.0, 4.0]])
        np.testing.assert_array_equal(temperature_scale(z, 1.0), z)
        np.testing.assert_array_equal(temperature_scale(z, 2.0), [[1.0, 2.0]])
        with pytest.raises(ParameterError):
            temperature_scale(z, 0.0)
        with pytest.raises(ParameterError):
            temperature_scale(z, -1.5)

    def test_pnorm_normalize_values(self):
        np.testing.assert_allclose(pnorm_normalize([3.0, 4.0], 2, 1.0), [0.6, 0.8], atol=1e-15)
        np.testing.assert_allclose(pnorm_normalize([3.0, 4.0], 1, 1.0), [3 / 7, 4 / 7], atol=1e-15)
        # 0-norm counts nonzero entries: divisor tau * 2 = 1
        np.testing.assert_array_equal(pnorm_normalize([3.0, 4.0, 0.0], 0, 0.5), [3.0, 4.0, 0.0])

    def test_pnorm_norm_of_exponentials(self):
        z = np.array([1.0, 2.0, 3.0])
        assert pnorm(z, 2) == pytest.approx(math.sqrt(14), abs=1e-12)
        assert pnorm(z, 1) == pytest.approx(6.0, abs=1e-12)
        assert pnorm([0.0, -2.0, 3.0], 0) == 2.0
        # non-integer p is allowed at the norm level
        assert pnorm([1.0, 1.0], 0.5) == pytest.approx(4.0, abs=1e-12)

    def test_pnorm_degenerate_rows(self):
        with pytest.raises(DegenerateInputError, match="row 1"):
            pnorm_normalize([[1.0, 2.0], [0.0, 0.0]], 2, 1.0)
        with pytest.raises(DegenerateInputError):
            pnorm_normalize([0.0, 0.0, 0.0], 0, 1.0)

    def test_pnorm_parameter_validation(self):
        with pytest.raises(ParameterError):
            PNorm(-1, 1.0)
        with pytest.raises(ParameterError):
            PNorm(2.5, 1.0)
        with pytest.raises(ParameterError):
            PNorm(2, 0.0)

    def test_large_entries_do_not_overflow(self):
        z = np.array([1e4, -1e4, 5e3])
        assert np.isfinite(pnorm(z, 10))


class TestEstimatorSpec:
    def test_ts_rejected_for_logit_family(self):
        for base in (BaseEstimator.MAX_LOGIT, BaseEstimator.LOGITS_MARGIN):
            with pytest.raises(ParameterError):
                EstimatorSpec(base, TemperatureScale(2.0))

    def test_tau_pinned_for_logit_family(self):
        spec = EstimatorSpec(BaseEstimator.MAX_LOGIT, PNorm(3, 0.7))
        assert spec.transform.tau == 1.0
        spec = EstimatorSpec(BaseEstimator.MSP, PNorm(3, 0.7))
        assert spec.transform.tau == 0.7

    def test_apply_examples(self):
        assert apply_estimator(EstimatorSpec(BaseEstimator.MSP, Raw()), [[0.0, 0.0]]) == [0.5]
        out = apply_estimator(
            EstimatorSpec(BaseEstimator.MAX_LOGIT, PNorm(2, 1.0)), [[3.0, 4.0]]
        )
        np.testing.assert_allclose(out, [0.8], atol=1e-15)
        out = apply_estimator(
            EstimatorSpec(BaseEstimator.MSP, TemperatureScale(0.5)), [[LN2, 0.0]]
        )
        np.testing.assert_allclose(out, [0.8], atol=1e-15)

    def test_apply_propagates_row_error(self):
        z = [[1.0, 2.0], [0.0, 0.0], [3.0, 4.0]]
        with pytest.raises(DegenerateInputError, match="row 1"):
            apply_estimator(EstimatorSpec(BaseEstimator.MSP, PNorm(2, 1.0)), z)

    @pytest.mark.parametrize("base", list(BaseEstimator))
    def test_apply_matches_transform_then_score(self, base):
        """Fused scoring equals the naive transform-then-score route."""
        rng = np.random.default_rng(13)
        z = rng.standard_normal((40, 6)) * 2
        scorers = {
            BaseEstimator.MSP: msp,
            BaseEstimator.SOFTMAX_MARGIN: softmax_margin,
            BaseEstimator.MAX_LOGIT: max_logit,
            BaseEstimator.LOGITS_MARGIN: logits_margin,
            BaseEstimator.NEGATIVE_ENTROPY: negative_entropy,
            BaseEstimator.NEGATIVE_GINI: negative_gini,
        }
        spec = EstimatorSpec(base, PNorm(3, 0.4))
        fused = apply_estimator(spec, z)
        naive = scorers[base](pnorm_normalize(z, 3, spec.transform.tau))
        np.testing.assert_allclose(fused, naive, atol=1e-12)
        if base not in (BaseEstimator.MAX_LOGIT, BaseEstimator.LOGITS_MARGIN):
            fused = apply_estimator(EstimatorSpec(base, TemperatureScale(0.37)), z)
            naive = scorers[base](temperature_scale(z, 0.37))
            np.testing.assert_allclose(fused, naive, atol=1e-12)


class TestTemperatureNormIdentity:
    """Cooled MSP equals a root of the max normalized exponential."""

    def test_identity_small(self):
        rng = np.random.default_rng(14)
        z = rng.standard_normal((50, 10)) * 3
        e = np.exp(z)
        for t in (0.2, 0.5, 1.0, 2.0):
            lhs = msp(z / t)
            rhs = (e.max(axis=1) / pnorm(e, 1.0 / t)) ** (1.0 / t)
            np.testing.assert_allclose(lhs, rhs, atol=1e-9)


class TestZeroNormReduction:
    """p = 0 with all-nonzero logits reproduces temperature scaling at t = tau*C."""

    def test_scores_equal(self):
        rng = np.random.default_rng(15)
        c = 6
        z = rng.standard_normal((40, c)) * 2
        assert (z != 0).all()
        for tau in (0.05, 0.5, 2.0):
            p0 = apply_estimator(EstimatorSpec(BaseEstimator.MSP, PNorm(0, tau)), z)
            ts = apply_estimator(
                EstimatorSpec(BaseEstimator.MSP, TemperatureScale(tau * c)), z
            )
            np.testing.assert_allclose(p0, ts, atol=1e-12)


class TestTauIrrelevance:
    def test_logit_family_ordering_unchanged(self):
        rng = np.random.default_rng(16)
        z = rng.standard_normal((80, 5)) * 4
        for base in (BaseEstimator.MAX_LOGIT, BaseEstimator.LOGITS_MARGIN):
            orders = []
            for tau in (0.1, 1.0, 7.0):
                scores = apply_estimator(EstimatorSpec(base, PNorm(2, tau)), z)
                orders.append(np.argsort(-scores, kind="stable"))
            np.testing.assert_array_equal(orders[0], orders[1])
            np.testing.assert_array_equal(orders[0], orders[2])


class TestCompositeScores:
    def test_ets_degenerate_cases(self):
        rng = np.random.default_rng(17)
        z = rng.standard_normal((20, 4))
        np.testing.assert_allclose(ets_score(z, 0.0, 1.0, 2.0), msp(z), atol=1e-15)
        np.testing.assert_allclose(ets_score(z, 1.0, 0.0, 1.0), msp(z), atol=1e-15)

    def test_ets_hand_value(self):
        # 0.5*MSP(z/0.5) + 0.5*MSP(z) at z = (ln 2, 0): 0.5*(4/5) + 0.5*(2/3)
        assert ets_score([LN2, 0.0], 0.5, 0.5, 0.5) == pytest.approx(11 / 15, abs=1e-12)

    def test_bk_values(self):
        rng = np.random.default_rng(18)
        z = rng.standard_normal((20, 4))
        np.testing.assert_allclose(bk_score(z, 1.0, 0.0), msp(z), atol=1e-15)
        assert bk_score([LN2, 0.0], 0.0, 1.0) == pytest.approx(2 / 3, abs=1e-12)
        assert bk_score([0.0, 0.0], 1.0, 1.0) == pytest.approx(1.0, abs=1e-12)

    def test_hts_reduces_to_plain_ts_when_w_zero(self):
        rng = np.random.default_rng(19)
        z = rng.standard_normal((20, 4))
        b = 0.4
        t = math.log(1 + math.exp(b))
        np.testing.assert_allclose(hts_score(z, b, 0.0), msp(z / t), atol=1e-12)

    def test_hts_uniform_fixed_point(self):
        assert hts_score([0.0, 0.0, 0.0, 0.0], -1.0, 0.5) == pytest.approx(0.25, abs=1e-12)

    def test_hts_hand_value(self):
        # b = w = 0 gives temperature softplus(0) = ln 2; z/ln2 = (1, 0)
        expected = 1 / (1 + math.exp(-1.0))
        assert hts_score([LN2, 0.0], 0.0, 0.0) == pytest.approx(expected, abs=1e-12)

    def test_hts_underflow_clamp_warns(self):
        z = np.array([[900.0, 0.0, 0.0]])
        with pytest.warns(RuntimeWarning):
            out = hts_score(z, -3.0, 1.0)
        assert np.isfinite(out).all()

    def test_parameter_ranges(self):
        z = [[0.0, 1.0]]
        with pytest.raises(ParameterError):
            ets_score(z, 1.2, 0.0, 1.0)
        with pytest.raises(ParameterError):
            ets_score(z, 0.5, 0.5, 0.0)
        with pytest.raises(ParameterError):
            bk_score(z, -1.5, 0.0)
        with pytest.raises(ParameterError):
            hts_score(z, -3.5, 0.0)
        with pytest.raises(ParameterError):
            hts_score(z, 0.0, 1.5)

    def test_composite_spec_objects(self):
        rng = np.random.default_rng(20)
        z = rng.standard_normal((10, 3))
        np.testing.assert_array_equal(
            EtsEstimator(0.3, 0.4, 1.5).scores(z), ets_score(z, 0.3, 0.4, 1.5)
        )
        np.testing.assert_array_equal(BkEstimator(0.9, -0.2).scores(z), bk_score(z, 0.9, -0.2))
        np.testing.assert_array_equal(HtsEstimator(0.1, 0.2).scores(z), hts_score(z, 0.1, 0.2))
