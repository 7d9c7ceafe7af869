import math
import warnings

import numpy as np
import pytest

from coxmix.coxfit import cumulative_hazard, fit_weighted_cox
from coxmix.data import Dataset
from coxmix.em import MixtureParams, e_step, FittedModel, fit_mixture, EMConfig
from coxmix.penalties import PenaltySpec
from coxmix.tdroc import (
    MARKER_MODES,
    auc,
    censoring_weights,
    compute_marker,
    conditional_survival,
    default_marker_bandwidth,
    roc_curve,
    sensitivity_specificity,
)

from conftest import simulate_single


def weighted_mann_whitney(markers, weights):
    """Pairwise case-vs-control comparison probability, ties counted half."""
    m = np.asarray(markers, dtype=float)
    w = np.asarray(weights, dtype=float)
    num = 0.0
    for i in range(m.size):
        for j in range(m.size):
            if m[i] > m[j]:
                score = 1.0
            elif m[i] == m[j]:
                score = 0.5
            else:
                score = 0.0
            num += w[i] * (1.0 - w[j]) * score
    return num / (w.sum() * (1.0 - w).sum())


def plain_km(data, t):
    """Unconditional Kaplan-Meier survival at t."""
    s = 1.0
    for u in np.unique(data.y[data.delta == 1]):
        if u > t:
            break
        d = np.sum((data.y == u) & (data.delta == 1))
        r = np.sum(data.y >= u)
        s *= 1.0 - d / r
    return s


class TestBandwidthRule:
    def test_formula(self):
        m = np.array([1.0, 2.0, 4.0, 8.0, 9.0])
        expected = 1.06 * m.std(ddof=1) * 5 ** (-0.2)
        assert default_marker_bandwidth(m) == pytest.approx(expected)

    def test_degenerate_inputs(self):
        assert default_marker_bandwidth(np.array([3.0, 3.0, 3.0])) == 1.0
        assert default_marker_bandwidth(np.array([42.0])) == 1.0


class TestRocCurve:
    def test_matches_pairwise_oracle_binary_weights(self, rng):
        m = rng.normal(size=30)
        w = (rng.uniform(size=30) < 0.4).astype(float)
        w[0], w[1] = 1.0, 0.0  # both classes present
        got = auc(roc_curve(m, w))
        assert got == pytest.approx(weighted_mann_whitney(m, w), abs=1e-12)

    def test_matches_pairwise_oracle_fractional_weights(self, rng):
        m = rng.normal(size=25)
        w = rng.uniform(0.05, 0.95, size=25)
        got = auc(roc_curve(m, w))
        assert got == pytest.approx(weighted_mann_whitney(m, w), abs=1e-12)

    def test_ties_counted_half(self):
        m = np.array([1.0, 1.0, 1.0, 1.0])
        w = np.array([1.0, 1.0, 0.0, 0.0])
        assert auc(roc_curve(m, w)) == pytest.approx(0.5, abs=1e-15)
        assert auc(roc_curve(m, w)) == pytest.approx(weighted_mann_whitney(m, w), abs=1e-15)

    def test_perfect_and_reversed_markers(self):
        m = np.array([0.1, 0.2, 3.0, 4.0])
        w = np.array([0.0, 0.0, 1.0, 1.0])
        assert auc(roc_curve(m, w)) == pytest.approx(1.0, abs=1e-15)
        assert auc(roc_curve(-m, w)) == pytest.approx(0.0, abs=1e-15)

    def test_sentinels_and_monotonicity(self, rng):
        m = rng.normal(size=20)
        w = rng.uniform(size=20)
        curve = roc_curve(m, w)
        assert curve.thresholds[0] == np.inf
        assert curve.thresholds[-1] == -np.inf
        assert curve.sensitivity[0] == 0.0
        assert curve.one_minus_specificity[0] == 0.0
        assert curve.sensitivity[-1] == pytest.approx(1.0, abs=1e-12)
        assert curve.one_minus_specificity[-1] == pytest.approx(1.0, abs=1e-12)
        assert np.all(np.diff(curve.sensitivity) >= -1e-15)
        assert np.all(np.diff(curve.one_minus_specificity) >= -1e-15)
        assert curve.thresholds.size == np.unique(m).size + 2

    def test_monotone_marker_transform_preserves_auc(self, rng):
        m = rng.normal(size=15)
        w = rng.uniform(size=15)
        assert auc(roc_curve(np.exp(m), w)) == pytest.approx(auc(roc_curve(m, w)), abs=1e-15)

    def test_degenerate_weight_errors(self):
        m = np.array([1.0, 2.0])
        with pytest.raises(ValueError, match="every weight is zero"):
            roc_curve(m, np.zeros(2))
        with pytest.raises(ValueError, match="every weight is one"):
            roc_curve(m, np.ones(2))
        with pytest.raises(ValueError, match="matching 1-d"):
            roc_curve(m, np.ones(3))


class TestSensitivitySpecificity:
    def test_hand_example(self):
        m = np.array([3.0, 2.0, 1.0, 0.0])
        w = np.array([1.0, 0.5, 0.0, 0.5])
        sens, spec = sensitivity_specificity(m, w, 1.5)
        # case mass above 1.5: 1 + 0.5 of total 2; control mass at or below: 1 + 0.5 of total 2
        assert sens == pytest.approx(0.75)
        assert spec == pytest.approx(0.75)

    def test_threshold_extremes(self, rng):
        m = rng.normal(size=10)
        w = rng.uniform(0.1, 0.9, size=10)
        sens, spec = sensitivity_specificity(m, w, -np.inf)
        assert sens == 1.0 and spec == 0.0
        sens, spec = sensitivity_specificity(m, w, np.inf)
        assert sens == 0.0 and spec == 1.0

    def test_degenerate_errors(self):
        with pytest.raises(ValueError, match="no case mass"):
            sensitivity_specificity(np.array([1.0]), np.array([0.0]), 0.5)
        with pytest.raises(ValueError, match="no control mass"):
            sensitivity_specificity(np.array([1.0]), np.array([1.0]), 0.5)


class TestConditionalSurvival:
    def test_infinite_bandwidth_is_plain_km(self):
        data = simulate_single(40, 1, [0.5], seed=101, censor_frac=0.3)
        markers = data.x[:, 0]
        t = float(np.median(data.y))
        got = conditional_survival(markers, data, t, bandwidth=np.inf)
        expected = plain_km(data, t)
        assert np.allclose(got, expected, atol=1e-12)

    def test_identical_markers_give_plain_km(self):
        data = simulate_single(30, 1, [0.5], seed=103, censor_frac=0.25)
        markers = np.zeros(30)
        t = float(np.quantile(data.y, 0.6))
        got = conditional_survival(markers, data, t, bandwidth=2.0)
        assert np.allclose(got, plain_km(data, t), atol=1e-12)

    def test_before_first_event_is_one(self):
        data = Dataset(
            y=np.array([2.0, 3.0, 4.0]), delta=np.array([1, 1, 0]), x=np.zeros((3, 1))
        )
        got = conditional_survival(np.array([0.0, 1.0, 2.0]), data, 1.0)
        assert np.allclose(got, 1.0)

    def test_empty_risk_set_skipped_with_warning(self):
        # compact kernel and far-apart markers starve one curve's risk set
        data = Dataset(
            y=np.array([1.0, 2.0]), delta=np.array([1, 1]), x=np.zeros((2, 1))
        )
        markers = np.array([0.0, 100.0])
        with pytest.warns(UserWarning, match="empty weighted risk set"):
            got = conditional_survival(markers, data, 2.0, bandwidth=1.0, kernel="epanechnikov")
        assert np.all(np.isfinite(got))
        # subject 0 never sees the event at y=2, so its factor there is skipped
        assert got[0] == pytest.approx(0.0, abs=1e-15) or got[0] > 0.0

    def test_validation(self):
        data = Dataset(y=np.array([1.0, 2.0]), delta=np.array([1, 0]), x=np.zeros((2, 1)))
        with pytest.raises(ValueError, match="one entry per record"):
            conditional_survival(np.array([1.0]), data, 1.0)
        with pytest.raises(ValueError, match="finite"):
            conditional_survival(np.array([1.0, np.nan]), data, 1.0)
        with pytest.raises(ValueError, match="positive"):
            conditional_survival(np.array([1.0, 2.0]), data, 1.0, bandwidth=0.0)


class TestCensoringWeights:
    def test_events_and_survivors(self):
        data = Dataset(
            y=np.array([1.0, 2.0, 3.0, 4.0, 2.5]),
            delta=np.array([1, 0, 1, 0, 1]),
            x=np.zeros((5, 1)),
        )
        W = censoring_weights(np.zeros(5), data, t=2.5)
        assert W[0] == 1.0  # event before t
        assert W[4] == 1.0  # event exactly at t
        assert W[2] == 0.0  # event after t
        assert W[3] == 0.0  # censored after t

    def test_censored_exactly_at_horizon_is_control(self):
        data = Dataset(
            y=np.array([1.0, 2.0, 3.0]), delta=np.array([1, 0, 1]), x=np.zeros((3, 1))
        )
        W = censoring_weights(np.zeros(3), data, t=2.0)
        assert W[1] == 0.0

    def test_fractional_weight_matches_km_ratio(self):
        data = simulate_single(50, 1, [0.6], seed=107, censor_frac=0.35)
        t = float(np.quantile(data.y, 0.7))
        markers = np.zeros(50)  # identical markers: conditional KM is plain KM
        W = censoring_weights(markers, data, t, bandwidth=1.0)
        frac = (data.y < t) & (data.delta == 0)
        assert np.any(frac)
        for i in np.nonzero(frac)[0]:
            expected = 1.0 - plain_km(data, t) / plain_km(data, float(data.y[i]))
            assert W[i] == pytest.approx(expected, abs=1e-12)
            assert 0.0 <= W[i] <= 1.0

    def test_uncensored_data_weights_are_indicators(self):
        data = simulate_single(30, 1, [0.5], seed=109, censor_frac=0.0)
        t = float(np.median(data.y))
        W = censoring_weights(data.x[:, 0], data, t)
        assert np.array_equal(W, ((data.y <= t) & (data.delta == 1)).astype(float))


class TestComputeMarker:
    def make_single_model(self, data):
        fit = fit_weighted_cox(data, np.ones(data.n))
        params = MixtureParams(pi=np.array([1.0]), components=[fit])
        return FittedModel(params=params, spec=PenaltySpec(kind="scad", level=0.0), seed=0)

    def make_mixture_model(self, data):
        gen = np.random.default_rng(7)
        w = gen.uniform(0.2, 0.8, size=data.n)
        c1 = fit_weighted_cox(data, w)
        c2 = fit_weighted_cox(data, 1.0 - w)
        params = MixtureParams(pi=np.array([0.45, 0.55]), components=[c1, c2])
        return FittedModel(params=params, spec=PenaltySpec(kind="scad", level=0.1), seed=0)

    def test_linear_predictor(self):
        data = simulate_single(25, 2, [0.8, -0.4], seed=113)
        model = self.make_single_model(data)
        got = compute_marker(model, data, "cox_linear_predictor")
        assert np.allclose(got, data.x @ model.params.components[0].beta, atol=1e-14)

    def test_linear_predictor_requires_one_component(self):
        data = simulate_single(25, 2, [0.8, -0.4], seed=113)
        model = self.make_mixture_model(data)
        with pytest.raises(ValueError, match="single-component"):
            compute_marker(model, data, "cox_linear_predictor")

    def test_posterior_lp_brute_force(self):
        data = simulate_single(20, 2, [0.7, -0.6], seed=127, censor_frac=0.2)
        model = self.make_mixture_model(data)
        got = compute_marker(model, data, "mixture_posterior_lp")
        S = e_step(data, model.params)
        expected = np.zeros(data.n)
        for i in range(data.n):
            for k, comp in enumerate(model.params.components):
                expected[i] += S[i, k] * float(data.x[i] @ comp.beta)
        assert np.allclose(got, expected, atol=1e-12)

    def test_event_prob_brute_force(self):
        data = simulate_single(20, 2, [0.7, -0.6], seed=131, censor_frac=0.2)
        model = self.make_mixture_model(data)
        t = float(np.median(data.y))
        got = compute_marker(model, data, "mixture_event_prob", t=t)
        expected = np.zeros(data.n)
        for i in range(data.n):
            s = 0.0
            for pi_k, comp in zip(model.params.pi, model.params.components):
                lam = cumulative_hazard(comp.baseline, t)
                s += pi_k * math.exp(-math.exp(float(data.x[i] @ comp.beta)) * lam)
            expected[i] = 1.0 - s
        assert np.allclose(got, expected, atol=1e-12)
        assert np.all((got >= 0) & (got <= 1))

    def test_event_prob_requires_time(self):
        data = simulate_single(20, 1, [0.5], seed=137)
        model = self.make_single_model(data)
        with pytest.raises(ValueError, match="evaluation time"):
            compute_marker(model, data, "mixture_event_prob")

    def test_unknown_mode(self):
        data = simulate_single(20, 1, [0.5], seed=139)
        model = self.make_single_model(data)
        with pytest.raises(ValueError, match="unknown marker mode"):
            compute_marker(model, data, "nope")

    def test_mode_registry(self):
        assert MARKER_MODES == (
            "cox_linear_predictor",
            "mixture_posterior_lp",
            "mixture_event_prob",
        )


class TestEndToEnd:
    def test_informative_marker_beats_chance(self):
        data = simulate_single(150, 1, [1.5], seed=149, censor_frac=0.2)
        t = float(np.median(data.y))
        markers = data.x[:, 0] * 1.5
        W = censoring_weights(markers, data, t)
        a = auc(roc_curve(markers, W))
        assert a > 0.65

    def test_fitted_model_marker_pipeline(self):
        data = simulate_single(100, 1, [1.2], seed=151, censor_frac=0.15)
        model = fit_mixture(
            data, PenaltySpec(kind="scad", level=0.0), EMConfig(k_init=1, restarts=1, seed=1)
        )
        t = float(np.median(data.y))
        markers = compute_marker(model, data, "mixture_event_prob", t=t)
        W = censoring_weights(markers, data, t)
        a = auc(roc_curve(markers, W))
        assert 0.5 < a <= 1.0
