import math

import numpy as np
import pytest

from conftest import both_outcomes_instance
from fdeval import aurc, auroc_f, ece, platt_apply, platt_fit, rc_curve, sgr_select
from fdeval.errors import (
    DegenerateLabels,
    InvalidParameter,
    NoFeasibleThreshold,
    PerfectSeparation,
)
from fdeval.risk_control import _binom_log_cdf, _invert_binomial_tail


def test_sgr_all_correct_matches_closed_form():
    n, delta = 1000, 0.01
    scores = np.linspace(1.0, 0.0, n)
    res = sgr_select(scores, np.zeros(n, dtype=int), r_star=0.15, delta=delta)
    assert res.empirical_coverage == 1.0
    assert res.empirical_risk == 0.0
    # zero observed errors invert to 1 - delta'^(1/m)
    delta_prime = delta / math.ceil(math.log2(n))
    want = 1.0 - delta_prime ** (1.0 / n)
    assert res.risk_bound == pytest.approx(want, abs=1e-12)
    assert res.risk_bound <= 0.15


def test_sgr_all_wrong_is_infeasible():
    n = 100
    scores = np.linspace(1.0, 0.0, n)
    with pytest.raises(NoFeasibleThreshold):
        sgr_select(scores, np.ones(n, dtype=int), r_star=0.15, delta=0.1)


def test_sgr_parameter_guards():
    scores = np.linspace(1.0, 0.0, 50)
    res = np.zeros(50, dtype=int)
    with pytest.raises(InvalidParameter):
        sgr_select(scores[:5], res[:5], r_star=0.15, delta=0.1)
    for bad in (0.0, 1.0, -0.2):
        with pytest.raises(InvalidParameter):
            sgr_select(scores, res, r_star=bad, delta=0.1)
        with pytest.raises(InvalidParameter):
            sgr_select(scores, res, r_star=0.15, delta=bad)
    with pytest.raises(InvalidParameter):
        sgr_select(scores, res[:20], r_star=0.15, delta=0.1)


def test_sgr_bound_dominates_empirical_risk():
    rng = np.random.default_rng(77)
    for _ in range(25):
        n = int(rng.integers(30, 400))
        conf, res = both_outcomes_instance(rng, n=n, failure_rate=0.2)
        conf = conf + 0.5 * (1 - res)  # make confidence informative
        try:
            out = sgr_select(conf, res, r_star=0.3, delta=0.1)
        except NoFeasibleThreshold:
            continue
        assert out.empirical_risk <= out.risk_bound
        assert out.risk_bound <= 0.3
        assert 0.0 < out.empirical_coverage <= 1.0
        m = round(out.empirical_coverage * n)
        assert np.sum(conf >= out.threshold) == m


def test_sgr_coverage_monotone_on_separated_scores():
    n = 200
    res = np.zeros(n, dtype=int)
    res[150:] = 1  # failures carry the lowest scores
    scores = np.linspace(1.0, 0.0, n)
    coverages = []
    for r_star in (0.02, 0.05, 0.15, 0.3, 0.6):
        try:
            coverages.append(sgr_select(scores, res, r_star=r_star, delta=0.05).empirical_coverage)
        except NoFeasibleThreshold:
            coverages.append(0.0)
    assert coverages == sorted(coverages)
    assert coverages[-1] > 0.7


def test_sgr_counts_full_tie_group_at_threshold():
    scores = np.array([1.0] * 6 + [0.5] * 6)
    res = np.zeros(12, dtype=int)
    out = sgr_select(scores, res, r_star=0.5, delta=0.2)
    assert out.empirical_coverage == 1.0
    assert out.threshold in (0.5, 1.0)


def test_binomial_tail_inversion_brackets_the_cdf():
    log_delta = math.log(0.01)
    for k, m in ((0, 50), (3, 80), (10, 40)):
        p = _invert_binomial_tail(k, m, log_delta)
        assert _binom_log_cdf(k, m, p) <= log_delta + 1e-9
        assert _binom_log_cdf(k, m, max(p - 1e-6, 0.0)) > log_delta


def test_platt_recovers_true_logistic_parameters():
    rng = np.random.default_rng(5)
    n = 30000
    s = rng.normal(0, 2, n)
    p = 1.0 / (1.0 + np.exp(-(1.5 * s - 0.5)))
    residuals = (rng.random(n) >= p).astype(int)  # residual 1 = failure
    model = platt_fit(s, residuals)
    assert model.a == pytest.approx(1.5, abs=0.15)
    assert model.b == pytest.approx(-0.5, abs=0.15)
    assert model.n_iter <= 100


def test_platt_apply_preserves_ranking_metrics_exactly():
    rng = np.random.default_rng(31)
    for _ in range(10):
        conf, res = both_outcomes_instance(rng, n=int(rng.integers(20, 300)))
        conf = conf + 0.3 * (1 - res)
        # pin one failure above one success so the fit stays well-posed
        conf[np.flatnonzero(res == 1)[0]] = conf[np.flatnonzero(res == 0)[0]] + 0.05
        model = platt_fit(conf, res)
        assert model.a > 0
        mapped = platt_apply(model, conf)
        assert np.all((mapped >= 0) & (mapped <= 1))
        assert auroc_f(mapped, res) == auroc_f(conf, res)
        assert aurc(rc_curve(mapped, res)) == aurc(rc_curve(conf, res))


def test_platt_prior_smoothing_flag():
    rng = np.random.default_rng(4)
    conf, res = both_outcomes_instance(rng, n=200)
    raw = platt_fit(conf, res)
    smooth = platt_fit(conf, res, prior_smoothing=True)
    assert (raw.a, raw.b) != (smooth.a, smooth.b)


def test_platt_degenerate_and_separated_inputs():
    with pytest.raises(DegenerateLabels):
        platt_fit(np.linspace(0, 1, 20), np.zeros(20, dtype=int))
    scores = np.concatenate([np.full(50, 10.0), np.full(50, -10.0)])
    res = np.concatenate([np.zeros(50, dtype=int), np.ones(50, dtype=int)])
    with pytest.raises(PerfectSeparation):
        platt_fit(scores, res)
    # interior targets make the separated fit well-posed again
    model = platt_fit(scores, res, prior_smoothing=True)
    assert np.isfinite(model.a) and model.a > 0


def test_ece_fixtures():
    # 100 samples pinned at confidence 0.9 but only half correct
    scores = np.full(100, 0.9)
    res = np.array([0, 1] * 50)
    assert ece(scores, res, bins=15) == pytest.approx(0.4, abs=1e-12)
    # perfectly calibrated bin contributes nothing
    scores = np.full(100, 0.7)
    res = np.array([0] * 70 + [1] * 30)
    assert ece(scores, res, bins=15) == pytest.approx(0.0, abs=1e-12)


def test_ece_bin_edges_are_right_closed():
    # 0.0 falls in the first bin, 0.5 and 1.0 close their bins
    scores = np.array([0.0, 0.5, 1.0, 1.0])
    res = np.array([1, 1, 0, 0])
    value = ece(scores, res, bins=2)
    # bin 1 holds {0.0, 0.5}: acc 0, mean conf 0.25; bin 2 holds the two 1.0s: exact
    assert value == pytest.approx(0.5 * 0.25, abs=1e-12)


def test_ece_guards():
    with pytest.raises(InvalidParameter):
        ece(np.array([1.5]), np.array([0]))
    with pytest.raises(InvalidParameter):
        ece(np.array([-0.1]), np.array([0]))
    with pytest.raises(InvalidParameter):
        ece(np.array([0.5]), np.array([0]), bins=0)
    with pytest.raises(InvalidParameter):
        ece(np.zeros(0), np.zeros(0, dtype=int))
