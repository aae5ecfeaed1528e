import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from newsfame.distributions import (
    EmpiricalCcdf,
    LogNormalFit,
    PowerLawTailFit,
    empirical_ccdf,
    expected_count,
    fit_lognormal,
    fit_powerlaw_tail,
    fit_truncated_lognormal,
    lognormal_tail_prob,
    powerlaw_tail_prob,
)
from newsfame.errors import DegenerateSampleError, InsufficientDataError


def test_fit_lognormal_two_point():
    fit = fit_lognormal([1.0, math.e ** 2])
    assert fit.mu == pytest.approx(1.0)
    assert fit.sigma == pytest.approx(1.0)
    assert fit.sample_size == 2
    assert fit.truncation_point is None


def test_fit_lognormal_constant_sample_rejected():
    with pytest.raises(DegenerateSampleError):
        fit_lognormal(np.full(10, math.e))


def test_fit_lognormal_rejects_nonpositive_and_small():
    with pytest.raises(ValueError):
        fit_lognormal([1.0, 0.0])
    with pytest.raises(InsufficientDataError):
        fit_lognormal([2.0])


def test_fit_lognormal_recovers_generator():
    rng = np.random.default_rng(101)
    sample = np.exp(rng.normal(2.0, 0.5, 10_000))
    fit = fit_lognormal(sample)
    assert fit.mu == pytest.approx(2.0, abs=0.02)
    assert fit.sigma == pytest.approx(0.5, abs=0.02)


def test_truncated_at_minus_inf_equals_plain():
    rng = np.random.default_rng(5)
    sample = np.exp(rng.normal(1.0, 0.7, 500))
    assert fit_truncated_lognormal(sample, -math.inf) == fit_lognormal(sample)


def test_truncated_mle_recovers_rejection_sampled_generator():
    # oracle: rejection-sample a normal(0.5, 1) and keep draws above 0
    rng = np.random.default_rng(77)
    kept = []
    while len(kept) < 20_000:
        draws = rng.normal(0.5, 1.0, 50_000)
        kept.extend(draws[draws >= 0.0].tolist())
    logs = np.array(kept[:20_000])
    fit = fit_truncated_lognormal(np.exp(logs), 0.0)
    assert fit.fit_method == "truncated_mle"
    assert fit.truncation_point == 0.0
    assert fit.mu == pytest.approx(0.5, abs=0.05)
    assert fit.sigma == pytest.approx(1.0, abs=0.05)


def test_truncated_all_at_truncation_point_rejected():
    with pytest.raises(DegenerateSampleError):
        fit_truncated_lognormal(np.full(5, math.exp(0.3)), 0.3)


def test_tail_prob_at_mu_is_half():
    fit = LogNormalFit(mu=1.3, sigma=0.4, sample_size=10)
    assert lognormal_tail_prob(fit, 1.3) == pytest.approx(0.5)


def test_tail_prob_one_sigma():
    fit = LogNormalFit(mu=0.0, sigma=1.0, sample_size=10)
    assert lognormal_tail_prob(fit, 1.0) == pytest.approx(0.1587, abs=2e-4)


def test_tail_prob_truncated_limits():
    fit = LogNormalFit(mu=0.5, sigma=1.0, truncation_point=0.0, sample_size=10)
    assert lognormal_tail_prob(fit, -2.0) == 1.0
    assert lognormal_tail_prob(fit, 0.0) == 1.0
    assert lognormal_tail_prob(fit, 50.0) == pytest.approx(0.0, abs=1e-12)
    levels = np.linspace(-1, 5, 80)
    probs = [lognormal_tail_prob(fit, x) for x in levels]
    assert np.all(np.diff(probs) <= 1e-12)


def test_tail_prob_matches_empirical_curve_of_group_total_fame():
    # synthetic group total-fame series: fame = ln(1 + total frequency)
    rng = np.random.default_rng(9)
    member_freqs = np.exp(rng.normal(2.0, 0.6, size=(8, 2500)))
    total_fame = np.log1p(member_freqs.sum(axis=0))
    fit = fit_lognormal(np.exp(total_fame))
    grid = np.quantile(total_fame, np.linspace(0.02, 0.98, 40))
    worst = max(
        abs(np.mean(total_fame > x) - lognormal_tail_prob(fit, float(x)))
        for x in grid
    )
    assert worst < 0.05


def test_empirical_ccdf_rank_arithmetic():
    ccdf = empirical_ccdf([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_array_equal(ccdf.xs, [1.0, 2.0, 3.0])
    np.testing.assert_allclose(ccdf.probs, [0.75, 0.5, 0.25])


def test_empirical_ccdf_all_equal_rejected():
    with pytest.raises(DegenerateSampleError):
        empirical_ccdf([3.0, 3.0, 3.0])


def test_empirical_ccdf_counting_oracle():
    rng = np.random.default_rng(13)
    sample = rng.gamma(2.0, 3.0, 5000)
    ccdf = empirical_ccdf(sample)
    for x, p in zip(ccdf.xs[::97], ccdf.probs[::97]):
        assert p == np.sum(sample > x) / sample.size


@given(st.lists(st.floats(min_value=0.01, max_value=1e4), min_size=2, max_size=200))
def test_empirical_ccdf_counts_property(values):
    values = np.asarray(values)
    if np.unique(values).size < 2:
        return
    ccdf = empirical_ccdf(values)
    for x, p in zip(ccdf.xs, ccdf.probs):
        assert p == np.sum(values > x) / values.size
    assert np.all(np.diff(ccdf.probs) < 0)


def test_fit_powerlaw_exact_line():
    ccdf = EmpiricalCcdf(np.array([10.0, 100.0, 1000.0]),
                         np.array([1e-2, 1e-4, 1e-6]))
    fit = fit_powerlaw_tail(ccdf, 10.0)
    assert fit.slope == pytest.approx(-2.0, abs=1e-9)
    assert fit.intercept == pytest.approx(0.0, abs=1e-9)
    assert fit.r_squared == pytest.approx(1.0)


def test_fit_powerlaw_recovers_pareto_exponent():
    # inverse-CDF Pareto sampler as the oracle: Pr(X > x) = x**-2 above 1
    rng = np.random.default_rng(29)
    sample = (1.0 - rng.random(50_000)) ** (-1.0 / 2.0)
    fit = fit_powerlaw_tail(empirical_ccdf(sample), 1.0)
    assert fit.slope == pytest.approx(-2.0, abs=0.1)


def test_fit_powerlaw_refits_published_style_coefficients():
    xs = np.logspace(1, 4, 12)
    probs = 10.0 ** (-1.415 * np.log10(xs) + 0.079)
    fit = fit_powerlaw_tail(EmpiricalCcdf(xs, probs), 10.0)
    assert fit.slope == pytest.approx(-1.415, abs=1e-9)
    assert fit.intercept == pytest.approx(0.079, abs=1e-9)


def test_fit_powerlaw_needs_three_tail_points():
    ccdf = EmpiricalCcdf(np.array([1.0, 2.0, 3.0]), np.array([0.9, 0.5, 0.1]))
    with pytest.raises(InsufficientDataError):
        fit_powerlaw_tail(ccdf, 2.0)


def test_powerlaw_tail_prob_published_values():
    fit = PowerLawTailFit(-1.415, 0.079, x_min=2.0)
    assert powerlaw_tail_prob(fit, 3000.0) == pytest.approx(1.44e-05, rel=0.01)
    fit2 = PowerLawTailFit(-1.734, 0.362, x_min=2.0)
    assert powerlaw_tail_prob(fit2, 20_000.0) == pytest.approx(8.02e-08, rel=0.01)
    fit3 = PowerLawTailFit(-2.803, -1.060, x_min=1.0)
    assert powerlaw_tail_prob(fit3, 100.0) == pytest.approx(2.16e-07, rel=0.01)


def test_powerlaw_tail_prob_below_x_min_rejected():
    fit = PowerLawTailFit(-2.0, 0.0, x_min=5.0)
    with pytest.raises(ValueError):
        powerlaw_tail_prob(fit, 4.999)


def test_powerlaw_tail_prob_clamped():
    fit = PowerLawTailFit(-1.0, 0.0, x_min=1.0)
    assert powerlaw_tail_prob(fit, 1.0) == 1.0


def test_powerlaw_log_linearity():
    fit = PowerLawTailFit(-1.7, 0.25, x_min=3.0)
    for x in (3.0, 17.0, 240.0):
        ratio = math.log10(powerlaw_tail_prob(fit, 10 * x) /
                           powerlaw_tail_prob(fit, x))
        assert ratio == pytest.approx(fit.slope, rel=1e-9)


def test_powerlaw_monotone_non_increasing():
    fit = PowerLawTailFit(-2.3, 1.0, x_min=4.0)
    xs = np.linspace(4.0, 4000.0, 200)
    probs = [powerlaw_tail_prob(fit, float(x)) for x in xs]
    assert np.all(np.diff(probs) <= 0)


def test_tail_fit_invariants_enforced():
    with pytest.raises(ValueError):
        PowerLawTailFit(0.5, 0.0, x_min=1.0)
    with pytest.raises(ValueError):
        PowerLawTailFit(-2.0, 0.0, x_min=-1.0)
    # the raw line may cross 1 near the tail start; evaluation clamps it
    fit = PowerLawTailFit(-1.415, 0.079, x_min=1.0)
    assert powerlaw_tail_prob(fit, fit.x_min) == 1.0


def test_expected_count_published_pipeline():
    assert expected_count(1.44e-05, 1_022_651) == pytest.approx(14.7, abs=0.05)
    assert expected_count(8.017e-08, 3e8) == pytest.approx(24.0, abs=0.1)
    assert expected_count(0.0, 1e9) == 0.0


def test_expected_count_validates_probability():
    with pytest.raises(ValueError):
        expected_count(1.5, 100)


def test_lognormal_fit_recovery_across_seeds():
    # 20 seeded generators; at least 18 must land within 3 standard errors
    hits = 0
    for seed in range(20):
        rng = np.random.default_rng(1000 + seed)
        sample = np.exp(rng.normal(1.5, 0.6, 10_000))
        fit = fit_lognormal(sample)
        se_mu = 0.6 / math.sqrt(10_000)
        se_sigma = 0.6 / math.sqrt(2 * 10_000)
        if abs(fit.mu - 1.5) < 3 * se_mu and abs(fit.sigma - 0.6) < 3 * se_sigma:
            hits += 1
    assert hits >= 18


def test_fit_serialization_round_trip():
    fit = LogNormalFit(1.2, 0.3, 0.0, 55, "truncated_mle")
    assert LogNormalFit.from_dict(fit.to_dict()) == fit
    tail = PowerLawTailFit(-1.9, 0.4, 3.0, 400, 0.98)
    assert PowerLawTailFit.from_dict(tail.to_dict()) == tail
    assert "fit_method" in tail.to_dict()
