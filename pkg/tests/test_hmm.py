import math

import numpy as np
import pytest

from newsfame.distributions import LogNormalFit
from newsfame.errors import InsufficientDataError
from newsfame.hmm import (
    NORMAL,
    PEAK,
    HmmModel,
    StatePath,
    expected_hitting_time,
    label_states,
    mean_pulse_duration,
    simulate,
    stationary_peak_prob,
    train_hmm,
)
from newsfame.pulses import Pulse, PulseExtent, fit_pulse
from conftest import make_model, make_series


def hand_pulse(start, peak, end, height, rise):
    return Pulse.from_fit(PulseExtent(start, peak, end), height, rise, 0.0)


def rebuild_pulses(series, path):
    """Pulse records from a generation record's peak runs (refit each run)."""
    pulses = []
    for start, end in path.peak_runs():
        seg = series.values[start:end + 1]
        if seg.size >= 3:
            height, rise, residual = fit_pulse(seg)
        else:
            height = float(seg.max())
            rise = max(float(np.argmax(seg)) + 1.0, 0.5)
            residual = 0.0
        peak = start + int(np.argmax(seg))
        pulses.append(Pulse.from_fit(PulseExtent(start, peak, end),
                                     height, rise, residual))
    return pulses


def test_label_states_no_pulses_all_normal():
    s = make_series(np.ones(30))
    path = label_states(s, [])
    assert np.all(path.states == NORMAL)


def test_label_states_single_pulse_interval():
    s = make_series(np.ones(30))
    path = label_states(s, [hand_pulse(10, 15, 20, 5.0, 2.0)])
    assert int(np.sum(path.states == PEAK)) == 11
    assert path.peak_runs() == [(10, 20)]


def test_label_states_matches_membership_oracle():
    s = make_series(np.ones(200))
    pulses = [hand_pulse(10, 12, 30, 5.0, 2.0),
              hand_pulse(50, 55, 58, 8.0, 3.0),
              hand_pulse(120, 140, 160, 2.0, 1.0)]
    path = label_states(s, pulses)
    spans = [(p.start_index, p.end_index) for p in pulses]
    for i in range(len(s)):
        inside = any(a <= i <= b for a, b in spans)
        assert (path.states[i] == PEAK) == inside


def test_label_states_rejects_overlap():
    s = make_series(np.ones(50))
    with pytest.raises(ValueError):
        label_states(s, [hand_pulse(5, 8, 20, 1.0, 1.0),
                         hand_pulse(15, 18, 30, 1.0, 1.0)])


def test_train_alternating_path_gives_unit_rates():
    n = 10
    values = np.where(np.arange(n) % 2 == 1, 50.0, 1.0)
    values = values + np.linspace(0, 0.5, n)  # normal days need variance
    s = make_series(values)
    pulses = [hand_pulse(i, i, i, 40.0 + i, 1.0 + 0.1 * i)
              for i in range(1, n, 2)]
    path = label_states(s, pulses)
    with pytest.raises(ValueError):
        train_hmm(s, path, pulses)
    model = train_hmm(s, path, pulses, allow_beta_ge_gamma=True)
    assert model.beta == 1.0
    assert model.gamma == 1.0


def test_train_requires_pulses():
    s = make_series(np.ones(30))
    with pytest.raises(InsufficientDataError):
        train_hmm(s, label_states(s, []), [])


def test_train_rejects_mismatched_labels():
    s = make_series(np.ones(30))
    pulses = [hand_pulse(5, 6, 9, 3.0, 1.0), hand_pulse(15, 16, 19, 4.0, 1.0)]
    bad_path = StatePath(np.zeros(30, dtype=np.int8))
    with pytest.raises(ValueError):
        train_hmm(s, bad_path, pulses)


def test_transition_matrix_rows_sum_to_one():
    model = make_model(beta=0.037, gamma=0.41)
    np.testing.assert_allclose(model.transition_matrix.sum(axis=1), [1.0, 1.0])


def test_model_validation():
    fit = LogNormalFit(1.0, 0.5, sample_size=10)
    with pytest.raises(ValueError):
        HmmModel(1.2, 0.5, fit, fit, fit)
    with pytest.raises(ValueError):
        HmmModel(0.1, 0.0, fit, fit, fit)
    HmmModel(0.0, 1.0, fit, fit, fit)  # degenerate chain ends are constructible
    HmmModel(1.0, 1.0, fit, fit, fit)


def test_simulate_deterministic_given_seed(canonical_model):
    a_series, a_path = simulate(canonical_model, 2000, seed=42)
    b_series, b_path = simulate(canonical_model, 2000, seed=42)
    assert np.array_equal(a_series.values, b_series.values)
    assert np.array_equal(a_path.states, b_path.states)
    c_series, _ = simulate(canonical_model, 2000, seed=43)
    assert not np.array_equal(a_series.values, c_series.values)


def test_simulate_emissions_non_negative(canonical_model):
    series, _ = simulate(canonical_model, 5000, seed=1)
    assert np.all(series.values >= 0)


def test_simulate_beta_zero_stays_normal_with_matching_moments():
    model = make_model(beta=0.0, normal_median=math.exp(2.0), normal_sigma=0.5)
    series, path = simulate(model, 10_000, seed=3)
    assert np.all(path.states == NORMAL)
    log_values = np.log1p(series.values)
    se = 0.5 / math.sqrt(10_000)
    assert abs(log_values.mean() - 2.0) < 3 * se


def test_simulate_peak_fraction_matches_two_state_stationary(canonical_model):
    # independent oracle: effective exit rate from fresh pulse draws plus
    # the closed-form stationary share of a two-state chain
    gamma_eff = 1.0 / mean_pulse_duration(canonical_model, draws=20_000, seed=99)
    expected = canonical_model.beta / (canonical_model.beta + gamma_eff)
    _, path = simulate(canonical_model, 100_000, seed=17)
    observed = float(np.mean(path.states == PEAK))
    assert observed == pytest.approx(expected, rel=0.10)


def test_simulate_then_train_recovers_rates(canonical_model):
    series, path = simulate(canonical_model, 50_000, seed=11)
    pulses = rebuild_pulses(series, path)
    trained = train_hmm(series, path, pulses)
    assert trained.beta == pytest.approx(canonical_model.beta, rel=0.20)
    assert trained.gamma == pytest.approx(canonical_model.gamma, rel=0.10)
    assert trained.normal_log_fame.mu == pytest.approx(
        canonical_model.normal_log_fame.mu, abs=0.05)
    assert trained.peak_height_dist.mu == pytest.approx(
        canonical_model.peak_height_dist.mu, abs=0.1)


def test_stationary_peak_prob_values():
    assert stationary_peak_prob(make_model(beta=0.3, gamma=0.3)) == 0.5
    assert stationary_peak_prob(make_model(beta=0.01, gamma=0.2)) == \
        pytest.approx(0.0476, abs=2e-4)


def test_expected_hitting_time_values():
    assert expected_hitting_time(make_model(beta=0.5)) == 2.0
    assert expected_hitting_time(make_model(beta=0.01)) == 100.0
    with pytest.raises(ValueError):
        expected_hitting_time(make_model(beta=0.0))


def test_expected_hitting_time_matches_chain_simulation():
    # brute-force chain oracle: Bernoulli(beta) per day, first success
    beta = 0.05
    rng = np.random.default_rng(55)
    hits = rng.random((10_000, 1500)) < beta
    assert np.all(hits.any(axis=1))
    passage = hits.argmax(axis=1) + 1
    expected = expected_hitting_time(make_model(beta=beta))
    assert passage.mean() == pytest.approx(expected, rel=0.05)


def test_simulate_first_passage_agrees_with_formula(canonical_model):
    model = make_model(beta=0.05)
    times = []
    for seed in range(300):
        _, path = simulate(model, 400, seed=7000 + seed)
        peaks = np.flatnonzero(path.states == PEAK)
        assert peaks.size > 0
        times.append(peaks[0])
    assert np.mean(times) == pytest.approx(20.0, rel=0.15)


def test_model_serialization_round_trip(canonical_model):
    back = HmmModel.from_dict(canonical_model.to_dict())
    assert back == canonical_model
