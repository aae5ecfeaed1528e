"""Forecasting: group maximum-fame probabilities, become-famous forward
models, and fame-change ratio models, plus the backtests that score them.

Three forecasting routes live here.

1. Maximum-fame probabilities. For a group, the probability each entity is
   the most famous one. The log-normal route treats every entity's fame as
   an independent normal on the log scale and multiplies pairwise win
   probabilities: Pr_max(i) = prod_{j != i} Pr(F_i > F_j). The HMM route
   conditions on peak states: Pr_max(i) = Pr(peak_i) * prod_{j != i}
   [1 - Pr(peak_j) + Pr(peak_j) * Pr(height_i > height_j)], with
   Pr(peak) the stationary peak share. Both formulas assume independence
   across entities; the test suite carries joint-simulation oracles that
   measure (rather than hide) the approximation error.

2. Forward fame. For entities whose recent windowed mean frequency sits in
   a historical band, the distribution of the next period's windowed mean
   has a power-law tail; fitting it prices "trivial entity becomes famous"
   events, with expected head counts over the cohort size.

3. Fame-change ratios. Per entity, next-period peak (or average) fame over
   historical fame, both on the raw frequency scale (historical fame is
   the plain average daily frequency: observed ratios in the hundreds are
   only possible on raw scale). The ratio distribution again has a
   power-law tail; one-period tail probabilities extrapolate linearly in
   the number of periods to first order.

Throughout, "fame" consumed from the series layer is stated per function;
backtests use ln(1 + windowed mean frequency), ratios use raw windowed
means.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass
from typing import Mapping

import numpy as np
from scipy import stats

from .distributions import (
    EmpiricalCcdf,
    LogNormalFit,
    PowerLawTailFit,
    expected_count,
    fit_lognormal,
    fit_powerlaw_tail,
    powerlaw_tail_prob,
)
from .errors import InsufficientDataError
from .hmm import HmmModel, label_states, stationary_peak_prob, train_hmm
from .pulses import PulseDetectionParams, detect_pulses, fit_pulses
from .series import FrequencySeries, GroupDefinition, windowed_means

RATIO_KINDS = ("peak_over_hist", "avg_over_hist")

_PROB_SUM_SLACK = 0.05


def pr_greater_lognormal(fit_i: LogNormalFit, fit_j: LogNormalFit) -> float:
    """Pr(F_i > F_j) for independent normals on the log scale.

    Closed form: Phi((mu_i - mu_j) / sqrt(sigma_i^2 + sigma_j^2)). The
    Monte Carlo route below must agree with this within sampling error.
    """
    for fit in (fit_i, fit_j):
        if fit.truncation_point is not None:
            raise ValueError("comparison requires untruncated fits")
    spread = math.hypot(fit_i.sigma, fit_j.sigma)
    return float(stats.norm.cdf((fit_i.mu - fit_j.mu) / spread))


def pr_greater_lognormal_mc(fit_i: LogNormalFit, fit_j: LogNormalFit,
                            samples: int = 1_000_000, seed: int = 0) -> float:
    """Monte Carlo Pr(F_i > F_j): draw both log-fames and count wins."""
    for fit in (fit_i, fit_j):
        if fit.truncation_point is not None:
            raise ValueError("comparison requires untruncated fits")
    rng = np.random.default_rng(seed)
    draws_i = rng.normal(fit_i.mu, fit_i.sigma, samples)
    draws_j = rng.normal(fit_j.mu, fit_j.sigma, samples)
    return float(np.mean(draws_i > draws_j))


def max_fame_prob_lognormal(fits: Mapping[str, LogNormalFit]) -> dict[str, float]:
    """Per entity, the product over rivals of pairwise win probabilities.

    Entities are treated as independent, which underestimates small
    entities when one rival dominates; a one-entity group gets the empty
    product 1.
    """
    ids = sorted(fits)
    out = {}
    for i in ids:
        prob = 1.0
        for j in ids:
            if j != i:
                prob *= pr_greater_lognormal(fits[i], fits[j])
        out[i] = prob
    return out


def max_fame_prob_hmm(models: Mapping[str, HmmModel]) -> dict[str, float]:
    """Peak-state product formula for the maximum-fame probability.

    Entity i holds the group maximum when it is in its peak state and every
    rival is either quiet or peaking lower. Peak probabilities are the
    stationary shares; height comparisons use the fitted log-normal height
    distributions. Raising an entity's own beta never lowers its value.
    """
    if len(models) < 2:
        raise ValueError("need at least 2 entities")
    ids = sorted(models)
    peak_prob = {i: stationary_peak_prob(models[i]) for i in ids}
    out = {}
    for i in ids:
        prob = peak_prob[i]
        for j in ids:
            if j == i:
                continue
            win = pr_greater_lognormal(models[i].peak_height_dist,
                                       models[j].peak_height_dist)
            prob *= 1.0 - peak_prob[j] + peak_prob[j] * win
        out[i] = prob
    return out


def _counting_ccdf(values: np.ndarray, total: int) -> EmpiricalCcdf:
    """Strict-exceedance CCDF over a cohort that may contain zeros: points
    sit at distinct positive values, probabilities count over ``total``."""
    positive = np.unique(values[values > 0])
    if positive.size == 0:
        raise InsufficientDataError("no positive values in cohort")
    sorted_values = np.sort(values)
    exceed = total - np.searchsorted(sorted_values, positive, side="right")
    probs = exceed / total
    keep = probs > 0
    if not np.any(keep):
        raise InsufficientDataError("cohort CCDF has no usable points")
    return EmpiricalCcdf(positive[keep], probs[keep])


@dataclass(frozen=True)
class ForwardFameModel:
    """Power-law tail of next-period fame for a historical-fame band.

    Bounds and windows are on the raw frequency scale: the cohort is every
    (entity, day) whose ``hist_window``-day mean frequency lies in
    [hist_lower, hist_upper), and the modeled quantity is the
    ``future_window``-day mean frequency of the following period.
    """

    hist_lower: float
    hist_upper: float
    hist_window: int
    future_window: int
    tail: PowerLawTailFit
    cohort_size: int

    def __post_init__(self):
        if not self.hist_lower < self.hist_upper:
            raise ValueError("historical band must satisfy lower < upper")
        if self.hist_window < 1 or self.future_window < 1:
            raise ValueError("windows must be >= 1")

    def to_dict(self) -> dict:
        return {
            "hist_lower": self.hist_lower,
            "hist_upper": self.hist_upper,
            "hist_window": self.hist_window,
            "future_window": self.future_window,
            "tail": self.tail.to_dict(),
            "cohort_size": self.cohort_size,
        }


def forward_fame_cohort(series_map: Mapping[str, FrequencySeries],
                        hist_lower: float, hist_upper: float,
                        hist_window: int, future_window: int) -> np.ndarray:
    """Next-period windowed means for every (entity, day) whose historical
    windowed mean lies in [hist_lower, hist_upper)."""
    if not hist_lower < hist_upper:
        raise ValueError("historical band must satisfy lower < upper")
    collected = []
    for eid in sorted(series_map):
        values = series_map[eid].values
        if values.size < hist_window + future_window:
            continue
        hist = windowed_means(values, hist_window)
        future = windowed_means(values, future_window)
        # history ends at day d; the future window covers d+1 .. d+future_window
        n_obs = values.size - hist_window - future_window + 1
        hist_part = hist[:n_obs]
        future_part = future[hist_window:hist_window + n_obs]
        mask = (hist_part >= hist_lower) & (hist_part < hist_upper)
        collected.append(future_part[mask])
    if not collected:
        raise InsufficientDataError("no series long enough for both windows")
    return np.concatenate(collected)


def fit_forward_fame(series_map: Mapping[str, FrequencySeries],
                     hist_lower: float, hist_upper: float,
                     hist_window: int, future_window: int,
                     x_min: float) -> ForwardFameModel:
    """Fit the forward-fame power-law tail for one historical band."""
    cohort = forward_fame_cohort(series_map, hist_lower, hist_upper,
                                 hist_window, future_window)
    if cohort.size == 0:
        raise InsufficientDataError(
            f"empty cohort for band [{hist_lower}, {hist_upper})")
    ccdf = _counting_ccdf(cohort, cohort.size)
    tail = fit_powerlaw_tail(ccdf, x_min)
    return ForwardFameModel(hist_lower, hist_upper, hist_window,
                            future_window, tail, int(cohort.size))


@dataclass(frozen=True)
class ForecastProbability:
    probability: float
    expected_count: float


def become_famous_prob(model: ForwardFameModel,
                       threshold: float) -> ForecastProbability:
    """Probability a cohort member's next-period fame exceeds ``threshold``,
    and the expected number of such members."""
    if threshold < model.tail.x_min:
        raise ValueError(
            f"threshold {threshold} below tail start {model.tail.x_min}")
    prob = powerlaw_tail_prob(model.tail, threshold)
    return ForecastProbability(prob, expected_count(prob, model.cohort_size))


@dataclass(frozen=True)
class RatioModel:
    """Power-law tail of next-period-over-historical fame ratios."""

    kind: str
    horizon_days: int
    peak_window: int
    tail: PowerLawTailFit
    zero_history_count: int = 0

    def __post_init__(self):
        if self.kind not in RATIO_KINDS:
            raise ValueError(f"kind must be one of {RATIO_KINDS}, got {self.kind!r}")
        if self.kind == "peak_over_hist" and self.horizon_days < self.peak_window:
            raise ValueError("horizon must cover at least one peak window")
        if self.horizon_days < 1 or self.peak_window < 1:
            raise ValueError("horizon and peak window must be >= 1")

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "horizon_days": self.horizon_days,
            "peak_window": self.peak_window,
            "tail": self.tail.to_dict(),
            "zero_history_count": self.zero_history_count,
        }


def _fame_ratios(series_map: Mapping[str, FrequencySeries], members,
                 kind: str, horizon_days: int, peak_window: int,
                 historical_span: int, end_index: int | None = None,
                 ) -> tuple[np.ndarray, int]:
    """Per-entity fame-change ratios with the horizon ending at
    ``end_index`` (series end when None).

    Historical fame is the raw average daily frequency over the
    ``historical_span`` days preceding the horizon. Entities with zero
    historical fame are excluded; the second return value counts them.
    """
    ratios = []
    zero_history = 0
    for eid in sorted(members):
        series = series_map[eid]
        n = len(series) if end_index is None else end_index
        if n > len(series):
            raise InsufficientDataError(
                f"'{eid}' has {len(series)} days, needs {n}")
        if n < historical_span + horizon_days:
            raise InsufficientDataError(
                f"'{eid}' has {n} usable days, needs "
                f"{historical_span + horizon_days}")
        hist_start = n - horizon_days - historical_span
        hist = series.values[hist_start:n - horizon_days]
        horizon = series.values[n - horizon_days:n]
        h = float(hist.mean())
        if h == 0:
            zero_history += 1
            continue
        if kind == "peak_over_hist":
            future = float(windowed_means(horizon, peak_window).max())
        else:
            future = float(horizon.mean())
        ratios.append(future / h)
    return np.array(ratios), zero_history


def fit_ratio_model(series_map: Mapping[str, FrequencySeries],
                    group: GroupDefinition, kind: str,
                    horizon_days: int = 365, peak_window: int = 5,
                    historical_span: int = 365,
                    x_min: float = 1.0) -> RatioModel:
    """Fit a fame-change ratio tail over a group.

    The horizon is the last ``horizon_days`` of each member's series and
    the historical span the ``historical_span`` days before it. The tail
    is fitted to the ratio CCDF above ``x_min`` (default 1: fame at least
    held steady).
    """
    if kind not in RATIO_KINDS:
        raise ValueError(f"kind must be one of {RATIO_KINDS}, got {kind!r}")
    for eid in group.sorted_members():
        if eid not in series_map:
            raise KeyError(f"group member '{eid}' missing from series map")
    ratios, zero_history = _fame_ratios(
        series_map, group.members, kind, horizon_days, peak_window,
        historical_span)
    if ratios.size == 0:
        raise InsufficientDataError("no entity with positive historical fame")
    ccdf = _counting_ccdf(ratios, ratios.size)
    tail = fit_powerlaw_tail(ccdf, x_min)
    return RatioModel(kind, horizon_days, peak_window, tail, zero_history)


@dataclass(frozen=True)
class Extrapolation:
    """One-period tail probability extended to n periods.

    ``linear`` is the first-order n*p clamped at 1; ``exact`` the compound
    1 - (1-p)**n. They agree to first order: the gap is at most (n*p)^2/2
    while n*p <= 1.
    """

    linear: float
    exact: float


def extrapolate_n_periods(prob_one_period: float, n: int) -> Extrapolation:
    if not 0 <= prob_one_period <= 1:
        raise ValueError(f"probability must lie in [0, 1], got {prob_one_period}")
    if n < 1:
        raise ValueError("n must be >= 1")
    linear = min(1.0, n * prob_one_period)
    if prob_one_period == 1:
        exact = 1.0
    else:
        exact = -math.expm1(n * math.log1p(-prob_one_period))
    return Extrapolation(linear, exact)


@dataclass(frozen=True)
class MaxFameRow:
    entity_id: str
    prob_hmm: float
    prob_lognormal: float
    empirical_peak_days: int
    empirical_prob: float


@dataclass(frozen=True)
class MaxFameReport:
    """Side-by-side maximum-fame probabilities: both models vs realized
    peak days. Tie days (no strict maximum) count toward total_days but
    toward no entity."""

    rows: tuple[MaxFameRow, ...]
    total_days: int
    tie_days: int

    def __post_init__(self):
        object.__setattr__(self, "rows", tuple(self.rows))
        for name in ("prob_hmm", "prob_lognormal"):
            col = sum(getattr(r, name) for r in self.rows)
            if col > 1.0 + _PROB_SUM_SLACK:
                raise ValueError(
                    f"{name} column sums to {col:.4f}, beyond 1 + "
                    f"{_PROB_SUM_SLACK} for mutually exclusive events")

    def to_dict(self) -> dict:
        return {
            "total_days": self.total_days,
            "tie_days": self.tie_days,
            "entities": [
                {
                    "entity_id": r.entity_id,
                    "prob_hmm": r.prob_hmm,
                    "prob_lognormal": r.prob_lognormal,
                    "empirical_peak_days": r.empirical_peak_days,
                    "empirical_prob": r.empirical_prob,
                }
                for r in self.rows
            ],
        }


def _split_index(series: FrequencySeries, split_date: dt.date) -> int:
    return series.index_of(split_date)


def _require_aligned(series_map: Mapping[str, FrequencySeries], members) -> None:
    ref = series_map[members[0]]
    for eid in members[1:]:
        s = series_map[eid]
        if s.start_date != ref.start_date or len(s) != len(ref):
            raise ValueError(
                f"member '{eid}' covers {s.start_date}..{s.end_date}, "
                f"expected {ref.start_date}..{ref.end_date}")


def backtest_max_fame(series_map: Mapping[str, FrequencySeries],
                      group: GroupDefinition, split_date: dt.date,
                      window: int = 1,
                      pulse_params: PulseDetectionParams | None = None,
                      ) -> MaxFameReport:
    """Train both maximum-fame models before ``split_date`` and score them
    against realized peak days after it.

    A peak day for entity i is a day it holds the strict maximum windowed
    fame in the group (fame = ln(1 + windowed mean frequency)); exact ties
    award the day to nobody and are reported. The log-normal fits consume
    fame values, the HMM training runs the pulse pipeline on raw pre-split
    frequencies.
    """
    pulse_params = pulse_params or PulseDetectionParams()
    members = group.sorted_members()
    for eid in members:
        if eid not in series_map:
            raise KeyError(f"group member '{eid}' missing from series map")
    _require_aligned(series_map, members)
    fits = {}
    models = {}
    post_fames = []
    for eid in members:
        series = series_map[eid]
        split_idx = _split_index(series, split_date)
        if split_idx < 2:
            raise InsufficientDataError(f"'{eid}' has no pre-split data")
        if split_idx + window > len(series):
            raise InsufficientDataError(f"'{eid}' has no post-split data")
        pre = series.slice(0, split_idx)
        fits[eid] = fit_lognormal(1.0 + windowed_means(pre.values, window))
        extents = detect_pulses(pre, pulse_params)
        pulses = fit_pulses(pre, extents)
        # heavily peaking members can label more peak than normal days;
        # the backtest accepts whatever the labels say
        models[eid] = train_hmm(pre, label_states(pre, pulses), pulses,
                                allow_beta_ge_gamma=True)
        post_fames.append(np.log1p(
            windowed_means(series.values[split_idx:], window)))

    prob_ln = max_fame_prob_lognormal(fits)
    prob_hmm = max_fame_prob_hmm(models)

    fame_matrix = np.vstack(post_fames)
    total_days = fame_matrix.shape[1]
    top = fame_matrix.max(axis=0)
    is_top = fame_matrix == top
    strict = is_top.sum(axis=0) == 1
    tie_days = int(np.sum(~strict))
    peak_days = (is_top & strict).sum(axis=1)

    rows = [
        MaxFameRow(eid, prob_hmm[eid], prob_ln[eid], int(peak_days[k]),
                   float(peak_days[k] / total_days))
        for k, eid in enumerate(members)
    ]
    return MaxFameReport(tuple(rows), total_days, tie_days)


@dataclass(frozen=True)
class RatioBacktestRow:
    threshold: float
    empirical_count: int
    empirical_prob: float
    model_count: float
    model_prob: float


def backtest_ratio_model(series_map: Mapping[str, FrequencySeries],
                         group: GroupDefinition, split_date: dt.date,
                         thresholds, kind: str = "peak_over_hist",
                         horizon_days: int = 365, peak_window: int = 5,
                         historical_span: int = 365, x_min: float = 1.0,
                         ) -> tuple[RatioModel, list[RatioBacktestRow]]:
    """Fit a ratio model on pre-split data and compare its tail against
    post-split exceedance counts at each threshold.

    Model counts are model probability times the number of evaluated
    entities (those with positive post-split historical fame); thresholds
    with zero realized events still get a model count.
    """
    members = group.sorted_members()
    for eid in members:
        if eid not in series_map:
            raise KeyError(f"group member '{eid}' missing from series map")
    _require_aligned(series_map, members)
    first = series_map[members[0]]
    split_idx = _split_index(first, split_date)
    if split_idx + horizon_days > len(first):
        raise InsufficientDataError(
            f"needs {horizon_days} post-split days, has {len(first) - split_idx}")

    pre_map = {eid: series_map[eid].slice(0, split_idx) for eid in members}
    model = fit_ratio_model(pre_map, group, kind, horizon_days, peak_window,
                            historical_span, x_min)

    ratios, _ = _fame_ratios(series_map, members, kind, horizon_days,
                             peak_window, historical_span,
                             end_index=split_idx + horizon_days)
    n_eval = ratios.size
    if n_eval == 0:
        raise InsufficientDataError(
            "no entity with positive historical fame after the split")
    rows = []
    for threshold in thresholds:
        empirical = int(np.sum(ratios > threshold))
        model_prob = powerlaw_tail_prob(model.tail, float(threshold))
        rows.append(RatioBacktestRow(
            float(threshold), empirical, empirical / n_eval,
            expected_count(model_prob, n_eval), model_prob))
    return model, rows


def format_max_fame_table(report: MaxFameReport) -> str:
    """Aligned text table: entity, realized peak days and share, model
    probabilities. Rows sort by realized peak days, then entity id."""
    header = f"{'Entity':<24}{'Days_M':>8}{'Pr(Real)':>12}{'Pr(LN)':>12}{'Pr(HMM)':>12}"
    lines = [header, "-" * len(header)]
    ordered = sorted(report.rows,
                     key=lambda r: (-r.empirical_peak_days, r.entity_id))
    for r in ordered:
        lines.append(
            f"{r.entity_id:<24}{r.empirical_peak_days:>8}"
            f"{r.empirical_prob:>12.4f}{r.prob_lognormal:>12.3E}"
            f"{r.prob_hmm:>12.4f}")
    lines.append(f"(evaluated days: {report.total_days}, ties: {report.tie_days})")
    return "\n".join(lines)


def format_ratio_backtest_table(model: RatioModel,
                                rows: list[RatioBacktestRow]) -> str:
    header = (f"{'T':>10}{'Cnts':>8}{'Prob':>12}"
              f"{'Slope':>10}{'Cnts_M':>10}{'Prob_M':>12}")
    lines = [header, "-" * len(header)]
    for r in rows:
        lines.append(
            f"{r.threshold:>10.4g}{r.empirical_count:>8}{r.empirical_prob:>12.3E}"
            f"{model.tail.slope:>10.3f}{r.model_count:>10.2f}{r.model_prob:>12.3E}")
    return "\n".join(lines)
