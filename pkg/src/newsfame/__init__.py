"""Modeling and forecasting of daily news-reference time series."""

from .distributions import (
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
from .errors import (
    DegenerateSampleError,
    FitConvergenceError,
    IngestionError,
    InsufficientDataError,
    NewsfameError,
)
from .series import (
    FameValue,
    FrequencySeries,
    GroupDefinition,
    GroupFameSeries,
    fame,
    fame_equivalence,
    fame_series,
    group_fame_series,
    peak_fame,
)
from .pulses import (
    Pulse,
    PulseDetectionParams,
    PulseExtent,
    detect_pulses,
    fit_pulse,
    fit_pulses,
    pulse_shape,
)
from .hmm import (
    HmmModel,
    StatePath,
    expected_hitting_time,
    label_states,
    mean_pulse_duration,
    simulate,
    stationary_peak_prob,
    train_hmm,
)
from .forecast import (
    ForwardFameModel,
    MaxFameReport,
    RatioModel,
    backtest_max_fame,
    backtest_ratio_model,
    become_famous_prob,
    extrapolate_n_periods,
    fit_forward_fame,
    fit_ratio_model,
    max_fame_prob_hmm,
    max_fame_prob_lognormal,
    pr_greater_lognormal,
    pr_greater_lognormal_mc,
)

__version__ = "0.1.0"
