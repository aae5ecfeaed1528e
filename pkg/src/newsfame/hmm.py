"""Two-state (Normal/Peak) hidden Markov news generator.

The hidden chain has transition matrix

    [[1 - beta, beta ],
     [gamma,    1 - gamma]]

with beta the Normal-to-Peak probability (small: entities are quiet most
of the time) and gamma the Peak-to-Normal probability (large: pulses die
quickly). Emissions are state dependent:

* Normal days draw ln(1 + frequency) from a normal distribution
  (``normal_log_fame``), i.e. frequency = exp(draw) - 1 floored at 0;
  draws are independent day to day.
* On entering Peak the generator samples a pulse height and rise time
  from their log-normal distributions and plays the deterministic pulse
  curve day by day.

Reconciling the geometric gamma-exit with the deterministic pulse shape:
during simulation a pulse keeps running until its curve has passed its
peak and decayed below the normal-state median frequency, at which point
the next day is a fresh Normal day. The model's ``gamma`` field is what
training estimates from labeled data and equals 1 / (mean pulse length)
up to sampling noise, so the analytic two-state results (stationary peak
share beta/(beta+gamma), mean hitting time 1/beta) still describe the
simulator. ``mean_pulse_duration`` measures the implied exit rate of a
model directly.

Training does not run Baum-Welch: states come from pulse-detection labels,
so all estimates are closed-form counts and moment fits.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass

import numpy as np

from .distributions import LogNormalFit, fit_lognormal
from .errors import DegenerateSampleError, InsufficientDataError
from .pulses import pulse_shape
from .series import FrequencySeries

NORMAL = 0
PEAK = 1

_PULSE_EXIT_FLOOR = 1e-9
_MIN_RISE_DAYS = 0.5


@dataclass(frozen=True)
class HmmModel:
    """Transition probabilities plus the three emission distributions."""

    beta: float
    gamma: float
    normal_log_fame: LogNormalFit
    peak_height_dist: LogNormalFit
    rise_time_dist: LogNormalFit

    def __post_init__(self):
        # trained news models have 0 < beta << gamma; the degenerate ends
        # (never peaks, peaks every day) stay constructible for analysis
        if not 0 <= self.beta <= 1:
            raise ValueError(f"beta must lie in [0, 1], got {self.beta}")
        if not 0 < self.gamma <= 1:
            raise ValueError(f"gamma must lie in (0, 1], got {self.gamma}")

    @property
    def transition_matrix(self) -> np.ndarray:
        return np.array([[1 - self.beta, self.beta],
                         [self.gamma, 1 - self.gamma]])

    def to_dict(self) -> dict:
        return {
            "beta": self.beta,
            "gamma": self.gamma,
            "normal_log_fame": self.normal_log_fame.to_dict(),
            "peak_height_dist": self.peak_height_dist.to_dict(),
            "rise_time_dist": self.rise_time_dist.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "HmmModel":
        return cls(
            float(d["beta"]), float(d["gamma"]),
            LogNormalFit.from_dict(d["normal_log_fame"]),
            LogNormalFit.from_dict(d["peak_height_dist"]),
            LogNormalFit.from_dict(d["rise_time_dist"]),
        )


@dataclass(frozen=True)
class StatePath:
    """Per-day hidden states aligned to a series (0 Normal, 1 Peak)."""

    states: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.states, dtype=np.int8)
        if arr.ndim != 1 or arr.size == 0:
            raise ValueError("state path must be a non-empty 1-d sequence")
        if not np.all((arr == NORMAL) | (arr == PEAK)):
            raise ValueError("states must be 0 (Normal) or 1 (Peak)")
        arr.flags.writeable = False
        object.__setattr__(self, "states", arr)

    def __len__(self) -> int:
        return self.states.size

    def peak_runs(self) -> list[tuple[int, int]]:
        """Maximal [start, end] index runs labeled Peak."""
        runs = []
        in_run = False
        start = 0
        for i, s in enumerate(self.states):
            if s == PEAK and not in_run:
                in_run, start = True, i
            elif s == NORMAL and in_run:
                runs.append((start, i - 1))
                in_run = False
        if in_run:
            runs.append((start, len(self) - 1))
        return runs


def label_states(series: FrequencySeries, pulses) -> StatePath:
    """Peak inside any pulse extent, Normal everywhere else.

    Pulses must be disjoint and lie within the series.
    """
    states = np.zeros(len(series), dtype=np.int8)
    spans = sorted((p.start_index, p.end_index) for p in pulses)
    prev_end = -1
    for start, end in spans:
        if start < 0 or end >= len(series):
            raise ValueError(f"pulse [{start}, {end}] outside series bounds")
        if start <= prev_end:
            raise ValueError(f"pulse starting at {start} overlaps its predecessor")
        states[start:end + 1] = PEAK
        prev_end = end
    return StatePath(states)


def train_hmm(series: FrequencySeries, path: StatePath, pulses,
              allow_beta_ge_gamma: bool = False) -> HmmModel:
    """Estimate the model from a labeled series.

    beta and gamma are transition frequencies (transitions out of a state
    divided by days in that state that have a successor); the normal-state
    distribution is fitted on ln(1 + frequency) over Normal days, and the
    height / rise-time distributions on the fitted pulse parameters.
    Trained news models virtually always have beta < gamma; pass
    ``allow_beta_ge_gamma`` to accept one that does not.
    """
    if len(path) != len(series):
        raise ValueError(f"path length {len(path)} != series length {len(series)}")
    pulses = list(pulses)
    if not pulses:
        raise InsufficientDataError(
            "no pulses: peak-state distributions are untrainable")
    peak_days = {i for start, end in ((p.start_index, p.end_index) for p in pulses)
                 for i in range(start, end + 1)}
    labeled_peak = set(np.flatnonzero(path.states == PEAK).tolist())
    if peak_days != labeled_peak:
        raise ValueError("peak labels do not match the pulse extents")

    states = path.states
    from_normal = states[:-1] == NORMAL
    from_peak = states[:-1] == PEAK
    if not np.any(states == NORMAL):
        raise InsufficientDataError("no Normal days to train on")
    if not np.any(from_normal):
        raise InsufficientDataError("no Normal day has a successor")
    beta = float(np.sum(from_normal & (states[1:] == PEAK)) / np.sum(from_normal))
    if not np.any(from_peak):
        raise InsufficientDataError("no Peak day has a successor")
    gamma = float(np.sum(from_peak & (states[1:] == NORMAL)) / np.sum(from_peak))
    if gamma == 0:
        raise DegenerateSampleError("no Peak-to-Normal transition observed")
    if beta >= gamma and not allow_beta_ge_gamma:
        raise ValueError(
            f"trained beta {beta:.4g} >= gamma {gamma:.4g}; pass "
            "allow_beta_ge_gamma=True to accept this model")

    normal_values = series.values[states == NORMAL]
    normal_fit = fit_lognormal(1.0 + normal_values)
    height_fit = fit_lognormal([p.height for p in pulses])
    rise_fit = fit_lognormal([p.rise_days for p in pulses])
    return HmmModel(beta, gamma, normal_fit, height_fit, rise_fit)


def normal_median_frequency(model: HmmModel) -> float:
    """Median Normal-day frequency: exp(mu) - 1 under the log-fame fit."""
    return max(math.exp(model.normal_log_fame.mu) - 1.0, 0.0)


def _pulse_exit_level(model: HmmModel) -> float:
    return max(normal_median_frequency(model), _PULSE_EXIT_FLOOR)


def pulse_duration(height: float, rise_days: float, exit_level: float,
                   max_days: int = 100_000) -> int:
    """Days a simulated pulse lasts: it runs through its rise and ends the
    day before its curve (evaluated at t past the peak) drops below
    ``exit_level``. Always at least 1 day."""
    t = 1
    while t < max_days:
        nxt = t + 1
        if nxt > rise_days and pulse_shape(height, rise_days, nxt) < exit_level:
            break
        t = nxt
    return t


def mean_pulse_duration(model: HmmModel, draws: int = 4096, seed: int = 0) -> float:
    """Monte Carlo mean pulse length implied by the model's height and
    rise-time distributions; 1 / this is the model's effective exit rate."""
    rng = np.random.default_rng(seed)
    exit_level = _pulse_exit_level(model)
    total = 0
    for _ in range(draws):
        height = math.exp(rng.normal(model.peak_height_dist.mu,
                                     model.peak_height_dist.sigma))
        rise = max(math.exp(rng.normal(model.rise_time_dist.mu,
                                       model.rise_time_dist.sigma)),
                   _MIN_RISE_DAYS)
        total += pulse_duration(height, rise, exit_level)
    return total / draws


def simulate(model: HmmModel, days: int, seed: int,
             entity_id: str | None = None,
             start_date: dt.date = dt.date(2005, 1, 1),
             ) -> tuple[FrequencySeries, StatePath]:
    """Generate a synthetic frequency series plus its true state path.

    The chain starts in Normal. Normal days emit exp(draw) - 1 floored at
    zero; on a Normal-to-Peak transition the generator samples (height,
    rise time) and emits the pulse curve at t = 1, 2, ... until the pulse
    is over (see module docstring), after which the next day is a fresh
    Normal day. Identical (model, days, seed) inputs give identical output.
    """
    if days < 1:
        raise ValueError("days must be >= 1")
    rng = np.random.default_rng(seed)
    exit_level = _pulse_exit_level(model)
    values = np.zeros(days)
    states = np.zeros(days, dtype=np.int8)

    def normal_emission() -> float:
        z = rng.normal(model.normal_log_fame.mu, model.normal_log_fame.sigma)
        return max(math.exp(z) - 1.0, 0.0)

    values[0] = normal_emission()
    day = 1
    while day < days:
        if rng.random() < model.beta:
            height = math.exp(rng.normal(model.peak_height_dist.mu,
                                         model.peak_height_dist.sigma))
            rise = max(math.exp(rng.normal(model.rise_time_dist.mu,
                                           model.rise_time_dist.sigma)),
                       _MIN_RISE_DAYS)
            length = pulse_duration(height, rise, exit_level)
            t = 1
            while t <= length and day < days:
                values[day] = pulse_shape(height, rise, float(t))
                states[day] = PEAK
                day += 1
                t += 1
            if day < days:
                # pulse over: the next day restarts from Normal
                values[day] = normal_emission()
                day += 1
        else:
            values[day] = normal_emission()
            day += 1

    if entity_id is None:
        entity_id = f"sim-{seed}"
    return FrequencySeries(entity_id, start_date, values), StatePath(states)


def stationary_peak_prob(model: HmmModel) -> float:
    """Long-run share of Peak days: beta / (beta + gamma)."""
    if model.beta + model.gamma <= 0:
        raise ValueError("beta + gamma must be positive")
    return model.beta / (model.beta + model.gamma)


def expected_hitting_time(model: HmmModel) -> float:
    """Expected days from Normal until first entering Peak: 1 / beta."""
    if model.beta == 0:
        raise ValueError("beta is 0: the chain never reaches Peak")
    return 1.0 / model.beta
