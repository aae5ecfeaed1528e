"""News pulse detection and curve fitting.

A pulse is one burst in a frequency series: a rise to a peak over
``rise_days`` days followed by an exponential-style decay. The closed-form
curve, with days t counted from the pulse start, is

    x(t) = height * (t / rise_days)**rise_days * exp(rise_days - t)

which peaks at t = rise_days with value exactly ``height``. The equivalent
amplitude form is x(t) = amplitude * t**rise_days * exp(-t) with
amplitude = height * (e / rise_days)**rise_days.

Detection is threshold based and runs in three steps:

1. peak detection: strict local maxima (radius 1; a plateau counts once,
   at its leftmost index) whose value exceeds k_sigma times the standard
   deviation of the whole series;
2. peak grouping: peaks within group_distance days of each other merge
   into one peak group;
3. pulse identification: each group absorbs neighbors backward from its
   first point and forward from its last point while the ma_length-day
   moving average keeps strictly decreasing away from the group; a step
   where the average stops decreasing ends the absorption, as does the
   series boundary. Extents that overlap after absorption merge.

The shipped defaults are k_sigma=5, group_distance=20, ma_length=10.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize

from .errors import FitConvergenceError, InsufficientDataError

DEFAULT_K_SIGMA = 5.0
DEFAULT_GROUP_DISTANCE = 20
DEFAULT_MA_LENGTH = 10

_FIT_MAX_EVALS = 500
_MIN_RISE_DAYS = 0.5


@dataclass(frozen=True)
class PulseDetectionParams:
    k_sigma: float = DEFAULT_K_SIGMA
    group_distance: int = DEFAULT_GROUP_DISTANCE
    ma_length: int = DEFAULT_MA_LENGTH

    def __post_init__(self):
        if self.k_sigma <= 0 or self.group_distance <= 0 or self.ma_length <= 0:
            raise ValueError("all pulse detection parameters must be positive")


@dataclass(frozen=True)
class PulseExtent:
    """Index span of one detected pulse, before curve fitting."""

    start_index: int
    peak_index: int
    end_index: int

    def __post_init__(self):
        if not self.start_index <= self.peak_index <= self.end_index:
            raise ValueError(
                f"pulse indices must be ordered, got "
                f"({self.start_index}, {self.peak_index}, {self.end_index})")

    def __len__(self) -> int:
        return self.end_index - self.start_index + 1


def amplitude_from(height: float, rise_days: float) -> float:
    """Amplitude of the t**q e**-t form equivalent to (height, rise_days)."""
    return height * math.exp(rise_days * (1.0 - math.log(rise_days)))


@dataclass(frozen=True)
class Pulse:
    """A detected pulse with fitted curve parameters."""

    start_index: int
    peak_index: int
    end_index: int
    height: float
    rise_days: float
    amplitude: float
    residual: float

    def __post_init__(self):
        if not self.start_index <= self.peak_index <= self.end_index:
            raise ValueError("pulse indices must be ordered")
        if self.height <= 0 or self.rise_days <= 0:
            raise ValueError("height and rise_days must be positive")
        if self.residual < 0:
            raise ValueError("residual cannot be negative")
        expected = amplitude_from(self.height, self.rise_days)
        if abs(self.amplitude - expected) > 1e-9 * max(1.0, abs(expected)):
            raise ValueError("amplitude inconsistent with height and rise_days")

    @classmethod
    def from_fit(cls, extent: PulseExtent, height: float, rise_days: float,
                 residual: float) -> "Pulse":
        return cls(extent.start_index, extent.peak_index, extent.end_index,
                   height, rise_days, amplitude_from(height, rise_days), residual)


def pulse_shape(height: float, rise_days: float, t) -> float | np.ndarray:
    """Pulse curve value(s) at day offset(s) t >= 0 from the pulse start."""
    if rise_days <= 0:
        raise ValueError("rise_days must be positive")
    t_arr = np.asarray(t, dtype=float)
    if np.any(t_arr < 0):
        raise ValueError("day offsets must be non-negative")
    out = np.zeros_like(t_arr)
    pos = t_arr > 0
    # evaluate through logs; (t/q)**q overflows for long decays otherwise
    out[pos] = height * np.exp(
        rise_days * (np.log(t_arr[pos]) - math.log(rise_days)) + rise_days - t_arr[pos])
    if np.isscalar(t) or t_arr.ndim == 0:
        return float(out)
    return out


def _plateau_peaks(values: np.ndarray) -> list[int]:
    """Indices of strict local maxima; a flat run that rises on the left and
    falls on the right counts once, at its leftmost index."""
    n = values.size
    peaks = []
    i = 1
    while i < n - 1:
        j = i
        while j + 1 < n and values[j + 1] == values[i]:
            j += 1
        if j < n - 1 and values[i] > values[i - 1] and values[j] > values[j + 1]:
            peaks.append(i)
        i = j + 1
    return peaks


def _clamped_mean(values: np.ndarray, lo: int, hi: int) -> float:
    """Mean over [lo, hi] clipped to the series bounds."""
    lo = max(lo, 0)
    hi = min(hi, values.size - 1)
    return float(values[lo:hi + 1].mean())


def _absorb(values: np.ndarray, start: int, ma_length: int, step: int) -> int:
    """Extend from ``start`` in direction ``step`` while the moving average
    keeps strictly decreasing; returns the final absorbed index.

    Backward absorption (step -1) averages the ma_length days ending at the
    cursor; forward absorption (step +1) the ma_length days starting there.
    """
    def ma(i: int) -> float:
        if step == -1:
            return _clamped_mean(values, i - ma_length + 1, i)
        return _clamped_mean(values, i, i + ma_length - 1)

    pos = start
    prev = ma(pos)
    while 0 <= pos + step < values.size:
        cur = ma(pos + step)
        if cur >= prev:
            break
        pos += step
        prev = cur
    return pos


def detect_pulses(series, params: PulseDetectionParams | None = None) -> list[PulseExtent]:
    """Run the three-step detection on a FrequencySeries (or raw array).

    Returns disjoint extents ordered by start index; the peak index marks
    the maximum value inside each extent (leftmost on ties). A flat series
    (zero standard deviation) yields no pulses.
    """
    params = params or PulseDetectionParams()
    values = np.asarray(getattr(series, "values", series), dtype=float)
    if values.size <= 2 * params.ma_length:
        raise InsufficientDataError(
            f"series of {values.size} days too short for ma_length "
            f"{params.ma_length}")
    sigma = float(values.std())
    if sigma == 0:
        return []
    threshold = params.k_sigma * sigma
    peaks = [p for p in _plateau_peaks(values) if values[p] > threshold]
    if not peaks:
        return []

    groups: list[list[int]] = [[peaks[0], peaks[0]]]
    for p in peaks[1:]:
        if p - groups[-1][1] <= params.group_distance:
            groups[-1][1] = p
        else:
            groups.append([p, p])

    extents: list[list[int]] = []
    for first, last in groups:
        start = _absorb(values, first, params.ma_length, -1)
        end = _absorb(values, last, params.ma_length, +1)
        if extents and start <= extents[-1][1]:
            extents[-1][1] = max(extents[-1][1], end)
        else:
            extents.append([start, end])

    out = []
    for start, end in extents:
        peak = start + int(np.argmax(values[start:end + 1]))
        out.append(PulseExtent(start, peak, end))
    return out


def fit_pulse(segment) -> tuple[float, float, float]:
    """Least-squares fit of the pulse curve to one segment.

    Days are counted t = 1..len(segment) from the pulse start (t=0 is
    excluded: the curve forces x(0)=0 while real pulses start from baseline
    noise). Initialized at the observed maximum; bounded search with
    rise_days in [0.5, len] and height in (0, 10*max]. Returns
    (height, rise_days, sum of squared errors).
    """
    seg = np.asarray(segment, dtype=float)
    if seg.size < 3:
        raise InsufficientDataError(
            f"pulse fit needs a segment of >= 3 days, got {seg.size}")
    peak_value = float(seg.max())
    if peak_value <= 0:
        raise ValueError("pulse fit needs a positive maximum")
    t = np.arange(1, seg.size + 1, dtype=float)
    h0 = peak_value
    q0 = float(np.argmax(seg) + 1)
    lower = [1e-12 * peak_value, _MIN_RISE_DAYS]
    upper = [10.0 * peak_value, float(seg.size)]
    x0 = [min(max(h0, lower[0]), upper[0]), min(max(q0, lower[1]), upper[1])]

    def residuals(params):
        h, q = params
        return pulse_shape(h, q, t) - seg

    res = optimize.least_squares(
        residuals, x0, bounds=(lower, upper), max_nfev=_FIT_MAX_EVALS,
        xtol=1e-14, ftol=1e-14, gtol=1e-14)
    if res.status == 0:
        raise FitConvergenceError(
            "pulse fit exhausted its evaluation budget",
            best_params=tuple(res.x), residual=float(2 * res.cost))
    height, rise_days = res.x
    return float(height), float(rise_days), float(np.sum(res.fun ** 2))


def fit_pulses(series, extents: list[PulseExtent]) -> list[Pulse]:
    """Fit the pulse curve on every extent of a series."""
    values = np.asarray(getattr(series, "values", series), dtype=float)
    pulses = []
    for ext in extents:
        height, rise_days, residual = fit_pulse(
            values[ext.start_index:ext.end_index + 1])
        pulses.append(Pulse.from_fit(ext, height, rise_days, residual))
    return pulses
