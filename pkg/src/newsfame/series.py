"""Daily reference-count series for named entities and groups.

An entity's raw observable is its daily frequency: how often it was
mentioned across all news sources on a given day. Fractional values are
fine (a feed-averaged 0.963 references/day is a legitimate observation).
Fame compresses a window of frequencies into one magnitude:

    fame = ln(1 + mean(frequency over the window))

Natural log throughout; with window 1 this is ln(1 + daily frequency).
Group series aggregate the members' raw windowed means first (sum, mean,
or max across members) and log-transform the aggregate, so a group's
total fame is the fame of its total frequency.
"""

from __future__ import annotations

import datetime as dt
import math
from dataclasses import dataclass, field

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import DegenerateSampleError, InsufficientDataError

GROUP_KINDS = ("total", "average", "maximum")


@dataclass(frozen=True)
class FrequencySeries:
    """One entity's contiguous daily frequency counts.

    ``values[i]`` is the frequency on ``start_date + i`` days. Gaps must be
    filled with zeros before construction (absence from the news means zero
    references); the CSV loader does this.
    """

    entity_id: str
    start_date: dt.date
    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1 or arr.size < 1:
            raise InsufficientDataError(
                f"series for '{self.entity_id}' must hold at least one day")
        if not np.all(np.isfinite(arr)):
            raise ValueError(f"series for '{self.entity_id}' has non-finite values")
        if np.any(arr < 0):
            raise ValueError(f"series for '{self.entity_id}' has negative frequencies")
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return self.values.size

    @property
    def end_date(self) -> dt.date:
        return self.start_date + dt.timedelta(days=len(self) - 1)

    def date_at(self, index: int) -> dt.date:
        if not 0 <= index < len(self):
            raise IndexError(f"index {index} outside series of length {len(self)}")
        return self.start_date + dt.timedelta(days=index)

    def index_of(self, day: dt.date) -> int:
        offset = (day - self.start_date).days
        if not 0 <= offset < len(self):
            raise IndexError(f"{day.isoformat()} outside series range")
        return offset

    def slice(self, start_index: int, stop_index: int) -> "FrequencySeries":
        """Sub-series covering indices [start_index, stop_index)."""
        if not 0 <= start_index < stop_index <= len(self):
            raise IndexError(f"bad slice [{start_index}, {stop_index})")
        return FrequencySeries(
            self.entity_id,
            self.start_date + dt.timedelta(days=start_index),
            self.values[start_index:stop_index].copy(),
        )


@dataclass(frozen=True)
class FameValue:
    """A single fame magnitude together with the window that produced it."""

    value: float
    window: int

    def __post_init__(self):
        if self.window < 1:
            raise ValueError("fame window must be >= 1")
        if not (self.value >= 0):
            raise ValueError("fame is non-negative by construction")

    def __float__(self) -> float:
        return self.value


@dataclass(frozen=True)
class GroupDefinition:
    """A named set of entity identifiers."""

    name: str
    members: frozenset[str] = field(default_factory=frozenset)

    def __post_init__(self):
        members = frozenset(self.members)
        if not members:
            raise ValueError(f"group '{self.name}' has no members")
        object.__setattr__(self, "members", members)

    @property
    def size(self) -> int:
        return len(self.members)

    def sorted_members(self) -> list[str]:
        return sorted(self.members)


@dataclass(frozen=True)
class GroupFameSeries:
    """Per-step group fame. ``values[k]`` corresponds to window end
    ``window - 1 + k`` in the members' common index space."""

    kind: str
    window: int
    values: np.ndarray

    def __post_init__(self):
        if self.kind not in GROUP_KINDS:
            raise ValueError(f"kind must be one of {GROUP_KINDS}, got {self.kind!r}")
        arr = np.asarray(self.values, dtype=float)
        arr.flags.writeable = False
        object.__setattr__(self, "values", arr)


def windowed_means(values: np.ndarray, window: int) -> np.ndarray:
    """Mean frequency of every full window; entry k ends at index window-1+k."""
    values = np.asarray(values, dtype=float)
    if window < 1:
        raise ValueError("window must be >= 1")
    if window > values.size:
        raise InsufficientDataError(
            f"window {window} exceeds series length {values.size}")
    return sliding_window_view(values, window).mean(axis=1)


def fame(series: FrequencySeries, window: int, end_index: int) -> FameValue:
    """Fame of the window ending at ``end_index``: ln(1 + windowed mean)."""
    if window < 1:
        raise ValueError("window must be >= 1")
    if end_index >= len(series):
        raise InsufficientDataError(
            f"end index {end_index} beyond series length {len(series)}")
    if end_index - window + 1 < 0:
        raise InsufficientDataError(
            f"window {window} exceeds history before index {end_index}")
    mean = series.values[end_index - window + 1:end_index + 1].mean()
    return FameValue(math.log1p(mean), window)


def fame_series(series: FrequencySeries, window: int) -> np.ndarray:
    """Sliding-window fame at every index with a full window.

    Entry k is the fame of the window ending at index window-1+k. With
    window 1 this equals ln(1 + frequency) day by day.
    """
    return np.log1p(windowed_means(series.values, window))


def peak_fame(series: FrequencySeries, period: tuple[dt.date, dt.date],
              window: int = 5) -> FameValue:
    """Maximum windowed fame over all full windows inside ``period``.

    The default 5-day window matches the convention used for yearly
    peak-fame tables.
    """
    first, last = period
    i0 = series.index_of(first)
    i1 = series.index_of(last)
    if i1 - i0 + 1 < window:
        raise InsufficientDataError(
            f"period of {i1 - i0 + 1} days shorter than window {window}")
    means = windowed_means(series.values[i0:i1 + 1], window)
    return FameValue(math.log1p(float(means.max())), window)


def group_fame_series(group: GroupDefinition,
                      series_map: dict[str, FrequencySeries],
                      kind: str,
                      window: int) -> GroupFameSeries:
    """Group fame per step: aggregate members' raw windowed mean frequencies
    (sum, mean, or max), then apply ln(1 + aggregate).

    All member series must cover one common date range.
    """
    if kind not in GROUP_KINDS:
        raise ValueError(f"kind must be one of {GROUP_KINDS}, got {kind!r}")
    members = group.sorted_members()
    rows = []
    ref = None
    for eid in members:
        if eid not in series_map:
            raise KeyError(f"group member '{eid}' missing from series map")
        s = series_map[eid]
        if ref is None:
            ref = s
        elif s.start_date != ref.start_date or len(s) != len(ref):
            raise ValueError(
                f"member '{eid}' covers {s.start_date}..{s.end_date}, "
                f"expected {ref.start_date}..{ref.end_date}")
        rows.append(windowed_means(s.values, window))
    stacked = np.vstack(rows)
    if kind == "total":
        agg = stacked.sum(axis=0)
    elif kind == "average":
        agg = stacked.mean(axis=0)
    else:
        agg = stacked.max(axis=0)
    return GroupFameSeries(kind, window, np.log1p(agg))


def _cumulative_at(sorted_fames: np.ndarray, count: float) -> float:
    """Accumulated fame of the first ``count`` entities (fractional counts
    take a linear share of the marginal entity)."""
    whole = int(math.floor(count))
    acc = float(sorted_fames[:whole].sum())
    frac = count - whole
    if frac > 0 and whole < sorted_fames.size:
        acc += frac * float(sorted_fames[whole])
    return acc


def _inverse_cumulative(sorted_fames: np.ndarray, target: float) -> float:
    """Smallest entity count whose accumulated fame reaches ``target``."""
    if target <= 0:
        return 0.0
    prefix = np.concatenate([[0.0], np.cumsum(sorted_fames)])
    j = int(np.searchsorted(prefix, target, side="left"))
    if j >= prefix.size:
        return float(sorted_fames.size)
    if prefix[j] == target or sorted_fames[j - 1] == 0:
        return float(j)
    return (j - 1) + (target - prefix[j - 1]) / float(sorted_fames[j - 1])


def fame_equivalence(group: GroupDefinition,
                     per_entity_fame: dict[str, float]) -> np.ndarray:
    """Bottom-vs-top fame equivalence curve.

    For each percentage a on the grid 1..100, finds b such that the
    accumulated fame of the bottom a% of entities (ascending) equals the
    accumulated fame of the top b%, interpolating linearly within the
    marginal entity. Returns an array of (a, b) rows; the final row is
    (100, 100). Ties in fame are broken by entity id for determinism.
    """
    members = group.sorted_members()
    if len(members) < 2:
        raise ValueError("equivalence curve needs at least 2 members")
    missing = [m for m in members if m not in per_entity_fame]
    if missing:
        raise KeyError(f"no fame value for group member '{missing[0]}'")
    fames = np.array([float(per_entity_fame[m]) for m in members])
    if np.any(fames < 0):
        raise ValueError("fame values must be non-negative")
    if fames.sum() == 0:
        raise DegenerateSampleError("all-zero fame: equivalence curve undefined")

    order_asc = sorted(range(len(members)), key=lambda i: (fames[i], members[i]))
    order_desc = sorted(range(len(members)), key=lambda i: (-fames[i], members[i]))
    asc = fames[order_asc]
    desc = fames[order_desc]
    n = len(members)

    pairs = []
    for alpha in range(1, 101):
        if alpha == 100:
            pairs.append((100.0, 100.0))
            continue
        target = _cumulative_at(asc, alpha / 100.0 * n)
        count = _inverse_cumulative(desc, target)
        pairs.append((float(alpha), min(100.0, 100.0 * count / n)))
    return np.array(pairs)
