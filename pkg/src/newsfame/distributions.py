"""Distribution fitting for fame data.

Two families cover almost everything this package needs:

* log-normal: a value x is log-normal when ln(x) is normal. Daily fame of
  regularly mentioned entities and of group aggregates behaves this way;
  when fame cannot go below a floor, the normal over ln(x) is left-truncated
  and renormalized above the truncation point.
* power-law tails: Pr(X > x) = c * x**(-lambda) for x >= x_min, a straight
  line in log10-log10 space. Tail fits here are ordinary least squares on
  the log10 empirical CCDF; published coefficients only reproduce their
  quoted probabilities in base 10, so base 10 is load-bearing, not a
  convention choice.

Note on exponents: a CCDF slope of -lambda corresponds to a histogram (pdf)
exponent of -(lambda + 1); all slopes reported by this module are CCDF
slopes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import optimize, stats

from .errors import DegenerateSampleError, FitConvergenceError, InsufficientDataError

_TRUNCATED_MLE_MAX_ITER = 1000
_TRUNCATED_MLE_REL_TOL = 1e-8


@dataclass(frozen=True)
class LogNormalFit:
    """Normal parameters of the log values, plus optional left truncation.

    ``truncation_point`` lives on the log scale; ``None`` means untruncated.
    """

    mu: float
    sigma: float
    truncation_point: float | None = None
    sample_size: int = 0
    fit_method: str = "log_moments"

    def __post_init__(self):
        if not (self.sigma > 0):
            raise ValueError(f"sigma must be positive, got {self.sigma}")

    def to_dict(self) -> dict:
        return {
            "mu": self.mu,
            "sigma": self.sigma,
            "truncation_point": self.truncation_point,
            "sample_size": self.sample_size,
            "fit_method": self.fit_method,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "LogNormalFit":
        return cls(d["mu"], d["sigma"], d.get("truncation_point"),
                   int(d.get("sample_size", 0)), d.get("fit_method", "log_moments"))


@dataclass(frozen=True)
class PowerLawTailFit:
    """Fitted log10 CCDF line: log10 Pr(X > x) = slope * log10(x) + intercept.

    Evaluated probabilities clamp into [0, 1], so the tail probability at
    x_min never exceeds 1 even when the raw regression line does (OLS over
    a curved CCDF can cross 1 near the tail start; published coefficient
    sets show the same behavior at small x).
    """

    slope: float
    intercept: float
    x_min: float
    sample_size: int = 0
    r_squared: float = 1.0
    fit_method: str = "ols_log10_ccdf"

    def __post_init__(self):
        if not (self.slope < 0):
            raise ValueError(f"tail slope must be negative, got {self.slope}")
        if not (self.x_min > 0):
            raise ValueError(f"x_min must be positive, got {self.x_min}")
        if not 0 <= self.r_squared <= 1:
            raise ValueError(f"r_squared must lie in [0, 1], got {self.r_squared}")

    def to_dict(self) -> dict:
        return {
            "slope": self.slope,
            "intercept": self.intercept,
            "x_min": self.x_min,
            "sample_size": self.sample_size,
            "r_squared": self.r_squared,
            "fit_method": self.fit_method,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PowerLawTailFit":
        return cls(d["slope"], d["intercept"], d["x_min"],
                   int(d.get("sample_size", 0)), float(d.get("r_squared", 1.0)),
                   d.get("fit_method", "ols_log10_ccdf"))


@dataclass(frozen=True)
class EmpiricalCcdf:
    """Strict-exceedance CCDF points: prob[k] = Pr(X > xs[k]).

    xs ascend, probs strictly descend within (0, 1]; the zero-probability
    point at the sample maximum is never stored so every point is usable in
    log space.
    """

    xs: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        xs = np.asarray(self.xs, dtype=float)
        probs = np.asarray(self.probs, dtype=float)
        if xs.size != probs.size or xs.size == 0:
            raise ValueError("CCDF needs matching non-empty x and prob arrays")
        if np.any(xs <= 0):
            raise ValueError("CCDF x values must be positive")
        if np.any(np.diff(xs) <= 0):
            raise ValueError("CCDF x values must strictly ascend")
        if np.any(probs <= 0) or np.any(probs > 1):
            raise ValueError("CCDF probabilities must lie in (0, 1]")
        if np.any(np.diff(probs) >= 0):
            raise ValueError("CCDF probabilities must strictly descend")
        xs.flags.writeable = False
        probs.flags.writeable = False
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "probs", probs)

    def __len__(self) -> int:
        return self.xs.size


def fit_lognormal(values) -> LogNormalFit:
    """Moment fit of ln(values): mu is the mean, sigma the population
    standard deviation. Needs at least two positive, non-identical values."""
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError(
            f"log-normal fit needs at least 2 values, got {arr.size}")
    if np.any(arr <= 0):
        raise ValueError("log-normal fit requires strictly positive values")
    logs = np.log(arr)
    sigma = float(logs.std())
    if sigma == 0:
        raise DegenerateSampleError("zero variance sample, nothing to fit")
    return LogNormalFit(float(logs.mean()), sigma, None, arr.size, "log_moments")


def fit_truncated_lognormal(values, truncation_point: float) -> LogNormalFit:
    """Maximum-likelihood fit of a left-truncated log-normal.

    ``values`` are on the raw scale; the truncation point is on the log
    scale and must not exceed any ln(value). The density of ln(x) is the
    normal density renormalized by its mass above the truncation point.
    With truncation_point = -inf this reduces exactly to fit_lognormal.
    """
    if truncation_point == -math.inf:
        return fit_lognormal(values)
    arr = np.asarray(values, dtype=float)
    if arr.size < 2:
        raise InsufficientDataError(
            f"truncated log-normal fit needs at least 2 values, got {arr.size}")
    if np.any(arr <= 0):
        raise ValueError("truncated log-normal fit requires positive values")
    logs = np.log(arr)
    if logs.min() < truncation_point - 1e-12:
        raise ValueError(
            f"log values extend below the truncation point {truncation_point}")
    if logs.std() == 0:
        raise DegenerateSampleError("zero variance sample, nothing to fit")

    n = logs.size

    def nll(params):
        mu, sigma = params
        z = (logs - mu) / sigma
        # renormalization: each density divides by Pr(ln x > truncation point),
        # so the negative log likelihood gains +n*log(survival)
        log_sf = stats.norm.logsf((truncation_point - mu) / sigma)
        return float(n * math.log(sigma) + 0.5 * np.sum(z * z) + n * log_sf)

    x0 = np.array([logs.mean(), logs.std()])
    res = optimize.minimize(
        nll, x0, method="L-BFGS-B",
        bounds=[(None, None), (1e-9 * max(1.0, float(logs.std())), None)],
        options={"maxiter": _TRUNCATED_MLE_MAX_ITER, "ftol": _TRUNCATED_MLE_REL_TOL},
    )
    if not res.success:
        raise FitConvergenceError(
            f"truncated log-normal fit did not converge: {res.message}",
            best_params=tuple(res.x), residual=float(res.fun))
    mu, sigma = res.x
    return LogNormalFit(float(mu), float(sigma), truncation_point, n, "truncated_mle")


def lognormal_tail_prob(fit: LogNormalFit, level: float) -> float:
    """Pr(ln X > level) under the fit; truncated fits renormalize above the
    truncation point, so the probability is 1 at and below it."""
    base = float(stats.norm.sf((level - fit.mu) / fit.sigma))
    if fit.truncation_point is None:
        return base
    if level <= fit.truncation_point:
        return 1.0
    denom = float(stats.norm.sf((fit.truncation_point - fit.mu) / fit.sigma))
    if denom == 0:
        return 0.0
    return min(1.0, base / denom)


def empirical_ccdf(values) -> EmpiricalCcdf:
    """Strict-exceedance CCDF: at each distinct sample point x,
    prob = (# samples > x) / n. The prob-0 point at the maximum is dropped."""
    arr = np.asarray(values, dtype=float)
    if arr.size == 0:
        raise InsufficientDataError("empty sample")
    if arr.size < 2:
        raise InsufficientDataError("CCDF needs at least 2 values")
    if np.any(arr <= 0):
        raise ValueError("CCDF values must be positive")
    xs = np.unique(arr)
    sorted_arr = np.sort(arr)
    exceed = arr.size - np.searchsorted(sorted_arr, xs, side="right")
    probs = exceed / arr.size
    keep = probs > 0
    if not np.any(keep):
        raise DegenerateSampleError("all values equal, CCDF has no usable points")
    return EmpiricalCcdf(xs[keep], probs[keep])


def fit_powerlaw_tail(ccdf: EmpiricalCcdf, x_min: float) -> PowerLawTailFit:
    """OLS of log10(prob) on log10(x) over CCDF points with x >= x_min."""
    if x_min <= 0:
        raise ValueError("x_min must be positive")
    mask = ccdf.xs >= x_min
    if int(mask.sum()) < 3:
        raise InsufficientDataError(
            f"tail fit needs >= 3 points at x >= {x_min}, got {int(mask.sum())}")
    lx = np.log10(ccdf.xs[mask])
    lp = np.log10(ccdf.probs[mask])
    slope, intercept = np.polyfit(lx, lp, 1)
    predicted = slope * lx + intercept
    ss_res = float(np.sum((lp - predicted) ** 2))
    ss_tot = float(np.sum((lp - lp.mean()) ** 2))
    r_squared = 1.0 if ss_tot == 0 else max(0.0, min(1.0, 1.0 - ss_res / ss_tot))
    if slope >= 0:
        raise DegenerateSampleError(
            f"tail regression produced non-negative slope {slope:.4g}")
    return PowerLawTailFit(float(slope), float(intercept), float(x_min),
                           int(mask.sum()), r_squared)


def powerlaw_tail_prob(fit: PowerLawTailFit, x: float) -> float:
    """Pr(X > x) = 10**(slope*log10 x + intercept), clamped to [0, 1].
    Undefined below the tail start."""
    if x < fit.x_min:
        raise ValueError(f"x={x} below tail start x_min={fit.x_min}")
    raw = 10.0 ** (fit.slope * math.log10(x) + fit.intercept)
    return min(1.0, max(0.0, raw))


def expected_count(prob: float, population: float) -> float:
    """Expected number of population members in a probability-``prob`` event."""
    if not 0 <= prob <= 1:
        raise ValueError(f"probability must lie in [0, 1], got {prob}")
    if population <= 0:
        raise ValueError("population must be positive")
    return prob * population


def ccdf_plot_rows(ccdf: EmpiricalCcdf, fit: PowerLawTailFit | None = None):
    """Rows (x, prob, fitted_prob) for external plotting; fitted_prob is
    empty below the fitted tail."""
    rows = []
    for x, p in zip(ccdf.xs, ccdf.probs):
        fitted = ""
        if fit is not None and x >= fit.x_min:
            fitted = powerlaw_tail_prob(fit, float(x))
        rows.append((float(x), float(p), fitted))
    return rows
