"""Statistics helpers: Student-t intervals, weighted KS distances and trend fits."""

from __future__ import annotations

from dataclasses import dataclass
import math
from typing import Sequence

import numpy as np
from scipy import stats


@dataclass(frozen=True)
class ConfidenceInterval:
    """Sample mean with the half-width of a two-sided Student-t interval."""

    mean: float
    half_width: float
    n: int

    @property
    def low(self) -> float:
        return self.mean - self.half_width

    @property
    def high(self) -> float:
        return self.mean + self.half_width

    def overlaps(self, other: ConfidenceInterval) -> bool:
        return self.low <= other.high and other.low <= self.high

    def contains(self, value: float) -> bool:
        return self.low <= value <= self.high


def mean_ci(samples: Sequence[float] | np.ndarray, confidence: float = 0.95) -> ConfidenceInterval:
    """Student-t interval over replication means.

    Raises:
        ValueError: fewer than two samples.
    """
    data = np.asarray(samples, dtype=np.float64)
    n = data.size
    if n < 2:
        raise ValueError(f"a confidence interval needs at least 2 samples, got {n}")
    mean = float(data.mean())
    std = float(data.std(ddof=1))
    if std == 0.0:
        return ConfidenceInterval(mean=mean, half_width=0.0, n=n)
    quantile = float(stats.t.ppf(0.5 + confidence / 2.0, df=n - 1))
    return ConfidenceInterval(mean=mean, half_width=quantile * std / math.sqrt(n), n=n)


def weighted_ks_exponential(
    values: Sequence[float] | np.ndarray, weights: Sequence[float] | np.ndarray, mean: float
) -> float:
    """KS distance between the weighted empirical CDF of `values` and Exp(mean).

    The empirical CDF puts mass weights[n] / sum(weights) on values[n].
    """
    x = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.size == 0 or w.sum() <= 0:
        return float("nan")
    order = np.argsort(x, kind="stable")
    x, w = x[order], w[order]
    cumulative = np.hstack([0.0, np.cumsum(w) / w.sum()])
    target = stats.expon.cdf(x, scale=mean)
    above = np.max(cumulative[1:] - target)
    below = np.max(target - cumulative[:-1])
    return float(max(above, below))


def resampled_ks_exponential(
    values: Sequence[float] | np.ndarray,
    weights: Sequence[float] | np.ndarray,
    mean: float,
    generator: np.random.Generator,
    size: int | None = None,
) -> float:
    """Unweighted KS distance of a sample drawn from `values` with probabilities proportional to `weights`."""
    x = np.asarray(values, dtype=np.float64)
    w = np.asarray(weights, dtype=np.float64)
    if x.size == 0:
        return float("nan")
    draws = generator.choice(x, size=size or x.size, replace=True, p=w / w.sum())
    return float(stats.kstest(draws, stats.expon(scale=mean).cdf).statistic)


@dataclass(frozen=True)
class LinearFit:
    slope: float
    intercept: float
    r2: float


def linear_fit(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> LinearFit:
    """Least-squares line with its coefficient of determination."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    slope, intercept = np.polyfit(xs, ys, 1)
    residual = ys - (slope * xs + intercept)
    total = float(np.sum((ys - ys.mean()) ** 2))
    r2 = 1.0 - float(np.sum(residual**2)) / total if total > 0 else 0.0
    return LinearFit(slope=float(slope), intercept=float(intercept), r2=r2)


def fit_power_law(x: Sequence[float] | np.ndarray, y: Sequence[float] | np.ndarray) -> tuple[float, float]:
    """Fit y = c x^a on log-log scale and return (a, c); nan when some y <= 0."""
    xs = np.asarray(x, dtype=np.float64)
    ys = np.asarray(y, dtype=np.float64)
    if xs.size < 2 or np.any(ys <= 0) or np.any(xs <= 0):
        return float("nan"), float("nan")
    exponent, log_constant = np.polyfit(np.log(xs), np.log(ys), 1)
    return float(exponent), float(np.exp(log_constant))


def is_decreasing_trend(values: Sequence[float], allowed_violations: int = 1) -> bool:
    """True if the sequence decreases step to step with at most `allowed_violations` increases."""
    increases = sum(1 for a, b in zip(values, values[1:]) if b > a)
    return increases <= allowed_violations
