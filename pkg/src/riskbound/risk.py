"""Value-at-Risk and Surface-at-Risk estimators.

The Value-at-Risk of a scalar random variable X at risk level ``eps`` is the
(1-eps)-quantile in infimum form::

    VaR_eps(X) = inf{ z | P[X <= z] >= 1 - eps }

A Surface-at-Risk extends this to a scalar stochastic process: it is the
collection of per-index Values-at-Risk, one for each random variable in the
indexed family.

This module provides the empirical (order-statistic) estimator, exact values
for a few analytic reference distributions used in validation, and the
exceedance probability for grouped sampling.  Everything here is pure and
stateless.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Hashable, Mapping, Sequence, Union

import numpy as np
from scipy import stats

__all__ = [
    "RiskLevel",
    "SampleSet",
    "Gaussian",
    "Binomial",
    "WienerMarginal",
    "AnalyticDistribution",
    "empirical_var",
    "analytic_var",
    "empirical_sar",
    "exceedance_probability",
]


@dataclass(frozen=True)
class RiskLevel:
    """Risk level ``epsilon`` in [0, 1]; smaller means more conservative."""

    epsilon: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.epsilon <= 1.0:
            raise ValueError(f"risk level must be in [0, 1], got {self.epsilon}")


@dataclass(frozen=True, eq=False)
class SampleSet:
    """Finite collection of scalar samples with implicit uniform weights."""

    values: np.ndarray

    def __post_init__(self) -> None:
        arr = np.asarray(self.values, dtype=float)
        if arr.ndim != 1:
            raise ValueError("samples must be one-dimensional")
        if arr.size and not np.all(np.isfinite(arr)):
            raise ValueError("samples must be finite")
        object.__setattr__(self, "values", arr)

    def __len__(self) -> int:
        return int(self.values.size)


@dataclass(frozen=True)
class Gaussian:
    mean: float
    stddev: float

    def __post_init__(self) -> None:
        if not self.stddev > 0:
            raise ValueError(f"stddev must be positive, got {self.stddev}")


@dataclass(frozen=True)
class Binomial:
    n: int
    p: float

    def __post_init__(self) -> None:
        if self.n < 0:
            raise ValueError(f"n must be non-negative, got {self.n}")
        if not 0.0 <= self.p <= 1.0:
            raise ValueError(f"p must be in [0, 1], got {self.p}")


@dataclass(frozen=True)
class WienerMarginal:
    """Marginal of a scaled Wiener process at time ``t``: N(0, scale^2 * t)."""

    t: float
    scale: float = 1.0

    def __post_init__(self) -> None:
        if self.t < 0:
            raise ValueError(f"t must be non-negative, got {self.t}")
        if not self.scale > 0:
            raise ValueError(f"scale must be positive, got {self.scale}")


AnalyticDistribution = Union[Gaussian, Binomial, WienerMarginal]

SamplesLike = Union[SampleSet, np.ndarray, Sequence[float]]
EpsLike = Union[RiskLevel, float]


def _as_values(samples: SamplesLike) -> np.ndarray:
    if isinstance(samples, SampleSet):
        return samples.values
    return SampleSet(np.asarray(samples, dtype=float)).values


def _as_eps(eps: EpsLike) -> float:
    if isinstance(eps, RiskLevel):
        return eps.epsilon
    return RiskLevel(float(eps)).epsilon


def empirical_var(samples: SamplesLike, eps: EpsLike) -> float:
    """Empirical Value-at-Risk: the left-continuous order-statistic estimator.

    Returns the smallest sample value ``z`` with
    ``count(samples <= z) / M >= 1 - eps``, i.e. the ceil((1-eps)*M)-th order
    statistic (1-indexed, clamped to [1, M]).  No interpolation is performed:
    an interpolated quantile can under-report risk, while the infimum over
    achieved values cannot.
    """
    values = _as_values(samples)
    e = _as_eps(eps)
    m = values.size
    if m == 0:
        raise ValueError("cannot take a quantile of an empty sample set")
    ordered = np.sort(values)
    # Infimum scan in float semantics: first index i (0-based) whose
    # cumulative fraction (i+1)/M reaches 1 - eps.
    fractions = np.arange(1, m + 1, dtype=float) / m
    idx = int(np.searchsorted(fractions, 1.0 - e, side="left"))
    idx = min(idx, m - 1)
    return float(ordered[idx])


def analytic_var(dist: AnalyticDistribution, eps: EpsLike) -> float:
    """Exact Value-at-Risk of an analytic reference distribution.

    Gaussian values come from the inverse CDF; binomial values are the
    smallest integer k with CDF(k) >= 1 - eps; a Wiener marginal at time t
    is treated as Gaussian with stddev scale*sqrt(t) (a point mass at 0 for
    t = 0, whose only achievable value is 0).
    """
    e = _as_eps(eps)
    q = 1.0 - e
    if isinstance(dist, Gaussian):
        return float(stats.norm.ppf(q, loc=dist.mean, scale=dist.stddev))
    if isinstance(dist, Binomial):
        if q <= 0.0:
            return 0.0
        return float(stats.binom.ppf(q, dist.n, dist.p))
    if isinstance(dist, WienerMarginal):
        if dist.t == 0.0:
            return 0.0
        return analytic_var(Gaussian(0.0, dist.scale * math.sqrt(dist.t)), e)
    raise TypeError(f"unsupported distribution: {dist!r}")


def empirical_sar(
    indexed_samples: Mapping[Hashable, SamplesLike], eps: EpsLike
) -> dict[Hashable, float]:
    """Empirical Surface-at-Risk: per-index empirical VaR.

    Index points are compared by exact equality; any spatial binning is the
    caller's responsibility.  This is the ground-truth oracle that fitted
    upper-bound surfaces are checked against.
    """
    e = _as_eps(eps)
    return {index: empirical_var(samples, e) for index, samples in indexed_samples.items()}


def exceedance_probability(eps: EpsLike, n: int) -> float:
    """Probability 1 - (1-eps)^n that at least one of n independent draws
    (one per random variable) reaches its variable's VaR at level eps."""
    e = _as_eps(eps)
    if n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    if e >= 1.0:
        return 1.0
    return float(-math.expm1(n * math.log1p(-e)))
