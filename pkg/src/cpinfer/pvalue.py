"""Truncated-Gaussian p-values, the naive z-test and a robust noise estimate."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import log_ndtr, ndtr
from scipy.stats import norm

from .core import IntervalUnion, TimeSeries

__all__ = [
    "TestResult",
    "DegenerateSigmaWarning",
    "log_mass",
    "selective_p",
    "naive_p",
    "estimate_sigma",
]

_SQRT2 = math.sqrt(2.0)
# Phi^{-1}(3/4) * sqrt(2): MAD of a difference of two iid N(0, 1) draws
_MAD_CONST = float(norm.ppf(0.75)) * _SQRT2


class DegenerateSigmaWarning(RuntimeWarning):
    pass


@dataclass(frozen=True)
class TestResult:
    """Outcome of one test of "no change in mean" at an estimated changepoint."""

    __test__ = False  # not a pytest class

    tau: int
    j: int
    nu_dot_y: float
    norm_sq: float
    scale: float
    S: IntervalUnion
    p: float
    method: str  # 'selective' or 'naive'
    conditioning: str  # 'step_sign', 'locations', 'fixed' or 'none'

    def to_json(self) -> dict:
        return {
            "tau": self.tau,
            "j": self.j,
            "nu_dot_y": self.nu_dot_y,
            "norm_sq": self.norm_sq,
            "scale": self.scale,
            "S": self.S.to_json(),
            "truncated": self.S.truncated,
            "p": self.p,
            "method": self.method,
            "conditioning": self.conditioning,
        }


def _log_interval_mass(a: float, b: float) -> float:
    """log P(a <= Z <= b) for standard normal Z, without cancellation."""
    if a >= b:
        return -math.inf
    if b <= 0:
        a, b = -b, -a
    # near 0 work with erf, which keeps relative accuracy for tiny intervals
    if a < 0:
        return math.log(0.5 * (math.erf(b / _SQRT2) + math.erf(-a / _SQRT2)))
    if a < 1:
        d = math.erf(b / _SQRT2) - math.erf(a / _SQRT2)
        return math.log(0.5 * d) if d > 0 else -math.inf
    la, lb = log_ndtr(-a), log_ndtr(-b)
    # P = Q(a) - Q(b) = Q(a) * (1 - exp(lb - la)), both in the upper tail
    if lb == -math.inf:
        return float(la)
    d = -math.expm1(lb - la)
    return float(la + math.log(d)) if d > 0 else -math.inf


def _log_sum_mass(intervals, scale: float) -> float:
    terms = [_log_interval_mass(lo / scale, hi / scale) for lo, hi in intervals]
    terms = [t for t in terms if t > -math.inf]
    if not terms:
        return -math.inf
    m = max(terms)
    return m + math.log(sum(math.exp(t - m) for t in terms))


def log_mass(S: IntervalUnion, scale: float = 1.0) -> float:
    """log of the N(0, scale^2) probability of S."""
    return _log_sum_mass(S, scale)


def selective_p(S: IntervalUnion, c: float, scale: float) -> float:
    """P(|phi| >= c | phi in S) for phi ~ N(0, scale^2).

    Both masses are accumulated in log space, so sets far out in the tails
    still give a well-defined ratio.

    Raises
    ------
    ValueError
        If S is empty or has no Gaussian mass in double precision.
    """
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    if not S:
        raise ValueError("conditioning set is empty")
    c = abs(float(c))
    log_den = log_mass(S, scale)
    if log_den == -math.inf:
        raise ValueError("conditioning set carries no Gaussian mass")
    # clip interval by interval: rebuilding an IntervalUnion would merge the
    # two tails back together when c is below the merge tolerance
    tails = [(lo, min(hi, -c)) for lo, hi in S if lo < -c] + [(max(lo, c), hi) for lo, hi in S if hi > c]
    log_num = _log_sum_mass(tails, scale)
    p = math.exp(log_num - log_den) if log_num > -math.inf else 0.0
    if p > 1.0:
        if p - 1.0 > 1e-12:
            warnings.warn(f"selective p-value {p!r} exceeded 1 before clamping", RuntimeWarning)
        p = 1.0
    return p


def naive_p(c: float, scale: float) -> float:
    """Two-sided z-test p-value, ignoring selection."""
    if not scale > 0:
        raise ValueError(f"scale must be positive, got {scale!r}")
    return float(min(1.0, 2.0 * ndtr(-abs(c) / scale)))


def estimate_sigma(y) -> float:
    """Median absolute deviation of first differences, rescaled to sigma.

    Changes in mean only touch a handful of differences, so the median
    ignores them.  Returns 0.0 with a :class:`DegenerateSigmaWarning` when
    more than half the differences coincide; callers must not use that value.

    Examples
    --------
    >>> round(estimate_sigma([0, 1, 0, 1, 0]), 5)
    1.04836
    """
    v = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
    if v.size < 3:
        raise ValueError("need at least three observations to estimate sigma")
    z = np.diff(v)
    mad = float(np.median(np.abs(z - np.median(z))))
    sigma = mad / _MAD_CONST
    if sigma == 0.0:
        warnings.warn("estimated sigma is zero", DegenerateSigmaWarning)
    return sigma
