"""l0-penalised segmentation by functional pruning.

The optimal partial cost ``Cost(y_{1:s}; u)`` is the lower envelope of one
quadratic per surviving candidate "last changepoint" t::

    q_t(u) = G[t] + 0.5 * sum_{i=t+1..s} (y_i - u)^2,
    G[0] = 0,  G[t] = F[t] + lam,

where ``F[t]`` is the optimal cost of ``y_{1:t}``.  The envelope is stored as
u-intervals labelled by candidate.  Each step compares it with the flat
candidate ``G[s]`` and hands every u where the envelope exceeds it to the
new candidate; labels whose intervals vanish are pruned for good.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Sequence

import numpy as np

from .core import ChangepointFit, _as_series, segment_means, segment_rss

__all__ = ["FpopTrace", "fpop", "l0_segment", "l0_lambda_for_k", "LambdaSearch", "restricted_cost"]

TIE_RTOL = 1e-12


@dataclass(eq=False)
class FpopTrace:
    """Everything the forward pass learned about one series.

    ``snapshots[s]`` holds the labels alive in the envelope at time s,
    which is enough to rebuild ``Cost(y_{1:s}; u)`` exactly.
    """

    values: np.ndarray
    lam: float
    G: np.ndarray
    last: np.ndarray
    S1: np.ndarray
    S2: np.ndarray
    snapshots: list = field(repr=False)

    def column(self, s: int) -> list[tuple[float, float, float]]:
        """``Cost(y_{1:s}; u)`` as the min of global quadratics (a, b, c) in u."""
        if s == 0:
            return [(0.0, 0.0, 0.0)]
        out = []
        for t in self.snapshots[s]:
            t = int(t)
            n = s - t
            out.append((0.5 * n, float(self.S1[t] - self.S1[s]), float(self.G[t] + 0.5 * (self.S2[s] - self.S2[t]))))
        return out

    def changepoints(self) -> list[int]:
        cps = []
        s = self.values.size
        while s > 0:
            s = int(self.last[s])
            if s > 0:
                cps.append(s)
        return cps[::-1]


def fpop(values: np.ndarray, lam: float, keep_snapshots: bool = True) -> FpopTrace:
    """Functional-pruning optimal partitioning for the Gaussian mean cost."""
    v = np.asarray(values, dtype=float)
    T = v.size
    S1 = np.concatenate(([0.0], np.cumsum(v)))
    S2 = np.concatenate(([0.0], np.cumsum(v * v)))
    G = np.zeros(T + 1)
    F = np.zeros(T + 1)
    last = np.zeros(T + 1, dtype=np.int64)
    ncp = np.zeros(T + 1, dtype=np.int64)
    snaps: list = [np.zeros(1, dtype=np.int64)] if keep_snapshots else []

    lo = np.array([-np.inf])
    lab = np.zeros(1, dtype=np.int64)
    for s in range(1, T + 1):
        n = s - lab
        d1 = S1[s] - S1[lab]
        mean = d1 / n
        base = G[lab] + 0.5 * (S2[s] - S2[lab] - d1 * mean)
        hi = np.append(lo[1:], np.inf)
        gap = np.clip(mean, lo, hi) - mean
        val = base + 0.5 * n * gap * gap

        fmin = val.min()
        tied = np.flatnonzero(val <= fmin + TIE_RTOL * max(1.0, abs(fmin)))
        if tied.size > 1:
            # fewer changepoints first, then the earliest last-change
            cand = lab[tied]
            key = np.lexsort((cand, ncp[cand]))
            t_best = int(cand[key[0]])
            fmin = float(val[tied[key[0]]])
        else:
            t_best = int(lab[tied[0]])
        F[s] = fmin
        last[s] = t_best
        ncp[s] = ncp[t_best] + (1 if t_best > 0 else 0)
        G[s] = fmin + lam
        if keep_snapshots:
            snaps.append(np.unique(lab))
        if s == T:
            break

        # q_t(u) <= G[s]  <=>  |u - mean_t| <= r_t
        r2 = 2.0 * (G[s] - base) / n
        r = np.sqrt(np.maximum(r2, 0.0))
        a = np.maximum(lo, mean - r)
        b = np.minimum(hi, mean + r)
        keep = (r2 > 0) & (a < b)
        a = np.where(keep, a, hi)
        b = np.where(keep, b, hi)
        starts = np.stack([lo, a, b], axis=1).ravel()
        labels = np.stack([np.full_like(lab, s), lab, np.full_like(lab, s)], axis=1).ravel()
        valid = np.stack([a > lo, keep, keep & (b < hi)], axis=1).ravel()
        # pieces fully handed over keep their left end under the new label
        valid[0::3] |= ~keep
        starts, labels = starts[valid], labels[valid]
        change = np.ones(labels.size, dtype=bool)
        change[1:] = labels[1:] != labels[:-1]
        lo, lab = starts[change], labels[change]
        lo[0] = -np.inf
    return FpopTrace(v, float(lam), G, last, S1, S2, snaps)


def _check_lambda(lam) -> float:
    lam = float(lam)
    if not (math.isfinite(lam) and lam > 0):
        raise ValueError(f"lambda must be positive and finite, got {lam!r}")
    return lam


def l0_segment(y, lam: float) -> ChangepointFit:
    """Exact minimiser of half the residual sum of squares plus ``lam`` per changepoint.

    The forward pass is kept on ``fit.cache['fpop']`` for the inference code.

    Examples
    --------
    >>> l0_segment([1, 1, 1, 2, 2, 2], 0.5).locations
    (3,)
    """
    ts = _as_series(y)
    lam = _check_lambda(lam)
    trace = fpop(ts.values, lam)
    locs = trace.changepoints()
    fit = ChangepointFit(
        locations=locs,
        means=segment_means(ts.values, locs),
        objective=0.5 * segment_rss(ts.values, locs) + lam * len(locs),
    )
    fit.cache["fpop"] = trace
    fit.cache["lam"] = lam
    return fit


def reverse_trace(fit: ChangepointFit) -> FpopTrace:
    """Forward pass over the reversed series, memoised on the fit."""
    if "fpop_rev" not in fit.cache:
        fwd = fit.cache["fpop"]
        fit.cache["fpop_rev"] = fpop(fwd.values[::-1], fwd.lam)
    return fit.cache["fpop_rev"]


def restricted_cost(y, locations: Sequence[int], lam: float) -> float:
    """Cost of the best fit whose changepoints are exactly ``locations``."""
    v = _as_series(y).values
    return 0.5 * segment_rss(v, list(locations)) + lam * len(locations)


class LambdaSearch(NamedTuple):
    lam: float
    fit: ChangepointFit
    exact: bool
    trace: list


def l0_lambda_for_k(y, k_target: int, lambda_bounds: tuple[float, float] | None = None) -> LambdaSearch:
    """Bisect log(lambda) until l0 segmentation returns ``k_target`` changepoints.

    Parameters
    ----------
    y : TimeSeries or array_like
    k_target : int
        Desired number of changepoints.
    lambda_bounds : (lo, hi), optional
        Search bracket.  By default ``hi`` is just above the no-change cost,
        where no changepoint can pay for itself, and ``lo = 1e-10 * hi``.

    Returns
    -------
    LambdaSearch
        ``exact`` is False when no lambda in the bracket gives exactly
        ``k_target``; the fit with the nearest count (fewer changepoints on a
        tie, smallest such lambda) is returned instead.  ``trace`` lists ``(lam, count, objective)``
        for every evaluation.
    """
    ts = _as_series(y)
    T = ts.T
    if not 0 <= k_target <= T - 1:
        raise ValueError(f"k_target must lie in [0, {T - 1}], got {k_target}")
    if lambda_bounds is None:
        hi = 1.01 * 0.5 * float(np.sum((ts.values - ts.values.mean()) ** 2)) + 1e-12
        lo = 1e-10 * hi
    else:
        lo, hi = map(float, lambda_bounds)
        if not 0 < lo < hi:
            raise ValueError(f"lambda bounds must satisfy 0 < lo < hi, got {lambda_bounds!r}")

    trace = []

    def run(lam):
        fit = l0_segment(ts, lam)
        trace.append((lam, fit.K, fit.objective))
        return fit

    seen = [(lo, run(lo)), (hi, run(hi))]
    for lam, fit in seen:
        if fit.K == k_target:
            return LambdaSearch(lam, fit, True, trace)
    a, b = lo, hi
    for _ in range(60):
        if b / a - 1.0 < 1e-12:
            break
        mid = math.sqrt(a * b)
        fit = run(mid)
        seen.append((mid, fit))
        if fit.K == k_target:
            return LambdaSearch(mid, fit, True, trace)
        if fit.K > k_target:
            a = mid
        else:
            b = mid
    lam, fit = min(seen, key=lambda p: (abs(p[1].K - k_target), p[1].K, p[0]))
    return LambdaSearch(lam, fit, False, trace)
