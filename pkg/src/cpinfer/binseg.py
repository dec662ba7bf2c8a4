"""CUSUM statistics and k-step binary segmentation."""

from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .core import ChangepointFit, SegmentationExhausted, TimeSeries, _as_series, segment_means, segment_rss

__all__ = ["CusumTriple", "cusum", "cusum_scan", "binseg", "binseg_steps"]


class CusumTriple(NamedTuple):
    """Segment ``y_s..y_e`` split after ``tau`` (all 1-based, s <= tau < e)."""

    s: int
    tau: int
    e: int

    def check(self, T: int) -> None:
        if not 1 <= self.s <= self.tau < self.e <= T:
            raise ValueError(f"invalid CUSUM triple {tuple(self)} for T={T}")


def _values(y) -> np.ndarray:
    if isinstance(y, TimeSeries):
        return y.values
    return np.asarray(y, dtype=float)


def cusum(y, t: CusumTriple | tuple[int, int, int]) -> float:
    """Scaled difference between the means right and left of the split.

    Examples
    --------
    >>> cusum([0, 0, 1, 1], (1, 2, 4))
    1.0
    """
    v = _values(y)
    t = CusumTriple(*t)
    t.check(v.size)
    s, tau, e = t
    n_l, n_r = tau - s + 1, e - tau
    left = v[s - 1:tau].mean()
    right = v[tau:e].mean()
    return float(np.sqrt(n_l * n_r / (n_l + n_r)) * (right - left))


def cusum_scan(prefix: np.ndarray, s: int, e: int) -> np.ndarray:
    """CUSUMs of every split of ``y_s..y_e``, from prefix sums.

    ``prefix`` has length T+1 with ``prefix[0] == 0``.  Entry ``i`` of the
    result is the statistic for ``tau = s + i``.  Works for any linear
    functional: pass prefix sums of a slope vector to get the phi-coefficient
    of a perturbed CUSUM.
    """
    tau = np.arange(s, e)
    n_l = tau - s + 1
    n_r = e - tau
    head = prefix[tau] - prefix[s - 1]
    tail = prefix[e] - prefix[tau]
    return np.sqrt(n_l * n_r / (n_l + n_r)) * (tail / n_r - head / n_l)


class _Step(NamedTuple):
    s: int
    tau: int
    e: int
    sign: int
    stat: float


def binseg_steps(values: np.ndarray, k: int) -> list[_Step]:
    """Run k steps of binary segmentation and return the chosen splits in order."""
    T = values.size
    prefix = np.concatenate(([0.0], np.cumsum(values)))
    best: dict[tuple[int, int], tuple[float, int, float]] = {}

    def best_split(s, e):
        key = (s, e)
        if key not in best:
            g = cusum_scan(prefix, s, e)
            i = int(np.argmax(np.abs(g)))  # first maximiser: smallest tau
            best[key] = (abs(g[i]), s + i, float(g[i]))
        return best[key]

    segments = [(1, T)]
    steps: list[_Step] = []
    for _ in range(k):
        top = None
        for s, e in segments:  # sorted left to right, so strict '>' keeps the smallest tau
            if e - s < 1:
                continue
            cand = best_split(s, e)
            if top is None or cand[0] > top[0][0]:
                top = (cand, s, e)
        if top is None:
            raise SegmentationExhausted(k, len(steps))
        (_, tau, g), s, e = top
        steps.append(_Step(s, tau, e, 1 if g >= 0 else -1, g))
        i = segments.index((s, e))
        segments[i:i + 1] = [(s, tau), (tau + 1, e)]
    return steps


def binseg(y, k: int) -> ChangepointFit:
    """k-step binary segmentation.

    Parameters
    ----------
    y : TimeSeries or array_like
    k : int
        Number of splits, ``1 <= k <= T - 1``.

    Returns
    -------
    ChangepointFit
        Locations sorted ascending, with ``orders`` giving the step at which
        each entered and ``signs`` the sign of its CUSUM at that step.
        ``objective`` is half the residual sum of squares.
    """
    ts = _as_series(y)
    v = ts.values
    if not isinstance(k, (int, np.integer)) or not 1 <= k <= v.size - 1:
        raise ValueError(f"k must be an integer in [1, {v.size - 1}], got {k!r}")
    steps = binseg_steps(v, int(k))
    ordered = sorted((st.tau, i + 1, st.sign) for i, st in enumerate(steps))
    locs = [t for t, _, _ in ordered]
    return ChangepointFit(
        locations=locs,
        means=segment_means(v, locs),
        objective=0.5 * segment_rss(v, locs),
        orders=[o for _, o, _ in ordered],
        signs=[d for _, _, d in ordered],
    )
