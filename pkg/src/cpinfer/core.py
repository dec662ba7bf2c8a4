"""Domain types shared by the detectors and the inference engines.

All public timepoint indices are 1-based: a changepoint ``tau`` splits the
series into ``y_1..y_tau`` and ``y_{tau+1}..y_T``.  Because a split position
is the same integer under 0-based half-open slicing (``y[:tau]``, ``y[tau:]``),
internal code slices with the public value directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ChangepointError",
    "SegmentationExhausted",
    "DegenerateBoundaryError",
    "InvariantError",
    "TimeSeries",
    "Contrast",
    "PerturbationPath",
    "ChangepointFit",
    "IntervalUnion",
    "make_spanning_contrast",
    "make_window_contrast",
    "make_raw_contrast",
    "perturbation_path",
]


class ChangepointError(Exception):
    """Base class for errors raised by this package."""


class SegmentationExhausted(ChangepointError, ValueError):
    """Binary segmentation ran out of admissible splits."""

    def __init__(self, requested: int, found: int):
        super().__init__(
            f"segmentation exhausted: requested {requested} changepoints, found {found}"
        )
        self.requested = requested
        self.found = found


class DegenerateBoundaryError(ChangepointError, ArithmeticError):
    """The regime walk could not step across a boundary."""

    def __init__(self, boundary: float):
        super().__init__(f"degenerate regime boundary at phi={boundary!r}")
        self.boundary = boundary


class InvariantError(ChangepointError, ArithmeticError):
    pass


@dataclass(frozen=True, eq=False)
class TimeSeries:
    """Observed series ``y_1..y_T`` with an optional noise standard deviation."""

    values: np.ndarray
    sigma: float | None = None

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.ndim != 1 or v.size < 2:
            raise ValueError("a time series needs at least two values")
        if not np.all(np.isfinite(v)):
            raise ValueError("time series values must be finite")
        v.setflags(write=False)
        object.__setattr__(self, "values", v)
        if self.sigma is not None:
            s = float(self.sigma)
            if not (math.isfinite(s) and s > 0):
                raise ValueError(f"sigma must be positive and finite, got {self.sigma!r}")
            object.__setattr__(self, "sigma", s)

    @property
    def T(self) -> int:
        return self.values.size

    def __len__(self):
        return self.values.size

    def with_sigma(self, sigma: float | None) -> "TimeSeries":
        return TimeSeries(self.values, sigma)


def _as_series(y) -> TimeSeries:
    return y if isinstance(y, TimeSeries) else TimeSeries(np.asarray(y, dtype=float))


@dataclass(frozen=True, eq=False)
class Contrast:
    """Sparse contrast vector nu, stored as a contiguous block of weights.

    ``start`` is the 0-based position of the first stored weight.  For the
    spanning and window kinds the block is exactly the support; raw
    contrasts may carry explicit zeros.
    """

    kind: str
    T: int
    start: int
    weights: np.ndarray
    tau: int | None = None
    prev: int | None = None
    next: int | None = None
    h: int | None = None
    norm_sq: float = field(init=False)

    def __post_init__(self):
        w = np.array(self.weights, dtype=float)
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        nsq = float(np.dot(w, w))
        if not nsq > 0:
            raise ValueError("contrast must have positive norm")
        object.__setattr__(self, "norm_sq", nsq)

    @property
    def stop(self) -> int:
        return self.start + self.weights.size

    @property
    def support(self) -> tuple[int, int]:
        """1-based inclusive index range covered by the stored weights."""
        return self.start + 1, self.stop

    def dense(self) -> np.ndarray:
        v = np.zeros(self.T)
        v[self.start:self.stop] = self.weights
        return v

    def dot(self, y) -> float:
        values = y.values if isinstance(y, TimeSeries) else np.asarray(y, dtype=float)
        if values.size != self.T:
            raise ValueError(f"contrast built for T={self.T}, data has T={values.size}")
        return float(np.dot(self.weights, values[self.start:self.stop]))


def _block(T: int, prev: int, at: int, nxt: int, left: float, right: float) -> np.ndarray:
    w = np.empty(nxt - prev)
    w[: at - prev] = left
    w[at - prev:] = right
    return w


def make_spanning_contrast(fit: "ChangepointFit", j: int, T: int) -> Contrast:
    """Contrast comparing the segment means on either side of the j-th changepoint.

    The neighbours are the (j-1)-th and (j+1)-th estimated changepoints, with
    0 and T standing in past either end.
    """
    locs = fit.locations
    if not 1 <= j <= len(locs):
        raise IndexError(f"j={j} out of range for {len(locs)} changepoints")
    at = locs[j - 1]
    prev = locs[j - 2] if j >= 2 else 0
    nxt = locs[j] if j < len(locs) else T
    if not 0 <= prev < at < nxt <= T:
        raise ValueError(f"inconsistent changepoints {prev} < {at} < {nxt} for T={T}")
    w = _block(T, prev, at, nxt, 1.0 / (at - prev), -1.0 / (nxt - at))
    return Contrast("spanning", T, prev, w, tau=at, prev=prev, next=nxt)


def make_window_contrast(tau: int, h: int, T: int) -> Contrast:
    """Contrast comparing the h points before ``tau`` with the h points after."""
    if h < 1:
        raise ValueError(f"window size must be >= 1, got {h}")
    if tau - h < 0 or tau + h > T:
        raise ValueError(f"window [{tau - h + 1}, {tau + h}] exits the data range 1..{T}")
    w = _block(T, tau - h, tau, tau + h, 1.0 / h, -1.0 / h)
    return Contrast("window", T, tau - h, w, tau=tau, h=h)


def make_raw_contrast(weights: Mapping[int, float] | Sequence[float], T: int | None = None) -> Contrast:
    """Arbitrary weights, keyed by 1-based index.

    Only used to reproduce the hand-worked cost-set example, whose
    perturbation shifts points by +-phi directly (see ``perturbation_path``).
    Not produced anywhere in the detection -> inference pipeline.
    """
    if isinstance(weights, Mapping):
        if T is None:
            raise ValueError("T is required when weights are given as a mapping")
        dense = np.zeros(T)
        for i, w in weights.items():
            dense[i - 1] = w
    else:
        dense = np.asarray(weights, dtype=float)
        T = dense.size if T is None else T
        if dense.size != T:
            raise ValueError("weight vector length does not match T")
    nz = np.flatnonzero(dense)
    if nz.size == 0:
        raise ValueError("contrast must have positive norm")
    lo, hi = int(nz[0]), int(nz[-1]) + 1
    return Contrast("raw", T, lo, dense[lo:hi])


@dataclass(frozen=True, eq=False)
class PerturbationPath:
    """The affine family y'(phi) = y + offset + slope * phi.

    ``slope`` and ``offset`` are stored over the contrast's block starting at
    0-based position ``start``; both vanish elsewhere.
    """

    base: np.ndarray
    slope: np.ndarray
    offset: np.ndarray
    start: int

    @property
    def stop(self) -> int:
        return self.start + self.slope.size

    @property
    def T(self) -> int:
        return self.base.size

    @property
    def support(self) -> tuple[int, int]:
        return self.start + 1, self.stop

    def at(self, phi: float) -> np.ndarray:
        out = np.array(self.base, dtype=float)
        # (slope*phi + offset) cancels exactly at phi = nu'y, so y comes back bitwise
        out[self.start:self.stop] += self.slope * phi + self.offset
        return out

    def dense_slope(self) -> np.ndarray:
        v = np.zeros(self.T)
        v[self.start:self.stop] = self.slope
        return v

    def dense_intercept(self) -> np.ndarray:
        """y'(0), the intercept of the path."""
        v = np.array(self.base, dtype=float)
        v[self.start:self.stop] += self.offset
        return v

    def point(self, t: int) -> tuple[float, float, float]:
        """(y_t, offset_t, slope_t) for a 1-based timepoint."""
        i = t - 1
        if self.start <= i < self.stop:
            k = i - self.start
            return float(self.base[i]), float(self.offset[k]), float(self.slope[k])
        return float(self.base[i]), 0.0, 0.0


def perturbation_path(y, nu: Contrast) -> PerturbationPath:
    """Data perturbed along nu so that nu' y'(phi) = phi.

    For the raw fixture contrast the weights are used as slopes directly with
    zero offset, i.e. y'_t(phi) = y_t + w_t * phi.
    """
    y = _as_series(y)
    if nu.T != y.T:
        raise ValueError(f"contrast built for T={nu.T}, data has T={y.T}")
    if nu.kind == "raw":
        slope = np.array(nu.weights)
        offset = np.zeros_like(slope)
    else:
        slope = nu.weights / nu.norm_sq
        offset = -slope * nu.dot(y)
    return PerturbationPath(y.values, slope, offset, nu.start)


@dataclass(frozen=True, eq=False)
class ChangepointFit:
    """Output of a detector.

    ``orders[i]`` is the (1-based) step at which ``locations[i]`` entered and
    ``signs[i]`` the sign of its CUSUM at that step; both are empty for
    l0 segmentation.  ``cache`` holds detector byproducts that inference can
    reuse (e.g. the l0 cost columns) and takes no part in comparisons.
    """

    locations: tuple[int, ...]
    means: tuple[float, ...]
    objective: float
    orders: tuple[int, ...] = ()
    signs: tuple[int, ...] = ()
    cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        locs = tuple(int(t) for t in self.locations)
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("changepoint locations must be strictly increasing")
        object.__setattr__(self, "locations", locs)
        if self.orders and len(self.orders) != len(locs):
            raise ValueError("orders must align with locations")
        if self.signs and len(self.signs) != len(locs):
            raise ValueError("signs must align with locations")
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        object.__setattr__(self, "signs", tuple(int(d) for d in self.signs))
        object.__setattr__(self, "means", tuple(float(m) for m in self.means))

    def __eq__(self, other):
        if not isinstance(other, ChangepointFit):
            return NotImplemented
        return (self.locations, self.orders, self.signs) == (other.locations, other.orders, other.signs)

    def __hash__(self):
        return hash((self.locations, self.orders, self.signs))

    @property
    def K(self) -> int:
        return len(self.locations)

    @property
    def entry_sequence(self) -> tuple[tuple[int, int], ...]:
        """(location, sign) pairs in the order the changepoints entered."""
        if not self.orders:
            raise ValueError("fit carries no entry order")
        pairs = sorted(zip(self.orders, self.locations, self.signs))
        return tuple((t, d) for _, t, d in pairs)

    def order_of(self, tau: int) -> int | None:
        """Entry step of ``tau``, or None if it was not estimated."""
        try:
            i = self.locations.index(tau)
        except ValueError:
            return None
        return self.orders[i] if self.orders else None


def segment_means(values: np.ndarray, locations: Sequence[int]) -> tuple[float, ...]:
    bounds = [0, *locations, values.size]
    return tuple(float(values[a:b].mean()) for a, b in zip(bounds, bounds[1:]))


def segment_rss(values: np.ndarray, locations: Sequence[int]) -> float:
    bounds = [0, *locations, values.size]
    rss = 0.0
    for a, b in zip(bounds, bounds[1:]):
        seg = values[a:b]
        rss += float(np.sum((seg - seg.mean()) ** 2))
    return rss


def _merge_tol(x: float) -> float:
    return 1e-10 * max(1.0, abs(x)) if math.isfinite(x) else 0.0


@dataclass(frozen=True)
class IntervalUnion:
    """Sorted union of disjoint closed intervals; ends may be infinite.

    Construct through :meth:`of`, which sorts, merges touching or
    overlapping intervals and drops zero-length ones.
    """

    intervals: tuple[tuple[float, float], ...] = ()
    truncated: bool = False

    @classmethod
    def of(cls, intervals: Iterable[tuple[float, float]], truncated: bool = False) -> "IntervalUnion":
        items = sorted((float(lo), float(hi)) for lo, hi in intervals if lo <= hi)
        merged: list[list[float]] = []
        for lo, hi in items:
            if merged and lo <= merged[-1][1] + _merge_tol(merged[-1][1]):
                merged[-1][1] = max(merged[-1][1], hi)
            else:
                merged.append([lo, hi])
        out = tuple(
            (lo, hi) for lo, hi in merged if hi - lo > _merge_tol(lo) or math.isinf(hi - lo)
        )
        return cls(out, truncated)

    @classmethod
    def real_line(cls) -> "IntervalUnion":
        return cls(((-math.inf, math.inf),))

    @classmethod
    def empty(cls) -> "IntervalUnion":
        return cls(())

    def __iter__(self):
        return iter(self.intervals)

    def __len__(self):
        return len(self.intervals)

    def __bool__(self):
        return bool(self.intervals)

    def __contains__(self, x: float) -> bool:
        return any(lo <= x <= hi for lo, hi in self.intervals)

    def contains(self, x) -> np.ndarray | bool:
        """Vectorised membership."""
        if np.ndim(x) == 0:
            return float(x) in self
        x = np.asarray(x, dtype=float)
        out = np.zeros(x.shape, dtype=bool)
        for lo, hi in self.intervals:
            out |= (x >= lo) & (x <= hi)
        return out

    @property
    def endpoints(self) -> list[float]:
        return [e for iv in self.intervals for e in iv if math.isfinite(e)]

    def distance_to_endpoint(self, x) -> np.ndarray:
        ends = np.asarray(self.endpoints)
        x = np.asarray(x, dtype=float)
        if ends.size == 0:
            return np.full(x.shape, np.inf)
        return np.min(np.abs(x[..., None] - ends), axis=-1)

    def union(self, other: "IntervalUnion") -> "IntervalUnion":
        return IntervalUnion.of(
            [*self.intervals, *other.intervals], self.truncated or other.truncated
        )

    def intersect(self, other: "IntervalUnion") -> "IntervalUnion":
        out = []
        i = j = 0
        a, b = self.intervals, other.intervals
        while i < len(a) and j < len(b):
            lo = max(a[i][0], b[j][0])
            hi = min(a[i][1], b[j][1])
            if lo <= hi:
                out.append((lo, hi))
            if a[i][1] < b[j][1]:
                i += 1
            else:
                j += 1
        return IntervalUnion.of(out, self.truncated or other.truncated)

    def abs_at_least(self, c: float) -> "IntervalUnion":
        """Intersection with {phi : |phi| >= c}."""
        c = abs(float(c))
        if c == 0:
            return self
        return self.intersect(IntervalUnion(((-math.inf, -c), (c, math.inf))))

    def truncate(self, M: float) -> "IntervalUnion":
        """Keep S on [-M, M] and replace everything beyond by the two full tails."""
        if not M > 0:
            raise ValueError("truncation point must be positive")
        if math.isinf(M):
            return self
        core = self.intersect(IntervalUnion(((-M, M),)))
        return IntervalUnion.of([*core.intervals, (-math.inf, -M), (M, math.inf)], truncated=True)

    def scaled(self, k: float) -> "IntervalUnion":
        if not k > 0:
            raise ValueError("scale factor must be positive")
        return IntervalUnion(tuple((lo * k, hi * k) for lo, hi in self.intervals), self.truncated)

    def to_json(self) -> list[list]:
        def enc(x):
            if math.isinf(x):
                return "inf" if x > 0 else "-inf"
            return x

        return [[enc(lo), enc(hi)] for lo, hi in self.intervals]
