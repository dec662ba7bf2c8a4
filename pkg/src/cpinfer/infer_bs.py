"""Conditioning sets in phi for binary segmentation.

The data that reproduce a given sequence of binary-segmentation decisions
(which split, in which order, with which sign) form a polyhedron.  Along the
perturbation path each such polyhedron cuts out an interval of phi, so the
conditioning set is a union of these "regime" intervals.  We find them by
walking outwards from the observed value of phi: step just past the current
boundary, rerun the detector there, and compute that regime's interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np

from .binseg import _Step, binseg, binseg_steps, cusum_scan
from .core import (
    ChangepointFit,
    Contrast,
    DegenerateBoundaryError,
    IntervalUnion,
    PerturbationPath,
    _as_series,
    perturbation_path,
)

__all__ = [
    "SelectionPolyhedron",
    "PhiInterval",
    "Regime",
    "bs_polyhedron",
    "bs_phi_interval",
    "bs_regimes",
    "bs_S",
    "resolve_trunc",
]

MODES = ("full", "fixed", "step_sign")
MAX_HALVINGS = 40
# regime ends further out than this many sd (or |nu'y|) are taken as infinite:
# the Gaussian mass out there is exactly 0 in double precision, and a step of
# eta no longer moves phi
HORIZON = 1e10


class PhiInterval(NamedTuple):
    lo: float
    hi: float

    @property
    def empty(self) -> bool:
        return self.lo > self.hi


EMPTY = PhiInterval(math.inf, -math.inf)


def steps_from_fit(fit: ChangepointFit, T: int) -> list[_Step]:
    """Rebuild the split sequence (segment, location, sign) from a fit's entry order."""
    if not fit.orders or not fit.signs:
        raise ValueError("fit carries no orders/signs; was it produced by binseg?")
    segments = [(1, T)]
    steps = []
    for tau, d in fit.entry_sequence:
        for i, (s, e) in enumerate(segments):
            if s <= tau < e:
                break
        else:
            raise ValueError(f"location {tau} does not split any current segment")
        steps.append(_Step(s, tau, e, d, math.nan))
        segments[i:i + 1] = [(s, tau), (tau + 1, e)]
    return steps


def _live_segments(steps: Sequence[_Step], T: int):
    """Yield the list of segments present before each step."""
    segments = [(1, T)]
    for st in steps:
        yield list(segments)
        i = segments.index((st.s, st.e))
        segments[i:i + 1] = [(st.s, st.tau), (st.tau + 1, st.e)]


def _cusum_vector(T: int, s: int, tau: int, e: int) -> np.ndarray:
    n_l, n_r = tau - s + 1, e - tau
    w = math.sqrt(n_l * n_r / (n_l + n_r))
    g = np.zeros(T)
    g[s - 1:tau] = -w / n_l
    g[tau:e] = w / n_r
    return g


@dataclass(frozen=True, eq=False)
class SelectionPolyhedron:
    """Data y reproducing ``steps`` under binary segmentation: {y : Gamma y <= 0}.

    Rows are kept implicit (one CUSUM comparison per candidate per step);
    :attr:`gamma` materialises them densely, which is only sensible for
    small T.
    """

    steps: tuple
    T: int

    @property
    def k(self) -> int:
        return len(self.steps)

    @property
    def gamma(self) -> np.ndarray:
        rows = []
        for st, segs in zip(self.steps, _live_segments(self.steps, self.T)):
            chosen = st.sign * _cusum_vector(self.T, st.s, st.tau, st.e)
            rows.append(-chosen)
            for s, e in segs:
                for tau in range(s, e):
                    if (s, tau, e) == (st.s, st.tau, st.e):
                        continue
                    g = _cusum_vector(self.T, s, tau, e)
                    rows.append(g - chosen)
                    rows.append(-g - chosen)
        return np.array(rows)

    def contains(self, z, tol: float = 1e-10) -> bool:
        z = np.asarray(z, dtype=float)
        return bool(np.all(self.gamma @ z <= tol * max(1.0, float(np.max(np.abs(z))))))


def bs_polyhedron(fit: ChangepointFit, k: int, T: int) -> SelectionPolyhedron:
    """Selection polyhedron of a k-step binary segmentation fit."""
    if len(fit.locations) != k:
        raise ValueError(f"fit has {len(fit.locations)} changepoints, expected k={k}")
    return SelectionPolyhedron(tuple(steps_from_fit(fit, T)), T)


class _PathCusums:
    """Perturbed CUSUMs c0 + c1 * phi for every split of a segment, memoised."""

    def __init__(self, path: PerturbationPath):
        self.path = path
        self.pa = np.concatenate(([0.0], np.cumsum(path.dense_intercept())))
        self.pb = np.concatenate(([0.0], np.cumsum(path.dense_slope())))
        self._memo: dict = {}

    def __call__(self, s: int, e: int):
        key = (s, e)
        got = self._memo.get(key)
        if got is None:
            got = (cusum_scan(self.pa, s, e), cusum_scan(self.pb, s, e))
            self._memo[key] = got
        return got

    def interval(self, steps: Sequence[_Step]) -> PhiInterval:
        lo, hi = -math.inf, math.inf
        T = self.path.T
        for st, segs in zip(steps, _live_segments(steps, T)):
            c0s, c1s = zip(*(self(s, e) for s, e in segs if e > s))
            c0 = np.concatenate(c0s)
            c1 = np.concatenate(c1s)
            g0c, g1c = self(st.s, st.e)
            g0 = st.sign * g0c[st.tau - st.s]
            g1 = st.sign * g1c[st.tau - st.s]
            # d*g(phi) >= |c(phi)|, unrolled into two rows per candidate
            alpha = np.concatenate((g0 - c0, g0 + c0))
            beta = np.concatenate((g1 - c1, g1 + c1))
            scale_b = 1e-13 * (abs(g1) + np.abs(np.concatenate((c1, c1))))
            scale_a = 1e-10 * (abs(g0) + np.abs(np.concatenate((c0, c0))))
            flat = np.abs(beta) <= scale_b
            if np.any(alpha[flat] < -scale_a[flat]):
                return EMPTY
            up = beta < 0
            dn = beta > 0
            up &= ~flat
            dn &= ~flat
            if up.any():
                hi = min(hi, float(np.min(-alpha[up] / beta[up])))
            if dn.any():
                lo = max(lo, float(np.max(-alpha[dn] / beta[dn])))
            if lo > hi:
                return EMPTY
        return PhiInterval(lo, hi)


def bs_phi_interval(path: PerturbationPath, poly: SelectionPolyhedron) -> PhiInterval:
    """Values of phi for which y'(phi) lies in the polyhedron.

    Returns
    -------
    PhiInterval
        ``(lo, hi)``, possibly unbounded; ``.empty`` is True when no phi works.
    """
    if path.T != poly.T:
        raise ValueError("path and polyhedron disagree on T")
    return _PathCusums(path).interval(poly.steps)


class Regime(NamedTuple):
    lo: float
    hi: float
    locations: tuple
    member: bool


def resolve_trunc(trunc, nu_dot_y: float, sd: float | None) -> float:
    """Turn a truncation request into a cut-off M (inf for none)."""
    if trunc is None or (isinstance(trunc, str) and trunc in ("none", "inf")):
        return math.inf
    if isinstance(trunc, str):
        if trunc != "auto":
            raise ValueError(f"unknown truncation policy {trunc!r}")
        return math.inf if sd is None else max(10.0 * sd, abs(nu_dot_y))
    M = float(trunc)
    if math.isinf(M):
        return math.inf
    if not M >= abs(nu_dot_y):
        raise ValueError(f"truncation point {M} is below |nu'y| = {abs(nu_dot_y)}")
    return M


class _Walker:
    def __init__(self, path, k, tau, mode, shortcut, sd):
        self.path = path
        self.k = k
        self.tau = tau
        self.mode = mode
        self.shortcut = shortcut and mode == "fixed"
        self.cus = _PathCusums(path)
        self.scale = max(1.0, sd)
        self.ref_locs = None

    def regime_at(self, phi: float, steps=None) -> Regime:
        if steps is None:
            steps = binseg_steps(self.path.at(phi), self.k)
        locs = tuple(sorted(st.tau for st in steps))
        if self.mode == "full":
            member = locs == self.ref_locs
            use = steps
        else:
            member = self.tau in locs
            use = steps
            if member and self.shortcut:
                order = next(i for i, st in enumerate(steps) if st.tau == self.tau) + 1
                use = steps[:order]
        iv = self.cus.interval(use)
        return Regime(iv.lo, iv.hi, locs, member)

    def step(self, x: float, direction: int) -> Regime:
        eta = 1e-6 * self.scale
        tol = 1e-9 * max(self.scale, abs(x))
        for _ in range(MAX_HALVINGS + 1):
            r = self.regime_at(x + direction * eta)
            if direction > 0 and r.lo <= x + tol and r.hi > x:
                return r
            if direction < 0 and r.hi >= x - tol and r.lo < x:
                return r
            eta *= 0.5
        raise DegenerateBoundaryError(x)


def bs_regimes(y, k: int, j: int, nu: Contrast, mode: str = "full", trunc="auto",
               shortcut: bool = True, fit: ChangepointFit | None = None):
    """Regimes visited by the walk, left to right, plus the cut-off M used."""
    ts = _as_series(y)
    if mode not in MODES:
        raise ValueError(f"mode must be one of {MODES}, got {mode!r}")
    fit = binseg(ts, k) if fit is None else fit
    if not 1 <= j <= fit.K:
        raise IndexError(f"j={j} out of range for {fit.K} changepoints")
    tau = fit.locations[j - 1]
    if nu.tau is not None and nu.tau != tau:
        raise ValueError(f"contrast is centred at {nu.tau}, but changepoint {j} is at {tau}")
    path = perturbation_path(ts, nu)
    c = nu.dot(ts)
    sd = ts.sigma * math.sqrt(nu.norm_sq) if ts.sigma is not None else None
    M = resolve_trunc(trunc, c, sd)

    w = _Walker(path, k, tau, mode, shortcut, sd if sd is not None else math.sqrt(nu.norm_sq))
    w.ref_locs = fit.locations
    steps = steps_from_fit(fit, ts.T)
    obs = w.regime_at(c, steps) if mode != "step_sign" else None
    if mode == "step_sign":
        iv = w.cus.interval(steps)
        return [Regime(iv.lo, iv.hi, fit.locations, True)], M
    if obs.lo > c + 1e-9 * max(1.0, abs(c)) or obs.hi < c - 1e-9 * max(1.0, abs(c)):
        raise DegenerateBoundaryError(c)

    H = HORIZON * max(w.scale, abs(c))

    def clip(r: Regime) -> Regime:
        return r._replace(lo=-math.inf if r.lo < -H else r.lo, hi=math.inf if r.hi > H else r.hi)

    obs = clip(obs)
    right, left = [], []
    x = obs.hi
    while x < M:
        r = clip(w.step(x, +1))
        right.append(r)
        x = r.hi
    x = obs.lo
    while x > -M:
        r = clip(w.step(x, -1))
        left.append(r)
        x = r.lo
    return left[::-1] + [obs] + right, M


def bs_S(y, k: int, j: int, nu: Contrast, mode: str = "full", trunc="auto",
         shortcut: bool = True, fit: ChangepointFit | None = None) -> IntervalUnion:
    """Conditioning set for the j-th binary-segmentation changepoint.

    Parameters
    ----------
    y : TimeSeries
        Observed data.  ``y.sigma`` sets the default truncation.
    k : int
        Number of binary segmentation steps.
    j : int
        Which estimated changepoint (1-based, in location order) to test.
    nu : Contrast
        Spanning or window contrast around that changepoint.
    mode : {'full', 'fixed', 'step_sign'}
        ``'full'`` keeps phi whose rerun returns the same location set;
        ``'fixed'`` keeps phi whose rerun contains the tested location;
        ``'step_sign'`` is the single observed regime (same locations,
        order and signs).
    trunc : 'auto', float, None or inf
        Stop walking at +-M and take both tails beyond M wholesale.
        ``'auto'`` uses ``max(10 sigma ||nu||, |nu'y|)`` when sigma is known.
    shortcut : bool
        In fixed mode, describe a regime using only the steps up to the one
        that selected the tested location.  Gives the same set with fewer,
        wider regimes.

    Raises
    ------
    DegenerateBoundaryError
        A regime boundary could not be crossed after 40 halvings of the step.
    """
    regimes, M = bs_regimes(y, k, j, nu, mode, trunc, shortcut, fit)
    S = IntervalUnion.of((r.lo, r.hi) for r in regimes if r.member)
    if mode != "step_sign" and math.isfinite(M):
        S = S.truncate(M)
    return S
