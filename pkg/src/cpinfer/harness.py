"""Simulation experiments: data generation, the eight testing approaches, metrics, timing.

Approaches
----------
1. binary segmentation, spanning contrast, condition on the observed regime
   (locations, orders and signs)
2. binary segmentation, spanning contrast, condition on the location set
3. binary segmentation, window contrast, condition on the tested location
4. l0 segmentation, window contrast, condition on the tested location
5. binary segmentation, spanning contrast, plain z-test
6. l0 segmentation, spanning contrast, plain z-test
7. binary segmentation on odd timepoints, z-test on even timepoints
8. l0 segmentation on odd timepoints, z-test on even timepoints
"""

from __future__ import annotations

import csv
import io
import math
import time
from dataclasses import dataclass, replace
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .binseg import binseg
from .core import ChangepointFit, IntervalUnion, TimeSeries, make_spanning_contrast, make_window_contrast
from .infer_bs import bs_S
from .infer_l0 import l0_S
from .l0 import l0_lambda_for_k, l0_segment, reverse_trace
from .pvalue import TestResult, estimate_sigma, naive_p, selective_p

__all__ = [
    "SimConfig",
    "Truth",
    "MetricsRow",
    "rng_for",
    "gen_data",
    "detect",
    "test_changepoint",
    "run_approach",
    "power_and_detection",
    "simulate",
    "timing_sweep",
]

APPROACHES = range(1, 9)
_BS = {1, 2, 3, 5, 7}


@dataclass(frozen=True)
class SimConfig:
    """One simulation setting.

    ``k`` is the number of binary-segmentation steps (defaults to K).  For
    l0 approaches ``lam`` fixes the penalty; otherwise it is tuned per
    replicate so that l0 finds ``k_target`` changepoints (defaults to k).
    """

    T: int
    K: int
    delta: float
    sigma: float = 1.0
    reps: int = 1
    seed: int = 0
    approach: int = 2
    k: int | None = None
    lam: float | None = None
    k_target: int | None = None
    h: int = 50
    alpha: float = 0.05
    m: int = 2
    trunc: object = "auto"
    estimate_sigma: bool = False

    def __post_init__(self):
        if not 0 <= self.K <= self.T - 1:
            raise ValueError(f"K must lie in [0, T-1], got K={self.K}, T={self.T}")
        if self.delta < 0:
            raise ValueError("delta must be non-negative")
        if self.reps < 1:
            raise ValueError("reps must be at least 1")
        if self.approach not in APPROACHES:
            raise ValueError(f"approach must be 1..8, got {self.approach}")

    @property
    def steps(self) -> int:
        return self.k if self.k is not None else max(self.K, 1)


class Truth(NamedTuple):
    locations: tuple
    means: np.ndarray


def rng_for(seed: int, rep: int, stream: int = 0) -> np.random.Generator:
    """Counter-based generator keyed by (seed, rep, stream); independent of call order."""
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(rep), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def gen_data(cfg: SimConfig, rep: int) -> tuple[TimeSeries, Truth]:
    """Piecewise-constant mean alternating 0, delta, 0, ... plus Gaussian noise."""
    T, K = cfg.T, cfg.K
    locs = np.sort(rng_for(cfg.seed, rep, 0).choice(np.arange(1, T), size=K, replace=False))
    mu = np.zeros(T)
    bounds = [0, *locs.tolist(), T]
    for i, (a, b) in enumerate(zip(bounds, bounds[1:])):
        mu[a:b] = cfg.delta if i % 2 else 0.0
    y = mu + cfg.sigma * rng_for(cfg.seed, rep, 1).standard_normal(T)
    sigma = None if cfg.estimate_sigma else cfg.sigma
    return TimeSeries(y, sigma), Truth(tuple(int(t) for t in locs), mu)


def _with_sigma(y: TimeSeries) -> TimeSeries:
    if y.sigma is not None:
        return y
    s = estimate_sigma(y)
    if not s > 0:
        raise ValueError("estimated sigma is zero; cannot run inference")
    return y.with_sigma(s)


class Detection(NamedTuple):
    fit: ChangepointFit
    lam: float | None
    series: TimeSeries  # the data detection ran on (odd subseries for 7/8)


def detect(y: TimeSeries, cfg: SimConfig) -> Detection:
    """Run the approach's detector.  Approaches 7-8 detect on odd timepoints."""
    a = cfg.approach
    data = TimeSeries(y.values[0::2], y.sigma) if a in (7, 8) else y
    k = min(cfg.steps, data.T - 1)
    if a in _BS:
        return Detection(binseg(data, k), None, data)
    if cfg.lam is not None:
        return Detection(l0_segment(data, cfg.lam), cfg.lam, data)
    kt = cfg.k_target if cfg.k_target is not None else k
    found = l0_lambda_for_k(data, min(kt, data.T - 1))
    return Detection(found.fit, found.lam, data)


def test_changepoint(y: TimeSeries, det: Detection, j: int, cfg: SimConfig) -> TestResult | None:
    """Test the j-th estimated changepoint; None when it cannot be tested (sample splitting edge)."""
    a = cfg.approach
    y = _with_sigma(y)
    fit = det.fit
    tau = fit.locations[j - 1]
    T = y.T
    if a in (7, 8):
        even = y.values[1::2]
        kept = [t for t in fit.locations if t < even.size]
        if tau >= even.size:
            return None
        efit = ChangepointFit(kept, [0.0] * (len(kept) + 1), 0.0)
        nu = make_spanning_contrast(efit, kept.index(tau) + 1, even.size)
        c = nu.dot(even)
        scale = y.sigma * math.sqrt(nu.norm_sq)
        return TestResult(2 * tau - 1, j, c, nu.norm_sq, scale, IntervalUnion.real_line(),
                          naive_p(c, scale), "naive", "none")

    if a in (3, 4):
        h = min(cfg.h, tau, T - tau)
        nu = make_window_contrast(tau, h, T)
    else:
        nu = make_spanning_contrast(fit, j, T)
    c = nu.dot(y)
    scale = y.sigma * math.sqrt(nu.norm_sq)
    if a in (5, 6):
        return TestResult(tau, j, c, nu.norm_sq, scale, IntervalUnion.real_line(), naive_p(c, scale),
                          "naive", "none")
    if a == 4:
        S = l0_S(y, det.lam, j, nu, "window", fit=fit)
        cond = "fixed"
    else:
        mode, cond = {1: ("step_sign", "step_sign"), 2: ("full", "locations"), 3: ("fixed", "fixed")}[a]
        S = bs_S(y, fit.K, j, nu, mode, trunc=cfg.trunc, fit=fit)
    return TestResult(tau, j, c, nu.norm_sq, scale, S, selective_p(S, c, scale), "selective", cond)


def run_approach(cfg: SimConfig, y: TimeSeries, js: Iterable[int] | None = None) -> list[TestResult]:
    """Detect, then test every estimated changepoint (or those in ``js``)."""
    det = detect(y, cfg)
    js = range(1, det.fit.K + 1) if js is None else js
    out = []
    for j in js:
        r = test_changepoint(y, det, j, cfg)
        if r is not None:
            out.append(r)
    return out


class MetricsRow(NamedTuple):
    power: float
    detection: float
    K: int


def _estimated_locations(results: Sequence[TestResult], estimated: Sequence[int] | None):
    if estimated is not None:
        pmap = {r.tau: r.p for r in results}
        return [(t, pmap.get(t)) for t in estimated]
    return [(r.tau, r.p) for r in results]


def power_and_detection(results: Sequence[TestResult], truth: Sequence[int], alpha: float = 0.05,
                        m: int = 2, estimated: Sequence[int] | None = None) -> MetricsRow:
    """Share of true changepoints rejected (power) or merely located (detection) within m.

    Each true changepoint is matched to its nearest estimate (ties to the
    earlier one); it counts towards power if that estimate is within ``m``
    and its p-value is at most ``alpha``.  ``estimated`` lists every
    estimated location, tested or not; it defaults to those in ``results``.
    """
    truth = list(truth)
    if not truth:
        raise ValueError("power is undefined without true changepoints")
    if m < 0:
        raise ValueError("m must be non-negative")
    est = sorted(_estimated_locations(results, estimated))
    if not est:
        return MetricsRow(0.0, 0.0, len(truth))
    taus = np.array([t for t, _ in est])
    hits = rejects = 0
    for t in truth:
        d = np.abs(taus - t)
        i = int(np.argmin(d))
        if d[i] <= m:
            hits += 1
            p = est[i][1]
            if p is not None and p <= alpha:
                rejects += 1
    K = len(truth)
    return MetricsRow(rejects / K, hits / K, K)


def _nearest(t: int, truth: Sequence[int]):
    if not truth:
        return "", ""
    d = [abs(t - s) for s in truth]
    i = int(np.argmin(d))
    return truth[i], d[i]


def simulate(cfg: SimConfig, out=None) -> str:
    """Run ``cfg.reps`` replicates and render the per-test rows plus a summary as CSV text."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["rep", "approach", "delta", "tau_hat", "p", "nearest_truth", "dist"])
    powers, dets = [], []
    for rep in range(cfg.reps):
        y, truth = gen_data(cfg, rep)
        det = detect(y, cfg)
        results = []
        for j in range(1, det.fit.K + 1):
            r = test_changepoint(y, det, j, cfg)
            if r is not None:
                results.append(r)
                nt, dist = _nearest(r.tau, truth.locations)
                w.writerow([rep, cfg.approach, repr(float(cfg.delta)), r.tau, f"{r.p:.17g}", nt, dist])
        if truth.locations:
            est = det.fit.locations if cfg.approach not in (7, 8) else [2 * t - 1 for t in det.fit.locations]
            row = power_and_detection(results, truth.locations, cfg.alpha, cfg.m, est)
            powers.append(row.power)
            dets.append(row.detection)
    buf.write("\n")
    w.writerow(["delta", "approach", "power", "detection"])
    fmt = lambda v: f"{float(np.mean(v)):.17g}" if v else ""  # noqa: E731
    w.writerow([repr(float(cfg.delta)), cfg.approach, fmt(powers), fmt(dets)])
    text = buf.getvalue()
    if out is not None:
        with open(out, "w", newline="") as fh:
            fh.write(text)
    return text


def _median_time(fn, runs: int) -> float:
    ts = []
    for _ in range(runs):
        t0 = time.perf_counter()
        fn()
        ts.append(time.perf_counter() - t0)
    return float(np.median(ts))


def timing_sweep(mode: str, grid: Sequence[int] | None = None, runs: int = 5, seed: int = 0,
                 T: int = 2000, delta: float = 1.0) -> list[dict]:
    """Wall-clock medians of the inference step.

    ``mode='window_h'`` times the window-mode l0 conditioning set on one
    series of length T with a single change halfway, for each window size
    in ``grid``; the detector's dynamic programme is run once beforehand.
    ``mode='approaches'`` times detection plus all tests for Approaches 1-4
    for each series length in ``grid``.
    """
    rows = []
    if mode in ("window_h", "window-h"):
        grid = grid or (25, 50, 100, 200, 400)
        rng = rng_for(seed, 0, 0)
        y = TimeSeries(np.r_[np.zeros(T // 2), np.full(T - T // 2, delta)] + rng.standard_normal(T), 1.0)
        lam = math.log(T)
        fit = l0_segment(y, lam)
        reverse_trace(fit)
        if not fit.locations:
            raise ValueError("no changepoint detected in the timing series")
        j = 1 + int(np.argmin([abs(t - T // 2) for t in fit.locations]))
        tau = fit.locations[j - 1]
        for h in grid:
            nu = make_window_contrast(tau, h, T)
            secs = _median_time(lambda: l0_S(y, lam, j, nu, "window", fit=fit), runs)
            rows.append({"param": h, "seconds": secs})
        return rows
    if mode != "approaches":
        raise ValueError(f"unknown timing mode {mode!r}")
    grid = grid or (500, 1000)
    for n in grid:
        K = 10 * int(math.floor(math.log10(n)))
        base = SimConfig(T=n, K=K, delta=1.5, seed=seed, lam=math.log(n))
        y, _ = gen_data(base, 0)
        k_bs = max(l0_segment(y, math.log(n)).K, 1)
        for a in (1, 2, 3, 4):
            cfg = replace(base, approach=a, k=k_bs)
            secs = _median_time(lambda: run_approach(cfg, y), runs)
            rows.append({"param": n, "approach": a, "seconds": secs})
    return rows


def loglog_slope(rows: Sequence[dict]) -> float:
    x = np.log([r["param"] for r in rows])
    y = np.log([r["seconds"] for r in rows])
    return float(np.polyfit(x, y, 1)[0])


test_changepoint.__test__ = False  # a library function, not a pytest test
