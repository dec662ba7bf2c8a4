import math
from dataclasses import replace

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpinfer import harness
from cpinfer.core import IntervalUnion, TimeSeries
from cpinfer.harness import SimConfig, gen_data, power_and_detection, rng_for, run_approach, simulate
from cpinfer.pvalue import TestResult

Y4 = TimeSeries([0.0, 0.0, 1.0, 1.0], 1.0)


def _res(tau, p):
    return TestResult(tau, 1, 0.0, 1.0, 1.0, IntervalUnion.real_line(), p, "naive", "none")


class TestConfig:
    @pytest.mark.parametrize("kw", [dict(K=10, T=10), dict(delta=-1.0), dict(reps=0), dict(approach=9)])
    def test_invalid(self, kw):
        base = dict(T=20, K=2, delta=1.0)
        with pytest.raises(ValueError):
            SimConfig(**{**base, **kw})


class TestGenData:
    def test_null_mean(self):
        y, truth = gen_data(SimConfig(T=50, K=5, delta=0.0, seed=1), 0)
        assert np.all(truth.means == 0.0) and len(truth.locations) == 5

    def test_deterministic_and_order_free(self):
        cfg = SimConfig(T=100, K=4, delta=2.0, seed=99)
        a, _ = gen_data(cfg, 7)
        for rep in range(7):
            gen_data(cfg, rep)
        b, _ = gen_data(cfg, 7)
        assert np.array_equal(a.values, b.values)
        c, _ = gen_data(cfg, 8)
        assert not np.array_equal(a.values, c.values)

    def test_fifty_changes(self):
        y, truth = gen_data(SimConfig(T=2000, K=50, delta=1.5, seed=3), 0)
        locs = truth.locations
        assert len(locs) == 50 and len(set(locs)) == 50 and 1 <= min(locs) and max(locs) <= 1999
        bounds = [0, *locs, 2000]
        for i, (a, b) in enumerate(zip(bounds, bounds[1:])):
            assert np.all(truth.means[a:b] == (1.5 if i % 2 else 0.0))

    def test_streams_independent(self):
        a = rng_for(1, 0, 0).standard_normal(5)
        b = rng_for(1, 0, 1).standard_normal(5)
        assert not np.allclose(a, b)


class TestApproaches:
    def test_approach_1(self):
        (r,) = run_approach(SimConfig(T=4, K=1, delta=1.0, approach=1, k=1), Y4)
        assert r.S.endpoints[-1] == pytest.approx(0.0, abs=1e-15)
        from scipy.stats import norm
        assert r.p == pytest.approx(norm.cdf(-1) / norm.cdf(0), rel=1e-12)

    def test_approach_5(self):
        (r,) = run_approach(SimConfig(T=4, K=1, delta=1.0, approach=5, k=1), Y4)
        assert r.p == pytest.approx(math.erfc(1 / math.sqrt(2)), rel=1e-12)
        assert r.method == "naive"

    def test_sample_splitting_indices(self):
        rng = np.random.default_rng(0)
        v = np.r_[np.zeros(30), np.full(31, 4.0)] + 0.1 * rng.standard_normal(61)
        y = TimeSeries(v, 1.0)
        cfg = SimConfig(T=61, K=1, delta=4.0, approach=7, k=1)
        det = harness.detect(y, cfg)
        assert det.series.T == math.ceil(61 / 2)
        (r,) = run_approach(cfg, y)
        i = det.fit.locations[0]
        assert r.tau == 2 * i - 1
        assert abs(r.tau - 30) <= 2

    def test_splitting_skips_edge(self):
        # odd subseries of length 3 can split at 2; the even subseries has only 2 points
        y = TimeSeries([0.0, 0.0, 0.0, 0.0, 5.0], 1.0)
        cfg = SimConfig(T=5, K=1, delta=5.0, approach=7, k=1)
        det = harness.detect(y, cfg)
        assert det.fit.locations == (2,)
        assert run_approach(cfg, y) == []

    def test_l0_window_approach(self):
        y, _ = gen_data(SimConfig(T=120, K=2, delta=3.0, seed=5), 0)
        res = run_approach(SimConfig(T=120, K=2, delta=3.0, approach=4, h=10), y)
        assert res and all(0 <= r.p <= 1 and r.S.contains(r.nu_dot_y) for r in res)

    def test_step_sign_inside_full(self):
        for rep in range(10):
            cfg = SimConfig(T=60, K=3, delta=2.0, seed=11, k=3)
            y, _ = gen_data(cfg, rep)
            r1 = run_approach(replace(cfg, approach=1, trunc=None), y)
            r2 = run_approach(replace(cfg, approach=2, trunc=None), y)
            for a, b in zip(r1, r2):
                assert a.tau == b.tau
                for lo, hi in a.S:
                    mid = lo if math.isinf(hi) else (hi if math.isinf(lo) else 0.5 * (lo + hi))
                    assert b.S.contains(mid) and b.S.contains(a.nu_dot_y)
                assert a.S.intersect(b.S) == a.S


class TestMetrics:
    def test_examples(self):
        assert power_and_detection([_res(11, 0.01)], [10], 0.05, 2)[:2] == (1.0, 1.0)
        assert power_and_detection([_res(11, 0.2)], [10], 0.05, 2)[:2] == (0.0, 1.0)
        assert power_and_detection([_res(15, 0.01), _res(25, 0.01)], [14, 40], 0.05, 2).detection == 0.5

    def test_no_estimates(self):
        assert power_and_detection([], [3, 9]).power == 0.0

    def test_tie_goes_to_earlier_estimate(self):
        row = power_and_detection([_res(8, 0.5), _res(12, 0.01)], [10], 0.05, 2)
        assert row.detection == 1.0 and row.power == 0.0

    @given(st.lists(st.tuples(st.integers(1, 99), st.floats(0, 1)), max_size=8),
           st.lists(st.integers(1, 99), min_size=1, max_size=8, unique=True), st.integers(0, 4))
    def test_power_below_detection(self, est, truth, m):
        est = {t: p for t, p in est}
        row = power_and_detection([_res(t, p) for t, p in est.items()], truth, 0.05, m)
        assert row.power <= row.detection + 1e-12


class TestSimulate:
    @settings(max_examples=5, deadline=None)
    @given(st.integers(1, 8))
    def test_byte_identical(self, approach):
        cfg = SimConfig(T=60, K=2, delta=2.0, reps=2, seed=4, approach=approach, h=5)
        assert simulate(cfg) == simulate(cfg)

    def test_csv_layout(self, tmp_path):
        out = tmp_path / "s.csv"
        text = simulate(SimConfig(T=50, K=2, delta=3.0, reps=2, seed=1, approach=3, h=5), out)
        assert out.read_text() == text
        head, summary = text.split("\n\n")
        assert head.splitlines()[0] == "rep,approach,delta,tau_hat,p,nearest_truth,dist"
        assert summary.splitlines()[0] == "delta,approach,power,detection"
        power, det = map(float, summary.splitlines()[1].split(",")[2:])
        assert power <= det


def test_timing_single_point():
    rows = harness.timing_sweep("window_h", [10], runs=1, T=200)
    assert len(rows) == 1 and rows[0]["param"] == 10 and rows[0]["seconds"] > 0
