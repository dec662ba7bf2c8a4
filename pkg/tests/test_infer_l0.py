import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from cpinfer.core import (
    PerturbationPath,
    TimeSeries,
    make_raw_contrast,
    make_spanning_contrast,
    make_window_contrast,
    perturbation_path,
)
from cpinfer.infer_l0 import l0_C_const, l0_C_curves, l0_cost_sets, l0_S
from cpinfer.l0 import fpop, l0_segment, restricted_cost
from cpinfer.pwq import pw_min

GOLDEN = Path(__file__).parent / "golden"
Y6 = TimeSeries([1, 1, 1, 2, 2, 2], 1.0)
RAW = make_raw_contrast([0, 1, 1, -1, -1, 0])
PHI = np.linspace(-6, 6, 1201)


def parse_dump(text):
    blocks = []
    for block in text.strip().split("\n\n"):
        blocks.append([[float(x) for x in ln.split()] for ln in block.strip().splitlines()])
    return blocks


def assert_dump_matches(got, want, tol=1e-9):
    g, w = parse_dump(got), parse_dump(want)
    assert len(g) == len(w)
    for bg, bw in zip(g, w):
        assert len(bg) == len(bw)
        for lg, lw in zip(bg, bw):
            for x, y in zip(lg, lw):
                assert x == y or abs(x - y) <= tol * max(1.0, abs(y)), (lg, lw)


def _series(rng, T, jumps=2):
    mu = np.repeat(rng.normal(0, 2, jumps + 1), np.diff(np.linspace(0, T, jumps + 2).astype(int)))
    return TimeSeries(mu + rng.standard_normal(T), 1.0)


class TestWorkedExample:
    def test_forward_golden(self):
        fwd = l0_cost_sets(perturbation_path(Y6, RAW), 0.5, 1, 3, "forward")
        assert_dump_matches(fwd.dump(), (GOLDEN / "c3_forward.txt").read_text())

    def test_reverse_golden(self):
        rev = l0_cost_sets(perturbation_path(Y6, RAW), 0.5, 6, 4, "reverse")
        assert_dump_matches(rev.dump(), (GOLDEN / "c3_reverse.txt").read_text())

    def test_h3(self):
        path = perturbation_path(Y6, RAW)
        h3 = l0_cost_sets(path, 0.5, 1, 2, "forward").min_u() + 0.5
        ref = np.where(np.abs(PHI) > math.sqrt(2), 1.0, PHI ** 2 / 4 + 0.5)
        np.testing.assert_allclose(h3(PHI), ref, atol=1e-12)

    def test_curves(self):
        fit = l0_segment(Y6, 0.5)
        c = l0_C_curves(Y6, 0.5, 1, RAW, fit)
        r = math.sqrt(1.5)
        np.testing.assert_allclose(c.with_tau(PHI), np.where(np.abs(PHI) > r, 1.5, 2 / 3 * PHI ** 2 + 0.5),
                                   atol=1e-12)
        want = [(-1.41421, -1.0), (-1.0, -0.1547), (-0.1547, 1.76619), (1.76619, 1.89681)]
        for (lo, hi), (a, b) in zip(zip(c.without_tau.breaks, c.without_tau.breaks[1:]), want):
            assert lo == pytest.approx(a, abs=1e-5) and hi == pytest.approx(b, abs=1e-5)
        pieces = {
            (-10.0,): (1, -1, 2.25), (-1.2,): (1.5, -1, 1.25), (-0.5,): (1.625, -1.25, 0.875),
            (0.5,): (2, -2, 0.75), (3.0,): (1, -1, 2.25),
        }
        for (x,), (a, b, cc) in pieces.items():
            assert c.without_tau(x) == pytest.approx(a * x * x + b * x + cc, abs=1e-12)
        # the published piece on [1.76619, 1.89681] does not join its neighbours;
        # assert continuity there instead of its printed coefficients
        for x in c.without_tau.breaks:
            assert c.without_tau(x - 1e-9) == pytest.approx(c.without_tau(x + 1e-9), abs=1e-7)

    def test_window_S(self):
        fit = l0_segment(Y6, 0.5)
        for method in ("continue", "pairs"):
            S = list(l0_S(Y6, 0.5, 1, RAW, "window", fit=fit, method=method))
            assert len(S) == 2
            assert S[0][0] == -math.inf and S[0][1] == pytest.approx(0.13763, abs=1e-4)
            assert S[1][0] == pytest.approx(1.29057, abs=1e-4) and S[1][1] == math.inf

    def test_full_mode_spanning(self):
        fit = l0_segment(Y6, 0.5)
        nu = make_spanning_contrast(fit, 1, 6)
        S = list(l0_S(Y6, 0.5, 1, nu, "full", fit=fit))
        r = math.sqrt(2 / 3)
        assert S == [(-math.inf, pytest.approx(-r)), (pytest.approx(r), math.inf)]

    def test_C_const(self):
        fit = l0_segment(Y6, 0.5)
        assert l0_C_const(Y6, fit, 0.5) == pytest.approx(0.5)
        flat = TimeSeries([2.0] * 5)
        assert l0_C_const(flat, l0_segment(flat, 1.0), 1.0) == 0.0


class TestErrors:
    def test_bad_mode_and_j(self):
        fit = l0_segment(Y6, 0.5)
        with pytest.raises(ValueError):
            l0_S(Y6, 0.5, 1, RAW, "sideways", fit=fit)
        with pytest.raises(IndexError):
            l0_S(Y6, 0.5, 2, RAW, fit=fit)

    def test_contrast_at_wrong_location(self):
        fit = l0_segment(Y6, 0.5)
        with pytest.raises(ValueError):
            l0_S(Y6, 0.5, 1, make_window_contrast(2, 2, 6), "window", fit=fit)


class TestProperties:
    def test_flat_path_reduces_to_dp(self, rng):
        # zero slope: the recursion is the 1-D one, so its envelope is the DP column's minimum
        v = rng.standard_normal(12)
        flat = PerturbationPath(v, np.zeros(12), np.zeros(12), 0)
        lam = 0.7
        tr = fpop(v, lam)
        for s in (3, 7, 12):
            cs = l0_cost_sets(flat, lam, 1, s, "forward")
            best = min(c - b * b / (4 * a) for a, b, c in tr.column(s))
            np.testing.assert_allclose(cs.min_u()(PHI), best, rtol=1e-10)

    @given(st.integers(0, 10_000), st.integers(8, 30), st.sampled_from([0.5, 1.0, 3.0]))
    @settings(max_examples=30)
    def test_cardinality_and_observed_consistency(self, seed, T, lam):
        rng = np.random.default_rng(seed)
        y = _series(rng, T)
        fit = l0_segment(y, lam)
        if not fit.locations:
            return
        j = 1 + int(rng.integers(fit.K))
        tau = fit.locations[j - 1]
        nu = make_spanning_contrast(fit, j, T)
        lo, hi = nu.support
        tr = fit.cache["fpop"]
        seed_col = tr.column(lo - 1) if lo > 1 else None
        cs = l0_cost_sets(perturbation_path(y, nu), lam, lo, tau, "forward", seed_col)
        assert len(cs) == tau - (lo - 1) + (1 if seed_col is not None else 0)
        c = nu.dot(y)
        # optimal partial cost of y_{1:tau} = G[tau] - lam, i.e. F[tau]
        assert cs.min_u()(c) == pytest.approx(tr.G[tau] - lam, abs=1e-9 * max(1.0, tr.G[tau]))

    @given(st.integers(0, 10_000), st.integers(8, 24), st.sampled_from([0.5, 2.0]))
    @settings(max_examples=25)
    def test_continue_matches_pairs(self, seed, T, lam):
        rng = np.random.default_rng(seed)
        y = _series(rng, T)
        fit = l0_segment(y, lam)
        if not fit.locations:
            return
        j = 1 + int(rng.integers(fit.K))
        tau = fit.locations[j - 1]
        for nu in (make_spanning_contrast(fit, j, T), make_window_contrast(tau, min(3, tau, T - tau), T)):
            a = l0_C_curves(y, lam, j, nu, fit, "continue").without_tau
            b = l0_C_curves(y, lam, j, nu, fit, "pairs").without_tau
            x = np.linspace(-20, 20, 801)
            np.testing.assert_allclose(a(x), b(x), rtol=1e-9, atol=1e-9)

    @given(st.integers(0, 10_000), st.integers(8, 24), st.sampled_from([0.5, 2.0]))
    @settings(max_examples=25)
    def test_alternative_never_exceeds_restricted_cost(self, seed, T, lam):
        rng = np.random.default_rng(seed)
        y = _series(rng, T)
        fit = l0_segment(y, lam)
        if not fit.locations:
            return
        j = 1 + int(rng.integers(fit.K))
        nu = make_spanning_contrast(fit, j, T)
        c = l0_C_curves(y, lam, j, nu, fit)
        best = pw_min(c.with_tau, c.without_tau)
        C = l0_C_const(y, fit, lam)
        assert np.all(best(np.linspace(-30, 30, 601)) <= C + 1e-9)

    def test_restricted_cost_constant_along_path(self, rng):
        for _ in range(20):
            y = _series(rng, 20)
            fit = l0_segment(y, 1.0)
            if not fit.locations:
                continue
            j = 1 + int(rng.integers(fit.K))
            path = perturbation_path(y, make_spanning_contrast(fit, j, 20))
            vals = [restricted_cost(path.at(phi), fit.locations, 1.0) for phi in (-7.0, -1.0, 0.0, 2.5, 11.0)]
            assert max(vals) - min(vals) < 1e-9

    @pytest.mark.parametrize("mode", ["full", "window"])
    def test_grid_oracle_small(self, rng, mode):
        for _ in range(4):
            y = _series(rng, 20)
            lam = 2.0
            fit = l0_segment(y, lam)
            if not fit.locations:
                continue
            j = 1 + int(rng.integers(fit.K))
            tau = fit.locations[j - 1]
            nu = make_spanning_contrast(fit, j, 20) if mode == "full" else make_window_contrast(
                tau, min(4, tau, 20 - tau), 20)
            S = l0_S(y, lam, j, nu, mode, fit=fit)
            path = perturbation_path(y, nu)
            sd = math.sqrt(nu.norm_sq)
            for phi in np.linspace(-10 * sd, 10 * sd, 200):
                if S.endpoints and S.distance_to_endpoint(phi) < 1e-6:
                    continue
                got = l0_segment(path.at(phi), lam).locations
                assert S.contains(phi) == (got == fit.locations if mode == "full" else tau in got)

    def test_huge_lambda(self):
        # any lambda above the no-change cost: no changepoints at all
        y = TimeSeries([0, 0, 0, 3, 3, 3], 1.0)
        assert l0_segment(y, 100.0).locations == ()
