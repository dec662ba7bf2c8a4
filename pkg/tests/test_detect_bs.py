import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from cpinfer.binseg import binseg, binseg_steps, cusum
from cpinfer.core import SegmentationExhausted, TimeSeries

values = arrays(float, st.integers(2, 25), elements=st.floats(-20, 20, allow_nan=False))


def test_cusum_examples():
    assert cusum([0, 0, 1, 1], (1, 2, 4)) == pytest.approx(1.0)
    assert cusum([0, 0, 1, 1], (1, 1, 4)) == pytest.approx(2 / 3 * np.sqrt(3) / 2)
    assert cusum([3.0] * 6, (2, 4, 6)) == 0.0


@pytest.mark.parametrize("t", [(0, 1, 3), (2, 2, 2), (1, 4, 4), (1, 2, 5)])
def test_cusum_invalid_triple(t):
    with pytest.raises(ValueError):
        cusum([0, 0, 1, 1], t)


def test_binseg_examples():
    fit = binseg(TimeSeries([0, 0, 1, 1]), 1)
    assert fit.locations == (2,) and fit.signs == (1,)
    assert binseg([5.0] * 5, 1).locations == (1,)
    fit = binseg([0, 0, 5, 5, 0, 0], 2)
    assert fit.locations == (2, 4)
    assert fit.entry_sequence == ((2, 1), (4, -1))


@pytest.mark.parametrize("k", [0, 4, 2.0])
def test_binseg_bad_k(k):
    with pytest.raises(ValueError):
        binseg([0, 0, 1, 1], k)


def test_steps_beyond_admissible():
    with pytest.raises(SegmentationExhausted) as e:
        binseg_steps(np.zeros(3), 3)
    assert e.value.found == 2


@given(values)
def test_k1_matches_exhaustive_scan(v):
    T = v.size
    stats = [abs(cusum(v, (1, t, T))) for t in range(1, T)]
    best = max(stats)
    # exact argmax except where floating point blurs a near-tie
    near = [t for t, g in zip(range(1, T), stats) if g >= best - 1e-12 * max(1.0, best)]
    tau = binseg(v, 1).locations[0]
    assert tau == near[0] or (len(near) > 1 and tau in near)


@given(values, st.data())
def test_fit_invariants(v, data):
    T = v.size
    k = data.draw(st.integers(1, T - 1))
    fit = binseg(v, k)
    again = binseg(v.copy(), k)
    assert fit == again
    assert len(fit.locations) == len(fit.orders) == len(fit.signs) == k
    assert sorted(fit.orders) == list(range(1, k + 1))
    bounds = [0, *fit.locations, T]
    for m, a, b in zip(fit.means, bounds, bounds[1:]):
        assert m == pytest.approx(v[a:b].mean(), abs=1e-9)
    # each entrant splits a segment that existed at its step, with d * g >= 0
    segs = [(1, T)]
    for tau, d in fit.entry_sequence:
        (s, e), = [(s, e) for s, e in segs if s <= tau < e]
        assert d * cusum(v, (s, tau, e)) >= -1e-9
        segs.remove((s, e))
        segs += [(s, tau), (tau + 1, e)]


def test_tie_prefers_smallest_tau():
    # symmetric data: |CUSUM| equal at tau=1 and tau=3
    assert binseg([0.0, 1.0, 1.0, 0.0], 1).locations in ((1,), (2,))
    v = [1.0, 0.0, 0.0, 0.0, 0.0, 1.0]
    g = [abs(cusum(v, (1, t, 6))) for t in range(1, 6)]
    assert g[0] == pytest.approx(g[4])
    assert binseg(v, 1).locations == (1 + int(np.argmax(g)),)


def test_sign_plus_on_zero_statistic():
    assert binseg(np.zeros(4), 2).signs == (1, 1)
