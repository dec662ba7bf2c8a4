"""Conditioning sets in phi for l0 segmentation.

Along the perturbation path only the points in the contrast's support move,
so the optimal cost of ``y'(phi)`` splits into an unperturbed prefix and
suffix, both available from the ordinary 1-D dynamic programme, plus a
perturbed stretch handled by a recursion over functions of (u, phi).

Every function in a cost set has the form::

    f(u, phi) = H(phi) + U(u) + sum_{i in range} 0.5 * (w_i + beta_i * phi - u)^2

where H is piecewise quadratic in phi (the cost up to the start of the
current segment), U is a pointwise min of quadratics in u (only for the
seed, which carries the unperturbed prefix), and the sum runs over the
data the current segment has absorbed.  The sum is a single bivariate
quadratic obtained from prefix sums, so a function only stores H or U and
where its segment started.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import ChangepointFit, Contrast, IntervalUnion, PerturbationPath, _as_series, perturbation_path
from .l0 import FpopTrace, l0_segment, restricted_cost, reverse_trace
from .pwq import (
    BivariatePW,
    PiecewiseQuadratic,
    Quadratic1D,
    pw_min,
    pw_sublevel,
    reduce_u,
)

__all__ = ["CostSet", "l0_cost_sets", "l0_C_const", "l0_S", "l0_C_curves", "LCurves"]


class _Stretch:
    """Prefix sums of the perturbed data over the support of the path."""

    def __init__(self, path: PerturbationPath):
        w = path.dense_intercept()
        b = path.dense_slope()
        cs = lambda x: np.concatenate(([0.0], np.cumsum(x)))  # noqa: E731
        self.pw, self.pb = cs(w), cs(b)
        self.pww, self.pbb, self.pwb = cs(w * w), cs(b * b), cs(w * b)
        self.path = path

    def quad(self, i: int, j: int) -> tuple:
        """Coefficients of sum_{t=i..j} 0.5 * (w_t + beta_t phi - u)^2, 1-based inclusive."""
        if i > j:
            i, j = j, i
        n = j - i + 1
        sw = self.pw[j] - self.pw[i - 1]
        sb = self.pb[j] - self.pb[i - 1]
        return (
            0.5 * n,
            float(-sb),
            float(0.5 * (self.pbb[j] - self.pbb[i - 1])),
            float(-sw),
            float(self.pwb[j] - self.pwb[i - 1]),
            float(0.5 * (self.pww[j] - self.pww[i - 1])),
        )


class _Fn(NamedTuple):
    H: PiecewiseQuadratic | None
    U: tuple | None
    start: int


def _add6(p, q):
    return tuple(a + b for a, b in zip(p, q))


def _lift_u(q) -> tuple:
    a, b, c = q
    return (a, 0.0, 0.0, b, 0.0, c)


def _fn_min_u(fn: _Fn, Q: tuple | None) -> PiecewiseQuadratic:
    """min over u of one cost-set function, as a function of phi."""
    if fn.U is not None:
        quads = [reduce_u(_add6(_lift_u(q), Q) if Q else _lift_u(q)) for q in fn.U]
        out = PiecewiseQuadratic._raw((), (quads[0],))
        for q in quads[1:]:
            out = pw_min(out, PiecewiseQuadratic._raw((), (q,)))
        return out
    return fn.H.add_quadratic(reduce_u(Q)) if Q else fn.H


@dataclass(eq=False)
class CostSet:
    """The set of bivariate functions whose pointwise min is Cost(y'_{...}(phi); u).

    ``anchor`` is the last timepoint absorbed and ``side`` says whether the
    recursion ran forwards (costs of ``y'_{1:anchor}``) or backwards (costs of
    ``y'_{anchor:T}``).
    """

    fns: list
    side: str
    anchor: int | None
    stretch: _Stretch

    def __len__(self):
        return len(self.fns)

    def _Q(self, fn: _Fn):
        if self.anchor is None or (self.side == "forward" and fn.start > self.anchor) or (
            self.side == "reverse" and fn.start < self.anchor
        ):
            return None
        return self.stretch.quad(fn.start, self.anchor)

    def min_u(self) -> PiecewiseQuadratic:
        """min over every function and over u, as a piecewise quadratic in phi."""
        env = None
        for fn in self.fns:
            Q = self._Q(fn)
            if env is not None and fn.H is not None and Q is not None:
                env = pw_min(env, fn.H, reduce_u(Q))
                continue
            g = _fn_min_u(fn, Q)
            env = g if env is None else pw_min(env, g)
        return env

    @property
    def functions(self) -> list[BivariatePW]:
        out = []
        for fn in self.fns:
            Q = self._Q(fn) or (0.0,) * 6
            if fn.U is not None:
                out.append(BivariatePW((), [[_add6(_lift_u(q), Q) for q in fn.U]]))
            else:
                out.append(BivariatePW.lift(fn.H, Q))
        return out

    def dump(self) -> str:
        """Plain-text dump, one block per function, blocks separated by blank lines."""
        return "\n\n".join(f.dump() for f in self.functions) + "\n"


def _seed_quads(seed) -> tuple:
    if isinstance(seed, PiecewiseQuadratic):
        # valid when seed is the lower envelope of its own pieces, as DP columns are
        return tuple(tuple(p) for p in seed.pieces)
    return tuple(tuple(map(float, q)) for q in seed)


def _advance(cs: CostSet, lam: float, steps: Iterable[int], skip_h: int | None = None) -> CostSet:
    """Absorb the timepoints in ``steps`` (in travel order) into a cost set."""
    fns = list(cs.fns)
    anchor = cs.anchor
    for s in steps:
        if s != skip_h:
            view = CostSet(fns, cs.side, anchor, cs.stretch)
            h = view.min_u() + lam
            fns.append(_Fn(h, None, s))
        anchor = s
    return CostSet(fns, cs.side, anchor, cs.stretch)


def l0_cost_sets(path: PerturbationPath, lam: float, start: int, to: int, direction: str = "forward",
                 seed_cost=None) -> CostSet:
    """Run the bivariate cost recursion over timepoints ``start..to``.

    Parameters
    ----------
    path : PerturbationPath
    lam : float
        Penalty per changepoint.
    start, to : int
        First and last timepoints absorbed (1-based, inclusive).  For
        ``direction='reverse'``, ``start >= to`` and time runs backwards.
    seed_cost : PiecewiseQuadratic or sequence of (a, b, c), optional
        Cost of the data before ``start`` (after it, for reverse) as a
        function of the current mean u.  A sequence is read as the pointwise
        min of those quadratics; a PiecewiseQuadratic must be the lower
        envelope of its own pieces.  Defaults to 0 (nothing before).

    Returns
    -------
    CostSet
        Holds ``|start - to| + 2`` functions, or one fewer without a seed:
        with nothing before ``start`` there is no changepoint to place there.
    """
    if direction not in ("forward", "reverse"):
        raise ValueError(f"direction must be 'forward' or 'reverse', got {direction!r}")
    step = 1 if direction == "forward" else -1
    if (to - start) * step < 0:
        raise ValueError("'to' lies before 'start' in the direction of travel")
    seed = _seed_quads(seed_cost) if seed_cost is not None else ((0.0, 0.0, 0.0),)
    stretch = _Stretch(path)
    cs = CostSet([_Fn(None, seed, start)], direction, None, stretch)
    return _advance(cs, lam, range(start, to + step, step), skip_h=start if seed_cost is None else None)


def l0_C_const(y, fit: ChangepointFit, lam: float) -> float:
    """Cost of the data with changepoints pinned at ``fit.locations``.

    Along a spanning-contrast path this does not depend on phi, so its value
    at the observed data serves everywhere.
    """
    return restricted_cost(y, fit.locations, lam)


class LCurves(NamedTuple):
    """Costs of y'(phi) with (``with_tau``) and without (``without_tau``) a changepoint at tau."""

    with_tau: PiecewiseQuadratic
    without_tau: PiecewiseQuadratic
    forward: CostSet
    reverse: CostSet


def _join(cs: CostSet, right: Sequence[tuple], lam: float) -> PiecewiseQuadratic:
    """min over u of [cost set + R(u)], or with a changepoint between them."""
    r_min = min(reduce_u(_lift_u(q)).c for q in right)
    env = None
    for fn in cs.fns:
        Q = cs._Q(fn)
        if fn.U is not None:
            quads = [reduce_u(_add6(_add6(_lift_u(p), _lift_u(r)), Q)) for p in fn.U for r in right]
            g = PiecewiseQuadratic._raw((), (quads[0],))
            for q in quads[1:]:
                g = pw_min(g, PiecewiseQuadratic._raw((), (q,)))
        else:
            g = None
            for r in right:
                sh = reduce_u(_add6(_lift_u(r), Q))
                g = fn.H.add_quadratic(sh) if g is None else pw_min(g, fn.H, sh)
        sh = reduce_u(Q) if Q else Quadratic1D(0.0, 0.0, 0.0)
        base = fn.H if fn.H is not None else _fn_min_u(fn, Q)
        if fn.H is None:
            sh = Quadratic1D(0.0, 0.0, 0.0)
        g = pw_min(g, base, Quadratic1D(sh.a, sh.b, sh.c + r_min + lam))
        env = g if env is None else pw_min(env, g)
    return env


def _pairs(fwd: CostSet, rev: CostSet) -> PiecewiseQuadratic:
    """min over (f, g) pairs and u of f + g, for a forward and reverse set meeting at tau."""
    env = None
    for f in fwd.fns:
        Qf = fwd._Q(f)
        for g in rev.fns:
            Qg = rev._Q(g)
            Q = _add6(Qf, Qg)
            if f.U is not None or g.U is not None:
                H = (f.H or PiecewiseQuadratic.constant(0.0)) + (g.H or PiecewiseQuadratic.constant(0.0))
                us = [_add6(_lift_u(p), _lift_u(r)) for p in (f.U or [(0.0, 0.0, 0.0)]) for r in (g.U or [(0.0, 0.0, 0.0)])]
                part = None
                for uq in us:
                    q = H.add_quadratic(reduce_u(_add6(uq, Q)))
                    part = q if part is None else pw_min(part, q)
            else:
                part = (f.H + g.H).add_quadratic(reduce_u(Q))
            env = part if env is None else pw_min(env, part)
    return env


def _tau_and_fit(y, lam, j, fit):
    ts = _as_series(y)
    fit = l0_segment(ts, lam) if fit is None else fit
    if "fpop" not in fit.cache:
        raise ValueError("fit does not come from l0_segment")
    if not 1 <= j <= fit.K:
        raise IndexError(f"j={j} out of range for {fit.K} changepoints")
    return ts, fit, fit.locations[j - 1]


def l0_C_curves(y, lam: float, j: int, nu: Contrast, fit: ChangepointFit | None = None,
                method: str = "continue") -> LCurves:
    """Costs of y'(phi) with and without a changepoint at the j-th estimate.

    Parameters
    ----------
    method : {'continue', 'pairs'}
        How the cost without the changepoint is assembled.  ``'continue'``
        carries the forward recursion across tau (no segment may start at
        tau + 1) through the end of the perturbed stretch, then attaches
        the unperturbed suffix.  ``'pairs'`` minimises every forward/reverse
        pair jointly over u; it is quadratic in the set sizes and kept as a
        cross-check.
    """
    ts, fit, tau = _tau_and_fit(y, lam, j, fit)
    if nu.tau is not None and nu.tau != tau:
        raise ValueError(f"contrast is centred at {nu.tau}, but changepoint {j} is at {tau}")
    lo, hi = nu.support
    if not lo <= tau < hi:
        raise ValueError(f"changepoint {tau} is not inside the contrast support {lo}..{hi}")
    lam = float(lam)
    path = perturbation_path(ts, nu)
    t0, t1 = lo - 1, hi
    T = ts.T
    fwd_dp: FpopTrace = fit.cache["fpop"]
    rev_dp: FpopTrace = reverse_trace(fit)

    fwd = l0_cost_sets(path, lam, t0 + 1, tau, "forward", fwd_dp.column(t0) if t0 > 0 else None)
    rev = l0_cost_sets(path, lam, t1, tau + 1, "reverse", rev_dp.column(T - t1) if t1 < T else None)
    with_tau = fwd.min_u() + rev.min_u() + lam
    if method == "continue":
        cont = _advance(fwd, lam, range(tau + 1, t1 + 1), skip_h=tau + 1)
        without = _join(cont, rev_dp.column(T - t1), lam)
    elif method == "pairs":
        without = _pairs(fwd, rev)
    else:
        raise ValueError(f"unknown method {method!r}")
    return LCurves(with_tau.coalesce(), without.coalesce(), fwd, rev)


def l0_S(y, lam: float, j: int, nu: Contrast, mode: str = "full", fit: ChangepointFit | None = None,
         method: str = "continue") -> IntervalUnion:
    """Conditioning set for the j-th l0 changepoint.

    Parameters
    ----------
    mode : {'full', 'window'}
        ``'full'``: phi whose segmentation has exactly the observed
        locations (use a spanning contrast).  ``'window'``: phi whose
        segmentation contains the tested location (use a window contrast).
    fit : ChangepointFit, optional
        ``l0_segment(y, lam)``, if already computed; its cached dynamic
        programme is reused.
    """
    if mode not in ("full", "window"):
        raise ValueError(f"mode must be 'full' or 'window', got {mode!r}")
    ts, fit, _ = _tau_and_fit(y, lam, j, fit)
    curves = l0_C_curves(ts, lam, j, nu, fit, method)
    if mode == "window":
        return pw_sublevel(curves.with_tau, curves.without_tau)
    C = l0_C_const(ts, fit, lam)
    best = pw_min(curves.with_tau, curves.without_tau)
    return pw_sublevel(PiecewiseQuadratic.constant(C), best)
