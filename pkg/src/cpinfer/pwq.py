"""Piecewise quadratic functions of one variable, and of (u, phi) piecewise in phi.

A :class:`PiecewiseQuadratic` partitions the real line with sorted interior
breakpoints ``b_0 < ... < b_{n-2}`` into cells ``(-inf, b_0], (b_0, b_1], ...,
(b_{n-2}, inf)`` and carries one quadratic per cell.  Everything here is plain
Python floats: the objects are small and the per-cell work is branchy, which
numpy does not help with.
"""

from __future__ import annotations

import math
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .core import IntervalUnion, InvariantError

__all__ = [
    "Quadratic1D",
    "PiecewiseQuadratic",
    "BivariatePW",
    "pw_min",
    "pw_min_value",
    "pw_sublevel",
    "biv_add_data_term",
    "biv_min_over_u",
    "quad_roots",
]

INF = math.inf
# coefficients of a difference below this fraction of the inputs' magnitude are noise
CLEAN_RTOL = 1e-10
COALESCE_RTOL = 1e-10


class Quadratic1D(NamedTuple):
    """a x^2 + b x + c."""

    a: float
    b: float
    c: float

    def __call__(self, x):
        return (self.a * x + self.b) * x + self.c

    def __add__(self, other):
        return Quadratic1D(self.a + other[0], self.b + other[1], self.c + other[2])

    def __sub__(self, other):
        return Quadratic1D(self.a - other[0], self.b - other[1], self.c - other[2])


ZERO = Quadratic1D(0.0, 0.0, 0.0)


def _clean(d: Sequence[float], scale: float) -> Quadratic1D:
    tol = CLEAN_RTOL * scale
    return Quadratic1D(*(0.0 if abs(x) <= tol else x for x in d))


def _close(p: Sequence[float], q: Sequence[float]) -> bool:
    if p == q:
        return True
    scale = max(1.0, abs(p[0]), abs(p[1]), abs(p[2]), abs(q[0]), abs(q[1]), abs(q[2]))
    tol = COALESCE_RTOL * scale
    return abs(p[0] - q[0]) <= tol and abs(p[1] - q[1]) <= tol and abs(p[2] - q[2]) <= tol


def quad_roots(a: float, b: float, c: float) -> tuple[float, ...]:
    """Real crossing points of a x^2 + b x + c, sorted.

    Uses the cancellation-free form of the quadratic formula.  A discriminant
    that is zero up to rounding is a tangency and yields no crossing.
    """
    if a == 0.0:
        if b == 0.0:
            return ()
        return (-c / b,)
    disc = b * b - 4.0 * a * c
    if disc <= 1e-12 * (b * b + abs(4.0 * a * c)):
        return ()
    q = -0.5 * (b + math.copysign(math.sqrt(disc), b))
    r1 = q / a
    r2 = c / q if q != 0.0 else -r1
    return (r1, r2) if r1 <= r2 else (r2, r1)


def _probe(lo: float, hi: float) -> float:
    """A point strictly inside (lo, hi)."""
    if lo == -INF:
        return 0.0 if hi == INF else hi - max(1.0, abs(hi))
    if hi == INF:
        return lo + max(1.0, abs(lo))
    return 0.5 * (lo + hi)


def _probe2(lo: float, hi: float) -> float:
    """A second interior point, distinct from :func:`_probe`."""
    if lo == -INF:
        return 1.7 if hi == INF else hi - 2.3 * max(1.0, abs(hi))
    if hi == INF:
        return lo + 2.3 * max(1.0, abs(lo))
    return lo + 0.3 * (hi - lo)


def _cell_sign(d: Quadratic1D, lo: float, hi: float) -> float:
    # d keeps one sign on the cell apart from tangent zeros; a single probe
    # can land on one, so take whichever of two probes is further from 0
    v1, v2 = d(_probe(lo, hi)), d(_probe2(lo, hi))
    return v1 if abs(v1) >= abs(v2) else v2


class PiecewiseQuadratic:
    """Real-valued function on R, quadratic on each cell.

    Parameters
    ----------
    breaks : sequence of float
        Strictly increasing interior breakpoints; ``len(breaks) == len(pieces) - 1``.
    pieces : sequence of (a, b, c)
        One quadratic per cell, left to right.
    """

    __slots__ = ("breaks", "pieces")

    def __init__(self, breaks: Sequence[float], pieces: Sequence[Sequence[float]]):
        breaks = tuple(float(b) for b in breaks)
        pieces = tuple(p if type(p) is Quadratic1D else Quadratic1D(*map(float, p)) for p in pieces)
        if len(pieces) != len(breaks) + 1:
            raise ValueError("need exactly one more piece than breakpoints")
        if any(not b2 > b1 for b1, b2 in zip(breaks, breaks[1:])):
            raise ValueError("breakpoints must be strictly increasing")
        self.breaks = breaks
        self.pieces = pieces

    @classmethod
    def quadratic(cls, a: float = 0.0, b: float = 0.0, c: float = 0.0) -> "PiecewiseQuadratic":
        return cls((), (Quadratic1D(float(a), float(b), float(c)),))

    @classmethod
    def constant(cls, c: float) -> "PiecewiseQuadratic":
        return cls.quadratic(0.0, 0.0, c)

    @classmethod
    def _raw(cls, breaks, pieces) -> "PiecewiseQuadratic":
        # trusted constructor for internal results
        obj = cls.__new__(cls)
        obj.breaks = tuple(breaks)
        obj.pieces = tuple(pieces)
        return obj

    def __len__(self):
        return len(self.pieces)

    def __repr__(self):
        return f"PiecewiseQuadratic(breaks={self.breaks!r}, pieces={self.pieces!r})"

    def cells(self):
        """Yield ``(lo, hi, piece)`` for every cell."""
        lo = -INF
        for b, p in zip(self.breaks, self.pieces):
            yield lo, b, p
            lo = b
        yield lo, INF, self.pieces[-1]

    def __call__(self, x):
        if np.ndim(x) == 0:
            x = float(x)
            i = int(np.searchsorted(self.breaks, x, side="left")) if self.breaks else 0
            return self.pieces[i](x)
        x = np.asarray(x, dtype=float)
        idx = np.searchsorted(np.asarray(self.breaks), x, side="left")
        coef = np.asarray(self.pieces)
        a, b, c = coef[idx, 0], coef[idx, 1], coef[idx, 2]
        return (a * x + b) * x + c

    def add_quadratic(self, q: Sequence[float]) -> "PiecewiseQuadratic":
        qa, qb, qc = q
        return PiecewiseQuadratic._raw(
            self.breaks, [Quadratic1D(p.a + qa, p.b + qb, p.c + qc) for p in self.pieces]
        )

    def __add__(self, other):
        if isinstance(other, (int, float)):
            return self.add_quadratic((0.0, 0.0, float(other)))
        if not isinstance(other, PiecewiseQuadratic):
            return NotImplemented
        if not other.breaks:
            return self.add_quadratic(other.pieces[0])
        if not self.breaks:
            return other.add_quadratic(self.pieces[0])
        breaks, pieces = [], []
        for lo, hi, p, q in _overlay(self, other):
            pieces.append(p + q)
            breaks.append(hi)
        return PiecewiseQuadratic._raw(breaks[:-1], pieces).coalesce()

    __radd__ = __add__

    def coalesce(self) -> "PiecewiseQuadratic":
        """Merge neighbouring cells whose quadratics agree."""
        if not self.breaks:
            return self
        breaks, pieces = [], [self.pieces[0]]
        for b, p in zip(self.breaks, self.pieces[1:]):
            if _close(pieces[-1], p):
                continue
            breaks.append(b)
            pieces.append(p)
        return PiecewiseQuadratic._raw(breaks, pieces)

    def restrict(self, lo: float, hi: float) -> list[tuple[float, float, Quadratic1D]]:
        """Cells clipped to [lo, hi]."""
        out = []
        for clo, chi, p in self.cells():
            a, b = max(lo, clo), min(hi, chi)
            if a < b:
                out.append((a, b, p))
        return out

    def dump(self) -> str:
        """Plain-text listing, one ``cell_lo cell_hi a b c`` line per cell."""
        return "\n".join(
            f"{_fmt(lo)} {_fmt(hi)} {p.a!r} {p.b!r} {p.c!r}" for lo, hi, p in self.cells()
        )

    @classmethod
    def from_cells(cls, cells: Iterable[tuple[float, float, Sequence[float]]]) -> "PiecewiseQuadratic":
        cells = list(cells)
        if not cells or cells[0][0] != -INF or cells[-1][1] != INF:
            raise ValueError("cells must cover the real line")
        for (_, hi, _), (lo, _, _) in zip(cells, cells[1:]):
            if hi != lo:
                raise ValueError("cells must be contiguous")
        return cls([c[1] for c in cells[:-1]], [c[2] for c in cells])


def _fmt(x: float) -> str:
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return repr(float(x))


def _overlay(f: PiecewiseQuadratic, g: PiecewiseQuadratic):
    """Common refinement: yields ``(lo, hi, f_piece, g_piece)``."""
    fb, gb, fp, gp = f.breaks, g.breaks, f.pieces, g.pieces
    nf, ng = len(fb), len(gb)
    i = j = 0
    lo = -INF
    while True:
        bf = fb[i] if i < nf else INF
        bg = gb[j] if j < ng else INF
        hi = bf if bf < bg else bg
        yield lo, hi, fp[i], gp[j]
        if hi == INF:
            return
        if bf == hi:
            i += 1
        if bg == hi:
            j += 1
        lo = hi


def _split_cell(lo: float, hi: float, p: Quadratic1D, q: Quadratic1D):
    """Sub-cells of [lo, hi] on which p - q has constant sign.

    Yields ``(lo, hi, sign)`` with sign <= 0 meaning p <= q there.
    """
    scale = max(abs(p.a), abs(p.b), abs(p.c), abs(q.a), abs(q.b), abs(q.c))
    d = _clean((p.a - q.a, p.b - q.b, p.c - q.c), scale)
    if d.a == 0.0 and d.b == 0.0:
        yield lo, hi, d.c
        return
    cuts = [r for r in quad_roots(*d) if lo < r < hi]
    edges = [lo, *cuts, hi]
    for a, b in zip(edges, edges[1:]):
        yield a, b, _cell_sign(d, a, b)


def pw_min(f: PiecewiseQuadratic, g: PiecewiseQuadratic, shift: Sequence[float] | None = None) -> PiecewiseQuadratic:
    """Pointwise minimum of two piecewise quadratics.

    ``shift``, if given, is a quadratic added to every piece of ``g`` first;
    this saves materialising ``g + shift`` in the cost recursions.  Ties go to
    ``f``.

    Examples
    --------
    >>> h = pw_min(PiecewiseQuadratic.quadratic(1, 0, 0), PiecewiseQuadratic.constant(1))
    >>> [round(b, 12) for b in h.breaks]
    [-1.0, 1.0]
    """
    fb, gb, fp, gp = f.breaks, g.breaks, f.pieces, g.pieces
    nf, ng = len(fb), len(gb)
    breaks: list[float] = []
    pieces: list = []

    def emit(b, w):
        if pieces and (pieces[-1] is w or pieces[-1] == w):
            breaks[-1] = b
        else:
            pieces.append(w)
            breaks.append(b)

    if shift is not None:
        sa, sb, sc = shift
    i = j = 0
    qj = -1
    q = None
    lo = -INF
    while True:
        bf = fb[i] if i < nf else INF
        bg = gb[j] if j < ng else INF
        hi = bf if bf < bg else bg
        p = fp[i]
        if j != qj:
            q = gp[j]
            if shift is not None:
                q = Quadratic1D(q[0] + sa, q[1] + sb, q[2] + sc)
            qj = j
        if p is q or p == q:
            emit(hi, p)
        else:
            pa, pb, pc = p
            qa, qb, qc = q
            da, db, dc = pa - qa, pb - qb, pc - qc
            tol = CLEAN_RTOL * max(abs(pa), abs(pb), abs(pc), abs(qa), abs(qb), abs(qc))
            if -tol <= da <= tol:
                da = 0.0
            if -tol <= db <= tol:
                db = 0.0
            if -tol <= dc <= tol:
                dc = 0.0
            if da == 0.0:
                if db == 0.0:
                    emit(hi, p if dc <= 0.0 else q)
                else:
                    r = -dc / db
                    if lo < r < hi:
                        # p - q is increasing when db > 0, so p wins on the left
                        emit(r, p if db > 0.0 else q)
                        emit(hi, q if db > 0.0 else p)
                    else:
                        x = _probe(lo, hi)
                        emit(hi, p if db * x + dc <= 0.0 else q)
            else:
                disc = db * db - 4.0 * da * dc
                outer = p if da < 0.0 else q
                if disc <= 1e-12 * (db * db + abs(4.0 * da * dc)):
                    emit(hi, outer)
                else:
                    inner = q if da < 0.0 else p
                    t = -0.5 * (db + math.copysign(math.sqrt(disc), db))
                    r1 = t / da
                    r2 = dc / t
                    if r1 > r2:
                        r1, r2 = r2, r1
                    if r1 > lo:
                        emit(r1 if r1 < hi else hi, outer)
                    if r2 > lo and r1 < hi:
                        emit(r2 if r2 < hi else hi, inner)
                    if r2 < hi:
                        emit(hi, outer)
        if hi == INF:
            break
        if bf == hi:
            i += 1
        if bg == hi:
            j += 1
        lo = hi
    return PiecewiseQuadratic._raw(breaks[:-1], pieces)


def pw_min_many(fs: Iterable[PiecewiseQuadratic]) -> PiecewiseQuadratic:
    it = iter(fs)
    out = next(it)
    for f in it:
        out = pw_min(out, f)
    return out


def pw_sublevel(f: PiecewiseQuadratic, g: PiecewiseQuadratic) -> IntervalUnion:
    """The set {x : f(x) <= g(x)} as a union of closed intervals."""
    keep = []
    for lo, hi, p, q in _overlay(f, g):
        if p == q:
            keep.append((lo, hi))
            continue
        for a, b, s in _split_cell(lo, hi, p, q):
            if s <= 0.0:
                keep.append((a, b))
    return IntervalUnion.of(keep)


def pw_min_value(f: PiecewiseQuadratic) -> tuple[float, float]:
    """Global minimum of ``f`` and the smallest point attaining it.

    For a discontinuous ``f`` the infimum may only be approached at the open
    end of a cell; that end is then returned with the limiting value.

    Raises
    ------
    ValueError
        If ``f`` is unbounded below.
    """
    best_v, best_x = INF, INF
    for lo, hi, p in f.cells():
        cands = []
        if p.a > 0:
            v = -p.b / (2 * p.a)
            cands.append(min(max(v, lo), hi))
        elif (lo == -INF and (p.a < 0 or p.b > 0)) or (hi == INF and (p.a < 0 or p.b < 0)):
            raise ValueError("piecewise quadratic is unbounded below")
        else:
            cands.extend(x for x in (lo, hi) if math.isfinite(x))
            if not cands:
                cands.append(0.0)
        for x in cands:
            v = p(x)
            if v < best_v or (v == best_v and x < best_x):
                best_v, best_x = v, x
    return best_v, best_x


# ---------------------------------------------------------------------------
# bivariate functions of (u, phi), piecewise in phi

# coefficient order: a_uu, a_uphi, a_phiphi, b_u, b_phi, c
BivCoef = tuple[float, float, float, float, float, float]


def reduce_u(e: Sequence[float]) -> Quadratic1D:
    """min over u of one bivariate quadratic, as a quadratic in phi."""
    A, Bp, Cpp, Du, Ep, F = e
    if A > 0:
        return Quadratic1D(Cpp - Bp * Bp / (4 * A), Ep - Bp * Du / (2 * A), F - Du * Du / (4 * A))
    if A == 0 and Bp == 0 and Du == 0:
        return Quadratic1D(Cpp, Ep, F)
    raise InvariantError(f"bivariate piece is not strictly convex in u (a_uu={A!r})")


class BivariatePW:
    """Function of (u, phi) that is quadratic on each phi-cell.

    A cell may hold several coefficient tuples; the function value there is
    their pointwise minimum.  Single-entry cells are the common case.
    """

    __slots__ = ("breaks", "cells")

    def __init__(self, breaks: Sequence[float], cells: Sequence[Sequence[BivCoef]]):
        self.breaks = tuple(float(b) for b in breaks)
        self.cells = tuple(tuple(tuple(float(x) for x in e) for e in cell) for cell in cells)
        if len(self.cells) != len(self.breaks) + 1:
            raise ValueError("need exactly one more cell than breakpoints")
        if any(not c for c in self.cells):
            raise ValueError("every cell needs at least one entry")

    @classmethod
    def zero(cls) -> "BivariatePW":
        return cls((), [[(0.0,) * 6]])

    @classmethod
    def lift(cls, f: PiecewiseQuadratic, q: BivCoef | None = None) -> "BivariatePW":
        """f(phi) + q(u, phi) with q a single bivariate quadratic (default 0)."""
        q = q or (0.0,) * 6
        cells = [[(q[0], q[1], q[2] + p.a, q[3], q[4] + p.b, q[5] + p.c)] for p in f.pieces]
        return cls(f.breaks, cells)

    @classmethod
    def of_u(cls, quads: Iterable[Sequence[float]]) -> "BivariatePW":
        """Pointwise min of phi-free quadratics in u, given as (a, b, c)."""
        return cls((), [[(a, 0.0, 0.0, b, 0.0, c) for a, b, c in quads]])

    def __call__(self, u: float, phi: float) -> float:
        i = int(np.searchsorted(self.breaks, phi, side="left")) if self.breaks else 0
        return min(
            A * u * u + Bp * u * phi + Cpp * phi * phi + Du * u + Ep * phi + F
            for A, Bp, Cpp, Du, Ep, F in self.cells[i]
        )

    def __repr__(self):
        return f"BivariatePW(breaks={self.breaks!r}, cells={self.cells!r})"

    def dump(self) -> str:
        """One line per (cell, entry): ``cell_lo cell_hi a_uu a_uphi a_phiphi b_u b_phi c``."""
        lines = []
        edges = (-INF, *self.breaks, INF)
        for lo, hi, cell in zip(edges, edges[1:], self.cells):
            for e in cell:
                lines.append(" ".join([_fmt(lo), _fmt(hi), *(repr(x) for x in e)]))
        return "\n".join(lines)


def biv_add_data_term(F: BivariatePW, slope: float, offset: float, y_t: float) -> BivariatePW:
    """Add 0.5 * (y_t + offset + slope * phi - u)^2 to every piece."""
    w, beta = y_t + offset, slope
    dA, dB, dC, dD, dE, dF = 0.5, -beta, 0.5 * beta * beta, -w, w * beta, 0.5 * w * w
    cells = [
        [(A + dA, B + dB, C + dC, D + dD, E + dE, G + dF) for A, B, C, D, E, G in cell]
        for cell in F.cells
    ]
    return BivariatePW(F.breaks, cells)


def biv_min_over_u(F: BivariatePW) -> PiecewiseQuadratic:
    """Eliminate u at its minimiser in every cell."""
    out_cells = []
    edges = (-INF, *F.breaks, INF)
    for lo, hi, cell in zip(edges, edges[1:], F.cells):
        quads = [reduce_u(e) for e in cell]
        if len(quads) == 1:
            out_cells.append((lo, hi, quads[0]))
            continue
        env = pw_min_many(PiecewiseQuadratic.quadratic(*q) for q in quads)
        out_cells.extend(env.restrict(lo, hi))
    return PiecewiseQuadratic.from_cells(out_cells).coalesce()
