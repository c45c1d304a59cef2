"""Indefinite integrals of densities and the maps they induce.

An :class:`IndefiniteIntegral` ``Phi(x) = Phi(a) + int_[a, x] phi`` is built
from a piecewise-monotone density.  It need not be monotone: wherever the
density changes sign, ``Phi`` turns around.  The helpers here locate those
turning points, compute the range ``Phi(I)``, push partitions forward, and
compose functions with ``Phi``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .core import (CONSTANT, DECREASING, EPS_M, INCREASING, BoundedFunction, OrientedInterval,
                   Partition, PiecewiseMonotoneFn, _call, _groups, as_hull, horner, poly_matrix, as_oriented)
from .errors import DomainError, HypothesisError

DEDUP_TOL = 1e-12

_GL20 = np.polynomial.legendre.leggauss(20)
_GL10 = np.polynomial.legendre.leggauss(10)


def _gl(func: Callable, u: float, v: float, rule) -> float:
    nodes, weights = rule
    half = 0.5 * (v - u)
    xs = u + half * (nodes + 1.0)
    return float(half * np.dot(weights, _call(func, xs)))


def _gl_table(func: Callable, p: float, q: float, tol: float, max_depth: int = 40):
    """Adaptive Gauss-Legendre cumulative table of ``func`` over ``[p, q]``.

    Returns sub-interval nodes and cumulative integrals at those nodes.
    A sub-interval is accepted when the 10- and 20-point rules agree to
    ``tol`` scaled by its share of ``[p, q]``.
    """
    accepted = []
    stack = [(p, q, 0)]
    while stack:
        u, v, depth = stack.pop()
        i20 = _gl(func, u, v, _GL20)
        i10 = _gl(func, u, v, _GL10)
        if abs(i20 - i10) <= max(tol * (v - u) / (q - p), 4e-16 * abs(i20)) or depth >= max_depth:
            accepted.append((u, v, i20))
        else:
            m = 0.5 * (u + v)
            stack.append((m, v, depth + 1))
            stack.append((u, m, depth + 1))
    accepted.sort()
    nodes = np.array([a[0] for a in accepted] + [q])
    cums = np.concatenate([[0.0], np.cumsum([a[2] for a in accepted])])
    return nodes, cums


def _bisect_monotone(func: Callable, lo, hi, targets, increasing: bool,
                     xtol: float = 0.0, max_iter: int = 2200) -> np.ndarray:
    """Solve ``func(x) = target`` on monotone brackets, vectorized over targets.

    Bisects until the bracket is two adjacent floats (or narrower than
    ``xtol``), then returns an end where ``func`` hits the target exactly
    if there is one, so that preimages of exact values stay exact.
    """
    targets = np.atleast_1d(np.asarray(targets, dtype=float))
    lo = np.broadcast_to(np.asarray(lo, dtype=float), targets.shape).copy()
    hi = np.broadcast_to(np.asarray(hi, dtype=float), targets.shape).copy()
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        open_ = (mid > lo) & (mid < hi) & (hi - lo > xtol * np.maximum(1.0, np.abs(lo)))
        if not open_.any():
            break
        val = _call(func, mid)
        below = (val < targets if increasing else val > targets) & open_
        above = ~below & open_
        lo = np.where(below, mid, lo)
        hi = np.where(above, mid, hi)
    f_lo, f_hi = _call(func, lo), _call(func, hi)
    return np.where(f_hi == targets, hi, np.where(f_lo == targets, lo, 0.5 * (lo + hi)))


class IndefiniteIntegral:
    """``Phi(x) = base_value + int_[base_point, x] density``.

    Pieces whose density has an exact antiderivative (polynomial pieces)
    are integrated exactly; the others get an adaptive Gauss-Legendre
    cumulative table built once at construction.  After construction the
    object is read-only, so it can be shared between threads.
    """

    def __init__(self, density: PiecewiseMonotoneFn, base_point: float, base_value: float = 0.0,
                 tol: float = 1e-10):
        lo, hi = density.domain
        if not lo <= base_point <= hi:
            raise DomainError(f"base point {base_point!r} outside [{lo!r}, {hi!r}]")
        self.density = density
        self.base_point = float(base_point)
        self.base_value = float(base_value)
        self.tol = tol
        self.domain = density.domain
        x = density.breakpoints
        self._x = x
        self._tables = []
        totals = []
        for i in range(density.n_pieces):
            p, q = float(x[i]), float(x[i + 1])
            anti = density.piece_antiderivative(i)
            if anti is not None:
                a0 = float(_call(anti, np.array([p]))[0])
                self._tables.append(("anti", anti, a0))
                totals.append(float(_call(anti, np.array([q]))[0]) - a0)
            else:
                func = density.piece_func(i)
                nodes, cums = _gl_table(func, p, q, tol * (q - p) / (hi - lo))
                cheb = _cheb_table(func, nodes, cums)
                if cheb is not None:
                    self._tables.append(("cheb", nodes, cums, cheb))
                else:
                    self._tables.append(("gl", nodes, cums, func))
                totals.append(float(cums[-1]))
        self._cum = np.concatenate([[0.0], np.cumsum(totals)])
        self._coef = None
        if all(t[0] == "anti" for t in self._tables):
            coef = poly_matrix([t[1] for t in self._tables])
            if coef is not None:
                coef[:, 0] += self._cum[:-1] - np.array([t[2] for t in self._tables])
                self._coef = coef
        self._offset = self.base_value - float(self._raw(np.array([self.base_point]))[0])
        self._segments = None

    @property
    def lipschitz(self) -> float:
        """``M_phi``: a bound for the density, hence a Lipschitz constant."""
        return self.density.global_bound

    def _raw(self, xs: np.ndarray) -> np.ndarray:
        m = self.density.n_pieces
        idx = np.clip(np.searchsorted(self._x, xs, "right") - 1, 0, m - 1)
        if self._coef is not None:
            return horner(self._coef, idx, xs)
        out = np.empty_like(xs)
        groups = _groups(idx) if m > 1 else [(0, slice(None))]
        for i, mask in groups:
            xi = xs[mask]
            table = self._tables[i]
            if table[0] == "anti":
                out[mask] = self._cum[i] + (_call(table[1], xi) - table[2])
            elif table[0] == "cheb":
                out[mask] = self._cum[i] + _cheb_eval(table[1], table[2], table[3], xi)
            else:
                out[mask] = self._cum[i] + _gl_eval(table[1], table[2], table[3], xi)
        return out

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        scalar = xa.ndim == 0
        xa = np.atleast_1d(xa)
        lo, hi = self.domain
        if xa.size and (xa.min() < lo or xa.max() > hi or np.isnan(xa).any()):
            raise DomainError(f"evaluation outside [{lo!r}, {hi!r}]")
        out = self._offset + self._raw(xa)
        return float(out[0]) if scalar else out

    # -- sign structure ---------------------------------------------------------

    def sign_change_points(self) -> np.ndarray:
        """Points where the density changes sign, in increasing order."""
        d = self.density
        pts = []
        for i, piece in enumerate(d.pieces):
            if piece.left_value * piece.right_value < 0:
                root = _bisect_monotone(piece.func, piece.lo, piece.hi, [0.0],
                                        increasing=piece.direction == INCREASING)
                pts.append(float(root[0]))
        x = d.breakpoints
        for j in range(1, x.size - 1):
            vals = [d.left_limit(j), d.values[j], d.right_limit(j)]
            if min(vals) < 0 < max(vals):
                pts.append(float(x[j]))
        return np.array(sorted(pts))

    def monotone_segments(self, lo: float | None = None, hi: float | None = None
                          ) -> list[tuple[float, float, str]]:
        """Maximal sub-intervals of ``[lo, hi]`` on which ``Phi`` is monotone."""
        if self._segments is None:
            self._segments = self._build_segments()
        return _clip_segments(self._segments, self.domain, lo, hi)

    def _build_segments(self):
        d = self.density
        lo, hi = self.domain
        cuts = np.union1d(d.breakpoints, self.sign_change_points())
        cuts = _dedup(cuts)
        cuts[0], cuts[-1] = lo, hi
        l, r = cuts[:-1], cuts[1:]
        sup, inf = d.cell_bounds(l, r)
        dirs = []
        for s, i in zip(sup, inf):
            if max(abs(s), abs(i)) == 0.0:
                dirs.append(CONSTANT)
            elif s >= -i:
                dirs.append(INCREASING)
            else:
                dirs.append(DECREASING)
        return _merge_segments(list(zip(l.tolist(), r.tolist(), dirs)))

    def as_function(self, lo: float | None = None, hi: float | None = None) -> PiecewiseMonotoneFn:
        """``Phi`` on ``[lo, hi]`` as a continuous piecewise-monotone function."""
        segs = self.monotone_segments(lo, hi)
        pts = [segs[0][0]] + [s[1] for s in segs]
        return PiecewiseMonotoneFn(pts, [self] * len(segs), directions=[s[2] for s in segs])


_CHEB_DEG = 24


def _cheb_table(func: Callable, nodes: np.ndarray, cums: np.ndarray):
    """Chebyshev antiderivatives of ``func`` on each table sub-interval.

    Row ``j`` holds coefficients in ``t in [-1, 1]`` of the integral from
    ``nodes[j]``.  Returns ``None`` when any row disagrees with the
    Gauss-Legendre table by more than a few ulps of the running total, in
    which case the caller keeps quadrature-based evaluation.
    """
    cheb = np.polynomial.chebyshev
    u, v = nodes[:-1], nodes[1:]
    half = 0.5 * (v - u)
    t = np.cos(np.pi * (np.arange(_CHEB_DEG + 1) + 0.5) / (_CHEB_DEG + 1))
    pts = 0.5 * (u + v)[:, None] + half[:, None] * t[None, :]
    vals = _call(func, pts.ravel()).reshape(pts.shape)
    rows = np.empty((u.size, _CHEB_DEG + 2))
    for j in range(u.size):
        c = cheb.chebfit(t, vals[j], _CHEB_DEG)
        rows[j] = cheb.chebint(c, lbnd=-1.0, scl=half[j])
    # the full-row value must reproduce the quadrature increment
    incr = np.sum(rows, axis=1)
    scale = max(1.0, float(np.abs(cums).max()))
    if np.any(np.abs(incr - np.diff(cums)) > 64 * np.finfo(float).eps * scale):
        return None
    # drop trailing columns that are negligible in every row
    small = np.all(np.abs(rows) <= np.finfo(float).eps * scale, axis=0)
    keep = rows.shape[1]
    while keep > 2 and small[keep - 1]:
        keep -= 1
    return np.ascontiguousarray(rows[:, :keep])


def _cheb_eval(nodes: np.ndarray, cums: np.ndarray, rows: np.ndarray, xs: np.ndarray) -> np.ndarray:
    j = np.clip(np.searchsorted(nodes, xs, "right") - 1, 0, nodes.size - 2)
    u, v = nodes[j], nodes[j + 1]
    t = np.clip((2.0 * xs - u - v) / (v - u), -1.0, 1.0)
    cols = rows.T
    b1 = np.zeros_like(xs)
    b2 = np.zeros_like(xs)
    t2 = 2.0 * t
    for k in range(rows.shape[1] - 1, 0, -1):
        b1, b2 = cols[k][j] + t2 * b1 - b2, b1
    return cums[j] + (cols[0][j] + t * b1 - b2)


def _gl_eval(nodes: np.ndarray, cums: np.ndarray, func: Callable, xs: np.ndarray,
             chunk: int = 65536) -> np.ndarray:
    j = np.clip(np.searchsorted(nodes, xs, "right") - 1, 0, nodes.size - 2)
    start = nodes[j]
    out = np.empty_like(xs)
    gn, gw = _GL20
    for k in range(0, xs.size, chunk):
        s = start[k:k + chunk]
        half = 0.5 * (xs[k:k + chunk] - s)
        pts = s[:, None] + half[:, None] * (gn[None, :] + 1.0)
        vals = _call(func, pts.ravel()).reshape(pts.shape)
        out[k:k + chunk] = cums[j[k:k + chunk]] + half * (vals @ gw)
    return out


def _dedup(pts: np.ndarray, tol: float = DEDUP_TOL) -> np.ndarray:
    pts = np.sort(np.asarray(pts, dtype=float))
    keep = [pts[0]]
    for p in pts[1:]:
        if p - keep[-1] > tol * max(1.0, abs(p)):
            keep.append(p)
    if len(keep) > 1 and keep[-1] != pts[-1]:
        keep[-1] = pts[-1]
    return np.array(keep)


def _merge_segments(segs):
    """Merge neighbours with the same direction; constant runs join a neighbour."""
    merged = []
    for s, t, d in segs:
        if merged and (merged[-1][2] == d or d == CONSTANT):
            merged[-1] = (merged[-1][0], t, merged[-1][2])
        elif merged and merged[-1][2] == CONSTANT:
            merged[-1] = (merged[-1][0], t, d)
        else:
            merged.append((s, t, d))
    return merged


def _clip_segments(segs, domain, lo, hi):
    lo = domain[0] if lo is None else float(lo)
    hi = domain[1] if hi is None else float(hi)
    if lo < domain[0] or hi > domain[1] or lo > hi:
        raise DomainError(f"[{lo!r}, {hi!r}] not inside {domain}")
    out = []
    for s, t, d in segs:
        a, b = max(s, lo), min(t, hi)
        if a < b:
            out.append((a, b, d))
    if not out:
        # degenerate query: a single point
        d = next(d for s, t, d in segs if s <= lo <= t)
        out.append((lo, hi, d))
    return out


Map = Union[IndefiniteIntegral, PiecewiseMonotoneFn]


def monotone_segments(Phi: Map, lo: float | None = None, hi: float | None = None
                      ) -> list[tuple[float, float, str]]:
    """Monotone segments of an indefinite integral or a continuous function.

    Any other object providing its own ``monotone_segments(lo, hi)`` is
    asked directly.
    """
    if not isinstance(Phi, PiecewiseMonotoneFn):
        return Phi.monotone_segments(lo, hi)
    if not Phi.is_continuous(tol=1e-12 * max(1.0, Phi.global_bound)):
        raise HypothesisError("the substitution map must be continuous")
    x = Phi.breakpoints
    segs = _merge_segments([(float(x[i]), float(x[i + 1]), d) for i, d in enumerate(Phi.directions)])
    return _clip_segments(segs, Phi.domain, lo, hi)


def map_direction(Phi: Map, interval) -> str:
    """The single direction of ``Phi`` on the interval, or raise if it turns."""
    lo, hi = as_hull(interval)
    segs = monotone_segments(Phi, lo, hi)
    dirs = {d for _, _, d in segs} - {CONSTANT}
    if len(dirs) > 1:
        raise HypothesisError(f"the map is not monotone on [{lo!r}, {hi!r}]")
    return dirs.pop() if dirs else CONSTANT


def preimage(Phi: Map, ys, interval, direction: str | None = None) -> np.ndarray:
    """Points x in ``interval`` with ``Phi(x) = y``, for ``Phi`` monotone there."""
    lo, hi = as_hull(interval)
    if direction is None:
        direction = map_direction(Phi, (lo, hi))
    if direction == CONSTANT:
        raise HypothesisError("cannot invert a constant map")
    return _bisect_monotone(Phi, lo, hi, ys, increasing=direction == INCREASING)


# ---------------------------------------------------------------------------
# operations


def build_indefinite(phi: PiecewiseMonotoneFn, a: float, base_value: float = 0.0,
                     tol: float = 1e-10) -> IndefiniteIntegral:
    return IndefiniteIntegral(phi, a, base_value, tol)


@dataclass(frozen=True)
class RangeInfo:
    """``Phi(I) = [Phi(x_m), Phi(x_M)]`` together with ``[Phi(a), Phi(b)]``."""

    range: tuple[float, float]
    x_m: float
    x_M: float
    oriented_span: OrientedInterval

    def to_dict(self) -> dict:
        return {"range": list(self.range), "x_m": self.x_m, "x_M": self.x_M,
                "oriented_span": self.oriented_span.to_list()}


def range_of(Phi: Map, interval) -> RangeInfo:
    """Range of ``Phi`` over an interval.

    Extrema can only sit at the interval's ends or where ``Phi`` turns, so
    those are the only candidates examined.  Ties (within ``EPS_M``) go to
    the smallest x.
    """
    I = as_oriented(interval)
    lo, hi = I.hull()
    segs = monotone_segments(Phi, lo, hi)
    cands = np.array(sorted({lo, hi} | {s for s, _, _ in segs} | {t for _, t, _ in segs}))
    vals = Phi(cands)
    vmin, vmax = float(vals.min()), float(vals.max())
    x_m = float(cands[np.nonzero(vals <= vmin + EPS_M)[0][0]])
    x_M = float(cands[np.nonzero(vals >= vmax - EPS_M)[0][0]])
    span = OrientedInterval(float(Phi(I.start)), float(Phi(I.end)))
    return RangeInfo((vmin, vmax), x_m, x_M, span)


def induce_partition(Phi: Map, P: Partition, require_monotone: bool = False
                     ) -> list[OrientedInterval]:
    """Oriented image cells ``[Phi(x_{k,l}), Phi(x_{k,r})]``, one per cell of P.

    With ``require_monotone`` the map must be monotone on P's base interval,
    in which case the cells tile ``Phi(I)`` in order.
    """
    if require_monotone:
        map_direction(Phi, (P.a, P.b))
    v = Phi(P.breakpoints)
    return [OrientedInterval(v[k], v[k + 1]) for k in range(P.n_cells)]


class _Composed:
    """``g(clip(Phi(x)))`` for one piece ``g`` of the outer function."""

    __slots__ = ("g", "Phi", "lo", "hi")

    def __init__(self, g, Phi, lo, hi):
        self.g, self.Phi, self.lo, self.hi = g, Phi, lo, hi

    def __call__(self, x):
        return self.g(np.clip(self.Phi(x), self.lo, self.hi))


def _combine(outer: str, inner: str) -> str:
    if outer == CONSTANT or inner == CONSTANT:
        return CONSTANT
    return INCREASING if outer == inner else DECREASING


def compose(f: PiecewiseMonotoneFn, Phi: Map, interval=None) -> PiecewiseMonotoneFn:
    """``f o Phi`` on ``interval`` (default: the domain of Phi).

    On each monotone segment of ``Phi`` the preimages of ``f``'s breakpoints
    are found by bisection; between consecutive cut points ``Phi`` is
    monotone and stays inside one piece of ``f``, so the composition is
    monotone there.  Point values at preimages of ``f``'s breakpoints are
    ``f``'s exact point values.
    """
    lo, hi = as_hull(interval) if interval is not None else Phi.domain
    segs = monotone_segments(Phi, lo, hi)
    flo, fhi = f.domain
    info = range_of(Phi, (lo, hi))
    ymin, ymax = info.range
    slack = 1e-9 * max(1.0, abs(ymin), abs(ymax))
    if ymin < flo - slack or ymax > fhi + slack:
        raise DomainError(f"range [{ymin!r}, {ymax!r}] of the map leaves the domain "
                          f"[{flo!r}, {fhi!r}] of the outer function")
    fx = f.breakpoints
    cut_x: list[float] = []
    cut_tag: list[int | None] = []

    def tag_for(y: float) -> int | None:
        j = int(np.argmin(np.abs(fx - y)))
        return j if abs(fx[j] - y) <= DEDUP_TOL * max(1.0, abs(y)) else None

    ends = np.array(sorted({s for s, _, _ in segs} | {t for _, t, _ in segs}))
    for x, y in zip(ends, Phi(ends)):
        cut_x.append(float(x))
        cut_tag.append(tag_for(float(y)))
    for s, t, d in segs:
        if d == CONSTANT:
            continue
        ys, yt = float(Phi(s)), float(Phi(t))
        ylo, yhi = min(ys, yt), max(ys, yt)
        tol = DEDUP_TOL * max(1.0, abs(ylo), abs(yhi))
        inner = np.nonzero((fx > ylo + tol) & (fx < yhi - tol))[0]
        if inner.size:
            xs = _bisect_monotone(Phi, s, t, fx[inner], increasing=d == INCREASING)
            cut_x.extend(float(v) for v in xs)
            cut_tag.extend(int(j) for j in inner)

    order = np.argsort(cut_x, kind="stable")
    pts: list[float] = []
    tags: list[int | None] = []
    for k in order:
        x, t = cut_x[k], cut_tag[k]
        if pts and x - pts[-1] <= DEDUP_TOL * max(1.0, abs(x)):
            if tags[-1] is None:
                tags[-1] = t
            continue
        pts.append(x)
        tags.append(t)
    pts[0], pts[-1] = lo, hi

    pts_arr = np.array(pts)
    yv = np.clip(Phi(pts_arr), flo, fhi)
    values = [float(f.values[t]) if t is not None else float(f(y)) for t, y in zip(tags, yv)]
    seg_starts = np.array([s for s, _, _ in segs])
    funcs, dirs = [], []
    mids = 0.5 * (pts_arr[:-1] + pts_arr[1:])
    ymids = np.clip(Phi(mids), flo, fhi)
    for xm, ym in zip(mids, ymids):
        j = f.piece_index(float(ym))
        seg = segs[int(np.clip(np.searchsorted(seg_starts, xm, "right") - 1, 0, len(segs) - 1))]
        funcs.append(_Composed(f.piece_func(j), Phi, flo, fhi))
        dirs.append(_combine(f.directions[j], seg[2]))
    return PiecewiseMonotoneFn(pts, funcs, values=values, directions=dirs)


class PullbackFn(BoundedFunction):
    """``g o Phi`` for a map ``Phi`` that is continuous and monotone on ``interval``.

    The image of a cell under such a map is the interval between the images
    of its ends, so cell bounds are ``g``'s bounds there.  This needs no
    root finding beyond locating the initial breakpoints, and lets the
    refinement engine reuse integrator values it already holds when ``Phi``
    is also the integrator.
    """

    def __init__(self, g: BoundedFunction, Phi: Map, interval=None):
        lo, hi = as_hull(interval) if interval is not None else Phi.domain
        self.g, self.Phi = g, Phi
        self.direction = map_direction(Phi, (lo, hi))
        self.domain = (lo, hi)
        y0, y1 = float(Phi(lo)), float(Phi(hi))
        ymin, ymax = min(y0, y1), max(y0, y1)
        glo, ghi = g.domain
        slack = 1e-9 * max(1.0, abs(ymin), abs(ymax))
        if ymin < glo - slack or ymax > ghi + slack:
            raise DomainError(f"range [{ymin!r}, {ymax!r}] of the map leaves the domain "
                              f"[{glo!r}, {ghi!r}] of the outer function")
        gb = np.asarray(g.breakpoints, dtype=float)
        inner = gb[(gb > ymin) & (gb < ymax)]
        if inner.size and self.direction != CONSTANT:
            xs = _bisect_monotone(Phi, lo, hi, inner, increasing=self.direction == INCREASING)
        else:
            xs = np.empty(0)
        self._breaks = _dedup(np.concatenate([[lo], np.sort(xs), [hi]]))

    def __call__(self, x):
        glo, ghi = self.g.domain
        return self.g(np.clip(self.Phi(x), glo, ghi))

    @property
    def breakpoints(self) -> np.ndarray:
        return self._breaks

    @property
    def global_bound(self) -> float:
        return self.g.global_bound

    def image_bounds(self, ya, yb, closed: bool = False):
        """Bounds of ``g`` between ``ya`` and ``yb`` (the images of cell ends)."""
        ya = np.asarray(ya, dtype=float)
        yb = np.asarray(yb, dtype=float)
        glo, ghi = self.g.domain
        y0 = np.clip(np.minimum(ya, yb), glo, ghi)
        y1 = np.clip(np.maximum(ya, yb), glo, ghi)
        return self.g.cell_bounds(y0, y1, closed)

    def cell_bounds(self, lefts, rights, closed: bool = False):
        l = np.atleast_1d(np.asarray(lefts, dtype=float))
        r = np.atleast_1d(np.asarray(rights, dtype=float))
        self._check_cells(l, r)
        return self.image_bounds(_call(self.Phi, l), _call(self.Phi, r), closed)
