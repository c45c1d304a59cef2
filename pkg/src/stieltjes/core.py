"""Oriented intervals, partitions, enclosures and piecewise-monotone functions.

Everything here is immutable after construction.  Functions are evaluated
with numpy and accept scalars or arrays.

Two conventions for per-cell bounds are supported:

* ``closed=True`` -- the true supremum/infimum over the closed cell
  ``[l, r]``, point values at ``l`` and ``r`` included.
* ``closed=False`` -- the least upper bound over the open cell ``(l, r)``.
  One-sided limits at ``l`` and ``r`` count, isolated point values at the
  cell ends do not.  Darboux sums use this convention: with a continuous
  integrator a single point carries no weight, and a jump sitting exactly on
  a partition point then contributes no oscillation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np

from .errors import DomainError

#: Absolute slack used when asserting inequalities that hold exactly in
#: real arithmetic but are evaluated in floating point.
EPS_M = 1e-12

INCREASING = "increasing"
DECREASING = "decreasing"
CONSTANT = "constant"
DIRECTIONS = (INCREASING, DECREASING, CONSTANT)


# ---------------------------------------------------------------------------
# intervals, partitions, enclosures


@dataclass(frozen=True)
class OrientedInterval:
    """An endpoint pair traversed from ``start`` to ``end``.

    ``start > end`` is allowed and means the interval is traversed
    backwards; integrals over it change sign.
    """

    start: float
    end: float

    def __post_init__(self):
        object.__setattr__(self, "start", float(self.start))
        object.__setattr__(self, "end", float(self.end))

    @property
    def sign(self) -> int:
        return 1 if self.start <= self.end else -1

    def hull(self) -> tuple[float, float]:
        return (min(self.start, self.end), max(self.start, self.end))

    @property
    def length(self) -> float:
        return abs(self.end - self.start)

    @property
    def is_degenerate(self) -> bool:
        return self.start == self.end

    def reversed(self) -> "OrientedInterval":
        return OrientedInterval(self.end, self.start)

    def to_list(self) -> list[float]:
        return [self.start, self.end]


def as_hull(interval) -> tuple[float, float]:
    """Unoriented ``(lo, hi)`` for an OrientedInterval or a pair."""
    if isinstance(interval, OrientedInterval):
        return interval.hull()
    lo, hi = interval
    lo, hi = float(lo), float(hi)
    return (lo, hi) if lo <= hi else (hi, lo)


def as_oriented(interval) -> OrientedInterval:
    if isinstance(interval, OrientedInterval):
        return interval
    a, b = interval
    return OrientedInterval(a, b)


class Partition:
    """Strictly increasing breakpoints ``x_0 < x_1 < ... < x_n``, n >= 1."""

    __slots__ = ("_x",)

    def __init__(self, breakpoints: Iterable[float]):
        x = np.array(list(breakpoints) if not isinstance(breakpoints, np.ndarray) else breakpoints,
                     dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("a partition needs at least two breakpoints")
        if not np.all(np.isfinite(x)):
            raise ValueError("partition breakpoints must be finite")
        if not np.all(np.diff(x) > 0):
            raise ValueError("partition breakpoints must be strictly increasing")
        x.flags.writeable = False
        self._x = x

    @classmethod
    def uniform(cls, a: float, b: float, n: int) -> "Partition":
        if n < 1:
            raise ValueError("n must be >= 1")
        return cls(np.linspace(a, b, n + 1))

    @property
    def breakpoints(self) -> np.ndarray:
        return self._x

    @property
    def a(self) -> float:
        return float(self._x[0])

    @property
    def b(self) -> float:
        return float(self._x[-1])

    @property
    def n_cells(self) -> int:
        return self._x.size - 1

    @property
    def lefts(self) -> np.ndarray:
        return self._x[:-1]

    @property
    def rights(self) -> np.ndarray:
        return self._x[1:]

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self._x)

    @property
    def mesh(self) -> float:
        return float(self.widths.max())

    def cells(self) -> list[tuple[float, float]]:
        return [(float(l), float(r)) for l, r in zip(self._x[:-1], self._x[1:])]

    def refine(self, other: "Partition | Iterable[float]") -> "Partition":
        """Common refinement: every breakpoint of both inputs."""
        pts = other.breakpoints if isinstance(other, Partition) else np.asarray(list(other), float)
        return Partition(np.union1d(self._x, pts))

    def insert(self, points: Iterable[float], tol: float = EPS_M) -> "Partition":
        """Add interior points, skipping any within ``tol`` of an existing one."""
        x = self._x
        new = []
        for p in points:
            p = float(p)
            if not (x[0] < p < x[-1]):
                continue
            i = np.searchsorted(x, p)
            if abs(x[i] - p) <= tol or abs(x[i - 1] - p) <= tol:
                continue
            if any(abs(q - p) <= tol for q in new):
                continue
            new.append(p)
        if not new:
            return self
        return Partition(np.sort(np.concatenate([x, new])))

    def is_finer_than(self, other: "Partition") -> bool:
        if self.a != other.a or self.b != other.b:
            return False
        return bool(np.all(np.isin(other.breakpoints, self._x)))

    def to_list(self) -> list[float]:
        return [float(v) for v in self._x]

    def __len__(self):
        return self.n_cells

    def __eq__(self, other):
        return isinstance(other, Partition) and np.array_equal(self._x, other._x)

    def __hash__(self):
        return hash(self._x.tobytes())

    def __repr__(self):
        if self._x.size <= 6:
            return f"Partition({self.to_list()})"
        return f"Partition([{self.a}, ..., {self.b}], n_cells={self.n_cells})"


@dataclass(frozen=True)
class Enclosure:
    """A bracket ``[lower, upper]`` around a real value."""

    lower: float
    upper: float

    def __post_init__(self):
        lo, hi = float(self.lower), float(self.upper)
        if math.isnan(lo) or math.isnan(hi):
            raise ValueError("enclosure bounds must not be NaN")
        if lo > hi:
            # Sums of exactly equal quantities can cross by a few ulps.
            if lo - hi > EPS_M * max(1.0, abs(lo), abs(hi)):
                raise ValueError(f"lower {lo!r} exceeds upper {hi!r}")
            lo = hi = 0.5 * (lo + hi)
        object.__setattr__(self, "lower", lo)
        object.__setattr__(self, "upper", hi)

    @classmethod
    def point(cls, value: float) -> "Enclosure":
        return cls(value, value)

    def width(self) -> float:
        return self.upper - self.lower

    @property
    def midpoint(self) -> float:
        return 0.5 * (self.lower + self.upper)

    def contains(self, value: float, tol: float = 0.0) -> bool:
        return self.lower - tol <= value <= self.upper + tol

    def overlaps(self, other: "Enclosure") -> bool:
        return max(self.lower, other.lower) <= min(self.upper, other.upper)

    def widen(self, amount: float) -> "Enclosure":
        return Enclosure(self.lower - amount, self.upper + amount)

    def scaled(self, factor: float) -> "Enclosure":
        lo, hi = self.lower * factor, self.upper * factor
        return Enclosure(min(lo, hi), max(lo, hi))

    def __neg__(self):
        return Enclosure(-self.upper, -self.lower)

    def __add__(self, other: "Enclosure") -> "Enclosure":
        return Enclosure(self.lower + other.lower, self.upper + other.upper)

    def to_dict(self) -> dict:
        return {"lower": self.lower, "upper": self.upper}


def sum_enclosures(items: Iterable[Enclosure]) -> Enclosure:
    items = list(items)
    return Enclosure(math.fsum(e.lower for e in items), math.fsum(e.upper for e in items))


# ---------------------------------------------------------------------------
# functions


def _as_array(x) -> tuple[np.ndarray, bool]:
    arr = np.asarray(x, dtype=float)
    return np.atleast_1d(arr), arr.ndim == 0


def _groups(idx: np.ndarray):
    """Yield ``(value, positions)`` for each distinct value of an integer array."""
    if idx.size == 0:
        return
    d = np.diff(idx)
    if (d >= 0).all():
        order = None
        s = idx
    else:
        # stable sorts of small integer keys run as a radix sort
        keys = idx.astype(np.int16) if idx.max() < 2 ** 15 and idx.min() >= 0 else idx
        order = np.argsort(keys, kind="stable")
        s = idx[order]
        d = np.diff(s)
    cuts = np.flatnonzero(d) + 1
    starts = np.concatenate([[0], cuts])
    ends = np.concatenate([cuts, [s.size]])
    for a, b in zip(starts.tolist(), ends.tolist()):
        pos = np.arange(a, b) if order is None else order[a:b]
        yield int(s[a]), pos


def _poly_coef(func) -> np.ndarray | None:
    """Power-basis coefficients if ``func`` is a (possibly negated) polynomial evaluator."""
    if isinstance(func, _PolyEval):
        return np.asarray(func.poly.coef, dtype=float)
    if isinstance(func, _Negated):
        inner = _poly_coef(func.func)
        return None if inner is None else -inner
    return None


def poly_matrix(funcs: Sequence[Callable]) -> np.ndarray | None:
    """Stack polynomial evaluators into a zero-padded ``(pieces, degree + 1)`` matrix.

    Returns None unless every evaluator is polynomial.
    """
    coefs = [_poly_coef(f) for f in funcs]
    if any(c is None for c in coefs):
        return None
    width = max(c.size for c in coefs)
    out = np.zeros((len(coefs), width))
    for i, c in enumerate(coefs):
        out[i, :c.size] = c
    # column-major so horner() gathers contiguous columns
    return np.asfortranarray(out)


def horner(coef: np.ndarray, idx: np.ndarray, xs: np.ndarray) -> np.ndarray:
    """Evaluate polynomial ``idx[k]`` (a row of ``coef``) at ``xs[k]``, all at once."""
    cols = coef.T
    out = cols[-1][idx]
    for k in range(coef.shape[1] - 2, -1, -1):
        out *= xs
        out += cols[k][idx]
    return out


def _call(func: Callable, xs: np.ndarray) -> np.ndarray:
    """Evaluate ``func`` on ``xs`` and return a float array shaped like ``xs``."""
    with np.errstate(all="ignore"):
        out = np.asarray(func(xs), dtype=float)
    if out.shape != xs.shape:
        out = np.broadcast_to(out, xs.shape).copy()
    return out


class BoundedFunction:
    """Interface shared by everything that can be integrated.

    Subclasses provide ``domain``, vectorized evaluation, the points where
    the function may be discontinuous (``breakpoints``), and per-cell upper
    and lower bounds.
    """

    domain: tuple[float, float]

    def __call__(self, x):
        raise NotImplementedError

    @property
    def breakpoints(self) -> np.ndarray:
        raise NotImplementedError

    @property
    def global_bound(self) -> float:
        raise NotImplementedError

    def cell_bounds(self, lefts, rights, closed: bool = False) -> tuple[np.ndarray, np.ndarray]:
        raise NotImplementedError

    def _check_cells(self, l: np.ndarray, r: np.ndarray):
        lo, hi = self.domain
        if np.any(l > r):
            raise ValueError("cell with left end beyond right end")
        if l.size and (l.min() < lo or r.max() > hi):
            raise DomainError(
                f"cells [{l.min()!r}, {r.max()!r}] leave the domain [{lo!r}, {hi!r}]")

    def __mul__(self, other: "BoundedFunction") -> "ProductFn":
        left = self.factors if isinstance(self, ProductFn) else (self,)
        right = other.factors if isinstance(other, ProductFn) else (other,)
        return ProductFn(left + right)


@dataclass(frozen=True)
class Piece:
    lo: float
    hi: float
    direction: str
    func: Callable
    left_value: float
    right_value: float


class PiecewiseMonotoneFn(BoundedFunction):
    """A bounded function made of finitely many monotone pieces.

    Piece ``i`` lives on ``[x_i, x_{i+1}]``.  Its evaluator ``funcs[i]`` must
    be monotone there and defined on the closed interval, where its values
    at the two ends are the one-sided limits of the function.  The value *at*
    each breakpoint is stored separately in ``values`` (default: right
    continuous, and left continuous at the last point), so jumps are
    described exactly.

    Because every piece is monotone, the supremum and infimum over any cell
    are attained among piece end values and point values, which makes
    :meth:`cell_bounds` exact.

    ``antiderivatives`` optionally gives, per piece, a vectorized primitive
    of the piece evaluator; :class:`~stieltjes.stieltjes_map.IndefiniteIntegral`
    uses it instead of quadrature.
    """

    def __init__(self, breakpoints: Sequence[float], funcs: Sequence[Callable],
                 values: Sequence[float] | None = None,
                 directions: Sequence[str] | None = None,
                 antiderivatives: Sequence[Callable | None] | None = None):
        x = np.asarray(breakpoints, dtype=float)
        if x.ndim != 1 or x.size < 2:
            raise ValueError("need at least two breakpoints")
        if not np.all(np.diff(x) > 0):
            raise ValueError("breakpoints must be strictly increasing")
        m = x.size - 1
        if len(funcs) != m:
            raise ValueError(f"expected {m} piece evaluators, got {len(funcs)}")
        x.flags.writeable = False
        self._x = x
        self._funcs = tuple(funcs)
        self.domain = (float(x[0]), float(x[-1]))

        left = np.array([_call(f, x[i:i + 1])[0] for i, f in enumerate(funcs)])
        right = np.array([_call(f, x[i + 1:i + 2])[0] for i, f in enumerate(funcs)])
        if not (np.all(np.isfinite(left)) and np.all(np.isfinite(right))):
            raise ValueError("piece evaluators must be finite at their end points")
        self._left = left
        self._right = right

        if values is None:
            vals = np.append(left, right[-1])
        else:
            vals = np.asarray(values, dtype=float)
            if vals.shape != (m + 1,):
                raise ValueError(f"expected {m + 1} point values")
            if not np.all(np.isfinite(vals)):
                raise ValueError("point values must be finite")
        vals.flags.writeable = False
        self._values = vals

        detected = []
        for i in range(m):
            if left[i] < right[i]:
                detected.append(INCREASING)
            elif left[i] > right[i]:
                detected.append(DECREASING)
            else:
                detected.append(CONSTANT)
        if directions is None:
            dirs = detected
        else:
            dirs = list(directions)
            if len(dirs) != m:
                raise ValueError("one direction per piece required")
            for i, (d, auto) in enumerate(zip(dirs, detected)):
                if d not in DIRECTIONS:
                    raise ValueError(f"unknown direction {d!r}")
                if d == auto or auto == CONSTANT:
                    continue
                # tiny pieces can disagree with the declared direction by rounding only
                if abs(left[i] - right[i]) > 1e-9 * max(1.0, abs(left[i]), abs(right[i])):
                    raise ValueError(f"piece {i} declared {d} but its end values say {auto}")
        self._dirs = tuple(dirs)
        if antiderivatives is not None and len(antiderivatives) != m:
            raise ValueError("one antiderivative (or None) per piece required")
        self._antiderivatives = tuple(antiderivatives) if antiderivatives is not None else (None,) * m
        self._bound = float(max(np.abs(left).max(), np.abs(right).max(), np.abs(vals).max()))
        self._coef = poly_matrix(self._funcs)

    def _eval_pieces(self, idx: np.ndarray, xs: np.ndarray) -> np.ndarray:
        """Evaluate piece ``idx[k]`` at ``xs[k]``."""
        if self._coef is not None:
            return horner(self._coef, idx, xs)
        out = np.empty_like(xs)
        for i, pos in _groups(idx):
            out[pos] = _call(self._funcs[i], xs[pos])
        return out

    # -- construction helpers -------------------------------------------------

    @classmethod
    def constant(cls, c: float, a: float, b: float) -> "PiecewiseMonotoneFn":
        c = float(c)
        poly = np.polynomial.Polynomial([c])
        return cls([a, b], [_PolyEval(poly)], antiderivatives=[_PolyEval(poly.integ())])

    @classmethod
    def identity(cls, a: float, b: float) -> "PiecewiseMonotoneFn":
        return cls.polynomial([1.0, 0.0][::-1], a, b)

    @classmethod
    def polynomial(cls, coef: Sequence[float], a: float, b: float) -> "PiecewiseMonotoneFn":
        """A polynomial (coefficients in increasing degree) split at its extrema."""
        poly = np.polynomial.Polynomial(coef)
        crit = [float(r.real) for r in poly.deriv().roots()
                if abs(r.imag) <= 1e-12 and a < r.real < b] if poly.degree() >= 2 else []
        pts = sorted(set([float(a), float(b)] + crit))
        ev, anti = _PolyEval(poly), _PolyEval(poly.integ())
        return cls(pts, [ev] * (len(pts) - 1), antiderivatives=[anti] * (len(pts) - 1))

    @classmethod
    def step(cls, c: float, a: float, b: float, low: float = 0.0, high: float = 1.0
             ) -> "PiecewiseMonotoneFn":
        """``low`` for x < c and ``high`` for x >= c."""
        if c <= a:
            return cls.constant(high, a, b)
        if c > b:
            return cls.constant(low, a, b)
        if c == b:
            f = cls.constant(low, a, b)
            return cls([a, b], f._funcs, values=[low, high], antiderivatives=f._antiderivatives)
        lo_poly, hi_poly = np.polynomial.Polynomial([low]), np.polynomial.Polynomial([high])
        return cls([a, c, b], [_PolyEval(lo_poly), _PolyEval(hi_poly)],
                   values=[low, high, high],
                   antiderivatives=[_PolyEval(lo_poly.integ()), _PolyEval(hi_poly.integ())])

    @classmethod
    def from_callable(cls, func: Callable, breakpoints: Sequence[float],
                      directions: Sequence[str] | None = None,
                      values: Sequence[float] | None = None) -> "PiecewiseMonotoneFn":
        """Use one continuous evaluator for every piece."""
        m = len(breakpoints) - 1
        return cls(breakpoints, [func] * m, values=values, directions=directions)

    @classmethod
    def piecewise_linear(cls, xs: Sequence[float], ys: Sequence[float],
                         jumps: dict[int, tuple[float, float]] | None = None
                         ) -> "PiecewiseMonotoneFn":
        """Linear interpolation of ``(xs, ys)``.

        ``jumps`` maps an interior breakpoint index ``j`` to ``(right_limit,
        point_value)``; ``ys[j]`` is then the left limit at ``xs[j]``.
        """
        xs = np.asarray(xs, float)
        ys = np.asarray(ys, float)
        jumps = jumps or {}
        polys, antis = [], []
        values = list(ys)
        for i in range(xs.size - 1):
            y0 = jumps[i][0] if i in jumps else ys[i]
            y1 = ys[i + 1]
            slope = (y1 - y0) / (xs[i + 1] - xs[i])
            poly = np.polynomial.Polynomial([y0 - slope * xs[i], slope])
            polys.append(_PolyEval(poly))
            antis.append(_PolyEval(poly.integ()))
        for j, (_, pv) in jumps.items():
            values[j] = pv
        return cls(xs, polys, values=values, antiderivatives=antis)

    @classmethod
    def piecewise_polynomial(cls, xs: Sequence[float], coefs: Sequence[Sequence[float]],
                             values: Sequence[float] | None = None) -> "PiecewiseMonotoneFn":
        """One polynomial per piece; each must be monotone on its piece."""
        xs = np.asarray(xs, float)
        evs, antis = [], []
        for i, c in enumerate(coefs):
            poly = np.polynomial.Polynomial(c)
            if poly.degree() >= 2:
                for r in poly.deriv().roots():
                    if abs(r.imag) <= 1e-12 and xs[i] < r.real < xs[i + 1]:
                        d2 = poly.deriv()
                        lo_s = np.sign(d2(xs[i] + 0.5 * (r.real - xs[i])))
                        hi_s = np.sign(d2(r.real + 0.5 * (xs[i + 1] - r.real)))
                        if lo_s * hi_s < 0:
                            raise ValueError(f"piece {i} is not monotone")
            evs.append(_PolyEval(poly))
            antis.append(_PolyEval(poly.integ()))
        return cls(xs, evs, values=values, antiderivatives=antis)

    # -- accessors ------------------------------------------------------------

    @property
    def breakpoints(self) -> np.ndarray:
        return self._x

    @property
    def values(self) -> np.ndarray:
        return self._values

    @property
    def directions(self) -> tuple[str, ...]:
        return self._dirs

    @property
    def n_pieces(self) -> int:
        return len(self._funcs)

    @property
    def pieces(self) -> list[Piece]:
        return [Piece(float(self._x[i]), float(self._x[i + 1]), self._dirs[i], self._funcs[i],
                      float(self._left[i]), float(self._right[i]))
                for i in range(self.n_pieces)]

    @property
    def global_bound(self) -> float:
        return self._bound

    def piece_func(self, i: int) -> Callable:
        return self._funcs[i]

    def piece_antiderivative(self, i: int) -> Callable | None:
        return self._antiderivatives[i]

    def eval_piece(self, i: int, xs) -> np.ndarray:
        """Evaluate the continuous extension of piece ``i``."""
        return _call(self._funcs[i], np.asarray(xs, dtype=float))

    def piece_index(self, x: float) -> int:
        """Index of the piece whose half-open span ``[x_i, x_{i+1})`` holds x."""
        return int(np.clip(np.searchsorted(self._x, x, "right") - 1, 0, self.n_pieces - 1))

    def left_limit(self, j: int) -> float:
        """Limit from the left at breakpoint ``j`` (j >= 1)."""
        return float(self._right[j - 1])

    def right_limit(self, j: int) -> float:
        """Limit from the right at breakpoint ``j`` (j < n_pieces)."""
        return float(self._left[j])

    def jumps(self, tol: float = 0.0) -> list[float]:
        """Breakpoints where the function is not continuous."""
        out = []
        for j in range(self._x.size):
            vals = [self._values[j]]
            if j > 0:
                vals.append(self._right[j - 1])
            if j < self.n_pieces:
                vals.append(self._left[j])
            if max(vals) - min(vals) > tol:
                out.append(float(self._x[j]))
        return out

    def is_continuous(self, tol: float = 0.0) -> bool:
        return not self.jumps(tol)

    # -- evaluation -------------------------------------------------------------

    def __call__(self, x):
        xa, scalar = _as_array(x)
        lo, hi = self.domain
        if xa.size and (xa.min() < lo or xa.max() > hi or np.isnan(xa).any()):
            raise DomainError(f"evaluation outside the domain [{lo!r}, {hi!r}]")
        idx = np.clip(np.searchsorted(self._x, xa, "right") - 1, 0, self.n_pieces - 1)
        out = self._eval_pieces(idx, xa)
        pos = np.clip(np.searchsorted(self._x, xa), 0, self._x.size - 1)
        hit = self._x[pos] == xa
        out[hit] = self._values[pos[hit]]
        return float(out[0]) if scalar else out

    def cell_bounds(self, lefts, rights, closed: bool = False):
        """Exact supremum and infimum over each cell ``[lefts[k], rights[k]]``.

        See the module docstring for the meaning of ``closed``.  Degenerate
        cells (left == right) return the point value.
        """
        l = np.atleast_1d(np.asarray(lefts, dtype=float))
        r = np.atleast_1d(np.asarray(rights, dtype=float))
        self._check_cells(l, r)
        m = self.n_pieces
        x = self._x
        sup = np.empty_like(l)
        inf = np.empty_like(l)
        il = np.clip(np.searchsorted(x, l, "right") - 1, 0, m - 1)
        ir = np.clip(np.searchsorted(x, r, "left") - 1, 0, m - 1)
        proper = l < r
        single = proper & (il == ir)
        if single.all():
            g_l, g_r = self._eval_pieces(il, l), self._eval_pieces(il, r)
            sup, inf = np.maximum(g_l, g_r), np.minimum(g_l, g_r)
        elif single.any():
            ii = il[single]
            g_l, g_r = self._eval_pieces(ii, l[single]), self._eval_pieces(ii, r[single])
            sup[single] = np.maximum(g_l, g_r)
            inf[single] = np.minimum(g_l, g_r)
        for k in np.nonzero(proper & (il != ir))[0]:
            s, t = self._span_bounds(l[k], r[k], int(il[k]), int(ir[k]))
            sup[k], inf[k] = s, t
        degenerate = ~proper
        if degenerate.any():
            pv = self(l[degenerate])
            sup[degenerate] = pv
            inf[degenerate] = pv
        if closed:
            fl = self(l)
            fr = self(r)
            sup = np.maximum(sup, np.maximum(fl, fr))
            inf = np.minimum(inf, np.minimum(fl, fr))
        return sup, inf

    def _span_bounds(self, lo: float, hi: float, i0: int, i1: int) -> tuple[float, float]:
        x = self._x
        vals = []
        for i in range(i0, i1 + 1):
            a = max(lo, x[i])
            b = min(hi, x[i + 1])
            if a < b:
                vals.extend(_call(self._funcs[i], np.array([a, b])))
        for j in range(i0 + 1, i1 + 1):
            if lo < x[j] < hi:
                vals.append(self._values[j])
        return float(max(vals)), float(min(vals))

    # -- transformations ------------------------------------------------------

    def restrict(self, a: float, b: float) -> "PiecewiseMonotoneFn":
        """The same function on the sub-domain ``[a, b]``."""
        lo, hi = self.domain
        if a < lo or b > hi or not a < b:
            raise DomainError(f"[{a!r}, {b!r}] is not a proper sub-interval of [{lo!r}, {hi!r}]")
        inner = [float(v) for v in self._x if a < v < b]
        pts = [float(a)] + inner + [float(b)]
        funcs, dirs, antis, vals = [], [], [], []
        for p, q in zip(pts[:-1], pts[1:]):
            i = self.piece_index(0.5 * (p + q))
            funcs.append(self._funcs[i])
            dirs.append(self._dirs[i])
            antis.append(self._antiderivatives[i])
        vals = list(self(np.array(pts)))
        return PiecewiseMonotoneFn(pts, funcs, values=vals, directions=dirs, antiderivatives=antis)

    def negated(self) -> "PiecewiseMonotoneFn":
        flip = {INCREASING: DECREASING, DECREASING: INCREASING, CONSTANT: CONSTANT}
        funcs = [_Negated(f) for f in self._funcs]
        antis = [None if g is None else _Negated(g) for g in self._antiderivatives]
        return PiecewiseMonotoneFn(self._x, funcs, values=-self._values,
                                   directions=[flip[d] for d in self._dirs], antiderivatives=antis)

    def check_monotone(self, samples: int = 100, tol: float = EPS_M) -> None:
        """Raise ValueError if sampling contradicts a piece's direction."""
        for i, p in enumerate(self.pieces):
            xs = np.linspace(p.lo, p.hi, samples)
            ys = _call(p.func, xs)
            d = np.diff(ys)
            scale = tol * max(1.0, float(np.abs(ys).max()))
            if p.direction == INCREASING and d.min() < -scale:
                raise ValueError(f"piece {i} on [{p.lo}, {p.hi}] is not increasing")
            if p.direction == DECREASING and d.max() > scale:
                raise ValueError(f"piece {i} on [{p.lo}, {p.hi}] is not decreasing")
            if p.direction == CONSTANT and np.abs(d).max() > scale:
                raise ValueError(f"piece {i} on [{p.lo}, {p.hi}] is not constant")

    def __repr__(self):
        return (f"PiecewiseMonotoneFn(domain={self.domain}, pieces={self.n_pieces}, "
                f"directions={list(self._dirs)})")


class ProductFn(BoundedFunction):
    """Pointwise product of bounded functions.

    A product of monotone functions need not be monotone, so cell bounds are
    the interval product of the factors' exact bounds.  They are valid (they
    bracket the true sup/inf), shrink to the true values as cells shrink for
    continuous factors, and are inclusion monotone, which is what the Darboux
    machinery needs.
    """

    def __init__(self, factors: Sequence[BoundedFunction]):
        if not factors:
            raise ValueError("need at least one factor")
        self.factors = tuple(factors)
        lo = max(f.domain[0] for f in factors)
        hi = min(f.domain[1] for f in factors)
        if not lo < hi:
            raise DomainError("factors have no common domain")
        self.domain = (lo, hi)

    def __call__(self, x):
        out = self.factors[0](x)
        for f in self.factors[1:]:
            out = out * f(x)
        return out

    @property
    def breakpoints(self) -> np.ndarray:
        lo, hi = self.domain
        pts = np.unique(np.concatenate([f.breakpoints for f in self.factors]))
        return pts[(pts >= lo) & (pts <= hi)]

    @property
    def global_bound(self) -> float:
        return float(np.prod([f.global_bound for f in self.factors]))

    def cell_bounds(self, lefts, rights, closed: bool = False):
        sup, inf = self.factors[0].cell_bounds(lefts, rights, closed)
        for f in self.factors[1:]:
            s2, i2 = f.cell_bounds(lefts, rights, closed)
            a, b, c, d = sup * s2, sup * i2, inf * s2, inf * i2
            sup = np.maximum(np.maximum(a, b), np.maximum(c, d))
            inf = np.minimum(np.minimum(a, b), np.minimum(c, d))
        return sup, inf


class _PolyEval:
    """Picklable vectorized polynomial evaluator."""

    __slots__ = ("poly",)

    def __init__(self, poly: np.polynomial.Polynomial):
        self.poly = poly

    def __call__(self, x):
        return np.polynomial.polynomial.polyval(x, self.poly.coef)

    def __repr__(self):
        return f"_PolyEval({list(self.poly.coef)})"


class _Negated:
    __slots__ = ("func",)

    def __init__(self, func):
        self.func = func

    def __call__(self, x):
        return -np.asarray(self.func(x), dtype=float)


# ---------------------------------------------------------------------------
# pointwise operations


def sup_on(f: BoundedFunction, interval, closed: bool = True) -> float:
    """Supremum of ``f`` over an interval (exact for piecewise-monotone ``f``)."""
    lo, hi = as_hull(interval)
    return float(f.cell_bounds([lo], [hi], closed)[0][0])


def inf_on(f: BoundedFunction, interval, closed: bool = True) -> float:
    lo, hi = as_hull(interval)
    return float(f.cell_bounds([lo], [hi], closed)[1][0])


def oscillation(f: BoundedFunction, interval, closed: bool = True) -> float:
    """``sup - inf`` of ``f`` over the interval."""
    lo, hi = as_hull(interval)
    s, i = f.cell_bounds([lo], [hi], closed)
    return max(float(s[0] - i[0]), 0.0)


def abs_bound_on(f: BoundedFunction, interval) -> float:
    """``sup |f|`` over the closed interval."""
    lo, hi = as_hull(interval)
    s, i = f.cell_bounds([lo], [hi], True)
    return float(max(abs(s[0]), abs(i[0])))


def split_interval(interval, x: float) -> tuple[tuple[float, float], tuple[float, float]]:
    """Split ``[l, r]`` at an interior point into ``[l, x]`` and ``[x, r]``.

    For any bounded ``f`` the weighted oscillation does not grow:
    ``osc(f, J_l)|J_l| + osc(f, J_r)|J_r| <= osc(f, J)|J|``.
    """
    lo, hi = as_hull(interval)
    if not lo < x < hi:
        raise ValueError(f"split point {x!r} is not interior to [{lo!r}, {hi!r}]")
    return (lo, float(x)), (float(x), hi)
