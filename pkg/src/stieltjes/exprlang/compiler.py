"""Compile expression ASTs to :class:`~stieltjes.core.PiecewiseMonotoneFn`.

The compiler finds the points where the function may turn or jump and cuts
the domain there, so every piece is monotone.  Points come from exact rules
wherever one applies:

* polynomial subexpressions: roots of the derivative (closed form up to a
  quadratic derivative, nested bisection on monotone brackets above);
* ``sin``/``cos`` of a piecewise-monotone argument: the argument crossing
  the levels where the derivative of the outer function vanishes;
* monotone outer functions (``exp``, ``log``, odd and fractional powers):
  the pieces of the argument;
* ``abs``, ``min``, ``max``, even powers, products: roots of the relevant
  subexpressions;
* ``step`` and ``piecewise``: the condition boundaries, which become jumps.

Sums and products of pieces that move in opposite directions have no exact
rule; there the compiler samples the function and polishes local extrema,
and marks the result ``certified=False``.

Branch selection is evaluated at a *reference* point rather than at the
evaluation point.  Fixing the reference inside a piece gives the branch that
is active on the open piece, which yields correct one-sided limits at its
ends even where ``step`` or ``piecewise`` jump.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..core import EPS_M, PiecewiseMonotoneFn, _PolyEval
from ..errors import DomainError
from .parser import BinOp, Call, Compare, Const, Expr, Neg, Num, Var, parse, to_source

_SAMPLES = 1025
_MAX_INT_POWER = 16
_DEDUP_REL = 1e-12


# -- evaluation -----------------------------------------------------------------

def _compare(op: str, a, b):
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    return a >= b


def evaluate(node: Expr, x, ref=None) -> np.ndarray:
    """Evaluate ``node`` at ``x`` with branches chosen at ``ref`` (default ``x``).

    Undefined operations produce ``nan`` rather than raising; domain
    problems are caught when compiling.
    """
    x = np.asarray(x, dtype=float)
    ref = x if ref is None else np.broadcast_to(np.asarray(ref, dtype=float), x.shape)
    with np.errstate(all="ignore"):
        return np.broadcast_to(_ev(node, x, ref), x.shape).astype(float)


def _ev(node, x, ref):
    if isinstance(node, Num):
        return np.float64(node.value)
    if isinstance(node, Const):
        return np.float64(node.value)
    if isinstance(node, Var):
        return x
    if isinstance(node, Neg):
        return -_ev(node.operand, x, ref)
    if isinstance(node, BinOp):
        a = _ev(node.left, x, ref)
        b = _ev(node.right, x, ref)
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if node.op == "/":
            return a / b
        return np.power(a, b)
    if isinstance(node, Call):
        return _call(node, x, ref)
    raise TypeError(f"cannot evaluate {node!r}")


def _call(node: Call, x, ref):
    name, args = node.name, node.args
    if name == "step":
        c = _ev(args[0], x, ref)
        return np.where(ref >= c, 1.0, 0.0)
    if name == "piecewise":
        return _piecewise(args, x, ref)
    vals = [_ev(a, x, ref) for a in args]
    if name == "sin":
        return np.sin(vals[0])
    if name == "cos":
        return np.cos(vals[0])
    if name == "exp":
        return np.exp(vals[0])
    if name == "log":
        return np.log(vals[0])
    if name == "abs":
        return np.abs(vals[0])
    if name == "min":
        return _fold(np.minimum, vals)
    if name == "max":
        return _fold(np.maximum, vals)
    raise TypeError(f"unknown function {name!r}")


def _fold(op, vals):
    out = vals[0]
    for v in vals[1:]:
        out = op(out, v)
    return out


def _piecewise(args, x, ref):
    out = np.full(np.shape(ref), np.nan)
    done = np.zeros(np.shape(ref), dtype=bool)
    pairs = len(args) // 2
    for k in range(pairs):
        cond, val = args[2 * k], args[2 * k + 1]
        hit = _compare(cond.op, _ev(cond.left, ref, ref), _ev(cond.right, ref, ref))
        hit = np.broadcast_to(hit, done.shape) & ~done
        if hit.any():
            out = np.where(hit, _ev(val, x, ref), out)
        done |= hit
    if len(args) % 2:
        out = np.where(done, out, _ev(args[-1], x, ref))
    return out


# -- structure helpers ------------------------------------------------------------

def is_constant(node: Expr) -> bool:
    if isinstance(node, Var):
        return False
    if isinstance(node, Call) and node.name == "step":
        return False
    if isinstance(node, (Num, Const)):
        return True
    if isinstance(node, Neg):
        return is_constant(node.operand)
    if isinstance(node, (BinOp, Compare)):
        return is_constant(node.left) and is_constant(node.right)
    if isinstance(node, Call):
        return all(is_constant(a) for a in node.args)
    return False


def constant_value(node: Expr) -> float:
    return float(evaluate(node, np.zeros(1))[0])


def to_polynomial(node: Expr, ref: float | None = None) -> np.polynomial.Polynomial | None:
    """The polynomial ``node`` denotes, or ``None``.

    With ``ref`` given, ``step`` and ``piecewise`` resolve to the branch
    active at ``ref`` first.
    """
    P = np.polynomial.Polynomial
    if is_constant(node):
        v = constant_value(node)
        return P([v]) if math.isfinite(v) else None
    if isinstance(node, Var):
        return P([0.0, 1.0])
    if isinstance(node, Neg):
        p = to_polynomial(node.operand, ref)
        return None if p is None else -p
    if isinstance(node, BinOp):
        a = to_polynomial(node.left, ref)
        if node.op == "^":
            if a is None or not is_constant(node.right):
                return None
            k = constant_value(node.right)
            if k != int(k) or not 0 <= k <= _MAX_INT_POWER:
                return None
            return a ** int(k)
        b = to_polynomial(node.right, ref)
        if a is None or b is None:
            return None
        if node.op == "+":
            return a + b
        if node.op == "-":
            return a - b
        if node.op == "*":
            return a * b
        if b.degree() == 0 and b.coef[0] != 0:
            return a / b.coef[0]
        return None
    if isinstance(node, Call) and ref is not None:
        if node.name == "step":
            return P([float(evaluate(node, np.array([ref]))[0])])
        if node.name == "piecewise":
            chosen = _active_branch(node, ref)
            return None if chosen is None else to_polynomial(chosen, ref)
    return None


def _active_branch(node: Call, ref: float) -> Expr | None:
    args = node.args
    r = np.array([ref])
    for k in range(len(args) // 2):
        cond = args[2 * k]
        if _compare(cond.op, evaluate(cond.left, r)[0], evaluate(cond.right, r)[0]):
            return args[2 * k + 1]
    return args[-1] if len(args) % 2 else None


def _quadratic_roots(c0: float, c1: float, c2: float) -> list[float]:
    if c2 == 0:
        return [] if c1 == 0 else [-c0 / c1]
    disc = c1 * c1 - 4 * c2 * c0
    if disc < 0:
        return []
    if disc == 0:
        return [-c1 / (2 * c2)]
    # numerically stable pair
    q = -0.5 * (c1 + math.copysign(math.sqrt(disc), c1))
    return sorted([q / c2, c0 / q]) if q != 0 else [0.0]


def _bisect(func, lo: float, hi: float, flo: float) -> float:
    """Root of ``func`` in ``[lo, hi]`` given ``func(lo) = flo`` of opposite sign to ``func(hi)``."""
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            break
        fm = func(mid)
        if fm == 0:
            return mid
        if (fm < 0) == (flo < 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return 0.5 * (lo + hi)


def polynomial_roots(p: np.polynomial.Polynomial, lo: float, hi: float) -> list[float]:
    """Real roots of ``p`` in ``[lo, hi]`` where ``p`` changes sign or touches zero.

    Degree two and below use closed forms.  Above that the roots of ``p'``
    split ``[lo, hi]`` into brackets on which ``p`` is monotone, and each
    bracket holding a sign change is bisected.
    """
    c = np.trim_zeros(np.asarray(p.coef, dtype=float), "b")
    if c.size <= 1:
        return []
    if c.size <= 3:
        c = np.pad(c, (0, 3 - c.size))
        return [r for r in _quadratic_roots(*c) if lo <= r <= hi]
    crit = polynomial_roots(p.deriv(), lo, hi)
    edges = [lo] + crit + [hi]
    roots = []
    f = lambda t: float(p(t))
    for u, v in zip(edges[:-1], edges[1:]):
        fu, fv = f(u), f(v)
        if fu == 0:
            roots.append(u)
        elif fu * fv < 0:
            roots.append(_bisect(f, u, v, fu))
    if f(hi) == 0:
        roots.append(hi)
    # an extremum touching zero is a root too
    roots += [t for t in crit if abs(f(t)) <= EPS_M * max(1.0, np.abs(c).max())]
    return sorted(set(roots))


def _dedup(points, lo: float, hi: float) -> np.ndarray:
    pts = np.unique(np.clip(np.asarray(points, dtype=float), lo, hi))
    tol = _DEDUP_REL * max(1.0, abs(lo), abs(hi))
    keep = [lo]
    for p in pts:
        if p - keep[-1] > tol:
            keep.append(float(p))
    if hi - keep[-1] <= tol:
        keep[-1] = hi
    else:
        keep.append(hi)
    if len(keep) == 1:
        keep.append(hi)
    return np.array(keep)


# -- analysis ---------------------------------------------------------------------

@dataclass(frozen=True)
class _Pieces:
    """Breakpoints of a subexpression on ``[lo, hi]``; monotone between them."""

    points: np.ndarray
    certified: bool


class _Analyzer:
    def __init__(self):
        self._memo: dict = {}

    # public entry points

    def pieces(self, node: Expr, lo: float, hi: float) -> _Pieces:
        key = (node, lo, hi)
        if key not in self._memo:
            self._memo[key] = self._pieces(node, lo, hi)
        return self._memo[key]

    def limits(self, node: Expr, pts: np.ndarray):
        """One-sided limits at the ends of each piece (evaluated with the
        branch active in the piece)."""
        mids = 0.5 * (pts[:-1] + pts[1:])
        left = evaluate(node, pts[:-1], mids)
        right = evaluate(node, pts[1:], mids)
        return left, right

    def value_range(self, node: Expr, lo: float, hi: float) -> tuple[float, float]:
        pc = self.pieces(node, lo, hi)
        left, right = self.limits(node, pc.points)
        point = evaluate(node, pc.points)
        allv = np.concatenate([left, right, point])
        if not np.all(np.isfinite(allv)):
            raise DomainError(f"{to_source(node)} is undefined somewhere on [{lo!r}, {hi!r}]")
        return float(allv.min()), float(allv.max())

    def roots(self, node: Expr, lo: float, hi: float) -> tuple[list[float], bool]:
        """Points in ``[lo, hi]`` where ``node`` crosses or touches zero inside a piece."""
        pc = self.pieces(node, lo, hi)
        pts = pc.points
        left, right = self.limits(node, pts)
        out = []
        for i in range(pts.size - 1):
            p, q = float(pts[i]), float(pts[i + 1])
            fl, fr = float(left[i]), float(right[i])
            if fl == 0:
                out.append(p)
            if fr == 0:
                out.append(q)
            if fl * fr < 0:
                mid = 0.5 * (p + q)
                f = lambda t, m=mid: float(evaluate(node, np.array([t]), np.array([m]))[0])
                out.append(_bisect(f, p, q, fl))
        return out, pc.certified

    def level_crossings(self, node: Expr, lo: float, hi: float, offset: float,
                        period: float) -> tuple[list[float], bool]:
        """Points where ``node`` equals ``offset + k * period`` for integer ``k``."""
        pc = self.pieces(node, lo, hi)
        pts = pc.points
        left, right = self.limits(node, pts)
        out = []
        for i in range(pts.size - 1):
            p, q = float(pts[i]), float(pts[i + 1])
            a, b = sorted((float(left[i]), float(right[i])))
            if not (math.isfinite(a) and math.isfinite(b)):
                raise DomainError(f"{to_source(node)} is undefined on [{p!r}, {q!r}]")
            k0 = math.ceil((a - offset) / period)
            k1 = math.floor((b - offset) / period)
            if k1 - k0 > 10 ** 6:
                raise DomainError("argument of a trigonometric function oscillates too fast")
            mid = 0.5 * (p + q)
            for k in range(k0, k1 + 1):
                level = offset + k * period
                f = lambda t, m=mid, c=level: float(
                    evaluate(node, np.array([t]), np.array([m]))[0]) - c
                fl, fr = f(p), f(q)
                if fl == 0:
                    out.append(p)
                elif fr == 0:
                    out.append(q)
                elif fl * fr < 0:
                    out.append(_bisect(f, p, q, fl))
        return out, pc.certified

    # rules

    def _pieces(self, node: Expr, lo: float, hi: float) -> _Pieces:
        ends = [lo, hi]
        if is_constant(node):
            v = constant_value(node)
            if not math.isfinite(v):
                raise DomainError(f"{to_source(node)} is undefined")
            return _Pieces(_dedup(ends, lo, hi), True)
        poly = to_polynomial(node)
        if poly is not None:
            return _Pieces(_dedup(ends + polynomial_roots(poly.deriv(), lo, hi), lo, hi), True)
        if isinstance(node, Var):
            return _Pieces(_dedup(ends, lo, hi), True)
        if isinstance(node, Neg):
            return self.pieces(node.operand, lo, hi)
        if isinstance(node, BinOp):
            return self._binop(node, lo, hi)
        if isinstance(node, Call):
            return self._call(node, lo, hi)
        raise TypeError(f"cannot compile {node!r}")

    def _merge(self, *parts: _Pieces, extra=(), lo, hi) -> _Pieces:
        pts = np.concatenate([p.points for p in parts] + [np.asarray(list(extra), float)])
        return _Pieces(_dedup(pts, lo, hi), all(p.certified for p in parts))

    def _binop(self, node: BinOp, lo: float, hi: float) -> _Pieces:
        a, b, op = node.left, node.right, node.op
        if op in "+-":
            if is_constant(a):
                return self.pieces(b, lo, hi)
            if is_constant(b):
                return self.pieces(a, lo, hi)
            merged = self._merge(self.pieces(a, lo, hi), self.pieces(b, lo, hi), lo=lo, hi=hi)
            return self._settle(node, merged, lo, hi, lambda l, r: _sum_direction(l, r, op))
        if op in "*/":
            if op == "/":
                blo, bhi = self.value_range(b, lo, hi)
                if blo <= 0 <= bhi:
                    raise DomainError(f"division by {to_source(b)}, which reaches 0 on [{lo!r}, {hi!r}]")
            if is_constant(b):
                return self.pieces(a, lo, hi)
            if is_constant(a) and op == "*":
                return self.pieces(b, lo, hi)
            ra, ca = self.roots(a, lo, hi)
            rb, cb = self.roots(b, lo, hi) if op == "*" else ([], True)
            merged = self._merge(self.pieces(a, lo, hi), self.pieces(b, lo, hi),
                                 extra=ra + rb, lo=lo, hi=hi)
            merged = _Pieces(merged.points, merged.certified and ca and cb)
            return self._settle(node, merged, lo, hi, lambda l, r: _product_direction(l, r, op))
        return self._pow(node, lo, hi)

    def _pow(self, node: BinOp, lo: float, hi: float) -> _Pieces:
        base, expo = node.left, node.right
        if is_constant(expo):
            k = constant_value(expo)
            blo, bhi = self.value_range(base, lo, hi)
            integral = k == int(k)
            if not integral and blo < 0:
                raise DomainError(f"fractional power of {to_source(base)}, which is negative on [{lo!r}, {hi!r}]")
            if k < 0 and blo <= 0 <= bhi:
                raise DomainError(f"negative power of {to_source(base)}, which reaches 0 on [{lo!r}, {hi!r}]")
            pb = self.pieces(base, lo, hi)
            if k == 0:
                return _Pieces(_dedup([lo, hi], lo, hi), True)
            if integral and int(k) % 2 == 0:
                roots, cr = self.roots(base, lo, hi)
                merged = self._merge(pb, extra=roots, lo=lo, hi=hi)
                return _Pieces(merged.points, merged.certified and cr)
            return pb
        if is_constant(base):
            c = constant_value(base)
            if c <= 0:
                raise DomainError("a constant base raised to a variable power must be positive")
            return self.pieces(expo, lo, hi)
        # a^b = exp(b * log a)
        blo, _ = self.value_range(base, lo, hi)
        if blo <= 0:
            raise DomainError(f"{to_source(base)} raised to a variable power must stay positive")
        return self.pieces(Call("exp", (BinOp("*", expo, Call("log", (base,))),)), lo, hi)

    def _call(self, node: Call, lo: float, hi: float) -> _Pieces:
        name, args = node.name, node.args
        if name in ("exp", "log"):
            if name == "log":
                alo, _ = self.value_range(args[0], lo, hi)
                if alo <= 0:
                    raise DomainError(f"log of {to_source(args[0])}, which is not positive on [{lo!r}, {hi!r}]")
            return self.pieces(args[0], lo, hi)
        if name in ("sin", "cos"):
            offset = 0.5 * math.pi if name == "sin" else 0.0
            cross, cc = self.level_crossings(args[0], lo, hi, offset, math.pi)
            merged = self._merge(self.pieces(args[0], lo, hi), extra=cross, lo=lo, hi=hi)
            return _Pieces(merged.points, merged.certified and cc)
        if name == "abs":
            roots, cr = self.roots(args[0], lo, hi)
            merged = self._merge(self.pieces(args[0], lo, hi), extra=roots, lo=lo, hi=hi)
            return _Pieces(merged.points, merged.certified and cr)
        if name == "step":
            if not is_constant(args[0]):
                raise DomainError("step threshold must be a constant")
            c = constant_value(args[0])
            extra = [c] if lo < c < hi else []
            return _Pieces(_dedup([lo, hi] + extra, lo, hi), True)
        if name in ("min", "max"):
            acc = args[0]
            result = self.pieces(acc, lo, hi)
            for other in args[1:]:
                roots, cr = self.roots(BinOp("-", acc, other), lo, hi)
                merged = self._merge(result, self.pieces(other, lo, hi), extra=roots, lo=lo, hi=hi)
                result = _Pieces(merged.points, merged.certified and cr)
                acc = Call(name, (acc, other))
            return result
        if name == "piecewise":
            return self._piecewise(node, lo, hi)
        raise TypeError(f"unknown function {name!r}")

    def _piecewise(self, node: Call, lo: float, hi: float) -> _Pieces:
        args = node.args
        pts = [lo, hi]
        certified = True
        for k in range(len(args) // 2):
            cond = args[2 * k]
            roots, cr = self.roots(BinOp("-", cond.left, cond.right), lo, hi)
            pts += roots
            certified &= cr
            pts += list(self.pieces(BinOp("-", cond.left, cond.right), lo, hi).points)
        cuts = _dedup(pts, lo, hi)
        out = [cuts]
        # each value only has to make sense where it is selected
        for p, q in zip(cuts[:-1], cuts[1:]):
            branch = _active_branch(node, 0.5 * (p + q))
            if branch is None:
                raise DomainError(f"no piecewise branch applies near {0.5 * (p + q)!r}")
            sub = self.pieces(branch, float(p), float(q))
            out.append(sub.points)
            certified &= sub.certified
        for p in cuts:
            if _active_branch(node, float(p)) is None:
                raise DomainError(f"no piecewise branch applies at {float(p)!r}")
        return _Pieces(_dedup(np.concatenate(out), lo, hi), certified)

    def _settle(self, node: Expr, merged: _Pieces, lo, hi, rule) -> _Pieces:
        """Check each merged piece with ``rule`` and sample the undecided ones."""
        pts = merged.points
        ends = {}
        for child in (node.left, node.right):
            l, r = self.limits(child, pts)
            ends[id(child)] = (l, r)
        la, ra = ends[id(node.left)]
        lb, rb = ends[id(node.right)]
        extra = []
        certified = merged.certified
        for i in range(pts.size - 1):
            if rule((la[i], ra[i]), (lb[i], rb[i])):
                continue
            certified = False
            extra += _sampled_extrema(node, float(pts[i]), float(pts[i + 1]))
        if not extra:
            return _Pieces(pts, certified)
        return _Pieces(_dedup(np.concatenate([pts, extra]), lo, hi), certified)


def _direction(l: float, r: float) -> int:
    return int(r > l) - int(r < l)


def _sum_direction(a, b, op: str) -> bool:
    da, db = _direction(*a), _direction(*b)
    if op == "-":
        db = -db
    return da == 0 or db == 0 or da == db


def _product_direction(a, b, op: str) -> bool:
    """Whether ``a * b`` (or ``a / b``) is monotone on a piece where both
    factors are monotone and neither changes sign inside."""
    sa = int(np.sign(a[0] + a[1]))
    sb = int(np.sign(b[0] + b[1]))
    da, db = _direction(*a), _direction(*b)
    # directions of |a| and |b|
    ma = da * sa
    mb = db * sb
    if op == "/":
        mb = -mb
    return ma == 0 or mb == 0 or ma == mb


def _sampled_extrema(node: Expr, p: float, q: float) -> list[float]:
    """Local extrema of ``node`` on ``[p, q]`` located by sampling then
    golden-section polishing.  Heuristic: narrow features can be missed."""
    mid = 0.5 * (p + q)
    xs = np.linspace(p, q, _SAMPLES)
    ys = evaluate(node, xs, np.full_like(xs, mid))
    d = np.diff(ys)
    scale = max(1.0, float(np.abs(ys).max()))
    s = np.where(np.abs(d) <= EPS_M * scale, 0, np.sign(d))
    out = []
    last = 0
    for k in range(s.size):
        if s[k] == 0:
            continue
        if last and s[k] != last:
            lo_, hi_ = xs[max(k - 2, 0)], xs[min(k + 1, xs.size - 1)]
            out.append(_golden(node, lo_, hi_, mid, maximize=last > 0))
        last = s[k]
    return out


def _golden(node: Expr, a: float, b: float, ref: float, maximize: bool) -> float:
    g = (math.sqrt(5) - 1) / 2
    sign = -1.0 if maximize else 1.0
    f = lambda t: sign * float(evaluate(node, np.array([t]), np.array([ref]))[0])
    c, d = b - g * (b - a), a + g * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(80):
        if b - a <= 1e-15 * max(1.0, abs(a)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - g * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + g * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


# -- public API --------------------------------------------------------------------

@dataclass(frozen=True)
class CompiledFn:
    """A compiled expression.

    ``fn`` is the piecewise-monotone function; ``certified`` is ``False``
    when some breakpoint came from sampling.
    """

    expr: Expr
    domain: tuple
    fn: PiecewiseMonotoneFn
    certified: bool

    @property
    def breakpoints(self) -> np.ndarray:
        return self.fn.breakpoints

    @property
    def directions(self) -> tuple:
        return self.fn.directions

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        out = evaluate(self.expr, np.atleast_1d(xa))
        return float(out[0]) if xa.ndim == 0 else out

    def direction_violation(self, n: int = 1000, seed: int = 0) -> float:
        """Largest amount by which sampled pairs contradict piece directions.

        ``n`` sample points are spread over the pieces in proportion to
        their lengths; consecutive samples inside a piece form the pairs.
        """
        rng = np.random.default_rng(seed)
        x = self.fn.breakpoints
        worst = 0.0
        widths = np.diff(x)
        counts = np.maximum(2, np.round(n * widths / widths.sum()).astype(int))
        for i, d in enumerate(self.fn.directions):
            t = np.sort(rng.uniform(x[i], x[i + 1], counts[i]))
            y = evaluate(self.expr, t)
            step = np.diff(y)
            if d == "increasing":
                worst = max(worst, float(np.max(-step, initial=0.0)))
            elif d == "decreasing":
                worst = max(worst, float(np.max(step, initial=0.0)))
            else:
                worst = max(worst, float(np.ptp(y)))
        return worst


def compile_expr(e: Expr | str, domain) -> CompiledFn:
    """Compile ``e`` on ``domain`` (endpoints in either order) to a
    :class:`CompiledFn`.

    Raises :class:`~stieltjes.errors.DomainError` when a partial operation
    is not defined on the whole domain.
    """
    if isinstance(e, str):
        e = parse(e)
    lo, hi = sorted(float(v) for v in domain)
    if not (math.isfinite(lo) and math.isfinite(hi)) or lo == hi:
        raise DomainError("domain must be a non-degenerate finite interval")
    pieces = _Analyzer().pieces(e, lo, hi)
    pts = pieces.points
    values = evaluate(e, pts)
    if not np.all(np.isfinite(values)):
        bad = float(pts[~np.isfinite(values)][0])
        raise DomainError(f"{to_source(e)} is undefined at {bad!r}")
    funcs, antis = [], []
    for p, q in zip(pts[:-1], pts[1:]):
        mid = 0.5 * (float(p) + float(q))
        poly = to_polynomial(e, mid)
        if poly is not None:
            funcs.append(_PolyEval(poly))
            antis.append(_PolyEval(poly.integ()))
        else:
            funcs.append(_PieceEval(e, mid))
            antis.append(None)
    fn = PiecewiseMonotoneFn(pts, funcs, values=values, antiderivatives=antis)
    return CompiledFn(e, (lo, hi), fn, pieces.certified)


class _PieceEval:
    """Evaluator for one piece: branches frozen at the piece midpoint."""

    __slots__ = ("expr", "ref")

    def __init__(self, expr: Expr, ref: float):
        self.expr = expr
        self.ref = ref

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        return evaluate(self.expr, x, np.full(x.shape, self.ref))

    def __repr__(self):
        return f"_PieceEval({to_source(self.expr)!r}, ref={self.ref!r})"
