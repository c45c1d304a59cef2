"""Darboux-Stieltjes sums, oscillation sums and certified enclosures.

For a monotone increasing continuous integrator ``Phi`` the upper and lower
sums along any partition bracket ``int f dPhi``; refining a partition never
widens the bracket.  :func:`certify_integrable` refines greedily until the
gap ``U - L`` is below a requested epsilon, and :func:`integrate` turns the
final bracket into an :class:`~stieltjes.core.Enclosure`, taking the
orientation of the interval and the direction of ``Phi`` into account.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .core import (CONSTANT, DECREASING, EPS_M, INCREASING, BoundedFunction, Enclosure,
                   OrientedInterval, Partition, PiecewiseMonotoneFn, _call, as_hull, as_oriented)
from .errors import DomainError, HypothesisError, NotCertifiedError

DEFAULT_MAX_ROUNDS = 40
DEFAULT_MAX_CELLS = 2 ** 20
DEFAULT_INITIAL_CELLS = 16
DEFAULT_MASS_FRACTION = 0.5


@dataclass(frozen=True)
class StieltjesIntegrator:
    """A continuous integrator together with its direction on the region of use."""

    func: Callable
    direction: str = INCREASING
    breakpoints: tuple = ()

    def __call__(self, x):
        return self.func(x)

    @classmethod
    def identity(cls) -> "StieltjesIntegrator":
        return cls(_identity, INCREASING)

    @classmethod
    def from_function(cls, phi: PiecewiseMonotoneFn, interval=None) -> "StieltjesIntegrator":
        """Wrap a continuous piecewise-monotone function that is monotone on ``interval``."""
        from .stieltjes_map import map_direction

        if not phi.is_continuous(tol=1e-12 * max(1.0, phi.global_bound)):
            raise HypothesisError("integrator must be continuous; it jumps at "
                                  f"{phi.jumps(1e-12 * max(1.0, phi.global_bound))}")
        lo, hi = as_hull(interval) if interval is not None else phi.domain
        direction = map_direction(phi, (lo, hi))
        return cls(phi, direction, tuple(float(v) for v in phi.breakpoints))

    @classmethod
    def from_indefinite(cls, Phi, interval=None) -> "StieltjesIntegrator":
        """Wrap an :class:`IndefiniteIntegral` whose density keeps one sign on ``interval``."""
        from .stieltjes_map import map_direction

        lo, hi = as_hull(interval) if interval is not None else Phi.domain
        direction = map_direction(Phi, (lo, hi))
        return cls(Phi, direction, tuple(float(v) for v in Phi.density.breakpoints))

    def negated(self) -> "StieltjesIntegrator":
        flip = {INCREASING: DECREASING, DECREASING: INCREASING, CONSTANT: CONSTANT}
        return StieltjesIntegrator(_NegatedMap(self.func), flip[self.direction], self.breakpoints)


def _identity(x):
    return np.asarray(x, dtype=float)


class _NegatedMap:
    __slots__ = ("func",)

    def __init__(self, func):
        self.func = func

    def __call__(self, x):
        return -np.asarray(self.func(x), dtype=float)


def _fsum(a: np.ndarray) -> float:
    # numpy reduces pairwise: error grows like log(n) ulps, ample next to EPS_M
    return float(np.sum(a))


@dataclass
class CertificationReport:
    partition: Partition
    upper: float
    lower: float
    gap: float
    osc_sum: float
    epsilon: float
    certified: bool
    rounds: int
    history: list = field(default_factory=list, repr=False, compare=False)

    def enclosure(self) -> Enclosure:
        return Enclosure(self.lower, self.upper)

    def to_dict(self) -> dict:
        return {"partition": self.partition.to_list(), "upper": self.upper, "lower": self.lower,
                "gap": self.gap, "osc_sum": self.osc_sum, "epsilon": self.epsilon,
                "certified": self.certified, "rounds": self.rounds}


# ---------------------------------------------------------------------------
# sums


def _increments(G: Callable, edges: np.ndarray) -> np.ndarray:
    return np.diff(_call(G, edges))


def upper_sum(f: BoundedFunction, G: Callable, P: Partition) -> float:
    """``sum_k sup_{I_k} f * (G(x_{k,r}) - G(x_{k,l}))``."""
    edges = P.breakpoints
    sup, _ = f.cell_bounds(edges[:-1], edges[1:])
    return _fsum(sup * _increments(G, edges))


def lower_sum(f: BoundedFunction, G: Callable, P: Partition) -> float:
    """``sum_k inf_{I_k} f * (G(x_{k,r}) - G(x_{k,l}))``."""
    edges = P.breakpoints
    _, inf = f.cell_bounds(edges[:-1], edges[1:])
    return _fsum(inf * _increments(G, edges))


def oscillation_sum(f: BoundedFunction, G: Callable, P: Partition) -> float:
    """``sum_k osc(f, I_k) * (G(x_{k,r}) - G(x_{k,l}))``; equals U - L."""
    if isinstance(G, StieltjesIntegrator) and G.direction == DECREASING:
        raise HypothesisError("oscillation sums need an increasing integrator; negate it first")
    edges = P.breakpoints
    sup, inf = f.cell_bounds(edges[:-1], edges[1:])
    return _fsum((sup - inf) * _increments(G, edges))


# ---------------------------------------------------------------------------
# greedy refinement


class _CellState:
    """Growable store of cells with cached integrator values, bounds and contributions.

    Cells are kept in insertion order, not by position: splitting a cell
    shrinks it in place to its left half and appends the right half.
    """

    _FIELDS = ("l", "r", "gl", "gr", "sup", "inf", "contrib")

    def __init__(self, l, r, gl, gr, sup, inf):
        self.n = l.size
        cap = max(64, 2 * self.n)
        self._buf = {name: np.empty(cap) for name in self._FIELDS}
        for name, arr in zip(self._FIELDS[:6], (l, r, gl, gr, sup, inf)):
            self._buf[name][:self.n] = arr
        self._buf["contrib"][:self.n] = _contrib(sup, inf, gl, gr)

    def __getattr__(self, name):
        if name in _CellState._FIELDS:
            return self._buf[name][:self.n]
        raise AttributeError(name)

    def _reserve(self, extra: int):
        need = self.n + extra
        cap = self._buf["l"].size
        if need > cap:
            cap = max(need, 2 * cap)
            for name in self._FIELDS:
                grown = np.empty(cap)
                grown[:self.n] = self._buf[name][:self.n]
                self._buf[name] = grown

    def split(self, idx: np.ndarray, bounds, G):
        """Bisect the cells at positions ``idx``."""
        k = idx.size
        self._reserve(k)
        b = self._buf
        old_l, old_r = b["l"][idx], b["r"][idx]
        old_gl, old_gr = b["gl"][idx], b["gr"][idx]
        m = 0.5 * (old_l + old_r)
        gm = _call(G, m)
        s, i = bounds(np.concatenate([old_l, m]), np.concatenate([m, old_r]),
                      np.concatenate([old_gl, gm]), np.concatenate([gm, old_gr]))
        new = slice(self.n, self.n + k)
        b["r"][idx], b["gr"][idx] = m, gm
        b["sup"][idx], b["inf"][idx] = s[:k], i[:k]
        b["contrib"][idx] = _contrib(s[:k], i[:k], old_gl, gm)
        b["l"][new], b["gl"][new] = m, gm
        b["r"][new], b["gr"][new] = old_r, old_gr
        b["sup"][new], b["inf"][new] = s[k:], i[k:]
        b["contrib"][new] = _contrib(s[k:], i[k:], gm, old_gr)
        self.n += k

    def ordered(self) -> dict:
        """All fields sorted by cell position."""
        order = np.argsort(self.l, kind="stable")
        return {name: self._buf[name][:self.n][order] for name in self._FIELDS}

    def partition(self) -> Partition:
        return Partition(np.append(np.sort(self.l), self.r.max()))


def _contrib(sup, inf, gl, gr):
    return np.maximum(sup - inf, 0.0) * np.abs(gr - gl)


def _select(contrib: np.ndarray, fraction: float, splittable: np.ndarray) -> np.ndarray:
    """Positions of the largest contributions, together carrying ``fraction`` of the mass.

    Selection is by threshold so cells with equal contributions (for example
    mirror images in a symmetric problem) are always split together.
    """
    c = np.where(splittable, contrib, 0.0)
    ordered = np.sort(c)[::-1]
    cum = np.cumsum(ordered)
    if cum[-1] <= 0:
        return np.empty(0, dtype=np.int64)
    k = min(int(np.searchsorted(cum, fraction * cum[-1])), c.size - 1)
    thresh = ordered[k]
    return np.flatnonzero((c > 0) & (c >= thresh * (1 - 1e-9)))


def refine_cells(bounds: Callable, G: Callable, l: np.ndarray, r: np.ndarray, target: float, *,
                 max_rounds: int = DEFAULT_MAX_ROUNDS, max_cells: int = DEFAULT_MAX_CELLS,
                 mass_fraction: float = DEFAULT_MASS_FRACTION):
    """Bisect cells until ``sum (sup - inf) |dG| <= target`` or the budget runs out.

    ``bounds(lefts, rights, G(lefts), G(rights)) -> (sup, inf)`` gives
    per-cell bounds; the integrator values come from the cache.  Each
    round splits, at their midpoints, the cells with the largest
    contributions that together carry ``mass_fraction`` of the total.
    Returns the final cell store (in no particular order; see
    ``_CellState.ordered``), the number of rounds and the history of
    oscillation sums (one entry per round, starting with round 0).
    """
    if not 0 < mass_fraction <= 1:
        raise ValueError("mass_fraction must lie in (0, 1]")
    l = np.asarray(l, dtype=float)
    r = np.asarray(r, dtype=float)
    gl, gr = _call(G, l), _call(G, r)
    sup, inf = bounds(l, r, gl, gr)
    st = _CellState(l, r, gl, gr, sup, inf)
    total = float(st.contrib.sum())
    history = [total]
    rounds = 0
    while total > target and rounds < max_rounds:
        room = max_cells - st.n
        if room <= 0:
            break
        cl, cr = st.l, st.r
        mids = 0.5 * (cl + cr)
        idx = _select(st.contrib, mass_fraction, (mids > cl) & (mids < cr))
        if idx.size == 0:
            break
        if idx.size > room:
            idx = idx[np.argsort(-st.contrib[idx], kind="stable")[:room]]
        st.split(idx, bounds, G)
        rounds += 1
        total = float(st.contrib.sum())
        history.append(total)
    return st, rounds, history


def initial_edges(a: float, b: float, extra=(), n: int = DEFAULT_INITIAL_CELLS) -> np.ndarray:
    """Uniform cells on ``[a, b]`` plus any ``extra`` interior points (deduplicated)."""
    pts = np.linspace(a, b, n + 1)
    extra = np.asarray([p for p in extra if a < p < b], dtype=float)
    pts = np.union1d(pts, extra)
    keep = [pts[0]]
    tol = 1e-12 * max(1.0, abs(a), abs(b))
    for p in pts[1:-1]:
        if p - keep[-1] > tol and b - p > tol:
            keep.append(p)
    keep.append(pts[-1])
    return np.array(keep)


def _bounds_for(f: BoundedFunction, G: StieltjesIntegrator):
    """Per-cell bounds callback; pullbacks through the integrator itself skip re-evaluation."""
    from .stieltjes_map import PullbackFn

    if isinstance(f, PullbackFn):
        if G.func is f.Phi:
            return lambda l, r, gl, gr: f.image_bounds(gl, gr)
        if isinstance(G.func, _NegatedMap) and G.func.func is f.Phi:
            return lambda l, r, gl, gr: f.image_bounds(-gl, -gr)
    return lambda l, r, gl, gr: f.cell_bounds(l, r)


def certify_integrable(f: BoundedFunction, G, epsilon: float, interval=None, *,
                       max_rounds: int = DEFAULT_MAX_ROUNDS, max_cells: int = DEFAULT_MAX_CELLS,
                       initial_cells: int = DEFAULT_INITIAL_CELLS,
                       mass_fraction: float = DEFAULT_MASS_FRACTION) -> CertificationReport:
    """Refine a partition until ``U - L <= epsilon`` for an increasing integrator.

    Running out of budget is not an error: the best report comes back with
    ``certified=False``.
    """
    if not (epsilon > 0 and math.isfinite(epsilon)):
        raise ValueError("epsilon must be a positive finite number")
    if not isinstance(G, StieltjesIntegrator):
        G = StieltjesIntegrator(G)
    if G.direction == DECREASING:
        raise HypothesisError("certify_integrable needs an increasing integrator; "
                              "use integrate() for decreasing ones")
    a, b = as_hull(interval) if interval is not None else f.domain
    if not a < b:
        raise ValueError("certification needs a proper interval")
    lo, hi = f.domain
    if a < lo or b > hi:
        raise DomainError(f"[{a!r}, {b!r}] leaves the domain of f [{lo!r}, {hi!r}]")
    extra = list(f.breakpoints) + list(G.breakpoints)
    edges = initial_edges(a, b, extra, initial_cells)

    bounds = _bounds_for(f, G)

    st, rounds, history = refine_cells(bounds, G, edges[:-1], edges[1:], epsilon,
                                       max_rounds=max_rounds, max_cells=max_cells,
                                       mass_fraction=mass_fraction)
    dG = st.gr - st.gl
    upper = _fsum(st.sup * dG)
    lower = _fsum(st.inf * dG)
    osc = _fsum((st.sup - st.inf) * dG)
    gap = upper - lower
    part = st.partition()
    return CertificationReport(part, upper, lower, gap, osc, float(epsilon), bool(gap <= epsilon),
                               rounds, history)


def integrate_report(f: BoundedFunction, G, interval, epsilon: float, **budget
                     ) -> tuple[Enclosure, CertificationReport | None]:
    """Enclosure of the oriented integral plus the report behind it (never raises on budget).

    A degenerate interval gives ``[0, 0]`` and no report.
    """
    I = as_oriented(interval)
    if not isinstance(G, StieltjesIntegrator):
        G = StieltjesIntegrator(G)
    if I.is_degenerate:
        return Enclosure(0.0, 0.0), None
    sign = I.sign
    if G.direction == DECREASING:
        G = G.negated()
        sign = -sign
    report = certify_integrable(f, G, epsilon, I.hull(), **budget)
    enc = Enclosure(report.lower, report.upper)
    return (enc if sign > 0 else -enc), report


def integrate(f: BoundedFunction, G, interval, epsilon: float, **budget) -> Enclosure:
    """Certified enclosure of ``int_I f dG`` with width at most ``epsilon``.

    Reversed intervals negate the result; a decreasing integrator is handled
    through ``int f dG = -int f d(-G)``.
    """
    enc, report = integrate_report(f, G, interval, epsilon, **budget)
    if report is not None and not report.certified:
        raise NotCertifiedError(
            f"gap {report.gap:.3e} still above epsilon {epsilon:.3e} after {report.rounds} "
            f"rounds and {report.partition.n_cells} cells", enc, report)
    return enc
