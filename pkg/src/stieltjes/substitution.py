"""Two-sided verification of substitution and change-of-variable identities.

Each verifier computes ``int f dPsi`` over the image interval and
``int f(Phi) psi(Phi) dPhi`` over the original interval independently, as
certified enclosures, and reports whether they agree.  The verifiers for
sign-changing densities also rebuild the good/bounded/undulating cell
classification used in the classical proofs and check every bound in the
chain numerically, so a failure points at the inequality that broke.

Conventions: ``f``, ``psi`` (and ``Psi``) live on the image side (variable
``y``); ``phi`` and ``Phi`` live on the interval ``I`` (variable ``x``).
``Psi`` and ``Phi`` are :class:`~stieltjes.stieltjes_map.IndefiniteIntegral`
instances; when omitted they are built from the densities, ``Psi`` from the
left end of its domain and ``Phi`` with ``Phi(a) = phi_base`` (default
``a``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core import (CONSTANT, DECREASING, EPS_M, INCREASING, BoundedFunction, Enclosure,
                   OrientedInterval, Partition, PiecewiseMonotoneFn, ProductFn, abs_bound_on,
                   as_hull, as_oriented, inf_on, sum_enclosures, sup_on)
from .darboux import StieltjesIntegrator, initial_edges, integrate_report, refine_cells
from .errors import BudgetExhaustedError, DomainError, HypothesisError
from .stieltjes_map import (IndefiniteIntegral, PullbackFn, build_indefinite, compose,
                            induce_partition, map_direction, monotone_segments, preimage,
                            range_of)

GOOD, BOUNDED, UNDULATING = "G", "B", "U"
DEFAULT_EPSILON = 1e-6
DEFAULT_ETA_TARGET = 0.1
ETA_FLOOR = 1e-8


# ---------------------------------------------------------------------------
# classification


@dataclass
class ClassifiedPartition:
    """Cells with their G/B/U labels and the exact quantities behind them."""

    lefts: np.ndarray
    rights: np.ndarray
    labels: tuple
    eta: float
    osc: np.ndarray
    sup_abs: np.ndarray

    @property
    def n_cells(self) -> int:
        return len(self.labels)

    @property
    def lengths(self) -> np.ndarray:
        return self.rights - self.lefts

    @property
    def partition(self) -> Partition:
        """The cells as a partition; only valid when they tile an interval."""
        if not np.allclose(self.lefts[1:], self.rights[:-1], rtol=0, atol=EPS_M):
            raise ValueError("cells are not contiguous")
        return Partition(np.append(self.lefts, self.rights[-1]))

    def mask(self, label: str) -> np.ndarray:
        return np.array([lab == label for lab in self.labels], dtype=bool)

    def total_length(self, label: str) -> float:
        return float(self.lengths[self.mask(label)].sum())

    def counts(self) -> dict:
        return {lab: int(self.mask(lab).sum()) for lab in (GOOD, BOUNDED, UNDULATING)}

    def rows(self) -> list:
        return [[float(l), float(r), lab, float(o), float(s)]
                for l, r, lab, o, s in zip(self.lefts, self.rights, self.labels, self.osc,
                                           self.sup_abs)]

    def to_dict(self) -> dict:
        return {"eta": self.eta,
                "cells": [[float(l), float(r), lab]
                          for l, r, lab in zip(self.lefts, self.rights, self.labels)]}


def _cell_arrays(cells) -> tuple[np.ndarray, np.ndarray]:
    if isinstance(cells, Partition):
        return cells.lefts.copy(), cells.rights.copy()
    hulls = [as_hull(c) for c in cells]
    if not hulls:
        return np.empty(0), np.empty(0)
    arr = np.array(hulls, dtype=float)
    return arr[:, 0], arr[:, 1]


def classify(density: BoundedFunction, cells, eta: float) -> ClassifiedPartition:
    """Label each closed cell G (strict sign), B (``|density| <= eta``) or U.

    Sup and inf are taken over the closed cell, so a density that reaches
    zero at a cell end is not G there.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    l, r = _cell_arrays(cells)
    if l.size == 0:
        return ClassifiedPartition(l, r, (), float(eta), l, l)
    sup, inf = density.cell_bounds(l, r, closed=True)
    sup_abs = np.maximum(np.abs(sup), np.abs(inf))
    labels = []
    for s, i, m in zip(sup, inf, sup_abs):
        if i > 0 or s < 0:
            labels.append(GOOD)
        elif m <= eta:
            labels.append(BOUNDED)
        else:
            labels.append(UNDULATING)
    return ClassifiedPartition(l, r, tuple(labels), float(eta), sup - inf, sup_abs)


def eta_budget_sum(density: BoundedFunction, P: Partition) -> float:
    """``sum_k osc(density, I_k) |I_k|`` with closed-cell oscillation."""
    sup, inf = density.cell_bounds(P.lefts, P.rights, closed=True)
    return float(np.sum((sup - inf) * P.widths))


def eta_budget_partition(density: BoundedFunction, interval, eta: float, *, scale: float = 1.0,
                         max_rounds: int = 60, max_cells: int = 2 ** 20) -> Partition:
    """Partition of ``interval`` with ``sum osc(density, I_k) |I_k| <= scale * eta^2 |I|``.

    Starts from the density's own breakpoints (so a constant density stays a
    single cell) and bisects greedily.  ``scale`` tightens the budget for
    callers that need a stronger version of the bound.
    """
    if not eta > 0:
        raise ValueError("eta must be positive")
    lo, hi = as_hull(interval)
    target = scale * eta * eta * (hi - lo)
    bp = np.asarray(density.breakpoints, dtype=float)
    edges = initial_edges(lo, hi, bp, n=1)
    ident = StieltjesIntegrator.identity()
    st, _, _ = refine_cells(lambda l, r, gl, gr: density.cell_bounds(l, r, closed=True), ident,
                            edges[:-1], edges[1:], target, max_rounds=max_rounds,
                            max_cells=max_cells)
    total = float(st.contrib.sum())
    if total > target:
        raise BudgetExhaustedError(
            f"oscillation-length sum {total:.3e} still above {target:.3e} "
            f"after {st.n} cells")
    return st.partition()


# ---------------------------------------------------------------------------
# reports


@dataclass
class VerificationReport:
    identity: str
    lhs: Enclosure
    rhs: Enclosure
    agree: bool
    max_gap: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"identity": self.identity, "lhs": self.lhs.to_dict(), "rhs": self.rhs.to_dict(),
                "agree": self.agree, "max_gap": self.max_gap,
                "diagnostics": _jsonable(self.diagnostics)}


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (np.bool_, bool)):
        return bool(obj)
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.floating, float)):
        return float(obj)
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    return obj


def agreement_tolerance(epsilon: float) -> float:
    return max(1e-8, 2.0 * epsilon)


def _agree(a: Enclosure, b: Enclosure, tol: float) -> bool:
    return a.widen(tol).overlaps(b.widen(tol))


def _check(value: float, bound: float, slack: float = EPS_M) -> dict:
    return {"value": float(value), "bound": float(bound), "holds": bool(value <= bound + slack)}


def _certified(*reports) -> bool:
    return all(r is None or r.certified for r in reports)


# ---------------------------------------------------------------------------
# shared helpers


def _interval(Phi: IndefiniteIntegral, interval) -> OrientedInterval:
    return as_oriented(interval if interval is not None else Phi.domain)


def _resolve_phi(phi, Phi, interval, phi_base):
    if Phi is None:
        I = as_oriented(interval if interval is not None else phi.domain)
        a = I.hull()[0] if interval is None else I.start
        Phi = build_indefinite(phi, a, a if phi_base is None else phi_base)
    return Phi


def _resolve_psi(psi, Psi):
    if Psi is None:
        Psi = build_indefinite(psi, psi.domain[0], 0.0)
    return Psi


def _snap(values, *fns):
    """Move image points that overshoot the common domain by rounding back inside it."""
    lo = max(fn.domain[0] for fn in fns)
    hi = min(fn.domain[1] for fn in fns)
    out = []
    for v in values:
        slack = 1e-9 * max(1.0, abs(v))
        if v < lo - slack or v > hi + slack:
            raise DomainError(f"image point {v!r} lies outside the domain [{lo!r}, {hi!r}] "
                              "of f / psi")
        out.append(float(min(max(v, lo), hi)))
    return out


def _image(Phi, I: OrientedInterval, *fns) -> OrientedInterval:
    return OrientedInterval(*_snap([float(Phi(I.start)), float(Phi(I.end))], *fns))


def _constant_sign(density: BoundedFunction, hull) -> int:
    """+1 / -1 when the density keeps one (weak) sign on the closed hull, else 0."""
    s = sup_on(density, hull)
    i = inf_on(density, hull)
    if i >= 0:
        return 1
    if s <= 0:
        return -1
    return 0


def integrate_by_segments(f: BoundedFunction, Psi, interval, epsilon: float, **budget):
    """Oriented ``int f dPsi`` for a continuous, piecewise-monotone ``Psi``.

    The hull is cut at the turning points of ``Psi``; each monotone segment
    is certified separately with an equal share of ``epsilon``.  Returns the
    enclosure and the list of per-segment reports.
    """
    I = as_oriented(interval)
    if I.is_degenerate:
        return Enclosure(0.0, 0.0), []
    lo, hi = I.hull()
    segs = [s for s in monotone_segments(Psi, lo, hi) if s[2] != CONSTANT]
    if not segs:
        return Enclosure(0.0, 0.0), []
    share = epsilon / len(segs)
    bps = tuple(float(v) for v in getattr(getattr(Psi, "density", Psi), "breakpoints", ()))
    parts, reports = [], []
    for s, t, d in segs:
        G = StieltjesIntegrator(Psi, d, bps)
        enc, rep = integrate_report(f, G, (s, t), share, **budget)
        parts.append(enc)
        reports.append(rep)
    total = sum_enclosures(parts)
    return (total if I.sign > 0 else -total), reports


def _image_bounds(g: BoundedFunction, closed: bool = True):
    """Bounds of ``g o Phi`` on cells where ``Phi`` is monotone, from the cached ``Phi`` values."""
    glo, ghi = g.domain

    def bounds(l, r, gl, gr):
        y0 = np.clip(np.minimum(gl, gr), glo, ghi)
        y1 = np.clip(np.maximum(gl, gr), glo, ghi)
        return g.cell_bounds(y0, y1, closed)

    return bounds


def _osc_weighted(bounds, Phi, l, r) -> np.ndarray:
    gl, gr = Phi(l), Phi(r)
    s, i = bounds(l, r, gl, gr)
    return (s - i) * np.abs(gr - gl)


def _pick_eta(Mf, Mpsi, Mphi, length, eta_target):
    return max(eta_target / ((1 + 3 * Mf * Mphi + 3 * Mf * Mpsi * Mphi) * length), ETA_FLOOR)


def _budget_summary(*reports) -> dict:
    reps = [r for r in reports if r is not None]
    return {"cells": int(sum(r.partition.n_cells for r in reps)),
            "rounds": int(max((r.rounds for r in reps), default=0)),
            "certified": _certified(*reps)}


# ---------------------------------------------------------------------------
# composition identity for Darboux sums


def verify_composition_identity(f: PiecewiseMonotoneFn, Psi, Phi, P: Partition,
                                epsilon: float | None = None, **budget) -> VerificationReport:
    """Check ``U(f, Psi, Q) = U(f(Phi), Psi(Phi), P)`` and the lower counterpart.

    ``Q`` is the partition of the image induced by ``P``.  The left sums use
    ``f``'s bounds on the cells of ``Q``; the right sums use the composed
    function ``f o Phi`` on the cells of ``P`` and never look at ``Q``.  For
    decreasing ``Phi`` the cells of ``Q`` are traversed backwards, which
    flips the sign of every increment.

    With ``epsilon`` the two integrals are also certified and compared.
    The report's ``lhs``/``rhs`` are then those integrals; without it they
    are the upper/lower sum pairs.
    """
    a, b = P.a, P.b
    direction = map_direction(Phi, (a, b))
    if direction == CONSTANT:
        raise HypothesisError("Phi is constant on the partition's interval")
    sign = 1.0 if direction == INCREASING else -1.0

    y = np.asarray(Phi(P.breakpoints), dtype=float)
    q_edges = y if sign > 0 else y[::-1]
    ql, qr = q_edges[:-1], q_edges[1:]
    qr = np.maximum(qr, ql)
    sup_q, inf_q = f.cell_bounds(ql, qr)
    dpsi_q = np.asarray(Psi(qr), dtype=float) - np.asarray(Psi(ql), dtype=float)
    U_q = float(np.sum(sup_q * dpsi_q))
    L_q = float(np.sum(inf_q * dpsi_q))

    fc = compose(f, Phi, (a, b))
    sup_p, inf_p = fc.cell_bounds(P.lefts, P.rights)
    GP = np.asarray(Psi(np.asarray(Phi(P.breakpoints))), dtype=float)
    dpsi_p = np.diff(GP)
    U_p = sign * float(np.sum(sup_p * dpsi_p))
    L_p = sign * float(np.sum(inf_p * dpsi_p))

    d_upper = abs(U_q - U_p)
    d_lower = abs(L_q - L_p)
    sums_agree = d_upper <= EPS_M * max(1.0, abs(U_q)) and d_lower <= EPS_M * max(1.0, abs(L_q))
    diagnostics = {
        "upper_image": U_q, "upper_composed": U_p, "lower_image": L_q, "lower_composed": L_p,
        "upper_difference": d_upper, "lower_difference": d_lower, "sums_agree": sums_agree,
        "direction": direction, "partition": P.to_list(),
        "induced": [c.to_list() for c in induce_partition(Phi, P)],
    }
    if epsilon is None:
        return VerificationReport("Eq6", Enclosure(min(L_q, U_q), max(L_q, U_q)),
                                  Enclosure(min(L_p, U_p), max(L_p, U_p)), sums_agree,
                                  max(d_upper, d_lower), diagnostics)

    I_img = (float(Phi(a)), float(Phi(b)))
    lhs, lhs_reps = integrate_by_segments(f, Psi, I_img, epsilon, **budget)
    composite = _Composite(Psi, Phi)
    rhs, rhs_reps = integrate_by_segments(fc, composite, (a, b), epsilon, **budget)
    tol = agreement_tolerance(epsilon)
    integrals_agree = _agree(lhs, rhs, tol)
    diagnostics.update({"integrals_agree": integrals_agree, "tolerance": tol,
                        "budget": _budget_summary(*lhs_reps, *rhs_reps)})
    return VerificationReport("Eq6", lhs, rhs, bool(sums_agree and integrals_agree),
                              max(d_upper, d_lower, abs(lhs.midpoint - rhs.midpoint)),
                              diagnostics)


class _Composite:
    """``Psi o Phi`` as a piecewise-monotone integrator on ``Phi``'s domain."""

    def __init__(self, Psi, Phi):
        self.Psi, self.Phi = Psi, Phi
        self.domain = Phi.domain
        lo, hi = Phi.domain
        self.density = _BreakSource(np.unique(np.concatenate([
            np.asarray(getattr(Phi.density, "breakpoints", [lo, hi]), dtype=float),
            [lo, hi]])))

    def __call__(self, x):
        return self.Psi(self.Phi(x))

    def monotone_segments(self, lo=None, hi=None):
        lo = self.domain[0] if lo is None else lo
        hi = self.domain[1] if hi is None else hi
        out = []
        for s, t, d in monotone_segments(self.Phi, lo, hi):
            ys, yt = float(self.Phi(s)), float(self.Phi(t))
            if d == CONSTANT or ys == yt:
                continue
            ylo, yhi = min(ys, yt), max(ys, yt)
            cuts = [s, t]
            for u, v, e in monotone_segments(self.Psi, ylo, yhi):
                for yb in (u, v):
                    if ylo < yb < yhi:
                        cuts.extend(preimage(self.Phi, [yb], (s, t), d).tolist())
            cuts = np.unique(cuts)
            for p, q in zip(cuts[:-1], cuts[1:]):
                if q <= p:
                    continue
                yp, yq = float(self.Phi(p)), float(self.Phi(q))
                zp, zq = float(self.Psi(yp)), float(self.Psi(yq))
                e = INCREASING if zq > zp else DECREASING if zq < zp else CONSTANT
                out.append((float(p), float(q), e))
        return out


@dataclass(frozen=True)
class _BreakSource:
    breakpoints: np.ndarray


# ---------------------------------------------------------------------------
# lemma: both densities of constant sign


def verify_lemma_eq7(f: PiecewiseMonotoneFn, psi: PiecewiseMonotoneFn, Psi,
                     phi: PiecewiseMonotoneFn, Phi, interval=None, *,
                     epsilon: float = DEFAULT_EPSILON, phi_base: float | None = None,
                     **budget) -> VerificationReport:
    """``int_[Phi(a), Phi(b)] f dPsi = int_I f(Phi) psi(Phi) dPhi`` for constant-sign densities."""
    Phi = _resolve_phi(phi, Phi, interval, phi_base)
    Psi = _resolve_psi(psi, Psi)
    I = _interval(Phi, interval)
    hull = I.hull()
    s_phi = _constant_sign(phi, hull)
    if s_phi == 0:
        raise HypothesisError("phi changes sign on I; the lemma requires constant sign "
                              "(use verify_change_of_variable_eq30)")
    J = _image(Phi, I, f, psi)
    y_hull = J.hull()
    s_psi = _constant_sign(psi, y_hull)
    if s_psi == 0:
        raise HypothesisError("psi changes sign on Phi(I); the lemma requires constant sign "
                              "(use verify_substitution_eq1)")

    lhs, lrep = _integrate_monotone(f, Psi, J, epsilon, **budget)
    rhs, rrep = _integrate_pullback(f, psi, Phi, I, epsilon, **budget)
    tol = agreement_tolerance(epsilon)
    diagnostics = {
        "image_interval": J.to_list(), "interval": I.to_list(),
        "reductions": {"phi_negated": s_phi < 0, "psi_negated": s_psi < 0},
        "tolerance": tol, "budget": _budget_summary(lrep, rrep),
    }
    return VerificationReport("Eq7", lhs, rhs, _agree(lhs, rhs, tol),
                              abs(lhs.midpoint - rhs.midpoint), diagnostics)


def _integrate_monotone(f, Psi, J: OrientedInterval, epsilon, **budget):
    if J.is_degenerate:
        return Enclosure(0.0, 0.0), None
    G = StieltjesIntegrator.from_indefinite(Psi, J.hull())
    return integrate_report(f, G, J, epsilon, **budget)


def _integrate_pullback(f, psi, Phi, I: OrientedInterval, epsilon, **budget):
    """``int_I f(Phi) psi(Phi) dPhi`` for ``Phi`` monotone on ``I``."""
    if I.is_degenerate:
        return Enclosure(0.0, 0.0), None
    g = PullbackFn(ProductFn([f, psi]), Phi, I.hull())
    G = StieltjesIntegrator.from_indefinite(Phi, I.hull())
    return integrate_report(g, G, I, epsilon, **budget)


# ---------------------------------------------------------------------------
# substitution: psi may change sign, phi may not


def verify_substitution_eq1(f: PiecewiseMonotoneFn, psi: PiecewiseMonotoneFn, Psi,
                            phi: PiecewiseMonotoneFn, Phi, interval=None, eta: float | None = None,
                            *, epsilon: float = DEFAULT_EPSILON,
                            eta_target: float = DEFAULT_ETA_TARGET,
                            phi_base: float | None = None, **budget) -> VerificationReport:
    """Substitution formula with a sign-changing ``psi`` and constant-sign ``phi``.

    Besides the two enclosures the diagnostics rebuild the proof's
    partition: an eta-budget partition of ``psi`` on the image, its G/B/U
    classification, the induced partition of ``I``, and every bound of the
    chain evaluated numerically.
    """
    Phi = _resolve_phi(phi, Phi, interval, phi_base)
    Psi = _resolve_psi(psi, Psi)
    I = _interval(Phi, interval)
    x_hull = I.hull()
    s_phi = _constant_sign(phi, x_hull)
    if s_phi == 0:
        raise HypothesisError("phi changes sign on I; the substitution formula requires "
                              "constant sign (use verify_change_of_variable_eq30)")
    J = _image(Phi, I, f, psi)

    lhs, lreps = integrate_by_segments(f, Psi, J, epsilon, **budget)
    rhs, rrep = _integrate_pullback(f, psi, Phi, I, epsilon, **budget)
    tol = agreement_tolerance(epsilon)
    diagnostics = {"image_interval": J.to_list(), "interval": I.to_list(), "tolerance": tol,
                   "reductions": {"phi_negated": s_phi < 0},
                   "budget": _budget_summary(*lreps, rrep)}
    if not J.is_degenerate:
        diagnostics.update(_eq1_chain(f, psi, Psi, phi, Phi, I, J, eta, eta_target, budget))
    return VerificationReport("Eq1", lhs, rhs, _agree(lhs, rhs, tol),
                              abs(lhs.midpoint - rhs.midpoint), diagnostics)


def _eq1_chain(f, psi, Psi, phi, Phi, I, J, eta, eta_target, budget) -> dict:
    x_lo, x_hi = I.hull()
    y_lo, y_hi = J.hull()
    length = x_hi - x_lo
    Mf = abs_bound_on(f, (y_lo, y_hi))
    Mpsi = abs_bound_on(psi, (y_lo, y_hi))
    Mphi = abs_bound_on(phi, (x_lo, x_hi))
    if eta is None:
        eta = _pick_eta(Mf, Mpsi, Mphi, length, eta_target)
    # |Q_k| <= M_phi |I_k| only gives the U-block bound below when M_phi >= 1;
    # budgeting with min(1, M_phi) makes the chain hold for slow maps as well.
    scale = min(1.0, Mphi) * length / (y_hi - y_lo)
    Q = eta_budget_partition(psi, (y_lo, y_hi), eta, scale=scale)
    budget_sum = eta_budget_sum(psi, Q)
    cp = classify(psi, Q, eta)

    y_edges = Q.breakpoints
    x_edges = np.empty_like(y_edges)
    increasing = map_direction(Phi, (x_lo, x_hi)) == INCREASING
    x_edges[0], x_edges[-1] = (x_lo, x_hi) if increasing else (x_hi, x_lo)
    if y_edges.size > 2:
        x_edges[1:-1] = preimage(Phi, y_edges[1:-1], (x_lo, x_hi))
    xl = np.minimum(x_edges[:-1], x_edges[1:])
    xr = np.maximum(x_edges[:-1], x_edges[1:])
    x_len = xr - xl
    y_len = cp.lengths
    g_mask, b_mask, u_mask = cp.mask(GOOD), cp.mask(BOUNDED), cp.mask(UNDULATING)

    g = ProductFn([f, psi])
    bounds = _image_bounds(g)
    ident_phi = StieltjesIntegrator(Phi, INCREASING if increasing else DECREASING)
    G_len = float(x_len[g_mask].sum())
    B_len = float(x_len[b_mask].sum())
    G_target = eta * G_len
    if g_mask.any():
        st, _, _ = refine_cells(bounds, ident_phi, xl[g_mask], xr[g_mask], G_target, **_rb(budget))
        G_block = float(st.contrib.sum())
        G_cells = st.n
    else:
        G_block, G_cells = 0.0, 0
    single = _osc_weighted(bounds, Phi, xl, xr)
    B_block = float(single[b_mask].sum())
    U_block = float(single[u_mask].sum())

    per_cell_len = np.all(y_len <= Mphi * x_len + EPS_M * np.maximum(1.0, y_len))
    psi_incr = np.abs(np.asarray(Psi(Q.rights)) - np.asarray(Psi(Q.lefts)))
    abs_int = _cell_abs_integral_bounds(f, Psi, Q.lefts, Q.rights)
    per_cell_int = np.all(abs_int <= Mf * Mpsi * Mphi * x_len + EPS_M * np.maximum(1.0, psi_incr))

    checks = {
        "eta_budget": _check(budget_sum, eta * eta * length),
        "undulating_length": _check(cp.total_length(UNDULATING), eta * length, 1e-10),
        "cell_image_length": {"holds": bool(per_cell_len)},
        "cell_integral": {"holds": bool(per_cell_int)},
        "good_block": _check(G_block, G_target),
        "bounded_block": _check(B_block, 2 * Mf * Mphi * eta * B_len),
        "undulating_block": _check(U_block, 2 * Mf * Mpsi * Mphi * eta * length),
        "total": _check(G_block + B_block + U_block,
                        (1 + 2 * Mf * Mphi + 2 * Mf * Mpsi * Mphi) * eta * length),
        "classification": {"holds": _labels_consistent(cp)},
    }
    return {"eta": eta, "M_f": Mf, "M_psi": Mpsi, "M_phi": Mphi,
            "classified": cp.to_dict(), "class_counts": cp.counts(),
            "induced_cells": [[float(a), float(b)] for a, b in zip(xl, xr)],
            "good_refined_cells": G_cells, "checks": checks,
            "chain_holds": all(c["holds"] for c in checks.values())}


def _rb(budget: dict) -> dict:
    return {k: v for k, v in budget.items() if k in ("max_rounds", "max_cells", "mass_fraction")}


def _labels_consistent(cp: ClassifiedPartition) -> bool:
    for lab, osc, m in zip(cp.labels, cp.osc, cp.sup_abs):
        if lab == BOUNDED and m > cp.eta:
            return False
        if lab == UNDULATING and (osc < cp.eta or m <= cp.eta):
            return False
    return True


def _cell_abs_integral_bounds(f, Psi, ql, qr) -> np.ndarray:
    """Certified ``sup |int_Q f dPsi|`` per cell from one Darboux step per monotone piece.

    Cells are cut at the turning points of ``Psi`` so every sub-cell has a
    monotone integrator; the sub-cell brackets are then summed per cell.
    """
    turns = np.array(sorted({s for s, _, _ in monotone_segments(Psi, ql[0], qr[-1])}
                            | {t for _, t, _ in monotone_segments(Psi, ql[0], qr[-1])}))
    edges = np.union1d(np.append(ql, qr[-1]), turns)
    sl, sr = edges[:-1], edges[1:]
    owner = np.clip(np.searchsorted(ql, sl, "right") - 1, 0, ql.size - 1)
    dpsi = np.asarray(Psi(sr), dtype=float) - np.asarray(Psi(sl), dtype=float)
    fs, fi = f.cell_bounds(sl, sr, closed=True)
    lo = np.minimum(fs * dpsi, fi * dpsi)
    hi = np.maximum(fs * dpsi, fi * dpsi)
    lo_k = np.bincount(owner, weights=lo, minlength=ql.size)
    hi_k = np.bincount(owner, weights=hi, minlength=ql.size)
    return np.maximum(np.abs(lo_k), np.abs(hi_k))


# ---------------------------------------------------------------------------
# change of variable: phi may change sign, psi may not


def verify_change_of_variable_eq30(f: PiecewiseMonotoneFn, psi: PiecewiseMonotoneFn, Psi,
                                   phi: PiecewiseMonotoneFn, Phi, interval=None,
                                   eta: float | None = None, *,
                                   epsilon: float = DEFAULT_EPSILON,
                                   eta_target: float = DEFAULT_ETA_TARGET,
                                   phi_base: float | None = None, **budget) -> VerificationReport:
    """Change of variable for a non-invertible ``Phi``.

    The primary right-hand side is the plain Riemann integral
    ``int_I f(Phi) psi(Phi) phi dx``; a second one sums oriented
    Stieltjes integrals over the monotone segments of ``Phi``.  Both have
    to agree with ``int_[Phi(a), Phi(b)] f dPsi``.
    """
    Phi = _resolve_phi(phi, Phi, interval, phi_base)
    Psi = _resolve_psi(psi, Psi)
    I = _interval(Phi, interval)
    x_lo, x_hi = I.hull()
    info = range_of(Phi, (x_lo, x_hi))
    s_psi = _constant_sign(psi, _snap(info.range, f, psi))
    if s_psi == 0:
        raise HypothesisError("psi changes sign on the range of Phi; the change of variable "
                              "requires constant sign (use verify_substitution_eq1)")
    J = _image(Phi, I, f, psi)

    lhs, lrep = _integrate_monotone(f, Psi, J, epsilon, **budget)
    fc = compose(f, Phi, (x_lo, x_hi))
    pc = compose(psi, Phi, (x_lo, x_hi))
    if I.is_degenerate:
        rhs, prep = Enclosure(0.0, 0.0), None
    else:
        integrand = ProductFn([fc, pc, phi])
        rhs, prep = integrate_report(integrand, StieltjesIntegrator.identity(), I, epsilon,
                                     **budget)
    second, sreps = _segment_sum(f, psi, Phi, I, epsilon, **budget)

    tol = agreement_tolerance(epsilon)
    primary = _agree(lhs, rhs, tol)
    secondary = _agree(second, rhs, tol) and _agree(second, lhs, tol)
    diagnostics = {
        "image_interval": J.to_list(), "interval": I.to_list(), "range": info.to_dict(),
        "reductions": {"psi_negated": s_psi < 0}, "tolerance": tol,
        "segment_sum": second.to_dict(), "primary_agree": primary,
        "segment_sum_agree": secondary, "budget": _budget_summary(lrep, prep, *sreps),
    }
    if not I.is_degenerate:
        diagnostics.update(_eq30_chain(f, psi, phi, Phi, fc, pc, (x_lo, x_hi), info, eta,
                                       eta_target, budget))
    gap = max(abs(lhs.midpoint - rhs.midpoint), abs(second.midpoint - rhs.midpoint))
    return VerificationReport("Eq30", lhs, rhs, bool(primary and secondary), gap, diagnostics)


def _segment_sum(f, psi, Phi, I: OrientedInterval, epsilon, **budget):
    if I.is_degenerate:
        return Enclosure(0.0, 0.0), []
    lo, hi = I.hull()
    segs = [s for s in monotone_segments(Phi, lo, hi) if s[2] != CONSTANT]
    parts, reps = [], []
    g = ProductFn([f, psi])
    for s, t, d in segs:
        pb = PullbackFn(g, Phi, (s, t))
        G = StieltjesIntegrator(Phi, d, tuple(float(v) for v in Phi.density.breakpoints))
        enc, rep = integrate_report(pb, G, (s, t), epsilon / max(1, len(segs)), **budget)
        parts.append(enc)
        reps.append(rep)
    total = sum_enclosures(parts) if parts else Enclosure(0.0, 0.0)
    return (total if I.sign > 0 else -total), reps


def _eq30_chain(f, psi, phi, Phi, fc, pc, hull, info, eta, eta_target, budget) -> dict:
    x_lo, x_hi = hull
    length = x_hi - x_lo
    y_lo, y_hi = _snap(info.range, f, psi)
    Mf = abs_bound_on(f, (y_lo, y_hi))
    Mpsi = abs_bound_on(psi, (y_lo, y_hi))
    Mphi = abs_bound_on(phi, hull)
    if eta is None:
        eta = _pick_eta(Mf, Mpsi, Mphi, length, eta_target)
    P = eta_budget_partition(phi, hull, eta)
    before = eta_budget_sum(phi, P)
    P2 = P.insert([info.x_m, info.x_M], tol=1e-12)
    after = eta_budget_sum(phi, P2)
    cp = classify(phi, P2, eta)
    g_mask, b_mask, u_mask = cp.mask(GOOD), cp.mask(BOUNDED), cp.mask(UNDULATING)
    x_len = cp.lengths
    G_len = float(x_len[g_mask].sum())
    B_len = float(x_len[b_mask].sum())

    ident_phi = StieltjesIntegrator(Phi, INCREASING)
    # phi keeps a strict sign on good cells, so Phi is monotone on them and the image
    # of every sub-cell is the interval between the images of its ends
    image = _image_bounds(ProductFn([f, psi]))
    G_target = eta * G_len
    if g_mask.any():
        st, _, _ = refine_cells(image, ident_phi, cp.lefts[g_mask], cp.rights[g_mask], G_target,
                                **_rb(budget))
        G_block, G_cells = float(st.contrib.sum()), st.n
    else:
        G_block, G_cells = 0.0, 0
    composed = ProductFn([fc, pc])
    l, r = cp.lefts, cp.rights
    s, i = composed.cell_bounds(l, r, closed=True)
    single = (s - i) * np.abs(np.asarray(Phi(r)) - np.asarray(Phi(l)))
    B_block = float(single[b_mask].sum())
    U_block = float(single[u_mask].sum())
    per_cell = bool(np.all(single[b_mask | u_mask] <= 2 * Mf * Mpsi * Mphi * x_len[b_mask | u_mask]
                           + EPS_M))
    endpoints = P2.breakpoints
    has_m = bool(np.min(np.abs(endpoints - info.x_m)) <= 1e-12 * max(1.0, abs(info.x_m)))
    has_M = bool(np.min(np.abs(endpoints - info.x_M)) <= 1e-12 * max(1.0, abs(info.x_M)))

    checks = {
        "eta_budget": _check(before, eta * eta * length),
        "split_monotone": _check(after, before),
        "extremes_are_endpoints": {"holds": has_m and has_M},
        "undulating_length": _check(cp.total_length(UNDULATING), eta * length, 1e-10),
        "good_block": _check(G_block, G_target),
        "cell_oscillation": {"holds": per_cell},
        "bounded_block": _check(B_block, 2 * Mf * Mpsi * eta * B_len),
        "undulating_block": _check(U_block, 2 * Mf * Mpsi * Mphi * eta * length),
        "total": _check(G_block + B_block + U_block,
                        (1 + 2 * Mf * Mpsi + 2 * Mf * Mpsi * Mphi) * eta * length),
        "classification": {"holds": _labels_consistent(cp)},
    }
    return {"eta": eta, "M_f": Mf, "M_psi": Mpsi, "M_phi": Mphi,
            "classified": cp.to_dict(), "class_counts": cp.counts(),
            "oscillation_sum_before_insert": before, "oscillation_sum_after_insert": after,
            "good_refined_cells": G_cells, "checks": checks,
            "chain_holds": all(c["holds"] for c in checks.values())}


# ---------------------------------------------------------------------------
# power-law family with unbounded densities


CODA_DELTAS = (1e-2, 1e-3, 1e-4)


def coda_closed_form(eps: float, eta: float, beta: float) -> float:
    """``int_0^1 y^beta d(y^(1-eta)) = (1 - eta) / (1 + beta - eta)``."""
    return (1 - eta) / (1 + beta - eta)


def check_coda_parameters(eps: float, eta: float, beta: float) -> None:
    if not (0 < eps < 1 and 0 < eta < 1):
        raise HypothesisError(f"need 0 < eps < 1 and 0 < eta < 1, got eps={eps!r}, eta={eta!r}")
    need = eps / (1 - eps) + eta
    if beta < need - 1e-15:
        raise HypothesisError(f"beta={beta!r} is below eps/(1-eps)+eta = {need!r}")


class _Power:
    __slots__ = ("p", "c")

    def __init__(self, p: float, c: float = 1.0):
        self.p, self.c = p, c

    def __call__(self, x):
        return self.c * np.power(np.asarray(x, dtype=float), self.p)


def verify_coda_mvt(eps: float, eta: float, beta: float, deltas=CODA_DELTAS, *,
                    epsilon: float = 1e-5, tol: float = 1e-3, **budget) -> VerificationReport:
    """Change of variable for ``Phi = x^(1-eps)``, ``Psi = y^(1-eta)``, ``f = y^beta``.

    The densities blow up at 0, so both sides are computed on ``[delta, 1]``
    for a shrinking sequence of ``delta`` and compared with the closed form
    of the full integral.  Agreement means the two sides agree at every
    delta, the distance to the closed form shrinks, and at the smallest
    delta it is within ``tol``.  This limit procedure is a heuristic: the
    truncation error is estimated, not certified.
    """
    check_coda_parameters(eps, eta, beta)
    exact = coda_closed_form(eps, eta, beta)
    a_tol = agreement_tolerance(epsilon)
    rows = []
    lhs = rhs = None
    for delta in sorted(deltas, reverse=True):
        y0 = delta ** (1 - eps)
        f = PiecewiseMonotoneFn([y0, 1.0], [_Power(beta)], directions=[INCREASING])
        Psi = StieltjesIntegrator(_Power(1 - eta), INCREASING)
        lhs, lrep = integrate_report(f, Psi, (y0, 1.0), epsilon, **budget)
        # f(Phi) psi(Phi) = (1 - eta) x^((1 - eps)(beta - eta)), increasing since beta >= eta
        g = PiecewiseMonotoneFn([delta, 1.0], [_Power((1 - eps) * (beta - eta), 1 - eta)],
                                directions=[INCREASING])
        Phi = StieltjesIntegrator(_Power(1 - eps), INCREASING)
        rhs, rrep = integrate_report(g, Phi, (delta, 1.0), epsilon, **budget)
        rows.append({"delta": delta, "lhs": lhs.to_dict(), "rhs": rhs.to_dict(),
                     "agree": _agree(lhs, rhs, a_tol),
                     "gap_to_limit": abs(0.5 * (lhs.midpoint + rhs.midpoint) - exact),
                     "certified": _certified(lrep, rrep)})
    gaps = [r["gap_to_limit"] for r in rows]
    shrinking = all(b <= a + EPS_M for a, b in zip(gaps, gaps[1:]))
    limit = _aitken([0.5 * (r["lhs"]["lower"] + r["lhs"]["upper"]) for r in rows])
    ok = all(r["agree"] for r in rows) and shrinking and gaps[-1] <= tol
    diagnostics = {"params": {"eps": eps, "eta": eta, "beta": beta}, "closed_form": exact,
                   "deltas": rows, "gap_shrinks": shrinking, "tolerance": tol,
                   "extrapolated_limit": limit, "heuristic": True}
    return VerificationReport("CodaMVT", lhs, rhs, bool(ok), max(gaps[-1],
                              abs(lhs.midpoint - rhs.midpoint)), diagnostics)


def _aitken(seq) -> float | None:
    """Aitken's delta-squared estimate from the last three terms (None if unusable)."""
    if len(seq) < 3:
        return None
    x0, x1, x2 = seq[-3:]
    den = x2 - 2 * x1 + x0
    if den == 0 or not math.isfinite(den):
        return float(x2)
    return float(x2 - (x2 - x1) ** 2 / den)
