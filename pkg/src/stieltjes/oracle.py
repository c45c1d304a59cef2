"""Brute-force reference integrals.

Midpoint Riemann-Stieltjes sums on fixed grids.  Deliberately naive and kept
apart from :mod:`stieltjes.darboux`: nothing here looks at piece structure,
sup/inf bounds or refinement, so agreement between the two is meaningful.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

DEFAULT_N = 2 ** 20
_CHUNK = 2 ** 16


@dataclass(frozen=True)
class OracleResult:
    value: float
    grid_cells: int
    richardson_estimate: float
    stability_gap: float

    def to_dict(self) -> dict:
        return {"value": self.value, "grid_cells": self.grid_cells,
                "richardson_estimate": self.richardson_estimate,
                "stability_gap": self.stability_gap}


def _evaluate(func, xs):
    out = np.asarray(func(xs), dtype=float)
    return np.broadcast_to(out, xs.shape) if out.shape != xs.shape else out


def _pairwise(values: np.ndarray) -> float:
    # numpy's sum already reduces pairwise; chunk totals are combined with fsum
    return math.fsum(float(values[i:i + _CHUNK].sum()) for i in range(0, values.size, _CHUNK))


def _midpoint_sum(f, G, nodes: np.ndarray) -> float:
    mids = 0.5 * (nodes[:-1] + nodes[1:])
    return _pairwise(_evaluate(f, mids) * np.diff(_evaluate(G, nodes)))


def _endpoints(interval):
    a, b = (float(v) for v in interval)
    return a, b


def _check_n(N: int) -> int:
    N = int(N)
    if N < 2 or N & (N - 1):
        raise ValueError("N must be a power of two, at least 2")
    return N


def reference_integral(f, G, interval, N: int = DEFAULT_N) -> OracleResult:
    """Midpoint sums of ``f dG`` on uniform grids of ``N`` and ``N/2`` cells.

    ``interval`` is oriented: ``(b, a)`` with ``b > a`` returns the negative
    of ``(a, b)``.
    """
    N = _check_n(N)
    a, b = _endpoints(interval)
    if a == b:
        return OracleResult(0.0, N, 0.0, 0.0)
    sign = 1.0 if b > a else -1.0
    lo, hi = min(a, b), max(a, b)
    fine = np.linspace(lo, hi, N + 1)
    v_n = sign * _midpoint_sum(f, G, fine)
    v_half = sign * _midpoint_sum(f, G, fine[::2])
    return OracleResult(v_n, N, (4 * v_n - v_half) / 3, abs(v_n - v_half))


def graded_nodes(lo: float, hi: float, N: int, levels: int | None = None) -> np.ndarray:
    """Grid on ``[lo, hi]`` clustered towards ``lo``.

    The interval is cut geometrically (ratio 2) into ``levels`` blocks
    ``[lo + L/2^(j+1), lo + L/2^j]`` plus a final block touching ``lo``; every
    block receives the same number of uniform cells, ``N / (levels + 1)``
    rounded to a power of two, so halving the grid halves every block.
    """
    N = _check_n(N)
    L = hi - lo
    if levels is None:
        levels = max(1, min(40, int(math.log2(N)) - 4))
    per = max(2, 2 ** int(math.floor(math.log2(max(2, N // (levels + 1))))))
    cuts = [lo] + [lo + L / 2 ** j for j in range(levels, -1, -1)]
    parts = [np.linspace(cuts[k], cuts[k + 1], per + 1)[:-1] for k in range(len(cuts) - 1)]
    return np.append(np.concatenate(parts), hi)


def reference_integral_graded(f, G, interval, N: int = DEFAULT_N,
                              levels: int | None = None) -> OracleResult:
    """Like :func:`reference_integral` but on a grid clustered at the left end.

    Meant for integrands and integrators whose derivatives blow up at the
    left endpoint.  ``grid_cells`` reports the actual number of cells used.
    """
    N = _check_n(N)
    a, b = _endpoints(interval)
    if a == b:
        return OracleResult(0.0, N, 0.0, 0.0)
    sign = 1.0 if b > a else -1.0
    lo, hi = min(a, b), max(a, b)
    fine = graded_nodes(lo, hi, N, levels)
    v_n = sign * _midpoint_sum(f, G, fine)
    v_half = sign * _midpoint_sum(f, G, fine[::2])
    return OracleResult(v_n, fine.size - 1, (4 * v_n - v_half) / 3, abs(v_n - v_half))
