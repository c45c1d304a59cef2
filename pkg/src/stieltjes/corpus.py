"""Seeded random function generators for property tests and the suite command.

Every generator takes a :class:`numpy.random.Generator` so a single seed
reproduces a whole corpus.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import PiecewiseMonotoneFn


def _knots(rng: np.random.Generator, a: float, b: float, n_pieces: int) -> np.ndarray:
    inner = np.sort(rng.uniform(a, b, n_pieces - 1))
    xs = np.concatenate([[a], inner, [b]])
    # keep pieces from collapsing; tiny pieces only slow refinement down
    min_gap = (b - a) / (8 * n_pieces)
    for i in range(1, xs.size - 1):
        xs[i] = max(xs[i], xs[i - 1] + min_gap)
    if xs[-2] > b - min_gap:
        return np.linspace(a, b, n_pieces + 1)
    return xs


def random_piecewise_linear(rng, a: float = 0.0, b: float = 1.0, max_pieces: int = 8,
                            low: float = -1.0, high: float = 1.0,
                            jump_prob: float = 0.0) -> PiecewiseMonotoneFn:
    """Piecewise-linear function with values drawn from ``[low, high]``.

    With ``jump_prob > 0`` each interior knot independently becomes a jump.
    """
    n = int(rng.integers(1, max_pieces + 1))
    xs = _knots(rng, a, b, n)
    ys = rng.uniform(low, high, xs.size)
    jumps = {}
    for j in range(1, xs.size - 1):
        if rng.random() < jump_prob:
            right = float(rng.uniform(low, high))
            point = float(rng.choice([ys[j], right]))
            jumps[j] = (right, point)
    return PiecewiseMonotoneFn.piecewise_linear(xs, ys, jumps)


def random_piecewise_quadratic(rng, a: float = 0.0, b: float = 1.0, max_pieces: int = 8,
                               low: float = -1.0, high: float = 1.0) -> PiecewiseMonotoneFn:
    """Continuous piecewise-quadratic function, monotone on each piece.

    Each piece interpolates its end values and bends by at most 90% of what
    keeps the derivative from changing sign, so values stay in ``[low, high]``.
    """
    n = int(rng.integers(1, max_pieces + 1))
    xs = _knots(rng, a, b, n)
    ys = rng.uniform(low, high, xs.size)
    coefs = []
    for i in range(n):
        x0, h = xs[i], xs[i + 1] - xs[i]
        s = (ys[i + 1] - ys[i]) / h
        c = rng.uniform(-0.9, 0.9) * abs(s) / h
        # y0 + s t + c t (t - h) with t = x - x0, expanded in powers of x
        p = np.polynomial.Polynomial([ys[i], s - c * h, c])
        shift = np.polynomial.Polynomial([-x0, 1.0])
        coefs.append(p(shift).coef)
    return PiecewiseMonotoneFn.piecewise_polynomial(xs, coefs)


def random_constant_sign(rng, a: float = 0.0, b: float = 1.0, max_pieces: int = 8,
                         sign: int | None = None, quadratic: bool = False,
                         low: float = 0.25, high: float = 1.5) -> PiecewiseMonotoneFn:
    """Density bounded away from zero: values in ``[low, high]`` times a random sign."""
    if not 0 < low <= high:
        raise ValueError("need 0 < low <= high")
    if sign is None:
        sign = 1 if rng.random() < 0.5 else -1
    gen = random_piecewise_quadratic if quadratic else random_piecewise_linear
    fn = gen(rng, a, b, max_pieces, low, high)
    return fn if sign > 0 else fn.negated()


def random_sign_changing(rng, a: float = 0.0, b: float = 1.0, max_pieces: int = 8,
                         quadratic: bool = False, amplitude: float = 1.0) -> PiecewiseMonotoneFn:
    """Density that takes both signs on ``[a, b]`` (at least two pieces).

    Values lie in ``[-amplitude, amplitude]`` and reach beyond a tenth of it
    on both sides.
    """
    gen = random_piecewise_quadratic if quadratic else random_piecewise_linear
    while True:
        fn = gen(rng, a, b, max(2, max_pieces), -amplitude, amplitude)
        v = fn.values
        if v.min() < -0.1 * amplitude and v.max() > 0.1 * amplitude:
            return fn


def random_partition_points(rng, a: float, b: float, max_cells: int = 12) -> np.ndarray:
    n = int(rng.integers(1, max_cells + 1))
    return np.concatenate([[a], np.sort(rng.uniform(a, b, n - 1)), [b]])


@dataclass(frozen=True)
class IntegrationCase:
    """One ``int_interval f dG`` problem of the shared integration corpus."""

    name: str
    f: PiecewiseMonotoneFn
    G: object  # StieltjesIntegrator
    interval: tuple


def _power(p):
    return lambda x: np.asarray(x, dtype=float) ** p


def integration_corpus(seed: int = 0, n: int = 48) -> list[IntegrationCase]:
    """Seeded mix of integrands (linear or quadratic pieces, with or without
    jumps) against four kinds of integrator: the identity, ``x^2``, ``sin``
    and indefinite integrals of random constant-sign densities.
    """
    from .darboux import StieltjesIntegrator
    from .stieltjes_map import build_indefinite

    rng = np.random.default_rng(seed)
    fixed = [
        ("identity", StieltjesIntegrator.identity()),
        ("square", StieltjesIntegrator(_power(2), "increasing")),
        ("sine", StieltjesIntegrator(np.sin, "increasing")),
    ]
    cases = []
    for k in range(n):
        kind = k % 4
        if kind < 3:
            label, G = fixed[kind]
            a, b = (0.0, 1.0) if kind < 2 else (0.0, 0.5 * np.pi)
        else:
            a, b = 0.0, 1.0
            density = random_constant_sign(rng, a, b, max_pieces=4)
            G = StieltjesIntegrator.from_indefinite(build_indefinite(density, a, 0.0))
            label = "indefinite"
        if rng.random() < 0.5:
            f = random_piecewise_linear(rng, a, b, 6, jump_prob=0.3)
            shape = "linear"
        else:
            f = random_piecewise_quadratic(rng, a, b, 4)
            shape = "quadratic"
        cases.append(IntegrationCase(f"{k}:{shape}/{label}", f, G, (a, b)))
    return cases
