import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stieltjes.core import (EPS_M, Enclosure, OrientedInterval, Partition, PiecewiseMonotoneFn,
                            ProductFn, abs_bound_on, inf_on, oscillation, split_interval, sup_on)
from stieltjes.corpus import random_piecewise_linear, random_piecewise_quadratic

PMF = PiecewiseMonotoneFn


def dense_sup_inf(f, lo, hi, n=10 ** 6):
    xs = np.linspace(lo, hi, n + 1)
    ys = f(xs)
    return ys.max(), ys.min()


@pytest.fixture
def parabola():
    # x^2 - x, split at its vertex
    return PMF.polynomial([0.0, -1.0, 1.0], 0.0, 1.0)


@pytest.fixture
def step():
    return PMF.step(0.5, 0.0, 1.0)


class TestSupInf:
    def test_identity_sup_is_right_end(self):
        assert sup_on(PMF.identity(0, 1), (0.25, 0.5)) == 0.5

    def test_identity_inf_is_left_end(self):
        assert inf_on(PMF.identity(0, 1), (0.25, 0.5)) == 0.25

    def test_step_sup_is_attained_value(self, step):
        assert sup_on(step, (0, 1)) == 1.0

    def test_step_inf_left_of_jump(self, step):
        assert inf_on(step, (0.4, 0.6)) == 0.0

    def test_parabola_sup_matches_sampling(self, parabola):
        expected, _ = dense_sup_inf(parabola, 0.2, 0.8)
        assert sup_on(parabola, (0.2, 0.8)) == pytest.approx(-0.16, abs=1e-15)
        assert sup_on(parabola, (0.2, 0.8)) >= expected - 1e-15

    def test_parabola_inf_at_vertex(self, parabola):
        assert inf_on(parabola, (0.2, 0.8)) == pytest.approx(-0.25, abs=1e-15)

    def test_outside_domain_rejected(self, parabola):
        with pytest.raises(ValueError):
            sup_on(parabola, (0.5, 1.5))


class TestOscillation:
    def test_point_interval_of_continuous_function(self, parabola):
        assert oscillation(parabola, (0.3, 0.3)) == 0.0

    def test_straddling_jump(self, step):
        assert oscillation(step, (0.4, 0.6)) == 1.0

    def test_parabola_on_whole_domain(self, parabola):
        hi, lo = dense_sup_inf(parabola, 0, 1)
        assert oscillation(parabola, (0, 1)) == pytest.approx(hi - lo, abs=1e-12)
        assert oscillation(parabola, (0, 1)) == pytest.approx(0.25, abs=1e-15)

    def test_abs_bound(self, parabola):
        assert abs_bound_on(parabola, (0, 1)) == pytest.approx(0.25)


class TestSplit:
    def test_split_midpoint(self):
        assert split_interval((0, 1), 0.5) == ((0.0, 0.5), (0.5, 1.0))

    @pytest.mark.parametrize("x", [0.0, 1.0, 1.5, -0.1])
    def test_split_requires_interior_point(self, x):
        with pytest.raises(ValueError):
            split_interval((0, 1), x)

    @settings(max_examples=200, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), t=st.floats(0.01, 0.99), u=st.floats(0, 0.5),
           w=st.floats(0.05, 0.5))
    def test_weighted_oscillation_subadditive(self, seed, t, u, w):
        f = random_piecewise_linear(np.random.default_rng(seed), 0, 1, jump_prob=0.3)
        lo, hi = u, u + w
        x = lo + t * (hi - lo)
        (a, b), (c, d) = split_interval((lo, hi), x)
        parts = oscillation(f, (a, b)) * (b - a) + oscillation(f, (c, d)) * (d - c)
        assert parts <= oscillation(f, (lo, hi)) * (hi - lo) + EPS_M


class TestPiecewiseMonotone:
    def test_polynomial_split_at_extremum(self, parabola):
        assert parabola.breakpoints.tolist() == [0.0, 0.5, 1.0]
        assert parabola.directions == ("decreasing", "increasing")

    def test_step_limits_and_value(self, step):
        assert step.left_limit(1) == 0.0
        assert step.right_limit(1) == 1.0
        assert step(0.5) == 1.0
        assert step.jumps() == [0.5]
        assert not step.is_continuous()

    def test_unsorted_breakpoints_rejected(self):
        with pytest.raises(ValueError):
            PMF.piecewise_linear([0, 0.6, 0.5, 1], [0, 1, 0, 1])

    def test_declared_direction_must_match(self):
        with pytest.raises(ValueError):
            PMF.from_callable(lambda x: x, [0, 1], directions=["decreasing"])

    def test_evaluation_outside_domain(self, parabola):
        with pytest.raises(ValueError):
            parabola(1.5)

    @settings(max_examples=50, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_cell_bounds_match_dense_sampling(self, seed):
        rng = np.random.default_rng(seed)
        f = random_piecewise_quadratic(rng, -1, 2)
        lo, hi = np.sort(rng.uniform(-1, 2, 2))
        xs = np.linspace(lo, hi, 20001)
        ys = f(xs)
        s, i = sup_on(f, (lo, hi)), inf_on(f, (lo, hi))
        # exact bounds enclose every sample and are nearly attained
        assert s >= ys.max() - 1e-12 and i <= ys.min() + 1e-12
        assert s - ys.max() < 1e-3 and ys.min() - i < 1e-3

    def test_open_cells_ignore_endpoint_jump(self, step):
        sup, inf = step.cell_bounds([0.0], [0.5], closed=False)
        assert (sup[0], inf[0]) == (0.0, 0.0)
        sup, inf = step.cell_bounds([0.0], [0.5], closed=True)
        assert (sup[0], inf[0]) == (1.0, 0.0)

    def test_negated_and_restrict(self, parabola):
        neg = parabola.negated()
        assert sup_on(neg, (0, 1)) == pytest.approx(0.25)
        r = parabola.restrict(0.25, 0.75)
        assert r.domain == (0.25, 0.75)
        assert r(0.5) == pytest.approx(-0.25)


class TestProduct:
    def test_bounds_enclose_samples(self):
        f = PMF.polynomial([0.0, 1.0], -1.0, 1.0)
        g = PMF.polynomial([1.0, 0.0, 1.0], -1.0, 1.0)
        p = ProductFn([f, g])
        xs = np.linspace(-1, 1, 10001)
        ys = xs * (1 + xs ** 2)
        s, i = p.cell_bounds([-1.0], [1.0], closed=True)
        assert s[0] >= ys.max() - 1e-15 and i[0] <= ys.min() + 1e-15
        assert p(0.5) == pytest.approx(0.625)


class TestPartition:
    def test_uniform(self):
        P = Partition.uniform(0, 1, 4)
        assert P.to_list() == [0.0, 0.25, 0.5, 0.75, 1.0]
        assert P.mesh == 0.25

    def test_insert_skips_near_duplicates(self):
        P = Partition([0.0, 0.5, 1.0]).insert([0.5 + 1e-14, 0.25, 2.0])
        assert P.to_list() == [0.0, 0.25, 0.5, 1.0]

    def test_refinement_relation(self):
        P = Partition([0, 0.5, 1])
        Q = P.refine([0.25, 0.75])
        assert Q.is_finer_than(P) and not P.is_finer_than(Q)

    @pytest.mark.parametrize("pts", [[0.0], [0.0, 0.0], [1.0, 0.0], [0.0, math.inf]])
    def test_invalid(self, pts):
        with pytest.raises(ValueError):
            Partition(pts)


class TestEnclosure:
    def test_contains_and_overlaps(self):
        e = Enclosure(0.0, 1.0)
        assert e.contains(0.5) and not e.contains(1.5)
        assert e.overlaps(Enclosure(1.0, 2.0))
        assert not e.overlaps(Enclosure(1.1, 2.0))

    def test_reject_inverted(self):
        with pytest.raises(ValueError):
            Enclosure(1.0, 0.0)

    def test_arithmetic(self):
        e = -Enclosure(1.0, 2.0) + Enclosure(0.5, 0.5)
        assert (e.lower, e.upper) == (-1.5, -0.5)

    def test_oriented_interval(self):
        I = OrientedInterval(1.0, 0.0)
        assert I.sign == -1 and I.hull() == (0.0, 1.0) and I.length == 1.0
        assert I.reversed() == OrientedInterval(0.0, 1.0)
