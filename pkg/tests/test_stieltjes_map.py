import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stieltjes.core import OrientedInterval, Partition, PiecewiseMonotoneFn
from stieltjes.corpus import random_constant_sign, random_piecewise_linear, random_sign_changing
from stieltjes.errors import DomainError, HypothesisError
from stieltjes.stieltjes_map import (PullbackFn, build_indefinite, compose, induce_partition,
                                     map_direction, monotone_segments, preimage, range_of)

PMF = PiecewiseMonotoneFn


@pytest.fixture(scope="module")
def sine():
    cos = PMF.from_callable(np.cos, [0.0, math.pi, 1.5 * math.pi])
    return build_indefinite(cos, 0.0, 0.0)


@pytest.fixture(scope="module")
def parabola_map():
    # density 2x - 1 integrates to x^2 - x
    return build_indefinite(PMF.polynomial([-1.0, 2.0], 0.0, 1.0), 0.0, 0.0)


class TestIndefinite:
    def test_unit_density(self):
        Phi = build_indefinite(PMF.constant(1.0, 0, 1), 0.0, 0.0)
        np.testing.assert_allclose(Phi(np.array([0.25, 0.5, 1.0])), [0.25, 0.5, 1.0], atol=1e-9)

    def test_linear_density(self, parabola_map):
        assert parabola_map(0.5) == pytest.approx(-0.25, abs=1e-12)
        assert parabola_map(1.0) == pytest.approx(0.0, abs=1e-12)

    def test_quadrature_density_matches_sine(self, sine):
        xs = np.linspace(0, 1.5 * math.pi, 1001)
        np.testing.assert_allclose(sine(xs), np.sin(xs), atol=1e-10)
        assert sine(math.pi / 2) == pytest.approx(1.0, abs=1e-10)

    def test_base_value_and_point(self):
        Phi = build_indefinite(PMF.constant(2.0, 0, 1), 0.5, 3.0)
        assert Phi(0.5) == pytest.approx(3.0)
        assert Phi(0.0) == pytest.approx(2.0)

    def test_base_point_outside(self):
        with pytest.raises(DomainError):
            build_indefinite(PMF.constant(1.0, 0, 1), 2.0)

    def test_evaluation_outside(self, parabola_map):
        with pytest.raises(DomainError):
            parabola_map(1.5)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_agrees_with_trapezoid_of_density(self, seed):
        phi = random_sign_changing(np.random.default_rng(seed), 0, 1)
        Phi = build_indefinite(phi, 0.0, 0.0)
        xs = np.linspace(0, 1, 2 ** 14 + 1)
        # piecewise-linear density: trapezoid is exact except on cells holding a knot
        ref = np.concatenate([[0.0], np.cumsum(np.diff(xs) * 0.5 * (phi(xs[1:]) + phi(xs[:-1])))])
        np.testing.assert_allclose(Phi(xs), ref, atol=1e-6)


class TestRange:
    def test_identity(self):
        info = range_of(build_indefinite(PMF.constant(1.0, 0, 1), 0.0), (0, 1))
        assert info.range == pytest.approx((0.0, 1.0))
        assert (info.x_m, info.x_M) == (0.0, 1.0)

    def test_parabola(self, parabola_map):
        info = range_of(parabola_map, (0, 1))
        assert info.range == pytest.approx((-0.25, 0.0), abs=1e-12)
        assert info.x_m == pytest.approx(0.5)
        assert info.x_M in (0.0, 1.0)
        assert info.oriented_span.start == pytest.approx(0.0, abs=1e-12)
        assert info.oriented_span.end == pytest.approx(0.0, abs=1e-12)

    def test_sine(self, sine):
        info = range_of(sine, (0, 1.5 * math.pi))
        assert info.range == pytest.approx((-1.0, 1.0), abs=1e-10)
        assert info.x_m == pytest.approx(1.5 * math.pi)
        assert info.x_M == pytest.approx(math.pi / 2)
        assert info.oriented_span.to_list() == pytest.approx([0.0, -1.0], abs=1e-10)

    def test_segments_of_sine(self, sine):
        segs = monotone_segments(sine, 0, 1.5 * math.pi)
        assert [d for _, _, d in segs] == ["increasing", "decreasing"]
        assert segs[0][1] == pytest.approx(math.pi / 2, abs=1e-10)


class TestInducedPartition:
    def test_square(self):
        Phi = build_indefinite(PMF.polynomial([0.0, 2.0], 0, 1), 0.0)
        cells = induce_partition(Phi, Partition([0, 0.5, 1]))
        assert [c.to_list() for c in cells] == [pytest.approx([0, 0.25]), pytest.approx([0.25, 1])]

    def test_sine_reverse_cell(self, sine):
        cells = induce_partition(sine, Partition([0, math.pi / 2, 1.5 * math.pi]))
        assert cells[0].to_list() == pytest.approx([0.0, 1.0], abs=1e-10)
        assert cells[1].to_list() == pytest.approx([1.0, -1.0], abs=1e-10)
        assert cells[1].sign == -1

    def test_monotone_required(self, sine):
        with pytest.raises(HypothesisError):
            induce_partition(sine, Partition([0, 1.5 * math.pi]), require_monotone=True)


class TestCompose:
    def test_identity_outer_reproduces_map(self, sine):
        fc = compose(PMF.identity(-1, 1), sine, (0, 1.5 * math.pi))
        xs = np.random.default_rng(1).uniform(0, 1.5 * math.pi, 1000)
        np.testing.assert_allclose(fc(xs), sine(xs), atol=1e-9)

    def test_square_of_square(self):
        Phi = build_indefinite(PMF.polynomial([0.0, 2.0], 0, 1), 0.0)
        fc = compose(PMF.polynomial([0, 0, 1.0], 0, 1), Phi, (0, 1))
        assert fc.directions == ("increasing",)
        assert fc(0.5) == pytest.approx(0.0625)

    def test_step_pulls_back_to_preimage(self):
        Phi = build_indefinite(PMF.polynomial([0.0, 2.0], 0, 1), 0.0)
        fc = compose(PMF.step(0.25, 0, 1), Phi, (0, 1))
        assert fc.jumps() == [pytest.approx(0.5, abs=1e-12)]
        assert fc(0.49) == 0.0 and fc(0.51) == 1.0

    def test_preimage_of_monotone(self):
        Phi = build_indefinite(PMF.polynomial([0.0, 2.0], 0, 1), 0.0)
        assert preimage(Phi, [0.25], (0, 1))[0] == pytest.approx(0.5, abs=1e-12)
        assert map_direction(Phi, (0, 1)) == "increasing"

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_composition_matches_pointwise(self, seed):
        rng = np.random.default_rng(seed)
        phi = random_sign_changing(rng, 0, 1, max_pieces=4)
        Phi = build_indefinite(phi, 0.0, 0.0)
        lo, hi = range_of(Phi, (0, 1)).range
        f = random_piecewise_linear(rng, lo, hi, max_pieces=4)
        fc = compose(f, Phi, (0, 1))
        xs = rng.uniform(0, 1, 500)
        np.testing.assert_allclose(fc(xs), f(np.clip(Phi(xs), lo, hi)), atol=1e-9)

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_pullback_bounds_enclose_samples(self, seed):
        rng = np.random.default_rng(seed)
        phi = random_constant_sign(rng, 0, 1, max_pieces=3)
        Phi = build_indefinite(phi, 0.0, 0.0)
        lo, hi = range_of(Phi, (0, 1)).range
        g = random_piecewise_linear(rng, lo, hi, max_pieces=4, jump_prob=0.3)
        pb = PullbackFn(g, Phi, (0, 1))
        a, b = np.sort(rng.uniform(0, 1, 2))
        s, i = pb.cell_bounds([a], [b], closed=True)
        ys = g(np.clip(Phi(np.linspace(a, b, 2001)), lo, hi))
        assert s[0] >= ys.max() - 1e-12 and i[0] <= ys.min() + 1e-12


def test_oriented_interval_pair_accepted(sine):
    info = range_of(sine, OrientedInterval(1.5 * math.pi, 0.0))
    assert info.oriented_span.to_list() == pytest.approx([-1.0, 0.0], abs=1e-10)
