import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stieltjes.core import Partition, PiecewiseMonotoneFn
from stieltjes.corpus import random_partition_points, random_piecewise_linear
from stieltjes.darboux import (StieltjesIntegrator, certify_integrable, integrate,
                               integrate_report, lower_sum, oscillation_sum, upper_sum)
from stieltjes.errors import HypothesisError, NotCertifiedError
from stieltjes.oracle import reference_integral

PMF = PiecewiseMonotoneFn
HALVES = Partition([0.0, 0.5, 1.0])


def square(x):
    return np.asarray(x, dtype=float) ** 2


SQUARE = StieltjesIntegrator(square)
IDENT = StieltjesIntegrator.identity()


class TestSums:
    # each expected value is the two-term sum written out by hand

    def test_constant_integrand(self):
        f = PMF.constant(3.0, 0, 1)
        P = Partition([0, 0.3, 0.7, 1])
        assert upper_sum(f, IDENT, P) == pytest.approx(3.0)
        assert lower_sum(f, IDENT, P) == pytest.approx(3.0)
        assert oscillation_sum(f, SQUARE, P) == 0.0

    def test_identity_against_identity(self):
        f = PMF.identity(0, 1)
        assert upper_sum(f, IDENT, HALVES) == 0.5 * 0.5 + 1 * 0.5
        assert lower_sum(f, IDENT, HALVES) == 0 * 0.5 + 0.5 * 0.5
        assert oscillation_sum(f, IDENT, HALVES) == 0.5

    def test_identity_against_square(self):
        f = PMF.identity(0, 1)
        assert upper_sum(f, SQUARE, HALVES) == 0.5 * 0.25 + 1 * 0.75
        assert lower_sum(f, SQUARE, HALVES) == 0 * 0.25 + 0.5 * 0.75

    def test_step_jump_on_breakpoint_has_no_oscillation(self):
        f = PMF.step(0.5, 0, 1)
        assert oscillation_sum(f, IDENT, HALVES) == 0.0
        assert oscillation_sum(f, IDENT, Partition([0, 0.4, 1])) == pytest.approx(0.6)

    def test_decreasing_integrator_rejected(self):
        G = StieltjesIntegrator(lambda x: -x, "decreasing")
        with pytest.raises(HypothesisError):
            oscillation_sum(PMF.identity(0, 1), G, HALVES)

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_oscillation_sum_is_upper_minus_lower(self, seed):
        rng = np.random.default_rng(seed)
        f = random_piecewise_linear(rng, 0, 1, jump_prob=0.3)
        P = Partition(random_partition_points(rng, 0, 1, 30))
        U, L = upper_sum(f, SQUARE, P), lower_sum(f, SQUARE, P)
        assert abs(oscillation_sum(f, SQUARE, P) - (U - L)) <= 1e-12

    @settings(max_examples=100, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_refinement_tightens_both_sums(self, seed):
        rng = np.random.default_rng(seed)
        f = random_piecewise_linear(rng, 0, 1, jump_prob=0.3)
        P = Partition(random_partition_points(rng, 0, 1, 10))
        Q = P.refine(rng.uniform(0, 1, 5))
        assert upper_sum(f, SQUARE, Q) <= upper_sum(f, SQUARE, P) + 1e-14
        assert lower_sum(f, SQUARE, Q) >= lower_sum(f, SQUARE, P) - 1e-14


class TestCertification:
    def test_identity_certifies_quickly(self):
        rep = certify_integrable(PMF.identity(0, 1), IDENT, 0.01)
        assert rep.certified and rep.gap <= 0.01
        assert rep.lower <= 0.5 <= rep.upper

    def test_constant_certified_at_round_zero(self):
        rep = certify_integrable(PMF.constant(2.0, 0, 1), SQUARE, 1e-9)
        assert rep.rounds == 0 and rep.certified
        assert rep.upper == pytest.approx(2.0) and rep.lower == pytest.approx(2.0)

    def test_square_integrator_contains_two_thirds(self):
        rep = certify_integrable(PMF.identity(0, 1), SQUARE, 1e-4)
        assert rep.certified
        assert rep.lower <= 2 / 3 <= rep.upper

    def test_history_never_increases(self):
        rep = certify_integrable(PMF.identity(0, 1), SQUARE, 1e-5)
        gaps = [h for h in rep.history]
        assert all(b <= a + 1e-15 for a, b in zip(gaps, gaps[1:]))

    def test_budget_exhaustion_reports_uncertified(self):
        rep = certify_integrable(PMF.identity(0, 1), SQUARE, 1e-8, max_rounds=3)
        assert not rep.certified
        assert rep.lower <= 2 / 3 <= rep.upper

    def test_invalid_epsilon(self):
        with pytest.raises(ValueError):
            certify_integrable(PMF.identity(0, 1), IDENT, 0.0)

    def test_report_dict_fields(self):
        d = certify_integrable(PMF.identity(0, 1), IDENT, 0.1).to_dict()
        assert set(d) == {"partition", "upper", "lower", "gap", "osc_sum", "epsilon",
                          "certified", "rounds"}


class TestIntegrate:
    def test_reversed_interval_negates(self):
        e = integrate(PMF.identity(0, 1), IDENT, (1, 0), 1e-6)
        assert e.contains(-0.5) and e.width() <= 1e-6

    def test_degenerate_interval(self):
        e = integrate(PMF.identity(0, 1), IDENT, (0.3, 0.3), 1e-6)
        assert (e.lower, e.upper) == (0.0, 0.0)

    def test_step_integrand(self):
        # oracle: 0 on [0, 0.5), 1 on [0.5, 1] integrates to 0.5
        f = PMF.step(0.5, 0, 1)
        ref = reference_integral(f, lambda x: x, (0, 1), 2 ** 12)
        e = integrate(f, IDENT, (0, 1), 1e-9)
        assert e.contains(0.5) and ref.value == pytest.approx(0.5, abs=1e-12)

    def test_decreasing_integrator(self):
        G = StieltjesIntegrator(lambda x: 1 - np.asarray(x), "decreasing")
        e = integrate(PMF.identity(0, 1), G, (0, 1), 1e-6)
        assert e.contains(-0.5)

    def test_not_certified_raises_with_best_bracket(self):
        with pytest.raises(NotCertifiedError) as info:
            integrate(PMF.identity(0, 1), SQUARE, (0, 1), 1e-9, max_rounds=2)
        assert info.value.enclosure.contains(2 / 3)
        assert not info.value.report.certified

    def test_degenerate_has_no_report(self):
        _, rep = integrate_report(PMF.identity(0, 1), IDENT, (0.5, 0.5), 1e-6)
        assert rep is None

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_enclosure_contains_oracle(self, seed):
        rng = np.random.default_rng(seed)
        f = random_piecewise_linear(rng, 0, 1, max_pieces=4, jump_prob=0.3)
        e = integrate(f, SQUARE, (0, 1), 1e-4)
        ref = reference_integral(f, square, (0, 1), 2 ** 16)
        assert e.contains(ref.richardson_estimate, tol=ref.stability_gap + 1e-12)
