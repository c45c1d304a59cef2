import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from stieltjes.core import Partition, PiecewiseMonotoneFn
from stieltjes.darboux import StieltjesIntegrator, lower_sum, upper_sum
from stieltjes.errors import BudgetExhaustedError, HypothesisError
from stieltjes.stieltjes_map import build_indefinite, compose
from stieltjes.substitution import (classify, coda_closed_form, eta_budget_partition,
                                    eta_budget_sum, verify_change_of_variable_eq30,
                                    verify_coda_mvt, verify_composition_identity,
                                    verify_lemma_eq7, verify_substitution_eq1)
from stieltjes.suite import eq6_case

PMF = PiecewiseMonotoneFn
EPS = 1e-5


def const(c, a=0.0, b=1.0):
    return PMF.constant(c, a, b)


def ident(a=0.0, b=1.0):
    return PMF.identity(a, b)


class TestClassify:
    def test_identity_three_cells(self):
        cp = classify(ident(-1, 1), [(-1, -0.5), (-0.5, 0.5), (0.5, 1)], 0.1)
        assert cp.labels == ("G", "U", "G")

    def test_small_positive_constant_is_good(self):
        # strict sign wins over smallness: G is tested before B
        cp = classify(const(0.05, -1, 1), [(-1, 0), (0, 0.3), (0.3, 1)], 0.1)
        assert cp.labels == ("G", "G", "G")

    def test_small_sign_changing_density_is_bounded(self):
        cp = classify(PMF.polynomial([0.0, 0.05], -1, 1), [(-1, 0), (-0.5, 0.5), (0, 1)], 0.1)
        assert cp.labels == ("B", "B", "B")
        assert classify(const(0.0, -1, 1), [(-1, 1)], 0.1).labels == ("B",)

    def test_small_cell_around_zero(self):
        cp = classify(ident(-1, 1), [(-0.05, 0.05)], 0.1)
        assert cp.labels == ("B",)
        assert cp.sup_abs[0] == pytest.approx(0.05)

    def test_zero_at_cell_end_is_not_good(self):
        # closed cells: the density touches 0 at the right end of [-1, 0]
        cp = classify(ident(-1, 1), [(-1, 0), (0, 1)], 0.1)
        assert cp.labels == ("U", "U")

    def test_undulating_cells_oscillate_at_least_eta(self):
        psi = PMF.polynomial([0.0, -1.0, 1.0], -1, 2)
        P = Partition.uniform(-1, 2, 17)
        cp = classify(psi, P, 0.05)
        assert np.all(cp.osc[cp.mask("U")] >= 0.05)
        assert sum(cp.counts().values()) == 17

    def test_eta_must_be_positive(self):
        with pytest.raises(ValueError):
            classify(ident(), [(0, 1)], 0.0)

    def test_rows_and_dict(self):
        cp = classify(ident(-1, 1), [(-1, -0.5)], 0.1)
        assert cp.rows() == [[-1.0, -0.5, "G", 0.5, 1.0]]
        assert cp.to_dict() == {"eta": 0.1, "cells": [[-1.0, -0.5, "G"]]}


class TestEtaBudget:
    def test_constant_density_single_cell(self):
        P = eta_budget_partition(const(3.0), (0, 1), 0.1)
        assert P.n_cells == 1
        assert eta_budget_sum(const(3.0), P) == 0.0

    def test_identity_density(self):
        # sum osc * len = sum len^2 <= 0.25 already for the whole interval
        P = eta_budget_partition(ident(), (0, 1), 0.5)
        assert eta_budget_sum(ident(), P) <= 0.25
        assert eta_budget_sum(ident(), Partition.uniform(0, 1, 4)) == pytest.approx(0.25)

    def test_step_jump_becomes_breakpoint(self):
        f = PMF.step(0.3, 0, 1)
        P = eta_budget_partition(f, (0, 1), 0.01)
        assert 0.3 in P.breakpoints.tolist()
        # closed cells: only the cell ending at the jump sees both values
        k = P.breakpoints.tolist().index(0.3)
        assert eta_budget_sum(f, P) == pytest.approx(P.widths[k - 1])
        assert eta_budget_sum(f, P) <= 0.01 ** 2

    def test_budget_exhaustion(self):
        with pytest.raises(BudgetExhaustedError):
            eta_budget_partition(ident(), (0, 1), 1e-4, max_cells=64)

    @settings(max_examples=20, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1), eta=st.floats(0.02, 0.3))
    def test_undulating_length_within_eta(self, seed, eta):
        from stieltjes.corpus import random_sign_changing
        psi = random_sign_changing(np.random.default_rng(seed), 0, 1)
        P = eta_budget_partition(psi, (0, 1), eta)
        assert eta_budget_sum(psi, P) <= eta * eta + 1e-15
        assert classify(psi, P, eta).total_length("U") <= eta + 1e-10


class TestCompositionIdentity:
    def test_square_map_hand_sums(self):
        Phi = build_indefinite(PMF.polynomial([0.0, 2.0], 0, 1), 0.0)
        # f(y) = y, Psi(y) = y on the induced cells [0, 0.25], [0.25, 1]
        Psi = build_indefinite(const(1.0), 0.0)
        rep = verify_composition_identity(ident(), Psi, Phi, Partition([0, 0.5, 1]))
        assert rep.agree
        assert rep.lhs.upper == pytest.approx(0.25 * 0.25 + 1 * 0.75)
        assert rep.lhs.lower == pytest.approx(0 * 0.25 + 0.25 * 0.75)
        assert rep.max_gap <= 1e-12

    def test_identity_map(self):
        Phi = build_indefinite(const(1.0), 0.0)
        rep = verify_composition_identity(PMF.step(0.4, 0, 1), Phi, Phi, Partition.uniform(0, 1, 5))
        assert rep.agree and rep.max_gap == 0.0

    def test_constant_map_rejected(self):
        Phi = build_indefinite(const(0.0), 0.0)
        with pytest.raises(HypothesisError):
            verify_composition_identity(ident(), Phi, Phi, Partition.uniform(0, 1, 2))

    @settings(max_examples=30, deadline=None)
    @given(seed=st.integers(0, 2 ** 32 - 1))
    def test_random_tuples(self, seed):
        rep = eq6_case(np.random.default_rng(seed))()
        assert rep.agree and rep.max_gap <= 1e-10

    def test_sums_match_direct_recomputation(self):
        # the right-hand sums rebuilt by hand from f o Phi and Psi o Phi
        Phi = build_indefinite(PMF.polynomial([0.5, 1.0], 0, 1), 0.0)  # x/2 + x^2/2
        Psi = build_indefinite(PMF.polynomial([1.0, 1.0], 0, 1), 0.0)
        f = PMF.piecewise_linear([0, 0.5, 1], [0.2, -0.3, 0.4])
        P = Partition([0, 0.2, 0.7, 1])
        rep = verify_composition_identity(f, Psi, Phi, P)
        fc = compose(f, Phi, (0, 1))
        G = StieltjesIntegrator(lambda x: Psi(Phi(x)))
        assert rep.rhs.upper == pytest.approx(upper_sum(fc, G, P), abs=1e-12)
        assert rep.rhs.lower == pytest.approx(lower_sum(fc, G, P), abs=1e-12)


class TestLemma:
    def test_all_ones(self):
        rep = verify_lemma_eq7(const(1.0), const(1.0), None, const(1.0), None, (0, 1), epsilon=EPS)
        assert rep.agree and rep.lhs.contains(1.0) and rep.rhs.contains(1.0)

    def test_squares(self):
        # f(y) = y, psi(y) = y on [1, 2]; Phi(x) = x^2 on [1, sqrt 2]
        r2 = math.sqrt(2)
        rep = verify_lemma_eq7(ident(1, 2), ident(1, 2), None, PMF.polynomial([0, 2.0], 1, r2),
                               None, (1, r2), epsilon=1e-4, phi_base=1.0)
        assert rep.agree
        assert rep.lhs.contains(7 / 3) and rep.rhs.contains(7 / 3)

    def test_reversed_orientation(self):
        rep = verify_lemma_eq7(ident(), const(1.0), None, const(-1.0), None, (0, 1),
                               epsilon=EPS, phi_base=1.0)
        assert rep.diagnostics["image_interval"] == [1.0, 0.0]
        assert rep.lhs.contains(-0.5) and rep.rhs.contains(-0.5) and rep.agree

    def test_sign_changing_psi_rejected(self):
        with pytest.raises(HypothesisError, match="verify_substitution_eq1"):
            verify_lemma_eq7(ident(), PMF.polynomial([-1.0, 2.0], 0, 1), None, const(1.0), None,
                             (0, 1), epsilon=EPS)

    def test_sign_changing_phi_rejected(self):
        with pytest.raises(HypothesisError):
            verify_lemma_eq7(ident(-1, 1), const(1.0, -1, 1), None,
                             PMF.polynomial([-1.0, 2.0], 0, 1), None, (0, 1), epsilon=EPS)


class TestSubstitution:
    def test_unit_integrand(self):
        rep = verify_substitution_eq1(const(1.0), PMF.polynomial([-1.0, 2.0], 0, 1), None,
                                      const(1.0), None, (0, 1), epsilon=EPS)
        assert rep.agree and rep.lhs.contains(0.0) and rep.rhs.contains(0.0)

    def test_one_sixth_with_chain(self):
        rep = verify_substitution_eq1(ident(), PMF.polynomial([-1.0, 2.0], 0, 1), None,
                                      const(1.0), None, (0, 1), epsilon=EPS)
        assert rep.agree and rep.lhs.contains(1 / 6) and rep.rhs.contains(1 / 6)
        assert rep.diagnostics["chain_holds"]
        assert all(c["holds"] for c in rep.diagnostics["checks"].values())

    def test_cosine_density(self):
        psi = PMF.from_callable(lambda y: np.cos(np.pi * np.asarray(y)), [0.0, 1.0])
        rep = verify_substitution_eq1(PMF.polynomial([0, 0, 1.0], 0, 1), psi, None,
                                      const(2.0, 0, 0.5), None, (0, 0.5), epsilon=EPS)
        exact = -2 / math.pi ** 2
        assert rep.agree and rep.lhs.contains(exact) and rep.rhs.contains(exact)
        assert rep.diagnostics["chain_holds"]

    def test_sign_changing_phi_rejected(self):
        with pytest.raises(HypothesisError, match="eq30"):
            verify_substitution_eq1(ident(-1, 1), ident(-1, 1), None,
                                    PMF.polynomial([-1.0, 2.0], 0, 1), None, (0, 1), epsilon=EPS)


class TestChangeOfVariable:
    def test_symmetric_map_gives_zero(self):
        phi = PMF.polynomial([-1.0, 2.0], 0, 1)
        f = PMF.piecewise_linear([-0.25, -0.1, 0.0], [0.3, -0.2, 0.5])
        rep = verify_change_of_variable_eq30(f, const(0.7, -0.25, 0), None, phi, None, (0, 1),
                                             epsilon=EPS)
        assert (rep.lhs.lower, rep.lhs.upper) == (0.0, 0.0)
        assert abs(rep.rhs.midpoint) <= 1e-8 and rep.agree

    def test_cosine_map(self):
        cos = PMF.from_callable(np.cos, [0.0, math.pi, 1.5 * math.pi])
        rep = verify_change_of_variable_eq30(ident(-1, 1), const(1.0, -1, 1), None, cos, None,
                                             (0, 1.5 * math.pi), epsilon=1e-3)
        # sin^2(x)/2 between 0 and 3 pi / 2, and y^2/2 between 0 and -1
        assert rep.lhs.contains(0.5) and rep.rhs.contains(0.5) and rep.agree
        assert rep.diagnostics["chain_holds"]

    def test_unit_integrand_matches_increment(self):
        phi = PMF.polynomial([0.5, -3.0], 0, 1)  # 0.5 - 3x changes sign at 1/6
        Phi = build_indefinite(phi, 0.0, 0.0)
        psi = PMF.polynomial([1.0, 0.5], -1, 0.1)
        Psi = build_indefinite(psi, -1.0, 0.0)
        rep = verify_change_of_variable_eq30(const(1.0, -1, 0.1), psi, Psi, phi, Phi, (0, 1),
                                             epsilon=EPS)
        expected = Psi(Phi(1.0)) - Psi(Phi(0.0))
        assert rep.lhs.contains(expected) and rep.rhs.contains(expected)

    def test_sign_changing_psi_rejected(self):
        # the range of x^2 - x is [-0.25, 0], where y + 0.1 changes sign
        with pytest.raises(HypothesisError):
            verify_change_of_variable_eq30(ident(-1, 1), PMF.polynomial([0.1, 1.0], -1, 1), None,
                                           PMF.polynomial([-1.0, 2.0], 0, 1), None, (0, 1),
                                           epsilon=EPS)

    def test_endpoint_insertion_does_not_grow_budget(self):
        phi = PMF.polynomial([0.5, -3.0], 0, 1)
        rep = verify_change_of_variable_eq30(const(1.0, -1, 0.1), const(1.0, -1, 0.1), None, phi,
                                             None, (0, 1), epsilon=1e-4)
        d = rep.diagnostics
        assert d["oscillation_sum_after_insert"] <= d["oscillation_sum_before_insert"] + 1e-15


class TestCoda:
    def test_five_ninths(self):
        rep = verify_coda_mvt(0.25, 0.25, 0.6)
        assert coda_closed_form(0.25, 0.25, 0.6) == pytest.approx(5 / 9)
        assert rep.agree and rep.diagnostics["gap_shrinks"]
        assert abs(rep.lhs.midpoint - 5 / 9) <= 1e-3
        assert rep.diagnostics["heuristic"] is True

    @pytest.mark.parametrize("beta", [0.3, 0.5, 0.58])
    def test_gate(self, beta):
        with pytest.raises(HypothesisError):
            verify_coda_mvt(0.25, 0.25, beta)

    @pytest.mark.parametrize("eps", [0.0, 1.0])
    def test_parameter_range(self, eps):
        with pytest.raises(HypothesisError):
            verify_coda_mvt(eps, 0.25, 2.0)
