"""Randomized verification cases shared by the ``suite`` command and the tests.

Each case is drawn from its own generator seeded with ``(seed, index)``, so
case ``k`` is the same whatever the total number of cases.  Identities
rotate through the composition identity for sums, the constant-sign
substitution lemma, the substitution rule with a sign-changing ``psi`` and
the change of variable with a sign-changing ``phi``.

Amplitudes are kept moderate: first-order Darboux brackets need a number
of cells that grows with the square of the integrand's variation, and the
point here is coverage of shapes, not of steepness.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .core import Enclosure, Partition
from .corpus import (random_constant_sign, random_partition_points, random_piecewise_linear,
                     random_sign_changing)
from .stieltjes_map import build_indefinite, range_of
from .substitution import (VerificationReport, verify_change_of_variable_eq30,
                           verify_composition_identity, verify_lemma_eq7,
                           verify_substitution_eq1)

IDENTITIES = ("Eq6", "Eq7", "Eq1", "Eq30")
DEFAULT_SUITE_EPSILON = 1e-4


@dataclass
class Case:
    index: int
    identity: str
    run: object  # zero-argument callable returning a VerificationReport


def case_rng(seed: int, index: int) -> np.random.Generator:
    return np.random.default_rng([int(seed), int(index)])


def _monotone_phi(rng, a=0.0, b=1.0):
    sign = 1 if rng.random() < 0.75 else -1
    phi = random_constant_sign(rng, a, b, max_pieces=4, sign=sign, low=0.5, high=1.0)
    return phi, build_indefinite(phi, a, 0.0)


def _image_functions(rng, Phi, interval, *, psi_sign_changes: bool, jump_prob: float = 0.3):
    lo, hi = range_of(Phi, interval).range
    span = hi - lo
    f = random_piecewise_linear(rng, lo, hi, 4, -0.5, 0.5, jump_prob=jump_prob)
    if psi_sign_changes:
        psi = random_sign_changing(rng, lo, hi, max_pieces=4)
    else:
        psi = random_constant_sign(rng, lo, hi, max_pieces=4, low=0.5, high=1.0)
    return f, psi, span


def eq6_case(rng, epsilon=None):
    phi, Phi = _monotone_phi(rng)
    f, psi, _ = _image_functions(rng, Phi, (0.0, 1.0), psi_sign_changes=False)
    Psi = build_indefinite(psi, psi.domain[0], 0.0)
    P = Partition(random_partition_points(rng, 0.0, 1.0))
    return lambda: verify_composition_identity(f, Psi, Phi, P, epsilon)


def eq7_case(rng, epsilon=DEFAULT_SUITE_EPSILON):
    phi, Phi = _monotone_phi(rng)
    f, psi, _ = _image_functions(rng, Phi, (0.0, 1.0), psi_sign_changes=False)
    return lambda: verify_lemma_eq7(f, psi, None, phi, Phi, (0.0, 1.0), epsilon=epsilon)


def eq1_case(rng, epsilon=DEFAULT_SUITE_EPSILON):
    phi, Phi = _monotone_phi(rng)
    f, psi, _ = _image_functions(rng, Phi, (0.0, 1.0), psi_sign_changes=True)
    return lambda: verify_substitution_eq1(f, psi, None, phi, Phi, (0.0, 1.0), epsilon=epsilon)


def eq30_case(rng, epsilon=DEFAULT_SUITE_EPSILON):
    phi = random_sign_changing(rng, 0.0, 1.0, max_pieces=4)
    Phi = build_indefinite(phi, 0.0, 0.0)
    f, psi, _ = _image_functions(rng, Phi, (0.0, 1.0), psi_sign_changes=False)
    return lambda: verify_change_of_variable_eq30(f, psi, None, phi, Phi, (0.0, 1.0),
                                                  epsilon=epsilon)


_BUILDERS = {"Eq6": eq6_case, "Eq7": eq7_case, "Eq1": eq1_case, "Eq30": eq30_case}


def make_case(seed: int, index: int, epsilon: float = DEFAULT_SUITE_EPSILON) -> Case:
    identity = IDENTITIES[index % len(IDENTITIES)]
    rng = case_rng(seed, index)
    # the sum identity is exact; its integrals use the same epsilon as the others
    return Case(index, identity, _BUILDERS[identity](rng, epsilon))


def brackets_agree(lhs: Enclosure, rhs: Enclosure, tol: float) -> bool:
    """Whether the two enclosures, each widened by ``tol``, overlap.

    A negative ``tol`` shrinks them, which is how a deliberately corrupted
    tolerance produces disagreements.
    """
    gap = abs(lhs.midpoint - rhs.midpoint)
    return bool(gap <= 0.5 * (lhs.width() + rhs.width()) + 2.0 * tol)


def run_case(case: Case, agree_tol: float | None = None) -> dict:
    """Run one case and summarize it as a JSON-ready row."""
    try:
        report: VerificationReport = case.run()
    except Exception as exc:  # a crash is a failed case, reported, not raised
        return {"case": case.index, "identity": case.identity, "agree": False,
                "error": f"{type(exc).__name__}: {exc}"}
    agree = report.agree if agree_tol is None else (
        report.agree and brackets_agree(report.lhs, report.rhs, agree_tol))
    return {"case": case.index, "identity": case.identity, "agree": bool(agree),
            "lhs": report.lhs.to_dict(), "rhs": report.rhs.to_dict(),
            "max_gap": float(report.max_gap)}


def run_suite(seed: int, cases: int, agree_tol: float | None = None,
              epsilon: float = DEFAULT_SUITE_EPSILON) -> dict:
    rows = [run_case(make_case(seed, k, epsilon), agree_tol) for k in range(cases)]
    n_agree = sum(r["agree"] for r in rows)
    return {"seed": int(seed), "cases": int(cases), "agree_tol": agree_tol,
            "epsilon": epsilon, "n_agree": int(n_agree),
            "summary": f"{n_agree}/{cases} agree", "results": rows}
