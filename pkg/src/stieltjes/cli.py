"""Command-line front end: ``stieltjes integrate | verify | classify | suite``.

Exit codes are a stable contract:

====  ==========================================
0     success (certified / identities agree)
1     usage, parse or compile error
2     enclosure not certified within the budget
3     a hypothesis of the requested identity fails
4     the two sides of an identity disagree
====  ==========================================

JSON floats are written with ``repr`` (shortest round-tripping form), so a
report re-read with :func:`json.loads` holds the very same doubles.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from .core import Partition, as_oriented
from .darboux import (DEFAULT_INITIAL_CELLS, DEFAULT_MASS_FRACTION, DEFAULT_MAX_CELLS,
                      DEFAULT_MAX_ROUNDS, CertificationReport)
from .errors import BudgetExhaustedError, DomainError, HypothesisError
from .exprlang import ExprSyntaxError, compile_expr
from .stieltjes_map import build_indefinite, range_of
from .substitution import (CODA_DELTAS, DEFAULT_EPSILON, _jsonable,
                           classify, integrate_by_segments, verify_change_of_variable_eq30,
                           verify_coda_mvt, verify_composition_identity, verify_lemma_eq7,
                           verify_substitution_eq1)
from .suite import DEFAULT_SUITE_EPSILON, run_suite

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_NOT_CERTIFIED = 2
EXIT_HYPOTHESIS = 3
EXIT_DISAGREE = 4


class UsageError(Exception):
    """Bad input that should end the run with exit status 1."""


# -- argument parsing -----------------------------------------------------------

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        # argparse exits with 2 by default, which means "not certified" here
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive(text: str) -> float:
    v = float(text)
    if not v > 0 or not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {text!r}")
    return v


def _finite(text: str) -> float:
    v = float(text)
    if not math.isfinite(v):
        raise argparse.ArgumentTypeError(f"expected a finite number, got {text!r}")
    return v


def _add_budget(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("refinement budget")
    g.add_argument("--max-rounds", type=int, default=DEFAULT_MAX_ROUNDS)
    g.add_argument("--max-cells", type=int, default=DEFAULT_MAX_CELLS)
    g.add_argument("--initial-cells", type=int, default=DEFAULT_INITIAL_CELLS)
    g.add_argument("--mass-fraction", type=float, default=DEFAULT_MASS_FRACTION,
                   help="share of the oscillation mass split per round (0, 1]")


def _add_output(p: argparse.ArgumentParser, default: str = "json") -> None:
    p.add_argument("--format", choices=("json", "csv", "human"), default=default)
    p.add_argument("--output", "-o", help="write to this file instead of stdout")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="stieltjes",
                     description="Certified Riemann-Stieltjes integrals and substitution checks.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("integrate", help="enclose int_I f dPhi")
    p.add_argument("--f", required=True, help="integrand, an expression in x")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--phi", help="integrator Phi(x), continuous")
    src.add_argument("--density", help="density phi(x); Phi is its indefinite integral")
    p.add_argument("--interval", nargs=2, type=_finite, required=True, metavar=("A", "B"),
                   help="endpoints in traversal order; B < A integrates backwards")
    p.add_argument("--eps", type=_positive, default=DEFAULT_EPSILON)
    p.add_argument("--include-partition", action="store_true",
                   help="dump final partitions in the JSON report")
    _add_budget(p)
    _add_output(p)

    p = sub.add_parser("verify", help="check one of the substitution identities")
    p.add_argument("identity", choices=("eq1", "eq6", "eq7", "eq30", "coda"))
    p.add_argument("--f", default="y", help="integrand on the image, an expression in y")
    p.add_argument("--psi", default="1", help="density psi(y) of the image integrator")
    p.add_argument("--density-phi", default="1", help="density phi(x) of the substitution")
    p.add_argument("--interval", nargs=2, type=_finite, metavar=("A", "B"), default=None)
    p.add_argument("--phi-base", type=_finite, default=None,
                   help="value Phi(A); defaults to A")
    p.add_argument("--eps", type=_positive, default=DEFAULT_EPSILON)
    p.add_argument("--eta", type=_positive, default=None,
                   help="classification threshold (eq1, eq30); chosen automatically if absent")
    p.add_argument("--cells", type=int, default=8, help="uniform partition size for eq6")
    p.add_argument("--coda-eps", type=float, default=0.25)
    p.add_argument("--coda-eta", type=float, default=0.25)
    p.add_argument("--beta", type=float, default=0.6)
    p.add_argument("--deltas", type=_positive, nargs="+", default=list(CODA_DELTAS))
    p.add_argument("--tol", type=_positive, default=1e-3, help="coda limit tolerance")
    _add_budget(p)
    _add_output(p)

    p = sub.add_parser("classify", help="label cells G / B / U")
    p.add_argument("--density", "--psi", dest="density", required=True)
    p.add_argument("--interval", nargs=2, type=_finite, required=True, metavar=("A", "B"))
    p.add_argument("--eta", type=_positive, required=True)
    size = p.add_mutually_exclusive_group(required=True)
    size.add_argument("--mesh", type=_positive, help="uniform cells of at most this length")
    size.add_argument("--cells", type=int, help="number of uniform cells")
    _add_output(p, default="csv")

    p = sub.add_parser("suite", help="run the randomized verification corpus")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--cases", type=int, default=20)
    p.add_argument("--agree-tol", type=float, default=None,
                   help="override the agreement slack; a negative value shrinks the brackets")
    p.add_argument("--eps", type=_positive, default=DEFAULT_SUITE_EPSILON)
    _add_output(p)
    return parser


def _budget(args) -> dict:
    if args.max_rounds < 0 or args.max_cells < 1 or args.initial_cells < 1:
        raise UsageError("budget values must be positive")
    if not 0 < args.mass_fraction <= 1:
        raise UsageError("--mass-fraction must lie in (0, 1]")
    return {"max_rounds": args.max_rounds, "max_cells": args.max_cells,
            "initial_cells": args.initial_cells, "mass_fraction": args.mass_fraction}


def _compile(label: str, source: str, domain):
    try:
        return compile_expr(source, domain)
    except ExprSyntaxError as exc:
        raise UsageError(f"{label}: {exc}") from exc
    except DomainError as exc:
        raise UsageError(f"{label}: {exc}") from exc


# -- commands ------------------------------------------------------------------------

def _report_summary(rep: CertificationReport | None, include_partition: bool) -> dict | None:
    if rep is None:
        return None
    d = rep.to_dict()
    d["n_cells"] = rep.partition.n_cells
    if not include_partition:
        del d["partition"]
    return d


def cmd_integrate(args) -> tuple[dict, int]:
    budget = _budget(args)
    I = as_oriented(args.interval)
    lo, hi = I.hull()
    payload = {"command": "integrate", "f": args.f,
               "integrator": {"phi": args.phi} if args.phi else {"density": args.density},
               "interval": [I.start, I.end], "epsilon": args.eps}
    if lo == hi:
        payload.update({"enclosure": {"lower": 0.0, "upper": 0.0}, "midpoint": 0.0, "width": 0.0,
                        "certified": True, "compile_certified": True, "segments": []})
        return payload, EXIT_OK
    f = _compile("f", args.f, (lo, hi))
    if args.phi is not None:
        g = _compile("phi", args.phi, (lo, hi))
        if not g.fn.is_continuous():
            raise HypothesisError("Phi must be continuous on the interval")
        G = g.fn
    else:
        g = _compile("density", args.density, (lo, hi))
        G = build_indefinite(g.fn, lo, 0.0)
    enc, reports = integrate_by_segments(f.fn, G, (I.start, I.end), args.eps, **budget)
    certified = all(r is None or r.certified for r in reports)
    payload.update({"enclosure": enc.to_dict(), "midpoint": enc.midpoint, "width": enc.width(),
                    "certified": certified, "compile_certified": f.certified and g.certified,
                    "segments": [_report_summary(r, args.include_partition) for r in reports]})
    return payload, EXIT_OK if certified else EXIT_NOT_CERTIFIED


def _substitution_inputs(args):
    if args.interval is None:
        raise UsageError(f"verify {args.identity} needs --interval")
    I = as_oriented(args.interval)
    if I.is_degenerate:
        raise UsageError("the interval must not be degenerate")
    lo, hi = I.hull()
    phi = _compile("density-phi", args.density_phi, (lo, hi))
    base = I.start if args.phi_base is None else args.phi_base
    Phi = build_indefinite(phi.fn, I.start, base)
    ylo, yhi = range_of(Phi, (lo, hi)).range
    if ylo == yhi:
        raise HypothesisError("Phi is constant on the interval")
    f = _compile("f", args.f, (ylo, yhi))
    psi = _compile("psi", args.psi, (ylo, yhi))
    certified = phi.certified and f.certified and psi.certified
    return I, phi.fn, Phi, f.fn, psi.fn, certified


def cmd_verify(args) -> tuple[dict, int]:
    if args.identity == "coda":
        report = verify_coda_mvt(args.coda_eps, args.coda_eta, args.beta, tuple(args.deltas),
                                 tol=args.tol, **_budget(args))
        compiled = True
    else:
        budget = _budget(args)
        I, phi, Phi, f, psi, compiled = _substitution_inputs(args)
        interval = (I.start, I.end)
        if args.identity == "eq6":
            if args.cells < 1:
                raise UsageError("--cells must be positive")
            Psi = build_indefinite(psi, psi.domain[0], 0.0)
            P = Partition.uniform(*I.hull(), args.cells)
            report = verify_composition_identity(f, Psi, Phi, P, args.eps, **budget)
        elif args.identity == "eq7":
            report = verify_lemma_eq7(f, psi, None, phi, Phi, interval, epsilon=args.eps, **budget)
        elif args.identity == "eq1":
            report = verify_substitution_eq1(f, psi, None, phi, Phi, interval, args.eta,
                                             epsilon=args.eps, **budget)
        else:
            report = verify_change_of_variable_eq30(f, psi, None, phi, Phi, interval, args.eta,
                                                    epsilon=args.eps, **budget)
    payload = {"command": "verify", **report.to_dict(), "compile_certified": compiled}
    return payload, EXIT_OK if report.agree else EXIT_DISAGREE


def cmd_classify(args) -> tuple[dict, int]:
    I = as_oriented(args.interval)
    lo, hi = I.hull()
    if lo == hi:
        raise UsageError("the interval must not be degenerate")
    d = _compile("density", args.density, (lo, hi))
    if args.mesh is not None:
        n = max(1, math.ceil((hi - lo) / args.mesh - 1e-9))
    else:
        if args.cells < 1:
            raise UsageError("--cells must be positive")
        n = args.cells
    cp = classify(d.fn, Partition.uniform(lo, hi, n), args.eta)
    u_len = cp.total_length("U")
    bound = args.eta * (hi - lo)
    payload = {"command": "classify", "density": args.density, "interval": [I.start, I.end],
               "eta": args.eta, "cells": cp.rows(), "counts": cp.counts(),
               "undulating_length": u_len, "undulating_bound": bound,
               "undulating_within_bound": bool(u_len <= bound + 1e-10),
               "compile_certified": d.certified}
    return payload, EXIT_OK


def cmd_suite(args) -> tuple[dict, int]:
    if args.cases < 0:
        raise UsageError("--cases must be non-negative")
    result = run_suite(args.seed, args.cases, args.agree_tol, args.eps)
    payload = {"command": "suite", **result}
    return payload, EXIT_OK if result["n_agree"] == result["cases"] else EXIT_DISAGREE


COMMANDS = {"integrate": cmd_integrate, "verify": cmd_verify, "classify": cmd_classify,
            "suite": cmd_suite}


# -- rendering ---------------------------------------------------------------------------

def to_json(payload: dict) -> str:
    clean = _jsonable(payload)
    return json.dumps(clean, indent=2, allow_nan=False) + "\n"


def _csv(rows, header) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([repr(v) if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def to_csv(payload: dict) -> str:
    cmd = payload["command"]
    if cmd == "integrate":
        e = payload["enclosure"]
        return _csv([[e["lower"], e["upper"], payload["midpoint"], payload["width"],
                      payload["certified"]]],
                    ["lower", "upper", "midpoint", "width", "certified"])
    if cmd == "verify":
        return _csv([[payload["identity"], payload["lhs"]["lower"], payload["lhs"]["upper"],
                      payload["rhs"]["lower"], payload["rhs"]["upper"], payload["agree"],
                      payload["max_gap"]]],
                    ["identity", "lhs_lower", "lhs_upper", "rhs_lower", "rhs_upper", "agree",
                     "max_gap"])
    if cmd == "classify":
        text = _csv(payload["cells"], ["left", "right", "label", "osc", "sup_abs"])
        return text + (f"# undulating_length={payload['undulating_length']!r} "
                       f"bound={payload['undulating_bound']!r} "
                       f"within_bound={str(payload['undulating_within_bound']).lower()}\n")
    rows = [[r["case"], r["identity"], r["agree"], r.get("max_gap", ""), r.get("error", "")]
            for r in payload["results"]]
    return _csv(rows, ["case", "identity", "agree", "max_gap", "error"])


def to_human(payload: dict) -> str:
    cmd = payload["command"]
    lines = []
    if cmd == "integrate":
        e = payload["enclosure"]
        lines.append(f"integral in [{e['lower']:.17g}, {e['upper']:.17g}]")
        lines.append(f"midpoint {payload['midpoint']:.17g}, width {payload['width']:.3g}")
        cells = sum(s["n_cells"] for s in payload["segments"] if s)
        status = "certified" if payload["certified"] else "NOT certified"
        lines.append(f"{status} at eps={payload['epsilon']:g} using {cells} cells")
    elif cmd == "verify":
        lhs, rhs = payload["lhs"], payload["rhs"]
        lines.append(f"{payload['identity']}: "
                     f"lhs [{lhs['lower']:.17g}, {lhs['upper']:.17g}]")
        lines.append(f"{' ' * len(payload['identity'])}  "
                     f"rhs [{rhs['lower']:.17g}, {rhs['upper']:.17g}]")
        lines.append(f"{'agree' if payload['agree'] else 'DISAGREE'} "
                     f"(max gap {payload['max_gap']:.3g})")
    elif cmd == "classify":
        for l, r, lab, osc, sup in payload["cells"]:
            lines.append(f"[{l:.6g}, {r:.6g}]  {lab}  osc={osc:.6g}  sup|.|={sup:.6g}")
        lines.append(f"undulating length {payload['undulating_length']:.6g} "
                     f"vs eta|I| = {payload['undulating_bound']:.6g}")
    else:
        for r in payload["results"]:
            mark = "ok  " if r["agree"] else "FAIL"
            extra = r.get("error") or f"gap {r['max_gap']:.3g}"
            lines.append(f"{mark} case {r['case']:4d}  {r['identity']:5s} {extra}")
        lines.append(payload["summary"])
    return "\n".join(lines) + "\n"


RENDERERS = {"json": to_json, "csv": to_csv, "human": to_human}


def _emit(text: str, path: str | None) -> None:
    if path:
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:  # usage errors and --help; report the status instead
        return int(exc.code or 0)
    try:
        with np.errstate(all="ignore"):
            payload, status = COMMANDS[args.command](args)
    except UsageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except HypothesisError as exc:
        print(f"hypothesis violated: {exc}", file=sys.stderr)
        return EXIT_HYPOTHESIS
    except BudgetExhaustedError as exc:
        print(f"not certified: {exc}", file=sys.stderr)
        return EXIT_NOT_CERTIFIED
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    _emit(RENDERERS[args.format](payload), args.output)
    return status


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
