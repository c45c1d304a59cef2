import csv
import io
import json
import math
from pathlib import Path

import pytest
from jsonschema import Draft202012Validator
from referencing import Registry, Resource

from stieltjes.cli import main

SCHEMAS = Path(__file__).resolve().parent.parent / "docs" / "schemas"


def _registry():
    resources = []
    for path in SCHEMAS.glob("*.schema.json"):
        resources.append((path.name, Resource.from_contents(json.loads(path.read_text()))))
    return Registry().with_resources(resources)


REGISTRY = _registry()


def validate(payload, name):
    schema = json.loads((SCHEMAS / f"{name}.schema.json").read_text())
    Draft202012Validator(schema, registry=REGISTRY).validate(payload)


def run(capsys, *argv):
    status = main(list(argv))
    out, err = capsys.readouterr()
    return status, out, err


def run_json(capsys, *argv):
    status, out, err = run(capsys, *argv)
    return status, (json.loads(out) if out else None), err


class TestIntegrate:
    def test_square_integrator(self, capsys):
        status, p, _ = run_json(capsys, "integrate", "--f", "x", "--phi", "x^2",
                                "--interval", "0", "1", "--eps", "1e-6")
        assert status == 0 and p["certified"]
        assert p["enclosure"]["lower"] <= 2 / 3 <= p["enclosure"]["upper"]
        assert p["width"] <= 1e-6
        validate(p, "integrate")

    def test_unit_integrand(self, capsys):
        status, p, _ = run_json(capsys, "integrate", "--f", "1", "--phi", "x",
                                "--interval", "0", "1")
        assert status == 0
        assert p["enclosure"]["lower"] == pytest.approx(1.0, abs=1e-15)
        assert p["enclosure"]["upper"] == pytest.approx(1.0, abs=1e-15)

    def test_reversed_interval_csv(self, capsys):
        status, out, _ = run(capsys, "integrate", "--f", "x", "--phi", "x",
                             "--interval", "1", "0", "--format", "csv")
        rows = list(csv.reader(io.StringIO(out)))
        assert status == 0
        assert rows[0] == ["lower", "upper", "midpoint", "width", "certified"]
        assert float(rows[1][0]) <= -0.5 <= float(rows[1][1])

    def test_density_form(self, capsys):
        # Phi' = cos, so the integral of 1 dPhi over [0, pi/2] is sin(pi/2)
        status, p, _ = run_json(capsys, "integrate", "--f", "1", "--density", "cos(x)",
                                "--interval", "0", str(math.pi / 2), "--eps", "1e-8")
        assert status == 0
        assert p["enclosure"]["lower"] - 1e-12 <= 1.0 <= p["enclosure"]["upper"] + 1e-12

    def test_partition_included_on_request(self, capsys):
        _, p, _ = run_json(capsys, "integrate", "--f", "x", "--phi", "x", "--interval", "0", "1",
                           "--eps", "0.1", "--include-partition")
        assert "partition" in p["segments"][0]

    def test_budget_exhaustion_exit_2(self, capsys):
        status, p, err = run_json(capsys, "integrate", "--f", "x", "--phi", "x^2", "--interval",
                                  "0", "1", "--eps", "1e-9", "--max-rounds", "2")
        assert status == 2
        assert p is None or not p["certified"]

    def test_output_file(self, capsys, tmp_path):
        target = tmp_path / "out.json"
        status, out, _ = run(capsys, "integrate", "--f", "x", "--phi", "x", "--interval", "0",
                             "1", "-o", str(target))
        assert status == 0 and out == ""
        assert json.loads(target.read_text())["command"] == "integrate"

    def test_human_format(self, capsys):
        status, out, _ = run(capsys, "integrate", "--f", "x", "--phi", "x", "--interval", "0",
                             "1", "--format", "human")
        assert status == 0 and "certified" in out


class TestVerify:
    def test_eq30_cosine(self, capsys):
        status, p, _ = run_json(capsys, "verify", "eq30", "--f", "y", "--psi", "1",
                                "--density-phi", "cos(x)", "--interval", "0", "4.712388980",
                                "--eps", "1e-3")
        assert status == 0 and p["agree"] and p["identity"] == "Eq30"
        validate(p, "verify")

    def test_eq7_squares(self, capsys):
        status, p, _ = run_json(capsys, "verify", "eq7", "--f", "y", "--psi", "y",
                                "--density-phi", "2*x", "--interval", "1", "1.41421356",
                                "--phi-base", "1", "--eps", "1e-4")
        assert status == 0 and p["agree"]
        # the interval end is sqrt(2) rounded to 8 decimals
        exact = (1.41421356 ** 6 - 1) / 3
        assert p["lhs"]["lower"] <= exact <= p["lhs"]["upper"]
        assert abs(exact - 7 / 3) < 1e-7

    def test_eq7_sign_change_exit_3(self, capsys):
        status, out, err = run(capsys, "verify", "eq7", "--f", "y", "--psi", "2*y-1",
                               "--density-phi", "1", "--interval", "0", "1")
        assert status == 3 and out == ""
        assert "constant sign" in err

    def test_eq1_cosine(self, capsys):
        status, p, _ = run_json(capsys, "verify", "eq1", "--f", "y^2", "--psi", "cos(pi*y)",
                                "--density-phi", "2", "--interval", "0", "0.5", "--eps", "1e-5")
        assert status == 0 and p["agree"]
        assert p["rhs"]["lower"] - 1e-10 <= -2 / math.pi ** 2 <= p["rhs"]["upper"] + 1e-10

    def test_eq6(self, capsys):
        status, p, _ = run_json(capsys, "verify", "eq6", "--f", "y", "--psi", "1",
                                "--density-phi", "2*x", "--interval", "0", "1", "--cells", "2")
        assert status == 0 and p["agree"]
        assert p["diagnostics"]["upper_image"] == pytest.approx(0.8125)
        assert p["lhs"]["lower"] <= 0.5 <= p["lhs"]["upper"]

    def test_coda(self, capsys):
        status, p, _ = run_json(capsys, "verify", "coda", "--coda-eps", "0.25", "--coda-eta",
                                "0.25", "--beta", "0.6")
        assert status == 0 and p["identity"] == "CodaMVT"
        assert abs(p["lhs"]["lower"] - 5 / 9) <= 2e-3

    def test_coda_gate(self, capsys):
        status, _, err = run(capsys, "verify", "coda", "--coda-eps", "0.25", "--coda-eta",
                             "0.25", "--beta", "0.3")
        assert status == 3 and "beta" in err


class TestClassify:
    def test_identity_mesh_half(self, capsys):
        status, out, _ = run(capsys, "classify", "--density", "y", "--interval", "-1", "1",
                             "--eta", "0.1", "--mesh", "0.5")
        lines = out.splitlines()
        assert status == 0
        assert lines[0] == "left,right,label,osc,sup_abs"
        rows = list(csv.reader(lines[1:-1]))
        # closed cells: [-0.5, 0] and [0, 0.5] both touch the zero of y
        assert [r[2] for r in rows] == ["G", "U", "U", "G"]
        assert lines[-1].startswith("# undulating_length=1.0 ")
        assert lines[-1].endswith("within_bound=false")

    def test_small_constant(self, capsys):
        _, out, _ = run(capsys, "classify", "--density", "0.05", "--interval", "0", "1",
                        "--eta", "0.1", "--cells", "3")
        assert [r[2] for r in csv.reader(out.splitlines()[1:-1])] == ["G", "G", "G"]

    def test_wide_eta_makes_sign_change_bounded(self, capsys):
        _, out, _ = run(capsys, "classify", "--density", "y", "--interval", "-1", "1",
                        "--eta", "2", "--cells", "4")
        assert [r[2] for r in csv.reader(out.splitlines()[1:-1])] == ["G", "B", "B", "G"]

    def test_json(self, capsys):
        status, p, _ = run_json(capsys, "classify", "--density", "y", "--interval", "-1", "1",
                                "--eta", "0.1", "--cells", "4", "--format", "json")
        assert status == 0
        validate(p, "classify")


class TestSuite:
    def test_small_suite(self, capsys):
        status, p, _ = run_json(capsys, "suite", "--seed", "3", "--cases", "8")
        assert status == 0 and p["summary"] == "8/8 agree"
        validate(p, "suite")

    def test_vacuous(self, capsys):
        status, p, _ = run_json(capsys, "suite", "--cases", "0")
        assert status == 0 and p["summary"] == "0/0 agree"

    def test_corrupted_tolerance_exit_4(self, capsys):
        status, p, _ = run_json(capsys, "suite", "--seed", "1", "--cases", "4",
                                "--agree-tol", "-1")
        assert status == 4 and p["n_agree"] == 0

    def test_deterministic(self, capsys):
        argv = ("suite", "--seed", "42", "--cases", "6")
        first = run(capsys, *argv)[1]
        assert run(capsys, *argv)[1] == first


class TestErrors:
    @pytest.mark.parametrize("argv", [
        ["integrate", "--f", "x +", "--phi", "x", "--interval", "0", "1"],
        ["integrate", "--f", "log(x)", "--phi", "x", "--interval", "-1", "1"],
        ["integrate", "--f", "x", "--phi", "x", "--interval", "0", "1", "--eps", "0"],
        ["frobnicate"],
        [],
        ["classify", "--density", "y", "--interval", "0", "1", "--eta", "-1"],
    ])
    def test_usage_errors_exit_1(self, capsys, argv):
        assert main(argv) == 1
        assert capsys.readouterr().err

    def test_parse_error_mentions_position(self, capsys):
        status, _, err = run(capsys, "integrate", "--f", "x + foo", "--phi", "x",
                             "--interval", "0", "1")
        assert status == 1 and "column 5" in err


def test_json_round_trip(capsys):
    _, out, _ = run(capsys, "verify", "eq1", "--f", "y", "--psi", "2*y-1",
                    "--interval", "0", "1", "--eps", "1e-4")
    data = json.loads(out)
    assert json.loads(json.dumps(data)) == data
    assert json.dumps(data, indent=2) + "\n" == out
