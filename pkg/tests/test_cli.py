import csv
import io
import json
from pathlib import Path

import pytest

from bandtoeplitz.cli import build_parser, parse_config, run

SYMBOLS = Path(__file__).resolve().parent.parent / "symbols"
EX1 = str(SYMBOLS / "ex1.json")
ARCSINE = str(SYMBOLS / "arcsine.json")


def _run(capsys, *argv):
    code = run(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def _csv(text):
    return list(csv.reader(io.StringIO(text)))


def test_symbol_info(capsys):
    code, out, _ = _run(capsys, "symbol-info", "--symbol", EX1)
    assert code == 0
    info = json.loads(out)
    assert (info["p"], info["q"]) == (2, 1)
    assert info["target_masses"] == {"0": 1.0, "1": 0.5}


def test_curves_to_file(tmp_path):
    out = tmp_path / "g0.csv"
    assert run(["curves", "--symbol", EX1, "--k", "0", "--rmax", "10", "--out", str(out)]) == 0
    rows = _csv(out.read_text())
    assert rows[0] == ["k", "arc_id", "re_lambda", "im_lambda", "re_tangent", "im_tangent"]
    pts = [complex(float(r[2]), float(r[3])) for r in rows[1:]]
    assert len(pts) > 10
    assert all(-1e-9 <= z.real <= 1 + 1e-9 and abs(z.imag) < 1e-9 for z in pts)


def test_widom_check(capsys):
    code, out, _ = _run(capsys, "widom-check", "--symbol", EX1, "--k", "1", "--n", "12",
                        "--trials", "100")
    assert code == 0
    rep = json.loads(out)
    assert rep["pass"] and rep["max_relative_discrepancy"] < 1e-9


def test_converge(capsys):
    code, out, _ = _run(capsys, "converge", "--symbol", EX1, "--k", "0", "--ns", "20,40")
    assert code == 0
    rows = _csv(out)
    assert rows[0] == ["k", "n", "mass", "cauchy_error", "curve_distance", "outside"]
    assert [r[1] for r in rows[1:]] == ["20", "40"]
    assert all(float(r[2]) == 1.0 for r in rows[1:])


def test_spectrum_formats(capsys, tmp_path):
    code, out, _ = _run(capsys, "spectrum", "--symbol", ARCSINE, "--k", "0", "--n", "5")
    assert code == 0
    rows = _csv(out)
    assert rows[0] == ["k", "n", "re_lambda", "im_lambda", "multiplicity"]
    assert len(rows) == 6
    code, out, _ = _run(capsys, "spectrum", "--symbol", ARCSINE, "--n", "5", "--format", "json")
    assert json.loads(out)["degree"] == 5
    svg = tmp_path / "s.svg"
    assert run(["spectrum", "--symbol", ARCSINE, "--n", "5", "--format", "svg",
                "--out", str(svg)]) == 0
    text = svg.read_text()
    assert text.startswith("<svg") and text.count("<circle") == 5


def test_density(capsys):
    code, out, _ = _run(capsys, "density", "--symbol", ARCSINE, "--k", "0")
    assert code == 0
    rows = _csv(out)
    assert rows[0] == ["k", "arc_id", "re_lambda", "im_lambda", "real_density", "weight"]
    assert abs(sum(float(r[5]) for r in rows[1:]) - 1) < 1e-3


def test_deterministic(capsys):
    argv = ["curves", "--symbol", ARCSINE, "--k", "0", "--format", "json"]
    _, first, _ = _run(capsys, *argv)
    _, second, _ = _run(capsys, *argv)
    assert first == second


def test_help(capsys):
    code, out, _ = _run(capsys, "--help")
    assert code == 0
    assert "widom-check" in out
    code, out, _ = _run(capsys, "masses", "--help")
    assert code == 0 and "--mass-tol" in out and "default" in out


@pytest.mark.parametrize("argv,flag", [
    (["curves", "--symbol", ARCSINE, "--k", "x"], "--k"),
    (["curves", "--symbol", ARCSINE, "--k", "3"], "--k"),
    (["curves", "--symbol", ARCSINE, "--rmax", "-1"], "--rmax"),
    (["curves", "--symbol", ARCSINE, "--rmax", "1"], "--rmax"),
    (["spectrum", "--symbol", ARCSINE, "--n", "0"], "--n"),
    (["converge", "--symbol", ARCSINE, "--ns", "20,a"], "--ns"),
    (["curves", "--symbol", "/nonexistent.json"], "--symbol"),
    (["bogus", "--symbol", ARCSINE], "bogus"),
])
def test_usage_errors(capsys, argv, flag):
    code, _, err = _run(capsys, *argv)
    assert code == 1
    assert flag in err


def test_bad_symbol_file(capsys, tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text(json.dumps({"coeffs": {"1": 1}}))
    code, _, err = _run(capsys, "symbol-info", "--symbol", str(bad))
    assert code == 1 and err


def test_numerical_failure_exit(capsys):
    # an impossible mass tolerance reports the mismatch with status 2
    code, out, err = _run(capsys, "masses", "--symbol", ARCSINE, "--mass-tol", "1e-14")
    assert code == 2
    assert out and "error" in err


def test_config_defaults():
    cfg = parse_config(["energy", "--symbol", EX1])
    assert cfg.format == "json" and cfg.n == 20 and cfg.r_max == 1e3
    assert build_parser().prog == "bandtoeplitz"
