import json

import numpy as np
import pytest

from bandtoeplitz.errors import (DegenerateRange, ExtremeCoefficientZero, GcdViolation,
                                 ValidationError, ZeroArgument)
from bandtoeplitz.symbol import (branch_points, critical_points, distinct_branch_points, evaluate,
                                 evaluate_derivative, from_coefficients, load_symbol,
                                 parse_symbol, symbol_to_json)

from conftest import EX1, EX2, EX3


def test_parse_minimal():
    a = parse_symbol({1: 1, -1: 1})
    assert (a.p, a.q) == (1, 1)


def test_parse_second_example():
    a = parse_symbol(EX2)
    assert (a.p, a.q) == (2, 2)


def test_gcd_violation():
    with pytest.raises(GcdViolation):
        parse_symbol({2: 1, -2: 1})


def test_degenerate_range():
    with pytest.raises(DegenerateRange):
        parse_symbol({1: 1, 2: 3})


def test_all_zero():
    with pytest.raises(ExtremeCoefficientZero):
        parse_symbol({1: 0, -1: 0})


def test_explicit_extreme_zero():
    with pytest.raises(ExtremeCoefficientZero):
        from_coefficients({2: 0, 1: 1, -1: 1}, p=2)


def test_trims_zero_extremes():
    a = parse_symbol({"3": 0, "1": [1, 0], "-1": 1.0, "-4": 0})
    assert (a.p, a.q) == (1, 1)


def test_bad_key():
    with pytest.raises(ValidationError):
        parse_symbol({"x": 1})


def test_json_roundtrip(tmp_path):
    a = parse_symbol({1: 1 + 2j, 0: 0.5, -2: -1})
    path = tmp_path / "s.json"
    path.write_text(json.dumps(symbol_to_json(a)))
    assert load_symbol(path) == a


def test_evaluate_examples(arcsine, ex1):
    assert abs(evaluate(arcsine, 1j)) < 1e-15
    assert abs(evaluate(ex1, -1.0)) < 1e-15
    assert abs(evaluate_derivative(arcsine, 1.0)) < 1e-15


def test_zero_argument(arcsine):
    with pytest.raises(ZeroArgument):
        evaluate(arcsine, 0)
    with pytest.raises(ZeroArgument):
        evaluate_derivative(arcsine, np.array([1.0, 0.0]))


@pytest.mark.parametrize("coeffs", [EX1, EX2, EX3, {3: 1 - 1j, 1: 2, -1: 0.5j}])
def test_fourier_sum(coeffs, rng):
    a = parse_symbol(coeffs)
    t = rng.uniform(0, 2 * np.pi, 50)
    z = np.exp(1j * t)
    direct = sum(complex(c) * np.exp(1j * k * t) for k, c in coeffs.items())
    assert np.max(np.abs(evaluate(a, z) - direct)) < 1e-13


def test_derivative_matches_difference(rng):
    a = parse_symbol({3: 1 - 1j, 1: 2, -2: 0.5j})
    z = rng.normal(size=5) + 1j * rng.normal(size=5)
    h = 1e-6
    fd = (evaluate(a, z + h) - evaluate(a, z - h)) / (2 * h)
    assert np.max(np.abs(fd - evaluate_derivative(a, z)) / np.abs(fd)) < 1e-7


def test_branch_points_arcsine(arcsine):
    assert np.allclose(sorted(np.real(branch_points(arcsine))), [-2, 2], atol=1e-12)


def test_branch_points_first_example(ex1):
    d = distinct_branch_points(ex1)
    assert len(d) == 2
    assert d[0][0] == 0 and d[0][1] == 2
    assert abs(d[1][0] - 1) < 1e-12 and d[1][1] == 1


def test_branch_points_second_example(ex2):
    vals = sorted({round(b.real, 9) for b in branch_points(ex2)})
    assert np.allclose(vals, [-9 / 4, 0, 4], atol=1e-9)
    assert len(branch_points(ex2)) == 4


@pytest.mark.parametrize("coeffs", [EX1, EX2, EX3, {3: 1, 1: -2, -1: 0.3, -2: 1}])
def test_branch_point_count_and_conjugation(coeffs):
    a = parse_symbol(coeffs)
    b = np.array(branch_points(a))
    assert b.size == a.p + a.q
    for v in b:
        assert np.min(np.abs(b - np.conj(v))) < 1e-10 * max(1, np.max(np.abs(b)))


def test_critical_points_are_critical(ex2):
    zc = critical_points(ex2)
    assert zc.size == 4
    assert np.max(np.abs(evaluate_derivative(ex2, zc))) < 1e-12
