import math

import numpy as np
import pytest

from bandtoeplitz.convergence import (ConvergenceReport, cauchy_error, convergence_report,
                                      curve_distance, curve_distance_detail, default_probes,
                                      empirical_measure)
from bandtoeplitz.curves import trace_curve
from bandtoeplitz.errors import IndexOutOfRange, ProbeOnCurve
from bandtoeplitz.measures import cauchy_transform
from bandtoeplitz.roots import logderiv_from_roots, solve_batch
from bandtoeplitz.symbol import parse_symbol


def test_k0_mass_one(ex1, ex2, ex3):
    for a in (ex1, ex2, ex3):
        assert empirical_measure(a, 0, 10).total_mass == pytest.approx(1.0, abs=1e-15)


def test_degree_mass(ex1):
    assert empirical_measure(ex1, 1, 4).total_mass == pytest.approx(0.5, abs=1e-15)


@pytest.mark.parametrize("name,k", [("ex1", 1), ("ex2", 1), ("ex2", -1), ("ex3", 1), ("ex3", -1)])
def test_mass_nondecreasing(name, k, request):
    a = request.getfixturevalue(name)
    step = a.p if k > 0 else a.q
    masses = [empirical_measure(a, k, step * j).total_mass for j in range(1, 7)]
    assert all(m2 >= m1 - 1e-15 for m1, m2 in zip(masses, masses[1:]))
    target = (a.p - k) / a.p if k > 0 else (a.q + k) / a.q
    assert max(masses) <= target + 1e-15


def test_arcsine_target_transform(arcsine):
    # transform of the arcsine law at 3 is -1/sqrt(5)
    lam = np.array([3.0 + 0j])
    val = logderiv_from_roots(arcsine, 0, solve_batch(arcsine, lam))[0]
    assert abs(val + 1 / math.sqrt(5)) < 1e-13


def test_arcsine_error_decreases(arcsine):
    errs = [cauchy_error(arcsine, 0, n, probes=[3.0]) for n in (20, 40, 80, 160)]
    assert all(e2 < e1 for e1, e2 in zip(errs, errs[1:]))
    # first order in 1/n: doubling n roughly halves the error
    ratios = [e1 / e2 for e1, e2 in zip(errs, errs[1:])]
    assert all(1.5 < r < 3.0 for r in ratios)


def test_arcsine_empirical_transform(arcsine):
    # eigenvalues 2 cos(j pi/(n+1)) in closed form
    n = 40
    ev = 2 * np.cos(np.arange(1, n + 1) * np.pi / (n + 1))
    direct = np.mean(1 / (ev - 3.0))
    m = empirical_measure(arcsine, 0, n)
    assert abs(cauchy_transform(m, 3.0) - direct) < 1e-12


def test_probe_on_curve(arcsine):
    with pytest.raises(ProbeOnCurve):
        cauchy_error(arcsine, 0, 10, probes=[0.5 + 0.05j])


def test_default_probes(ex1):
    fam = trace_curve(ex1, 0)
    probes = default_probes(ex1, fam)
    assert 0 < probes.size <= 8
    assert np.all(fam.distance(probes) > 0.1)
    rmax = max(abs(b) for b in (0, 1))
    assert np.allclose(np.abs(probes), 2 * rmax)


def test_star_zeros_on_curve():
    a = parse_symbol({1: 1, -3: 1})
    fam = trace_curve(a, 0)
    for n in (12, 20, 33):
        assert curve_distance(a, 0, n, fam) < 1e-6


def test_ex1_band(ex1):
    zeros = empirical_measure(ex1, 0, 50).points
    assert np.max(np.abs(zeros.imag)) < 1e-8
    assert np.all((zeros.real > 0) & (zeros.real < 1))


def test_distance_decreases(ex2):
    fam = trace_curve(ex2, 0)
    d = [curve_distance(ex2, 0, n, fam) for n in (10, 20, 40, 80)]
    assert d[-1] < d[0]
    assert d[-1] < 0.05


@pytest.mark.parametrize("name", ["ex1", "ex3"])
def test_distance_exact_examples(name, request):
    # zeros lie on the limit set itself for these symbols
    a = request.getfixturevalue(name)
    fam = trace_curve(a, 0)
    assert max(curve_distance(a, 0, n, fam) for n in (10, 20, 40, 80)) < 1e-8


def test_outside_counted(ex1):
    fam = trace_curve(ex1, 1, r_max=3.0)
    dist, outside = curve_distance_detail(ex1, 1, 20, fam)
    assert outside > 0 and dist < 1e-3


def test_conjugation_invariance(ex1, ex2):
    for a in (ex1, ex2):
        z = np.sort_complex(empirical_measure(a, 0, 24).points)
        zc = np.sort_complex(np.conj(z))
        assert np.max(np.abs(z - zc)) < 1e-8


def test_report(ex1):
    rep = convergence_report(ex1, 1, ns=(4, 8))
    assert isinstance(rep, ConvergenceReport)
    assert rep.column("n") == [4, 8]
    assert rep.column("mass") == [0.5, 0.5]
    assert set(rep.entries[0]) == {"n", "mass", "cauchy_error", "curve_distance", "outside"}


def test_errors(ex1):
    with pytest.raises(IndexOutOfRange):
        empirical_measure(ex1, 2, 4)
    with pytest.raises(ValueError):
        empirical_measure(ex1, 0, 0)
