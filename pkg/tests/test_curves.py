import numpy as np
import pytest

from bandtoeplitz.curves import (ON_CURVE_TOL, continuation_permutation, project_to_curve,
                                 reverse_family, trace_curve)
from bandtoeplitz.errors import IndexOutOfRange, ValidationError
from bandtoeplitz.roots import modulus_gap, solve_batch
from bandtoeplitz.symbol import branch_scale, distinct_branch_points, evaluate_derivative

from conftest import STAR_RADIUS


def _nearest(family, lam):
    best = None
    for arc in family.arcs:
        i = int(np.argmin(np.abs(arc.points - lam)))
        d = abs(arc.points[i] - lam)
        if best is None or d < best[0]:
            best = (d, arc, i)
    return best[1], best[2]


def _hausdorff_to_segment(fam, lo, hi, n=4001):
    """Hausdorff distance between the traced polylines and a real segment."""
    pts = fam.points()
    d1 = np.max(np.abs(pts.imag) + np.maximum(0, lo - pts.real) + np.maximum(0, pts.real - hi))
    d2 = np.max(fam.distance(np.linspace(lo, hi, n)))
    return max(d1, d2)


def test_arcsine_interval(arcsine):
    fam = trace_curve(arcsine, 0)
    assert len(fam.arcs) == 1
    assert _hausdorff_to_segment(fam, -2, 2) < 1e-3
    kinds = {e.kind for e in fam.arcs[0].endpoints}
    assert kinds == {"branch"}


def test_first_example_negative_axis(ex1):
    fam = trace_curve(ex1, 1)
    pts = fam.points()
    assert np.max(np.abs(pts.imag)) < 1e-8
    assert pts.real.max() < 1e-9 and pts.real.min() < -0.99e3
    assert {e.kind for arc in fam.arcs for e in arc.endpoints} >= {"truncation"}


def test_first_example_unit_interval(ex1):
    fam = trace_curve(ex1, 0)
    assert _hausdorff_to_segment(fam, 0, 1) < 1e-3


def test_star(ex3):
    fam = trace_curve(ex3, 0)
    pts = fam.points()
    tips = STAR_RADIUS * np.exp(2j * np.pi * np.arange(5) / 5)
    for t in tips:
        assert np.min(np.abs(pts - t)) < 1e-3
    assert np.max(np.abs(pts)) < STAR_RADIUS + 1e-3
    # every sample lies on one of the five rays
    ang = np.angle(pts[np.abs(pts) > 1e-6]) * 5 / (2 * np.pi)
    assert np.max(np.abs(ang - np.round(ang))) < 1e-6


@pytest.mark.parametrize("name,k", [("arcsine", 0), ("ex1", 0), ("ex1", 1), ("ex2", -1),
                                    ("ex2", 0), ("ex2", 1), ("ex3", -2), ("ex3", 0),
                                    ("ex3", 1)])
def test_samples_on_curve(name, k, request):
    a = request.getfixturevalue(name)
    fam = trace_curve(a, k)
    special = [s for s, _ in fam.special_points]
    for arc in fam.arcs:
        gap = modulus_gap(a, k, arc.points)
        assert np.all(gap[1:-1] < ON_CURVE_TOL)
        # ends at branch or exceptional points carry multiple roots, whose
        # computed moduli split by about eps^(1/m)
        for i, end in ((0, arc.start), (-1, arc.end)):
            if end.kind in ("branch", "exceptional"):
                assert min(abs(arc.points[i] - c) for c in special) < 1e-6
            else:
                assert gap[i] < ON_CURVE_TOL
        assert np.max(np.abs(np.diff(arc.points))) <= fam.grid_step * (1 + 1e-9)
        assert np.allclose(np.abs(arc.tangents), 1, atol=1e-12)
    kinds = {e.kind for arc in fam.arcs for e in arc.endpoints}
    if k == 0:
        assert "truncation" not in kinds
    else:
        assert "truncation" in kinds


@pytest.mark.parametrize("name,k", [("ex1", 0), ("ex1", 1), ("ex2", 0), ("ex2", 1), ("ex3", -1)])
def test_random_probing_completeness(name, k, request):
    """Random points whose first-order distance to the curve, gap / |grad gap|,
    is below one grid step must lie within three grid steps of the traced
    polyline (uniform points essentially never come closer than 1e-4 of the
    local scale, so that threshold would test nothing)."""
    a = request.getfixturevalue(name)
    r_max = 10.0
    fam = trace_curve(a, k, r_max)
    rng = np.random.default_rng(7)
    window = min(r_max, 2.5 * branch_scale(a))
    lam = window * np.sqrt(rng.random(10_000)) * np.exp(2j * np.pi * rng.random(10_000))
    z = solve_batch(a, lam, sort=False)
    z = np.take_along_axis(z, np.argsort(np.abs(z), axis=1), axis=1)
    lo, hi = z[:, a.q + k - 1], z[:, a.q + k]
    gap = np.log(np.abs(hi)) - np.log(np.abs(lo))
    grad = np.abs(1 / (evaluate_derivative(a, hi) * hi) - 1 / (evaluate_derivative(a, lo) * lo))
    near = gap / grad < fam.grid_step
    assert near.sum() > 10
    assert np.max(fam.distance(lam[near])) < 3 * fam.grid_step


@pytest.mark.parametrize("name", ["arcsine", "ex1", "ex2", "ex3"])
def test_branch_points_on_their_curves(name, request):
    a = request.getfixturevalue(name)
    for b, _ in distinct_branch_points(a):
        for k in range(-a.q + 1, a.p):
            if float(modulus_gap(a, k, b)) < 1e-6:
                assert fam_distance(a, k, b) < 1e-3


def fam_distance(a, k, b):
    return float(trace_curve(a, k).distance(b)[0])


def test_reverse_orientation(ex1):
    fam = trace_curve(ex1, 0)
    rev = reverse_family(fam)
    for a1, a2 in zip(fam.arcs, rev.arcs):
        assert np.array_equal(np.sort_complex(a1.points), np.sort_complex(a2.points))
        assert np.allclose(a2.tangents, -a1.tangents[::-1])
        assert a2.start == a1.end


def test_second_example_symmetric_curves(ex2):
    pm = trace_curve(ex2, -1).points()
    pp = trace_curve(ex2, 1).points()
    d = np.min(np.abs(pm[:, None] - pp[None, :]), axis=1)
    step = trace_curve(ex2, 1).grid_step
    assert np.max(d) < step


def test_permutation_transposition(arcsine):
    fam = trace_curve(arcsine, 0)
    arc, i = _nearest(fam, 0.5)
    assert continuation_permutation(arcsine, arc, i) == (2, 1)


def test_permutation_full_reversal(ex2):
    fam = trace_curve(ex2, 0)
    arc, i = _nearest(fam, -1.0)
    assert abs(arc.points[i] + 1) < 0.1
    assert continuation_permutation(ex2, arc, i) == (4, 3, 2, 1)


def test_permutation_first_example(ex1):
    fam = trace_curve(ex1, 1)
    arc, i = _nearest(fam, -5.0)
    assert continuation_permutation(ex1, arc, i) == (1, 3, 2)


def test_projection(ex1):
    lam = np.array([0.3 + 0.01j, 0.7 - 0.02j])
    out = project_to_curve(ex1, 0, lam)
    assert np.max(np.abs(out.imag)) < 1e-10
    assert np.all(modulus_gap(ex1, 0, out) < 1e-10)


def test_radius_too_small(arcsine):
    with pytest.raises(ValidationError):
        trace_curve(arcsine, 0, 3.0)


def test_bad_index(arcsine):
    with pytest.raises(IndexOutOfRange):
        trace_curve(arcsine, 1)
