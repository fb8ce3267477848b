"""Zero-counting measures of generalized spectra and their distance to ``mu_k``.

The normalised zero counting measure of ``P_{k,n}`` puts mass ``1/n`` at
every zero; its total mass is ``deg P_{k,n} / n``.  Two diagnostics track
convergence to ``mu_k``: the Cauchy transform against ``w_k'/w_k`` at probes
away from the curve, and the largest distance from a zero to the traced
curve.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveFamily, trace_curve
from .errors import ProbeOnCurve
from .measures import DiscreteMeasure, cauchy_transform
from .roots import check_index, logderiv_from_roots, solve_batch
from .symbol import LaurentSymbol, branch_points
from .toeplitz import generalized_spectrum

PROBE_CLEARANCE = 0.1
DEFAULT_NS = (20, 40, 80, 160)


def empirical_measure(a: LaurentSymbol, k: int, n: int) -> DiscreteMeasure:
    """Mass ``1/n`` at each zero of ``P_{k,n}`` (with multiplicity)."""
    check_index(a, k)
    if n < 1:
        raise ValueError("n must be at least 1")
    zeros = np.asarray(generalized_spectrum(a, k, n).zeros, complex)
    return DiscreteMeasure(zeros, np.full(zeros.size, 1.0 / n), k=k)


def default_probes(a: LaurentSymbol, family: CurveFamily, count: int = 8,
                   clearance: float = PROBE_CLEARANCE) -> np.ndarray:
    """``count`` points on the circle of radius twice the largest branch-point
    modulus, minus those within ``clearance`` of the curve."""
    rmax = max(abs(b) for b in branch_points(a))
    radius = 2.0 * rmax if rmax > 0 else 2.0
    ang = 2 * math.pi * np.arange(count) / count
    pts = radius * np.exp(1j * ang)
    return pts[family.distance(pts) > clearance]


def _logderiv(a: LaurentSymbol, k: int, lam: np.ndarray) -> np.ndarray:
    return logderiv_from_roots(a, k, solve_batch(a, lam))


def cauchy_error(a: LaurentSymbol, k: int, n: int, probes=None,
                 family: CurveFamily | None = None, r_max: float = 1e3,
                 clearance: float = PROBE_CLEARANCE) -> float:
    """``max |C[mu_{k,n}](lambda) - w_k'(lambda)/w_k(lambda)|`` over probes.

    Raises :class:`ProbeOnCurve` if a supplied probe is within ``clearance``
    of the traced curve.
    """
    check_index(a, k)
    if family is None:
        family = trace_curve(a, k, r_max)
    if probes is None:
        probes = default_probes(a, family, clearance=clearance)
    else:
        probes = np.atleast_1d(np.asarray(probes, complex))
        close = family.distance(probes) <= clearance
        if np.any(close):
            raise ProbeOnCurve(f"probe {probes[np.argmax(close)]} is within {clearance} of the curve")
    if probes.size == 0:
        raise ProbeOnCurve("no probe point is far enough from the curve")
    m = empirical_measure(a, k, n)
    ct = np.asarray(cauchy_transform(m, probes))
    return float(np.max(np.abs(ct - _logderiv(a, k, probes))))


def curve_distance_detail(a: LaurentSymbol, k: int, n: int,
                          family: CurveFamily) -> tuple[float, int]:
    """Largest zero-to-curve distance over zeros inside the truncation disk,
    and the number of zeros outside it."""
    zeros = np.asarray(generalized_spectrum(a, k, n).zeros, complex)
    inside = np.abs(zeros) <= family.truncation_radius
    if not inside.any():
        return 0.0, int(zeros.size)
    return float(np.max(family.distance(zeros[inside]))), int(np.sum(~inside))


def curve_distance(a: LaurentSymbol, k: int, n: int, family: CurveFamily) -> float:
    """Largest distance from a zero of ``P_{k,n}`` to the traced curve
    (zeros beyond the truncation radius are left out)."""
    return curve_distance_detail(a, k, n, family)[0]


@dataclass(frozen=True)
class ConvergenceReport:
    """Per-``n`` rows ``{n, mass, cauchy_error, curve_distance, outside}``."""

    k: int
    entries: list = field(default_factory=list)

    def column(self, name: str) -> list:
        return [e[name] for e in self.entries]


def convergence_report(a: LaurentSymbol, k: int, ns=DEFAULT_NS, probes=None,
                       family: CurveFamily | None = None, r_max: float = 1e3) -> ConvergenceReport:
    """Mass, Cauchy-transform error and curve distance for every ``n`` in ``ns``."""
    check_index(a, k)
    if family is None:
        family = trace_curve(a, k, r_max)
    if probes is None:
        probes = default_probes(a, family)
    rows = []
    for n in ns:
        m = empirical_measure(a, k, n)
        dist, outside = curve_distance_detail(a, k, n, family)
        rows.append({"n": int(n), "mass": len(m) / n,
                     "cauchy_error": cauchy_error(a, k, n, probes, family),
                     "curve_distance": dist, "outside": outside})
    return ConvergenceReport(k, rows)
