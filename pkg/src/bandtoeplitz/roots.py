"""Roots of ``a(z) = lambda`` ordered by modulus, and quantities built on them.

For each ``lambda`` the equation ``z^q (a(z) - lambda) = 0`` has ``p + q``
roots ``z_1, ..., z_{p+q}`` sorted by increasing modulus.  Roots whose
log-moduli differ by at most ``TIE_TOL`` form a tie group and are ordered by
principal argument inside the group, which makes the labelling deterministic.

The index ``k`` runs over ``-q+1, ..., p-1`` throughout; it selects the pair
of neighbouring roots ``z_{q+k}, z_{q+k+1}`` and the product
``w_k = z_1 z_2 ... z_{q+k}``.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from . import _aberth
from .errors import DegenerateRoots, IndexOutOfRange, OnCurve, RootSolverFailure
from .symbol import LaurentSymbol, evaluate_derivative

TIE_TOL = 1e-9
_CHUNK = 200_000  # rows * d^2 budget for one Aberth sweep


def check_index(a: LaurentSymbol, k: int) -> None:
    """Raise :class:`IndexOutOfRange` unless ``-q < k < p``."""
    if not (-a.q + 1 <= k <= a.p - 1):
        raise IndexOutOfRange(f"k={k} outside [{-a.q + 1}, {a.p - 1}]")


def _initial_points(a: LaurentSymbol, lam: np.ndarray) -> np.ndarray:
    """Starting values on one circle, or on two when ``|lambda|`` dominates.

    The base circle has radius ``|a_{-q}/a_p|^{1/(p+q)}``.  When the middle
    coefficient ``a_0 - lambda`` lies above the Newton polygon chord, ``q``
    points go on the small-root circle and ``p`` on the large-root circle.
    """
    p, q, d = a.p, a.q, a.degree
    l0 = np.log(abs(a.coeff(-q)))
    ld = np.log(abs(a.coeff(p)))
    with np.errstate(divide="ignore"):
        lq = np.log(np.abs(a.coeff(0) - lam))
    split = lq > l0 + (ld - l0) * q / d
    r_one = np.exp((l0 - ld) / d)
    r_small = np.exp((l0 - lq) / q)
    r_large = np.exp((lq - ld) / p)
    j = np.arange(d)
    ang = 2 * np.pi * j / d + 0.4
    radius = np.where(split[:, None], np.where(j < q, r_small[:, None], r_large[:, None]),
                      r_one)
    return radius * np.exp(1j * ang)[None, :]


def _sort_rows(z: np.ndarray, tie_tol: float = TIE_TOL) -> np.ndarray:
    """Sort each row by modulus; ties (in log-modulus) by principal argument."""
    with np.errstate(divide="ignore"):
        lm = np.log(np.abs(z))
    order = np.argsort(lm, axis=1, kind="stable")
    zs = np.take_along_axis(z, order, axis=1)
    lms = np.take_along_axis(lm, order, axis=1)
    gap = np.diff(lms, axis=1) > tie_tol
    gid = np.concatenate([np.zeros((z.shape[0], 1), int), np.cumsum(gap, axis=1)], axis=1)
    order2 = np.lexsort((np.angle(zs), gid), axis=1)
    return np.take_along_axis(zs, order2, axis=1)


def solve_batch(a: LaurentSymbol, lam, init: np.ndarray | None = None,
                sort: bool = True) -> np.ndarray:
    """Roots for every entry of ``lam``; shape ``lam.shape + (p+q,)``.

    ``init`` may hold previous roots (same shape as the result) to warm-start
    the iteration, which is how curve marching keeps it cheap.
    """
    lam = np.asarray(lam, complex)
    shape = lam.shape
    flat = lam.ravel()
    d = a.degree
    out = np.empty((flat.size, d), complex)
    if init is None:
        z0 = _initial_points(a, flat)
    else:
        z0 = np.asarray(init, complex).reshape(flat.size, d)
    lead = a.coeff(a.p)
    step = max(1, _CHUNK // (d * d))
    for s in range(0, flat.size, step):
        c = a.poly_coeffs(flat[s:s + step]) / lead
        out[s:s + step] = _aberth.aberth_batch(c, z0[s:s + step])
    if sort:
        out = _sort_rows(out)
    return out.reshape(shape + (d,))


def root_derivatives(a: LaurentSymbol, z) -> np.ndarray:
    """``dz/dlambda = 1 / a'(z)``; ``nan`` where ``a'(z)`` vanishes."""
    da = np.asarray(evaluate_derivative(a, z), complex)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(da != 0, 1.0 / np.where(da != 0, da, 1.0), np.nan + 0j)
    return out


@dataclass(frozen=True, eq=False)
class RootSystem:
    """Ordered roots at one ``lambda``.

    Attributes
    ----------
    lam : complex
    roots : ndarray
        ``z_1, ..., z_{p+q}`` by increasing modulus.
    derivs : ndarray
        ``z_j'(lambda)``, ``nan`` at a double root.
    tie_groups : tuple of (start, stop)
        Half-open 0-based index ranges of groups of two or more roots whose
        moduli agree within the tie tolerance.
    """

    lam: complex
    roots: np.ndarray
    derivs: np.ndarray
    tie_groups: tuple

    @property
    def log_moduli(self) -> np.ndarray:
        return np.log(np.abs(self.roots))


def _tie_groups(lm: np.ndarray, tie_tol: float) -> tuple:
    groups = []
    start = 0
    for i in range(1, len(lm) + 1):
        if i == len(lm) or lm[i] - lm[i - 1] > tie_tol:
            if i - start >= 2:
                groups.append((start, i))
            start = i
    return tuple(groups)


def roots_at(a: LaurentSymbol, lam: complex, tol: float = 1e-10,
             init: np.ndarray | None = None, tie_tol: float = TIE_TOL) -> RootSystem:
    """All roots of ``a(z) = lam`` with derivatives and tie groups.

    Raises :class:`RootSolverFailure` if a returned root has relative
    residual ``|a(z) - lam| / sum_k |a_k||z|^k`` above ``tol``.
    """
    lam = complex(lam)
    z = solve_batch(a, np.array([lam]), None if init is None else np.asarray(init)[None, :],
                    sort=False)[0]
    zs = _sort_rows(z[None, :], tie_tol)[0]
    c = a.poly_coeffs(lam)
    res = np.abs(np.polyval(c[::-1], zs))
    bound = np.polyval(np.abs(c[::-1]), np.abs(zs))
    if np.any(res > tol * bound):
        raise RootSolverFailure(f"residual {float(np.max(res / bound)):.2e} at lambda={lam}")
    lm = np.log(np.abs(zs))
    zs.setflags(write=False)
    dz = root_derivatives(a, zs)
    dz.setflags(write=False)
    return RootSystem(lam, zs, dz, _tie_groups(lm, tie_tol))


def modulus_gap(a: LaurentSymbol, k: int, lam):
    """``log|z_{q+k+1}(lam)| - log|z_{q+k}(lam)|`` (nonnegative).

    Accepts a scalar or an array of ``lam``; zero exactly on the curve of
    index ``k``.
    """
    check_index(a, k)
    lam_arr = np.asarray(lam, complex)
    z = solve_batch(a, lam_arr.ravel(), sort=False)
    lm = np.sort(np.log(np.abs(z)), axis=1)
    g = lm[:, a.q + k] - lm[:, a.q + k - 1]
    g = g.reshape(lam_arr.shape)
    return float(g) if g.ndim == 0 else g


def gap_from_roots(a: LaurentSymbol, k: int, z: np.ndarray) -> np.ndarray:
    """Modulus gap from roots along the last axis (any order)."""
    lm = np.sort(np.log(np.abs(z)), axis=-1)
    return lm[..., a.q + k] - lm[..., a.q + k - 1]


def logderiv_from_roots(a: LaurentSymbol, k: int, z: np.ndarray) -> np.ndarray:
    """``sum_{j <= q+k} z_j'/z_j`` from sorted roots (last axis)."""
    zz = z[..., : a.q + k]
    return np.sum(1.0 / (evaluate_derivative(a, zz) * zz), axis=-1)


def w_k_value(a: LaurentSymbol, k: int, lam: complex, tie_tol: float = TIE_TOL) -> complex:
    """``w_k(lam) = z_1 ... z_{q+k}``.

    Raises :class:`OnCurve` when ``lam`` is within the tie tolerance of the
    curve of index ``k``, where ``w_k`` is discontinuous.
    """
    check_index(a, k)
    rs = roots_at(a, lam, tie_tol=tie_tol)
    if rs.log_moduli[a.q + k] - rs.log_moduli[a.q + k - 1] <= tie_tol:
        raise OnCurve(f"lambda={lam} lies on the curve of index {k}")
    return complex(np.prod(rs.roots[: a.q + k]))


def w_k_logderiv(a: LaurentSymbol, k: int, lam: complex, tie_tol: float = TIE_TOL) -> complex:
    """``w_k'(lam) / w_k(lam) = sum_{j <= q+k} z_j'/z_j``; raises :class:`OnCurve`."""
    check_index(a, k)
    rs = roots_at(a, lam, tie_tol=tie_tol)
    if rs.log_moduli[a.q + k] - rs.log_moduli[a.q + k - 1] <= tie_tol:
        raise OnCurve(f"lambda={lam} lies on the curve of index {k}")
    zz = rs.roots[: a.q + k]
    return complex(np.sum(rs.derivs[: a.q + k] / zz))


@dataclass(frozen=True)
class WidomTerm:
    """One term ``C_M w_M^n`` of the determinant expansion.

    ``indices`` are 1-based positions in the modulus ordering.
    """

    indices: tuple
    weight: complex
    coefficient: complex
    dominant: bool


def widom_terms(a: LaurentSymbol, k: int, lam: complex,
                sep_tol: float = 1e-10) -> list[WidomTerm]:
    """All ``binom(p+q, p-k)`` terms of the determinant expansion at ``lam``.

    ``w_M = (-1)^{p-k} a_p prod_{j in M} z_j`` and
    ``C_M = prod_{j in M} z_j^{q+k} prod_{j in M, l not in M} (z_j - z_l)^{-1}``.
    The dominant term is ``M = {q+k+1, ..., p+q}``.

    Raises :class:`DegenerateRoots` when two roots are closer than
    ``sep_tol`` times the largest modulus, or than 100 times their forward
    error (a numerically split multiple root).
    """
    check_index(a, k)
    rs = roots_at(a, lam)
    z = rs.roots
    d = a.degree
    diff = np.abs(z[:, None] - z[None, :])
    np.fill_diagonal(diff, np.inf)
    # a computed m-fold root splits into m roots whose spacing is only a few
    # times their forward error eps * B(z) / |P'(z)|
    c = a.poly_coeffs(lam)
    bound = np.polyval(np.abs(c[::-1]), np.abs(z))
    dp = np.polyval((c * np.arange(d + 1))[:0:-1], z)
    with np.errstate(divide="ignore"):
        err = np.where(dp != 0, 2.2e-16 * bound / np.abs(dp), np.inf)
    if (diff.min() <= sep_tol * max(1.0, np.abs(z).max())
            or np.any(diff <= 100 * np.maximum(err[:, None], err[None, :]))):
        raise DegenerateRoots(f"coincident roots at lambda={lam}")
    p, q = a.p, a.q
    sign = (-1) ** (p - k)
    dom = tuple(range(q + k + 1, d + 1))
    out = []
    for m in itertools.combinations(range(d), p - k):
        ms = set(m)
        zm = z[list(m)]
        w = sign * a.coeff(p) * complex(np.prod(zm))
        c = complex(np.prod(zm ** (q + k)))
        for j in m:
            for l in range(d):
                if l not in ms:
                    c /= z[j] - z[l]
        idx = tuple(j + 1 for j in m)
        out.append(WidomTerm(idx, w, c, idx == dom))
    return out


def widom_det(a: LaurentSymbol, k: int, lam: complex, n: int) -> complex:
    """Determinant of the size-``n`` generalized matrix from the expansion."""
    return complex(sum(t.coefficient * t.weight ** n for t in widom_terms(a, k, lam)))
