"""Generalized banded Toeplitz matrices ``T_n(z^{-k}(a - lambda))``.

Entry ``(i, j)`` of the size-``n`` matrix is ``b_{i-j}`` with
``b_m = a_{m+k} - lambda [m + k = 0]``, so the lower bandwidth is ``p - k``
and the upper bandwidth is ``q + k``.  For ``k = 0`` this is
``T_n(a) - lambda I``.  Its determinant is a polynomial ``P_{k,n}(lambda)``
whose zeros (the generalized spectrum) accumulate on the curve of index
``k``.

Determinants are computed by banded Gaussian elimination with partial
pivoting, in double precision or in gmpy2 multiprecision.  The polynomial is
recovered by interpolation on a circle and its zeros by Aberth iteration in
multiprecision; ``64 + 4 n`` bits are used by default because the
coefficients span a dynamic range that grows linearly with ``n``.
"""

from __future__ import annotations

import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from functools import lru_cache

import gmpy2
import numpy as np

from . import _aberth
from .errors import InterpolationConditioning, NumericalError, RootSolverFailure, ValidationError
from .roots import check_index, modulus_gap, widom_terms
from .symbol import LaurentSymbol, branch_points, branch_scale


@dataclass(frozen=True)
class BandedToeplitz:
    """Diagonal description of ``T_n(z^{-k}(a - lambda))``.

    ``diagonals[m]`` holds ``b_m`` for ``m = i - j`` in
    ``[-(q+k), p-k]``.
    """

    n: int
    k: int
    lower: int
    upper: int
    diagonals: dict

    def dense(self) -> np.ndarray:
        m = np.zeros((self.n, self.n), complex)
        for off, v in self.diagonals.items():
            m += np.diag(np.full(self.n - abs(off), v, complex), -off)
        return m


def generalized_matrix(a: LaurentSymbol, k: int, lam: complex, n: int) -> BandedToeplitz:
    """Banded description of the size-``n`` generalized matrix at ``lam``."""
    check_index(a, k)
    if n < 1:
        raise ValidationError("matrix size must be positive")
    diags = {}
    for m in range(-(a.q + k), a.p - k + 1):
        v = a.coeff(m + k)
        if m + k == 0:
            v = v - lam
        diags[m] = complex(v)
    return BandedToeplitz(n, k, a.p - k, a.q + k, diags)


def _band_pivots(b: dict, lower: int, upper: int, n: int, zero):
    """Pivots and permutation sign of banded LU with partial pivoting.

    ``b`` maps ``i - j`` to the (already converted) entry value.  Returns
    ``(pivots, sign)``; ``pivots`` stops early at an exact zero pivot.
    """
    rows = []
    for i in range(n):
        rows.append({j: b[i - j] for j in range(max(0, i - lower), min(n, i + upper + 1))})
    pivots = []
    sign = 1
    for c in range(n):
        best = c
        bv = abs(rows[c].get(c, zero))
        for r in range(c + 1, min(n, c + lower + 1)):
            v = abs(rows[r].get(c, zero))
            if v > bv:
                best, bv = r, v
        if bv == 0:
            pivots.append(zero)
            return pivots, sign
        if best != c:
            rows[c], rows[best] = rows[best], rows[c]
            sign = -sign
        prow = rows[c]
        piv = prow[c]
        pivots.append(piv)
        for r in range(c + 1, min(n, c + lower + 1)):
            rr = rows[r]
            f = rr.pop(c, None)
            if f is None or f == 0:
                continue
            f = f / piv
            for j, v in prow.items():
                if j > c:
                    rr[j] = rr.get(j, zero) - f * v
    return pivots, sign


@dataclass(frozen=True)
class DetValue:
    """Determinant as ``sign * exp(log_abs) * phase``.

    ``value`` is the complex number itself when it is representable in
    double precision, else ``None``.  ``is_zero`` marks an exact zero pivot.
    """

    value: complex | None
    log_abs: float
    phase: complex
    is_zero: bool


def _entries(a: LaurentSymbol, k: int, lam, conv):
    out = {}
    for m in range(-(a.q + k), a.p - k + 1):
        v = conv(a.coeff(m + k))
        if m + k == 0:
            v = v - lam
        out[m] = v
    return out


def det_eval(a: LaurentSymbol, k: int, lam: complex, n: int, bits: int | None = None) -> DetValue:
    """``det T_n(z^{-k}(a - lam))``.

    With ``bits=None`` the elimination runs in double precision; otherwise in
    gmpy2 with the given number of bits.
    """
    check_index(a, k)
    if n < 1:
        raise ValidationError("matrix size must be positive")
    if bits is None:
        b = _entries(a, k, complex(lam), complex)
        pivots, sign = _band_pivots(b, a.p - k, a.q + k, n, 0j)
        if pivots[-1] == 0:
            return DetValue(0j, -math.inf, 1 + 0j, True)
        la = sum(math.log(abs(v)) for v in pivots)
        ph = complex(sign)
        for v in pivots:
            ph *= v / abs(v)
        val = ph * math.exp(la) if la < 700 else None
        return DetValue(val, la, ph, False)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        d = _det_mp(a, k, gmpy2.mpc(lam), n)
        if d == 0:
            return DetValue(0j, -math.inf, 1 + 0j, True)
        la = float(gmpy2.log(abs(d)))
        ph = complex(d / abs(d))
        val = complex(d) if la < 700 else None
        return DetValue(val, la, ph, False)


def _det_mp(a: LaurentSymbol, k: int, lam, n: int):
    """Multiprecision determinant in the current gmpy2 context."""
    zero = gmpy2.mpc(0)
    b = _entries(a, k, lam, gmpy2.mpc)
    pivots, sign = _band_pivots(b, a.p - k, a.q + k, n, zero)
    det = gmpy2.mpc(sign)
    for v in pivots:
        det *= v
    return det


def degree_bound(a: LaurentSymbol, k: int, n: int) -> int:
    """Largest possible degree of ``P_{k,n}``: ``n(q+k)/q`` for ``k < 0``,
    ``n`` for ``k = 0`` and ``n(p-k)/p`` for ``k > 0`` (rounded down)."""
    check_index(a, k)
    if k < 0:
        return n * (a.q + k) // a.q
    if k > 0:
        return n * (a.p - k) // a.p
    return n


def leading_coefficient_formula(a: LaurentSymbol, k: int, n: int) -> complex | None:
    """Closed-form leading coefficient when the degree bound is attained.

    Valid for ``k = 0`` and, for ``k > 0`` (``k < 0``), when ``p`` (``q``)
    divides ``n``; returns ``None`` otherwise.
    """
    check_index(a, k)
    sgn = (-1) ** (((k + 1) * n) % 2)
    if k == 0:
        return complex(sgn)
    if k > 0:
        if n % a.p:
            return None
        return sgn * complex(a.coeff(a.p)) ** (k * n // a.p)
    if n % a.q:
        return None
    return sgn * complex(a.coeff(-a.q)) ** (-k * n // a.q)


def default_bits(n: int) -> int:
    return 64 + 4 * n


def _workers() -> int:
    try:
        return max(1, int(os.environ.get("TOEPLITZ_THREADS", "1")))
    except ValueError:
        return 1


def _det_nodes(args):
    a, k, n, bits, nodes = args
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        return [_det_mp(a, k, gmpy2.mpc(x), n) for x in nodes]


def _node_radius(a: LaurentSymbol) -> float:
    mods = [abs(b) for b in branch_points(a)]
    r = float(np.mean(mods)) if mods else 0.0
    return r if r > 0 else 1.0


@dataclass(frozen=True, eq=False)
class CharPolynomial:
    """``P_{k,n}(lambda) = sum_j coeffs[j] lambda^j``.

    ``coeffs`` is the double-precision view; ``mp_coeffs`` keeps the
    multiprecision values the zeros are computed from.  ``degree`` is the
    trimmed degree and ``leading`` its coefficient; an identically zero
    polynomial has degree -1 and leading coefficient 0.
    """

    k: int
    n: int
    coeffs: np.ndarray
    degree: int
    leading: complex
    mp_coeffs: tuple
    bits: int
    radius: float
    noise: float

    def __call__(self, lam):
        return np.polyval(self.coeffs[::-1], lam)


@lru_cache(maxsize=128)
def char_poly(a: LaurentSymbol, k: int, n: int, bits: int | None = None) -> CharPolynomial:
    """Coefficients of ``P_{k,n}`` by interpolation at ``D + 1`` points.

    The nodes lie on a circle whose radius is the mean modulus of the branch
    points (1 if that is zero), ``D`` is :func:`degree_bound`.  Coefficients
    below the estimated noise level are trimmed from the top.

    Raises :class:`InterpolationConditioning` when the interpolant fails to
    reproduce the determinant at an extra point between the nodes.
    """
    check_index(a, k)
    if n < 1:
        raise ValidationError("matrix size must be positive")
    bits = default_bits(n) if bits is None else int(bits)
    dmax = degree_bound(a, k, n)
    npts = dmax + 1
    s = _node_radius(a)
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        pi = gmpy2.const_pi()
        roots_of_unity = [gmpy2.exp(gmpy2.mpc(0, 2 * pi * m / npts)) for m in range(npts)]
        smp = gmpy2.mpfr(s)
        nodes = [smp * w for w in roots_of_unity]
        check = smp * gmpy2.exp(gmpy2.mpc(0, pi / npts))
        workers = min(_workers(), npts)
        if workers > 1:
            chunks = [nodes[i::workers] for i in range(workers)]
            with ProcessPoolExecutor(workers) as ex:
                parts = list(ex.map(_det_nodes, [(a, k, n, bits, c) for c in chunks]))
            vals = [None] * npts
            for i, part in enumerate(parts):
                vals[i::workers] = part
        else:
            vals = [_det_mp(a, k, x, n) for x in nodes]
        scaled = []
        for j in range(npts):
            acc = gmpy2.mpc(0)
            for m in range(npts):
                acc += vals[m] * roots_of_unity[(-m * j) % npts]
            scaled.append(acc / npts)  # c_j s^j
        mx = max(abs(c) for c in scaled)
        # row-sum bound on |det| at the nodes; values at rounding level of
        # it mean P_{k,n} vanishes identically (sparse symbols)
        hb = gmpy2.mpfr(sum(abs(c) for c in a.coeffs) + s) ** n
        if mx <= hb * gmpy2.mpfr(2) ** (-(bits - 48)):
            zero = (gmpy2.mpc(0),)
            return CharPolynomial(k, n, np.zeros(1, complex), -1, 0j, zero, bits, s, 1.0)
        # reproduce the determinant between nodes
        t = gmpy2.exp(gmpy2.mpc(0, pi / npts))
        approx = gmpy2.mpc(0)
        for c in reversed(scaled):
            approx = approx * t + c
        resid = abs(approx - _det_mp(a, k, check, n))
        if resid > mx * gmpy2.mpfr(2) ** (-bits // 3):
            raise InterpolationConditioning(
                f"interpolation residual {float(resid / mx):.2e} relative to the node maximum")
        noise = max(mx * gmpy2.mpfr(2) ** (-(bits - 48)), 1e4 * resid)
        deg = dmax
        while deg > 0 and abs(scaled[deg]) <= noise:
            deg -= 1
        mp_coeffs = tuple(scaled[j] / smp ** j for j in range(deg + 1))
        coeffs = np.array([complex(c) for c in mp_coeffs])
        rel_noise = float(noise / mx)
    return CharPolynomial(k, n, coeffs, deg, complex(mp_coeffs[deg]), mp_coeffs, bits, s,
                          rel_noise)


@dataclass(frozen=True, eq=False)
class SpectralSet:
    """Zeros of ``P_{k,n}`` listed with multiplicity."""

    k: int
    n: int
    zeros: np.ndarray
    bits: int

    def clusters(self, rel_tol: float = 1e-6, radius: float = 1.0) -> list[tuple[complex, int]]:
        """Group zeros closer than ``rel_tol * radius``; returns (centre, count)."""
        out: list[list] = []
        tol = rel_tol * radius
        for z in sorted(self.zeros, key=lambda v: (v.real, v.imag)):
            for g in out:
                if abs(g[0] - z) <= tol:
                    g[1] += 1
                    g[2].append(z)
                    break
            else:
                out.append([z, 1, [z]])
        return [(complex(np.mean(g[2])), g[1]) for g in out]


def _poly_zeros_mp(coeffs: tuple, bits: int) -> list[complex]:
    """Zeros of a multiprecision polynomial (ascending coefficients).

    Exactly zero low coefficients become zeros at the origin.
    """
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        nz = 0
        while nz < len(coeffs) - 1 and coeffs[nz] == 0:
            nz += 1
        cc = list(coeffs[nz:])
        if len(cc) <= 1:
            return [0j] * nz
        logc = np.array([float(gmpy2.log(abs(c))) if c != 0 else -np.inf for c in cc])
        phc = np.array([float(gmpy2.phase(c)) if c != 0 else 0.0 for c in cc])
        z0 = _aberth.newton_polygon_init(logc)
        zd = _aberth.aberth_logscaled(logc, phc, z0)
        if not np.all(np.isfinite(zd)):
            zd = z0
        z = _aberth.aberth_mp(cc, zd, bits)
        return [complex(x) for x in z] + [0j] * nz


@lru_cache(maxsize=128)
def generalized_spectrum(a: LaurentSymbol, k: int, n: int, bits: int | None = None) -> SpectralSet:
    """Zeros of ``P_{k,n}`` with multiplicity, refined in multiprecision."""
    cp = char_poly(a, k, n, bits)
    coeffs = list(cp.mp_coeffs)
    with gmpy2.context(gmpy2.get_context(), precision=cp.bits):
        # trailing coefficients below the noise floor are zero roots
        mx = max(abs(c) * gmpy2.mpfr(cp.radius) ** j for j, c in enumerate(coeffs))
        floor = mx * gmpy2.mpfr(cp.noise)
        j = 0
        while j < cp.degree and abs(coeffs[j]) * gmpy2.mpfr(cp.radius) ** j <= floor:
            coeffs[j] = gmpy2.mpc(0)
            j += 1
    if cp.degree <= 0:
        zeros = np.zeros(0, complex)
    else:
        try:
            zeros = np.array(_poly_zeros_mp(tuple(coeffs), cp.bits), complex)
        except RootSolverFailure as exc:
            raise RootSolverFailure(f"spectrum k={k}, n={n}: {exc}") from None
    order = np.lexsort((zeros.imag, zeros.real))
    z = zeros[order]
    z.setflags(write=False)
    return SpectralSet(k, n, z, cp.bits)


# ------------------------------------------------------------ expansion check
def relative_discrepancy(a: LaurentSymbol, k: int, lam: complex, n: int) -> float:
    """``|det - expansion| / |det|`` with the determinant in multiprecision."""
    d = det_eval(a, k, lam, n, bits=default_bits(n))
    w = complex(sum(t.coefficient * t.weight ** n for t in widom_terms(a, k, lam)))
    if d.is_zero or d.value is None:
        return math.nan
    return abs(d.value - w) / abs(d.value)


def dominant_ratio_errors(a: LaurentSymbol, k: int, lam: complex, ns) -> np.ndarray:
    """``|1 - C_dom w_dom^n / det T_n|`` for every ``n`` in ``ns``."""
    dom = next(t for t in widom_terms(a, k, lam) if t.dominant)
    out = []
    for n in ns:
        d = det_eval(a, k, lam, n, bits=default_bits(n))
        log_ratio = (math.log(abs(dom.coefficient)) + n * math.log(abs(dom.weight)) - d.log_abs)
        ph = (dom.coefficient / abs(dom.coefficient)) * (dom.weight / abs(dom.weight)) ** n / d.phase
        out.append(abs(1 - math.exp(log_ratio) * ph))
    return np.array(out)


def fitted_rate(ns, errs, floor: float = 1e-13, tail: float = 0.5) -> float:
    """Geometric rate from a least-squares fit of ``log err`` against ``n``.

    Only errors above ``floor`` count, and of those only the last ``tail``
    fraction (at least three points), which skips the pre-asymptotic sizes.
    """
    ns = np.asarray(ns, float)
    errs = np.asarray(errs, float)
    idx = np.flatnonzero(np.isfinite(errs) & (errs > floor))
    if idx.size < 2:
        return 0.0
    idx = idx[-max(3, int(math.ceil(tail * idx.size))):]
    slope = np.polyfit(ns[idx], np.log(errs[idx]), 1)[0]
    return float(math.exp(slope))


PROBE_NMAX = 200
PROBE_GAP = 0.5


def widom_check(a: LaurentSymbol, k: int, n_max: int, trials: int, seed: int = 0) -> dict:
    """Random points in the disk of radius ``2 * branch_scale``; every size up to
    ``n_max`` is compared.  Points with coincident roots or on the curve (where
    the expansion cancels) are skipped, and so are sizes where ``P_{k,n}``
    vanishes identically (both sides are exactly zero there).

    The ratio probe is the checked point whose modulus gap is closest to
    ``PROBE_GAP``.  Its ratio errors are taken up to the size where the
    predicted rate ``exp(-gap)`` has decayed to about ``1e-8`` (at most
    ``PROBE_NMAX``), and the rate is fitted with :func:`fitted_rate`."""
    rng = np.random.default_rng(seed)
    radius = 2.0 * max(branch_scale(a), 1e-3)
    sizes = [n for n in range(1, n_max + 1) if char_poly(a, k, n).degree >= 0]
    worst, count, skipped, best = 0.0, 0, 0, None
    for _ in range(trials):
        lam = complex(radius * math.sqrt(rng.random()) * np.exp(2j * math.pi * rng.random()))
        try:
            gap = float(modulus_gap(a, k, lam))
            if gap < 1e-6:
                raise NumericalError("on curve")
            errs = [relative_discrepancy(a, k, lam, n) for n in sizes]
        except NumericalError:
            skipped += 1
            continue
        errs = [e for e in errs if math.isfinite(e)]
        if errs:
            worst = max(worst, max(errs))
            count += 1
        # probe whose decay is slow enough to observe over many sizes
        if best is None or abs(math.log(gap / PROBE_GAP)) < abs(math.log(best[1] / PROBE_GAP)):
            best = (lam, gap)
    report = {"k": k, "n_max": n_max, "trials": trials, "checked": count, "skipped": skipped,
              "seed": seed, "max_relative_discrepancy": worst,
              "vanishing_sizes": [n for n in range(1, n_max + 1) if n not in sizes]}
    if best is not None:
        # long enough for the predicted decay to reach about 1e-8
        top = int(min(PROBE_NMAX, max(n_max, math.ceil(18.0 / best[1]))))
        start = max([n + 1 for n in report["vanishing_sizes"]], default=1)
        ns = list(range(start, top + 1))
        errs = dominant_ratio_errors(a, k, best[0], ns)
        report["ratio_probe"] = {"lambda": best[0], "gap": best[1], "sizes": [start, top],
                                 "predicted_rate": math.exp(-best[1]),
                                 "fitted_rate": fitted_rate(ns, errs),
                                 "errors": errs}
    return report
