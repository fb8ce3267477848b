"""Aberth-Ehrlich polynomial root finders.

Three flavours share one iteration:

* :func:`aberth_batch` runs on many double-precision polynomials of equal
  degree at once (one row per polynomial);
* :func:`aberth_logscaled` works on a single polynomial whose coefficients
  are given as logarithms, so that coefficient ranges far beyond the double
  exponent range can still produce good starting values;
* :func:`aberth_mp` refines those values in gmpy2 multiprecision.

All variants stop a root once its backward error is at the working
precision: ``|p(z)| <= 4 d eps sum_j |c_j| |z|^j``.
"""

from __future__ import annotations

import cmath
import math

import gmpy2
import numpy as np

from .errors import RootSolverFailure

EPS = np.finfo(float).eps


def newton_polygon_init(logmag: np.ndarray, offset: float = 0.4) -> np.ndarray:
    """Starting points from the upper convex hull of ``(j, log|c_j|)``.

    Each hull edge from ``a`` to ``b`` contributes ``b - a`` points spread on
    the circle of radius ``exp((log|c_a| - log|c_b|) / (b - a))``.  The lowest
    hull index must be zero (strip zero roots first).
    """
    lg = np.asarray(logmag, float)
    d = len(lg) - 1
    hull: list[int] = []
    for j in range(d + 1):
        if not np.isfinite(lg[j]):
            continue
        while len(hull) >= 2:
            i0, i1 = hull[-2], hull[-1]
            if (lg[i1] - lg[i0]) * (j - i0) <= (lg[j] - lg[i0]) * (i1 - i0):
                hull.pop()
            else:
                break
        hull.append(j)
    z = []
    for a, b in zip(hull[:-1], hull[1:]):
        r = math.exp((lg[a] - lg[b]) / (b - a))
        m = b - a
        for t in range(m):
            z.append(r * cmath.exp(1j * (2 * math.pi * t / m + 2 * math.pi * a / d + offset)))
    return np.array(z, complex)


def _horner(c: np.ndarray, z: np.ndarray):
    """Value, derivative and absolute bound of rows of ``c`` at ``z``."""
    d = c.shape[1] - 1
    ac = np.abs(c)
    az = np.abs(z)
    p = np.broadcast_to(c[:, d:d + 1], z.shape).copy()
    dp = np.zeros_like(z)
    bound = np.broadcast_to(ac[:, d:d + 1], z.shape).copy()
    for j in range(d - 1, -1, -1):
        dp = dp * z + p
        p = p * z + c[:, j:j + 1]
        bound = bound * az + ac[:, j:j + 1]
    return p, dp, bound


def aberth_batch(coeffs: np.ndarray, init: np.ndarray, maxiter: int = 300,
                 polish: bool = True) -> np.ndarray:
    """Roots of every row of ``coeffs`` (ascending powers).

    Parameters
    ----------
    coeffs : (N, d+1) complex array, leading coefficients nonzero.
    init : (N, d) complex array of distinct starting points.

    Returns
    -------
    (N, d) complex array of roots in no particular order.
    """
    c = np.atleast_2d(np.asarray(coeffs, complex))
    z = np.array(np.atleast_2d(init), complex)
    n_rows, d = z.shape
    if d == 0:
        return z
    if d == 1:
        return -c[:, :1] / c[:, 1:2]
    active = np.ones(z.shape, bool)
    eye = np.eye(d, dtype=bool)
    for _ in range(maxiter):
        rows = np.flatnonzero(active.any(axis=1))
        if rows.size == 0:
            break
        zr = z[rows]
        p, dp, bound = _horner(c[rows], zr)
        conv = np.abs(p) <= 4 * d * EPS * bound
        act = active[rows] & ~conv
        active[rows] = act
        diff = zr[:, :, None] - zr[:, None, :]
        diff[:, eye] = np.inf
        s = (1.0 / diff).sum(axis=2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            w = ratio / (1.0 - ratio * s)
        bad = ~np.isfinite(w)
        if bad.any():
            # stationary point of p: nudge instead of dividing by zero
            w = np.where(bad, 1e-3 * (np.abs(zr) + 1.0) * np.exp(0.7j), w)
        zr = np.where(act, zr - w, zr)
        z[rows] = zr
    else:
        if active.any():
            raise RootSolverFailure(
                f"Aberth iteration did not converge for {int(active.any(axis=1).sum())} "
                f"of {n_rows} polynomials")
    if polish:
        p, dp, _ = _horner(c, z)
        with np.errstate(divide="ignore", invalid="ignore"):
            step = p / dp
        zn = z - step
        pn, _, _ = _horner(c, zn)
        better = np.isfinite(zn) & (np.abs(pn) < np.abs(p))
        z = np.where(better, zn, z)
    return z


def aberth_logscaled(logc: np.ndarray, phase: np.ndarray, z: np.ndarray,
                     maxiter: int = 600) -> np.ndarray:
    """Double-precision Aberth with coefficients ``exp(logc + i phase)``.

    Every term ``c_j z^j`` is formed in log space and rescaled by the largest
    term before exponentiation, so huge or tiny coefficients do not overflow.
    Entries with ``logc == -inf`` are treated as zero coefficients.
    """
    d = len(logc) - 1
    ok = np.isfinite(logc)
    lc = (np.asarray(logc) + 1j * np.asarray(phase))[ok]
    jj = np.arange(d + 1)[ok]
    z = np.array(z, complex)
    conv = np.zeros(d, bool)
    for _ in range(maxiter):
        # a zero root gives non-finite steps, which are dropped below
        with np.errstate(divide="ignore", invalid="ignore"):
            lz = np.log(z)
            t = lc[None, :] + jj[None, :] * lz[:, None]
            top = t.real.max(axis=1)
            e = np.exp(t - top[:, None])
            p = e.sum(axis=1)
            dp = (e * jj[None, :]).sum(axis=1) / z
            bound = np.abs(e).sum(axis=1)
        conv = np.abs(p) <= 4 * d * EPS * bound
        if conv.all():
            break
        diff = z[:, None] - z[None, :]
        np.fill_diagonal(diff, np.inf)
        s = (1.0 / diff).sum(axis=1)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = p / dp
            w = ratio / (1.0 - ratio * s)
        w[conv | ~np.isfinite(w)] = 0
        z = z - w
    # unconverged starting values are still useful to the multiprecision stage
    return z


def aberth_mp(coeffs: list, init, bits: int, maxiter: int = 400) -> list:
    """Gauss-Seidel Aberth refinement in ``bits`` of precision.

    ``coeffs`` are gmpy2 ``mpc`` values in ascending order with nonzero ends.
    Raises :class:`RootSolverFailure` if some root does not reach the
    backward-error criterion.
    """
    with gmpy2.context(gmpy2.get_context(), precision=bits):
        d = len(coeffs) - 1
        cc = [gmpy2.mpc(c) for c in coeffs]
        ac = [abs(c) for c in cc]
        dc = [j * cc[j] for j in range(1, d + 1)]
        z = [gmpy2.mpc(complex(x)) for x in init]
        done = [False] * d
        eps = gmpy2.mpfr(2) ** (-bits)
        zero = gmpy2.mpc(0)
        for _ in range(maxiter):
            moved = 0
            for i in range(d):
                if done[i]:
                    continue
                x = z[i]
                ax = abs(x)
                p = cc[d]
                dp = dc[d - 1]
                bound = ac[d]
                for j in range(d - 1, -1, -1):
                    p = p * x + cc[j]
                    bound = bound * ax + ac[j]
                    if j > 0:
                        dp = dp * x + dc[j - 1]
                if abs(p) <= 4 * d * eps * bound:
                    done[i] = True
                    continue
                s = zero
                for j in range(d):
                    if j != i:
                        s += 1 / (x - z[j])
                if dp == 0:
                    z[i] = x + (ax + 1) * gmpy2.mpfr(2) ** (-bits // 4)
                else:
                    ratio = p / dp
                    z[i] = x - ratio / (1 - ratio * s)
                moved += 1
            if moved == 0:
                return z
        raise RootSolverFailure(
            f"multiprecision Aberth left {d - sum(done)} of {d} roots unconverged")
