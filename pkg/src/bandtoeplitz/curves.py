"""Tracing the curves ``Gamma_k`` where ``|z_{q+k}| = |z_{q+k+1}|``.

The curve is the zero set of the nonnegative modulus gap, so it cannot be
contoured by sign changes.  Locally, though, it is the zero level set of the
signed harmonic function ``f = log|zeta_b| - log|zeta_a|`` of the two tied
roots, continued analytically.  Marching therefore follows ``f = 0`` with a
tangent predictor and a Newton corrector along the normal, and checks at
every accepted sample that the pair still occupies positions ``q+k`` and
``q+k+1`` of the modulus ordering.  Where that check fails the arc has run
into an exceptional point (a junction), which is located by bisection.

Seeds come from

* small circles around branch points lying on the curve, and around any
  exceptional points found while marching;
* the circle ``|lambda| = R_max`` when ``k != 0`` (unbounded arcs);
* nested Cartesian grids, refined by golden-section minimisation of the gap
  along grid lines, for components not reachable from the above.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import AmbiguousMatching, RefinementFailure, SeedingFailure, ValidationError
from . import _aberth
from .roots import check_index, solve_batch
from .symbol import LaurentSymbol, branch_scale, distinct_branch_points, evaluate_derivative

ON_CURVE_TOL = 1e-8
_GOLD = (math.sqrt(5.0) - 1.0) / 2.0


@dataclass(frozen=True)
class Endpoint:
    """Arc end marker.

    ``kind`` is one of ``"branch"`` (a branch point of the symbol),
    ``"exceptional"`` (a junction that is not a branch point),
    ``"truncation"`` (the arc leaves the disk of radius ``R_max``),
    ``"loop"`` (closed arc) or ``"junction"`` (the arc ran into another arc).
    """

    kind: str
    location: complex


@dataclass(frozen=True, eq=False)
class CurveArc:
    """Oriented polyline on ``Gamma_k`` with unit tangents per sample."""

    k: int
    points: np.ndarray
    tangents: np.ndarray
    start: Endpoint
    end: Endpoint

    @property
    def endpoints(self) -> tuple:
        return (self.start, self.end)

    @property
    def closed(self) -> bool:
        return self.start.kind == "loop"

    def arclength(self) -> np.ndarray:
        """Cumulative arclength at every sample, starting at 0."""
        return np.concatenate([[0.0], np.cumsum(np.abs(np.diff(self.points)))])

    @property
    def length(self) -> float:
        return float(np.sum(np.abs(np.diff(self.points))))

    def reversed(self) -> "CurveArc":
        return CurveArc(self.k, self.points[::-1].copy(), -self.tangents[::-1].copy(),
                        self.end, self.start)

    def at_arclength(self, s) -> np.ndarray:
        """Linear interpolation of the polyline at arclength ``s``."""
        cum = self.arclength()
        s = np.clip(np.asarray(s, float), 0.0, cum[-1])
        re = np.interp(s, cum, self.points.real)
        im = np.interp(s, cum, self.points.imag)
        return re + 1j * im


@dataclass(frozen=True, eq=False)
class CurveFamily:
    """All traced arcs of ``Gamma_k`` inside the disk of radius ``R_max``.

    ``special_points`` lists ``(lambda, kind)`` pairs with kind ``"branch"``
    or ``"exceptional"``.
    """

    k: int
    arcs: tuple
    special_points: tuple
    truncation_radius: float
    grid_step: float
    symbol: LaurentSymbol = field(repr=False, default=None)

    def points(self) -> np.ndarray:
        if not self.arcs:
            return np.zeros(0, complex)
        return np.concatenate([arc.points for arc in self.arcs])

    def distance(self, z) -> np.ndarray:
        """Distance from each ``z`` to the union of the polylines."""
        z = np.atleast_1d(np.asarray(z, complex))
        a, b = _segments(self.arcs)
        return _polyline_distance(z, a, b)


def _segments(arcs) -> tuple[np.ndarray, np.ndarray]:
    if not arcs:
        return np.zeros(0, complex), np.zeros(0, complex)
    a = np.concatenate([arc.points[:-1] for arc in arcs])
    b = np.concatenate([arc.points[1:] for arc in arcs])
    return a, b


def _polyline_distance(z: np.ndarray, a: np.ndarray, b: np.ndarray,
                       chunk: int = 4096) -> np.ndarray:
    if a.size == 0:
        return np.full(z.shape, np.inf)
    out = np.empty(z.shape, float)
    ab = b - a
    ab2 = np.abs(ab) ** 2
    safe = np.where(ab2 > 0, ab2, 1.0)
    for s in range(0, z.size, chunk):
        zz = z[s:s + chunk, None]
        t = np.clip(((zz - a) * ab.conj()).real / safe, 0.0, 1.0)
        out[s:s + chunk] = np.min(np.abs(zz - a - t * ab), axis=1)
    return out


def _unit(v: complex) -> complex:
    return v / abs(v)


class _Tracer:
    """Mutable state of one tracing run; produces a :class:`CurveFamily`."""

    def __init__(self, a: LaurentSymbol, k: int, r_max: float, grid_step: float,
                 tol: float, max_steps: int = 200_000):
        self.a = a
        self.k = k
        self.d = a.degree
        self.lo = a.q + k - 1          # 0-based sorted positions of the pair
        self.r_max = float(r_max)
        self.grid_step = float(grid_step)
        self.tol = tol
        self.scale = branch_scale(a)
        self.h_min = 1e-13 * self.scale
        self.max_steps = max_steps
        lead = a.coeff(a.p)
        self.base = a.poly_coeffs(0.0) / lead
        self.lead = lead
        self.dbase = self.base[1:] * np.arange(1, self.d + 1)
        self.branch = [b for b, _ in distinct_branch_points(a)]
        self.special: list[list] = []     # [location, kind, radius, explored]
        self.arcs: list[CurveArc] = []
        self._seg_cache = None

    # ------------------------------------------------------------------ roots
    def _coeffs(self, lam: complex) -> np.ndarray:
        c = self.base.copy()
        c[self.a.q] -= lam / self.lead
        return c

    def _track(self, z: np.ndarray, lam: complex) -> np.ndarray:
        """Roots at ``lam`` continued from ``z`` (same labelling)."""
        c = self._coeffs(lam)[::-1]
        dc = self.dbase[::-1]
        zz = z.copy()
        for _ in range(10):
            step = np.polyval(c, zz) / np.polyval(dc, zz)
            zz = zz - step
            if np.all(np.abs(step) <= 1e-15 * np.abs(zz) + 1e-300):
                break
        else:
            zz = None
        if zz is not None and np.all(np.isfinite(zz)):
            diff = np.abs(zz[:, None] - zz[None, :])
            np.fill_diagonal(diff, np.inf)
            mag = np.maximum(np.abs(zz)[:, None], np.abs(zz)[None, :])
            if np.all(diff > 1e-9 * mag):
                return zz
        return solve_batch(self.a, np.array([lam]), init=z[None, :], sort=False)[0]

    def _pair(self, z: np.ndarray, ia: int, ib: int):
        za, zb = z[ia], z[ib]
        f = math.log(abs(zb)) - math.log(abs(za))
        da = evaluate_derivative(self.a, za)
        db = evaluate_derivative(self.a, zb)
        fp = 1.0 / (db * zb) - 1.0 / (da * za)
        return f, complex(fp)

    def _member(self, z: np.ndarray, ia: int, ib: int) -> bool:
        lm = np.log(np.abs(z))
        if abs(lm[ia] - lm[ib]) > ON_CURVE_TOL:
            return False
        m = 0.5 * (lm[ia] + lm[ib])
        others = np.delete(lm, [ia, ib])
        n_lt = int(np.sum(others < m - 1e-9))
        n_gt = int(np.sum(others > m + 1e-9))
        return n_lt <= self.lo and n_gt <= self.d - self.lo - 2

    def _correct(self, lam: complex, z: np.ndarray, ia: int, ib: int, maxit: int = 14):
        """Newton along the normal onto ``f = 0``; ``None`` on failure."""
        floor = 1e-13 * max(abs(lam), 1e-3 * self.scale)
        f = fp = None
        for _ in range(maxit):
            z = self._track(z, lam)
            f, fp = self._pair(z, ia, ib)
            if not (np.isfinite(fp) and fp != 0):
                return None
            delta = -f * fp.conjugate() / abs(fp) ** 2
            lam = lam + delta
            if abs(delta) <= floor or abs(f) < 1e-15:
                z = self._track(z, lam)
                f, fp = self._pair(z, ia, ib)
                return lam, z, fp
        if f is not None and abs(f) < 1e-10:
            return lam, z, fp
        return None

    def _onto_circle(self, lam: complex, z: np.ndarray, ia: int, ib: int, radius: float):
        """Slide along ``|lambda| = radius`` until ``f = 0``."""
        th = cmath_phase(lam)
        for _ in range(30):
            lam = radius * complex(math.cos(th), math.sin(th))
            z = self._track(z, lam)
            f, fp = self._pair(z, ia, ib)
            dfd = (fp * 1j * lam).real
            if dfd == 0:
                break
            dth = -f / dfd
            th += dth
            if abs(dth) < 1e-15:
                break
        lam = radius * complex(math.cos(th), math.sin(th))
        z = self._track(z, lam)
        f, fp = self._pair(z, ia, ib)
        return lam, z, fp

    # ------------------------------------------------------------- geometry
    def _segs(self):
        if self._seg_cache is None:
            self._seg_cache = _segments(self.arcs)
        return self._seg_cache

    def _dist_to_arcs(self, lam) -> np.ndarray:
        a, b = self._segs()
        return _polyline_distance(np.atleast_1d(np.asarray(lam, complex)), a, b)

    def _add_arc(self, arc: CurveArc):
        self.arcs.append(arc)
        self._seg_cache = None

    def _h_max(self, lam: complex) -> float:
        return min(self.grid_step, 0.05 * max(abs(lam), self.scale))

    def _special_radius(self, c: complex) -> float:
        others = [abs(c - s[0]) for s in self.special if s[0] != c]
        others += [abs(c - b) for b in self.branch if b != c]
        r = 1e-3 * self.scale
        if others:
            r = min(r, 0.25 * min(others))
        return max(r, 1e-10 * self.scale)

    def _add_special(self, lam: complex, kind: str) -> tuple[complex, str]:
        tol = 1e-7 * max(self.scale, abs(lam))
        for s in self.special:
            if abs(s[0] - lam) <= tol:
                return s[0], s[1]
        for b in self.branch:
            if abs(b - lam) <= 1e-6 * self.scale:
                lam, kind = b, "branch"
                for s in self.special:
                    if s[0] == b:
                        return s[0], s[1]
                break
        self.special.append([lam, kind, self._special_radius(lam), False])
        return lam, kind

    # ------------------------------------------------------------- scanning
    def _gap(self, lam: np.ndarray) -> np.ndarray:
        z = solve_batch(self.a, lam, sort=False)
        lm = np.sort(np.log(np.abs(z)), axis=-1)
        return lm[..., self.lo + 1] - lm[..., self.lo]

    def _golden(self, p0: np.ndarray, p1: np.ndarray, iters: int = 64):
        """Minimise the gap on each segment ``[p0, p1]`` (batched)."""
        lo = np.zeros(p0.shape)
        hi = np.ones(p0.shape)
        x1 = hi - _GOLD * (hi - lo)
        x2 = lo + _GOLD * (hi - lo)
        path = lambda t: p0 + t * (p1 - p0)
        f1 = self._gap(path(x1))
        f2 = self._gap(path(x2))
        for _ in range(iters):
            left = f1 < f2
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            nx1 = np.where(left, hi - _GOLD * (hi - lo), x2)
            nx2 = np.where(left, x1, lo + _GOLD * (hi - lo))
            nf1 = np.where(left, 0.0, f2)
            nf2 = np.where(left, f1, 0.0)
            new = np.where(left, nx1, nx2)
            fn = self._gap(path(new))
            f1 = np.where(left, fn, nf1)
            f2 = np.where(left, nf2, fn)
            x1, x2 = nx1, nx2
        t = np.where(f1 < f2, x1, x2)
        return path(t), np.minimum(f1, f2)

    def _circle_seeds(self, c: complex, r: float, m: int = 720) -> list[complex]:
        th = 2 * np.pi * np.arange(m) / m
        lam = c + r * np.exp(1j * th)
        g = self._gap(lam)
        gl, gr = np.roll(g, 1), np.roll(g, -1)
        cand = np.flatnonzero((g <= gl) & (g <= gr) & (g <= np.maximum(gl, gr) - g + 1e-12))
        if cand.size == 0:
            return []
        dth = 2 * np.pi / m
        # golden section on the chord is close enough; the corrector finishes
        t0 = th[cand] - dth
        t1 = th[cand] + dth
        best, gmin = self._golden_arc(c, r, t0, t1)
        # a true crossing drives the gap to zero relative to the bracket
        ref = np.maximum(gl[cand], gr[cand])
        out = []
        for lam_s, gv, gref in zip(best, gmin, ref):
            if gv <= 1e-6 * gref and all(abs(lam_s - o) > 1e-6 * r for o in out):
                out.append(complex(lam_s))
        return out

    def _golden_arc(self, c, r, t0, t1, iters: int = 64):
        lo, hi = t0.astype(float), t1.astype(float)
        pt = lambda t: c + r * np.exp(1j * t)
        x1 = hi - _GOLD * (hi - lo)
        x2 = lo + _GOLD * (hi - lo)
        f1 = self._gap(pt(x1))
        f2 = self._gap(pt(x2))
        for _ in range(iters):
            left = f1 < f2
            hi = np.where(left, x2, hi)
            lo = np.where(left, lo, x1)
            nx1 = np.where(left, hi - _GOLD * (hi - lo), x2)
            nx2 = np.where(left, x1, lo + _GOLD * (hi - lo))
            new = np.where(left, nx1, nx2)
            fn = self._gap(pt(new))
            f1, f2 = np.where(left, fn, f2), np.where(left, f1, fn)
            x1, x2 = nx1, nx2
        t = np.where(f1 < f2, x1, x2)
        return pt(t), np.minimum(f1, f2)

    # ------------------------------------------------------------- marching
    def _start(self, lam: complex):
        """Roots and pair labels at a seed on (or very near) the curve."""
        z = solve_batch(self.a, np.array([lam]))[0]
        return z, self.lo, self.lo + 1

    def _march(self, lam: complex, z: np.ndarray, ia: int, ib: int, tau: complex,
               h: float, origin: complex | None):
        """Follow the curve from ``lam`` in direction ``tau``.

        Returns ``(points, tangents, end_marker)``; ``points[0] == lam``.
        ``origin`` is the point the arc started from (never captured while
        moving away from it).
        """
        pts = [lam]
        tans = [tau]
        length = 0.0
        for _ in range(self.max_steps):
            h = min(h, self._h_max(lam))
            # special points ahead capture the arc; nearby ones limit the step
            hit = None
            for s in self.special:
                dv = s[0] - lam
                dist = abs(dv)
                if dist == 0:
                    continue
                ahead = (dv * tau.conjugate()).real > 0.9 * dist
                if ahead:
                    h = min(h, max(0.5 * dist, self.h_min))
                    if dist <= 2.0 * s[2] and (origin is None or s[0] != origin or length > 8 * s[2]):
                        hit = s
                        break
            if hit is not None:
                pts.append(hit[0])
                tans.append(_unit(hit[0] - lam))
                return pts, tans, Endpoint(hit[1], hit[0])
            if h < self.h_min:
                raise RefinementFailure(f"step size underflow near lambda={lam}")
            lp = lam + h * tau
            trunc = abs(lp) > self.r_max
            if trunc:
                # step exactly to the truncation circle
                b = (lam * tau.conjugate()).real
                cc = abs(lam) ** 2 - self.r_max ** 2
                t = -b + math.sqrt(max(b * b - cc, 0.0))
                lp = lam + max(t, 0.0) * tau
            dz = 1.0 / evaluate_derivative(self.a, z)
            res = self._correct(lp, z + (lp - lam) * dz, ia, ib)
            if res is None:
                h *= 0.5
                continue
            ln, zn, fp = res
            tn = 1j * fp.conjugate() / abs(fp)
            if (tn * tau.conjugate()).real < 0:
                tn = -tn
            step = abs(ln - lam)
            turn = abs(cmath_phase(tn * tau.conjugate()))
            if step == 0 or abs(ln - lp) > 0.25 * max(h, 1e-300) or turn > 0.3:
                h *= 0.5
                continue
            if not self._member(zn, ia, ib):
                lam_e, tau_e = self._bisect(lam, z, tau, abs(lp - lam), ia, ib)
                if abs(lam_e - lam) > 0:
                    pts.append(lam_e)
                    tans.append(tau_e)
                loc, kind = self._add_special(lam_e, "exceptional")
                if loc != lam_e:
                    pts[-1] = loc
                return pts, tans, Endpoint(kind, loc)
            if trunc:
                ln, zn, fp = self._onto_circle(ln, zn, ia, ib, self.r_max)
                tn = 1j * fp.conjugate() / abs(fp)
                if (tn * tau.conjugate()).real < 0:
                    tn = -tn
                pts.append(ln)
                tans.append(tn)
                return pts, tans, Endpoint("truncation", ln)
            # closed loop back to the seed
            if origin is None and length > 4 * h and abs(ln - pts[0]) < 1.2 * h:
                pts.append(pts[0])
                tans.append(tans[0])
                return pts, tans, Endpoint("loop", pts[0])
            # running onto an already traced arc
            if self.arcs and length > 2 * h:
                dist = self._dist_to_arcs(ln)[0]
                if dist < 1e-6 * max(abs(ln), self.scale) and all(
                        abs(ln - s[0]) > 4 * h for s in self.special):
                    pts.append(ln)
                    tans.append(tn)
                    return pts, tans, Endpoint("junction", ln)
            pts.append(ln)
            tans.append(tn)
            length += step
            lam, z, tau = ln, zn, tn
            if turn < 0.05:
                h *= 1.5
        raise RefinementFailure("maximum number of marching steps exceeded")

    def _bisect(self, lam, z, tau, h, ia, ib):
        """Last member point between ``lam`` and ``lam + h tau``."""
        lo, hi = 0.0, h
        best = (lam, tau)
        floor = 1e-13 * max(abs(lam), 1e-3 * self.scale)
        dz = 1.0 / evaluate_derivative(self.a, z)
        while hi - lo > floor:
            mid = 0.5 * (lo + hi)
            res = self._correct(lam + mid * tau, z + mid * tau * dz, ia, ib)
            if res is None:
                hi = mid
                continue
            lm, zm, fp = res
            if self._member(zm, ia, ib):
                lo = mid
                tn = 1j * fp.conjugate() / abs(fp)
                if (tn * tau.conjugate()).real < 0:
                    tn = -tn
                best = (lm, tn)
            else:
                hi = mid
        return best

    def _seed_tangent(self, lam, z, ia, ib, away_from: complex | None, inward: bool = False):
        res = self._correct(lam, z, ia, ib)
        if res is None:
            return None
        lam, z, fp = res
        if not self._member(z, ia, ib):
            return None
        tau = 1j * fp.conjugate() / abs(fp)
        if away_from is not None and ((lam - away_from) * tau.conjugate()).real < 0:
            tau = -tau
        if inward and (lam * tau.conjugate()).real > 0:
            tau = -tau
        return lam, z, tau

    # ----------------------------------------------------------- top level
    def explore_special(self):
        while True:
            todo = [s for s in self.special if not s[3]]
            if not todo:
                return
            for s in todo:
                s[3] = True
                c, kind, r = s[0], s[1], s[2]
                for seed in self._circle_seeds(c, r):
                    if self._dist_to_arcs(seed)[0] < 0.05 * r:
                        continue
                    z, ia, ib = self._start(seed)
                    st = self._seed_tangent(seed, z, ia, ib, away_from=c)
                    if st is None:
                        continue
                    lam, z, tau = st
                    if self._dist_to_arcs(lam)[0] < 0.05 * r:
                        continue
                    pts, tans, end = self._march(lam, z, ia, ib, tau, r, origin=c)
                    tau0 = _unit(pts[0] - c)
                    self._add_arc(CurveArc(self.k, np.array([c] + pts), np.array([tau0] + tans),
                                           Endpoint(kind, c), end))

    def seed_branch_points(self):
        # the gap at a multiple root is only accurate to eps^(1/m), so decide
        # membership by scanning a small circle instead
        for b in self.branch:
            if abs(b) >= self.r_max:
                continue
            if self._circle_seeds(b, self._special_radius(b)):
                self._add_special(b, "branch")

    def seed_infinity(self, m: int = 4096):
        r = self.r_max
        for seed in self._circle_seeds(0j, r, m):
            if self._dist_to_arcs(seed)[0] < 1e-6 * r:
                continue
            z, ia, ib = self._start(seed)
            lam, z, fp = self._onto_circle(seed, z, ia, ib, r)
            if not self._member(z, ia, ib) or self._dist_to_arcs(lam)[0] < 1e-6 * r:
                continue
            tau = 1j * fp.conjugate() / abs(fp)
            if (lam * tau.conjugate()).real > 0:
                tau = -tau
            pts, tans, end = self._march(lam, z, ia, ib, tau, self._h_max(lam), origin=None)
            self._add_arc(CurveArc(self.k, np.array(pts), np.array(tans),
                                   Endpoint("truncation", lam), end))
            self.explore_special()

    def _grid_levels(self, n_inner: int = 161):
        """Nested square grids: fine near the origin, ``grid_step`` outside."""
        levels = []
        w = 2.0 * self.scale
        while True:
            w_eff = min(w, self.r_max)
            levels.append((w_eff, 2 * w_eff / (n_inner - 1)))
            if w >= self.r_max:
                break
            w *= 4.0
        top_n = int(min(2 * self.r_max / self.grid_step, 800)) + 1
        levels.append((self.r_max, 2 * self.r_max / (top_n - 1)))
        return levels

    def seed_grid(self):
        for w, hstep in self._grid_levels():
            n = int(round(2 * w / hstep)) + 1
            xs = np.linspace(-w, w, n)
            lam = xs[None, :] + 1j * xs[:, None]
            g = self._gap(lam)
            cand = []
            for axis in (0, 1):
                gm = np.roll(g, 1, axis)
                gp = np.roll(g, -1, axis)
                ok = (g <= gm) & (g <= gp) & (g <= np.maximum(gm, gp) - g)
                if axis == 0:
                    ok[0, :] = ok[-1, :] = False
                else:
                    ok[:, 0] = ok[:, -1] = False
                ii, jj = np.nonzero(ok)
                inside = np.abs(lam[ii, jj]) < self.r_max
                ii, jj = ii[inside], jj[inside]
                if axis == 0:
                    p0, p1 = lam[ii - 1, jj], lam[ii + 1, jj]
                else:
                    p0, p1 = lam[ii, jj - 1], lam[ii, jj + 1]
                if axis == 0:
                    gref = np.maximum(g[ii - 1, jj], g[ii + 1, jj])
                else:
                    gref = np.maximum(g[ii, jj - 1], g[ii, jj + 1])
                cand.append((lam[ii, jj], p0, p1, gref))
            pts = np.concatenate([c[0] for c in cand])
            if pts.size == 0:
                continue
            p0 = np.concatenate([c[1] for c in cand])
            p1 = np.concatenate([c[2] for c in cand])
            gref = np.concatenate([c[3] for c in cand])
            keep = self._dist_to_arcs(pts) > 1.5 * hstep
            if not keep.any():
                continue
            best, gmin = self._golden(p0[keep], p1[keep])
            rel = gmin / np.maximum(gref[keep], 1e-300)
            order = np.argsort(rel)
            for i in order:
                if rel[i] > 1e-6:
                    break
                seed = complex(best[i])
                if self._dist_to_arcs(seed)[0] <= 1.5 * hstep:
                    continue
                self._trace_from_interior(seed)
                self.explore_special()

    def _trace_from_interior(self, seed: complex):
        z, ia, ib = self._start(seed)
        st = self._seed_tangent(seed, z, ia, ib, away_from=None)
        if st is None:
            return
        lam, z, tau = st
        h = self._h_max(lam)
        pts_f, tans_f, end_f = self._march(lam, z, ia, ib, tau, h, origin=None)
        if end_f.kind == "loop":
            self._add_arc(CurveArc(self.k, np.array(pts_f), np.array(tans_f),
                                   Endpoint("loop", lam), end_f))
            return
        pts_b, tans_b, end_b = self._march(lam, z, ia, ib, -tau, h, origin=lam)
        pts = list(reversed(pts_b)) + pts_f[1:]
        tans = [-t for t in reversed(tans_b)] + tans_f[1:]
        self._add_arc(CurveArc(self.k, np.array(pts), np.array(tans), end_b, end_f))

    def split_at_special(self):
        """Split arcs passing through special points found later."""
        out = []
        for arc in self.arcs:
            pieces = [arc]
            for s in self.special:
                new = []
                for piece in pieces:
                    new.extend(_split_arc(piece, s[0], s[1], 1e-8 * max(self.scale, abs(s[0]))))
                pieces = new
            out.extend(pieces)
        self.arcs = out
        self._seg_cache = None


def cmath_phase(z: complex) -> float:
    return math.atan2(z.imag, z.real)


def _split_arc(arc: CurveArc, c: complex, kind: str, tol: float) -> list[CurveArc]:
    pts = arc.points
    if pts.size < 3 or arc.closed:
        return [arc]
    d = np.abs(pts - c)
    idx = int(np.argmin(d[1:-1])) + 1
    if d[idx] > tol or abs(pts[0] - c) <= tol or abs(pts[-1] - c) <= tol:
        return [arc]
    mark = Endpoint(kind, c)
    p = pts.copy()
    p[idx] = c
    first = CurveArc(arc.k, p[: idx + 1], arc.tangents[: idx + 1], arc.start, mark)
    second = CurveArc(arc.k, p[idx:], arc.tangents[idx:], mark, arc.end)
    return [first, second]


def default_grid_step(r_max: float) -> float:
    """Window diameter over 400."""
    return 2.0 * r_max / 400.0


@lru_cache(maxsize=64)
def trace_curve(a: LaurentSymbol, k: int, r_max: float = 1e3, grid_step: float | None = None,
                tol: float = ON_CURVE_TOL, grid: bool = True) -> CurveFamily:
    """Trace ``Gamma_k`` inside the disk of radius ``r_max``.

    Parameters
    ----------
    a : LaurentSymbol
    k : int
        Curve index in ``[-q+1, p-1]``.
    r_max : float
        Truncation radius; must exceed twice the largest branch-point modulus.
    grid_step : float, optional
        Largest marching step and the spacing of the outermost seed grid;
        default ``2 r_max / 400``.
    grid : bool
        Run the grid scan for components not reachable from branch points
        or infinity.

    Raises
    ------
    SeedingFailure
        If no point of the curve is found.
    RefinementFailure
        If marching stalls.
    """
    check_index(a, k)
    scale_pts = [abs(b) for b, _ in distinct_branch_points(a)]
    if r_max <= 2 * max(scale_pts + [0.0]):
        raise ValidationError("r_max must exceed twice the largest branch-point modulus")
    step = default_grid_step(r_max) if grid_step is None else float(grid_step)
    if step <= 0:
        raise ValidationError("grid_step must be positive")
    tr = _Tracer(a, k, r_max, step, tol)
    tr.seed_branch_points()
    tr.explore_special()
    if k != 0:
        tr.seed_infinity()
    if grid:
        tr.seed_grid()
    tr.split_at_special()
    if not tr.arcs:
        raise SeedingFailure(f"no points of the curve with index {k} were found")
    arcs = tuple(sorted(tr.arcs, key=_arc_key))
    special = tuple(sorted(((s[0], s[1]) for s in tr.special),
                           key=lambda s: (round(s[0].real, 9), round(s[0].imag, 9))))
    return CurveFamily(k, arcs, special, float(r_max), step, a)


def _arc_key(arc: CurveArc):
    p = arc.points[len(arc.points) // 2]
    return (round(p.real, 9), round(p.imag, 9))


trace_curves = trace_curve


def continuation_permutation(a: LaurentSymbol, arc: CurveArc, index: int,
                             eps: float | None = None) -> tuple:
    """How the ordered roots continue across the arc at ``arc.points[index]``.

    Returns ``pi`` (1-based) with ``z_j`` on the left side (``lambda + i eps
    tau``) continuing to ``z_{pi[j-1]}`` on the right side.

    Raises :class:`AmbiguousMatching` if nearest-neighbour pairing is not a
    clear bijection.
    """
    lam = complex(arc.points[index])
    tau = complex(arc.tangents[index])
    if eps is None:
        eps = 1e-8 * max(abs(lam), branch_scale(a))
    z = solve_batch(a, np.array([lam + 1j * eps * tau, lam - 1j * eps * tau]))
    zp, zm = z[0], z[1]
    dist = np.abs(zp[:, None] - zm[None, :])
    perm = np.argmin(dist, axis=1)
    if len(set(perm.tolist())) != len(perm):
        raise AmbiguousMatching(f"matching at lambda={lam} is not a bijection")
    srt = np.sort(dist, axis=1)
    if np.any(srt[:, 0] > 0.3 * srt[:, 1]):
        raise AmbiguousMatching(f"nearest neighbours are not well separated at lambda={lam}")
    return tuple(int(j) + 1 for j in perm)


def project_to_curve(a: LaurentSymbol, k: int, lam, max_move=None,
                     iters: int = 10) -> np.ndarray:
    """Newton projection of points near ``Gamma_k`` onto the curve.

    Each point moves along the gradient of the signed gap of the pair in
    sorted positions ``q+k, q+k+1``.  Points where the iteration does not
    settle, or would move farther than ``max_move`` (scalar or per point),
    are returned unchanged.
    """
    check_index(a, k)
    lam0 = np.atleast_1d(np.asarray(lam, complex)).ravel()
    if lam0.size == 0:
        return lam0.copy()
    lo = a.q + k - 1
    z = solve_batch(a, lam0)
    cur = lam0.copy()
    lead = a.coeff(a.p)
    scale = branch_scale(a)
    done = np.zeros(cur.shape, bool)
    with np.errstate(all="ignore"):
        for _ in range(iters):
            za, zb = z[:, lo], z[:, lo + 1]
            f = np.log(np.abs(zb)) - np.log(np.abs(za))
            fp = 1.0 / (evaluate_derivative(a, zb) * zb) - 1.0 / (evaluate_derivative(a, za) * za)
            delta = -f * fp.conj() / np.abs(fp) ** 2
            delta = np.where(np.isfinite(delta) & ~done, delta, 0)
            cur = cur + delta
            done |= np.abs(delta) <= 1e-14 * np.maximum(np.abs(cur), scale)
            z = _aberth.aberth_batch(a.poly_coeffs(cur) / lead, z)
            if done.all():
                break
        za, zb = z[:, lo], z[:, lo + 1]
        f = np.abs(np.log(np.abs(zb)) - np.log(np.abs(za)))
    ok = np.isfinite(cur) & (f < 1e-10)
    if max_move is not None:
        ok &= np.abs(cur - lam0) <= np.asarray(max_move, float).ravel()
    return np.where(ok, cur, lam0)


def reverse_family(family: CurveFamily) -> CurveFamily:
    """Same family with every arc orientation flipped."""
    return replace(family, arcs=tuple(arc.reversed() for arc in family.arcs))
