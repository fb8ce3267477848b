"""The measures ``mu_k`` on ``Gamma_k`` and their potentials.

On each arc of ``Gamma_k`` the measure has complex line element

    d mu_k = (F_+(lambda) - F_-(lambda)) d lambda / (2 pi i),

where ``F = w_k'/w_k = sum_{j <= q+k} z_j'/z_j`` and ``F_+`` (``F_-``) is the
boundary value from the left (right) of the oriented arc.  The boundary
values are taken at ``lambda +- i eps tau`` and one Richardson step removes
the first-order offset error.  Flipping the orientation flips both the jump
and ``d lambda``, so the result does not depend on it.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .curves import CurveArc, CurveFamily, project_to_curve
from .errors import (IndexOutOfRange, MassMismatch, NearSingularity, NegativeDensity,
                     SupportCollision)
from .roots import check_index, logderiv_from_roots, solve_batch
from .symbol import LaurentSymbol, branch_scale, distinct_branch_points

DENSITY_TOL = 1e-9
EPS_REL = 1e-6          # boundary offset relative to the local scale
EXCLUSION_REL = 1e-6    # branch-point exclusion radius relative to the branch scale
MASS_TOL = 1e-3
_SINGULAR_ENDS = ("branch", "exceptional", "junction")


@dataclass(frozen=True)
class DensitySample:
    """Density of ``mu_k`` at one point of an arc.

    ``complex_density`` is the jump of ``w_k'/w_k`` times ``tau / (2 pi i)``;
    its real part is the density with respect to arclength.
    """

    lam: complex
    tangent: complex
    complex_density: complex
    real_density: float


@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    """Weighted point masses.

    Attributes
    ----------
    points, weights : ndarray
    cell_start, cell_end : ndarray or None
        Quadrature cells (straight segments) carrying each weight.  When
        present, potentials near the support integrate the cell exactly
        instead of using the point mass.
    densities : ndarray or None
        Arclength densities at the points (quadrature measures only).
    arc_ids : ndarray or None
        Index of the arc each point belongs to (``-1`` for tail nodes past
        the truncation radius are labelled with their arc as well).
    k : int or None
    """

    points: np.ndarray
    weights: np.ndarray
    cell_start: np.ndarray | None = None
    cell_end: np.ndarray | None = None
    densities: np.ndarray | None = None
    arc_ids: np.ndarray | None = None
    k: int | None = None

    def __post_init__(self):
        pts = np.atleast_1d(np.asarray(self.points, complex))
        w = np.atleast_1d(np.asarray(self.weights, float))
        if pts.shape != w.shape:
            raise ValueError("points and weights differ in length")
        if np.any(w < 0):
            raise ValueError("weights must be nonnegative")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", w)

    @property
    def total_mass(self) -> float:
        return float(np.sum(self.weights))

    @property
    def has_cells(self) -> bool:
        return self.cell_start is not None

    def __len__(self) -> int:
        return self.points.size

    @classmethod
    def empty(cls, k: int | None = None) -> "DiscreteMeasure":
        return cls(np.zeros(0, complex), np.zeros(0), k=k)

    def with_weights(self, weights) -> "DiscreteMeasure":
        """Same points and cells with new weights."""
        return DiscreteMeasure(self.points, np.asarray(weights, float), self.cell_start,
                               self.cell_end, None, self.arc_ids, self.k)


# ----------------------------------------------------------------- density
def _local_scale(a: LaurentSymbol, lam: np.ndarray, special=()) -> np.ndarray:
    """Distance to the nearest branch or special point, capped by ``max(|lam|, scale)``."""
    scale = branch_scale(a)
    marks = [b for b, _ in distinct_branch_points(a)] + [complex(s) for s in special]
    cap = np.maximum(np.abs(lam), scale)
    if not marks:
        return cap
    d = np.min(np.abs(lam[:, None] - np.array(marks)[None, :]), axis=1)
    return np.minimum(d, cap)


def _branch_distance(a: LaurentSymbol, lam: np.ndarray) -> np.ndarray:
    b = np.array([b for b, _ in distinct_branch_points(a)])
    return np.min(np.abs(lam[:, None] - b[None, :]), axis=1)


def _jump_once(a: LaurentSymbol, k: int, lam: np.ndarray, tau: np.ndarray,
               eps: np.ndarray):
    off = 1j * eps * tau
    pts = np.concatenate([lam + off, lam - off, lam + 0.5 * off, lam - 0.5 * off])
    # plain modulus order: near branch points the offset separates the tied
    # pair by less than the tie tolerance
    z = solve_batch(a, pts, sort=False)
    z = np.take_along_axis(z, np.argsort(np.abs(z), axis=1), axis=1)
    f = logderiv_from_roots(a, k, z)
    n = lam.size
    j1 = f[:n] - f[n:2 * n]
    j2 = f[2 * n:3 * n] - f[3 * n:]
    fmag = np.max(np.abs(f.reshape(4, n)), axis=0)
    return 2.0 * j2 - j1, fmag


def _jump(a: LaurentSymbol, k: int, lam: np.ndarray, tau: np.ndarray,
          eps: np.ndarray, cap: np.ndarray | None = None) -> np.ndarray:
    """Richardson-extrapolated ``(F_+ - F_-) tau / (2 pi i)``.

    With ``cap`` given, offsets too small to separate the tied moduli beyond
    rounding (``eps |jump|`` against ``1e-13 |lambda| |F|``) are enlarged up
    to ``cap`` and the point is recomputed.
    """
    eps = np.array(eps, float)
    j, fmag = _jump_once(a, k, lam, tau, eps)
    if cap is not None:
        size = np.maximum(np.abs(lam), branch_scale(a))
        need = 1e-13 * size * fmag / np.maximum(np.abs(j), 1e-300)
        redo = need > eps
        for _ in range(3):
            if not redo.any():
                break
            eps[redo] = np.minimum(np.maximum(need[redo], 2 * eps[redo]), cap[redo])
            jr, fr = _jump_once(a, k, lam[redo], tau[redo], eps[redo])
            j[redo], fmag[redo] = jr, fr
            need[redo] = 1e-13 * size[redo] * fr / np.maximum(np.abs(jr), 1e-300)
            redo = (need > eps) & (eps < cap)
    return j * tau / (2j * math.pi)


def complex_densities(a: LaurentSymbol, k: int, lam, tangent, eps=None,
                      special=()) -> np.ndarray:
    """Vectorised complex density at points ``lam`` with unit tangents ``tangent``.

    No exclusion or sign checks; see :func:`density_at` for those.
    """
    check_index(a, k)
    lam = np.atleast_1d(np.asarray(lam, complex)).ravel()
    tau = np.broadcast_to(np.asarray(tangent, complex), lam.shape).astype(complex)
    tau = tau / np.abs(tau)
    if eps is None:
        local = _local_scale(a, lam, special)
        return _jump(a, k, lam, tau, EPS_REL * local, cap=0.02 * local)
    eps = np.broadcast_to(np.asarray(eps, float), lam.shape)
    return _jump(a, k, lam, tau, eps)


def density_at(a: LaurentSymbol, k: int, lam: complex, tangent: complex,
               eps: float | None = None, exclusion: float | None = None,
               tol: float = DENSITY_TOL, special=()) -> DensitySample:
    """Density of ``mu_k`` at a point ``lam`` of an arc with unit tangent ``tangent``.

    Parameters
    ----------
    eps : float, optional
        Normal offset for the boundary values.  By default ``1e-6`` times
        the distance to the nearest branch or ``special`` point (capped by
        ``max(|lam|, scale)``), enlarged where that offset would not separate
        the tied moduli beyond rounding.
    exclusion : float, optional
        Radius around branch points where the density is not evaluated;
        default ``1e-6`` times the branch scale.
    tol : float
        Negative real densities below ``-tol * max(1, |density|)`` raise.

    Raises
    ------
    NearSingularity
        Within ``exclusion`` of a branch point.
    NegativeDensity
        Real density clearly negative (wrong side convention or a point off
        the curve).
    """
    check_index(a, k)
    lam = complex(lam)
    if exclusion is None:
        exclusion = EXCLUSION_REL * branch_scale(a)
    if _branch_distance(a, np.array([lam]))[0] <= exclusion:
        raise NearSingularity(f"lambda={lam} is within {exclusion:g} of a branch point")
    tau = complex(tangent) / abs(tangent)
    cd = complex(complex_densities(a, k, lam, tau, eps, special)[0])
    if cd.real < -tol * max(1.0, abs(cd)):
        raise NegativeDensity(f"density {cd.real:.3e} < 0 at lambda={lam}")
    return DensitySample(lam, tau, cd, cd.real)


# ------------------------------------------------------------ quadrature
def _half_mesh(half: float, singular: bool, rho: float, kappa: float, cap) -> list[float]:
    """Cell boundaries from one end (at 0) up to ``half``."""
    b = [0.0]
    if singular:
        b.append(min(rho, 0.5 * half))
    while b[-1] < half:
        s = b[-1]
        h = cap(s)
        if singular:
            h = min(h, kappa * s)
        b.append(s + h)
    b[-1] = half
    if len(b) > 3 and b[-1] - b[-2] < 0.3 * (b[-2] - b[-3]):
        del b[-2]
    return b


def _arc_mesh(arc: CurveArc, rho: float, kappa: float, nu: float, scale: float,
              nodes_per_arc: int) -> tuple[np.ndarray, bool, bool]:
    """Arclength cell boundaries graded toward singular ends."""
    length = arc.length
    sing0 = arc.start.kind in _SINGULAR_ENDS
    sing1 = arc.end.kind in _SINGULAR_ENDS
    hfix = length / max(nodes_per_arc, 1)

    def cap_from(end):
        def cap(s):
            pos = s if end == 0 else length - s
            lam = complex(arc.at_arclength(pos))
            return min(hfix, nu * max(abs(lam), scale))
        return cap

    half = 0.5 * length
    left = _half_mesh(half, sing0, rho, kappa, cap_from(0))
    right = _half_mesh(length - half, sing1, rho, kappa, cap_from(1))
    b = np.array(left + [length - s for s in reversed(right[:-1])])
    return b, sing0, sing1


def _power_cell(s1: float, g1: float, s2: float, g2: float, rho: float) -> tuple[float, float]:
    """Mass on ``[0, rho]`` and its centroid for a density fitted as ``C s^{-sigma}``."""
    if g1 <= 0 or g2 <= 0:
        return max(g1, 0.0) * rho, 0.5 * rho
    sigma = -math.log(g2 / g1) / math.log(s2 / s1)
    sigma = min(max(sigma, -5.0), 0.99)
    mass = g1 * (rho / s1) ** (-sigma) * rho / (1.0 - sigma)
    centroid = rho * (1.0 - sigma) / (2.0 - sigma)
    return mass, centroid


def _tail_exponent(a: LaurentSymbol, k: int) -> float:
    return 1.0 / a.q if k < 0 else 1.0 / a.p


def _tail(r: np.ndarray, dens: np.ndarray, r_end: float, delta: float, theta: float,
          tail_tol: float, ratio: float = 1.25):
    """Nodes and weights past the truncation radius from a fitted decay law.

    The density along the ray is modelled as ``sum_j c_j r^{-1-j delta}``
    over three consecutive ``j`` by least squares on the last decade of
    samples.  The decay can be faster than the generic ``r^{-1-delta}``, so
    the first ``j`` comes from the observed log-log slope.
    """
    sel = (r >= 0.1 * r_end) & (dens > 0)
    r, dens = r[sel], dens[sel]
    if r.size < 2:
        return np.zeros(0, complex), np.zeros(0), np.zeros(0, complex), np.zeros(0, complex)
    slope = np.polyfit(np.log(r), np.log(dens), 1)[0]
    j0 = max(1, int(round((-slope - 1.0) / delta)))
    terms = 3
    while terms >= 1:
        js = list(range(j0, j0 + terms))
        if r.size >= terms + 1:
            cols = np.stack([r ** (-1.0 - j * delta) for j in js], axis=1)
            coef, *_ = np.linalg.lstsq(cols / dens[:, None], np.ones_like(dens), rcond=None)

            def F(x, c=coef, js=js):
                return sum(ci * x ** (-j * delta) / (j * delta) for ci, j in zip(c, js))

            if F(r_end) > 0 and all(F(r_end * ratio ** m) - F(r_end * ratio ** (m + 1)) >= 0
                                    for m in range(200)):
                break
        terms -= 1
    else:
        return np.zeros(0, complex), np.zeros(0), np.zeros(0, complex), np.zeros(0, complex)
    direction = complex(math.cos(theta), math.sin(theta))
    nodes, weights, c0, c1 = [], [], [], []
    lo = r_end
    while True:
        hi = lo * ratio
        rest = F(hi)
        m = F(lo) - rest
        if rest < tail_tol:
            m += max(rest, 0.0)
        nodes.append(math.sqrt(lo * hi) * direction)
        weights.append(max(m, 0.0))
        c0.append(lo * direction)
        c1.append(hi * direction)
        if rest < tail_tol or len(nodes) > 5000:
            break
        lo = hi
    return np.array(nodes), np.array(weights), np.array(c0), np.array(c1)


def _canonical(arc: CurveArc) -> CurveArc:
    """Orient open arcs from the lexicographically smaller end, so that the
    mesh does not depend on the marching direction."""
    if arc.closed:
        return arc
    p0, p1 = arc.points[0], arc.points[-1]
    if (round(p1.real, 9), round(p1.imag, 9)) < (round(p0.real, 9), round(p0.imag, 9)):
        return arc.reversed()
    return arc


def expected_mass(a: LaurentSymbol, k: int) -> float:
    """``(q+k)/q`` for ``k <= 0`` and ``(p-k)/p`` for ``k >= 0``."""
    if not (-a.q <= k <= a.p):
        raise IndexOutOfRange(f"k={k} outside [{-a.q}, {a.p}]")
    return (a.q + k) / a.q if k <= 0 else (a.p - k) / a.p


def discretize_measure(a: LaurentSymbol, k: int, family: CurveFamily,
                       nodes_per_arc: int = 100, *, kappa: float = 0.05, nu: float = 0.01,
                       exclusion: float | None = None, mass_tol: float = MASS_TOL,
                       tail_tol: float = 1e-9, check_mass: bool = True,
                       tol: float = DENSITY_TOL) -> DiscreteMeasure:
    """Quadrature discretisation of ``mu_k`` on a traced family.

    Each arc is cut into cells along arclength.  Cells shrink geometrically
    (ratio ``1 + kappa``) toward branch, exceptional and junction ends, and
    elsewhere are at most ``min(length / nodes_per_arc, nu * max(|lambda|,
    scale))``.  A cell ``[b_0, b_1]`` gets weight ``Re(jump(m) (b_1 - b_0) /
    (2 pi i))`` at its projected midpoint ``m``.  The cell touching a
    singular end (of size ``exclusion``) is integrated from a power law
    fitted to the next two cells.  Arcs cut at the truncation radius get
    tail nodes along the ray from a fitted ``|lambda|^{-1-delta}`` decay.

    Raises
    ------
    MassMismatch
        If ``check_mass`` and the total mass differs from the expected mass
        by more than ``mass_tol``.
    NegativeDensity
        If some node has clearly negative density.
    """
    check_index(a, k)
    if family.k != k:
        raise ValueError(f"family has index {family.k}, not {k}")
    scale = branch_scale(a)
    rho = EXCLUSION_REL * scale if exclusion is None else float(exclusion)
    special = [s for s, _ in family.special_points]
    delta = _tail_exponent(a, k)
    out = {key: [] for key in ("pts", "w", "c0", "c1", "dens", "ids")}

    for arc_id, arc in enumerate(family.arcs):
        if arc.length == 0:
            continue
        arc = _canonical(arc)
        b, sing0, sing1 = _arc_mesh(arc, rho, kappa, nu, scale, nodes_per_arc)
        ds = np.diff(b)
        mids = 0.5 * (b[:-1] + b[1:])
        bl = arc.at_arclength(b)
        bl[0], bl[-1] = arc.points[0], arc.points[-1]
        bl[1:-1] = project_to_curve(a, k, bl[1:-1], max_move=0.25 * np.minimum(ds[:-1], ds[1:]))
        ml = project_to_curve(a, k, arc.at_arclength(mids), max_move=0.25 * ds)
        chord = np.diff(bl)
        tau = chord / np.abs(chord)
        # the analytic end cells are handled separately
        inner = np.ones(mids.size, bool)
        if sing0:
            inner[0] = False
        if sing1:
            inner[-1] = False
        local = _local_scale(a, ml, special)
        cd = np.zeros(mids.size, complex)
        cd[inner] = _jump(a, k, ml[inner], tau[inner], EPS_REL * local[inner],
                          cap=0.02 * local[inner])
        dens = cd.real
        neg = dens < -tol * np.maximum(1.0, np.abs(cd))
        if np.any(neg):
            i = int(np.argmax(neg))
            raise NegativeDensity(f"density {dens[i]:.3e} < 0 at lambda={ml[i]} (index {k})")
        w = np.maximum((cd / tau * chord).real, 0.0)
        for end, on in ((0, sing0), (1, sing1)):
            if not on:
                continue
            i, j1, j2 = (0, 1, 2) if end == 0 else (-1, -2, -3)
            if mids.size < 3:
                continue
            s1 = mids[j1] if end == 0 else b[-1] - mids[j1]
            s2 = mids[j2] if end == 0 else b[-1] - mids[j2]
            mass, cen = _power_cell(s1, dens[j1], s2, dens[j2], ds[i])
            w[i] = mass
            dens[i] = mass / ds[i]
            pos = cen if end == 0 else b[-1] - cen
            ml[i] = complex(arc.at_arclength(pos))
        out["pts"].append(ml)
        out["w"].append(w)
        out["c0"].append(bl[:-1])
        out["c1"].append(bl[1:])
        out["dens"].append(dens)
        out["ids"].append(np.full(ml.size, arc_id))
        for end_marker, idx in ((arc.end, -1), (arc.start, 0)):
            if end_marker.kind != "truncation" or k == 0:
                continue
            r = np.abs(ml)
            sel = inner.copy()
            tp, tw, t0, t1 = _tail(r[sel], dens[sel], abs(arc.points[idx]), delta,
                                   math.atan2(arc.points[idx].imag, arc.points[idx].real),
                                   tail_tol)
            if tp.size:
                out["pts"].append(tp)
                out["w"].append(tw)
                out["c0"].append(t0)
                out["c1"].append(t1)
                out["dens"].append(tw / np.abs(t1 - t0))
                out["ids"].append(np.full(tp.size, arc_id))

    cat = {key: (np.concatenate(v) if v else np.zeros(0)) for key, v in out.items()}
    m = DiscreteMeasure(cat["pts"].astype(complex), cat["w"].astype(float),
                        cat["c0"].astype(complex), cat["c1"].astype(complex),
                        cat["dens"].astype(float), cat["ids"].astype(int), k)
    if check_mass:
        target = expected_mass(a, k)
        if abs(m.total_mass - target) > mass_tol:
            raise MassMismatch(f"mass {m.total_mass:.6f} for index {k}, expected {target:.6f}")
    return m


# ------------------------------------------------------------- potentials
def _segment_log_mean(lam: np.ndarray, b0: np.ndarray, b1: np.ndarray) -> np.ndarray:
    """Mean of ``log|lam - x|`` for ``x`` uniform on the segment ``[b0, b1]``."""
    d = b1 - b0
    u = (lam - b0) / d
    v = u - 1.0
    with np.errstate(divide="ignore", invalid="ignore"):
        tu = np.where(u == 0, 0, u * np.log(np.where(u == 0, 1, u)))
        tv = np.where(v == 0, 0, v * np.log(np.where(v == 0, 1, v)))
    return np.log(np.abs(d)) + (tu - tv).real - 1.0


def _segment_cauchy_mean(lam: np.ndarray, b0: np.ndarray, b1: np.ndarray) -> np.ndarray:
    """Mean of ``1/(x - lam)`` for ``x`` uniform on ``[b0, b1]``."""
    return np.log((b1 - lam) / (b0 - lam)) / (b1 - b0)


def _near_mask(m: DiscreteMeasure, lam: np.ndarray, near: float) -> np.ndarray:
    size = np.abs(m.cell_end - m.cell_start)
    dist = np.minimum(np.abs(lam[:, None] - m.points[None, :]),
                      np.abs(lam[:, None] - 0.5 * (m.cell_start + m.cell_end)[None, :]))
    return dist < near * size[None, :]


def log_potential(m: DiscreteMeasure, lam, near: float = 4.0, chunk: int = 256):
    """``sum_i w_i log|lam - x_i|`` for scalar or array ``lam``.

    Cells within ``near`` cell lengths of ``lam`` are integrated exactly as
    uniform segments.  Raises :class:`SupportCollision` when ``lam`` hits a
    bare point mass (within ``1e-12`` relative).
    """
    lam_arr = np.atleast_1d(np.asarray(lam, complex))
    flat = lam_arr.ravel()
    out = np.zeros(flat.shape)
    if len(m):
        for s in range(0, flat.size, chunk):
            ll = flat[s:s + chunk]
            diff = np.abs(ll[:, None] - m.points[None, :])
            if m.has_cells:
                mask = _near_mask(m, ll, near)
                with np.errstate(divide="ignore"):
                    logs = np.log(np.where(mask, 1.0, diff))
                if mask.any():
                    ii, jj = np.nonzero(mask)
                    logs[ii, jj] = _segment_log_mean(ll[ii], m.cell_start[jj], m.cell_end[jj])
            else:
                if np.any(diff <= 1e-12 * np.maximum(1.0, np.abs(ll))[:, None]):
                    raise SupportCollision("evaluation point coincides with a point mass")
                logs = np.log(diff)
            out[s:s + chunk] = logs @ m.weights
    out = out.reshape(lam_arr.shape)
    return float(out[0]) if np.ndim(lam) == 0 else out


def cauchy_transform(m: DiscreteMeasure, lam, near: float = 4.0, chunk: int = 256):
    """``sum_i w_i / (x_i - lam)`` for scalar or array ``lam``.

    Nearby cells are integrated exactly as uniform segments.  Raises
    :class:`SupportCollision` when ``lam`` lies on the support.
    """
    lam_arr = np.atleast_1d(np.asarray(lam, complex))
    flat = lam_arr.ravel()
    out = np.zeros(flat.shape, complex)
    if len(m):
        for s in range(0, flat.size, chunk):
            ll = flat[s:s + chunk]
            diff = m.points[None, :] - ll[:, None]
            if np.any(np.abs(diff) <= 1e-12 * np.maximum(1.0, np.abs(ll))[:, None]):
                raise SupportCollision("evaluation point coincides with the support")
            vals = 1.0 / diff
            if m.has_cells:
                mask = _near_mask(m, ll, near)
                if mask.any():
                    ii, jj = np.nonzero(mask)
                    vals[ii, jj] = _segment_cauchy_mean(ll[ii], m.cell_start[jj], m.cell_end[jj])
            out[s:s + chunk] = vals @ m.weights
    out = out.reshape(lam_arr.shape)
    return complex(out[0]) if np.ndim(lam) == 0 else out


def alpha_k(a: LaurentSymbol, k: int) -> float:
    """Constant in ``int log|lambda - x| d mu_k(x) = -log|w_k(lambda)| + alpha_k``.

    ``log|a_{-q}| (1 + k/q)`` for ``k <= 0`` and ``log|a_{-q}| - (k/p) log|a_p|``
    for ``k >= 0``, with ``alpha_{-q} = alpha_p = 0`` for the zero measures.
    """
    if not (-a.q <= k <= a.p):
        raise IndexOutOfRange(f"k={k} outside [{-a.q}, {a.p}]")
    if k == -a.q or k == a.p:
        return 0.0
    lm = math.log(abs(a.coeff(-a.q)))
    if k <= 0:
        return lm * (1.0 + k / a.q)
    return lm - (k / a.p) * math.log(abs(a.coeff(a.p)))
