"""Vector energy functional, Euler-Lagrange residuals and minimality tests.

For a vector ``(nu_{-q+1}, ..., nu_{p-1})`` of measures the energy is

    J = sum_k I(nu_k) - sum_k I(nu_k, nu_{k+1}),

with ``I(nu_1, nu_2) = -int int log|x - y| d nu_1(x) d nu_2(y)``.  All three
representations used here (direct, telescoped, interaction matrix) are
evaluated from one Gram matrix of mutual energies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .curves import CurveFamily, project_to_curve, trace_curve
from .errors import AdmissibilityViolation, IndexOutOfRange, NearSingularity, SupportCollision
from .measures import (EXCLUSION_REL, MASS_TOL, DiscreteMeasure, _segment_log_mean, alpha_k,
                       discretize_measure, expected_mass, log_potential)
from .symbol import LaurentSymbol, branch_scale, distinct_branch_points


@dataclass(frozen=True, eq=False)
class MeasureVector:
    """Components ``nu_k`` for ``k = -q+1 .. p-1``; ``nu_{-q}`` and ``nu_p`` are zero."""

    p: int
    q: int
    components: dict = field(default_factory=dict)

    def __post_init__(self):
        want = set(range(-self.q + 1, self.p))
        if set(self.components) != want:
            raise IndexOutOfRange(f"components must be indexed by {sorted(want)}")

    @property
    def indices(self) -> list[int]:
        return list(range(-self.q + 1, self.p))

    def __getitem__(self, k: int) -> DiscreteMeasure:
        if k == -self.q or k == self.p:
            return DiscreteMeasure.empty(k)
        if k not in self.components:
            raise IndexOutOfRange(f"no component {k}")
        return self.components[k]

    def masses(self) -> dict:
        return {k: self.components[k].total_mass for k in self.indices}

    def replace(self, k: int, m: DiscreteMeasure) -> "MeasureVector":
        comps = dict(self.components)
        comps[k] = m
        return MeasureVector(self.p, self.q, comps)


def target_mass(p: int, q: int, k: int) -> float:
    return (q + k) / q if k <= 0 else (p - k) / p


def check_admissible(v: MeasureVector, tol: float = MASS_TOL) -> None:
    """Raise :class:`AdmissibilityViolation` if a component has the wrong mass."""
    for k in v.indices:
        m = v.components[k].total_mass
        t = target_mass(v.p, v.q, k)
        if abs(m - t) > tol:
            raise AdmissibilityViolation(f"component {k} has mass {m:.6g}, expected {t:.6g}")


@dataclass(frozen=True)
class EnergyReport:
    """Energies from the three representations plus Euler-Lagrange data.

    ``el_residuals`` maps ``k`` to a list of ``(lambda, residual)``;
    ``l_constants`` maps ``k`` to ``l_k``.
    """

    J_direct: float
    J_alt: float
    J_matrix: float
    el_residuals: dict = field(default_factory=dict)
    l_constants: dict = field(default_factory=dict)

    @property
    def max_discrepancy(self) -> float:
        return max(abs(self.J_direct - self.J_alt), abs(self.J_direct - self.J_matrix))


# ----------------------------------------------------------------- energies
def _cell_len(m: DiscreteMeasure) -> np.ndarray:
    return np.abs(m.cell_end - m.cell_start)


def _forms(m1: DiscreteMeasure, X: np.ndarray, m2: DiscreteMeasure, Y: np.ndarray,
           same: bool, near: float = 4.0, chunk: int = 512) -> np.ndarray:
    """``X^T L Y`` for weight matrices ``X`` (N1, r1) and ``Y`` (N2, r2).

    ``L`` is the log-distance kernel between the nodes.  Pairs of cells
    closer than ``near`` cell lengths use the symmetrised point-to-segment
    mean of ``log|x - y|``; a cell against itself (or an identical cell of
    the other measure) uses the exact ``log h - 3/2`` of a uniform segment.
    Without cells the diagonal of a self-pairing is dropped.
    """
    X = np.asarray(X, float).reshape(len(m1), -1)
    Y = np.asarray(Y, float).reshape(len(m2), -1)
    out = np.zeros((X.shape[1], Y.shape[1]))
    if len(m1) == 0 or len(m2) == 0:
        return out
    cells = m1.has_cells and m2.has_cells
    if cells:
        h1, h2 = _cell_len(m1), _cell_len(m2)
        c1 = 0.5 * (m1.cell_start + m1.cell_end)
        c2 = 0.5 * (m2.cell_start + m2.cell_end)
    x2 = m2.points
    for s in range(0, len(m1), chunk):
        x1 = m1.points[s:s + chunk]
        d = np.abs(x1[:, None] - x2[None, :])
        ii = np.arange(x1.size)
        if same:
            d[ii, ii + s] = 1.0
        if cells:
            mask = d < near * np.maximum(h1[s:s + chunk, None], h2[None, :])
            if same:
                mask[ii, ii + s] = False
            with np.errstate(divide="ignore"):
                L = np.log(np.where(mask, 1.0, d))
            if mask.any():
                a, b = np.nonzero(mask)
                i1 = a + s
                twin = ((np.abs(c1[i1] - c2[b]) <= 1e-12 * h1[i1])
                        & (np.abs(h1[i1] - h2[b]) <= 1e-12 * h1[i1]))
                val = 0.5 * (_segment_log_mean(x1[a], m2.cell_start[b], m2.cell_end[b])
                             + _segment_log_mean(x2[b], m1.cell_start[i1], m1.cell_end[i1]))
                L[a, b] = np.where(twin, np.log(np.where(twin, h1[i1], 1.0)) - 1.5, val)
            if same:
                L[ii, ii + s] = np.log(h1[s:s + chunk]) - 1.5
        else:
            if np.any(d <= 0):
                raise SupportCollision("coincident support points in an energy sum")
            L = np.log(d)
            if same:
                L[ii, ii + s] = 0.0
        out += X[s:s + chunk].T @ L @ Y
    return out


def energy_I(m1: DiscreteMeasure, m2: DiscreteMeasure | None = None) -> float:
    """Logarithmic (mutual) energy ``-sum w_i v_j log|x_i - y_j|``.

    With ``m2`` absent this is the self-energy: the diagonal is excluded for
    bare point masses, and replaced by the exact self-energy
    ``w_i^2 (3/2 - log h_i)`` of a uniform segment for quadrature cells.

    Raises :class:`SupportCollision` when bare point masses coincide.
    """
    if m2 is None or m2 is m1:
        return -float(_forms(m1, m1.weights, m1, m1.weights, True)[0, 0])
    return -float(_forms(m1, m1.weights, m2, m2.weights, False)[0, 0])


def _gram_stack(v: MeasureVector, weights: list) -> np.ndarray:
    """Mutual energies for several weight sets on the nodes of ``v``.

    ``weights`` is a list of dicts ``k -> weight array`` (signed allowed).
    Returns ``G[a, b, i, j] = I(set a on component i, set b on component j)``.
    """
    idx = v.indices
    n, r = len(idx), len(weights)
    g = np.zeros((r, r, n, n))
    for i in range(n):
        Wi = np.stack([w[idx[i]] for w in weights], axis=1)
        for j in range(i, n):
            Wj = np.stack([w[idx[j]] for w in weights], axis=1)
            f = -_forms(v.components[idx[i]], Wi, v.components[idx[j]], Wj, i == j)
            g[:, :, i, j] = f
            g[:, :, j, i] = f.T
    return g


def gram_matrix(v: MeasureVector) -> np.ndarray:
    """Symmetric matrix of mutual energies ``I(nu_j, nu_k)``."""
    return _gram_stack(v, [{k: v.components[k].weights for k in v.indices}])[0, 0]


def interaction_matrix(p: int, q: int) -> np.ndarray:
    """``A_jk = 1`` on the diagonal, ``-1/2`` for neighbours, 0 otherwise."""
    n = p + q - 1
    return np.eye(n) - 0.5 * (np.eye(n, k=1) + np.eye(n, k=-1))


def _quad(g: np.ndarray, c: np.ndarray) -> float:
    """Energy ``I(sum_k c_k nu_k)`` of a signed combination."""
    return float(c @ g @ c)


def _energies(g: np.ndarray, p: int, q: int) -> tuple[float, float, float]:
    n = p + q - 1
    direct = float(np.trace(g) - np.sum(np.diag(g, 1)))
    # positions in the component list: index k sits at k + q - 1
    pos0 = q - 1
    alt = (1.0 / q + 1.0 / p) * g[pos0, pos0]
    for k in range(1, q):
        c = np.zeros(n)
        c[k - 1] += 1.0 / k           # nu_{-q+k}
        c[k] -= 1.0 / (k + 1)         # nu_{-q+k+1}
        alt += k * (k + 1) * _quad(g, c)
    for k in range(1, p):
        c = np.zeros(n)
        c[pos0 + p - k] += 1.0 / k          # nu_{p-k}
        c[pos0 + p - k - 1] -= 1.0 / (k + 1)  # nu_{p-k-1}
        alt += k * (k + 1) * _quad(g, c)
    # the telescoped sum counts every term twice
    alt *= 0.5
    matrix = float(np.sum(interaction_matrix(p, q) * g))
    return direct, alt, matrix


def energy_J(v: MeasureVector, check: bool = True, mass_tol: float = MASS_TOL) -> EnergyReport:
    """``J`` in its direct, telescoped and interaction-matrix forms.

    Raises :class:`AdmissibilityViolation` (when ``check``) if masses are off.
    """
    if check:
        check_admissible(v, mass_tol)
    d, alt, mat = _energies(gram_matrix(v), v.p, v.q)
    return EnergyReport(float(d), float(alt), float(mat))


def energy_lower_bound(v: MeasureVector) -> float:
    """``(1/q + 1/p) I(nu_0) / 2``, a lower bound for ``J`` on admissible vectors."""
    return 0.5 * (1.0 / v.q + 1.0 / v.p) * energy_I(v.components[0])


# ------------------------------------------------------ Euler-Lagrange data
def l_constant(a: LaurentSymbol, k: int) -> float:
    """``l_k = 2 alpha_k - alpha_{k+1} - alpha_{k-1}``."""
    if not (-a.q + 1 <= k <= a.p - 1):
        raise IndexOutOfRange(f"k={k} outside [{-a.q + 1}, {a.p - 1}]")
    return 2 * alpha_k(a, k) - alpha_k(a, k + 1) - alpha_k(a, k - 1)


def el_residual(a: LaurentSymbol, v: MeasureVector, k: int, lam, exclusion: float | None = None):
    """``2 U_k - U_{k+1} - U_{k-1} - l_k`` at points of ``Gamma_k``.

    ``U_j`` is the log-potential of component ``j`` (zero for ``j = -q, p``).
    Raises :class:`NearSingularity` within ``exclusion`` of a branch point.
    """
    if not (-a.q + 1 <= k <= a.p - 1):
        raise IndexOutOfRange(f"k={k} outside [{-a.q + 1}, {a.p - 1}]")
    lam_arr = np.atleast_1d(np.asarray(lam, complex))
    if exclusion is None:
        exclusion = EXCLUSION_REL * branch_scale(a)
    b = np.array([x for x, _ in distinct_branch_points(a)])
    if np.any(np.min(np.abs(lam_arr.ravel()[:, None] - b[None, :]), axis=1) <= exclusion):
        raise NearSingularity("residual requested at a branch point")
    res = (2 * np.asarray(log_potential(v[k], lam_arr)) - np.asarray(log_potential(v[k + 1], lam_arr))
           - np.asarray(log_potential(v[k - 1], lam_arr)) - l_constant(a, k))
    return float(res.ravel()[0]) if np.ndim(lam) == 0 else res


def probe_points(a: LaurentSymbol, family: CurveFamily, n: int = 20,
                 lo: float = 0.05, hi: float = 0.95) -> np.ndarray:
    """About ``n`` points at arclength fractions in ``[lo, hi]`` of each arc, on the curve."""
    arcs = [arc for arc in family.arcs if arc.length > 0]
    if not arcs:
        return np.zeros(0, complex)
    per = max(1, math.ceil(n / len(arcs)))
    pts = []
    for arc in arcs:
        pts.append(arc.at_arclength(np.linspace(lo, hi, per) * arc.length))
    pts = np.concatenate(pts)[:max(n, len(arcs))]
    return project_to_curve(a, family.k, pts)


def limit_vector(a: LaurentSymbol, r_max: float = 1e3, families: dict | None = None,
                 **kwargs) -> MeasureVector:
    """Discretised ``(mu_{-q+1}, ..., mu_{p-1})``; keyword arguments go to
    :func:`discretize_measure`."""
    comps = {}
    for k in range(-a.q + 1, a.p):
        fam = families[k] if families else trace_curve(a, k, r_max)
        comps[k] = discretize_measure(a, k, fam, **kwargs)
    return MeasureVector(a.p, a.q, comps)


def energy_report(a: LaurentSymbol, v: MeasureVector, families: dict | None = None,
                  probes_per_curve: int = 20, r_max: float = 1e3) -> EnergyReport:
    """Energies plus Euler-Lagrange residuals at probe points of every curve."""
    rep = energy_J(v)
    res, ls = {}, {}
    for k in v.indices:
        fam = families[k] if families else trace_curve(a, k, r_max)
        pts = probe_points(a, fam, probes_per_curve)
        vals = el_residual(a, v, k, pts)
        res[k] = [(complex(x), float(y)) for x, y in zip(pts, vals)]
        ls[k] = l_constant(a, k)
    return EnergyReport(rep.J_direct, rep.J_alt, rep.J_matrix, res, ls)


# ---------------------------------------------------------------- minimality
def transfer_perturbation(v: MeasureVector, k: int, delta: float) -> MeasureVector:
    """Move the fraction ``delta`` of the mass of component ``k`` from the
    first half of its nodes (by cumulative weight) to the second half,
    proportionally to the existing weights.  Negative ``delta`` moves mass
    the other way.

    Raises :class:`AdmissibilityViolation` if a half holds too little mass.
    """
    m = v[k]
    w = m.weights
    cum = np.cumsum(w)
    total = cum[-1] if w.size else 0.0
    first = cum - 0.5 * w <= 0.5 * total
    ma, mb = w[first].sum(), w[~first].sum()
    move = delta * total
    if move > ma or -move > mb:
        raise AdmissibilityViolation("perturbation removes more mass than available")
    new = w.copy()
    if ma > 0:
        new[first] *= 1.0 - move / ma
    if mb > 0:
        new[~first] *= 1.0 + move / mb
    return v.replace(k, m.with_weights(new))


def random_perturbation(v: MeasureVector, delta: float, rng: np.random.Generator,
                        modes: int = 4) -> tuple[MeasureVector, float]:
    """Random mass-preserving reweighting of every component.

    Each component gets ``w (1 + delta g)`` with ``g`` a random combination
    of low-frequency cosines in the node order, shifted to have zero mean
    under ``w`` and scaled so that ``delta`` of the mass moves.  Returns the
    perturbed vector and the smallest transferred mass fraction.
    """
    out = v
    moved = np.inf
    for k in v.indices:
        m = v[k]
        w = m.weights
        t = (np.cumsum(w) - 0.5 * w) / max(w.sum(), 1e-300)
        g = np.zeros_like(t)
        for j in range(1, modes + 1):
            g += rng.normal() * np.cos(math.pi * j * t + rng.uniform(0, 2 * math.pi))
        g -= (g @ w) / w.sum()
        frac = 0.5 * np.sum(np.abs(g) * w) / w.sum()
        g *= delta / frac
        lim = np.max(-g)
        if lim >= 1.0:
            g /= lim * 1.01
        new = w * (1.0 + g)
        moved = min(moved, 0.5 * np.sum(np.abs(new - w)) / w.sum())
        out = out.replace(k, m.with_weights(new))
    return out, moved


def minimality_check(a: LaurentSymbol, v_ref: MeasureVector, delta: float,
                     k: int = 0) -> float:
    """``J(perturbed) - J(v_ref)`` for a transfer of the fraction ``delta``
    of the mass of component ``k`` (see :func:`transfer_perturbation`)."""
    if not (-a.q + 1 <= k <= a.p - 1):
        raise IndexOutOfRange(f"k={k} outside [{-a.q + 1}, {a.p - 1}]")
    if delta == 0:
        return 0.0
    pert = transfer_perturbation(v_ref, k, delta)
    return energy_change(v_ref, pert)


def energy_changes(v_ref: MeasureVector, others: list) -> np.ndarray:
    """``J(v) - J(v_ref)`` for each ``v`` in ``others`` (same nodes as ``v_ref``).

    Expanded as ``2 B(v_ref, eta) + J(eta)`` with ``eta = v - v_ref``, so the
    large common part of the two energies never enters.
    """
    idx = v_ref.indices
    ref = {k: v_ref.components[k].weights for k in idx}
    etas = [{k: o.components[k].weights - ref[k] for k in idx} for o in others]
    g = _gram_stack(v_ref, [ref] + etas)
    A = interaction_matrix(v_ref.p, v_ref.q)
    out = []
    for e in range(1, len(others) + 1):
        cross = np.sum(A * g[0, e]) + np.sum(A * g[e, 0])
        out.append(cross + np.sum(A * g[e, e]))
    return np.array(out)


def energy_change(v_ref: MeasureVector, v_new: MeasureVector) -> float:
    """``J(v_new) - J(v_ref)`` for vectors on the same nodes."""
    return float(energy_changes(v_ref, [v_new])[0])


def signed_difference_energy(v1: MeasureVector, v2: MeasureVector) -> float:
    """``J(v1 - v2)`` for vectors on the same nodes (nonnegative for
    admissible pairs with equal masses)."""
    eta = {k: v1.components[k].weights - v2.components[k].weights for k in v1.indices}
    g = _gram_stack(v1, [eta])[0, 0]
    return float(np.sum(interaction_matrix(v1.p, v1.q) * g))
