"""Laurent polynomial symbols ``a(z) = sum_{k=-q}^{p} a_k z^k``.

A symbol is admissible when both extreme coefficients are nonzero, ``p`` and
``q`` are at least one, and the gcd of the support is one (otherwise ``a`` is
a function of ``z^m`` and the root labelling is not generic).
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from functools import lru_cache, reduce
from numbers import Number
from pathlib import Path
from typing import Mapping

import numpy as np

from . import _aberth
from .errors import (DegenerateRange, ExtremeCoefficientZero, GcdViolation,
                     ValidationError, ZeroArgument)


@dataclass(frozen=True)
class LaurentSymbol:
    """Immutable, hashable Laurent polynomial.

    Attributes
    ----------
    p, q : int
        Highest positive and negative powers.
    coeffs : tuple of complex
        ``(a_{-q}, ..., a_p)``.
    """

    p: int
    q: int
    coeffs: tuple

    def __post_init__(self):
        if len(self.coeffs) != self.p + self.q + 1:
            raise ValidationError("coefficient tuple has the wrong length")

    def coeff(self, k: int) -> complex:
        """``a_k`` (zero outside ``[-q, p]``)."""
        if -self.q <= k <= self.p:
            return self.coeffs[k + self.q]
        return 0j

    @property
    def degree(self) -> int:
        """Number of roots of ``a(z) = lambda``, i.e. ``p + q``."""
        return self.p + self.q

    def support(self) -> list[int]:
        return [k for k in range(-self.q, self.p + 1) if self.coeff(k) != 0]

    def as_dict(self) -> dict[int, complex]:
        return {k: self.coeff(k) for k in self.support()}

    def poly_coeffs(self, lam=0.0) -> np.ndarray:
        """Ascending coefficients of ``z^q (a(z) - lam)``.

        With an array ``lam`` of shape (N,) the result has shape (N, p+q+1).
        """
        c = np.array(self.coeffs, complex)
        lam = np.asarray(lam, complex)
        if lam.ndim == 0:
            c[self.q] -= lam
            return c
        out = np.tile(c, (lam.shape[0], 1))
        out[:, self.q] -= lam
        return out

    def __call__(self, z):
        return evaluate(self, z)

    def __str__(self) -> str:
        terms = []
        for k in self.support():
            terms.append(f"({_fmt(self.coeff(k))})z^{k}")
        return " + ".join(terms)


def _fmt(c: complex) -> str:
    c = complex(c)
    if c.imag == 0:
        return f"{c.real:.12g}"
    return f"{c.real:.12g}{c.imag:+.12g}j"


def _as_complex(v) -> complex:
    if isinstance(v, (list, tuple)):
        if len(v) != 2:
            raise ValidationError(f"complex coefficient must be [re, im], got {v!r}")
        return complex(float(v[0]), float(v[1]))
    if isinstance(v, str):
        return complex(v.replace(" ", ""))
    if isinstance(v, Number):
        return complex(v)
    raise ValidationError(f"cannot interpret coefficient {v!r}")


def parse_symbol(coeffs: Mapping) -> LaurentSymbol:
    """Build a validated symbol from ``{power: coefficient}``.

    Powers may be ints or strings; coefficients may be numbers, complex
    strings or ``[re, im]`` pairs.  Exact zeros are trimmed before the
    extreme powers are read off.

    Raises
    ------
    ExtremeCoefficientZero
        If every coefficient is zero.
    DegenerateRange
        If ``p < 1`` or ``q < 1`` after trimming.
    GcdViolation
        If the support has gcd larger than one.
    """
    table: dict[int, complex] = {}
    for key, val in coeffs.items():
        try:
            k = int(key)
        except (TypeError, ValueError):
            raise ValidationError(f"power {key!r} is not an integer") from None
        c = _as_complex(val)
        if not (math.isfinite(c.real) and math.isfinite(c.imag)):
            raise ValidationError(f"coefficient of z^{k} is not finite")
        table[k] = table.get(k, 0j) + c
    table = {k: c for k, c in table.items() if c != 0}
    if not table:
        raise ExtremeCoefficientZero("symbol has no nonzero coefficients")
    p = max(table)
    q = -min(table)
    if p < 1 or q < 1:
        raise DegenerateRange(f"need p >= 1 and q >= 1, got p={p}, q={q}")
    g = reduce(math.gcd, (abs(k) for k in table))
    if g != 1:
        raise GcdViolation(f"gcd of the support is {g}")
    return LaurentSymbol(p, q, tuple(table.get(k, 0j) for k in range(-q, p + 1)))


def from_coefficients(coeffs: Mapping, p: int | None = None, q: int | None = None) -> LaurentSymbol:
    """Like :func:`parse_symbol` but insists on nonzero ``a_p`` and ``a_{-q}``
    when the extreme powers are given explicitly."""
    if p is not None and _as_complex(coeffs.get(p, coeffs.get(str(p), 0))) == 0:
        raise ExtremeCoefficientZero(f"a_{p} is zero")
    if q is not None and _as_complex(coeffs.get(-q, coeffs.get(str(-q), 0))) == 0:
        raise ExtremeCoefficientZero(f"a_{-q} is zero")
    return parse_symbol(coeffs)


def load_symbol(path) -> LaurentSymbol:
    """Read ``{"coeffs": {"-1": [re, im], "1": 1.0, ...}}`` from a JSON file."""
    data = json.loads(Path(path).read_text())
    if not isinstance(data, dict) or "coeffs" not in data:
        raise ValidationError("symbol file must contain a 'coeffs' object")
    return parse_symbol(data["coeffs"])


def symbol_to_json(a: LaurentSymbol) -> dict:
    return {"coeffs": {str(k): [c.real, c.imag] for k, c in a.as_dict().items()}}


def evaluate(a: LaurentSymbol, z):
    """``a(z)`` for scalar or array ``z``; raises :class:`ZeroArgument` at 0."""
    z = np.asarray(z, complex)
    if np.any(z == 0):
        raise ZeroArgument("symbol evaluated at z = 0")
    c = np.array(a.coeffs, complex)
    val = np.zeros_like(z)
    for c_j in c[::-1]:
        val = val * z + c_j
    val = val / z ** a.q
    return val[()] if val.ndim == 0 else val


def evaluate_derivative(a: LaurentSymbol, z):
    """``a'(z)``; raises :class:`ZeroArgument` at 0."""
    z = np.asarray(z, complex)
    if np.any(z == 0):
        raise ZeroArgument("symbol derivative evaluated at z = 0")
    val = np.zeros_like(z)
    for k in range(a.p, -a.q - 1, -1):
        if k != 0:
            val = val + k * a.coeff(k) * z ** (k - 1)
    return val[()] if val.ndim == 0 else val


def critical_points(a: LaurentSymbol) -> np.ndarray:
    """The ``p + q`` zeros of ``z^{q+1} a'(z)`` (with multiplicity)."""
    d = a.degree
    # z^{q+1} a'(z) = sum_k k a_k z^{k+q}
    c = np.array([k * a.coeff(k) for k in range(-a.q, a.p + 1)], complex)
    scale = max(abs(c[0]), 1e-300)
    r0 = (abs(c[0]) / abs(c[-1])) ** (1.0 / d)
    init = r0 * np.exp(1j * (2 * np.pi * np.arange(d) / d + 0.4))
    return _aberth.aberth_batch(c[None, :] / scale, init[None, :])[0]


@lru_cache(maxsize=64)
def _branch_points(a: LaurentSymbol, rel_tol: float) -> tuple:
    vals = np.atleast_1d(evaluate(a, critical_points(a)))
    scale = max(1.0, float(np.max(np.abs(vals))))
    order = np.lexsort((vals.imag, vals.real))
    vals = vals[order]
    groups: list[list[complex]] = []
    for v in vals:
        for g in groups:
            if abs(g[0] - v) <= rel_tol * scale:
                g.append(v)
                break
        else:
            groups.append([v])
    out = []
    for g in groups:
        m = complex(np.mean(g))
        # snap rounding noise so that e.g. a(-1) = 0 compares equal to 0
        re = 0.0 if abs(m.real) <= 1e-14 * scale else m.real
        im = 0.0 if abs(m.imag) <= 1e-14 * scale else m.imag
        m = complex(re, im)
        out.extend([m] * len(g))
    out.sort(key=lambda z: (round(z.real, 12), round(z.imag, 12)))
    return tuple(out)


def branch_points(a: LaurentSymbol, rel_tol: float = 1e-8) -> list[complex]:
    """Critical values ``a(z*)`` with multiplicity, clustered.

    Values within ``rel_tol * max(1, max|lambda|)`` of each other are replaced
    by their mean, so repeated critical values compare equal exactly.  The list
    is sorted by real then imaginary part.
    """
    return list(_branch_points(a, rel_tol))


def distinct_branch_points(a: LaurentSymbol) -> list[tuple[complex, int]]:
    """Distinct branch points with their multiplicities."""
    out: list[tuple[complex, int]] = []
    for v in branch_points(a):
        if out and out[-1][0] == v:
            out[-1] = (v, out[-1][1] + 1)
        else:
            out.append((v, 1))
    return out


def branch_scale(a: LaurentSymbol) -> float:
    """``max(1, max |branch point|)``; a length scale for the lambda-plane."""
    return max(1.0, max(abs(b) for b in branch_points(a)))
