"""CSV, JSON and SVG emitters.

Complex numbers are written as ``[re, im]`` in JSON and as two columns in
CSV.  All writers are deterministic: the same objects give the same bytes.
"""

from __future__ import annotations

import csv
import io
import json
import math

import numpy as np

from .curves import CurveFamily
from .measures import DiscreteMeasure


def cpair(z) -> list:
    z = complex(z)
    return [z.real, z.imag]


def to_jsonable(obj):
    """Recursively convert numpy scalars/arrays and complex numbers."""
    if isinstance(obj, dict):
        return {str(k): to_jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [to_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [to_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (complex, np.complexfloating)):
        return cpair(obj)
    if isinstance(obj, np.integer):
        return int(obj)
    if isinstance(obj, np.floating):
        return float(obj)
    return obj


def dumps_json(obj) -> str:
    return json.dumps(to_jsonable(obj), indent=2, sort_keys=True) + "\n"


def dumps_csv(header: list, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


# ------------------------------------------------------------------ tables
def curve_rows(family: CurveFamily):
    for i, arc in enumerate(family.arcs):
        for z, t in zip(arc.points, arc.tangents):
            yield [family.k, i, z.real, z.imag, t.real, t.imag]


CURVE_HEADER = ["k", "arc_id", "re_lambda", "im_lambda", "re_tangent", "im_tangent"]


def curves_json(families: list) -> dict:
    out = []
    for fam in families:
        arcs = [{"start": {"kind": arc.start.kind, "lambda": arc.start.location},
                 "end": {"kind": arc.end.kind, "lambda": arc.end.location},
                 "length": arc.length, "points": arc.points}
                for arc in fam.arcs]
        out.append({"k": fam.k, "truncation_radius": fam.truncation_radius,
                    "grid_step": fam.grid_step,
                    "special_points": [{"lambda": s, "kind": kind} for s, kind in fam.special_points],
                    "arcs": arcs})
    return {"families": out}


def measure_rows(m: DiscreteMeasure):
    ids = m.arc_ids if m.arc_ids is not None else np.full(len(m), -1)
    dens = m.densities if m.densities is not None else np.full(len(m), math.nan)
    for z, i, d, w in zip(m.points, ids, dens, m.weights):
        yield [m.k, int(i), z.real, z.imag, d, w]


MEASURE_HEADER = ["k", "arc_id", "re_lambda", "im_lambda", "real_density", "weight"]


# --------------------------------------------------------------------- SVG
def svg_plot(curves=(), dots=(), window: float | None = None, size: int = 800,
             title: str = "") -> str:
    """Static SVG: polylines for curves, dots for point sets, with axes.

    ``curves`` is a list of point arrays, ``dots`` a list of point arrays.
    The view is the square ``[-window, window]^2`` (default: fitted to the
    data, at most 10 times the extent of the dots).
    """
    pts = [np.asarray(c, complex) for c in curves] + [np.asarray(d, complex) for d in dots]
    allp = np.concatenate(pts) if pts else np.zeros(1, complex)
    allp = allp[np.isfinite(allp)]
    if window is None:
        ext = float(np.max(np.abs(np.concatenate([allp.real, allp.imag])))) if allp.size else 1.0
        window = max(ext * 1.1, 1e-12)
    pad = 40
    span = size - 2 * pad

    def xy(z):
        x = pad + (z.real + window) / (2 * window) * span
        y = pad + (window - z.imag) / (2 * window) * span
        return x, y

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size} {size}" '
           f'width="{size}" height="{size}">',
           f'<rect x="0" y="0" width="{size}" height="{size}" fill="white"/>']
    x0, y0 = xy(0j)
    out.append(f'<line x1="{pad}" y1="{y0:.3f}" x2="{size - pad}" y2="{y0:.3f}" '
               'stroke="#999" stroke-width="1"/>')
    out.append(f'<line x1="{x0:.3f}" y1="{pad}" x2="{x0:.3f}" y2="{size - pad}" '
               'stroke="#999" stroke-width="1"/>')
    out.append(f'<text x="{size - pad}" y="{y0 - 4:.3f}" font-size="12" text-anchor="end">'
               f'{window:.4g}</text>')
    out.append(f'<text x="{x0 + 4:.3f}" y="{pad + 12}" font-size="12">{window:.4g}i</text>')
    if title:
        out.append(f'<text x="{pad}" y="{pad - 12}" font-size="14">{title}</text>')
    for c in curves:
        c = np.asarray(c, complex)
        c = c[np.abs(c) <= 2 * window]
        if c.size < 2:
            continue
        coords = " ".join("{:.3f},{:.3f}".format(*xy(z)) for z in c)
        out.append(f'<polyline points="{coords}" fill="none" stroke="#1f4e99" stroke-width="1.5"/>')
    for d in dots:
        for z in np.asarray(d, complex):
            if abs(z.real) <= window and abs(z.imag) <= window:
                x, y = xy(z)
                out.append(f'<circle cx="{x:.3f}" cy="{y:.3f}" r="2.5" fill="#c0392b"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
