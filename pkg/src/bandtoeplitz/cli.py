"""Command-line front end.

Every subcommand reads a symbol from a JSON file (``{"coeffs": {...}}``),
runs one computation and writes CSV, JSON or SVG to ``--out`` (stdout by
default).  Exit status is 0 on success, 1 on a validation or usage error and
2 on a numerical failure.  Identical arguments give identical bytes.
"""

from __future__ import annotations

import argparse
import json
import math
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import export
from .convergence import DEFAULT_NS, PROBE_CLEARANCE, convergence_report, default_probes
from .curves import ON_CURVE_TOL, trace_curve
from .errors import NumericalError, ValidationError
from .measures import DENSITY_TOL, MASS_TOL, alpha_k, discretize_measure, expected_mass
from .potential import MeasureVector, energy_report
from .symbol import (LaurentSymbol, branch_points, branch_scale, critical_points, load_symbol,
                     symbol_to_json)
from .toeplitz import (char_poly, degree_bound, generalized_spectrum, leading_coefficient_formula,
                       widom_check)

COMMANDS = ("symbol-info", "curves", "density", "masses", "spectrum", "widom-check",
            "energy", "converge")
_DEFAULT_FORMAT = {"symbol-info": "json", "widom-check": "json", "energy": "json"}
WIDOM_TOL = 1e-9


class UsageError(ValidationError):
    """Bad command line."""


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{self.prog}: {message}")


def _positive_float(s: str) -> float:
    try:
        v = float(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}") from None
    if not (v > 0 and math.isfinite(v)):
        raise argparse.ArgumentTypeError(f"expected a positive number, got {s!r}")
    return v


def _positive_int(s: str) -> int:
    try:
        v = int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s!r}")
    return v


def _int(s: str) -> int:
    try:
        return int(s)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {s!r}") from None


def _int_list(s: str) -> tuple:
    try:
        return tuple(_positive_int(x.strip()) for x in s.split(",") if x.strip())
    except argparse.ArgumentTypeError:
        raise argparse.ArgumentTypeError(
            f"expected comma-separated positive integers, got {s!r}") from None


@dataclass(frozen=True)
class RunConfig:
    """Validated settings of one invocation."""

    command: str
    symbol_path: str
    k: int | None = None
    n: int = 20
    ns: tuple = DEFAULT_NS
    r_max: float = 1e3
    grid_step: float | None = None
    tol: float = ON_CURVE_TOL
    density_tol: float = DENSITY_TOL
    mass_tol: float = MASS_TOL
    widom_tol: float = WIDOM_TOL
    clearance: float = PROBE_CLEARANCE
    nodes: int = 100
    trials: int = 100
    seed: int = 0
    out: str | None = None
    format: str = "csv"

    def validate(self, a: LaurentSymbol) -> None:
        for name in ("n", "r_max", "tol", "density_tol", "mass_tol", "widom_tol", "clearance",
                     "nodes", "trials"):
            v = getattr(self, name)
            if not v > 0:
                raise UsageError(f"--{name.replace('_', '-')}: expected a positive value, got {v}")
        if self.grid_step is not None and not self.grid_step > 0:
            raise UsageError(f"--grid: expected a positive number, got {self.grid_step}")
        if not self.ns or min(self.ns) < 1:
            raise UsageError("--ns: expected comma-separated positive integers")
        rb = 2 * max([abs(b) for b in branch_points(a)] + [0.0])
        if not self.r_max > rb:
            raise UsageError(f"--rmax: expected a number greater than {rb:.6g} "
                             f"(twice the largest branch-point modulus), got {self.r_max}")
        if self.k is not None and not (-a.q + 1 <= self.k <= a.p - 1):
            raise UsageError(f"--k: expected an integer in [{-a.q + 1}, {a.p - 1}], got {self.k}")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="bandtoeplitz",
                 description="Limiting spectra of banded Toeplitz matrices.")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    helps = {
        "symbol-info": "degrees, branch points, critical points and target masses",
        "curves": "traced curves as polylines with tangents",
        "density": "discretised limiting measure (nodes, densities, weights)",
        "masses": "total mass of every limiting measure against its target",
        "spectrum": "zeros of the characteristic polynomial of the generalized matrix",
        "widom-check": "determinant against its root expansion at random points",
        "energy": "three forms of the energy and Euler-Lagrange residuals",
        "converge": "convergence of zero-counting measures",
    }
    for name in COMMANDS:
        p = sub.add_parser(name, help=helps[name], description=helps[name],
                           formatter_class=argparse.ArgumentDefaultsHelpFormatter)
        p.add_argument("--symbol", required=True, metavar="PATH",
                       help='JSON file {"coeffs": {"-1": 1, "1": [re, im]}}')
        p.add_argument("--k", type=_int, default=None,
                       help="curve index in [-q+1, p-1] (all indices when omitted, where meaningful)")
        p.add_argument("--n", type=_positive_int, default=20, help="matrix size")
        p.add_argument("--ns", type=_int_list, default=DEFAULT_NS, metavar="LIST",
                       help="comma-separated matrix sizes")
        p.add_argument("--rmax", type=_positive_float, default=1e3, help="truncation radius")
        p.add_argument("--grid", type=_positive_float, default=None,
                       help="largest marching step (default 2*rmax/400)")
        p.add_argument("--tol", type=_positive_float, default=ON_CURVE_TOL,
                       help="on-curve corrector tolerance")
        p.add_argument("--density-tol", type=_positive_float, default=DENSITY_TOL,
                       help="density values in [-tol, 0) are clamped to 0")
        p.add_argument("--mass-tol", type=_positive_float, default=MASS_TOL,
                       help="allowed deviation of total masses from their targets")
        p.add_argument("--widom-tol", type=_positive_float, default=WIDOM_TOL,
                       help="allowed relative determinant discrepancy")
        p.add_argument("--clearance", type=_positive_float, default=PROBE_CLEARANCE,
                       help="minimum probe distance from the curve")
        p.add_argument("--nodes", type=_positive_int, default=100,
                       help="quadrature nodes per arc")
        p.add_argument("--trials", type=_positive_int, default=100, help="random trials")
        p.add_argument("--seed", type=_int, default=0, help="random seed")
        p.add_argument("--out", default=None, metavar="PATH", help="output file (stdout if omitted)")
        p.add_argument("--format", choices=("csv", "json", "svg"), default=None,
                       help="output format (json for symbol-info, widom-check and energy, "
                            "csv otherwise)")
    return ap


def parse_config(argv) -> RunConfig:
    ns = build_parser().parse_args(argv)
    fmt = ns.format or _DEFAULT_FORMAT.get(ns.command, "csv")
    return RunConfig(command=ns.command, symbol_path=ns.symbol, k=ns.k, n=ns.n, ns=ns.ns,
                     r_max=ns.rmax, grid_step=ns.grid, tol=ns.tol, density_tol=ns.density_tol,
                     mass_tol=ns.mass_tol, widom_tol=ns.widom_tol, clearance=ns.clearance,
                     nodes=ns.nodes, trials=ns.trials, seed=ns.seed, out=ns.out, format=fmt)


# ---------------------------------------------------------------- commands
def _indices(a: LaurentSymbol, cfg: RunConfig) -> list[int]:
    return [cfg.k] if cfg.k is not None else list(range(-a.q + 1, a.p))


def _family(a, k, cfg):
    return trace_curve(a, k, cfg.r_max, cfg.grid_step, cfg.tol)


def _window(a: LaurentSymbol) -> float:
    return 2.5 * max([abs(b) for b in branch_points(a)] + [1.0])


def _cmd_symbol_info(a, cfg):
    info = {"p": a.p, "q": a.q, "symbol": str(a), "coeffs": symbol_to_json(a)["coeffs"],
            "branch_points": branch_points(a), "critical_points": critical_points(a),
            "branch_scale": branch_scale(a),
            "indices": list(range(-a.q + 1, a.p)),
            "target_masses": {k: expected_mass(a, k) for k in range(-a.q + 1, a.p)},
            "alpha": {k: alpha_k(a, k) for k in range(-a.q, a.p + 1)}}
    if cfg.format == "json":
        return export.dumps_json(info)
    if cfg.format == "csv":
        rows = [["branch", z.real, z.imag] for z in map(complex, info["branch_points"])]
        rows += [["critical", z.real, z.imag] for z in map(complex, info["critical_points"])]
        return export.dumps_csv(["kind", "re", "im"], rows)
    return export.svg_plot(dots=[np.asarray(info["branch_points"], complex)],
                           window=_window(a), title=f"branch points of {a}")


def _cmd_curves(a, cfg):
    fams = [_family(a, k, cfg) for k in _indices(a, cfg)]
    if cfg.format == "json":
        return export.dumps_json(export.curves_json(fams))
    if cfg.format == "csv":
        rows = [r for f in fams for r in export.curve_rows(f)]
        return export.dumps_csv(export.CURVE_HEADER, rows)
    curves = [arc.points for f in fams for arc in f.arcs]
    return export.svg_plot(curves=curves, window=_window(a),
                           title="curves k=" + ",".join(str(f.k) for f in fams))


def _measures(a, cfg, check_mass):
    out = []
    for k in _indices(a, cfg):
        fam = _family(a, k, cfg)
        out.append((fam, discretize_measure(a, k, fam, cfg.nodes, tol=cfg.density_tol,
                                            mass_tol=cfg.mass_tol, check_mass=check_mass)))
    return out


def _cmd_density(a, cfg):
    ms = _measures(a, cfg, check_mass=True)
    if cfg.format == "json":
        return export.dumps_json({"measures": [
            {"k": m.k, "total_mass": m.total_mass, "expected_mass": expected_mass(a, m.k),
             "points": m.points, "densities": m.densities, "weights": m.weights,
             "arc_ids": m.arc_ids} for _, m in ms]})
    if cfg.format == "csv":
        rows = [r for _, m in ms for r in export.measure_rows(m)]
        return export.dumps_csv(export.MEASURE_HEADER, rows)
    return export.svg_plot(curves=[arc.points for f, _ in ms for arc in f.arcs],
                           dots=[m.points for _, m in ms], window=_window(a),
                           title="quadrature nodes")


def _cmd_masses(a, cfg):
    ms = _measures(a, cfg, check_mass=False)
    rows = []
    for _, m in ms:
        target = expected_mass(a, m.k)
        rows.append({"k": m.k, "mass": m.total_mass, "expected": target,
                     "error": abs(m.total_mass - target)})
    bad = [r for r in rows if r["error"] >= cfg.mass_tol]
    if cfg.format == "json":
        text = export.dumps_json({"mass_tol": cfg.mass_tol, "masses": rows})
    elif cfg.format == "csv":
        text = export.dumps_csv(["k", "mass", "expected", "error"],
                                [[r["k"], r["mass"], r["expected"], r["error"]] for r in rows])
    else:
        raise UsageError("--format: masses supports csv or json")
    return text, (f"mass mismatch for k={[r['k'] for r in bad]}" if bad else None)


def _cmd_spectrum(a, cfg):
    k = 0 if cfg.k is None else cfg.k
    cp = char_poly(a, k, cfg.n)
    spectrum = generalized_spectrum(a, k, cfg.n)
    zeros = np.asarray(spectrum.zeros, complex)
    if cfg.format == "json":
        return export.dumps_json({
            "k": k, "n": cfg.n, "degree": cp.degree, "degree_bound": degree_bound(a, k, cfg.n),
            "leading_coefficient": cp.leading,
            "leading_coefficient_formula": leading_coefficient_formula(a, k, cfg.n),
            "bits": spectrum.bits, "zeros": zeros})
    if cfg.format == "csv":
        rows = [[k, cfg.n, z.real, z.imag, mult]
                for z, mult in spectrum.clusters(radius=cp.radius)]
        return export.dumps_csv(["k", "n", "re_lambda", "im_lambda", "multiplicity"], rows)
    fam = _family(a, k, cfg)
    return export.svg_plot(curves=[arc.points for arc in fam.arcs], dots=[zeros],
                           window=_window(a), title=f"zeros k={k} n={cfg.n}")


def _cmd_widom(a, cfg):
    k = 0 if cfg.k is None else cfg.k
    rep = widom_check(a, k, cfg.n, cfg.trials, cfg.seed)
    rep["tolerance"] = cfg.widom_tol
    rep["pass"] = bool(rep["max_relative_discrepancy"] < cfg.widom_tol)
    if cfg.format == "json":
        text = export.dumps_json(rep)
    elif cfg.format == "csv":
        text = export.dumps_csv(["k", "n_max", "checked", "skipped", "max_relative_discrepancy"],
                                [[k, cfg.n, rep["checked"], rep["skipped"],
                                  rep["max_relative_discrepancy"]]])
    else:
        raise UsageError("--format: widom-check supports csv or json")
    return text, (None if rep["pass"] else
                  f"relative discrepancy {rep['max_relative_discrepancy']:.3e} exceeds "
                  f"{cfg.widom_tol:.1e}")


def _cmd_energy(a, cfg):
    fams = {k: _family(a, k, cfg) for k in range(-a.q + 1, a.p)}
    v = MeasureVector(a.p, a.q, {k: discretize_measure(a, k, fams[k], cfg.nodes,
                                                      tol=cfg.density_tol,
                                                      mass_tol=cfg.mass_tol)
                                 for k in fams})
    rep = energy_report(a, v, fams, probes_per_curve=cfg.n, r_max=cfg.r_max)
    residuals = [{"k": k, "lambda": lam, "value": val}
                 for k in sorted(rep.el_residuals) for lam, val in rep.el_residuals[k]]
    if cfg.format == "json":
        return export.dumps_json({"J_direct": rep.J_direct, "J_alt": rep.J_alt,
                                  "J_matrix": rep.J_matrix, "l": rep.l_constants,
                                  "residuals": residuals})
    if cfg.format == "csv":
        return export.dumps_csv(["k", "re_lambda", "im_lambda", "residual"],
                                [[r["k"], r["lambda"].real, r["lambda"].imag, r["value"]]
                                 for r in residuals])
    raise UsageError("--format: energy supports csv or json")


def _cmd_converge(a, cfg):
    rows = []
    for k in _indices(a, cfg):
        fam = _family(a, k, cfg)
        probes = default_probes(a, fam, clearance=cfg.clearance)
        rep = convergence_report(a, k, cfg.ns, probes, fam)
        rows += [dict(e, k=k) for e in rep.entries]
    cols = ["k", "n", "mass", "cauchy_error", "curve_distance", "outside"]
    if cfg.format == "json":
        return export.dumps_json({"entries": [{c: r[c] for c in cols} for r in rows]})
    if cfg.format == "csv":
        return export.dumps_csv(cols, [[r[c] for c in cols] for r in rows])
    raise UsageError("--format: converge supports csv or json")


_HANDLERS = {"symbol-info": _cmd_symbol_info, "curves": _cmd_curves, "density": _cmd_density,
             "masses": _cmd_masses, "spectrum": _cmd_spectrum, "widom-check": _cmd_widom,
             "energy": _cmd_energy, "converge": _cmd_converge}


def _emit(text: str, out: str | None) -> None:
    if out is None:
        sys.stdout.write(text)
    else:
        Path(out).write_text(text)


def run(argv=None) -> int:
    """Execute one command; returns the exit status."""
    try:
        cfg = parse_config(sys.argv[1:] if argv is None else list(argv))
        try:
            a = load_symbol(cfg.symbol_path)
        except (OSError, json.JSONDecodeError) as exc:
            raise UsageError(f"--symbol: cannot read a symbol from {cfg.symbol_path!r}: {exc}") from None
        cfg.validate(a)
        result = _HANDLERS[cfg.command](a, cfg)
        text, failure = result if isinstance(result, tuple) else (result, None)
        _emit(text, cfg.out)
        if failure:
            print(f"error: {failure}", file=sys.stderr)
            return 2
        return 0
    except ValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except NumericalError as exc:
        print(f"numerical failure: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:  # --help
        return int(exc.code or 0)


def main() -> None:
    sys.exit(run())
