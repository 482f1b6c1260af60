"""Command-line front end.

Exit codes: 0 success, 1 numeric or validation failure, 2 malformed spec.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from .characteristics import (
    InverseMapError,
    TraceError,
    trace_characteristics,
    validate_characteristics,
    write_csv,
)
from .exprlang import ExprError, parse
from .kernel import DegenerateKernelError
from .parallelogram import CharRectangle, SolutionField, identity_residual
from .problem import NonHyperbolicError, check_hyperbolicity
from .quadrature import QuadratureError, QuadratureRule
from .solvers import (
    ConvergenceError,
    OutsideDomainError,
    solve_darboux,
    solve_goursat_linear_picard,
    solve_goursat_wave,
    solve_mixed_wave,
)
from .specfile import SpecError, example, examples, load

EXIT_OK, EXIT_FAIL, EXIT_SPEC = 0, 1, 2
NUMERIC_ERRORS = (
    ConvergenceError,
    OutsideDomainError,
    InverseMapError,
    TraceError,
    DegenerateKernelError,
    NonHyperbolicError,
    QuadratureError,
)


def _json_default(o):
    if isinstance(o, np.generic):
        return o.item()
    if isinstance(o, np.ndarray):
        return o.tolist()
    raise TypeError(f"not JSON serializable: {type(o).__name__}")


def _emit(report: dict, args, stream=None) -> None:
    text = json.dumps(report, indent=2, sort_keys=True, default=_json_default) + "\n"
    if args.json_report:
        Path(args.json_report).write_text(text, encoding="utf-8")
    else:
        (stream or sys.stdout).write(text)


def _load(args):
    if args.example and args.spec:
        raise SpecError("give either a spec file or --example, not both")
    if args.example:
        return example(args.example)
    if not args.spec:
        raise SpecError("a spec file or --example NAME is required")
    return load(args.spec)


def _tol(spec, key, default):
    return spec.tolerances.get(key, default)


def _rule(spec, args, default_points=16) -> QuadratureRule:
    n = args.quad_points or _tol(spec, "quad_points", default_points)
    panels = args.panels or _tol(spec, "panels", 1)
    return QuadratureRule("gauss-legendre-tensor", n, panels)


def _parse_grid(text):
    parts = text.lower().replace("x", ",").split(",")
    try:
        vals = [int(p) for p in parts if p.strip()]
    except ValueError as exc:
        raise SpecError(f"--grid expects N or N1xN2, got {text!r}") from exc
    if len(vals) == 1:
        vals *= 2
    if len(vals) != 2 or min(vals) < 1:
        raise SpecError(f"--grid expects N or N1xN2, got {text!r}")
    return tuple(vals)


def _parse_reals(text, n, flag):
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise SpecError(f"{flag} expects {n} reals, got {text!r}") from exc
    if len(vals) != n:
        raise SpecError(f"{flag} expects {n} reals, got {text!r}")
    return vals


# --------------------------------------------------------------------------
# validate

def cmd_validate(args) -> int:
    spec = _load(args)
    checks = []
    if spec.equation is None:
        raise SpecError("validate needs an [equation] or a solver block")
    if spec.domain is None:
        raise SpecError("validate needs a [domain]")
    n = _tol(spec, "n_samples", 21)
    hyp = check_hyperbolicity(spec.equation, spec.domain, n, _tol(spec, "eps_hyp", 1e-10), spec.pair)
    checks.append(hyp.as_dict())
    if spec.pair is not None:
        rep = validate_characteristics(
            spec.equation, spec.pair, spec.domain, n, _tol(spec, "tol_char", 1e-8), _tol(spec, "eps_jac", 1e-8)
        )
        checks.append(rep.as_dict())
    data = spec.solver_data
    warnings = []
    if spec.solver_kind == "mixed-wave":
        res = data.matching_residuals()
        checks.append({"check": "matching", "passed": data.matching_ok(), "residuals": res})
    if spec.solver_kind == "darboux":
        for w in data.growth_violations():
            warnings.append({"growth_bound_violated_at": w})
    passed = all(c["passed"] for c in checks)
    _emit({"spec": spec.name, "passed": passed, "checks": checks, "warnings": warnings}, args)
    return EXIT_OK if passed else EXIT_FAIL


# --------------------------------------------------------------------------
# solve

def _output_points(spec, args):
    """(x1, x2, lattice_shape or None)."""
    if getattr(args, "point", None):
        pts = np.array([_parse_reals(p, 2, "--point") for p in args.point])
        return pts[:, 0], pts[:, 1]
    if spec.points and not args.grid:
        pts = np.array(spec.points)
        return pts[:, 0], pts[:, 1]
    grid = _parse_grid(args.grid) if args.grid else (spec.grid or (21, 21))
    dom = spec.domain
    if dom is None:
        raise SpecError("a grid output needs a [domain]")
    s1 = np.linspace(0.0, 1.0, grid[0])
    s2 = np.linspace(0.0, 1.0, grid[1])
    if dom.kind == "sector":
        alpha, beta, lo, hi = dom.bounds
        X1 = lo + (hi - lo) * s1[:, None] + 0.0 * s2[None, :]
        X2 = X1 * (alpha + (beta - alpha) * s2[None, :])
    elif dom.kind in ("rectangle", "quadrant"):
        lo1, hi1, lo2, hi2 = dom.bounds
        X1, X2 = np.meshgrid(lo1 + (hi1 - lo1) * s1, lo2 + (hi2 - lo2) * s2, indexing="ij")
    else:
        raise SpecError(f"cannot lay out an output grid on a {dom.kind} domain")
    return X1.ravel(), X2.ravel()


def _run_solver(spec, args, x1=None, x2=None):
    """Returns (values or None, report dict, SolutionField, (x1, x2))."""
    kind, data = spec.solver_kind, spec.solver_data
    report = {"solver": kind}
    if kind == "goursat-linear":
        end = spec.solver_options["end"]
        grid = _parse_grid(args.grid) if args.grid else (spec.grid or (129, 129))
        try:
            res = solve_goursat_linear_picard(
                data,
                end[0],
                end[1],
                grid,
                _tol(spec, "picard_tol", 1e-10),
                _tol(spec, "max_picard", 200),
            )
        except ConvergenceError as exc:
            res = exc.result
            report.update(converged=False, error=str(exc))
        report.update(iterations=res.iterations, history=res.history, converged=res.converged, grid=list(grid))
        fld = res.field()
        if x1 is None:
            X1, X2 = np.meshgrid(res.x1_nodes, res.x2_nodes, indexing="ij")
            x1, x2 = X1.ravel(), X2.ravel()
            values = res.u.ravel()
        else:
            values = np.asarray(fld.value(x1, x2), dtype=float)
        return values, report, fld, (x1, x2)

    if x1 is None:
        x1, x2 = _output_points(spec, args)
    if kind == "goursat-wave":
        rule = _rule(spec, args)
        values = solve_goursat_wave(data, x1, x2, rule)
        fld = SolutionField.from_callables(lambda a, b: solve_goursat_wave(data, a, b, rule))
    elif kind == "mixed-wave":
        rule = _rule(spec, args)
        report["matching_residuals"] = data.matching_residuals()
        values = solve_mixed_wave(data, x1, x2, rule)
        fld = SolutionField.from_callables(lambda a, b: solve_mixed_wave(data, a, b, rule))
    elif kind == "darboux":
        opts = dict(
            rule=_rule(spec, args, 8),
            series_eps=_tol(spec, "series_eps", 1e-12),
            cascade_eps=_tol(spec, "cascade_eps", 1e-14),
            picard_tol=_tol(spec, "picard_tol", 1e-10),
            max_picard=_tol(spec, "max_picard", 200),
        )
        if "grid" in spec.solver_options:
            opts["grid"] = spec.solver_options["grid"]
        if spec.domain is not None and spec.domain.kind == "sector":
            opts["extent"] = max(spec.domain.bounds[3], float(np.max(x1)))
        try:
            sol = solve_darboux(data, x1, x2, **opts)
            report["converged"] = True
        except ConvergenceError as exc:
            sol = exc.result
            report.update(converged=False, error=str(exc))
        values = sol.value
        report.update(
            terms=sol.terms, n_terms=np.atleast_1d(sol.n_terms).tolist(), iterations=sol.iterations,
            history=sol.picard_history,
        )
        fld = sol.as_field()
    else:
        raise SpecError("solve needs a [solver] block with a kind other than none")
    return np.atleast_1d(np.asarray(values, dtype=float)), report, fld, (x1, x2)


def cmd_solve(args) -> int:
    spec = _load(args)
    pts = None
    if spec.solver_kind == "goursat-linear" and (getattr(args, "point", None) or (spec.points and not args.grid)):
        pts = _output_points(spec, args)
    values, report, _, (x1, x2) = _run_solver(spec, args, *(pts or (None, None)))
    report["spec"] = spec.name
    report["n_points"] = int(values.size)
    if spec.solution is not None:
        exact = np.broadcast_to(parse(spec.solution, ("x1", "x2")).evaluate({"x1": x1, "x2": x2}), values.shape)
        report["max_error"] = float(np.max(np.abs(values - exact)))
    if values.size <= 16:
        report["values"] = values.tolist()
    out = args.out or spec.output.get("csv")
    if out:
        write_csv(out, ("x1", "x2", "u"), (x1, x2, values))
        report["csv"] = str(out)
        _emit(report, args)
    else:
        sys.stdout.write("x1,x2,u\n")
        for row in zip(x1, x2, values):
            sys.stdout.write(",".join(f"{float(v):.17g}" for v in row) + "\n")
        _emit(report, args, sys.stderr)
    return EXIT_OK if report.get("converged", True) else EXIT_FAIL


# --------------------------------------------------------------------------
# check-identity

def _field_from_csv(path) -> SolutionField:
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    x1n = np.unique(data[:, 0])
    x2n = np.unique(data[:, 1])
    if x1n.size * x2n.size != data.shape[0]:
        raise SpecError(f"{path}: rows do not form a full tensor lattice")
    order = np.lexsort((data[:, 1], data[:, 0]))
    U = data[order, 2].reshape(x1n.size, x2n.size)
    return SolutionField.from_lattice(x1n, x2n, U)


def cmd_check_identity(args) -> int:
    spec = _load(args)
    if spec.equation is None or spec.pair is None:
        raise SpecError("check-identity needs an equation and a characteristic pair")
    if args.rect:
        rect = _parse_reals(args.rect, 4, "--rect")
    elif spec.check_rect:
        rect = spec.check_rect
    else:
        raise SpecError("no rectangle: pass --rect or add [check] rect")
    source = None
    if args.solution:
        if Path(args.solution).is_file():
            fld, source = _field_from_csv(args.solution), f"grid:{args.solution}"
        else:
            try:
                fld, source = SolutionField.from_exprs(parse(args.solution, ("x1", "x2"))), "expression"
            except ExprError as exc:
                raise SpecError(f"--solution: {exc}") from exc
    elif spec.solver_kind != "none":
        _, _, fld, _ = _run_solver(spec, args)
        source = f"solver:{spec.solver_kind}"
    elif spec.solution is not None:
        fld, source = SolutionField.from_exprs(spec.solution), "expression"
    else:
        raise SpecError("no solution: pass --solution, add [solution] u, or a solver block")
    tol = args.tol if args.tol is not None else _tol(spec, "identity_tol", 1e-8)
    rep = identity_residual(spec.equation, spec.pair, fld, CharRectangle(*rect), _rule(spec, args))
    out = rep.as_dict()
    out.update(spec=spec.name, solution_source=source, threshold=tol, passed=bool(abs(rep.residual) <= tol))
    _emit(out, args)
    return EXIT_OK if out["passed"] else EXIT_FAIL


# --------------------------------------------------------------------------
# trace

def cmd_trace(args) -> int:
    spec = _load(args)
    if spec.equation is None or spec.domain is None:
        raise SpecError("trace needs an [equation] and a rectangular [domain]")
    cfg = spec.trace or {}
    n = _parse_grid(args.grid)[0] if args.grid else cfg.get("n", 33)
    seed = args.seed if args.seed is not None else cfg.get("seed_x1")
    pair = trace_characteristics(spec.equation, spec.domain, seed, n)
    report = {
        "spec": spec.name,
        "n": n,
        "spacing": pair.spacing,
        "seed_x1": spec.domain.bounds[0] if seed is None else seed,
        "exited_nodes": int(np.count_nonzero(pair.exited)),
    }
    out = args.out or spec.output.get("csv")
    if out:
        pair.to_csv(out)
        report["csv"] = str(out)
    _emit(report, args)
    return EXIT_OK


def cmd_list_examples(args) -> int:
    for name, text in examples().items():
        first = text.splitlines()[0]
        desc = first[1:].strip() if first.startswith("#") else ""
        print(f"{name:24s} {desc}")
    return EXIT_OK


# --------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="charpar", description="Characteristic parallelogram toolkit")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, solve_opts=False):
        sp.add_argument("spec", nargs="?", help="problem spec file")
        sp.add_argument("--example", metavar="NAME", help="use a built-in example instead of a file")
        sp.add_argument("--json-report", metavar="PATH", help="write the JSON report here instead of stdout")
        sp.add_argument("--tol", type=float, help="pass/fail threshold")
        sp.add_argument("--quad-points", type=int, help="Gauss points per axis")
        sp.add_argument("--panels", type=int, help="quadrature panels per axis")
        sp.add_argument("--grid", help="grid size N or N1xN2")
        sp.add_argument("--out", metavar="PATH", help="CSV output path")

    sp = sub.add_parser("validate", help="hyperbolicity and characteristic checks")
    common(sp)
    sp.set_defaults(func=cmd_validate)

    sp = sub.add_parser("check-identity", help="both sides of the parallelogram identity")
    common(sp)
    sp.add_argument("--rect", help="l1,l2,r1,r2 in characteristic coordinates")
    sp.add_argument("--solution", help="expression in x1, x2 or a CSV lattice x1,x2,u")
    sp.set_defaults(func=cmd_check_identity)

    sp = sub.add_parser("solve", help="run the solver block")
    common(sp)
    sp.add_argument("--point", action="append", help="x1,x2 (repeatable)")
    sp.set_defaults(func=cmd_solve)

    sp = sub.add_parser("trace", help="trace characteristics numerically")
    common(sp)
    sp.add_argument("--seed", type=float, help="seed column x1")
    sp.set_defaults(func=cmd_trace)

    sp = sub.add_parser("list-examples", help="list built-in example specs")
    sp.set_defaults(func=cmd_list_examples)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except SpecError as exc:
        print(f"spec error: {exc}", file=sys.stderr)
        return EXIT_SPEC
    except NUMERIC_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except (ValueError, ExprError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
