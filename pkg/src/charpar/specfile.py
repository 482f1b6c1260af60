"""Problem-spec files: sectioned key/value text read with configparser.

Grammar (``#`` starts a comment, keys are case-insensitive)::

    [equation]          a, b, c over (x1, x2); f over (x1, x2, u, p, q)
    [characteristics]   gamma1, gamma2 and optionally inverse.x1, inverse.x2
                        over (y1, y2); or trace = yes with seed_x1, n
    [domain]            kind = rectangle | char-rectangle | sector | quadrant
                        bounds = four comma-separated reals
    [solver]            kind = goursat-wave | mixed-wave | darboux |
                        goursat-linear | none, plus that solver's data keys
    [solution]          u = exact solution (error reports, check-identity)
    [check]             rect = l1, l2, r1, r2 (default for check-identity)
    [tolerances]        overrides of numeric defaults
    [output]            grid = N1, N2 ; points = x1 x2; x1 x2 ; csv ; report

Solver data keys:

    goursat-wave    speed, phi1, phi2 (over t), f (over x1, x2)
    mixed-wave      speed, phi, psi, mu (over t), f
    darboux         alpha, beta, lambda, g (over x1, x2, u), f, L1, L2,
                    grid = Ns, Ntheta
    goursat-linear  corner = x1, x2 ; end = X1, X2 ; a_lo, b_lo, c_lo, f ;
                    phi, psi (over t)

When a solver block is present, [equation] and [characteristics] may be
omitted and are then derived from the solver data.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from .characteristics import CharacteristicPair
from .exprlang import ExprError, parse
from .problem import DomainSpec, EquationSpec
from .solvers import DarbouxData, GoursatWaveData, LinearGoursatData, MixedWaveData

SOLVER_KINDS = ("goursat-wave", "mixed-wave", "darboux", "goursat-linear", "none")

TOLERANCE_KEYS = {
    "tol_char": float,
    "eps_jac": float,
    "eps_hyp": float,
    "tol_inv": float,
    "identity_tol": float,
    "picard_tol": float,
    "max_picard": int,
    "series_eps": float,
    "cascade_eps": float,
    "quad_points": int,
    "panels": int,
    "n_samples": int,
}


class SpecError(ValueError):
    """The spec file is malformed; maps to exit code 2."""


@dataclass
class ProblemSpec:
    name: str
    equation: EquationSpec | None
    pair: object | None
    trace: dict | None
    domain: DomainSpec | None
    solver_kind: str
    solver_data: object | None
    solution: str | None
    check_rect: tuple[float, float, float, float] | None
    tolerances: dict = field(default_factory=dict)
    grid: tuple[int, int] | None = None
    points: list[tuple[float, float]] | None = None
    solver_options: dict = field(default_factory=dict)
    output: dict = field(default_factory=dict)


def _floats(text: str, n: int | None, what: str) -> tuple[float, ...]:
    try:
        vals = tuple(float(v) for v in text.replace(",", " ").split())
    except ValueError as exc:
        raise SpecError(f"{what}: expected numbers, got {text!r}") from exc
    if n is not None and len(vals) != n:
        raise SpecError(f"{what}: expected {n} numbers, got {len(vals)}")
    return vals


def _ints(text: str, n: int, what: str) -> tuple[int, ...]:
    vals = _floats(text, None, what)
    if len(vals) == 1:
        vals = vals * n
    if len(vals) != n or any(v != int(v) or v < 1 for v in vals):
        raise SpecError(f"{what}: expected {n} positive integers, got {text!r}")
    return tuple(int(v) for v in vals)


def parse_points(text: str) -> list[tuple[float, float]]:
    """``x1 x2; x1 x2`` (commas allowed inside a pair)."""
    return [tuple(_floats(chunk, 2, "point")) for chunk in text.split(";") if chunk.strip()]


def _check_expr(text: str, variables, where: str):
    try:
        parse(text, variables)
    except ExprError as exc:
        raise SpecError(f"{where}: {exc}") from exc
    return text


def _section(cp, name):
    return cp[name] if cp.has_section(name) else {}


def _solver(sec, kind):
    def get(key, default=None, variables=("x1", "x2")):
        if key not in sec:
            if default is None:
                raise SpecError(f"[solver] kind={kind} needs key {key!r}")
            return default
        return _check_expr(sec[key], variables, f"[solver] {key}")

    def num(key, default=None):
        if key not in sec:
            if default is None:
                raise SpecError(f"[solver] kind={kind} needs key {key!r}")
            return default
        return _floats(sec[key], 1, f"[solver] {key}")[0]

    t = ("t",)
    options = {}
    if kind == "goursat-wave":
        data = GoursatWaveData(num("speed"), get("phi1", variables=t), get("phi2", variables=t), get("f", "0"))
    elif kind == "mixed-wave":
        data = MixedWaveData(
            num("speed"), get("phi", variables=t), get("psi", "0", t), get("mu", variables=t), get("f", "0")
        )
    elif kind == "darboux":
        L1 = num("l1", float("nan"))
        L2 = num("l2", float("nan"))
        data = DarbouxData(
            num("alpha"),
            num("beta"),
            num("lambda", 0.0),
            get("g", "0", ("x1", "x2", "u")),
            get("f", "0"),
            None if L1 != L1 else L1,
            None if L2 != L2 else L2,
        )
        if "grid" in sec:
            options["grid"] = _ints(sec["grid"], 2, "[solver] grid")
    elif kind == "goursat-linear":
        data = LinearGoursatData(
            _floats(sec.get("corner", "0, 0"), 2, "[solver] corner"),
            get("a_lo", "0"),
            get("b_lo", "0"),
            get("c_lo", "0"),
            get("f", "0"),
            get("phi", variables=t),
            get("psi", variables=t),
        )
        if "end" not in sec:
            raise SpecError("[solver] kind=goursat-linear needs key 'end'")
        options["end"] = _floats(sec["end"], 2, "[solver] end")
    else:
        return None, options
    return data, options


def loads(text: str, name: str = "<string>") -> ProblemSpec:
    cp = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    try:
        cp.read_string(text, source=name)
    except configparser.Error as exc:
        raise SpecError(f"{name}: {exc}") from exc
    known = {"equation", "characteristics", "domain", "solver", "solution", "check", "tolerances", "output"}
    unknown = set(cp.sections()) - known
    if unknown:
        raise SpecError(f"unknown section(s): {', '.join(sorted(unknown))}")
    try:
        return _build(cp, name)
    except SpecError:
        raise
    except ExprError as exc:
        raise SpecError(str(exc)) from exc
    except ValueError as exc:
        raise SpecError(str(exc)) from exc


def _build(cp, name) -> ProblemSpec:
    sol = _section(cp, "solver")
    kind = sol.get("kind", "none").strip()
    if kind not in SOLVER_KINDS:
        raise SpecError(f"[solver] kind must be one of {', '.join(SOLVER_KINDS)}, got {kind!r}")
    data, options = _solver(sol, kind)

    eq = None
    if cp.has_section("equation"):
        sec = cp["equation"]
        for k in ("a", "b", "c"):
            if k not in sec:
                raise SpecError(f"[equation] needs key {k!r}")
            _check_expr(sec[k], ("x1", "x2"), f"[equation] {k}")
        _check_expr(sec.get("f", "0"), ("x1", "x2", "u", "p", "q"), "[equation] f")
        eq = EquationSpec.from_strings(sec["a"], sec["b"], sec["c"], sec.get("f", "0"))
    elif data is not None:
        eq = data.equation()

    dom = None
    if cp.has_section("domain"):
        sec = cp["domain"]
        if "kind" not in sec or "bounds" not in sec:
            raise SpecError("[domain] needs 'kind' and 'bounds'")
        dom = DomainSpec(sec["kind"].strip(), _floats(sec["bounds"], 4, "[domain] bounds"))

    pair = trace = None
    if cp.has_section("characteristics"):
        sec = cp["characteristics"]
        if sec.get("trace", "no").strip().lower() in ("yes", "true", "1", "on"):
            trace = {"seed_x1": float(sec["seed_x1"]) if "seed_x1" in sec else None, "n": int(sec.get("n", "33"))}
        else:
            if "gamma1" not in sec or "gamma2" not in sec:
                raise SpecError("[characteristics] needs gamma1 and gamma2, or trace = yes")
            g1 = _check_expr(sec["gamma1"], ("x1", "x2"), "[characteristics] gamma1")
            g2 = _check_expr(sec["gamma2"], ("x1", "x2"), "[characteristics] gamma2")
            inv = None
            if "inverse.x1" in sec or "inverse.x2" in sec:
                inv = (
                    _check_expr(sec.get("inverse.x1", ""), ("y1", "y2"), "[characteristics] inverse.x1"),
                    _check_expr(sec.get("inverse.x2", ""), ("y1", "y2"), "[characteristics] inverse.x2"),
                )
            elif dom is None:
                raise SpecError("[characteristics] without an inverse needs a [domain] for the Newton table")
            pair = CharacteristicPair(g1, g2, inv, dom)
    elif data is not None:
        pair = data.pair()

    solution = None
    if cp.has_section("solution") and "u" in cp["solution"]:
        solution = _check_expr(cp["solution"]["u"], ("x1", "x2"), "[solution] u")

    check_rect = None
    if cp.has_section("check") and "rect" in cp["check"]:
        check_rect = _floats(cp["check"]["rect"], 4, "[check] rect")

    tolerances = {}
    for key, value in _section(cp, "tolerances").items():
        if key not in TOLERANCE_KEYS:
            raise SpecError(f"[tolerances] unknown key {key!r}")
        try:
            tolerances[key] = TOLERANCE_KEYS[key](value)
        except ValueError as exc:
            raise SpecError(f"[tolerances] {key}: {exc}") from exc

    out = dict(_section(cp, "output"))
    grid = _ints(out.pop("grid"), 2, "[output] grid") if "grid" in out else None
    points = parse_points(out.pop("points")) if "points" in out else None

    return ProblemSpec(name, eq, pair, trace, dom, kind, data, solution, check_rect, tolerances, grid, points, options, out)


def load(path) -> ProblemSpec:
    p = Path(path)
    try:
        text = p.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"cannot read {p}: {exc}") from exc
    return loads(text, str(p))


# --------------------------------------------------------------------------
# built-in examples

def _catalog_spec(entry) -> str:
    eq = entry.equation
    from .exprlang import to_source

    lines = [
        f"# {entry.description}",
        "[equation]",
        f"a = {to_source(eq.a)}",
        f"b = {to_source(eq.b)}",
        f"c = {to_source(eq.c)}",
        f"f = {to_source(eq.f)}",
        "[characteristics]",
        f"gamma1 = {entry.gamma_strings[0]}",
        f"gamma2 = {entry.gamma_strings[1]}",
        f"inverse.x1 = {entry.inverse_strings[0]}",
        f"inverse.x2 = {entry.inverse_strings[1]}",
        "[domain]",
        f"kind = {entry.domain.kind}",
        "bounds = " + ", ".join(repr(v) for v in entry.domain.bounds),
        "[solution]",
        f"u = {entry.solution}",
        "[check]",
        "rect = " + ", ".join(repr(v) for v in entry.char_window),
    ]
    return "\n".join(lines) + "\n"


_EXTRA = {
    "parabolic": """
# u_11 = 0 is parabolic everywhere; validation must fail
[equation]
a = 1
b = 0
c = 0
f = 0
[domain]
kind = rectangle
bounds = 0, 1, 0, 1
""",
    "wrong-characteristics": """
# wave equation with a first integral of the wrong slope
[equation]
a = 1
b = 0
c = -1
f = 0
[characteristics]
gamma1 = x2 - 2*x1
gamma2 = x2 + x1
inverse.x1 = (y2 - y1)/3
inverse.x2 = (y1 + 2*y2)/3
[domain]
kind = rectangle
bounds = -1, 1, -1, 1
""",
    "goursat-wave": """
# u_11 - 2.25 u_22 = 0 with data on x2 = +-1.5 x1; exact u = x1 x2
[solver]
kind = goursat-wave
speed = 1.5
phi1 = 1.5*t^2
phi2 = -1.5*t^2
f = 0
[domain]
kind = sector
bounds = -1.5, 1.5, 0, 1
[solution]
u = x1*x2
[check]
rect = -1, -0.25, 0.25, 1
[output]
grid = 21, 21
""",
    "goursat-wave-forced": """
# u_11 - 2.25 u_22 = 2 x2; exact u = x1^2 x2
[solver]
kind = goursat-wave
speed = 1.5
phi1 = 1.5*t^3
phi2 = -1.5*t^3
f = 2*x2
[domain]
kind = sector
bounds = -1.5, 1.5, 0, 1
[solution]
u = x1^2*x2
[check]
rect = -1, -0.25, 0.25, 1
[output]
grid = 21, 21
""",
    "mixed-wave": """
# first mixed problem for u_11 - 2.25 u_22 = 2 - 2*2.25; exact u = x1^2 + x2^2
[solver]
kind = mixed-wave
speed = 1.5
phi = t^2
psi = 0
mu = t^2
f = 2 - 2*2.25
[domain]
kind = quadrant
bounds = 0, 1, 0, 1
[solution]
u = x1^2 + x2^2
[check]
rect = -1, 0.5, 1, 2
[output]
grid = 51, 51
""",
    "mixed-wave-mismatch": """
# as mixed-wave but mu(0) - phi(0) = 0.1; the solution jumps across x2 = 1.5 x1
[solver]
kind = mixed-wave
speed = 1.5
phi = t^2
psi = 0
mu = t^2 + 0.1
f = 2 - 2*2.25
[domain]
kind = quadrant
bounds = 0, 1, 0, 1
[output]
grid = 11, 11
""",
    "darboux": """
# u_12 = 1 vanishing on x2 = x1/2 and x2 = 2 x1; u(1, 1) = 1/5
[solver]
kind = darboux
alpha = 0.5
beta = 2
lambda = 0
f = 1
[domain]
kind = sector
bounds = 0.5, 2, 0, 1
[solution]
u = x1*x2 - 0.4*x1^2 - 0.4*x2^2
[check]
rect = 0.6, 0.9, 0.7, 1.0
[output]
points = 1 1; 0.5 0.6
""",
    "darboux-nonlinear": """
# u_12 = 1 - 0.1 u in the same sector, solved by fixed-point sweeps
[solver]
kind = darboux
alpha = 0.5
beta = 2
lambda = 0.1
g = u
f = 1
L1 = 0
L2 = 1
grid = 33, 17
[domain]
kind = sector
bounds = 0.5, 2, 0, 1
[check]
rect = 0.6, 0.9, 0.7, 1.0
[output]
points = 1 1; 0.5 0.6
""",
    "goursat-linear": """
# u_12 + u = 2 exp(x1 + x2) on [0,1]^2 with exact traces; exact u = exp(x1 + x2)
[solver]
kind = goursat-linear
corner = 0, 0
end = 1, 1
c_lo = 1
f = 2*exp(x1 + x2)
phi = exp(t)
psi = exp(t)
[domain]
kind = rectangle
bounds = 0, 1, 0, 1
[solution]
u = exp(x1 + x2)
[check]
rect = 0.1, 0.9, 0.2, 0.8
[tolerances]
# ten times the O(h^2) grid error at 129 x 129
identity_tol = 5e-4
[output]
grid = 129, 129
""",
    "goursat-linear-pure": """
# u_12 = x1 + x2 with zero lower-order terms; one Picard application is exact
[solver]
kind = goursat-linear
corner = 0, 0
end = 1, 1
f = x1 + x2
phi = 0
psi = 0
[domain]
kind = rectangle
bounds = 0, 1, 0, 1
[solution]
u = (x1^2*x2 + x1*x2^2)/2
[output]
grid = 33, 33
""",
    "trace-exp-speed": """
# trace the characteristics of u_11 - x2^2 u_22 = 0 from the column x1 = 0
[equation]
a = 1
b = 0
c = -x2^2
f = 0
[characteristics]
trace = yes
seed_x1 = 0
n = 33
[domain]
kind = rectangle
bounds = 0, 1, 0.5, 1.5
""",
}


def examples() -> dict[str, str]:
    """Name -> spec text of every built-in example."""
    from .catalog import all_entries

    out = {e.name: _catalog_spec(e) for e in all_entries()}
    out.update({k: v.lstrip("\n") for k, v in _EXTRA.items()})
    return out


def example(name: str) -> ProblemSpec:
    table = examples()
    if name not in table:
        raise SpecError(f"unknown example {name!r}; try list-examples")
    return loads(table[name], f"example:{name}")
