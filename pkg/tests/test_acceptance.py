"""End-to-end acceptance checks, one group per criterion."""

import math
import subprocess
import sys

import numpy as np
import pytest

from charpar import catalog
from charpar.exprlang import BinOp, parse, substitute
from charpar.parallelogram import (
    CharRectangle,
    SolutionField,
    alternating_sum,
    converse_probe,
    identity_residual,
    vertices,
)
from charpar.characteristics import trace_characteristics
from charpar.problem import DomainSpec, EquationSpec
from charpar.quadrature import QuadratureRule, integrate2d
from charpar.solvers import (
    DarbouxData,
    GoursatWaveData,
    LinearGoursatData,
    MixedWaveData,
    darboux_cascade,
    solve_darboux,
    solve_goursat_linear_picard,
    solve_goursat_wave,
    solve_mixed_wave,
    wave_pair,
)

from oracles import darboux_grid_oracle

GAUSS16 = QuadratureRule(points_per_axis=16)


def random_rects(window, n, seed):
    l1, l2, r1, r2 = window
    rng = np.random.default_rng(seed)
    for _ in range(n):
        a, b = np.sort(rng.uniform(l1, l2, 2))
        c, d = np.sort(rng.uniform(r1, r2, 2))
        yield CharRectangle(a, b, c, d)


# 1 -----------------------------------------------------------------------------

C1 = pytest.mark.criterion(1, "identity holds on random sub-rectangles of the catalog triples")


@C1
@pytest.mark.parametrize("entry", catalog.triples(), ids=lambda e: e.name)
def test_c01_identity_forward(entry):
    pair, field = entry.pair(), entry.field()
    worst = max(
        abs(identity_residual(entry.equation, pair, field, r, GAUSS16, entry.domain).residual)
        for r in random_rects(entry.char_window, 50, 100)
    )
    assert worst <= 1e-10, worst


@C1
def test_c01_exponential_closed_form():
    e = catalog.mixed_derivative()
    for r in random_rects(e.char_window, 50, 101):
        exact = (math.exp(r.l2) - math.exp(r.l1)) * (math.exp(r.r2) - math.exp(r.r1))
        rep = identity_residual(e.equation, e.pair(), e.field(), r, GAUSS16)
        assert abs(rep.lhs - exact) <= 1e-12 and abs(rep.rhs - exact) <= 1e-12


# 2 -----------------------------------------------------------------------------

C2 = pytest.mark.criterion(2, "converse probe recovers the defect and vanishes on solutions")
SIZES = [(0.2 / 2**k, 0.2 / 2**k) for k in range(6)]


@C2
def test_c02_wave_defect():
    e = catalog.wave(1.0)
    rep = converse_probe(e.equation, e.pair(), SolutionField.from_exprs("x1^2"), (0.1, 0.2), SIZES)
    assert abs(rep.limit - (-0.5)) <= 1e-4


@C2
def test_c02_mixed_derivative_defect():
    eq = EquationSpec.from_strings("0", "1/2", "0", "0")
    pair = catalog.mixed_derivative().pair()
    rep = converse_probe(eq, pair, SolutionField.from_exprs("x1*x2"), (0.3, -0.1), SIZES)
    assert abs(rep.limit - 1.0) <= 1e-4


@C2
@pytest.mark.parametrize("entry", catalog.triples(), ids=lambda e: e.name)
def test_c02_solutions_decay(entry):
    l1, _, r1, _ = entry.char_window
    if entry.name == "wave":
        # homogeneous wave: the vertex sum itself is zero up to rounding
        rep = converse_probe(entry.equation, entry.pair(), entry.field(), (l1, r1), SIZES, rhs="corner")
        assert max(abs(s) * l * r for s, (l, r) in zip(rep.scaled_residuals, rep.sizes)) <= 1e-15
        return
    rep = converse_probe(entry.equation, entry.pair(), entry.field(), (l1, r1), SIZES[:5], rhs="corner")
    assert rep.observed_order() >= 0.9
    exact = converse_probe(entry.equation, entry.pair(), entry.field(), (l1, r1), SIZES[:3])
    assert max(abs(s) for s in exact.scaled_residuals) <= 1e-8


# 3 -----------------------------------------------------------------------------

WAVE_PROFILES = [
    ("sin(3*t)", "t^3 - 2*t"),
    ("exp(t/2)", "cos(t)"),
    ("t^5/10", "sin(t)*t"),
    ("cos(2*t) + t^2", "exp(-t^2)"),
    ("tanh(t)", "t^4 - t"),
]


@pytest.mark.criterion(3, "alternating vertex sum vanishes for travelling waves")
@pytest.mark.parametrize("k", range(len(WAVE_PROFILES)))
def test_c03_wave_parallelogram(k):
    F, G = WAVE_PROFILES[k]
    a = float(np.random.default_rng(30 + k).uniform(0.5, 3.0))
    pair = wave_pair(a)
    xs = ("x1", "x2")
    u = BinOp(
        "+",
        substitute(parse(F, ["t"]), {"t": parse(f"x2 - {a!r}*x1", xs)}),
        substitute(parse(G, ["t"]), {"t": parse(f"x2 + {a!r}*x1", xs)}),
    )
    field = SolutionField.from_exprs(u)
    worst = max(abs(alternating_sum(field, vertices(r, pair))) for r in random_rects((-1, 1, -1, 1), 100, 3))
    assert worst <= 1e-12, worst


# 4 -----------------------------------------------------------------------------

C4 = pytest.mark.criterion(4, "Goursat wave solver reproduces manufactured solutions")


def sector_points(a, n, seed):
    rng = np.random.default_rng(seed)
    x1 = rng.uniform(0.05, 2.0, n)
    return x1, a * x1 * rng.uniform(-0.99, 0.99, n)


@C4
def test_c04_product():
    a = 1.5
    x1, x2 = sector_points(a, 20, 40)
    u = solve_goursat_wave(GoursatWaveData(a, f"{a!r}*t^2", f"-{a!r}*t^2"), x1, x2)
    assert np.max(np.abs(u - x1 * x2)) <= 1e-12


@C4
def test_c04_forced():
    a = 1.5
    x1, x2 = sector_points(a, 20, 41)
    data = GoursatWaveData(a, f"{a!r}*t^3", f"-{a!r}*t^3", "2*x2")
    assert np.max(np.abs(solve_goursat_wave(data, x1, x2) - x1**2 * x2)) <= 1e-10


# 5 -----------------------------------------------------------------------------

C5 = pytest.mark.criterion(5, "mixed problem: both regions, continuity, mismatch jump")
A5 = 1.5


def mixed(mu="t^2"):
    return MixedWaveData(A5, "t^2", "0", mu, f"2 - 2*{A5!r}^2")


@C5
def test_c05_both_sides():
    rng = np.random.default_rng(50)
    x1, x2 = rng.uniform(0, 2, 400), rng.uniform(0, 2, 400)
    above = x2 >= A5 * x1
    assert above.sum() > 50 and (~above).sum() > 50
    assert np.max(np.abs(solve_mixed_wave(mixed(), x1, x2) - (x1**2 + x2**2))) <= 1e-10


@C5
def test_c05_continuity():
    data = MixedWaveData(A5, "t^2 + sin(t)", "cos(t)", "t^2 + t", f"2 - 2*{A5!r}^2")
    assert data.matching_ok()
    x1 = np.linspace(0.01, 1.3, 60)
    up = solve_mixed_wave(data, x1, A5 * x1, branch="dalembert")
    lo = solve_mixed_wave(data, x1, A5 * x1, branch="reflected")
    assert np.max(np.abs(up - lo)) <= 1e-9


@C5
def test_c05_jump():
    data = mixed("t^2 + 0.1")
    x1 = np.linspace(0.01, 1.3, 60)
    jump = solve_mixed_wave(data, x1, A5 * x1, branch="reflected") - solve_mixed_wave(data, x1, A5 * x1, branch="dalembert")
    assert np.max(np.abs(jump - 0.1)) <= 1e-9


# 6 -----------------------------------------------------------------------------

C6 = pytest.mark.criterion(6, "Darboux cascade geometry")


@C6
def test_c06_powers_of_two():
    steps = darboux_cascade((0.5, 2.0), (1.0, 1.0))
    assert len(steps) > 40
    for n in range(1, 41):
        assert steps[n - 1].P_next == (2.0**-n, 2.0**-n)


@C6
@pytest.mark.parametrize("alpha,beta,P0", [(0.5, 2.0, (1.0, 1.3)), (0.3, 1.7, (1.0, 1.2)), (0.9, 1.1, (2.0, 2.1))])
def test_c06_two_step_ratio(alpha, beta, P0):
    x = [s.P[0] for s in darboux_cascade((alpha, beta), P0)]
    ratios = np.array(x[2:]) / np.array(x[:-2])
    assert np.max(np.abs(ratios - alpha / beta)) <= 1e-14


# 7 -----------------------------------------------------------------------------

C7 = pytest.mark.criterion(7, "Darboux series agrees with a grid oracle and converges")


@C7
def test_c07_series_vs_oracle():
    rng = np.random.default_rng(70)
    x1 = rng.uniform(0.05, 1.0, 30)
    x2 = x1 * rng.uniform(0.5, 2.0, 30)
    u = solve_darboux(DarbouxData(0.5, 2.0, f="1"), x1, x2).value
    ref = darboux_grid_oracle(0.5, 2.0, lambda a, b: a * b, x1, x2)
    assert np.max(np.abs(u - ref)) <= 1e-8


@C7
def test_c07_term_ratio():
    rng = np.random.default_rng(71)
    for _ in range(20):
        x1 = rng.uniform(0.05, 1.0)
        x2 = x1 * rng.uniform(0.55, 1.95)
        t = np.abs(solve_darboux(DarbouxData(0.5, 2.0, f="1"), x1, x2).terms)
        assert len(t) > 2 and np.all(t[1:] / t[:-1] < 1)


# 8 -----------------------------------------------------------------------------

C8 = pytest.mark.criterion(8, "Picard iteration for the linear Goursat problem")


def picard_exp(n):
    data = LinearGoursatData((0.0, 0.0), c_lo="1", f="2*exp(x1 + x2)", phi="exp(t)", psi="exp(t)")
    r = solve_goursat_linear_picard(data, 1.0, 1.0, n)
    X1, X2 = np.meshgrid(r.x1_nodes, r.x2_nodes, indexing="ij")
    return float(np.max(np.abs(r.u - np.exp(X1 + X2)))), r


@C8
def test_c08_accuracy_and_order():
    errs = [picard_exp(n)[0] for n in (33, 65, 129)]
    assert errs[-1] <= 5e-4
    assert errs[0] / errs[1] >= 3.5 and errs[1] / errs[2] >= 3.5


@C8
def test_c08_single_iteration():
    data = LinearGoursatData((0.0, 0.0), f="x1 + x2", phi="sin(t)", psi="t^2")
    assert solve_goursat_linear_picard(data, 1.0, 1.0, 65).iterations == 1


# 9 -----------------------------------------------------------------------------

C9 = pytest.mark.criterion(9, "every solver output passes the identity audit")


@C9
def test_c09_goursat_wave():
    a = 1.5
    data = GoursatWaveData(a, f"{a!r}*t^3", f"-{a!r}*t^3", "2*x2")
    field = SolutionField.from_callables(lambda p, q: solve_goursat_wave(data, p, q))
    # y1 = x2 - a x1 <= 0 <= y2 = x2 + a x1 inside the sector
    for r in random_rects((-2, 0, 0, 2), 10, 90):
        assert abs(identity_residual(data.equation(), data.pair(), field, r).residual) <= 1e-10


@C9
def test_c09_mixed_wave():
    data = MixedWaveData(A5, "t^2 + sin(t)", "cos(t)", "t^2 + t", f"2 - 2*{A5!r}^2")
    field = SolutionField.from_callables(lambda p, q: solve_mixed_wave(data, p, q))
    # windows with y2 >= -y1 + margin and y2 >= y1 keep the images in the quadrant
    for r in random_rects((-1, 1, 1.1, 3), 10, 91):
        assert abs(identity_residual(data.equation(), data.pair(), field, r).residual) <= 1e-10


@C9
def test_c09_darboux_series():
    d = DarbouxData(0.5, 2.0, f="cos(x1)*exp(x2)")
    field = SolutionField.from_callables(lambda p, q: solve_darboux(d, p, q).value)
    for r in random_rects((0.5, 1.0, 0.55, 0.95), 5, 92):
        assert abs(identity_residual(d.equation(), d.pair(), field, r).residual) <= 1e-10


@C9
def test_c09_darboux_grid():
    d = DarbouxData(0.5, 2.0, lam=0.1, g="u", f="1")
    pts = (np.array([1.0, 0.8, 0.6]), np.array([1.0, 1.2, 0.5]))
    coarse = solve_darboux(d, *pts)
    fine = solve_darboux(d, *pts, grid=(65, 33))
    grid_err = float(np.max(np.abs(coarse.value - fine.value)))
    field = SolutionField.from_callables(coarse)
    for r in random_rects((0.5, 1.0, 0.55, 0.95), 5, 93):
        assert abs(identity_residual(d.equation(), d.pair(), field, r).residual) <= 10 * grid_err


@C9
def test_c09_picard():
    err, res = picard_exp(129)
    data = LinearGoursatData((0.0, 0.0), c_lo="1", f="2*exp(x1 + x2)", phi="exp(t)", psi="exp(t)")
    field = res.field()
    for r in random_rects((0.0, 1.0, 0.0, 1.0), 10, 94):
        assert abs(identity_residual(data.equation(), data.pair(), field, r).residual) <= 10 * err


# 10 ----------------------------------------------------------------------------

C10 = pytest.mark.criterion(10, "infrastructure: diff, quadrature, tracing, CLI determinism")


@C10
def test_c10_symbolic_diff():
    rng = np.random.default_rng(100)
    h = 1e-5
    for entry in catalog.all_entries():
        eq = entry.equation
        lo1, hi1, lo2, hi2 = entry.domain.bounds
        env = {"x1": rng.uniform(lo1, hi1, 100), "x2": rng.uniform(lo2, hi2, 100),
               "u": rng.uniform(-1, 1, 100), "p": rng.uniform(-1, 1, 100), "q": rng.uniform(-1, 1, 100)}
        exprs = [eq.a, eq.b, eq.c, eq.f, parse(entry.solution, ["x1", "x2"])]
        exprs += [parse(g, ["x1", "x2"]) for g in entry.gamma_strings]
        for e in exprs:
            for v in sorted(e.variables()):
                d = np.broadcast_to(e.diff(v).evaluate(env), env["x1"].shape)
                fd = (e.evaluate(dict(env, **{v: env[v] + h})) - e.evaluate(dict(env, **{v: env[v] - h}))) / (2 * h)
                assert np.max(np.abs(d - fd) / np.maximum(1, np.abs(fd))) <= 1e-6


@C10
def test_c10_quadrature_exactness():
    for n in (1, 2, 4, 8, 16):
        rule = QuadratureRule(points_per_axis=n)
        d = 2 * n - 1
        exact = (2.0 ** (d + 1) - (-1.0) ** (d + 1)) / (d + 1) * (1.5 ** (d + 1) - 0.5 ** (d + 1)) / (d + 1)
        val = integrate2d(lambda a, b: a**d * b**d, (-1, 2, 0.5, 1.5), rule)
        assert abs(val - exact) <= 1e-13 * abs(exact)


@C10
def test_c10_tracing():
    wave = EquationSpec.from_strings("1", "0", "-2.25")
    pair = trace_characteristics(wave, DomainSpec.rectangle(0, 1, 0, 1), n=17)
    X1, X2 = np.meshgrid(pair.x1_nodes, pair.x2_nodes, indexing="ij")
    # RK4 is exact on straight characteristics
    assert np.max(np.abs(pair.g1_values - (X2 - 1.5 * X1))) <= 1e-14
    assert np.max(np.abs(pair.g2_values - (X2 + 1.5 * X1))) <= 1e-14
    curved = EquationSpec.from_strings("1", "0", "-x2^2")
    dom = DomainSpec.rectangle(0, 1, 0.5, 1.5)
    errs = []
    for n in (9, 17, 33):
        p = trace_characteristics(curved, dom, n=n)
        Y1, Y2 = np.meshgrid(p.x1_nodes, p.x2_nodes, indexing="ij")
        errs.append(max(np.max(np.abs(p.g1_values - Y2 * np.exp(-Y1))), np.max(np.abs(p.g2_values - Y2 * np.exp(Y1)))))
    assert min(np.log2(errs[0] / errs[1]), np.log2(errs[1] / errs[2])) >= 3.5


@C10
def test_c10_cli_determinism(tmp_path):
    blobs = []
    for k in range(2):
        out = tmp_path / f"u{k}.csv"
        subprocess.run(
            [sys.executable, "-m", "charpar.cli", "solve", "--example", "mixed-wave", "--out", str(out),
             "--json-report", str(tmp_path / f"r{k}.json")],
            check=True,
        )
        blobs.append(out.read_bytes())
    assert blobs[0] == blobs[1] and len(blobs[0].splitlines()) == 2602
