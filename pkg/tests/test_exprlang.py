import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from charpar import catalog
from charpar.exprlang import (
    BinOp,
    Call,
    Const,
    DomainEvaluationError,
    EvaluationError,
    MissingBindingError,
    Neg,
    Num,
    ParseError,
    UnknownIdentifierError,
    Var,
    is_constant_zero,
    parse,
    simplify,
    substitute,
    to_source,
)

XY = ["x1", "x2"]


def test_parse_wave_characteristic():
    e = parse("x2 - 1*x1", XY)
    assert e.evaluate({"x1": 3.0, "x2": 5.0}) == 2.0
    assert e.variables() == {"x1", "x2"}


def test_parse_constant_zero():
    e = parse("0", [])
    assert is_constant_zero(e)
    assert e.evaluate({}) == 0.0


def test_syntax_error_reports_offset_and_hint():
    with pytest.raises(ParseError) as info:
        parse("x1 +", ["x1"])
    assert info.value.offset == 4
    assert info.value.expected


@pytest.mark.parametrize("src,offset", [("(x1", 3), ("x1 ** 2", 4), ("sin x1", 4), ("1 2", 2)])
def test_syntax_error_offsets(src, offset):
    with pytest.raises(ParseError) as info:
        parse(src, ["x1"])
    assert info.value.offset == offset


def test_unknown_identifier_lists_declared():
    with pytest.raises(UnknownIdentifierError) as info:
        parse("x1 + y1", XY)
    assert "x1, x2" in str(info.value)
    assert info.value.offset == 5


def test_empty_source_rejected():
    with pytest.raises(ParseError):
        parse("   ", XY)


@pytest.mark.parametrize(
    "src,value",
    [
        ("-2^2", -4.0),
        ("2^3^2", 512.0),
        ("8/4/2", 1.0),
        ("1-2-3", -4.0),
        ("2*3+4*5", 26.0),
        ("(1+2)*3", 9.0),
        ("-x1^2", -9.0),
        ("2^-1", 0.5),
        ("pi", math.pi),
        ("e", math.e),
        ("  x1   *  2 ", 6.0),
    ],
)
def test_precedence_and_associativity(src, value):
    assert parse(src, ["x1"]).evaluate({"x1": 3.0}) == pytest.approx(value, rel=0, abs=1e-15)


def test_eval_examples():
    assert parse("x2 - 2*x1", XY).evaluate({"x1": 1, "x2": 3}) == 1
    assert parse("exp(y1+y2)", ["y1", "y2"]).evaluate({"y1": 0, "y2": 0}) == 1


@pytest.mark.parametrize(
    "src,env",
    [
        ("sqrt(y2-y1)", {"y1": 2.0, "y2": 1.0}),
        ("log(y1)", {"y1": 0.0, "y2": 0.0}),
        ("1/(y1-y2)", {"y1": 1.0, "y2": 1.0}),
    ],
)
def test_domain_errors_not_nan(src, env):
    with pytest.raises(DomainEvaluationError):
        parse(src, ["y1", "y2"]).evaluate(env)


def test_domain_error_index_in_arrays():
    e = parse("sqrt(x1)", ["x1"])
    with pytest.raises(DomainEvaluationError) as info:
        e.evaluate({"x1": np.array([1.0, 4.0, -1.0, 2.0])})
    assert info.value.index == 2


def test_missing_binding():
    with pytest.raises(MissingBindingError):
        parse("x1 + x2", XY).evaluate({"x1": 1.0})
    assert issubclass(MissingBindingError, EvaluationError)


def test_vectorized_evaluation_broadcasts():
    e = parse("x1*x2 + 1", XY)
    out = e.evaluate({"x1": np.arange(3.0), "x2": 2.0})
    np.testing.assert_array_equal(out, [1.0, 3.0, 5.0])


def test_diff_folds_constants():
    d = parse("x2 - 2*x1", XY).diff("x1")
    assert isinstance(d, Num) and d.value == -2.0


def test_diff_product_rule():
    d = parse("sin(x1)*x2", XY).diff("x1")
    assert to_source(d) == "cos(x1) * x2"


def test_simplify_neutral_elements():
    assert to_source(simplify(parse("x1*0 + 1*x2 + 0", XY))) == "x2"
    assert to_source(simplify(parse("x1^1 - 0", XY))) == "x1"


def test_simplify_keeps_domain_errors():
    e = simplify(parse("log(0) + x1", ["x1"]))
    with pytest.raises(DomainEvaluationError):
        e.evaluate({"x1": 1.0})


def test_substitute():
    e = substitute(parse("2*t + 1", ["t"]), {"t": parse("x2 - x1", XY)})
    assert e.evaluate({"x1": 1.0, "x2": 4.0}) == 7.0


def _catalog_exprs():
    out = []
    for entry in catalog.all_entries():
        eq = entry.equation
        out += [(entry.name, "a", eq.a), (entry.name, "b", eq.b), (entry.name, "c", eq.c), (entry.name, "f", eq.f)]
        out += [(entry.name, "gamma", parse(g, XY)) for g in entry.gamma_strings]
        out += [(entry.name, "inverse", parse(g, ["y1", "y2"])) for g in entry.inverse_strings]
        out.append((entry.name, "solution", parse(entry.solution, XY)))
    return out


def _fd_points(name, kind, rng, n):
    entry = {e.name: e for e in catalog.all_entries()}[name]
    if kind == "inverse":
        l1, l2, r1, r2 = entry.char_window
        return {"y1": rng.uniform(l1, l2, n), "y2": rng.uniform(r1, r2, n)}
    lo1, hi1, lo2, hi2 = entry.domain.bounds
    return {
        "x1": rng.uniform(lo1, hi1, n),
        "x2": rng.uniform(lo2, hi2, n),
        "u": rng.uniform(-1, 1, n),
        "p": rng.uniform(-1, 1, n),
        "q": rng.uniform(-1, 1, n),
    }


@pytest.mark.parametrize("name,kind,expr", _catalog_exprs(), ids=lambda v: v if isinstance(v, str) else "")
def test_diff_matches_central_differences(name, kind, expr):
    rng = np.random.default_rng(7)
    env = _fd_points(name, kind, rng, 100)
    h = 1e-5
    for var in sorted(expr.variables()):
        d = expr.diff(var).evaluate(env)
        up = dict(env, **{var: env[var] + h})
        dn = dict(env, **{var: env[var] - h})
        fd = (expr.evaluate(up) - expr.evaluate(dn)) / (2 * h)
        rel = np.abs(d - fd) / np.maximum(1.0, np.abs(fd))
        assert np.max(rel) <= 1e-6, (var, float(np.max(rel)))


# -- property tests on random trees ------------------------------------------

_leaf = st.one_of(
    st.floats(min_value=-5, max_value=5, allow_nan=False).map(Num),
    st.sampled_from(["x1", "x2"]).map(Var),
    st.sampled_from(["pi", "e"]).map(Const),
)


def _extend(children):
    return st.one_of(
        children.map(Neg),
        st.tuples(st.sampled_from("+-*/"), children, children).map(lambda t: BinOp(*t)),
        st.tuples(children, st.integers(0, 3).map(float).map(Num)).map(lambda t: BinOp("^", *t)),
        st.tuples(st.sampled_from(["sin", "cos", "exp", "tanh", "abs"]), children).map(lambda t: Call(*t)),
    )


trees = st.recursive(_leaf, _extend, max_leaves=12)


def _safe_eval(e, env):
    with np.errstate(all="ignore"):
        try:
            return np.asarray(e.evaluate(env), dtype=float)
        except EvaluationError:
            return None


@settings(max_examples=150, deadline=None)
@given(trees)
def test_round_trip_print_parse(e):
    back = parse(to_source(e), XY)
    rng = np.random.default_rng(0)
    env = {"x1": rng.uniform(-2, 2, 100), "x2": rng.uniform(-2, 2, 100)}
    a, b = _safe_eval(e, env), _safe_eval(back, env)
    assert (a is None) == (b is None)
    if a is not None:
        finite = np.isfinite(a)
        np.testing.assert_array_equal(finite, np.isfinite(b))
        tol = np.spacing(np.abs(a[finite]))
        assert np.all(np.abs(a[finite] - b[finite]) <= tol)


@settings(max_examples=100, deadline=None)
@given(trees, trees, st.floats(-3, 3), st.floats(-3, 3))
def test_diff_is_linear(e1, e2, al, be):
    combo = BinOp("+", BinOp("*", Num(al), e1), BinOp("*", Num(be), e2))
    rng = np.random.default_rng(1)
    env = {"x1": rng.uniform(-1, 1, 50), "x2": rng.uniform(-1, 1, 50)}
    lhs = _safe_eval(combo.diff("x1"), env)
    d1, d2 = _safe_eval(e1.diff("x1"), env), _safe_eval(e2.diff("x1"), env)
    if lhs is None or d1 is None or d2 is None:
        return
    rhs = al * d1 + be * d2
    ok = np.isfinite(lhs) & np.isfinite(rhs) & (np.abs(rhs) < 1e12)
    np.testing.assert_allclose(lhs[ok], rhs[ok], rtol=1e-9, atol=1e-9)
