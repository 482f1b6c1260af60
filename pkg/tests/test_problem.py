import numpy as np
import pytest

from charpar.problem import (
    DomainSpec,
    EquationSpec,
    NonHyperbolicError,
    check_hyperbolicity,
    factor_characteristic_ode,
)


def eq(a, b, c, f="0"):
    return EquationSpec.from_strings(a, b, c, f)


def test_wave_speed_two_hyperbolic():
    rep = check_hyperbolicity(eq("1", "0", "-4"), DomainSpec.rectangle(-1, 3, 0, 2), 11)
    assert rep.passed
    assert rep.min_discriminant == 4.0


def test_variable_speed_minimum_at_left_edge():
    rep = check_hyperbolicity(eq("1", "0", "-x1^2"), DomainSpec.rectangle(1, 2, 0, 1), 21)
    assert rep.passed
    assert rep.min_discriminant == pytest.approx(1.0, abs=1e-15)
    assert rep.witness_point[0] == 1.0


def test_parabolic_fails():
    rep = check_hyperbolicity(eq("1", "0", "0"), DomainSpec.rectangle(0, 1, 0, 1), 5)
    assert not rep.passed
    assert rep.min_discriminant == 0.0
    d = rep.as_dict()
    assert d["passed"] is False and len(d["witness_point"]) == 2


def test_mixed_type_witness_found():
    # b^2 - ac = x1 changes sign inside the box
    rep = check_hyperbolicity(eq("1", "0", "-x1"), DomainSpec.rectangle(-1, 1, 0, 1), 21)
    assert not rep.passed
    assert rep.witness_point[0] == -1.0


def test_sample_count_validated():
    with pytest.raises(ValueError):
        check_hyperbolicity(eq("1", "0", "-1"), DomainSpec.rectangle(0, 1, 0, 1), 0)


@pytest.mark.parametrize("speed", [0.5, 1.0, 3.0])
def test_wave_slopes(speed):
    d = factor_characteristic_ode(eq("1", "0", f"-{speed}^2"), (0.3, -0.2))
    assert d.kind == "dx2/dx1"
    assert (d.slope1, d.slope2) == pytest.approx((speed, -speed), abs=1e-15)


def test_mixed_derivative_axes():
    d = factor_characteristic_ode(eq("0", "1/2", "0"), (0.1, 0.2))
    assert d.kind == "axes"


def test_a_zero_branch_uses_dx1_dx2():
    d = factor_characteristic_ode(eq("0", "1", "2"), (0.0, 0.0))
    assert d.kind == "dx1/dx2"
    assert (d.slope1, d.slope2) == pytest.approx((1.0, 0.0))


def test_variable_speed_slopes_at_three():
    d = factor_characteristic_ode(eq("1", "0", "-x1^2"), (3.0, 0.0))
    assert (d.slope1, d.slope2) == pytest.approx((3.0, -3.0), abs=1e-14)


def test_non_hyperbolic_point_rejected():
    with pytest.raises(NonHyperbolicError):
        factor_characteristic_ode(eq("1", "0", "1"), (0.0, 0.0))


def test_vieta_relations():
    e = eq("1 + x1^2", "x2/3", "-2 - x2^2")
    rng = np.random.default_rng(3)
    for x in rng.uniform(-1, 1, (50, 2)):
        a, b, c = (float(v) for v in e.coefficients(*x))
        d = factor_characteristic_ode(e, x)
        assert d.slope1 * d.slope2 == pytest.approx(c / a, rel=1e-13)
        assert d.slope1 + d.slope2 == pytest.approx(2 * b / a, rel=1e-13, abs=1e-15)
        assert d.slope1 > d.slope2


def test_slopes_continuous_on_grid():
    e = eq("1", "x1/4", "-(1 + x2^2)")
    h = 1e-3
    xs = np.arange(0, 1, h)
    s1 = np.array([factor_characteristic_ode(e, (x, 0.5)).slope1 for x in xs])
    assert np.max(np.abs(np.diff(s1))) <= 2 * h


def test_apply_operator_and_rhs():
    e = eq("1", "0", "-x1^2", "(1 + x1^2)*u")
    from charpar.exprlang import parse

    Au = e.apply_operator(parse("exp(x1)*sin(x2)", ["x1", "x2"]))
    x1, x2 = 0.7, 1.1
    lhs = Au.evaluate({"x1": x1, "x2": x2})
    u = np.exp(x1) * np.sin(x2)
    assert lhs == pytest.approx(float(e.rhs(x1, x2, u, 0.0, 0.0)), rel=1e-14)


def test_equation_rejects_undeclared_variables():
    with pytest.raises(Exception):
        EquationSpec.from_strings("u", "0", "-1")


class TestDomain:
    def test_bounds_must_be_ordered(self):
        with pytest.raises(ValueError):
            DomainSpec.rectangle(1, 0, 0, 1)

    def test_sector_slopes_ordered(self):
        with pytest.raises(ValueError):
            DomainSpec.sector(2.0, 0.5, 1.0)

    def test_unknown_kind(self):
        with pytest.raises(ValueError):
            DomainSpec("disc", (0, 1, 0, 1))

    def test_quadrant_window_nonnegative(self):
        with pytest.raises(ValueError):
            DomainSpec("quadrant", (-1, 1, 0, 1))

    def test_membership_is_closed(self):
        r = DomainSpec.rectangle(0, 1, 0, 1)
        assert r.contains(1.0, 0.0) and r.contains(0.0, 1.0)
        assert not r.contains(1.0 + 1e-9, 0.5)
        s = DomainSpec.sector(0.5, 2.0, 1.0)
        assert s.contains(1.0, 0.5) and s.contains(1.0, 2.0)
        assert not s.contains(1.0, 2.1)
        q = DomainSpec("quadrant", (0, 1, 0, 1))
        assert q.contains(5.0, 0.0) and not q.contains(-0.1, 1.0)

    def test_samples_include_corners(self):
        x1, x2 = DomainSpec.rectangle(-1, 2, 3, 4).sample(5)
        pts = set(zip(x1.tolist(), x2.tolist()))
        assert {(-1.0, 3.0), (2.0, 3.0), (-1.0, 4.0), (2.0, 4.0)} <= pts
        assert len(x1) == 25
        x1, x2 = DomainSpec.rectangle(0, 1, 0, 1).sample(1)
        assert (0.5, 0.5) in set(zip(x1.tolist(), x2.tolist()))

    def test_sector_samples_inside(self):
        s = DomainSpec.sector(0.5, 2.0, 1.0, 0.1)
        x1, x2 = s.sample(7)
        assert np.all(s.contains(x1, x2))

    def test_char_rectangle_needs_pair(self):
        d = DomainSpec("char-rectangle", (0, 1, 0, 1))
        with pytest.raises(ValueError):
            d.sample(3)
        with pytest.raises(ValueError):
            d.contains(0.0, 0.0)
