from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hydropencil.errors import (
    ContextMismatch,
    DivisionByZero,
    DivisionByZeroConstant,
    ExprSyntaxError,
    NumericPole,
    SubstitutionPole,
    UnknownIdentifier,
)
from hydropencil.expr import Context, Expr, arith, diff, eval_numeric, format_expr, is_zero, parse, substitute

C1 = Context.standard(1)
C2 = Context.standard(2)
C3 = Context.standard(3)


def p(text, ctx=C2):
    return parse(text, ctx)


# --- parsing -------------------------------------------------------------------------

def test_parse_literal_fraction():
    e = p("v1^2/2", C1)
    assert e == C1.var("v1") ** 2 * Fraction(1, 2)
    assert str(e) == "1/2*v1^2"


def test_parse_cancels_to_zero():
    e = p("v1 - v1")
    assert e.is_zero()
    assert e.den.is_one() and e.num.is_zero()


def test_parse_normalises_denominator():
    assert p("1/(v1+0)") == C2.one() / C2.var("v1")
    assert str(p("1/(v1+0)")) == "1/v1"


@pytest.mark.parametrize("text, expected", [
    ("2^3", "8"),
    ("-v1^2", "-v1^2"),
    ("-(v1+1)^2", "-v1^2 - 2*v1 - 1"),
    ("v1**2", "v1^2"),
    ("1.25*v2", "5/4*v2"),
    ("v1/v2/v1", "1/v2"),
    ("(v1^2 - 1)/(2*v1 + 2)", "1/2*v1 - 1/2"),
    ("1/(2*v1)", "1/(2*v1)"),
    ("(v1+1)/(v1-1)", "(v1 + 1)/(v1 - 1)"),
    ("+v1 - -v2", "v1 + v2"),
])
def test_parse_and_format(text, expected):
    assert str(p(text)) == expected


def test_grlex_order_in_output():
    # degree first, then lexicographic in the declared coordinate order
    assert str(p("v2 + v1 + v1*v2 + v2^2 + 1 + v1^2")) == "v1^2 + v1*v2 + v2^2 + v1 + v2 + 1"


def test_syntax_error_position():
    with pytest.raises(ExprSyntaxError) as exc:
        p("v1 + * v2")
    assert exc.value.pos == 5
    assert "^" in str(exc.value)


@pytest.mark.parametrize("text", ["v1 +", "(v1", "v1)", "v1 v2", "v1^v2", "v1^1.5", "v1^2^3", "", "v1 $ 2"])
def test_syntax_errors(text):
    with pytest.raises(ExprSyntaxError):
        p(text)


def test_unknown_identifier():
    with pytest.raises(UnknownIdentifier):
        p("v3 + 1")
    with pytest.raises(UnknownIdentifier):
        p("sin(v1)")


def test_literal_zero_denominator():
    with pytest.raises(DivisionByZeroConstant):
        p("1/0")
    with pytest.raises(DivisionByZero):
        p("1/(v1 - v1)")


# --- arithmetic ----------------------------------------------------------------------

def test_arith_examples():
    v1 = C1.var("v1")
    assert arith(v1, v1, "add") == 2 * v1
    assert arith(v1 + 1, v1 - 1, "mul") == p("v1^2 - 1", C1)
    assert arith(p("v1^2 - 1", C1), v1 - 1, "div") == v1 + 1
    with pytest.raises(DivisionByZero):
        arith(v1, v1 - v1, "div")
    with pytest.raises(ValueError):
        arith(v1, v1, "pow")


def test_denominator_is_monic():
    e = p("(2*v1 + 4)/(6*v1^2 + 3*v2)")
    assert e.den.leading_coefficient() == 1
    assert e == p("(1/3*v1 + 2/3)/(v1^2 + 1/2*v2)")


def test_negative_power_and_constants():
    v1 = C2.var("v1")
    assert v1 ** -2 == 1 / (v1 * v1)
    assert (v1 ** 0) == 1
    assert p("3/6").constant_value() == Fraction(1, 2)
    with pytest.raises(ValueError):
        v1.constant_value()


def test_context_mismatch():
    with pytest.raises(ContextMismatch):
        C1.var("v1") + C2.var("v1")


def test_lift_to_larger_context():
    e = p("1/(v1 + 2)", C1)
    lam = C1.with_params("lambda")
    lifted = e.lift(lam)
    assert lifted.ctx == lam
    assert lifted * lam.var("v1") + 2 * lifted == 1
    with pytest.raises(ContextMismatch):
        p("v2", C2).lift(C1)


# --- calculus ----------------------------------------------------------------------

def test_diff_examples():
    assert diff(p("v1^2/2", C1), "v1") == C1.var("v1")
    assert diff(C1.const(7), "v1").is_zero()
    assert diff(p("1/v1", C1), "v1") == p("-1/v1^2", C1)


def test_diff_rejects_parameters_and_unknowns():
    ctx = Context.standard(1, params=("lambda",))
    e = p("lambda*v1", ctx)
    assert e.diff("v1") == ctx.var("lambda")
    with pytest.raises(UnknownIdentifier):
        e.diff("lambda")
    with pytest.raises(UnknownIdentifier):
        e.diff("v7")


def test_is_zero_examples():
    assert is_zero(p("(v1+1)^2 - v1^2 - 2*v1 - 1"))
    assert is_zero(p("v1*v2 - v2*v1"))
    assert not is_zero(p("v1 - v2"))


# --- substitution ----------------------------------------------------------------------

def test_substitute_examples():
    U = Context(("u1",))
    assert substitute(p("v1^2", C1), {"v1": p("2*u1 + 1", U)}) == p("4*u1^2 + 4*u1 + 1", U)
    assert substitute(p("v1/v2"), {"v1": C2.var("v2"), "v2": C2.var("v2")}) == 1
    with pytest.raises(SubstitutionPole):
        substitute(p("1/v1", C1), {"v1": p("v1 - v1", C1)})


def test_substitute_rational_values():
    e = p("v1^2 + v2")
    out = substitute(e, {"v1": p("1/v2"), "v2": C2.var("v2")})
    assert out == p("(1 + v2^3)/v2^2")


# --- numerics ----------------------------------------------------------------------

def test_eval_examples():
    assert eval_numeric(p("v1^2/2", C1), [3]) == 4.5
    assert eval_numeric(C1.zero(), [12.5]) == 0.0
    with pytest.raises(NumericPole):
        eval_numeric(p("1/v1", C1), [0])


def test_eval_on_arrays():
    x = np.linspace(-1, 1, 11)
    e = p("3*v1^2 - v1*v2 + 1/2")
    np.testing.assert_allclose(e.numeric()((x, 2 * x)), 3 * x ** 2 - 2 * x ** 2 + 0.5, rtol=1e-15)


# --- properties ------------------------------------------------------------------------

small = st.fractions(min_value=-5, max_value=5, max_denominator=4)


@st.composite
def polys(draw, ctx=C3, max_terms=4, max_exp=3):
    e = ctx.zero()
    vars_ = ctx.coord_vars()
    for _ in range(draw(st.integers(0, max_terms))):
        t = ctx.const(draw(small))
        for v in vars_:
            t = t * v ** draw(st.integers(0, max_exp))
        e = e + t
    return e


@st.composite
def rationals(draw, ctx=C3):
    num = draw(polys(ctx))
    den = draw(polys(ctx))
    if den.is_zero():
        den = ctx.one()
    return num / den


PROP = settings(max_examples=60, deadline=None)


@PROP
@given(rationals(), rationals(), rationals())
def test_field_laws(a, b, c):
    assert (a + b) + c == a + (b + c)
    assert a * (b + c) == a * b + a * c
    assert a + b == b + a and a * b == b * a
    assert (a - a).is_zero()
    if not b.is_zero():
        assert (a / b) * b == a


@PROP
@given(rationals())
def test_canonical_form_is_idempotent(a):
    again = Expr(a.ctx, a.num, a.den)
    assert again.num == a.num and again.den == a.den
    assert hash(again) == hash(a)
    assert a.den.is_one() or a.den.leading_coefficient() == 1
    assert a.num.gcd(a.den).is_one() or a.num.is_zero()


@PROP
@given(rationals())
def test_parse_after_format_is_identity(a):
    assert parse(format_expr(a), a.ctx) == a


@PROP
@given(rationals(), st.sampled_from(C3.coords), st.sampled_from(C3.coords))
def test_partial_derivatives_commute(a, x, y):
    assert a.diff(x).diff(y) == a.diff(y).diff(x)


@PROP
@given(rationals(), rationals(), st.sampled_from(C3.coords))
def test_product_and_quotient_rules(a, b, x):
    assert (a * b).diff(x) == a.diff(x) * b + a * b.diff(x)
    if not b.is_zero():
        assert (a / b).diff(x) == (a.diff(x) * b - a * b.diff(x)) / (b * b)


@PROP
@given(rationals(), st.lists(st.floats(-2, 2), min_size=3, max_size=3))
def test_numeric_value_matches_quotient(a, point):
    num = Expr(a.ctx, a.num)
    den = Expr(a.ctx, a.den)
    d = eval_numeric(den, point)
    if abs(d) < 1e-3:
        return
    value = eval_numeric(a, point)
    ref = eval_numeric(num, point) / d
    assert value == pytest.approx(ref, rel=1e-12, abs=1e-12)


@PROP
@given(polys(), polys(C2), polys(C2), polys(C2))
def test_substitution_is_a_ring_map(a, x, y, z):
    b = {"v1": x, "v2": y, "v3": z}
    assert substitute(a * a + a, b, C2) == substitute(a, b, C2) ** 2 + substitute(a, b, C2)
