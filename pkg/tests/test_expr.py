import math

import pytest
from hypothesis import HealthCheck, given, settings, strategies as st

from nonauto_bif.errors import NonFiniteResult
from nonauto_bif.expr import (BinOp, Call, EmptyInput, FUNCTIONS, Neg, Num, UnbalancedParenthesis,
                              UnexpectedToken, UnknownIdentifier, Var, compile_expr, eval_expr,
                              free_vars, parse_expr, to_source)

numbers = st.one_of(
    st.integers(0, 50).map(float),
    st.floats(0.0, 1e3, allow_nan=False, allow_infinity=False),
    st.sampled_from([0.5, 1e-3, 2.5e-7, 1e20]),
).map(Num)
leaves = st.one_of(numbers, st.sampled_from(["t", "x", "mu"]).map(Var))


def _extend(children):
    return st.one_of(
        st.builds(Neg, children),
        st.builds(BinOp, st.sampled_from(["+", "-", "*", "/", "^"]), children, children),
        st.builds(Call, st.sampled_from(FUNCTIONS), children),
    )


trees = st.recursive(leaves, _extend, max_leaves=12)


def fully_parenthesized(node):
    if isinstance(node, Num):
        return repr(node.value)
    if isinstance(node, Var):
        return node.name
    if isinstance(node, Neg):
        return f"(-{fully_parenthesized(node.operand)})"
    if isinstance(node, Call):
        return f"{node.func}({fully_parenthesized(node.arg)})"
    return f"({fully_parenthesized(node.left)}{node.op}{fully_parenthesized(node.right)})"


_PY_NS = {"exp": math.exp, "log": math.log, "sin": math.sin, "cos": math.cos,
          "tanh": math.tanh, "abs": abs, "sqrt": math.sqrt, "__builtins__": {}}

PROPS = settings(max_examples=1000, deadline=None, suppress_health_check=[HealthCheck.too_slow])


@PROPS
@given(trees)
def test_round_trip(tree):
    assert parse_expr(to_source(tree)) == tree


@PROPS
@given(trees)
def test_minimal_and_full_parentheses_agree(tree):
    assert parse_expr(to_source(tree)) == parse_expr(fully_parenthesized(tree))


@PROPS
@given(trees, st.floats(-3, 3), st.floats(-3, 3), st.floats(-3, 3))
def test_precedence_matches_python(tree, t, x, mu):
    # Python's grammar has the same binding for unary minus, '^' (as '**') and associativity
    text = to_source(tree)
    try:
        expected = eval(text.replace("^", "**"), dict(_PY_NS), {"t": t, "x": x, "mu": mu})
    except (ArithmeticError, ValueError, TypeError):
        return
    if isinstance(expected, complex) or not math.isfinite(expected):
        return
    try:
        got = eval_expr(parse_expr(text), t, x, mu)
    except (NonFiniteResult, ArithmeticError, ValueError):
        return
    assert got == pytest.approx(expected, rel=1e-9, abs=1e-9)


@pytest.mark.parametrize("text,tree", [
    ("-x^2", Neg(BinOp("^", Var("x"), Num(2.0)))),
    ("2^3^2", BinOp("^", Num(2.0), BinOp("^", Num(3.0), Num(2.0)))),
    ("2^-1", BinOp("^", Num(2.0), Neg(Num(1.0)))),
    ("1-2-3", BinOp("-", BinOp("-", Num(1.0), Num(2.0)), Num(3.0))),
    ("8/4/2", BinOp("/", BinOp("/", Num(8.0), Num(4.0)), Num(2.0))),
    ("1+2*3", BinOp("+", Num(1.0), BinOp("*", Num(2.0), Num(3.0)))),
])
def test_known_shapes(text, tree):
    assert parse_expr(text) == tree


def test_example_rhs():
    node = parse_expr("mu^3*t^2 - 2*t^2*x^4")
    assert free_vars(node) == {"t", "x", "mu"}
    assert eval_expr(node, t=1.0, x=1.0, mu=1.0) == -1.0
    assert compile_expr(node)(1.0, 1.0, 1.0) == -1.0


def test_literal_forms():
    assert eval_expr(parse_expr(".5e1")) == 5.0
    assert eval_expr(parse_expr("3.")) == 3.0
    assert eval_expr(parse_expr("1E-2")) == 0.01


@pytest.mark.parametrize("text,error,offset", [
    ("", EmptyInput, 0),
    ("   ", EmptyInput, 0),
    ("(t+1", UnbalancedParenthesis, 4),
    ("t+1)", UnbalancedParenthesis, 3),
    ("2t", UnexpectedToken, 1),
    ("t +* 1", UnexpectedToken, 3),
    ("y + 1", UnknownIdentifier, 0),
    ("sinh(t)", UnknownIdentifier, 0),
    ("exp t", UnexpectedToken, 4),
])
def test_errors_carry_offsets(text, error, offset):
    with pytest.raises(error) as info:
        parse_expr(text)
    assert info.value.offset == offset


def test_nonfinite_reports_path():
    with pytest.raises(NonFiniteResult) as info:
        eval_expr(parse_expr("1 + log(x)"), x=0.0)
    assert info.value.path.startswith("root.right")
    with pytest.raises(NonFiniteResult):
        eval_expr(parse_expr("1/x"), x=0.0)


def test_integer_power_of_negative_base():
    assert eval_expr(parse_expr("x^3"), x=-2.0) == -8.0
    assert eval_expr(parse_expr("x^4"), x=-2.0) == 16.0
    assert compile_expr(parse_expr("x^3"))(0.0, -2.0, 0.0) == -8.0
