import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from projplane.chart.dsl import (
    BinOp, Call, Jet, Neg, Num, Var, evaluate, parse_chart, parse_expr, pretty, variables,
)
from projplane.errors import ChartSyntaxError, DomainError, IndexOutOfRange

leaves = st.one_of(
    st.floats(-100, 100, allow_nan=False).map(Num),
    st.builds(Var, st.sampled_from("xyX"), st.integers(1, 2)),
)
exprs = st.recursive(
    leaves,
    lambda sub: st.one_of(
        st.builds(BinOp, st.sampled_from("+-*/"), sub, sub),
        st.builds(Neg, sub),
        st.builds(Call, st.sampled_from(["sin", "cos", "exp"]), sub),
    ),
    max_leaves=12,
)


@given(exprs)
@settings(max_examples=200)
def test_pretty_roundtrip(e):
    assert parse_expr(pretty(e)) == e


def test_examples_parse():
    c = parse_chart("dim 1\nY1 = y1 - X1*x1")
    assert c.n == 1
    c2 = parse_chart("dim 2\nY1 = y1 - (X1*x1 - X2*x2)\nY2 = y2 - (X1*x2 + X2*x1)")
    assert c2.n == 2
    assert parse_chart(c2.to_text()) == c2
    assert {v.name for v in variables(c2.defs[0])} == {"y1", "X1", "x1", "X2", "x2"}


def test_comments_and_blank_lines():
    c = parse_chart("# header\n\ndim 1   # one\nY1 = y1 - X1*x1  # def\n\n")
    assert c.n == 1


def test_index_out_of_range():
    with pytest.raises(IndexOutOfRange):
        parse_chart("dim 2\nY1 = y3\nY2 = y2")
    with pytest.raises(IndexOutOfRange):
        parse_chart("dim 1\nY2 = y1")


@pytest.mark.parametrize("text,line,col", [
    ("dim 1\nY1 = y1 +\n", 2, 10),
    ("dim 1\nY1 = (y1\n", 2, 9),
    ("dim 1\nY1 = y1 $ 2\n", 2, 9),
    ("dim 1\nY1 = tan(x1)\n", 2, 6),
    ("dim 3\nY1 = y1\n", 1, 5),
    ("dim 1\nZ1 = y1\n", 2, 1),
    ("dim 1\nY1 = y1\nY1 = y1\n", 3, 1),
])
def test_syntax_errors_have_position(text, line, col):
    with pytest.raises(ChartSyntaxError) as info:
        parse_chart(text)
    assert (info.value.line, info.value.column) == (line, col)


def test_missing_definition():
    with pytest.raises(ChartSyntaxError, match="Y2"):
        parse_chart("dim 2\nY1 = y1\n")


def test_evaluate_and_domain():
    e = parse_expr("sin(x1) * exp(y1) / (1 + X1)")
    env = {"x1": 0.5, "y1": -0.2, "X1": 2.0}
    assert evaluate(e, env) == pytest.approx(math.sin(0.5) * math.exp(-0.2) / 3)
    with pytest.raises(DomainError):
        evaluate(parse_expr("1 / (x1 - x1)"), {"x1": 1.0})


@given(st.floats(-2, 2), st.floats(-2, 2))
@settings(max_examples=50)
def test_jet_matches_closed_form(a, b):
    # f = sin(u v) + exp(u) / (2 + cos(v))
    u = Jet.variable(np.array([a]), 0, 2)
    v = Jet.variable(np.array([b]), 1, 2)
    f = (u * v).sin() + u.exp() / (2 + v.cos())
    d = 2 + math.cos(b)
    fu = b * math.cos(a * b) + math.exp(a) / d
    fv = a * math.cos(a * b) + math.exp(a) * math.sin(b) / d ** 2
    fuv = math.cos(a * b) - a * b * math.sin(a * b) + math.exp(a) * math.sin(b) / d ** 2
    assert f.grad[:, 0] == pytest.approx([fu, fv], rel=1e-12, abs=1e-12)
    assert f.hess[0, 1, 0] == pytest.approx(fuv, rel=1e-12, abs=1e-12)
    assert f.hess[1, 0, 0] == pytest.approx(fuv, rel=1e-12, abs=1e-12)
