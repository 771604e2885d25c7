import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from gaussconc import FunctionModel, parse_expression
from gaussconc.errors import EvaluationDomainError, ExpressionSyntaxError

from conftest import random_tree


def test_linear_combination_parses_and_evaluates():
    tree = parse_expression("y1 + 2*y2", 2)
    assert FunctionModel(tree).value([1.0, 2.0]) == 5.0


def test_softplus_difference_matches_integral_oracle():
    # f(x) = x - log(1+e^x) is the antiderivative of 1/(1+e^x) (logistic
    # of -x); check against independent numerical integration of sigma.
    from scipy.integrate import quad

    tree = parse_expression("y1 - log(1 + exp(y1))", 1)
    model = FunctionModel(tree)
    f0 = model.value([0.0])
    assert f0 == pytest.approx(-math.log(2), abs=1e-15)
    for x in (-3.0, -1.0, 0.5, 2.0, 4.0):
        integral, err = quad(lambda z: 1.0 / (1.0 + np.exp(z)), 0.0, x)
        assert model.value([x]) - f0 == pytest.approx(integral, abs=1e-9 + err)


def test_variable_index_out_of_range():
    with pytest.raises(ExpressionSyntaxError) as err:
        parse_expression("y3", 2)
    assert err.value.offset == 0


def test_syntax_error_carries_offset():
    with pytest.raises(ExpressionSyntaxError) as err:
        parse_expression("y1 + * y2", 2)
    assert err.value.offset == 5


def test_unknown_identifier():
    with pytest.raises(ExpressionSyntaxError, match="unknown identifier"):
        parse_expression("foo(y1)", 1)


def test_empty_expression():
    with pytest.raises(ExpressionSyntaxError):
        parse_expression("   ", 1)


def test_division_by_zero_reports_subexpression():
    model = FunctionModel(parse_expression("1/y1", 1))
    with pytest.raises(EvaluationDomainError) as err:
        model.value([0.0])
    assert "division by zero" in str(err.value)
    assert err.value.subexpression


def test_log_domain_violation():
    model = FunctionModel(parse_expression("log(y1)", 1))
    with pytest.raises(EvaluationDomainError, match="log of a non-positive"):
        model.value([-1.0])


def test_real_exponent_on_negative_base_is_domain_violation():
    model = FunctionModel(parse_expression("y1^2.5", 1))
    with pytest.raises(EvaluationDomainError, match="negative base"):
        model.value([-1.0])
    assert model.value([2.0]) == pytest.approx(2.0**2.5)


def test_integer_exponent_on_negative_base_is_fine():
    model = FunctionModel(parse_expression("y1^3", 1))
    assert model.value([-2.0]) == -8.0


@pytest.mark.parametrize("text,dim,point,expected", [
    ("2 + 3*4", 1, [0.0], 14.0),                    # * binds tighter than +
    ("2*y1^2", 1, [3.0], 18.0),                     # ^ binds tighter than *
    ("-y1^2", 1, [3.0], -9.0),                      # unary minus below ^
    ("2^-2", 1, [0.0], 0.25),                       # signed literal exponent
    ("2^2^3", 1, [0.0], 64.0),                      # left-assoc power chain
    ("8 - 3 - 2", 1, [0.0], 3.0),                   # left-assoc subtraction
    ("8/4/2", 1, [0.0], 1.0),                       # left-assoc division
    ("logistic(0)", 1, [0.0], 0.5),
    ("exp(0) + sqrt(4) + atan(0)", 1, [0.0], 3.0),
])
def test_precedence_and_primitives(text, dim, point, expected):
    assert FunctionModel(parse_expression(text, dim)).value(point) == \
        pytest.approx(expected, rel=1e-15)


def test_whitespace_is_insignificant():
    a = FunctionModel(parse_expression("y1+2*y2", 2))
    b = FunctionModel(parse_expression("  y1 +  2 * y2 ", 2))
    pt = [0.3, -1.2]
    assert a.value(pt) == b.value(pt)


def test_exponent_must_be_literal():
    with pytest.raises(ExpressionSyntaxError, match="numeric literal"):
        parse_expression("y1^y2", 2)


def test_logistic_is_stable_for_large_arguments():
    model = FunctionModel(parse_expression("logistic(y1)", 1))
    assert model.value([800.0]) == 1.0
    assert model.value([-800.0]) == 0.0


@settings(max_examples=200, deadline=None)
@given(st.integers(0, 10**9))
def test_print_parse_round_trip(seed):
    # Round trip: pretty-print then re-parse; evaluations agree to 1e-12
    # relative on 100 random points.
    rng = np.random.default_rng(seed)
    tree = random_tree(rng)
    reparsed = parse_expression(tree.to_text(), tree.dimension)
    pts = rng.normal(size=(100, tree.dimension))
    a = FunctionModel(tree).values(pts)
    b = FunctionModel(reparsed).values(pts)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-300)


@settings(max_examples=300, deadline=None)
@given(st.text(alphabet="y12 +-*/^()exploglogistcqrtanh.3", max_size=40))
def test_parser_totality_on_arbitrary_text(text):
    # The parser either succeeds or raises its own syntax error; it never
    # crashes with anything else.
    try:
        parse_expression(text, 2)
    except ExpressionSyntaxError:
        pass


def test_tree_is_frozen():
    tree = parse_expression("y1", 1)
    with pytest.raises(AttributeError):
        tree.dimension = 2
