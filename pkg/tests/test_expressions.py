import math
import pickle

import numpy as np
import pytest

from fracorder.expressions import (Expression, ExpressionError,
                                   eval_expression, parse_expression)


class TestBasics:
    def test_sine_at_half(self):
        assert eval_expression("sin(pi*x)", 0.5) == pytest.approx(1.0)

    def test_cutoff_source_inside_window(self):
        got = eval_expression("exp(x*(1-x))*x*(1-x)*t*chi(t,0,0.1)",
                              0.5, t=0.05)
        assert got == pytest.approx(math.exp(0.25) * 0.25 * 0.05, rel=1e-12)
        assert got == pytest.approx(0.0160502, abs=2e-7)

    def test_cutoff_source_after_window(self):
        assert eval_expression("exp(x*(1-x))*x*(1-x)*t*chi(t,0,0.1)",
                               0.5, t=0.2) == 0.0

    def test_numbers(self):
        assert eval_expression("2e-3 + .5 + 1.25e1", 0.0) == pytest.approx(13.002)

    def test_arithmetic_precedence(self):
        assert eval_expression("1+2*3^2", 0.0) == 19.0
        assert eval_expression("-x^2", 3.0) == -9.0
        assert eval_expression("2^3^2", 0.0) == 512.0  # right associative
        assert eval_expression("x^-1", 4.0) == 0.25
        assert eval_expression("(1+2)*3", 0.0) == 9.0
        assert eval_expression("6/3/2", 0.0) == 1.0

    def test_functions(self):
        assert eval_expression("cos(0)", 0.0) == 1.0
        assert eval_expression("sqrt(x)", 9.0) == 3.0
        assert eval_expression("exp(t)", 0.0, t=1.0) == pytest.approx(math.e)

    def test_two_dimensional_variables(self):
        got = eval_expression("x1*(1-x1)*sin(pi*x2)", (0.5, 0.5))
        assert got == pytest.approx(0.25)

    def test_x_is_alias_for_x1(self):
        assert eval_expression("x", (0.3, 0.9)) == pytest.approx(0.3)


class TestChi:
    def test_half_open_convention(self):
        expr = parse_expression("chi(t, 0, 0.1)")
        pts = np.zeros((1, 1))
        assert expr(pts, t=0.0)[0] == 1.0
        assert expr(pts, t=0.0999)[0] == 1.0
        assert expr(pts, t=0.1)[0] == 0.0
        assert expr(pts, t=-0.01)[0] == 0.0

    def test_spatial_indicator(self):
        expr = parse_expression("chi(x, 0.25, 0.75)")
        pts = np.array([[0.1], [0.25], [0.5], [0.75], [0.9]])
        assert np.array_equal(expr(pts), [0.0, 1.0, 1.0, 0.0, 0.0])

    def test_wrong_arity(self):
        with pytest.raises(ExpressionError, match="3 arguments"):
            parse_expression("chi(t, 0)")


class TestErrors:
    @pytest.mark.parametrize("bad", [
        "", "1+", "sin()", "sin(1,2)", "2x", "x..5", "(1+2", "1//2",
        "foo(3)", "y", "1 @ 2", "chi(t,0,0.1))",
    ])
    def test_parse_errors(self, bad):
        with pytest.raises(ExpressionError):
            parse_expression(bad)

    def test_division_by_zero(self):
        with pytest.raises(ExpressionError, match="non-finite"):
            eval_expression("1/x", 0.0)

    def test_sqrt_of_negative(self):
        with pytest.raises(ExpressionError, match="non-finite"):
            eval_expression("sqrt(x-1)", 0.0)

    def test_x2_in_one_dimension(self):
        expr = parse_expression("x2 + 1")
        with pytest.raises(ExpressionError, match="one-dimensional"):
            expr(np.zeros((3, 1)))

    def test_points_shape(self):
        with pytest.raises(ExpressionError, match="points"):
            parse_expression("x")(np.zeros(3))


class TestExpressionObject:
    def test_variables_reported(self):
        expr = parse_expression("exp(x1)*x2 + t*chi(t, 0, 1)")
        assert expr.variables == {"x1", "x2", "t"}
        assert parse_expression("3.5").variables == frozenset()

    def test_vectorized(self):
        expr = parse_expression("x^2*(1-x)")
        pts = np.linspace(0, 1, 7)[:, None]
        assert np.allclose(expr(pts), pts[:, 0] ** 2 * (1 - pts[:, 0]))

    def test_constant_broadcasts(self):
        assert np.array_equal(parse_expression("2")(np.zeros((4, 1))),
                              np.full(4, 2.0))

    def test_pickle_round_trip(self):
        expr = parse_expression("sin(pi*x)*chi(t, 0, 0.1)")
        clone = pickle.loads(pickle.dumps(expr))
        pts = np.array([[0.25]])
        assert clone(pts, t=0.05) == expr(pts, t=0.05)
        assert clone.variables == expr.variables

    def test_equality_by_ast(self):
        assert parse_expression("x +1") == parse_expression("x + 1")
        assert parse_expression("x") != parse_expression("t")

    def test_repr_contains_source(self):
        assert "sin(x)" in repr(Expression("sin(x)"))
