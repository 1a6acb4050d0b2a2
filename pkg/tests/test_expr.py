import math

import numpy as np
import pytest

from bvfix.expr import ExpressionSyntaxError, compile_expression


@pytest.mark.parametrize(
    "src, x, expected",
    [
        ("x/2", 3.0, 1.5),
        ("2*x + 1", 2.0, 5.0),
        ("-x^2", 3.0, -9.0),
        ("2^3^2", 0.0, 512.0),
        ("2**3", 0.0, 8.0),
        ("x^2/(1+x)", 1.0, 0.5),
        ("abs(x - 3)", 1.0, 2.0),
        ("sqrt(x)", 4.0, 2.0),
        ("max(x, 1) + min(x, 1)", 3.0, 4.0),
        ("1.5e-1 * x", 2.0, 0.3),
        (".5 + pi - pi", 0.0, 0.5),
    ],
)
def test_scalar_values(src, x, expected):
    assert compile_expression(src)(x) == pytest.approx(expected)


def test_piecewise_kannan_map():
    f = compile_expression("if(x < 0.5, x/4, x/5)")
    assert f(0.0) == 0.0
    assert f(0.4) == pytest.approx(0.1)
    assert f(0.5) == pytest.approx(0.1)
    assert f(1.0) == pytest.approx(0.2)
    xs = np.array([0.0, 0.4, 0.5, 1.0])
    np.testing.assert_allclose(f(xs), [0.0, 0.1, 0.1, 0.2])


def test_two_variables_broadcast():
    d = compile_expression("abs(x - y)", ("x", "y"))
    x = np.array([0.0, 1.0, 3.0])
    D = d(x[:, None], x[None, :])
    assert D.shape == (3, 3)
    assert D[0, 2] == 3.0 and D[2, 1] == 2.0
    assert d(1.0, 4.0) == 3.0
    assert isinstance(d(1.0, 4.0), float)


def test_modulus_variable_t():
    phi = compile_expression("t^2/(1+t)", "t")
    assert phi(t=1.0) == 0.5


@pytest.mark.parametrize(
    "src, pos",
    [
        ("x +", 3),
        ("(x", 2),
        ("x $ 2", 2),
        ("foo(x)", 0),
        ("y", 0),
        ("", 0),
        ("1 < x < 2", 6),
        ("if(x, 1)", 0),
        ("x 2", 2),
    ],
)
def test_syntax_errors_report_position(src, pos):
    with pytest.raises(ExpressionSyntaxError) as info:
        compile_expression(src)
    assert info.value.position == pos


def test_division_by_zero_is_nonfinite_not_exception():
    assert math.isinf(compile_expression("1/x")(0.0))
