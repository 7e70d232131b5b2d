import math

import numpy as np
import pytest

from horizonlab.dual import seed, value
from horizonlab.errors import MetricConfigError
from horizonlab.expr import parse_expression


def test_basic_precedence():
    e = parse_expression("1 + 2*3 - 4/2", 2)
    assert e((0.0, 0.0)) == pytest.approx(5.0)


def test_variables_and_params():
    e = parse_expression("k*x1 + x2^2", 2, ("k",))
    assert e((2.0, 3.0), {"k": 10.0}) == pytest.approx(29.0)


def test_unary_minus_and_parens():
    e = parse_expression("-(x1 - 2)*(x1 + 2)", 1)
    assert e((3.0,)) == pytest.approx(-5.0)


def test_integer_power_binds_tighter_than_unary_minus():
    e = parse_expression("-x1^2", 1)
    assert e((3.0,)) == -9.0


def test_negative_exponent():
    e = parse_expression("x1^-2", 1)
    assert e((2.0,)) == pytest.approx(0.25)


def test_functions_and_pi():
    e = parse_expression("sqrt(x1^2 + x2^2) * cos(pi)", 2)
    assert e((3.0, 4.0)) == pytest.approx(-5.0)
    e2 = parse_expression("atan2(x2, x1)", 2)
    assert e2((1.0, 1.0)) == pytest.approx(math.pi / 4)


def test_syntax_error_position_reported():
    with pytest.raises(MetricConfigError) as exc:
        parse_expression("x1/+2", 2)
    assert exc.value.position == 3
    assert "position 3" in str(exc.value)


def test_unknown_function_named_in_error():
    with pytest.raises(MetricConfigError) as exc:
        parse_expression("foo(x1)", 2)
    assert "foo" in str(exc.value)


def test_unknown_name_rejected():
    with pytest.raises(MetricConfigError) as exc:
        parse_expression("x1 + bogus", 2)
    assert "bogus" in str(exc.value)


def test_variable_out_of_range():
    with pytest.raises(MetricConfigError):
        parse_expression("x3", 2)


def test_fractional_exponent_rejected_at_parse_time():
    with pytest.raises(MetricConfigError) as exc:
        parse_expression("x1^2.5", 1)
    assert "integer" in str(exc.value)


def test_dangling_input_rejected():
    with pytest.raises(MetricConfigError):
        parse_expression("x1 + 2 )", 1)


def test_wrong_arity_reported():
    with pytest.raises(MetricConfigError) as exc:
        parse_expression("atan2(x1)", 1)
    assert "2 argument" in str(exc.value)


def test_evaluates_on_arrays():
    e = parse_expression("x1*x2 - 1", 2)
    out = e((np.array([1.0, 2.0]), np.array([3.0, 4.0])))
    assert np.allclose(out, [2.0, 7.0])


def test_evaluates_on_duals():
    e = parse_expression("x1^2 * x2", 2)
    x = seed((3.0, 5.0))
    f = e(x)
    assert value(f) == 45.0
    assert f.d == pytest.approx((30.0, 9.0))


def test_empty_expression_rejected():
    with pytest.raises(MetricConfigError):
        parse_expression("   ", 2)
