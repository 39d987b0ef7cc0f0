import math

import numpy as np
import pytest

from poisres.core.calculus import simplify
from poisres.core.errors import DomainError, ExprSyntaxError, UnknownVariableError
from poisres.core.expr import Const, Neg, Pow, Sub, Var, evaluate, evaluate_batch, to_text
from poisres.core.parser import parse


def test_precedence_and_associativity():
    assert evaluate(parse("1+2*3^2"), {}) == 19.0
    assert parse("2^3^2") == Pow(Const(2.0), 9)
    assert evaluate(parse("2^3^2"), {}) == 512.0
    assert parse("x - y - z") == Sub(Sub(Var("x"), Var("y")), Var("z"))
    assert evaluate(parse("8/4/2"), {}) == 1.0


def test_unary_minus():
    assert parse("-x^2") == Neg(Pow(Var("x"), 2))
    assert parse("-2") == Const(-2.0)
    assert parse("-2^2") == Neg(Pow(Const(2.0), 2))
    assert evaluate(parse("-2^2"), {}) == -4.0
    assert parse("x^-1") == Pow(Var("x"), -1)


def test_pi_is_a_constant():
    assert parse("pi") == Const(math.pi)
    assert evaluate(parse("sin(pi/2)"), {}) == 1.0


@pytest.mark.parametrize(
    "text, offset",
    [
        ("x + * y", 4),
        ("x\u00a0+ $", 5),  # NBSP is two bytes in UTF-8
        ("2^x", 2),
        ("2^1.5", 2),
        ("foo(x)", 0),
        ("(x + 1", 6),
        ("x y", 2),
        ("", 0),
        ("sin x", 4),
    ],
)
def test_syntax_error_offsets(text, offset):
    with pytest.raises(ExprSyntaxError) as info:
        parse(text)
    assert info.value.offset == offset, f"{text!r}: {info.value}"


def test_syntax_error_says_what_was_expected():
    with pytest.raises(ExprSyntaxError) as info:
        parse("sin x")
    assert "'(' after sin" in info.value.expected

    with pytest.raises(ExprSyntaxError) as info:
        parse("2^x")
    assert "integer exponent" in info.value.expected


@pytest.mark.parametrize(
    "text",
    [
        "x*sin(p*q) - 3",
        "-(x*y)",
        "x*(-y)",
        "(-x)^2",
        "(x^2)^3",
        "x/(y*z)",
        "x - (y - z)",
        "-1.5*x + 1e-05",
        "exp(-x^2)/sqrt(2*pi)",
        "log(1 + x^2)^-2",
    ],
)
def test_printed_text_parses_back(text):
    e = parse(text)
    assert parse(to_text(e)) == e


def test_simplified_random_trees_round_trip(make_expr):
    rng = np.random.default_rng(7)
    for _ in range(300):
        e = simplify(make_expr(rng, ("x", "y"), 3))
        assert parse(to_text(e)) == e, to_text(e)


def test_evaluate_domain_errors():
    with pytest.raises(DomainError):
        evaluate(parse("1/x"), {"x": 0.0})
    with pytest.raises(DomainError):
        evaluate(parse("log(x)"), {"x": 0.0})
    with pytest.raises(DomainError):
        evaluate(parse("sqrt(x)"), {"x": -1.0})
    with pytest.raises(DomainError):
        evaluate(parse("x^-2"), {"x": 0.0})


def test_evaluate_unknown_variable():
    with pytest.raises(UnknownVariableError) as info:
        evaluate(parse("x + y"), {"x": 1.0})
    assert info.value.names == ("y",)


def test_batch_evaluation_marks_undefined_points():
    out = evaluate_batch(parse("log(x)"), {"x": np.array([-1.0, 1.0, np.e])})
    assert np.isnan(out[0])
    np.testing.assert_allclose(out[1:], [0.0, 1.0])

    out = evaluate_batch(parse("1/x"), {"x": np.array([0.0, 2.0])})
    assert np.isnan(out[0]) and out[1] == 0.5


def test_batch_matches_scalar(make_expr):
    rng = np.random.default_rng(11)
    xs = rng.uniform(-1.0, 1.0, 50)
    ys = rng.uniform(-1.0, 1.0, 50)
    for _ in range(50):
        e = make_expr(rng, ("x", "y"), 3)
        batch = evaluate_batch(e, {"x": xs, "y": ys})
        scalar = [evaluate(e, {"x": a, "y": b}) for a, b in zip(xs, ys)]
        np.testing.assert_allclose(batch, scalar, rtol=1e-12, atol=1e-12)


def test_pow_rejects_non_integer_exponents():
    with pytest.raises(ValueError):
        Pow(Var("x"), 1.5)


def test_exponent_towers_are_capped():
    assert parse("x^10^3") == Pow(Var("x"), 1000)
    with pytest.raises(ExprSyntaxError) as exc:
        parse("x^10^10")
    assert exc.value.offset == 2
    with pytest.raises(ExprSyntaxError):
        parse("x^1001")
    with pytest.raises(ExprSyntaxError):
        parse("x^00000000000000000000000000002000")
