import numpy as np
import pytest

from poisres.core.calculus import differentiate, simplify
from poisres.core.expr import ONE, ZERO, Add, Const, Cos, Div, Mul, Neg, Pow, Sub, Var, evaluate
from poisres.core.parser import parse

x = Var("x")
y = Var("y")


@pytest.mark.parametrize(
    "before, after",
    [
        (Add(x, ZERO), x),
        (Add(ZERO, x), x),
        (Sub(x, ZERO), x),
        (Sub(ZERO, x), Neg(x)),
        (Sub(x, x), ZERO),
        (Mul(x, ZERO), ZERO),
        (Mul(ZERO, x), ZERO),
        (Mul(x, ONE), x),
        (Mul(ONE, x), x),
        (Mul(Const(-1.0), x), Neg(x)),
        (Div(ZERO, x), ZERO),
        (Div(x, ONE), x),
        (Neg(Neg(x)), x),
        (Pow(x, 0), ONE),
        (Pow(x, 1), x),
        (Add(Const(2.0), Mul(Const(3.0), Const(4.0))), Const(14.0)),
        (Mul(Add(x, ZERO), Pow(y, 1)), Mul(x, y)),
    ],
)
def test_simplify_rules(before, after):
    assert simplify(before) == after


def test_simplify_keeps_undefined_constants():
    e = Div(ONE, ZERO)
    assert simplify(e) == e


def test_derivative_rules():
    assert differentiate(parse("sin(x)"), "x") == Cos(x)
    assert differentiate(parse("x^3"), "x") == Mul(Const(3.0), Pow(x, 2))
    assert differentiate(parse("x*y"), "y") == x
    assert differentiate(parse("exp(x)"), "x") == parse("exp(x)")


def test_derivative_of_independent_expression_is_zero():
    assert differentiate(parse("sin(y)*exp(y^2)"), "x") == ZERO
    assert differentiate(Const(5.0), "x") == ZERO


def _five_point(e, env, name, h=1e-3):
    def at(shift):
        moved = dict(env)
        moved[name] = env[name] + shift
        return evaluate(e, moved)

    return (-at(2 * h) + 8 * at(h) - 8 * at(-h) + at(-2 * h)) / (12 * h)


def test_derivatives_match_finite_differences(make_expr):
    rng = np.random.default_rng(2024)
    for _ in range(500):
        e = make_expr(rng, ("x", "y"), 3)
        env = {"x": float(rng.uniform(-1.0, 1.0)), "y": float(rng.uniform(-1.0, 1.0))}
        f = evaluate(e, env)
        for name in ("x", "y"):
            exact = evaluate(differentiate(e, name), env)
            approx = _five_point(e, env, name)
            assert abs(exact - approx) <= 1e-5 * (1.0 + abs(exact) + abs(f)), (
                f"d/d{name} of {e} at {env}: exact {exact}, numeric {approx}"
            )


def test_simplify_is_idempotent(make_expr):
    rng = np.random.default_rng(5)
    for _ in range(300):
        e = make_expr(rng, ("x", "y"), 4)
        once = simplify(e)
        assert simplify(once) == once
        d = differentiate(e, "x")
        assert simplify(d) == d


def test_simplify_preserves_values(make_expr):
    rng = np.random.default_rng(9)
    for _ in range(200):
        e = make_expr(rng, ("x", "y"), 3)
        env = {"x": float(rng.uniform(-1.0, 1.0)), "y": float(rng.uniform(-1.0, 1.0))}
        a = evaluate(e, env)
        b = evaluate(simplify(e), env)
        assert abs(a - b) <= 1e-12 * (1.0 + abs(a))
