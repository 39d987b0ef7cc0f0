import pytest

from poisres.core.errors import DomainError, UnknownVariableError
from poisres.core.identity import Equivalent, NotEquivalent, equivalent
from poisres.core.parser import parse

BOX = {"x": (-2.0, 2.0), "y": (-2.0, 2.0)}


def test_trigonometric_identity():
    out = equivalent(parse("sin(x)^2 + cos(x)^2"), parse("1"), BOX)
    assert isinstance(out, Equivalent)
    assert out.ok and out.samples == 64


def test_polynomial_identity():
    assert equivalent(parse("(x + y)^2"), parse("x^2 + 2*x*y + y^2"), BOX).ok


def test_difference_is_found_with_witness():
    out = equivalent(parse("x"), parse("x + 1e-3"), BOX)
    assert isinstance(out, NotEquivalent)
    assert not out.ok
    assert out.gap == pytest.approx(1e-3, rel=1e-6)
    assert set(out.witness) == {"x", "y"}


def test_same_seed_same_witness():
    a = equivalent(parse("x*y"), parse("x*y + 1e-6*x"), BOX, seed=3)
    b = equivalent(parse("x*y"), parse("x*y + 1e-6*x"), BOX, seed=3)
    assert a == b


def test_partially_defined_expressions_skip_undefined_samples():
    out = equivalent(parse("exp(log(x))"), parse("x"), {"x": (-1.0, 1.0)})
    assert out.ok


def test_nowhere_defined_raises_after_draw_budget():
    with pytest.raises(DomainError):
        equivalent(parse("log(x)"), parse("0"), {"x": (-2.0, -1.0)}, n=16)


def test_variables_outside_the_box_are_rejected():
    with pytest.raises(UnknownVariableError):
        equivalent(parse("x + z"), parse("x"), BOX)


def test_sample_count_must_be_positive():
    with pytest.raises(ValueError):
        equivalent(parse("x"), parse("x"), BOX, n=0)
