"""
Shared helpers for the poisres test suite.

These tests assert core invariants:
- exact differentiation and a bounded, idempotent simplifier
- Jacobi, Pfaffian and morphism identities on known structures
- deterministic reports for identical input and seed
"""

from typing import Sequence

import numpy as np
import pytest

from poisres.core.chart import Chart
from poisres.core.expr import Add, Const, Cos, Div, Exp, Expr, Log, Mul, Neg, Pow, Sin, Sqrt, Sub, Var
from poisres.core.poisson import PoissonStructure


def random_expr(rng: np.random.Generator, names: Sequence[str], depth: int) -> Expr:
    """
    Seeded random expression that is defined and smooth everywhere.

    Denominators, log and sqrt arguments are shifted away from zero
    (2 + sin, 2 + cos), exp only sees bounded arguments.
    """
    if depth == 0 or rng.random() < 0.25:
        if rng.random() < 0.7:
            return Var(str(rng.choice(list(names))))
        return Const(round(float(rng.uniform(-2.0, 2.0)), 1))

    sub = lambda: random_expr(rng, names, depth - 1)  # noqa: E731
    form = int(rng.integers(0, 11))
    if form == 0:
        return Add(sub(), sub())
    if form == 1:
        return Sub(sub(), sub())
    if form in (2, 3):
        return Mul(sub(), sub())
    if form == 4:
        return Div(sub(), Add(Const(2.0), Sin(sub())))
    if form == 5:
        return Neg(sub())
    if form == 6:
        leaf = Var(str(rng.choice(list(names))))
        return Pow(leaf, int(rng.integers(1, 4)))
    if form == 7:
        return Sin(sub())
    if form == 8:
        return Cos(sub())
    if form == 9:
        inner = Sin(sub()) if rng.random() < 0.5 else Cos(sub())
        return Exp(inner)
    if rng.random() < 0.5:
        return Log(Add(Const(2.0), Cos(sub())))
    return Sqrt(Add(Const(2.0), Sin(sub())))


def random_structure(rng: np.random.Generator, chart: Chart, depth: int = 1) -> PoissonStructure:
    """A random bivector on the chart (not necessarily Poisson)."""
    upper = {}
    for i in range(chart.dim):
        for j in range(i + 1, chart.dim):
            upper[(i, j)] = random_expr(rng, chart.coords, depth)
    return PoissonStructure(chart, upper)


@pytest.fixture
def plane() -> Chart:
    return Chart(("x", "y"), ((-2.0, 2.0), (-2.0, 2.0)))


@pytest.fixture
def source_plane() -> Chart:
    return Chart(("p", "q"), ((-1.0, 1.0), (-1.0, 1.0)))


@pytest.fixture
def make_expr():
    return random_expr


@pytest.fixture
def make_structure():
    return random_structure
